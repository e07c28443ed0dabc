//! Points of the flat 2-torus `R^2 / Z^2`.

use serde::{Deserialize, Serialize};

/// Reduces a real number into `[0, 1)`.
///
/// `x - floor(x)` can round up to exactly `1.0` for tiny negative inputs; that
/// value is mapped to `0.0` so the half-open range is strict.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed minimal-image difference of two circle coordinates, in `[-1/2, 1/2)`.
#[inline]
pub fn circle_delta(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - (d + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    u: f64,
    v: f64,
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint { u: 0.0, v: 0.0 };

    /// Builds a point, reducing both coordinates mod 1.
    #[inline]
    pub fn new(u: f64, v: f64) -> Self {
        TorusPoint {
            u: wrap_unit(u),
            v: wrap_unit(v),
        }
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.u
    }

    #[inline]
    pub fn v(&self) -> f64 {
        self.v
    }

    #[inline]
    pub fn coords(&self) -> [f64; 2] {
        [self.u, self.v]
    }

    /// Minimal-image displacement `self - other` as a vector in `[-1/2, 1/2)^2`.
    #[inline]
    pub fn delta(&self, other: &TorusPoint) -> [f64; 2] {
        [circle_delta(self.u, other.u), circle_delta(self.v, other.v)]
    }

    /// Quotient-metric distance. Never exceeds `sqrt(2)/2`.
    #[inline]
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        let [du, dv] = self.delta(other);
        du.hypot(dv)
    }

    /// Translates by a vector and reduces mod 1.
    #[inline]
    pub fn translate(&self, du: f64, dv: f64) -> Self {
        TorusPoint::new(self.u + du, self.v + dv)
    }
}

/// The `grid x grid` lattice `{(i/grid, j/grid)}` in row-major order (`i` outer).
pub fn lattice(grid: usize) -> impl Iterator<Item = TorusPoint> {
    let g = grid as f64;
    (0..grid).flat_map(move |i| (0..grid).map(move |j| TorusPoint::new(i as f64 / g, j as f64 / g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_keeps_half_open_range() {
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-1e-300), 0.0);
        assert_eq!(wrap_unit(2.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
    }

    #[test]
    fn distance_uses_nearest_translate() {
        let p = TorusPoint::new(0.05, 0.95);
        let q = TorusPoint::new(0.95, 0.05);
        assert!((p.distance(&q) - (0.02f64).sqrt()).abs() < 1e-15);
        let far = TorusPoint::new(0.5, 0.5).distance(&TorusPoint::ORIGIN);
        assert!((far - 0.5f64.hypot(0.5)).abs() < 1e-15);
    }

    #[test]
    fn lattice_is_row_major() {
        let pts: Vec<_> = lattice(2).collect();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1].coords(), [0.0, 0.5]);
        assert_eq!(pts[2].coords(), [0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn metric_axioms(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64,
                         d in -3.0..3.0f64, e in -3.0..3.0f64, f in -3.0..3.0f64) {
            let p = TorusPoint::new(a, b);
            let q = TorusPoint::new(c, d);
            let r = TorusPoint::new(e, f);
            for x in [p.u(), p.v(), q.u(), q.v()] {
                prop_assert!((0.0..1.0).contains(&x));
            }
            prop_assert_eq!(p.distance(&q), q.distance(&p));
            prop_assert_eq!(p.distance(&p), 0.0);
            prop_assert!(p.distance(&q) <= std::f64::consts::FRAC_1_SQRT_2 + 1e-15);
            prop_assert!(p.distance(&r) <= p.distance(&q) + q.distance(&r) + 1e-12);
        }
    }
}
