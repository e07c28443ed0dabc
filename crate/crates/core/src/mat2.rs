//! 2x2 real and integer matrices.
//!
//! Singular values use the rotation decomposition `M = R(phi) diag(s1, s2) R(theta)`
//! with `s1 = Q + R`, `s2 = Q - R`, `Q = |(E, H)|`, `R = |(F, G)|`; unlike the
//! `s^2 - 4 det^2` discriminant form this stays accurate for near-orthogonal inputs.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|det - 1|` for values tagged as SL(2,R).
pub const SL2_DET_TOL: f64 = 1e-9;

/// Row-major 2x2 real matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Singular value decomposition of a [`Mat2`].
#[derive(Debug, Clone, Copy)]
pub struct Svd2 {
    pub s_max: f64,
    pub s_min: f64,
    /// Unit vector `u` with `M v_max = s_max u`.
    pub left_max: [f64; 2],
    /// Unit vector maximising `|M v|`.
    pub right_max: [f64; 2],
    /// Unit vector minimising `|M v|`.
    pub right_min: [f64; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    #[inline]
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    /// Builds a matrix and checks it lies in SL(2,R) within [`SL2_DET_TOL`].
    pub fn sl2(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Mat2::new(a, b, c, d);
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::InvalidCocycle("matrix entries must be finite".into()));
        }
        if (m.det() - 1.0).abs() > SL2_DET_TOL {
            return Err(Error::InvalidCocycle(format!(
                "determinant {} is not 1 within {SL2_DET_TOL:e}",
                m.det()
            )));
        }
        Ok(m)
    }

    #[inline]
    pub fn diag(x: f64, y: f64) -> Self {
        Mat2::new(x, 0.0, 0.0, y)
    }

    /// Counter-clockwise rotation by `angle` radians.
    #[inline]
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    #[inline]
    pub fn scale(&self, k: f64) -> Self {
        Mat2::new(self.a * k, self.b * k, self.c * k, self.d * k)
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    /// General inverse; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    /// Inverse of a determinant-one matrix (the adjugate). No division.
    #[inline]
    pub fn sl2_inverse(&self) -> Self {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    #[inline]
    fn qr_parts(&self) -> (f64, f64) {
        let e = 0.5 * (self.a + self.d);
        let f = 0.5 * (self.a - self.d);
        let g = 0.5 * (self.c + self.b);
        let h = 0.5 * (self.c - self.b);
        (e.hypot(h), f.hypot(g))
    }

    /// Operator (spectral) norm.
    #[inline]
    pub fn norm(&self) -> f64 {
        let (q, r) = self.qr_parts();
        q + r
    }

    /// Smallest singular value.
    #[inline]
    pub fn min_singular(&self) -> f64 {
        let (q, r) = self.qr_parts();
        (q - r).abs()
    }

    pub fn svd(&self) -> Svd2 {
        let e = 0.5 * (self.a + self.d);
        let f = 0.5 * (self.a - self.d);
        let g = 0.5 * (self.c + self.b);
        let h = 0.5 * (self.c - self.b);
        let q = e.hypot(h);
        let r = f.hypot(g);
        let a1 = g.atan2(f);
        let a2 = h.atan2(e);
        let theta = 0.5 * (a2 - a1);
        let phi = 0.5 * (a2 + a1);
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        Svd2 {
            s_max: q + r,
            s_min: (q - r).abs(),
            left_max: [cp, sp],
            right_max: [ct, -st],
            right_min: [st, ct],
        }
    }

    /// Eigenvalues when real, largest modulus first.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let t = self.trace();
        let disc = t * t - 4.0 * self.det();
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let big = if t >= 0.0 { 0.5 * (t + s) } else { 0.5 * (t - s) };
        let small = if big != 0.0 { self.det() / big } else { 0.0 };
        Some((big, small))
    }

    /// Spectral radius.
    pub fn spectral_radius(&self) -> f64 {
        match self.real_eigenvalues() {
            Some((big, _)) => big.abs(),
            None => self.det().abs().sqrt(),
        }
    }

    /// Unit eigenvector for a real eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: f64) -> [f64; 2] {
        // Rows of (M - lambda I) are orthogonal to the eigenvector; use the larger.
        let r1 = [self.a - lambda, self.b];
        let r2 = [self.c, self.d - lambda];
        let n1 = r1[0].hypot(r1[1]);
        let n2 = r2[0].hypot(r2[1]);
        let (row, n) = if n1 >= n2 { (r1, n1) } else { (r2, n2) };
        if n == 0.0 {
            return [1.0, 0.0];
        }
        [-row[1] / n, row[0] / n]
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    #[inline]
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    #[inline]
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    #[inline]
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

/// Unit vector angle helpers.
#[inline]
pub fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// `|v x w|` for unit vectors: the sine of the angle between the lines they span.
#[inline]
pub fn wedge(v: [f64; 2], w: [f64; 2]) -> f64 {
    (v[0] * w[1] - v[1] * w[0]).abs()
}

/// Angle in `[0, pi/2]` between the lines spanned by two nonzero vectors.
#[inline]
pub fn line_angle(v: [f64; 2], w: [f64; 2]) -> f64 {
    let cross = (v[0] * w[1] - v[1] * w[0]).abs();
    let dot = (v[0] * w[0] + v[1] * w[1]).abs();
    cross.atan2(dot)
}

/// Integer 2x2 matrix, used for toral automorphisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMat2 {
    pub const IDENTITY: IntMat2 = IntMat2 {
        a: 1,
        b: 0,
        c: 0,
        d: 1,
    };

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        IntMat2 { a, b, c, d }
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub fn to_f64(&self) -> Mat2 {
        Mat2::new(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
    }

    /// Inverse of a unimodular matrix, `None` when `|det| != 1`.
    pub fn unimodular_inverse(&self) -> Option<IntMat2> {
        match self.det() {
            1 => Some(IntMat2::new(self.d, -self.b, -self.c, self.a)),
            -1 => Some(IntMat2::new(-self.d, self.b, self.c, -self.a)),
            _ => None,
        }
    }

    pub fn checked_mul(&self, o: &IntMat2) -> Option<IntMat2> {
        let e = |x: i64, y: i64, z: i64, w: i64| x.checked_mul(y)?.checked_add(z.checked_mul(w)?);
        Some(IntMat2::new(
            e(self.a, o.a, self.b, o.c)?,
            e(self.a, o.b, self.b, o.d)?,
            e(self.c, o.a, self.d, o.c)?,
            e(self.c, o.b, self.d, o.d)?,
        ))
    }

    pub fn checked_pow(&self, n: u32) -> Option<IntMat2> {
        let mut acc = IntMat2::IDENTITY;
        for _ in 0..n {
            acc = self.checked_mul(&acc)?;
        }
        Some(acc)
    }

    #[inline]
    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.a as f64 * x[0] + self.b as f64 * x[1],
            self.c as f64 * x[0] + self.d as f64 * x[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rotation_norm_is_exact() {
        for k in 0..50 {
            let r = Mat2::rotation(0.137 * k as f64);
            assert_abs_diff_eq!(r.norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn diagonal_norms() {
        assert_abs_diff_eq!(Mat2::diag(2.0, 0.5).norm(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Mat2::diag(1.0, -0.5).norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Mat2::diag(2.0, 0.5).min_singular(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cat_matrix_eigen() {
        let m = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let (big, small) = m.real_eigenvalues().unwrap();
        let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(big, phi2, epsilon = 1e-14);
        assert_abs_diff_eq!(small, 1.0 / phi2, epsilon = 1e-14);
        let e = m.eigenvector(big);
        let me = m.apply(e);
        assert_abs_diff_eq!(me[0], big * e[0], epsilon = 1e-13);
        assert_abs_diff_eq!(me[1], big * e[1], epsilon = 1e-13);
    }

    #[test]
    fn sl2_rejects_bad_determinant() {
        assert!(Mat2::sl2(2.0, 0.0, 0.0, 2.0).is_err());
        assert!(Mat2::sl2(2.0, 1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn integer_inverse_and_power() {
        let l = IntMat2::new(2, 1, 1, 1);
        assert_eq!(l.unimodular_inverse().unwrap(), IntMat2::new(1, -1, -1, 2));
        assert_eq!(l.checked_pow(2).unwrap(), IntMat2::new(5, 3, 3, 2));
        assert!(IntMat2::new(2, 0, 0, 1).unimodular_inverse().is_none());
    }

    fn sl2_strategy() -> impl Strategy<Value = Mat2> {
        (-3.0..3.0f64, -3.0..3.0f64, 0.2..3.0f64).prop_map(|(t1, t2, s)| {
            Mat2::rotation(t1) * Mat2::diag(s, 1.0 / s) * Mat2::rotation(t2)
        })
    }

    proptest! {
        #[test]
        fn inverse_norm_reciprocity(m in sl2_strategy()) {
            prop_assert!((m.det() - 1.0).abs() < 1e-12);
            prop_assert!((m.norm() - m.sl2_inverse().norm()).abs() <= 1e-12 * m.norm());
        }

        #[test]
        fn svd_vectors_are_consistent(a in -4.0..4.0f64, b in -4.0..4.0f64,
                                      c in -4.0..4.0f64, d in -4.0..4.0f64) {
            let m = Mat2::new(a, b, c, d);
            let s = m.svd();
            let img = m.apply(s.right_max);
            prop_assert!((img[0] - s.s_max * s.left_max[0]).abs() < 1e-9);
            prop_assert!((img[1] - s.s_max * s.left_max[1]).abs() < 1e-9);
            let lo = m.apply(s.right_min);
            prop_assert!((lo[0].hypot(lo[1]) - s.s_min).abs() < 1e-9);
            prop_assert!((s.s_max * s.s_min - m.det().abs()).abs() < 1e-9 * (1.0 + s.s_max * s.s_max));
        }
    }
}
