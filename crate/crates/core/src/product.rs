//! Overflow-safe cocycle products `A^n(x) = A(f^{n-1} x) ... A(f x) A(x)`.

use serde::{Deserialize, Serialize};

use crate::base::BaseMap;
use crate::cocycle::Cocycle;
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::torus::TorusPoint;

/// Lower end of the renormalisation window for `|m|`.
pub const RENORM_LOW: f64 = 0.5;
/// Upper end of the renormalisation window for `|m|`.
pub const RENORM_HIGH: f64 = 2.0;

/// `exp(logscale) * m` with `|m|` kept inside `[1/2, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledProduct {
    pub m: Mat2,
    /// Natural-log scale.
    pub logscale: f64,
    pub renorm_count: u64,
}

impl ScaledProduct {
    pub fn identity() -> Self {
        ScaledProduct {
            m: Mat2::IDENTITY,
            logscale: 0.0,
            renorm_count: 0,
        }
    }

    /// `log |A^n|`.
    #[inline]
    pub fn log_norm(&self) -> f64 {
        self.logscale + self.m.norm().ln()
    }

    /// `exp(logscale) * m`; overflows for long products, use for small `n` only.
    pub fn to_matrix(&self) -> Mat2 {
        self.m.scale(self.logscale.exp())
    }

    /// Left-multiplies by `step` and renormalises when `|m|` leaves the window.
    #[inline]
    pub fn push(&mut self, step: Mat2) {
        self.m = step * self.m;
        let n = self.m.norm();
        if !(RENORM_LOW..=RENORM_HIGH).contains(&n) {
            self.renormalize_by(n);
        }
    }

    #[inline]
    fn renormalize_by(&mut self, n: f64) {
        if n > 0.0 && n.is_finite() {
            self.m = self.m.scale(1.0 / n);
            self.logscale += n.ln();
            self.renorm_count += 1;
        }
    }

    /// Scales `m` to unit norm, folding the factor into `logscale`.
    pub fn normalized(mut self) -> Self {
        let n = self.m.norm();
        if n > 0.0 && n.is_finite() && n != 1.0 {
            self.m = self.m.scale(1.0 / n);
            self.logscale += n.ln();
        }
        self
    }

    /// `self * earlier`, i.e. the product applied after `earlier`.
    pub fn compose(&self, earlier: &ScaledProduct) -> ScaledProduct {
        let mut out = ScaledProduct {
            m: self.m * earlier.m,
            logscale: self.logscale + earlier.logscale,
            renorm_count: self.renorm_count + earlier.renorm_count,
        };
        let n = out.m.norm();
        if !(RENORM_LOW..=RENORM_HIGH).contains(&n) {
            out.renormalize_by(n);
        }
        out
    }

    /// Relative distance to another product: log-scale gap plus distance of
    /// the unit-norm parts.
    pub fn relative_defect(&self, other: &ScaledProduct) -> f64 {
        let a = self.normalized();
        let b = other.normalized();
        (a.logscale - b.logscale).abs() + (a.m - b.m).norm()
    }
}

/// Walks a base orbit while accumulating the cocycle product.
#[derive(Debug, Clone)]
pub struct ProductWalker<'a> {
    cocycle: &'a Cocycle,
    base: &'a BaseMap,
    point: TorusPoint,
    product: ScaledProduct,
    steps: u64,
}

impl<'a> ProductWalker<'a> {
    pub fn new(cocycle: &'a Cocycle, base: &'a BaseMap, start: TorusPoint) -> Self {
        ProductWalker {
            cocycle,
            base,
            point: start,
            product: ScaledProduct::identity(),
            steps: 0,
        }
    }

    #[inline]
    pub fn step(&mut self) {
        self.product.push(self.cocycle.eval(self.point));
        self.point = self.base.apply(self.point);
        self.steps += 1;
    }

    pub fn advance(&mut self, n: u64) {
        for _ in 0..n {
            self.step();
        }
    }

    pub fn product(&self) -> &ScaledProduct {
        &self.product
    }

    /// Current base point `f^steps(start)`.
    pub fn point(&self) -> TorusPoint {
        self.point
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// `A^n(p)` as a normalised [`ScaledProduct`].
pub fn iterate(cocycle: &Cocycle, base: &BaseMap, p: TorusPoint, n: u64) -> Result<ScaledProduct> {
    if n == 0 {
        return Err(Error::Precondition("iterate requires n >= 1".into()));
    }
    let mut walker = ProductWalker::new(cocycle, base, p);
    walker.advance(n);
    Ok(walker.product.normalized())
}

/// The product along an explicit list of points, first point applied first.
pub fn product_along(cocycle: &Cocycle, points: impl IntoIterator<Item = TorusPoint>) -> ScaledProduct {
    let mut prod = ScaledProduct::identity();
    for p in points {
        prod.push(cocycle.eval(p));
    }
    prod.normalized()
}
