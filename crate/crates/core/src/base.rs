//! Measure-preserving maps of the 2-torus and their hyperbolicity data.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::{IntMat2, Mat2};
use crate::rng;
use crate::torus::{wrap_unit, TorusPoint};

/// Largest admissible `eps` for [`MapKind::PerturbedToral`].
///
/// Shears are diffeomorphisms for every `eps`; this bound keeps the
/// derivative within `2*pi*eps` of the linear part so that the cone field of
/// the linear model stays invariant and the conjugacy iteration contracts.
pub const MAX_PERTURBATION_EPS: f64 = 0.05;

/// Constant `c` in the margin factor `1 + c*eps` applied to the linear rate
/// of a perturbed automorphism.
pub const RATE_MARGIN_CONSTANT: f64 = 2.0 * TAU;

/// Divergence-free trigonometric perturbations. `g = L o S` with `S` a
/// composition of area-preserving shears.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbationMode {
    /// `S = S2 o S1`, `S1(u,v) = (u + eps sin 2pi v, v)`, `S2(u,v) = (u, v + eps sin 2pi u)`.
    ShearPair,
    /// `S = S1` only.
    SingleShear,
}

impl PerturbationMode {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbationMode::ShearPair => "shear_pair",
            PerturbationMode::SingleShear => "single_shear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "shear_pair" => Some(PerturbationMode::ShearPair),
            "single_shear" => Some(PerturbationMode::SingleShear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MapKind {
    LinearToral {
        l: IntMat2,
    },
    PerturbedToral {
        l: IntMat2,
        eps: f64,
        mode: PerturbationMode,
    },
    StandardMap {
        k: f64,
    },
    Rotation {
        alpha: f64,
        beta: f64,
    },
}

/// A validated base map. Construct through the named constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseMap {
    kind: MapKind,
}

/// Contraction rate `theta` of a hyperbolic splitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityRate {
    pub theta: f64,
    /// Rate of the linear part alone.
    pub linear_theta: f64,
    /// Inflation `theta / linear_theta`; exactly 1 for linear maps.
    pub margin_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub point: TorusPoint,
    pub period: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub samples: usize,
    pub max_det_deviation: f64,
}

fn shear1(x: [f64; 2], eps: f64) -> [f64; 2] {
    [x[0] + eps * (TAU * x[1]).sin(), x[1]]
}

fn shear2(x: [f64; 2], eps: f64) -> [f64; 2] {
    [x[0], x[1] + eps * (TAU * x[0]).sin()]
}

impl BaseMap {
    pub fn linear_toral(l: IntMat2) -> Result<Self> {
        if l.det().abs() != 1 {
            return Err(Error::InvalidBase(format!(
                "linear_toral matrix must be unimodular, det = {}",
                l.det()
            )));
        }
        Ok(BaseMap {
            kind: MapKind::LinearToral { l },
        })
    }

    /// The cat map `[[2,1],[1,1]]`.
    pub fn cat_map() -> Self {
        BaseMap::linear_toral(IntMat2::new(2, 1, 1, 1)).expect("cat map is unimodular")
    }

    pub fn perturbed_toral(l: IntMat2, eps: f64, mode: PerturbationMode) -> Result<Self> {
        if l.det().abs() != 1 {
            return Err(Error::InvalidBase(format!(
                "perturbed_toral matrix must be unimodular, det = {}",
                l.det()
            )));
        }
        if l.trace().abs() <= 2 {
            return Err(Error::InvalidBase(format!(
                "perturbed_toral requires |trace L| > 2, got {}",
                l.trace()
            )));
        }
        if !(0.0..=MAX_PERTURBATION_EPS).contains(&eps) {
            return Err(Error::InvalidBase(format!(
                "eps = {eps} outside [0, {MAX_PERTURBATION_EPS}]"
            )));
        }
        Ok(BaseMap {
            kind: MapKind::PerturbedToral { l, eps, mode },
        })
    }

    pub fn standard_map(k: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidBase(format!("standard map requires K >= 0, got {k}")));
        }
        Ok(BaseMap {
            kind: MapKind::StandardMap { k },
        })
    }

    pub fn rotation(alpha: f64, beta: f64) -> Result<Self> {
        for (name, x) in [("alpha", alpha), ("beta", beta)] {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::InvalidBase(format!("rotation {name} = {x} outside (0, 1)")));
            }
        }
        Ok(BaseMap {
            kind: MapKind::Rotation { alpha, beta },
        })
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MapKind::LinearToral { .. } => "linear_toral",
            MapKind::PerturbedToral { .. } => "perturbed_toral",
            MapKind::StandardMap { .. } => "standard_map",
            MapKind::Rotation { .. } => "rotation",
        }
    }

    /// Integer linear part for toral variants.
    pub fn linear_part(&self) -> Option<IntMat2> {
        match self.kind {
            MapKind::LinearToral { l } | MapKind::PerturbedToral { l, .. } => Some(l),
            _ => None,
        }
    }

    /// Same map with a different perturbation size (perturbed variants only).
    pub fn with_eps(&self, new_eps: f64) -> Result<Self> {
        match self.kind {
            MapKind::PerturbedToral { l, mode, .. } => BaseMap::perturbed_toral(l, new_eps, mode),
            _ => Err(Error::Unsupported(format!("{} has no eps parameter", self.name()))),
        }
    }

    /// Shear part `S` of a perturbed automorphism on lifted coordinates.
    fn shear_lift(eps: f64, mode: PerturbationMode, x: [f64; 2]) -> [f64; 2] {
        let y = shear1(x, eps);
        match mode {
            PerturbationMode::ShearPair => shear2(y, eps),
            PerturbationMode::SingleShear => y,
        }
    }

    fn shear_lift_inverse(eps: f64, mode: PerturbationMode, y: [f64; 2]) -> [f64; 2] {
        let z = match mode {
            PerturbationMode::ShearPair => shear2(y, -eps),
            PerturbationMode::SingleShear => y,
        };
        shear1(z, -eps)
    }

    /// The map acting on lifted (unreduced) coordinates; `Some` only for toral
    /// variants, whose lifts are well defined up to the integer lattice.
    pub fn lift_apply(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        match self.kind {
            MapKind::LinearToral { l } => Some(l.apply(x)),
            MapKind::PerturbedToral { l, eps, mode } => Some(l.apply(Self::shear_lift(eps, mode, x))),
            _ => None,
        }
    }

    pub fn apply(&self, p: TorusPoint) -> TorusPoint {
        let x = p.coords();
        match self.kind {
            MapKind::LinearToral { l } => {
                let y = l.apply(x);
                TorusPoint::new(y[0], y[1])
            }
            MapKind::PerturbedToral { l, eps, mode } => {
                let s = Self::shear_lift(eps, mode, x);
                let y = l.apply(s);
                TorusPoint::new(y[0], y[1])
            }
            MapKind::StandardMap { k } => {
                let kick = k / TAU * (TAU * x[0]).sin();
                let v = x[1] + kick;
                TorusPoint::new(x[0] + v, v)
            }
            MapKind::Rotation { alpha, beta } => TorusPoint::new(x[0] + alpha, x[1] + beta),
        }
    }

    pub fn apply_inverse(&self, p: TorusPoint) -> TorusPoint {
        let y = p.coords();
        match self.kind {
            MapKind::LinearToral { l } => {
                let li = l.unimodular_inverse().expect("validated unimodular");
                let x = li.apply(y);
                TorusPoint::new(x[0], x[1])
            }
            MapKind::PerturbedToral { l, eps, mode } => {
                let li = l.unimodular_inverse().expect("validated unimodular");
                let z = li.apply(y);
                let x = Self::shear_lift_inverse(eps, mode, z);
                TorusPoint::new(x[0], x[1])
            }
            MapKind::StandardMap { k } => {
                let u = wrap_unit(y[0] - y[1]);
                let v = y[1] - k / TAU * (TAU * u).sin();
                TorusPoint::new(u, v)
            }
            MapKind::Rotation { alpha, beta } => TorusPoint::new(y[0] - alpha, y[1] - beta),
        }
    }

    /// `[p, f(p), ..., f^n(p)]`; negative `n` iterates the inverse.
    pub fn orbit(&self, p: TorusPoint, n: i64) -> Vec<TorusPoint> {
        let steps = n.unsigned_abs() as usize;
        let mut out = Vec::with_capacity(steps + 1);
        let mut x = p;
        out.push(x);
        for _ in 0..steps {
            x = if n >= 0 { self.apply(x) } else { self.apply_inverse(x) };
            out.push(x);
        }
        out
    }

    /// `f^n(p)` for `n >= 0`, `f^{-|n|}(p)` otherwise.
    pub fn iterate_point(&self, p: TorusPoint, n: i64) -> TorusPoint {
        let mut x = p;
        for _ in 0..n.unsigned_abs() {
            x = if n >= 0 { self.apply(x) } else { self.apply_inverse(x) };
        }
        x
    }

    /// Closed-form Jacobian `Df(p)`.
    pub fn jacobian(&self, p: TorusPoint) -> Mat2 {
        match self.kind {
            MapKind::LinearToral { l } => l.to_f64(),
            MapKind::PerturbedToral { l, eps, mode } => {
                let [u, v] = p.coords();
                let ds1 = Mat2::new(1.0, eps * TAU * (TAU * v).cos(), 0.0, 1.0);
                let ds = match mode {
                    PerturbationMode::SingleShear => ds1,
                    PerturbationMode::ShearPair => {
                        let u1 = u + eps * (TAU * v).sin();
                        let ds2 = Mat2::new(1.0, 0.0, eps * TAU * (TAU * u1).cos(), 1.0);
                        ds2 * ds1
                    }
                };
                l.to_f64() * ds
            }
            MapKind::StandardMap { k } => {
                let c = k * (TAU * p.u()).cos();
                Mat2::new(1.0 + c, 1.0, c, 1.0)
            }
            MapKind::Rotation { .. } => Mat2::IDENTITY,
        }
    }

    /// Contraction rate of the hyperbolic splitting, `None` when the map has none.
    pub fn hyperbolicity_rate(&self) -> Option<HyperbolicityRate> {
        let (l, eps) = match self.kind {
            MapKind::LinearToral { l } => (l, 0.0),
            MapKind::PerturbedToral { l, eps, .. } => (l, eps),
            _ => return None,
        };
        let t = l.trace() as f64;
        if t.abs() <= 2.0 {
            return None;
        }
        let det = l.det() as f64;
        let lambda_max = 0.5 * (t.abs() + (t * t - 4.0 * det).sqrt());
        let linear_theta = 1.0 / lambda_max;
        let margin_factor = 1.0 + RATE_MARGIN_CONSTANT * eps;
        let theta = linear_theta * margin_factor;
        if theta >= 1.0 {
            return None;
        }
        Some(HyperbolicityRate {
            theta,
            linear_theta,
            margin_factor,
        })
    }

    /// All points with `f^period(p) = p`.
    ///
    /// Supported: linear automorphisms with `det(L^n - I) != 0`, and the
    /// standard map with `period == 1`, `K > 0`.
    pub fn periodic_points(&self, period: usize) -> Result<Vec<PeriodicPoint>> {
        if period == 0 {
            return Err(Error::Precondition("period must be >= 1".into()));
        }
        match self.kind {
            MapKind::LinearToral { l } => linear_periodic_points(l, period),
            MapKind::StandardMap { k } if period == 1 => {
                if k == 0.0 {
                    return Err(Error::Unsupported(
                        "standard map with K = 0 has a circle of fixed points".into(),
                    ));
                }
                Ok(standard_map_fixed_points(k)
                    .into_iter()
                    .map(|point| PeriodicPoint { point, period })
                    .collect())
            }
            _ => Err(Error::Unsupported(format!(
                "periodic points of {} with period {period}",
                self.name()
            ))),
        }
    }

    /// Max `|det Df - 1|` over `samples` quasi-random points.
    pub fn check_measure_preservation(&self, samples: usize, seed: u64) -> MeasureReport {
        let max_det_deviation = rng::quasi_random_points(samples.max(1), seed)
            .map(|p| (self.jacobian(p).det() - 1.0).abs())
            .fold(0.0, f64::max);
        MeasureReport {
            samples: samples.max(1),
            max_det_deviation,
        }
    }
}

/// Fixed points of the standard map: `v = 0`, `sin(2 pi u) = 2 pi m / K`.
fn standard_map_fixed_points(k: f64) -> Vec<TorusPoint> {
    let mut us: Vec<f64> = Vec::new();
    let m_max = (k / TAU).floor() as i64;
    for m in -m_max..=m_max {
        let s = (TAU * m as f64 / k).clamp(-1.0, 1.0);
        let base = s.asin() / TAU;
        for u in [wrap_unit(base), wrap_unit(0.5 - base)] {
            if !us.iter().any(|&w| (w - u).abs() < 1e-15) {
                us.push(u);
            }
        }
    }
    us.sort_by(f64::total_cmp);
    us.into_iter().map(|u| TorusPoint::new(u, 0.0)).collect()
}

/// Solves `(L^n - I) x = 0 mod 1`.
///
/// With `M = L^n - I` and `N = |det M|`, the solutions are `adj(M) k / det M`,
/// so their numerators over `N` form the subgroup of `(Z/N)^2` generated by the
/// columns of `adj(M)`. That subgroup has exactly `N` elements; it is
/// enumerated by breadth-first search.
fn linear_periodic_points(l: IntMat2, period: usize) -> Result<Vec<PeriodicPoint>> {
    let n = u32::try_from(period).map_err(|_| Error::Overflow("period".into()))?;
    let ln = l
        .checked_pow(n)
        .ok_or_else(|| Error::Overflow(format!("L^{period}")))?;
    let m = IntMat2::new(ln.a - 1, ln.b, ln.c, ln.d - 1);
    let det = m
        .a
        .checked_mul(m.d)
        .and_then(|x| m.b.checked_mul(m.c).and_then(|y| x.checked_sub(y)))
        .ok_or_else(|| Error::Overflow(format!("det(L^{period} - I)")))?;
    if det == 0 {
        return Err(Error::Unsupported(format!(
            "det(L^{period} - I) = 0: periodic set is not finite"
        )));
    }
    let big_n = det.unsigned_abs() as i64;
    if big_n > 50_000_000 {
        return Err(Error::Unsupported(format!(
            "{big_n} periodic points of period {period} is too many to enumerate"
        )));
    }
    let gens = [
        (m.d.rem_euclid(big_n), (-m.c).rem_euclid(big_n)),
        ((-m.b).rem_euclid(big_n), m.a.rem_euclid(big_n)),
    ];
    let mut seen: BTreeSet<(i64, i64)> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert((0, 0));
    queue.push_back((0i64, 0i64));
    while let Some((x, y)) = queue.pop_front() {
        for (gx, gy) in gens {
            let next = ((x + gx) % big_n, (y + gy) % big_n);
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    let denom = big_n as f64;
    Ok(seen
        .into_iter()
        .map(|(x, y)| PeriodicPoint {
            point: TorusPoint::new(x as f64 / denom, y as f64 / denom),
            period,
        })
        .collect())
}
