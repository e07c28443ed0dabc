//! Regularity and spectrum classification.
//!
//! Every supremum computed here is a maximum over a finite sample (grid or
//! seeded pairs) and therefore a lower bound for the true value.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BaseMap;
use crate::cocycle::{derivative_cocycle, Cocycle};
use crate::error::{Error, Result};
use crate::lyapunov::{integrated_exponent, MeasureSpec, LAMBDA_MIN};
use crate::mat2::{normalize, Mat2};
use crate::product::product_along;
use crate::rng;
use crate::torus::{lattice, TorusPoint};

/// Cone half-angle as a multiple of the observed direction spread.
pub const CONE_SPREAD_FACTOR: f64 = 3.0;
/// Smallest cone half-angle (radians).
pub const MIN_CONE_HALF_ANGLE: f64 = 1e-6;
/// Cones wider than this are not informative.
pub const MAX_CONE_HALF_ANGLE: f64 = 0.45 * PI;
/// One-step expansion must exceed `1 + EXPANSION_MARGIN`.
pub const EXPANSION_MARGIN: f64 = 1e-3;
/// Trace tolerance for parabolic periodic points.
pub const PARABOLIC_TOL: f64 = 1e-9;
/// Return-distance tolerance for periodic points.
pub const PERIODIC_TOL: f64 = 1e-9;

/// Dyadic exponents of the structured near-diagonal pairs.
const NEAR_DIAGONAL_K: std::ops::RangeInclusive<i32> = 3..=12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderSample {
    pub value: f64,
    pub pairs_evaluated: usize,
    /// Always true: a sampled maximum.
    pub lower_bound: bool,
}

/// `pairs` uniform random pairs plus, for each `k` in `3..=12`, pairs at
/// separation `2^-k` along the two axes, the diagonal and a random direction.
pub fn holder_pairs(pairs: usize, seed: u64) -> Vec<(TorusPoint, TorusPoint)> {
    let mut rng = rng::substream(seed, 0);
    let mut out = Vec::with_capacity(pairs * (1 + 4 * NEAR_DIAGONAL_K.count()));
    for _ in 0..pairs {
        out.push((rng::uniform_point(&mut rng), rng::uniform_point(&mut rng)));
    }
    for k in NEAR_DIAGONAL_K {
        let s = 2f64.powi(-k);
        for _ in 0..pairs {
            let x = rng::uniform_point(&mut rng);
            let theta: f64 = rng.gen::<f64>() * TAU;
            let dirs = [[1.0, 0.0], [0.0, 1.0], [FRAC_1_SQRT_2, FRAC_1_SQRT_2], [theta.cos(), theta.sin()]];
            for d in dirs {
                out.push((x, x.translate(s * d[0], s * d[1])));
            }
        }
    }
    out
}

use std::f64::consts::FRAC_1_SQRT_2;

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Precondition(format!("Hölder exponent must lie in (0, 1], got {nu}")));
    }
    Ok(())
}

/// `max ||F(x) - F(y)|| / d(x, y)^nu` over a pair set.
pub(crate) fn seminorm_over<F>(pairs: &[(TorusPoint, TorusPoint)], nu: f64, field: F) -> f64
where
    F: Fn(TorusPoint) -> Mat2 + Sync,
{
    pairs
        .par_iter()
        .map(|(x, y)| {
            let d = x.distance(y);
            if d == 0.0 {
                0.0
            } else {
                (field(*x) - field(*y)).norm() / d.powf(nu)
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// Sampled `|A|_nu`. Refuses discontinuous families.
pub fn holder_seminorm(a: &Cocycle, nu: f64, pairs: usize, seed: u64) -> Result<HolderSample> {
    check_nu(nu)?;
    if pairs < 100 {
        return Err(Error::Precondition(format!("holder_seminorm needs >= 100 pairs, got {pairs}")));
    }
    if !a.is_continuous_family() {
        return Err(Error::NonHolderFamily(a.family_name().into()));
    }
    let set = holder_pairs(pairs, seed);
    Ok(HolderSample {
        value: seminorm_over(&set, nu, |p| a.eval(p)),
        pairs_evaluated: set.len(),
        lower_bound: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub dominated: bool,
    /// `max ||A(x)|| ||A(x)^-1|| theta^nu` over the grid.
    pub worst: f64,
    pub argmax: TorusPoint,
    pub theta: f64,
}

pub fn domination_check(a: &Cocycle, f: &BaseMap, nu: f64, grid: usize) -> Result<DominationReport> {
    check_nu(nu)?;
    if grid < 16 {
        return Err(Error::Precondition(format!("domination grid must be >= 16, got {grid}")));
    }
    let theta = f.hyperbolicity_rate().ok_or(Error::BaseNotHyperbolic)?.theta;
    let factor = theta.powf(nu);
    let pts: Vec<TorusPoint> = lattice(grid).collect();
    let (worst, argmax) = pts
        .par_iter()
        .map(|&p| {
            let m = a.eval(p);
            let inv = m.inverse().unwrap_or_else(|| m.sl2_inverse());
            (m.norm() * inv.norm() * factor, p)
        })
        .reduce(|| (f64::NEG_INFINITY, TorusPoint::ORIGIN), |x, y| if y.0 > x.0 { y } else { x });
    Ok(DominationReport {
        dominated: worst < 1.0,
        worst,
        argmax,
        theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    /// Candidate directions did not settle; the fitted cone is too wide.
    ConeDegenerate,
    /// The cone field is invariant but one step does not expand it.
    NoOneStepExpansion,
}

impl InconclusiveReason {
    pub fn code(&self) -> &'static str {
        match self {
            InconclusiveReason::ConeDegenerate => "cone_degenerate",
            InconclusiveReason::NoOneStepExpansion => "no_one_step_expansion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HyperbolicityOutcome {
    Hyperbolic { lambda: f64, cone_margin: f64 },
    NotHyperbolic { witness: TorusPoint },
    Inconclusive { reason: InconclusiveReason },
}

/// Candidate unstable direction at `z` from the product over the `window`
/// preimages of `z`, with its log growth rate and the angle between the
/// images of two transverse probe vectors.
struct Candidate {
    dir: [f64; 2],
    growth: f64,
    spread: f64,
}

const PROBE_A: f64 = 0.4;
const PROBE_B: f64 = 1.9;

fn candidate(a: &Cocycle, f: &BaseMap, z: TorusPoint, window: u64) -> Candidate {
    let mut back = Vec::with_capacity(window as usize);
    let mut x = z;
    for _ in 0..window {
        x = f.apply_inverse(x);
        back.push(x);
    }
    let prod = product_along(a, back.into_iter().rev());
    let d1 = prod.m.apply([PROBE_A.cos(), PROBE_A.sin()]);
    let d2 = prod.m.apply([PROBE_B.cos(), PROBE_B.sin()]);
    Candidate {
        dir: prod.m.svd().left_max,
        growth: prod.log_norm() / window as f64,
        spread: crate::mat2::line_angle(d1, d2),
    }
}

/// Signed angle from line `e` to line `w`, in `(-pi/2, pi/2]`.
fn projective_angle(e: [f64; 2], w: [f64; 2]) -> f64 {
    let mut t = (e[0] * w[1] - e[1] * w[0]).atan2(e[0] * w[0] + e[1] * w[1]);
    if t > FRAC_PI_2 {
        t -= PI;
    } else if t <= -FRAC_PI_2 {
        t += PI;
    }
    t
}

fn rotate(v: [f64; 2], t: f64) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Smallest `|M v|` over unit `v` in the cone of half-angle `alpha` about `e`.
fn min_expansion_on_cone(m: &Mat2, e: [f64; 2], alpha: f64) -> f64 {
    let norm_of = |v: [f64; 2]| {
        let w = m.apply(v);
        w[0].hypot(w[1])
    };
    let mut best = norm_of(rotate(e, alpha)).min(norm_of(rotate(e, -alpha))).min(norm_of(e));
    let svd = m.svd();
    if projective_angle(e, svd.right_min).abs() <= alpha {
        best = best.min(svd.s_min);
    }
    best
}

struct PointCheck {
    point: TorusPoint,
    margin: f64,
    expansion: f64,
}

/// Cone-field test for uniform hyperbolicity.
pub fn uniform_hyperbolicity_test(a: &Cocycle, f: &BaseMap, grid: usize, window: usize) -> Result<HyperbolicityOutcome> {
    if grid < 16 {
        return Err(Error::Precondition(format!("hyperbolicity grid must be >= 16, got {grid}")));
    }
    if window < 8 {
        return Err(Error::Precondition(format!("n_window must be >= 8, got {window}")));
    }
    let window = window as u64;
    let pts: Vec<TorusPoint> = lattice(grid).collect();
    let cands: Vec<(Candidate, Candidate)> = pts
        .par_iter()
        .map(|&x| (candidate(a, f, x, window), candidate(a, f, f.apply(x), window)))
        .collect();

    let (min_growth, weakest) = cands
        .iter()
        .zip(&pts)
        .map(|((c, _), p)| (c.growth, *p))
        .fold((f64::INFINITY, TorusPoint::ORIGIN), |acc, g| if g.0 < acc.0 { g } else { acc });
    if min_growth <= LAMBDA_MIN {
        return Ok(HyperbolicityOutcome::NotHyperbolic { witness: weakest });
    }

    let spread = cands.iter().map(|(c, d)| c.spread.max(d.spread)).fold(0.0, f64::max);
    let alpha = (CONE_SPREAD_FACTOR * spread).max(MIN_CONE_HALF_ANGLE);
    if alpha >= MAX_CONE_HALF_ANGLE {
        return Ok(HyperbolicityOutcome::Inconclusive {
            reason: InconclusiveReason::ConeDegenerate,
        });
    }

    let checks: Vec<PointCheck> = pts
        .par_iter()
        .zip(cands.par_iter())
        .map(|(&x, (here, there))| {
            let m = a.eval(x);
            let e = here.dir;
            let target = there.dir;
            let lo = projective_angle(target, m.apply(rotate(e, -alpha)));
            let mid = projective_angle(target, m.apply(e));
            let hi = projective_angle(target, m.apply(rotate(e, alpha)));
            let ordered = lo < mid && mid < hi;
            let margin = if ordered { alpha - lo.abs().max(hi.abs()) } else { -alpha };
            PointCheck {
                point: x,
                margin,
                expansion: min_expansion_on_cone(&m, e, alpha),
            }
        })
        .collect();

    let worst = checks
        .iter()
        .min_by(|p, q| p.margin.total_cmp(&q.margin))
        .expect("grid is nonempty");
    if worst.margin <= 0.0 {
        return Ok(HyperbolicityOutcome::NotHyperbolic { witness: worst.point });
    }
    let expansion = checks.iter().map(|c| c.expansion).fold(f64::INFINITY, f64::min);
    if expansion > 1.0 + EXPANSION_MARGIN {
        Ok(HyperbolicityOutcome::Hyperbolic {
            lambda: expansion.ln(),
            cone_margin: worst.margin,
        })
    } else {
        Ok(HyperbolicityOutcome::Inconclusive {
            reason: InconclusiveReason::NoOneStepExpansion,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub n_steps: u64,
    pub measure: MeasureSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypConfig {
    pub grid: usize,
    pub n_window: usize,
    pub lambda_min: f64,
}

impl Default for HypConfig {
    fn default() -> Self {
        HypConfig {
            grid: 32,
            n_window: 16,
            lambda_min: LAMBDA_MIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum ClassificationVerdict {
    UniformlyHyperbolic { lambda: f64, cone_margin: f64 },
    /// `lambda_bound` is the measured integrated exponent, at most `lambda_min`.
    TrivialSpectrum { lambda_bound: f64 },
    SimpleNonuniform { lambda: f64, witness: TorusPoint },
    Inconclusive { reason: InconclusiveReason, lambda: f64 },
}

impl ClassificationVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            ClassificationVerdict::UniformlyHyperbolic { .. } => "UniformlyHyperbolic",
            ClassificationVerdict::TrivialSpectrum { .. } => "TrivialSpectrum",
            ClassificationVerdict::SimpleNonuniform { .. } => "SimpleNonuniform",
            ClassificationVerdict::Inconclusive { .. } => "Inconclusive",
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            ClassificationVerdict::UniformlyHyperbolic { lambda, .. }
            | ClassificationVerdict::SimpleNonuniform { lambda, .. }
            | ClassificationVerdict::Inconclusive { lambda, .. } => lambda,
            ClassificationVerdict::TrivialSpectrum { lambda_bound } => lambda_bound,
        }
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, ClassificationVerdict::Inconclusive { .. })
    }
}

/// Combines the integrated exponent with the cone test.
pub fn spectrum_class(a: &Cocycle, f: &BaseMap, est: &EstimateConfig, hyp: &HypConfig) -> Result<ClassificationVerdict> {
    let lambda = integrated_exponent(a, f, &est.measure, est.n_steps)?.lambda_bar;
    verdict_from(lambda, a, f, hyp)
}

/// Verdict for a known integrated exponent.
pub fn verdict_from(lambda: f64, a: &Cocycle, f: &BaseMap, hyp: &HypConfig) -> Result<ClassificationVerdict> {
    if lambda <= hyp.lambda_min {
        return Ok(ClassificationVerdict::TrivialSpectrum { lambda_bound: lambda });
    }
    Ok(match uniform_hyperbolicity_test(a, f, hyp.grid, hyp.n_window)? {
        HyperbolicityOutcome::Hyperbolic { cone_margin, .. } => {
            ClassificationVerdict::UniformlyHyperbolic { lambda, cone_margin }
        }
        HyperbolicityOutcome::NotHyperbolic { witness } => ClassificationVerdict::SimpleNonuniform { lambda, witness },
        HyperbolicityOutcome::Inconclusive { reason } => ClassificationVerdict::Inconclusive { reason, lambda },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointType {
    Elliptic,
    HyperbolicPoint,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicClassification {
    pub kind: PointType,
    pub trace: f64,
}

/// Elliptic / hyperbolic / parabolic type of a periodic point from the trace
/// of `Df^period(p)`.
pub fn elliptic_classify(f: &BaseMap, p: TorusPoint, period: usize) -> Result<PeriodicClassification> {
    if period == 0 {
        return Err(Error::Precondition("period must be >= 1".into()));
    }
    let orbit = f.orbit(p, period as i64);
    let distance = orbit[period].distance(&p);
    if distance > PERIODIC_TOL {
        return Err(Error::NotPeriodic {
            u: p.u(),
            v: p.v(),
            period,
            distance,
        });
    }
    let df = derivative_cocycle(f);
    let mut prod = Mat2::IDENTITY;
    for &x in &orbit[..period] {
        prod = df.eval(x) * prod;
    }
    let trace = prod.trace();
    let kind = if (trace.abs() - 2.0).abs() <= PARABOLIC_TOL {
        PointType::Parabolic
    } else if trace.abs() < 2.0 {
        PointType::Elliptic
    } else {
        PointType::HyperbolicPoint
    };
    Ok(PeriodicClassification { kind, trace })
}

/// Unit vector for a direction angle; used by callers building cones.
pub fn unit(angle: f64) -> [f64; 2] {
    normalize([angle.cos(), angle.sin()])
}
