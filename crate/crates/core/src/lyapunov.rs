//! Top Lyapunov exponent, Oseledets directions and integrated exponents.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BaseMap, MapKind};
use crate::cocycle::Cocycle;
use crate::error::{Error, Result};
use crate::mat2::{normalize, wedge};
use crate::product::{product_along, ProductWalker, ScaledProduct};
use crate::rng;
use crate::torus::TorusPoint;

/// Exponents at or below this (nats per iterate) count as numerically zero.
pub const LAMBDA_MIN: f64 = 1e-4;

/// Number of batches behind the batch-means standard error.
pub const BATCHES: usize = 10;

/// Minimum orbit length accepted by the estimators.
pub const MIN_STEPS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// `max(raw_value, 0)`.
    pub value: f64,
    /// `log |A^n(p)| / n` before clamping.
    pub raw_value: f64,
    pub n: u64,
    /// Batch-means standard error over [`BATCHES`] batches.
    pub stderr: Option<f64>,
    pub renorm_count: u64,
    /// Set when a negative raw value was clamped to zero.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeasureSpec {
    Lebesgue { n_orbits: usize, seed: u64 },
    PeriodicEquidistribution { period: usize },
    SingleOrbit { start: TorusPoint },
}

fn check_steps(n: u64) -> Result<()> {
    if n < MIN_STEPS {
        return Err(Error::Precondition(format!("orbit length must be >= {MIN_STEPS}, got {n}")));
    }
    Ok(())
}

fn batch_stderr(rates: &[f64]) -> Option<f64> {
    if rates.len() < BATCHES {
        return None;
    }
    let k = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / k;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Some((var / k).sqrt())
}

fn estimate_from_walk(mut walker: ProductWalker<'_>, n: u64) -> LyapunovEstimate {
    let mut rates = Vec::with_capacity(BATCHES);
    let mut last_log = 0.0;
    let mut last_step = 0u64;
    for k in 1..=BATCHES as u64 {
        let boundary = k * n / BATCHES as u64;
        walker.advance(boundary - last_step);
        let log_now = walker.product().log_norm();
        if boundary > last_step {
            rates.push((log_now - last_log) / (boundary - last_step) as f64);
        }
        last_log = log_now;
        last_step = boundary;
    }
    let fin = walker.product().normalized();
    let raw = (fin.logscale + fin.m.norm().ln()) / n as f64;
    LyapunovEstimate {
        value: raw.max(0.0),
        raw_value: raw,
        n,
        stderr: batch_stderr(&rates),
        renorm_count: fin.renorm_count,
        clamped: raw < 0.0,
    }
}

/// `(1/n) log |A^n(p)|`.
pub fn top_exponent(a: &Cocycle, f: &BaseMap, p: TorusPoint, n: u64) -> Result<LyapunovEstimate> {
    check_steps(n)?;
    Ok(estimate_from_walk(ProductWalker::new(a, f, p), n))
}

/// Exponent of the inverse cocycle `x -> A(f^{-1} x)^{-1}` over `f^{-1}`,
/// started at `p`; equals the forward exponent for ergodic data.
pub fn backward_exponent(a: &Cocycle, f: &BaseMap, p: TorusPoint, n: u64) -> Result<LyapunovEstimate> {
    check_steps(n)?;
    let mut prod = ScaledProduct::identity();
    let mut x = p;
    let mut rates = Vec::with_capacity(BATCHES);
    let (mut last_log, mut last_step) = (0.0, 0u64);
    for k in 1..=BATCHES as u64 {
        let boundary = k * n / BATCHES as u64;
        for _ in last_step..boundary {
            x = f.apply_inverse(x);
            prod.push(a.eval_inverse(x));
        }
        let log_now = prod.log_norm();
        if boundary > last_step {
            rates.push((log_now - last_log) / (boundary - last_step) as f64);
        }
        last_log = log_now;
        last_step = boundary;
    }
    let fin = prod.normalized();
    let raw = fin.log_norm() / n as f64;
    Ok(LyapunovEstimate {
        value: raw.max(0.0),
        raw_value: raw,
        n,
        stderr: batch_stderr(&rates),
        renorm_count: fin.renorm_count,
        clamped: raw < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OseledetsDirections {
    pub eu: [f64; 2],
    pub es: [f64; 2],
    /// `lambda+ - lambda- = 2 lambda+`.
    pub gap: f64,
    /// `|normalize(A(p) Eu(p)) x Eu(f p)|`.
    pub eu_residual: f64,
    /// `|normalize(A(p) Es(p)) x Es(f p)|`.
    pub es_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OseledetsResult {
    Split(OseledetsDirections),
    /// Exponent below the identification threshold.
    Degenerate { lambda: f64 },
}

/// Most expanded direction at `p` of `A^n(f^{-n} p)`.
fn unstable_direction(a: &Cocycle, f: &BaseMap, p: TorusPoint, n: u64) -> [f64; 2] {
    let mut back = Vec::with_capacity(n as usize);
    let mut x = p;
    for _ in 0..n {
        x = f.apply_inverse(x);
        back.push(x);
    }
    product_along(a, back.into_iter().rev()).m.svd().left_max
}

/// Most contracted input direction of `A^n(p)`, with the forward exponent.
fn stable_direction(a: &Cocycle, f: &BaseMap, p: TorusPoint, n: u64) -> ([f64; 2], f64) {
    let mut w = ProductWalker::new(a, f, p);
    w.advance(n);
    let prod = w.product().normalized();
    (prod.m.svd().right_min, prod.log_norm() / n as f64)
}

pub fn oseledets_directions(
    a: &Cocycle,
    f: &BaseMap,
    p: TorusPoint,
    n: u64,
    lambda_min: f64,
) -> Result<OseledetsResult> {
    check_steps(n)?;
    let (es, lambda) = stable_direction(a, f, p, n);
    if lambda <= lambda_min {
        return Ok(OseledetsResult::Degenerate {
            lambda: lambda.max(0.0),
        });
    }
    let eu = unstable_direction(a, f, p, n);
    let fp = f.apply(p);
    let step = a.eval(p);
    let eu_next = unstable_direction(a, f, fp, n);
    let (es_next, _) = stable_direction(a, f, fp, n);
    Ok(OseledetsResult::Split(OseledetsDirections {
        eu,
        es,
        gap: 2.0 * lambda,
        eu_residual: wedge(normalize(step.apply(eu)), eu_next),
        es_residual: wedge(normalize(step.apply(es)), es_next),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub orbit_id: usize,
    pub start: TorusPoint,
    pub estimate: LyapunovEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratedExponent {
    pub lambda_bar: f64,
    /// Half-width of the normal 95% interval from the sample variance.
    pub ci95: Option<f64>,
    pub samples: Vec<OrbitSample>,
}

fn sample_starts(f: &BaseMap, mu: &MeasureSpec) -> Result<Vec<TorusPoint>> {
    match *mu {
        MeasureSpec::Lebesgue { n_orbits, seed } => {
            if n_orbits == 0 {
                return Err(Error::Precondition("Lebesgue measure needs n_orbits >= 1".into()));
            }
            Ok((0..n_orbits as u64).map(|k| rng::orbit_start(seed, k)).collect())
        }
        MeasureSpec::PeriodicEquidistribution { period } => match f.kind() {
            MapKind::LinearToral { .. } => Ok(f.periodic_points(period)?.into_iter().map(|pp| pp.point).collect()),
            _ => Err(Error::UnsupportedMeasure(format!(
                "periodic equidistribution requires a linear_toral base, got {}",
                f.name()
            ))),
        },
        MeasureSpec::SingleOrbit { start } => Ok(vec![start]),
    }
}

/// Mean of per-orbit estimates from the given start points. Orbits run in
/// parallel; the reduction is over the id-ordered list, so results do not
/// depend on scheduling.
pub fn average_over_starts(a: &Cocycle, f: &BaseMap, starts: &[TorusPoint], n_steps: u64) -> Result<IntegratedExponent> {
    check_steps(n_steps)?;
    let samples: Vec<OrbitSample> = starts
        .par_iter()
        .enumerate()
        .map(|(orbit_id, &start)| OrbitSample {
            orbit_id,
            start,
            estimate: estimate_from_walk(ProductWalker::new(a, f, start), n_steps),
        })
        .collect();
    let k = samples.len() as f64;
    let lambda_bar = samples.iter().map(|s| s.estimate.value).sum::<f64>() / k;
    let ci95 = (samples.len() >= 2).then(|| {
        let var = samples
            .iter()
            .map(|s| (s.estimate.value - lambda_bar).powi(2))
            .sum::<f64>()
            / (k - 1.0);
        1.96 * (var / k).sqrt()
    });
    Ok(IntegratedExponent {
        lambda_bar,
        ci95,
        samples,
    })
}

/// Integrated exponent of `(f, A)` against `mu`.
pub fn integrated_exponent(a: &Cocycle, f: &BaseMap, mu: &MeasureSpec, n_steps: u64) -> Result<IntegratedExponent> {
    check_steps(n_steps)?;
    let starts = sample_starts(f, mu)?;
    let mut out = average_over_starts(a, f, &starts, n_steps)?;
    if matches!(mu, MeasureSpec::SingleOrbit { .. }) {
        out.ci95 = None;
    }
    Ok(out)
}

/// Where exponents with respect to the maximal entropy measure are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmeSpec {
    /// Linear model on which the measure is sampled.
    pub model: BaseMap,
    pub measure: MeasureSpec,
}

/// Default Monte-Carlo size when the maximal entropy measure is Lebesgue.
pub const MME_DEFAULT_ORBITS: usize = 10;

/// Approximation of the maximal entropy measure.
///
/// For a linear hyperbolic automorphism the maximal entropy measure is
/// Lebesgue. A perturbed automorphism is handled on its linear model: the
/// cocycle is transported through the conjugacy and integrated against the
/// periodic equidistribution of the model.
pub fn mme_spec(f: &BaseMap, period: usize) -> Result<MmeSpec> {
    let lebesgue = MeasureSpec::Lebesgue {
        n_orbits: MME_DEFAULT_ORBITS,
        seed: 0,
    };
    match *f.kind() {
        MapKind::LinearToral { .. } => Ok(MmeSpec {
            model: *f,
            measure: lebesgue,
        }),
        MapKind::PerturbedToral { l, eps, .. } => {
            let model = BaseMap::linear_toral(l)?;
            let measure = if eps == 0.0 {
                lebesgue
            } else {
                MeasureSpec::PeriodicEquidistribution { period }
            };
            Ok(MmeSpec { model, measure })
        }
        _ => Err(Error::NoMmeApproximation(f.name().into())),
    }
}
