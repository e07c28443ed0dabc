//! Perturbation experiments inside a sup-norm ball: raising the top exponent
//! from zero, lowering it by rotation fields, probing semicontinuity, and
//! one-parameter scans.
//!
//! Candidates are `R(theta(cell)) * diag(1 + t, 1/(1 + t)) * A(x)`. Every
//! candidate is projected into the budget by shrinking its parameters until
//! [`sup_distance`] on the audit grid is at most `epsilon`.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BaseMap, MapKind, MAX_PERTURBATION_EPS};
use crate::classify::{verdict_from, ClassificationVerdict, EstimateConfig, HypConfig};
use crate::cocycle::{derivative_cocycle, sup_distance, Cocycle, Potential, RotationGrid};
use crate::error::{Error, Result};
use crate::lyapunov::{integrated_exponent, MeasureSpec};
use crate::rng;

pub const DEFAULT_T0: f64 = 0.1;
pub const DEFAULT_COOLING: f64 = 0.995;
/// Consecutive rejections before an annealing chain restarts from the best.
pub const RESTART_AFTER: usize = 100;
pub const DEFAULT_AUDIT_GRID: usize = 64;
pub const DEFAULT_ROTATION_GRID: usize = 8;

const PROJECTION_SHRINK: f64 = 0.8;
const PROJECTION_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SearchStrategy {
    Random,
    Greedy,
    Anneal { t0: f64, cooling: f64 },
}

impl SearchStrategy {
    pub fn anneal() -> Self {
        SearchStrategy::Anneal {
            t0: DEFAULT_T0,
            cooling: DEFAULT_COOLING,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: BaseMap,
    pub cocycle: Cocycle,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    /// Used for the reported before/after values.
    pub estimate: EstimateConfig,
    /// Cheap profile used inside the search loop.
    pub search_estimate: EstimateConfig,
    pub search: SearchStrategy,
    pub audit_grid: usize,
    pub rotation_grid: usize,
    pub hyp: HypConfig,
}

impl ExperimentConfig {
    /// Defaults: full estimate 10 orbits x 10^5, search profile 5 orbits x
    /// 10^4, annealing with `T0 = 0.1`, `cooling = 0.995`.
    pub fn new(base: BaseMap, cocycle: Cocycle, epsilon: f64, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            base,
            cocycle,
            epsilon,
            trials,
            seed,
            estimate: EstimateConfig {
                n_steps: 100_000,
                measure: MeasureSpec::Lebesgue { n_orbits: 10, seed },
            },
            search_estimate: EstimateConfig {
                n_steps: 10_000,
                measure: MeasureSpec::Lebesgue { n_orbits: 5, seed },
            },
            search: SearchStrategy::anneal(),
            audit_grid: DEFAULT_AUDIT_GRID,
            rotation_grid: DEFAULT_ROTATION_GRID,
            hyp: HypConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Precondition(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.audit_grid < 2 || self.rotation_grid < 1 {
            return Err(Error::Precondition("audit_grid must be >= 2 and rotation_grid >= 1".into()));
        }
        if let SearchStrategy::Anneal { t0, cooling } = self.search {
            if !(t0 > 0.0) || !(cooling > 0.0 && cooling < 1.0) {
                return Err(Error::Precondition(format!(
                    "anneal needs T0 > 0 and cooling in (0, 1), got {t0}, {cooling}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub lambda: f64,
    pub distance: f64,
    pub accepted: bool,
    /// Best search-profile value after this trial.
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub best_cocycle: Cocycle,
    pub lambda_before: f64,
    pub lambda_after: f64,
    pub verdict_before: ClassificationVerdict,
    pub verdict_after: ClassificationVerdict,
    pub trials_run: usize,
    /// `sup_distance(best, original)` on the audit grid.
    pub distance: f64,
    /// Raising runs: `lambda_after > lambda_min`. Lowering runs: strict decrease.
    pub success: bool,
    pub trials: Vec<TrialRecord>,
    pub wall_time: f64,
}

impl ExperimentResult {
    /// Everything except wall time, for reproducibility checks.
    pub fn numerics(&self) -> (f64, f64, ClassificationVerdict, ClassificationVerdict, usize, f64, &[TrialRecord]) {
        (
            self.lambda_before,
            self.lambda_after,
            self.verdict_before,
            self.verdict_after,
            self.trials_run,
            self.distance,
            &self.trials,
        )
    }
}

/// Parameters of one candidate.
#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    boost: f64,
    angles: Vec<f64>,
}

impl Candidate {
    fn zero(cells: usize) -> Self {
        Candidate {
            boost: 0.0,
            angles: vec![0.0; cells],
        }
    }

    fn is_zero(&self) -> bool {
        self.boost == 0.0 && self.angles.iter().all(|&a| a == 0.0)
    }

    fn scaled(&self, s: f64) -> Self {
        Candidate {
            boost: self.boost * s,
            angles: self.angles.iter().map(|a| a * s).collect(),
        }
    }
}

struct Search<'a> {
    cfg: &'a ExperimentConfig,
    /// Maximises `sign * lambda`.
    sign: f64,
    allow_boost: bool,
    angle_scale: f64,
    boost_scale: f64,
}

impl<'a> Search<'a> {
    fn new(cfg: &'a ExperimentConfig, raising: bool) -> Self {
        let m = cfg.cocycle.max_norm_on_grid(cfg.audit_grid).max(1.0);
        // ||(R - I) A|| + ||A^-1 (R^-1 - I)|| <= 4 sin(theta/2) |A|, and the
        // boost adds at most 2 t |A|.
        let angle_scale = 2.0 * (cfg.epsilon / (4.0 * m)).min(1.0).asin();
        let boost_scale = cfg.epsilon / (2.0 * m);
        Search {
            cfg,
            sign: if raising { 1.0 } else { -1.0 },
            allow_boost: raising,
            angle_scale,
            boost_scale,
        }
    }

    fn cells(&self) -> usize {
        self.cfg.rotation_grid * self.cfg.rotation_grid
    }

    fn build(&self, c: &Candidate) -> Cocycle {
        let inner = if c.boost != 0.0 {
            Cocycle::Boosted {
                base: Box::new(self.cfg.cocycle.clone()),
                t: c.boost,
            }
        } else {
            self.cfg.cocycle.clone()
        };
        if c.angles.iter().all(|&a| a == 0.0) {
            inner
        } else {
            let grid = RotationGrid::new(self.cfg.rotation_grid, c.angles.clone()).expect("finite angles");
            Cocycle::piecewise(inner, grid)
        }
    }

    fn distance(&self, c: &Candidate) -> f64 {
        if c.is_zero() {
            return 0.0;
        }
        sup_distance(&self.build(c), &self.cfg.cocycle, self.cfg.audit_grid)
            .expect("audit grid validated")
            .value
    }

    /// Shrinks `c` until it lies in the budget; the zero candidate always does.
    fn project(&self, c: Candidate) -> (Candidate, f64) {
        let mut cur = c;
        for _ in 0..PROJECTION_STEPS {
            let d = self.distance(&cur);
            if d <= self.cfg.epsilon {
                return (cur, d);
            }
            cur = cur.scaled(PROJECTION_SHRINK);
        }
        (Candidate::zero(self.cells()), 0.0)
    }

    fn lambda(&self, a: &Cocycle, est: &EstimateConfig) -> Result<f64> {
        Ok(integrated_exponent(a, &self.cfg.base, &est.measure, est.n_steps)?.lambda_bar)
    }

    fn score(&self, c: &Candidate) -> Result<f64> {
        self.lambda(&self.build(c), &self.cfg.search_estimate)
    }

    fn random_candidate(&self, rng: &mut ChaCha8Rng) -> Candidate {
        let angles = (0..self.cells())
            .map(|_| rng.gen_range(-1.0..=1.0) * self.angle_scale)
            .collect();
        let boost = if self.allow_boost {
            rng.gen::<f64>() * self.boost_scale
        } else {
            0.0
        };
        Candidate { boost, angles }
    }

    fn neighbour(&self, c: &Candidate, rng: &mut ChaCha8Rng) -> Candidate {
        let mut out = c.clone();
        let slots = self.cells() + usize::from(self.allow_boost);
        let k = rng.gen_range(0..slots);
        let step = rng.gen_range(-1.0..=1.0);
        if k < self.cells() {
            out.angles[k] += 0.5 * step * self.angle_scale;
        } else {
            out.boost = (out.boost + 0.5 * step * self.boost_scale).max(0.0);
        }
        out
    }

    /// Runs the configured strategy; returns the best candidate by search score.
    fn run(&self) -> Result<(Candidate, Vec<TrialRecord>)> {
        let cfg = self.cfg;
        let zero = Candidate::zero(self.cells());
        let start_score = self.score(&zero)?;
        let mut best = (zero.clone(), start_score);
        let mut records = Vec::with_capacity(cfg.trials);
        match cfg.search {
            SearchStrategy::Random => {
                let evaluated: Vec<Result<(Candidate, f64, f64)>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let mut r = rng::substream(cfg.seed, t as u64 + 1);
                        let (c, d) = self.project(self.random_candidate(&mut r));
                        let s = self.score(&c)?;
                        Ok((c, d, s))
                    })
                    .collect();
                for (t, item) in evaluated.into_iter().enumerate() {
                    let (c, d, s) = item?;
                    let accepted = self.sign * s > self.sign * best.1;
                    if accepted {
                        best = (c, s);
                    }
                    records.push(TrialRecord {
                        trial: t,
                        lambda: s,
                        distance: d,
                        accepted,
                        best: best.1,
                    });
                }
            }
            SearchStrategy::Greedy | SearchStrategy::Anneal { .. } => {
                let (t0, cooling) = match cfg.search {
                    SearchStrategy::Anneal { t0, cooling } => (t0, cooling),
                    _ => (0.0, 1.0),
                };
                let mut r = rng::substream(cfg.seed, 0);
                let mut current = best.clone();
                let mut rejections = 0;
                let mut temperature = t0;
                for t in 0..cfg.trials {
                    let (c, d) = self.project(self.neighbour(&current.0, &mut r));
                    let s = self.score(&c)?;
                    let gain = self.sign * (s - current.1);
                    let u: f64 = r.gen();
                    let accepted = gain > 0.0 || (temperature > 0.0 && u < (gain / temperature).exp());
                    if accepted {
                        current = (c, s);
                        rejections = 0;
                        if self.sign * current.1 > self.sign * best.1 {
                            best = current.clone();
                        }
                    } else {
                        rejections += 1;
                        if rejections >= RESTART_AFTER {
                            current = best.clone();
                            rejections = 0;
                        }
                    }
                    temperature *= cooling;
                    records.push(TrialRecord {
                        trial: t,
                        lambda: s,
                        distance: d,
                        accepted,
                        best: best.1,
                    });
                }
            }
        }
        Ok((best.0, records))
    }
}

fn finish(
    cfg: &ExperimentConfig,
    search: &Search,
    best: Candidate,
    records: Vec<TrialRecord>,
    lambda_before: f64,
    verdict_before: ClassificationVerdict,
    started: Instant,
) -> Result<ExperimentResult> {
    let mut best_cocycle = search.build(&best);
    let mut distance = search.distance(&best);
    let mut lambda_after = if best.is_zero() {
        lambda_before
    } else {
        search.lambda(&best_cocycle, &cfg.estimate)?
    };
    // Incumbent keeping at the full profile: never report a worse candidate.
    if search.sign * lambda_after < search.sign * lambda_before {
        best_cocycle = cfg.cocycle.clone();
        distance = 0.0;
        lambda_after = lambda_before;
    }
    let verdict_after = if distance == 0.0 {
        verdict_before
    } else {
        verdict_from(lambda_after, &best_cocycle, &cfg.base, &cfg.hyp)?
    };
    let success = if search.sign > 0.0 {
        lambda_after > cfg.hyp.lambda_min
    } else {
        lambda_after < lambda_before
    };
    Ok(ExperimentResult {
        best_cocycle,
        lambda_before,
        lambda_after,
        verdict_before,
        verdict_after,
        trials_run: records.len(),
        distance,
        success,
        trials: records,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Sub-exponential growth allowance: a cocycle with zero exponent can still
/// have `|A^n| ~ n` (parabolic), so `lambda_hat ~ ln(n)/n`.
fn polynomial_allowance(n: u64) -> f64 {
    (1.0 + n as f64).ln() / n as f64
}

/// Maximises the exponent from a trivial-spectrum start.
pub fn simple_spectrum_search(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let started = Instant::now();
    let search = Search::new(cfg, true);
    let lambda_before = search.lambda(&cfg.cocycle, &cfg.estimate)?;
    let limit = cfg.hyp.lambda_min + polynomial_allowance(cfg.estimate.n_steps);
    if lambda_before > limit {
        return Err(Error::AlreadySimple {
            lambda: lambda_before,
            lambda_min: limit,
        });
    }
    let verdict_before = verdict_from(lambda_before, &cfg.cocycle, &cfg.base, &cfg.hyp)?;
    let (best, records) = search.run()?;
    finish(cfg, &search, best, records, lambda_before, verdict_before, started)
}

/// Minimises the exponent with rotation fields from a non-hyperbolic start.
pub fn exponent_lowering_search(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let started = Instant::now();
    let search = Search::new(cfg, false);
    let lambda_before = search.lambda(&cfg.cocycle, &cfg.estimate)?;
    let verdict_before = verdict_from(lambda_before, &cfg.cocycle, &cfg.base, &cfg.hyp)?;
    if matches!(verdict_before, ClassificationVerdict::UniformlyHyperbolic { .. }) {
        return Err(Error::HyperbolicStart);
    }
    if lambda_before <= cfg.hyp.lambda_min || cfg.epsilon == 0.0 {
        return Ok(ExperimentResult {
            best_cocycle: cfg.cocycle.clone(),
            lambda_before,
            lambda_after: lambda_before,
            verdict_before,
            verdict_after: verdict_before,
            trials_run: 0,
            distance: 0.0,
            success: false,
            trials: Vec::new(),
            wall_time: started.elapsed().as_secs_f64(),
        });
    }
    let (best, records) = search.run()?;
    finish(cfg, &search, best, records, lambda_before, verdict_before, started)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemicontinuityReport {
    pub max_uplift: f64,
    pub samples: usize,
    /// `max_uplift / delta`, the empirical constant in `uplift <= C delta`.
    pub uplift_constant: f64,
    pub lambda_original: f64,
}

/// Largest increase of the integrated exponent over `trials` random
/// perturbations within sup-distance `delta` (plus eps jitter of perturbed
/// toral bases). Both sides use the search profile with the same seeds.
pub fn semicontinuity_probe(cfg: &ExperimentConfig, delta: f64) -> Result<SemicontinuityReport> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Precondition(format!("delta must be >= 0, got {delta}")));
    }
    let mut local = cfg.clone();
    local.epsilon = delta;
    local.validate()?;
    let search = Search::new(&local, true);
    let est = &local.search_estimate;
    let lambda_original = search.lambda(&local.cocycle, est)?;
    if delta == 0.0 || local.trials == 0 {
        return Ok(SemicontinuityReport {
            max_uplift: 0.0,
            samples: local.trials,
            uplift_constant: 0.0,
            lambda_original,
        });
    }
    let uplifts: Vec<Result<f64>> = (0..local.trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::substream(local.seed, t as u64 + 1);
            let mut c = search.random_candidate(&mut r);
            // Boosts of either sign.
            c.boost *= if r.gen::<bool>() { 1.0 } else { -1.0 };
            let (c, _) = search.project(c);
            let base = match *local.base.kind() {
                MapKind::PerturbedToral { eps, .. } => {
                    let jitter = r.gen_range(-1.0..=1.0) * delta;
                    local.base.with_eps((eps + jitter).clamp(0.0, MAX_PERTURBATION_EPS))?
                }
                _ => local.base,
            };
            let a = search.build(&c);
            let lam = integrated_exponent(&a, &base, &est.measure, est.n_steps)?.lambda_bar;
            Ok((lam - lambda_original).max(0.0))
        })
        .collect();
    let mut max_uplift: f64 = 0.0;
    for u in uplifts {
        max_uplift = max_uplift.max(u?);
    }
    Ok(SemicontinuityReport {
        max_uplift,
        samples: local.trials,
        uplift_constant: max_uplift / delta,
        lambda_original,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScanFamily {
    /// Schrödinger cocycle with amplitude `amp` cosine potential (0 for `v = 0`).
    SchrodingerEnergy { lo: f64, hi: f64, steps: usize, amp: f64 },
    /// Derivative cocycle of the standard map over itself.
    StandardMapK { lo: f64, hi: f64, steps: usize },
    /// Perturbation size of the configured perturbed toral base.
    PerturbationEps { lo: f64, hi: f64, steps: usize },
}

impl ScanFamily {
    fn range(&self) -> (f64, f64, usize) {
        match *self {
            ScanFamily::SchrodingerEnergy { lo, hi, steps, .. }
            | ScanFamily::StandardMapK { lo, hi, steps }
            | ScanFamily::PerturbationEps { lo, hi, steps } => (lo, hi, steps),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScanFamily::SchrodingerEnergy { .. } => "schrodinger_energy",
            ScanFamily::StandardMapK { .. } => "standard_map_K",
            ScanFamily::PerturbationEps { .. } => "perturbation_eps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub param: f64,
    pub lambda_bar: f64,
    pub ci95: Option<f64>,
    pub verdict: ClassificationVerdict,
}

/// Evenly spaced parameter values, both endpoints included.
pub fn scan_points(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::Precondition(format!("scan needs steps >= 2, got {steps}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Precondition(format!("scan range [{lo}, {hi}] is empty")));
    }
    Ok((0..steps)
        .map(|k| {
            if k + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (steps - 1) as f64
            }
        })
        .collect())
}

/// One row per parameter value. `cocycle` is the cocycle scanned in the
/// `PerturbationEps` family; `None` means the derivative cocycle of `g`.
pub fn parameter_scan(
    family: &ScanFamily,
    base: &BaseMap,
    cocycle: Option<&Cocycle>,
    est: &EstimateConfig,
    hyp: &HypConfig,
) -> Result<Vec<ScanRow>> {
    let (lo, hi, steps) = family.range();
    let params = scan_points(lo, hi, steps)?;
    let mut rows = Vec::with_capacity(params.len());
    for param in params {
        let (a, f) = match *family {
            ScanFamily::SchrodingerEnergy { amp, .. } => {
                let pot = if amp == 0.0 { Potential::Zero } else { Potential::Cosine { amp } };
                (Cocycle::schrodinger(param, pot), *base)
            }
            ScanFamily::StandardMapK { .. } => {
                let f = BaseMap::standard_map(param)?;
                (derivative_cocycle(&f), f)
            }
            ScanFamily::PerturbationEps { .. } => {
                let f = base.with_eps(param)?;
                let a = cocycle.cloned().unwrap_or_else(|| derivative_cocycle(&f));
                (a, f)
            }
        };
        let ie = integrated_exponent(&a, &f, &est.measure, est.n_steps)?;
        rows.push(ScanRow {
            param,
            lambda_bar: ie.lambda_bar,
            ci95: ie.ci95,
            verdict: verdict_from(ie.lambda_bar, &a, &f, hyp)?,
        });
    }
    Ok(rows)
}

/// Recomputes the budget of a finished run on the audit grid.
pub fn check_budget(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<bool> {
    let d = sup_distance(&result.best_cocycle, &cfg.cocycle, cfg.audit_grid)?.value;
    Ok(d <= cfg.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::CellField;
    use crate::mat2::Mat2;
    use approx::assert_abs_diff_eq;

    fn quick(base: BaseMap, a: Cocycle, eps: f64, trials: usize, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(base, a, eps, trials, seed);
        cfg.estimate = EstimateConfig {
            n_steps: 20_000,
            measure: MeasureSpec::Lebesgue { n_orbits: 4, seed },
        };
        cfg.search_estimate = EstimateConfig {
            n_steps: 2_000,
            measure: MeasureSpec::Lebesgue { n_orbits: 2, seed },
        };
        cfg.audit_grid = 32;
        cfg.rotation_grid = 4;
        cfg
    }

    fn half_rotation() -> Cocycle {
        // Rotation by 0.3 for u < 1/2, diag(2, 1/2) otherwise.
        let g = 8;
        let mats = (0..g * g)
            .map(|k| if k / g < g / 2 { Mat2::rotation(0.3) } else { Mat2::diag(2.0, 0.5) })
            .collect();
        Cocycle::Cells(CellField::new(g, mats).unwrap())
    }

    #[test]
    fn boost_of_identity() {
        let a = Cocycle::boosted(Cocycle::identity(), 0.1).unwrap();
        let e = integrated_exponent(&a, &BaseMap::cat_map(), &MeasureSpec::Lebesgue { n_orbits: 1, seed: 1 }, 1000)
            .unwrap();
        assert_abs_diff_eq!(e.lambda_bar, 1.1f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn raising_from_parabolic() {
        let a = Cocycle::constant(Mat2::new(1.0, 1.0, 0.0, 1.0)).unwrap();
        let cfg = quick(BaseMap::cat_map(), a, 0.5, 30, 3);
        let r = simple_spectrum_search(&cfg).unwrap();
        assert!(r.lambda_after >= r.lambda_before);
        assert!(r.success, "{r:?}");
        assert!(check_budget(&cfg, &r).unwrap());
    }

    #[test]
    fn raising_rejects_simple_start() {
        let cfg = quick(BaseMap::cat_map(), Cocycle::Constant(Mat2::diag(2.0, 0.5)), 0.1, 5, 1);
        assert!(matches!(simple_spectrum_search(&cfg), Err(Error::AlreadySimple { .. })));
    }

    #[test]
    fn raising_pure_rotation_random_search() {
        let mut cfg = quick(BaseMap::rotation(0.3, 0.7).unwrap(), Cocycle::pure_rotation(0.7), 0.05, 40, 2);
        cfg.search = SearchStrategy::Random;
        let r = simple_spectrum_search(&cfg).unwrap();
        assert!(r.lambda_after >= r.lambda_before && r.lambda_after >= 0.0);
        assert!(check_budget(&cfg, &r).unwrap());
        assert_eq!(r.trials_run, 40);
    }

    #[test]
    fn lowering_examples() {
        let id = quick(BaseMap::cat_map(), Cocycle::identity(), 0.2, 50, 1);
        let r = exponent_lowering_search(&id).unwrap();
        assert_eq!((r.lambda_before, r.lambda_after, r.trials_run), (0.0, 0.0, 0));

        let mut empty = quick(BaseMap::cat_map(), half_rotation(), 0.0, 50, 1);
        empty.epsilon = 0.0;
        let r = exponent_lowering_search(&empty).unwrap();
        assert_eq!(r.lambda_after, r.lambda_before);

        let hyp = quick(BaseMap::cat_map(), Cocycle::Constant(Mat2::diag(2.0, 0.5)), 0.2, 5, 1);
        assert!(matches!(exponent_lowering_search(&hyp), Err(Error::HyperbolicStart)));
    }

    #[test]
    fn lowering_is_monotone_and_in_budget() {
        let cfg = quick(BaseMap::cat_map(), half_rotation(), 0.2, 60, 7);
        let r = exponent_lowering_search(&cfg).unwrap();
        assert!(r.lambda_after <= r.lambda_before);
        assert!(check_budget(&cfg, &r).unwrap());
        assert!(r.trials.iter().all(|t| t.distance <= cfg.epsilon));
        let again = exponent_lowering_search(&cfg).unwrap();
        assert_eq!(r.numerics(), again.numerics());
    }

    #[test]
    fn probe_examples() {
        let cfg = quick(BaseMap::cat_map(), Cocycle::Constant(Mat2::diag(2.0, 0.5)), 0.0, 20, 1);
        assert_eq!(semicontinuity_probe(&cfg, 0.0).unwrap().max_uplift, 0.0);
        let r = semicontinuity_probe(&cfg, 0.01).unwrap();
        assert!(r.max_uplift <= 0.05, "{r:?}");
        assert!(semicontinuity_probe(&cfg, -1.0).is_err());
    }

    #[test]
    fn scan_examples() {
        let est = EstimateConfig {
            n_steps: 10_000,
            measure: MeasureSpec::SingleOrbit {
                start: crate::torus::TorusPoint::new(0.1, 0.2),
            },
        };
        let hyp = HypConfig::default();
        let fam = ScanFamily::SchrodingerEnergy { lo: 2.5, hi: 3.5, steps: 2, amp: 0.0 };
        let rows = parameter_scan(&fam, &BaseMap::cat_map(), None, &est, &hyp).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let e = row.param;
            assert!((row.lambda_bar - ((e + (e * e - 4.0).sqrt()) / 2.0).ln()).abs() < 1e-3);
        }
        assert!(rows[0].param < rows[1].param);
        let bad = ScanFamily::StandardMapK { lo: 1.0, hi: 1.0, steps: 3 };
        assert!(parameter_scan(&bad, &BaseMap::cat_map(), None, &est, &hyp).is_err());
        assert!(scan_points(0.0, 1.0, 1).is_err());
        assert_eq!(scan_points(0.0, 1.0, 5).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
