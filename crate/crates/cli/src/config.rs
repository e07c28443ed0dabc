//! Sectioned `key = value` run configuration.
//!
//! ```text
//! seed = 7
//! [base]
//! kind = perturbed_toral
//! eps = 0.01
//! [cocycle]
//! kind = schrodinger
//! energy = 0.5
//! amp = 1
//! [estimate]
//! measure = point:0.1,0.2
//! ```
//!
//! Keys before the first header are global. `#` starts a comment. Every key
//! is validated at parse time and all problems are reported together.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use coclab::base::{BaseMap, MapKind, PerturbationMode, MAX_PERTURBATION_EPS};
use coclab::classify::{EstimateConfig, HypConfig};
use coclab::cocycle::{AngleField, Cocycle, Potential};
use coclab::conjugacy::MIN_RESOLUTION;
use coclab::experiments::{ScanFamily, SearchStrategy, DEFAULT_AUDIT_GRID, DEFAULT_COOLING, DEFAULT_ROTATION_GRID, DEFAULT_T0};
use coclab::lyapunov::{MeasureSpec, LAMBDA_MIN, MIN_STEPS};
use coclab::{IntMat2, Mat2, TorusPoint};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based source line, when the issue is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration ({} problem(s)):", self.issues.len())?;
        for i in &self.issues {
            write!(f, "\n  {i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CocycleKind {
    Constant { m: [f64; 4] },
    Schrodinger { energy: f64, amp: f64 },
    Derivative,
    /// Angles read from a CSV file with a `grid=g` header.
    Piecewise { m: [f64; 4], angles: PathBuf },
    Rotated { m: [f64; 4], field: AngleField },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CocycleSection {
    pub kind: CocycleKind,
    /// Optional diagonal boost `diag(1 + t, 1/(1 + t))` applied on the left.
    pub boost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureChoice {
    Lebesgue,
    Periodic(usize),
    Point(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSection {
    pub n_steps: u64,
    pub n_orbits: usize,
    pub seed: Option<u64>,
    pub measure: MeasureChoice,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection {
            n_steps: 100_000,
            n_orbits: 10,
            seed: None,
            measure: MeasureChoice::Lebesgue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifySection {
    pub grid: usize,
    pub n_window: usize,
    pub lambda_min: f64,
    pub nu: f64,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            grid: 32,
            n_window: 16,
            lambda_min: LAMBDA_MIN,
            nu: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSection {
    pub family: ScanFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    Raise,
    Lower,
    Probe,
}

impl ExperimentMode {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentMode::Raise => "raise",
            ExperimentMode::Lower => "lower",
            ExperimentMode::Probe => "probe",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "raise" => Some(ExperimentMode::Raise),
            "lower" => Some(ExperimentMode::Lower),
            "probe" => Some(ExperimentMode::Probe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSection {
    pub mode: ExperimentMode,
    pub epsilon: f64,
    pub trials: usize,
    pub search: SearchStrategy,
    /// Perturbation size for `probe`.
    pub delta: f64,
    pub audit_grid: usize,
    pub rotation_grid: usize,
    pub search_steps: u64,
    pub search_orbits: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            mode: ExperimentMode::Raise,
            epsilon: 0.05,
            trials: 100,
            search: SearchStrategy::anneal(),
            delta: 0.01,
            audit_grid: DEFAULT_AUDIT_GRID,
            rotation_grid: DEFAULT_ROTATION_GRID,
            search_steps: 10_000,
            search_orbits: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugacySection {
    pub resolution: usize,
    pub tol: f64,
}

impl Default for ConjugacySection {
    fn default() -> Self {
        ConjugacySection { resolution: 256, tol: 1e-3 }
    }
}

/// A parsed configuration. Absent sections are `None`; their defaults are
/// available through the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub base: Option<BaseMap>,
    pub cocycle: Option<CocycleSection>,
    pub estimate: Option<EstimateSection>,
    pub classify: Option<ClassifySection>,
    pub scan: Option<ScanSection>,
    pub experiment: Option<ExperimentSection>,
    pub conjugacy: Option<ConjugacySection>,
}

impl RunConfig {
    pub fn estimate_section(&self) -> EstimateSection {
        self.estimate.unwrap_or_default()
    }

    pub fn classify_section(&self) -> ClassifySection {
        self.classify.unwrap_or_default()
    }

    pub fn experiment_section(&self) -> ExperimentSection {
        self.experiment.unwrap_or_default()
    }

    pub fn conjugacy_section(&self) -> ConjugacySection {
        self.conjugacy.unwrap_or_default()
    }

    /// Replaces the global seed and drops per-section seeds.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(e) = &mut self.estimate {
            e.seed = None;
        }
    }

    pub fn estimate_config(&self) -> EstimateConfig {
        let e = self.estimate_section();
        let seed = e.seed.unwrap_or(self.seed);
        let measure = match e.measure {
            MeasureChoice::Lebesgue => MeasureSpec::Lebesgue {
                n_orbits: e.n_orbits,
                seed,
            },
            MeasureChoice::Periodic(period) => MeasureSpec::PeriodicEquidistribution { period },
            MeasureChoice::Point(u, v) => MeasureSpec::SingleOrbit {
                start: TorusPoint::new(u, v),
            },
        };
        EstimateConfig {
            n_steps: e.n_steps,
            measure,
        }
    }

    pub fn hyp_config(&self) -> HypConfig {
        let c = self.classify_section();
        HypConfig {
            grid: c.grid,
            n_window: c.n_window,
            lambda_min: c.lambda_min,
        }
    }

    pub fn effective_seed(&self) -> u64 {
        self.estimate_section().seed.unwrap_or(self.seed)
    }
}

/// Builds the configured cocycle; `load_angles` resolves piecewise angle files.
pub fn build_cocycle<F>(section: &CocycleSection, base: &BaseMap, load_angles: F) -> coclab::Result<Cocycle>
where
    F: FnOnce(&std::path::Path) -> coclab::Result<coclab::RotationGrid>,
{
    let mat = |m: &[f64; 4]| Mat2::sl2(m[0], m[1], m[2], m[3]);
    let inner = match &section.kind {
        CocycleKind::Constant { m } => Cocycle::constant(mat(m)?)?,
        CocycleKind::Schrodinger { energy, amp } => {
            let pot = if *amp == 0.0 { Potential::Zero } else { Potential::Cosine { amp: *amp } };
            Cocycle::schrodinger(*energy, pot)
        }
        CocycleKind::Derivative => coclab::cocycle::derivative_cocycle(base),
        CocycleKind::Piecewise { m, angles } => Cocycle::piecewise(Cocycle::constant(mat(m)?)?, load_angles(angles)?),
        CocycleKind::Rotated { m, field } => Cocycle::rotated(Cocycle::constant(mat(m)?)?, *field),
    };
    if section.boost != 0.0 {
        Cocycle::boosted(inner, section.boost)
    } else {
        Ok(inner)
    }
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Typed access to one section, recording issues in a shared list.
struct Fields<'a> {
    name: &'a str,
    section: &'a mut Section,
    issues: &'a mut Vec<ConfigIssue>,
}

impl<'a> Fields<'a> {
    fn label(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("[{}].{key}", self.name)
        }
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let e = self.section.entries.get_mut(key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn issue(&mut self, line: Option<usize>, message: String) {
        self.issues.push(ConfigIssue { line, message });
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.raw(key).map(|(v, _)| v)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, default: T, what: &str) -> T {
        match self.raw(key) {
            None => default,
            Some((v, line)) => match v.parse::<T>() {
                Ok(x) => x,
                Err(_) => {
                    let msg = format!("{}: expected {what}, got `{v}`", self.label(key));
                    self.issue(Some(line), msg);
                    default
                }
            },
        }
    }

    /// Float with a range check `ok`.
    fn real(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, range: &str) -> f64 {
        let line = self.section.entries.get(key).map(|e| e.line);
        let x: f64 = self.parsed(key, default, "a number");
        if !x.is_finite() || !ok(x) {
            let msg = format!("{}: range violation, {x} not in {range}", self.label(key));
            self.issue(line, msg);
            return default;
        }
        x
    }

    fn integer<T>(&mut self, key: &str, default: T, min: T) -> T
    where
        T: std::str::FromStr + PartialOrd + Copy + fmt::Display,
    {
        let line = self.section.entries.get(key).map(|e| e.line);
        let x: T = self.parsed(key, default, "a non-negative integer");
        if x < min {
            let msg = format!("{}: range violation, {x} < {min}", self.label(key));
            self.issue(line, msg);
            return default;
        }
        x
    }

    fn finish(self) {
        let name = self.name;
        for (k, e) in &self.section.entries {
            if !e.used {
                let label = if name.is_empty() { k.clone() } else { format!("[{name}].{k}") };
                self.issues.push(ConfigIssue {
                    line: Some(e.line),
                    message: format!("unknown key `{label}`"),
                });
            }
        }
    }
}

const SECTIONS: [&str; 7] = ["base", "cocycle", "estimate", "classify", "scan", "experiment", "conjugacy"];

fn tokenize(text: &str, issues: &mut Vec<ConfigIssue>) -> BTreeMap<String, Section> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    sections.insert(String::new(), Section { line: 0, entries: BTreeMap::new() });
    let mut current = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            match rest.strip_suffix(']').map(str::trim) {
                Some(name) if SECTIONS.contains(&name) => {
                    if sections.contains_key(name) {
                        issues.push(ConfigIssue {
                            line: Some(line),
                            message: format!("duplicate section [{name}]"),
                        });
                    } else {
                        sections.insert(name.to_string(), Section { line, entries: BTreeMap::new() });
                    }
                    current = name.to_string();
                }
                Some(name) => {
                    issues.push(ConfigIssue {
                        line: Some(line),
                        message: format!("unknown section [{name}]"),
                    });
                    // Keys below an unknown header are swallowed into a scratch section.
                    current = format!("?{name}");
                    sections.entry(current.clone()).or_insert(Section { line, entries: BTreeMap::new() });
                }
                None => issues.push(ConfigIssue {
                    line: Some(line),
                    message: format!("syntax error: malformed section header `{content}`"),
                }),
            }
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            issues.push(ConfigIssue {
                line: Some(line),
                message: format!("syntax error: expected `key = value`, got `{content}`"),
            });
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            issues.push(ConfigIssue {
                line: Some(line),
                message: format!("syntax error: bad key `{k}`"),
            });
            continue;
        }
        let sec = sections.get_mut(&current).expect("current section exists");
        if sec.entries.contains_key(k) {
            issues.push(ConfigIssue {
                line: Some(line),
                message: format!("duplicate key `{k}`"),
            });
            continue;
        }
        sec.entries.insert(
            k.to_string(),
            Entry {
                value: v.to_string(),
                line,
                used: current.starts_with('?'),
            },
        );
    }
    sections
}

fn take_matrix(f: &mut Fields, prefix: &str, default: [f64; 4]) -> [f64; 4] {
    let names = ["11", "12", "21", "22"];
    let mut m = default;
    for (slot, n) in m.iter_mut().zip(names) {
        *slot = f.real(&format!("{prefix}{n}"), *slot, |_| true, "reals");
    }
    m
}

fn parse_base(f: &mut Fields) -> Option<BaseMap> {
    let kind = f.string("kind").unwrap_or_else(|| "linear_toral".into());
    let line = Some(f.section.line);
    let result = match kind.as_str() {
        "linear_toral" | "perturbed_toral" => {
            let mut li = [2i64, 1, 1, 1];
            for (slot, k) in li.iter_mut().zip(["l11", "l12", "l21", "l22"]) {
                *slot = f.parsed(k, *slot, "an integer");
            }
            let l = IntMat2::new(li[0], li[1], li[2], li[3]);
            if kind == "linear_toral" {
                BaseMap::linear_toral(l)
            } else {
                let eps = f.real("eps", 0.01, |x| (0.0..=MAX_PERTURBATION_EPS).contains(&x), &format!("[0, {MAX_PERTURBATION_EPS}]"));
                let mode_name = f.string("mode").unwrap_or_else(|| "shear_pair".into());
                let mode = PerturbationMode::from_name(&mode_name).unwrap_or_else(|| {
                    f.issue(line, format!("[base].mode: expected shear_pair | single_shear, got `{mode_name}`"));
                    PerturbationMode::ShearPair
                });
                BaseMap::perturbed_toral(l, eps, mode)
            }
        }
        "standard_map" => {
            let k = f.real("K", 1.0, |x| x >= 0.0, "[0, inf)");
            BaseMap::standard_map(k)
        }
        "rotation" => {
            let a = f.real("alpha", 0.5f64.sqrt(), |x| x > 0.0 && x < 1.0, "(0, 1)");
            let b = f.real("beta", 3f64.sqrt() - 1.0, |x| x > 0.0 && x < 1.0, "(0, 1)");
            BaseMap::rotation(a, b)
        }
        other => {
            f.issue(line, format!("[base].kind: unknown base kind `{other}`"));
            return None;
        }
    };
    match result {
        Ok(b) => Some(b),
        Err(e) => {
            f.issue(line, format!("[base]: {e}"));
            None
        }
    }
}

fn parse_cocycle(f: &mut Fields) -> Option<CocycleSection> {
    let kind = f.string("kind").unwrap_or_else(|| "constant".into());
    let line = Some(f.section.line);
    let id = [1.0, 0.0, 0.0, 1.0];
    let kind = match kind.as_str() {
        "constant" => CocycleKind::Constant { m: take_matrix(f, "a", id) },
        "schrodinger" => CocycleKind::Schrodinger {
            energy: f.real("energy", 0.0, |_| true, "reals"),
            amp: f.real("amp", 0.0, |_| true, "reals"),
        },
        "derivative" => CocycleKind::Derivative,
        "piecewise" => {
            let m = take_matrix(f, "a", id);
            match f.string("angles") {
                Some(p) if !p.is_empty() => CocycleKind::Piecewise { m, angles: PathBuf::from(p) },
                _ => {
                    f.issue(line, "[cocycle].angles: piecewise cocycle needs an angle file".into());
                    return None;
                }
            }
        }
        "rotated" => {
            let m = take_matrix(f, "a", id);
            let field = AngleField {
                constant: f.real("angle", 0.0, |_| true, "reals"),
                amplitude: f.real("amplitude", 0.0, |_| true, "reals"),
                ku: f.parsed("ku", 0, "an integer"),
                kv: f.parsed("kv", 0, "an integer"),
                phase: f.real("phase", 0.0, |_| true, "reals"),
            };
            CocycleKind::Rotated { m, field }
        }
        other => {
            f.issue(line, format!("[cocycle].kind: unknown cocycle kind `{other}`"));
            return None;
        }
    };
    if let CocycleKind::Constant { m } | CocycleKind::Piecewise { m, .. } | CocycleKind::Rotated { m, .. } = &kind {
        if let Err(e) = Mat2::sl2(m[0], m[1], m[2], m[3]) {
            f.issue(line, format!("[cocycle].a11..a22: {e}"));
        }
    }
    let boost = f.real("boost", 0.0, |x| x > -1.0, "(-1, inf)");
    Some(CocycleSection { kind, boost })
}

fn parse_measure(f: &mut Fields) -> MeasureChoice {
    let Some((v, line)) = f.raw("measure") else {
        return MeasureChoice::Lebesgue;
    };
    let bad = |f: &mut Fields| {
        f.issue(
            Some(line),
            format!("[estimate].measure: expected lebesgue | periodic:<k> | point:<u>,<v>, got `{v}`"),
        );
        MeasureChoice::Lebesgue
    };
    if v == "lebesgue" {
        MeasureChoice::Lebesgue
    } else if let Some(k) = v.strip_prefix("periodic:") {
        match k.trim().parse::<usize>() {
            Ok(k) if k >= 1 => MeasureChoice::Periodic(k),
            _ => bad(f),
        }
    } else if let Some(p) = v.strip_prefix("point:") {
        let parts: Vec<Option<f64>> = p.split(',').map(|x| x.trim().parse::<f64>().ok()).collect();
        match parts.as_slice() {
            [Some(u), Some(w)] if u.is_finite() && w.is_finite() => MeasureChoice::Point(*u, *w),
            _ => bad(f),
        }
    } else {
        bad(f)
    }
}

fn parse_estimate(f: &mut Fields) -> EstimateSection {
    let d = EstimateSection::default();
    EstimateSection {
        n_steps: f.integer("n_steps", d.n_steps, MIN_STEPS),
        n_orbits: f.integer("n_orbits", d.n_orbits, 1),
        seed: f.raw("seed").and_then(|(v, line)| match v.parse::<u64>() {
            Ok(s) => Some(s),
            Err(_) => {
                f.issue(Some(line), format!("[estimate].seed: expected a non-negative integer, got `{v}`"));
                None
            }
        }),
        measure: parse_measure(f),
    }
}

fn parse_classify(f: &mut Fields) -> ClassifySection {
    let d = ClassifySection::default();
    ClassifySection {
        grid: f.integer("grid", d.grid, 16),
        n_window: f.integer("n_window", d.n_window, 8),
        lambda_min: f.real("lambda_min", d.lambda_min, |x| x > 0.0, "(0, inf)"),
        nu: f.real("nu", d.nu, |x| x > 0.0 && x <= 1.0, "(0, 1]"),
    }
}

fn parse_scan(f: &mut Fields) -> Option<ScanSection> {
    let family = f.string("family").unwrap_or_else(|| "schrodinger_energy".into());
    let line = Some(f.section.line);
    let lo = f.real("lo", 0.0, |_| true, "reals");
    let hi = f.real("hi", 1.0, |_| true, "reals");
    let steps = f.integer("steps", 11usize, 2);
    if !(lo < hi) {
        f.issue(line, format!("[scan].lo/hi: range violation, empty range [{lo}, {hi}]"));
    }
    let family = match family.as_str() {
        "schrodinger_energy" => ScanFamily::SchrodingerEnergy {
            lo,
            hi,
            steps,
            amp: f.real("amp", 0.0, |_| true, "reals"),
        },
        "standard_map_K" => {
            if lo < 0.0 {
                f.issue(line, format!("[scan].lo: range violation, K = {lo} < 0"));
            }
            ScanFamily::StandardMapK { lo, hi, steps }
        }
        "perturbation_eps" => {
            if lo < 0.0 || hi > MAX_PERTURBATION_EPS {
                f.issue(line, format!("[scan].lo/hi: range violation, eps must lie in [0, {MAX_PERTURBATION_EPS}]"));
            }
            ScanFamily::PerturbationEps { lo, hi, steps }
        }
        other => {
            f.issue(line, format!("[scan].family: unknown scan family `{other}`"));
            return None;
        }
    };
    Some(ScanSection { family })
}

fn parse_experiment(f: &mut Fields) -> ExperimentSection {
    let d = ExperimentSection::default();
    let line = Some(f.section.line);
    let mode_name = f.string("mode").unwrap_or_else(|| d.mode.name().into());
    let mode = ExperimentMode::from_name(&mode_name).unwrap_or_else(|| {
        f.issue(line, format!("[experiment].mode: expected raise | lower | probe, got `{mode_name}`"));
        d.mode
    });
    let search_name = f.string("search").unwrap_or_else(|| "anneal".into());
    let search = match search_name.as_str() {
        "random" => SearchStrategy::Random,
        "greedy" => SearchStrategy::Greedy,
        "anneal" => SearchStrategy::Anneal {
            t0: f.real("t0", DEFAULT_T0, |x| x > 0.0, "(0, inf)"),
            cooling: f.real("cooling", DEFAULT_COOLING, |x| x > 0.0 && x < 1.0, "(0, 1)"),
        },
        other => {
            f.issue(line, format!("[experiment].search: expected random | greedy | anneal, got `{other}`"));
            d.search
        }
    };
    ExperimentSection {
        mode,
        epsilon: f.real("epsilon", d.epsilon, |x| x >= 0.0, "[0, inf)"),
        trials: f.integer("trials", d.trials, 0),
        search,
        delta: f.real("delta", d.delta, |x| x >= 0.0, "[0, inf)"),
        audit_grid: f.integer("audit_grid", d.audit_grid, 2),
        rotation_grid: f.integer("rotation_grid", d.rotation_grid, 1),
        search_steps: f.integer("search_steps", d.search_steps, MIN_STEPS),
        search_orbits: f.integer("search_orbits", d.search_orbits, 1),
    }
}

fn parse_conjugacy(f: &mut Fields) -> ConjugacySection {
    let d = ConjugacySection::default();
    ConjugacySection {
        resolution: f.integer("resolution", d.resolution, MIN_RESOLUTION),
        tol: f.real("tol", d.tol, |x| x > 0.0, "(0, inf)"),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut issues = Vec::new();
    let mut sections = tokenize(text, &mut issues);

    macro_rules! with_section {
        ($name:expr, $body:expr) => {{
            match sections.get_mut($name) {
                None => None,
                Some(section) => {
                    let mut fields = Fields {
                        name: $name,
                        section,
                        issues: &mut issues,
                    };
                    let out = $body(&mut fields);
                    fields.finish();
                    Some(out)
                }
            }
        }};
    }

    let (seed, out_dir) = with_section!("", |f: &mut Fields| {
        let seed: u64 = f.parsed("seed", 0, "a non-negative integer");
        let out = f.string("out_dir").unwrap_or_else(|| "out".into());
        (seed, PathBuf::from(out))
    })
    .expect("global section");
    let base = with_section!("base", parse_base).flatten();
    let cocycle = with_section!("cocycle", parse_cocycle).flatten();
    let estimate = with_section!("estimate", parse_estimate);
    let classify = with_section!("classify", parse_classify);
    let scan = with_section!("scan", parse_scan).flatten();
    let experiment = with_section!("experiment", parse_experiment);
    let conjugacy = with_section!("conjugacy", parse_conjugacy);

    if let (Some(b), Some(e)) = (&base, &estimate) {
        if let MeasureChoice::Periodic(_) = e.measure {
            if !matches!(b.kind(), MapKind::LinearToral { .. }) {
                issues.push(ConfigIssue {
                    line: None,
                    message: "[estimate].measure: periodic measures need a linear_toral base".into(),
                });
            }
        }
    }

    if issues.is_empty() {
        Ok(RunConfig {
            seed,
            out_dir,
            base,
            cocycle,
            estimate,
            classify,
            scan,
            experiment,
            conjugacy,
        })
    } else {
        issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        Err(ConfigError { issues })
    }
}

fn put(s: &mut String, key: &str, value: impl fmt::Display) {
    writeln!(s, "{key} = {value}").unwrap();
}

/// `{:?}` prints the shortest representation that parses back to the same bits.
fn real(x: f64) -> String {
    format!("{x:?}")
}

fn put_matrix(s: &mut String, m: &[f64; 4]) {
    for (v, n) in m.iter().zip(["a11", "a12", "a21", "a22"]) {
        put(s, n, real(*v));
    }
}

/// Canonical text: fixed section and key order, every default written out.
pub fn canonical_print(cfg: &RunConfig) -> String {
    let mut s = String::new();
    put(&mut s, "seed", cfg.seed);
    put(&mut s, "out_dir", cfg.out_dir.display());
    if let Some(b) = &cfg.base {
        s.push_str("\n[base]\n");
        match *b.kind() {
            MapKind::LinearToral { l } | MapKind::PerturbedToral { l, .. } => {
                let linear = matches!(b.kind(), MapKind::LinearToral { .. });
                put(&mut s, "kind", if linear { "linear_toral" } else { "perturbed_toral" });
                put(&mut s, "l11", l.a);
                put(&mut s, "l12", l.b);
                put(&mut s, "l21", l.c);
                put(&mut s, "l22", l.d);
                if let MapKind::PerturbedToral { eps, mode, .. } = *b.kind() {
                    put(&mut s, "eps", real(eps));
                    put(&mut s, "mode", mode.name());
                }
            }
            MapKind::StandardMap { k } => {
                put(&mut s, "kind", "standard_map");
                put(&mut s, "K", real(k));
            }
            MapKind::Rotation { alpha, beta } => {
                put(&mut s, "kind", "rotation");
                put(&mut s, "alpha", real(alpha));
                put(&mut s, "beta", real(beta));
            }
        }
    }
    if let Some(c) = &cfg.cocycle {
        s.push_str("\n[cocycle]\n");
        match &c.kind {
            CocycleKind::Constant { m } => {
                put(&mut s, "kind", "constant");
                put_matrix(&mut s, m);
            }
            CocycleKind::Schrodinger { energy, amp } => {
                put(&mut s, "kind", "schrodinger");
                put(&mut s, "energy", real(*energy));
                put(&mut s, "amp", real(*amp));
            }
            CocycleKind::Derivative => put(&mut s, "kind", "derivative"),
            CocycleKind::Piecewise { m, angles } => {
                put(&mut s, "kind", "piecewise");
                put_matrix(&mut s, m);
                put(&mut s, "angles", angles.display());
            }
            CocycleKind::Rotated { m, field } => {
                put(&mut s, "kind", "rotated");
                put_matrix(&mut s, m);
                put(&mut s, "angle", real(field.constant));
                put(&mut s, "amplitude", real(field.amplitude));
                put(&mut s, "ku", field.ku);
                put(&mut s, "kv", field.kv);
                put(&mut s, "phase", real(field.phase));
            }
        }
        put(&mut s, "boost", real(c.boost));
    }
    if let Some(e) = &cfg.estimate {
        s.push_str("\n[estimate]\n");
        put(&mut s, "n_steps", e.n_steps);
        put(&mut s, "n_orbits", e.n_orbits);
        if let Some(seed) = e.seed {
            put(&mut s, "seed", seed);
        }
        let m = match e.measure {
            MeasureChoice::Lebesgue => "lebesgue".to_string(),
            MeasureChoice::Periodic(k) => format!("periodic:{k}"),
            MeasureChoice::Point(u, v) => format!("point:{},{}", real(u), real(v)),
        };
        put(&mut s, "measure", m);
    }
    if let Some(c) = &cfg.classify {
        s.push_str("\n[classify]\n");
        put(&mut s, "grid", c.grid);
        put(&mut s, "n_window", c.n_window);
        put(&mut s, "lambda_min", real(c.lambda_min));
        put(&mut s, "nu", real(c.nu));
    }
    if let Some(sc) = &cfg.scan {
        s.push_str("\n[scan]\n");
        put(&mut s, "family", sc.family.name());
        let (lo, hi, steps) = match sc.family {
            ScanFamily::SchrodingerEnergy { lo, hi, steps, .. }
            | ScanFamily::StandardMapK { lo, hi, steps }
            | ScanFamily::PerturbationEps { lo, hi, steps } => (lo, hi, steps),
        };
        put(&mut s, "lo", real(lo));
        put(&mut s, "hi", real(hi));
        put(&mut s, "steps", steps);
        if let ScanFamily::SchrodingerEnergy { amp, .. } = sc.family {
            put(&mut s, "amp", real(amp));
        }
    }
    if let Some(x) = &cfg.experiment {
        s.push_str("\n[experiment]\n");
        put(&mut s, "mode", x.mode.name());
        put(&mut s, "epsilon", real(x.epsilon));
        put(&mut s, "trials", x.trials);
        match x.search {
            SearchStrategy::Random => put(&mut s, "search", "random"),
            SearchStrategy::Greedy => put(&mut s, "search", "greedy"),
            SearchStrategy::Anneal { t0, cooling } => {
                put(&mut s, "search", "anneal");
                put(&mut s, "t0", real(t0));
                put(&mut s, "cooling", real(cooling));
            }
        }
        put(&mut s, "delta", real(x.delta));
        put(&mut s, "audit_grid", x.audit_grid);
        put(&mut s, "rotation_grid", x.rotation_grid);
        put(&mut s, "search_steps", x.search_steps);
        put(&mut s, "search_orbits", x.search_orbits);
    }
    if let Some(c) = &cfg.conjugacy {
        s.push_str("\n[conjugacy]\n");
        put(&mut s, "resolution", c.resolution);
        put(&mut s, "tol", real(c.tol));
    }
    s
}

/// Hex SHA-256 of the canonical text.
pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(canonical_print(cfg).as_bytes()))
}
