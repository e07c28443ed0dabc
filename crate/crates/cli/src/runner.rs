//! Subcommand dispatch. The runner is the only writer of output files: module
//! calls return complete, id-ordered results and are serialised here in order.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use coclab::base::MapKind;
use coclab::classify::{spectrum_class, ClassificationVerdict, EstimateConfig};
use coclab::conjugacy::solve_conjugacy;
use coclab::experiments::{
    exponent_lowering_search, parameter_scan, semicontinuity_probe, simple_spectrum_search, ExperimentConfig,
    ExperimentResult, ScanFamily,
};
use coclab::lyapunov::integrated_exponent;
use coclab::{BaseMap, Cocycle, MeasureSpec, RotationGrid, TorusPoint};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{build_cocycle, config_hash, ExperimentMode, RunConfig};
use crate::plot::{emit_plot_data, PlotSpec, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerturbArgs {
    pub mode: Option<ExperimentMode>,
    pub epsilon: Option<f64>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Estimate,
    Classify,
    Scan,
    Perturb(PerturbArgs),
    Conjugacy,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Classify => "classify",
            Command::Scan => "scan",
            Command::Perturb(_) => "perturb",
            Command::Conjugacy => "conjugacy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub wall_time: f64,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// The single stdout line.
    pub summary: String,
    pub record: RunRecord,
}

/// Where files go. `results` overrides the per-trial stream path of `perturb`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPlan {
    pub dir: PathBuf,
    pub results: Option<PathBuf>,
}

impl OutputPlan {
    /// `--out x.jsonl` names the results file (other files go next to it);
    /// anything else is a directory.
    pub fn from_flag(flag: Option<&Path>, cfg: &RunConfig) -> Self {
        match flag {
            Some(p) if p.extension().is_some_and(|e| e == "jsonl") => OutputPlan {
                dir: p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf(),
                results: Some(p.to_path_buf()),
            },
            Some(p) => OutputPlan {
                dir: p.to_path_buf(),
                results: None,
            },
            None => OutputPlan {
                dir: cfg.out_dir.clone(),
                results: None,
            },
        }
    }
}

struct Writer {
    dir: PathBuf,
    manifest: Vec<OutputEntry>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            manifest: Vec::new(),
        })
    }

    fn write_to(&mut self, path: &Path, contents: &[u8]) -> Result<()> {
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.push(OutputEntry {
            path: path.display().to_string(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents)),
        });
        Ok(())
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        self.write_to(&path, contents)
    }
}

fn real(x: f64) -> String {
    format!("{x:?}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn json_line(v: &Value) -> String {
    let mut s = serde_json::to_string(v).expect("json values serialise");
    s.push('\n');
    s
}

fn witness(p: TorusPoint) -> Value {
    json!([p.u(), p.v()])
}

fn verdict_json(v: &ClassificationVerdict) -> Value {
    let (cone_margin, wit, reason) = match v {
        ClassificationVerdict::UniformlyHyperbolic { cone_margin, .. } => (json!(cone_margin), Value::Null, Value::Null),
        ClassificationVerdict::SimpleNonuniform { witness: w, .. } => (Value::Null, witness(*w), Value::Null),
        ClassificationVerdict::Inconclusive { reason, .. } => (Value::Null, Value::Null, json!(reason.code())),
        ClassificationVerdict::TrivialSpectrum { .. } => (Value::Null, Value::Null, Value::Null),
    };
    json!({
        "verdict": v.name(),
        "lambda": v.lambda(),
        "cone_margin": cone_margin,
        "witness": wit,
        "reason": reason,
    })
}

/// Reads a piecewise angle file: a `grid=g` header, then g*g comma-separated
/// values in row-major order (line breaks are free).
pub fn load_angles(path: &Path) -> coclab::Result<RotationGrid> {
    let parse_err = |m: String| coclab::Error::Parse(format!("{}: {m}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| parse_err(e.to_string()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim();
    let grid: usize = header
        .strip_prefix("grid=")
        .and_then(|g| g.trim().parse().ok())
        .ok_or_else(|| parse_err(format!("expected `grid=<g>` header, got `{header}`")))?;
    let body: String = lines.collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut angles = Vec::with_capacity(grid * grid);
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        for cell in rec.iter().filter(|c| !c.is_empty()) {
            angles.push(cell.parse::<f64>().map_err(|_| parse_err(format!("bad angle `{cell}`")))?);
        }
    }
    RotationGrid::new(grid, angles)
}

/// Writes a rotation grid in the format read by [`load_angles`].
pub fn angles_text(g: &RotationGrid) -> String {
    let mut s = format!("grid={}\n", g.grid());
    for row in g.angles().chunks(g.grid()) {
        let cells: Vec<String> = row.iter().map(|a| real(*a)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

struct Inputs<'a> {
    cfg: &'a RunConfig,
    config_dir: &'a Path,
}

impl Inputs<'_> {
    fn base(&self, cmd: &str) -> Result<BaseMap> {
        self.cfg.base.ok_or_else(|| anyhow!("`{cmd}` needs a [base] section"))
    }

    fn cocycle(&self, cmd: &str, base: &BaseMap) -> Result<Cocycle> {
        let section = self
            .cfg
            .cocycle
            .as_ref()
            .ok_or_else(|| anyhow!("`{cmd}` needs a [cocycle] section"))?;
        let dir = self.config_dir;
        Ok(build_cocycle(section, base, |p| load_angles(&dir.join(p)))?)
    }
}

/// Runs one subcommand and writes its files plus `run.json`.
pub fn run(cfg: &RunConfig, cmd: &Command, plan: &OutputPlan, config_dir: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let ctx = Inputs { cfg, config_dir };
    let mut w = Writer::new(&plan.dir)?;
    let (exit_code, summary) = match cmd {
        Command::Estimate => estimate(&ctx, &mut w)?,
        Command::Classify => classify(&ctx, &mut w)?,
        Command::Scan => scan(&ctx, &mut w)?,
        Command::Perturb(args) => perturb(&ctx, args, plan, &mut w)?,
        Command::Conjugacy => conjugacy(&ctx, &mut w)?,
    };
    let mut record = RunRecord {
        command: cmd.name().to_string(),
        config_hash: config_hash(cfg),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.effective_seed(),
        wall_time: started.elapsed().as_secs_f64(),
        outputs: w.manifest.clone(),
    };
    let text = serde_json::to_string_pretty(&record)? + "\n";
    w.write("run.json", text.as_bytes())?;
    record.outputs = w.manifest;
    Ok(Outcome {
        exit_code,
        summary,
        record,
    })
}

fn estimate(ctx: &Inputs, w: &mut Writer) -> Result<(i32, String)> {
    let f = ctx.base("estimate")?;
    let a = ctx.cocycle("estimate", &f)?;
    let est = ctx.cfg.estimate_config();
    let ie = integrated_exponent(&a, &f, &est.measure, est.n_steps)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["orbit_id", "start_u", "start_v", "lambda", "n", "renorms"])?;
    for s in &ie.samples {
        csv.write_record([
            s.orbit_id.to_string(),
            real(s.start.u()),
            real(s.start.v()),
            real(s.estimate.value),
            s.estimate.n.to_string(),
            s.estimate.renorm_count.to_string(),
        ])?;
    }
    w.write("estimate.csv", &csv.into_inner()?)?;
    let seed = ctx.cfg.effective_seed();
    let line = json!({
        "lambda_bar": ie.lambda_bar,
        "ci95": ie.ci95,
        "seed": seed,
        "n_steps": est.n_steps,
        "orbits": ie.samples.len(),
    });
    w.write("summary.jsonl", json_line(&line).as_bytes())?;
    let ci = ie.ci95.map(|c| format!("{c:.6}")).unwrap_or_else(|| "none".into());
    Ok((EXIT_OK, format!("lambda_bar={:.6} ci95={ci} seed={seed}", ie.lambda_bar)))
}

fn classify(ctx: &Inputs, w: &mut Writer) -> Result<(i32, String)> {
    let f = ctx.base("classify")?;
    let a = ctx.cocycle("classify", &f)?;
    let verdict = spectrum_class(&a, &f, &ctx.cfg.estimate_config(), &ctx.cfg.hyp_config())?;
    let line = serde_json::to_string(&verdict_json(&verdict))?;
    w.write("classify.jsonl", format!("{line}\n").as_bytes())?;
    let code = if verdict.is_inconclusive() { EXIT_INCONCLUSIVE } else { EXIT_OK };
    Ok((code, line))
}

fn scan(ctx: &Inputs, w: &mut Writer) -> Result<(i32, String)> {
    let section = ctx.cfg.scan.ok_or_else(|| anyhow!("`scan` needs a [scan] section"))?;
    let est = ctx.cfg.estimate_config();
    let hyp = ctx.cfg.hyp_config();
    // The standard-map family builds its own base; the others need [base].
    let f = match (section.family, ctx.cfg.base) {
        (_, Some(b)) => b,
        (ScanFamily::StandardMapK { .. }, None) => BaseMap::standard_map(0.0)?,
        (_, None) => bail!("`scan` with family {} needs a [base] section", section.family.name()),
    };
    let cocycle = match (&section.family, &ctx.cfg.cocycle) {
        (ScanFamily::PerturbationEps { .. }, Some(_)) => Some(ctx.cocycle("scan", &f)?),
        _ => None,
    };
    let rows = parameter_scan(&section.family, &f, cocycle.as_ref(), &est, &hyp)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["param", "lambda_bar", "ci95", "verdict"])?;
    let mut table = Table::new(["param", "lambda_bar", "ci95"]);
    for r in &rows {
        csv.write_record([real(r.param), real(r.lambda_bar), opt_real(r.ci95), r.verdict.name().to_string()])?;
        table.push(vec![Some(r.param), Some(r.lambda_bar), r.ci95]);
    }
    w.write("scan.csv", &csv.into_inner()?)?;
    let spec = PlotSpec {
        x_col: "param".into(),
        y_cols: vec!["lambda_bar".into()],
        band_cols: vec!["ci95".into()],
    };
    w.write("scan.dat", emit_plot_data(&table, &spec)?.as_bytes())?;
    let inconclusive = rows.iter().filter(|r| r.verdict.is_inconclusive()).count();
    Ok((
        EXIT_OK,
        format!("family={} rows={} inconclusive={inconclusive}", section.family.name(), rows.len()),
    ))
}

fn experiment_config(ctx: &Inputs, args: &PerturbArgs) -> Result<(ExperimentMode, ExperimentConfig, f64)> {
    let f = ctx.base("perturb")?;
    let a = ctx.cocycle("perturb", &f)?;
    let x = ctx.cfg.experiment_section();
    let seed = ctx.cfg.effective_seed();
    let mode = args.mode.unwrap_or(x.mode);
    let epsilon = args.epsilon.unwrap_or(x.epsilon);
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        bail!("--epsilon must be >= 0, got {epsilon}");
    }
    let mut cfg = ExperimentConfig::new(f, a, epsilon, args.trials.unwrap_or(x.trials), seed);
    cfg.estimate = ctx.cfg.estimate_config();
    cfg.search_estimate = EstimateConfig {
        n_steps: x.search_steps,
        measure: MeasureSpec::Lebesgue {
            n_orbits: x.search_orbits,
            seed,
        },
    };
    cfg.search = x.search;
    cfg.audit_grid = x.audit_grid;
    cfg.rotation_grid = x.rotation_grid;
    cfg.hyp = ctx.cfg.hyp_config();
    Ok((mode, cfg, x.delta))
}

fn result_summary(mode: ExperimentMode, r: &ExperimentResult) -> Value {
    json!({
        "type": "summary",
        "mode": mode.name(),
        "lambda_before": r.lambda_before,
        "lambda_after": r.lambda_after,
        "verdict_before": verdict_json(&r.verdict_before),
        "verdict_after": verdict_json(&r.verdict_after),
        "trials_run": r.trials_run,
        "distance": r.distance,
        "success": r.success,
    })
}

fn perturb(ctx: &Inputs, args: &PerturbArgs, plan: &OutputPlan, w: &mut Writer) -> Result<(i32, String)> {
    let (mode, cfg, delta) = experiment_config(ctx, args)?;
    // Rewritten on every run so reruns are byte-identical.
    let mut stream = String::new();
    let (code, summary) = match mode {
        ExperimentMode::Raise | ExperimentMode::Lower => {
            let r = if mode == ExperimentMode::Raise {
                simple_spectrum_search(&cfg)?
            } else {
                exponent_lowering_search(&cfg)?
            };
            for t in &r.trials {
                let mut v = serde_json::to_value(t)?;
                v["type"] = json!("trial");
                stream.push_str(&json_line(&v));
            }
            stream.push_str(&json_line(&result_summary(mode, &r)));
            let code = if r.verdict_after.is_inconclusive() { EXIT_INCONCLUSIVE } else { EXIT_OK };
            (
                code,
                format!(
                    "mode={} lambda_before={:.6} lambda_after={:.6} verdict_after={} success={}",
                    mode.name(),
                    r.lambda_before,
                    r.lambda_after,
                    r.verdict_after.name(),
                    r.success
                ),
            )
        }
        ExperimentMode::Probe => {
            let r = semicontinuity_probe(&cfg, delta)?;
            let mut v = serde_json::to_value(r)?;
            v["type"] = json!("summary");
            v["mode"] = json!("probe");
            v["delta"] = json!(delta);
            stream.push_str(&json_line(&v));
            (
                EXIT_OK,
                format!(
                    "mode=probe delta={delta} max_uplift={:.6e} samples={}",
                    r.max_uplift, r.samples
                ),
            )
        }
    };
    match &plan.results {
        Some(p) => w.write_to(p, stream.as_bytes())?,
        None => w.write("perturb.jsonl", stream.as_bytes())?,
    }
    Ok((code, summary))
}

fn conjugacy(ctx: &Inputs, w: &mut Writer) -> Result<(i32, String)> {
    let g = ctx.base("conjugacy")?;
    let MapKind::PerturbedToral { l, .. } = *g.kind() else {
        bail!("`conjugacy` needs a perturbed_toral base, got {}", g.name());
    };
    let f = BaseMap::linear_toral(l)?;
    let c = ctx.cfg.conjugacy_section();
    let (h, stats) = solve_conjugacy(&f, &g, c.resolution, c.tol)?;
    w.write("conjugacy.txt", h.to_text().as_bytes())?;
    let stats_json = serde_json::to_string(&stats)? + "\n";
    w.write("conjugacy_stats.jsonl", stats_json.as_bytes())?;
    Ok((
        EXIT_OK,
        format!(
            "resolution={} sweeps={} audit_residual={:.3e} sup_displacement={:.6}",
            c.resolution, stats.sweeps, stats.audit_residual, stats.sup_displacement
        ),
    ))
}
