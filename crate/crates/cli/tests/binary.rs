use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use coclab_cli::config::{build_cocycle, CocycleKind, CocycleSection};
use coclab_cli::runner::{angles_text, load_angles};
use coclab::{BaseMap, RotationGrid};

fn coclab(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.conf");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_coclab"))
        .current_dir(dir)
        .arg("--config")
        .arg(&path)
        .args(args)
        .env("COCLAB_THREADS", "2")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CAT_DERIVATIVE: &str = "seed = 11\n[base]\nkind = linear_toral\n[cocycle]\nkind = derivative\n[estimate]\nn_steps = 20000\nn_orbits = 4\n";

#[test]
fn estimate_on_cat_map_derivative() {
    let dir = tempfile::tempdir().unwrap();
    let o = coclab(dir.path(), CAT_DERIVATIVE, &["--out", "o", "estimate"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1, "{out}");
    assert!(out.starts_with("lambda_bar=0.9624"), "{out}");
    assert!(out.contains(" ci95=") && out.trim_end().ends_with("seed=11"), "{out}");

    let csv = fs::read_to_string(dir.path().join("o/estimate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("orbit_id,start_u,start_v,lambda,n,renorms"));
    assert_eq!(lines.count(), 4);
    let summary = fs::read_to_string(dir.path().join("o/summary.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(summary.trim()).unwrap();
    assert_eq!(v["seed"], 11);
    assert!((v["lambda_bar"].as_f64().unwrap() - 0.962424).abs() < 1e-3);

    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/run.json")).unwrap()).unwrap();
    assert_eq!(record["command"], "estimate");
    assert_eq!(record["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(record["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = coclab(dir.path(), CAT_DERIVATIVE, &["--seed", "99", "--out", "o", "estimate"]);
    assert!(stdout(&o).trim_end().ends_with("seed=99"));
}

#[test]
fn classify_identity_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[base]\nkind = linear_toral\n[cocycle]\nkind = constant\n[estimate]\nn_steps = 10000\nn_orbits = 3\n";
    let o = coclab(dir.path(), cfg, &["--out", "o", "classify"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["verdict"], "TrivialSpectrum");
    assert_eq!(v["lambda"], 0.0);
    for key in ["cone_margin", "witness"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(fs::read_to_string(dir.path().join("o/classify.jsonl")).unwrap(), out);
}

#[test]
fn classify_hyperbolic_reports_cone_margin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[base]\nkind = linear_toral\n[cocycle]\nkind = constant\na11 = 2\na22 = 0.5\n[estimate]\nn_steps = 1000\nn_orbits = 2\n";
    let o = coclab(dir.path(), cfg, &["--out", "o", "classify"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["verdict"], "UniformlyHyperbolic");
    assert!(v["cone_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn classify_grid_one_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[base]\nkind = linear_toral\n[cocycle]\nkind = constant\n[classify]\ngrid = 1\n";
    let o = coclab(dir.path(), cfg, &["--out", "o", "classify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("[classify].grid"), "{err}");
}

#[test]
fn missing_section_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = coclab(dir.path(), "[base]\nkind = linear_toral\n", &["--out", "o", "estimate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[cocycle]"));
}

#[test]
fn module_errors_exit_with_error() {
    // The conjugacy solver needs a perturbed toral base.
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[base]\nkind = linear_toral\n[cocycle]\nkind = constant\n";
    let o = coclab(dir.path(), cfg, &["--out", "o", "conjugacy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 4\n[base]\nkind = perturbed_toral\neps = 0.02\n[cocycle]\nkind = schrodinger\nenergy = 0.5\namp = 1\n[estimate]\nn_steps = 5000\nn_orbits = 8\n[scan]\nfamily = perturbation_eps\nlo = 0\nhi = 0.02\nsteps = 3\n";
    for out in ["a", "b"] {
        for cmd in ["estimate", "scan"] {
            let o = coclab(dir.path(), cfg, &["--out", out, cmd]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for f in ["estimate.csv", "summary.jsonl", "scan.csv", "scan.dat"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let dat = fs::read_to_string(dir.path().join("a/scan.dat")).unwrap();
    assert_eq!(dat.lines().count(), 4);
    assert!(dat.starts_with("# param lambda_bar ci95\n"));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, CAT_DERIVATIVE.replace("derivative", "schrodinger\nenergy = 1\namp = 1")).unwrap();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_coclab"))
            .current_dir(dir.path())
            .args(["--config", path.to_str().unwrap(), "--out", out, "estimate"])
            .env("COCLAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        fs::read(dir.path().join(out).join("estimate.csv")).unwrap()
    };
    assert_eq!(run("1", "t1"), run("4", "t4"));
}

#[test]
fn perturb_writes_trials_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 2\n[base]\nkind = linear_toral\n[cocycle]\nkind = constant\n[estimate]\nn_steps = 2000\nn_orbits = 2\n[experiment]\nsearch = random\nsearch_steps = 1000\nsearch_orbits = 2\n";
    let o = coclab(
        dir.path(),
        cfg,
        &["--out", "res/trials.jsonl", "perturb", "--mode", "raise", "--epsilon", "0.1", "--trials", "6"],
    );
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 2, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("mode=raise "), "{out}");
    let text = fs::read_to_string(dir.path().join("res/trials.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[..6].iter().all(|l| l["type"] == "trial"));
    let last = &lines[6];
    assert_eq!(last["type"], "summary");
    assert!(last["lambda_after"].as_f64().unwrap() >= last["lambda_before"].as_f64().unwrap());
    assert!(last["verdict_before"]["verdict"].is_string());
    // Exit 2 exactly when the final verdict is inconclusive.
    assert_eq!(code == 2, last["verdict_after"]["verdict"] == "Inconclusive");
    assert!(dir.path().join("res/run.json").exists());
}

#[test]
fn perturb_lower_from_hyperbolic_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[base]\nkind = linear_toral\n[cocycle]\nkind = derivative\n[estimate]\nn_steps = 1000\nn_orbits = 2\n";
    let o = coclab(dir.path(), cfg, &["--out", "o", "perturb", "--mode", "lower", "--trials", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hyperbolic: lowering out of scope"));
}

#[test]
fn conjugacy_writes_map() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[base]\nkind = perturbed_toral\neps = 0.01\n[conjugacy]\nresolution = 64\ntol = 1e-2\n";
    let o = coclab(dir.path(), cfg, &["--out", "o", "conjugacy"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("resolution=64 "));
    let text = fs::read_to_string(dir.path().join("o/conjugacy.txt")).unwrap();
    let h = coclab::ConjugacyMap::from_text(&text).unwrap();
    assert_eq!(h.resolution(), 64);
}

#[test]
fn piecewise_angles_resolve_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let grid = RotationGrid::new(2, vec![0.1, -0.2, 0.0, 0.3]).unwrap();
    fs::write(dir.path().join("angles.csv"), angles_text(&grid)).unwrap();
    assert_eq!(load_angles(&dir.path().join("angles.csv")).unwrap(), grid);
    let cfg = "[base]\nkind = linear_toral\n[cocycle]\nkind = piecewise\na11 = 2\na22 = 0.5\nangles = angles.csv\n[estimate]\nn_steps = 1000\nn_orbits = 2\n";
    let o = coclab(dir.path(), cfg, &["--out", "o", "estimate"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let section = CocycleSection {
        kind: CocycleKind::Piecewise {
            m: [2.0, 0.0, 0.0, 0.5],
            angles: "angles.csv".into(),
        },
        boost: 0.0,
    };
    let a = build_cocycle(&section, &BaseMap::cat_map(), |p| load_angles(&dir.path().join(p))).unwrap();
    assert_eq!(a.family_name(), "piecewise");
}

#[test]
fn malformed_angle_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "grid=2\n0.1,0.2,0.3\n").unwrap();
    assert!(load_angles(&dir.path().join("a.csv")).is_err());
    fs::write(dir.path().join("b.csv"), "0.1,0.2\n").unwrap();
    assert!(load_angles(&dir.path().join("b.csv")).is_err());
}
