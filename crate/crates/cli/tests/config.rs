use std::path::PathBuf;

use coclab::base::PerturbationMode;
use coclab::cocycle::AngleField;
use coclab::experiments::{ScanFamily, SearchStrategy};
use coclab::{BaseMap, IntMat2};
use coclab_cli::config::{
    ClassifySection, CocycleKind, CocycleSection, ConjugacySection, EstimateSection, ExperimentMode,
    ExperimentSection, MeasureChoice, ScanSection,
};
use coclab_cli::{canonical_print, config_hash, parse_config, RunConfig};
use proptest::prelude::*;

const MINIMAL: &str = "[base]\nkind = linear_toral\n[cocycle]\nkind = constant\n";

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.out_dir, PathBuf::from("out"));
    assert_eq!(cfg.base, Some(BaseMap::cat_map()));
    assert_eq!(
        cfg.cocycle,
        Some(CocycleSection {
            kind: CocycleKind::Constant { m: [1.0, 0.0, 0.0, 1.0] },
            boost: 0.0
        })
    );
    let e = cfg.estimate_section();
    assert_eq!((e.n_steps, e.n_orbits, e.measure), (100_000, 10, MeasureChoice::Lebesgue));
    let h = cfg.hyp_config();
    assert_eq!((h.grid, h.n_window, h.lambda_min), (32, 16, 1e-4));
}

#[test]
fn negative_k_names_section_and_key() {
    let err = parse_config("[base]\nkind = standard_map\nK = -1\n").unwrap_err();
    assert_eq!(err.issues.len(), 1);
    let msg = err.to_string();
    assert!(msg.contains("[base].K"), "{msg}");
    assert!(msg.contains("range violation"), "{msg}");
    assert_eq!(err.issues[0].line, Some(3));
}

#[test]
fn unknown_key_is_an_error() {
    let err = parse_config("[classify]\nnu_max = 0.5\n").unwrap_err();
    assert!(err.to_string().contains("unknown key `[classify].nu_max`"), "{err}");
}

#[test]
fn errors_are_aggregated() {
    let text = "seed = x\n[base]\nkind = rotation\nalpha = 2\n[estimate]\nmeasure = nope\n[classify]\ngrid = 4\nthis is not a pair\n";
    let err = parse_config(text).unwrap_err();
    assert_eq!(err.issues.len(), 5, "{err}");
    let lines: Vec<_> = err.issues.iter().map(|i| i.line).collect();
    assert_eq!(lines, vec![Some(1), Some(4), Some(6), Some(8), Some(9)]);
}

#[test]
fn keys_foreign_to_the_kind_are_rejected() {
    let err = parse_config("[base]\nkind = linear_toral\neps = 0.01\n").unwrap_err();
    assert!(err.to_string().contains("[base].eps"), "{err}");
}

#[test]
fn eps_above_anosov_bound_is_rejected() {
    let err = parse_config("[base]\nkind = perturbed_toral\neps = 0.2\n").unwrap_err();
    assert!(err.to_string().contains("[base].eps"), "{err}");
}

#[test]
fn non_sl2_constant_matrix_is_rejected() {
    let err = parse_config("[cocycle]\nkind = constant\na11 = 2\n").unwrap_err();
    assert!(err.to_string().contains("[cocycle]"), "{err}");
}

#[test]
fn periodic_measure_requires_linear_base() {
    let err = parse_config("[base]\nkind = standard_map\n[estimate]\nmeasure = periodic:3\n").unwrap_err();
    assert!(err.to_string().contains("linear_toral"), "{err}");
}

#[test]
fn measures_parse() {
    let get = |m: &str| parse_config(&format!("[estimate]\nmeasure = {m}\n")).unwrap().estimate_section().measure;
    assert_eq!(get("lebesgue"), MeasureChoice::Lebesgue);
    assert_eq!(get("periodic:4"), MeasureChoice::Periodic(4));
    assert_eq!(get("point:0.1,0.25"), MeasureChoice::Point(0.1, 0.25));
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = "# header\nseed = 5 # trailing\n\n[base]\n  kind = linear_toral   \n";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.seed, 5);
}

#[test]
fn hash_ignores_formatting() {
    let a = parse_config(MINIMAL).unwrap();
    let b = parse_config("# c\n[cocycle]\nkind=constant\n\n[base]\nkind =   linear_toral\n").unwrap();
    assert_eq!(config_hash(&a), config_hash(&b));
    let c = parse_config("seed = 1\n[base]\nkind = linear_toral\n[cocycle]\nkind = constant\n").unwrap();
    assert_ne!(config_hash(&a), config_hash(&c));
}

#[test]
fn canonical_print_of_minimal() {
    let cfg = parse_config(MINIMAL).unwrap();
    let text = canonical_print(&cfg);
    assert!(text.contains("l11 = 2\n"));
    assert!(text.contains("a22 = 1.0\n"));
    assert_eq!(parse_config(&text).unwrap(), cfg);
}

fn unit_open() -> impl Strategy<Value = f64> {
    (1e-6f64..0.999_999).prop_map(|x| x)
}

fn base() -> impl Strategy<Value = BaseMap> {
    let mats = prop_oneof![
        Just(IntMat2::new(2, 1, 1, 1)),
        Just(IntMat2::new(3, 2, 1, 1)),
        Just(IntMat2::new(1, 1, 1, 2)),
    ];
    prop_oneof![
        mats.clone().prop_map(|l| BaseMap::linear_toral(l).unwrap()),
        (mats, 0.0f64..=0.05, any::<bool>()).prop_map(|(l, eps, single)| {
            let mode = if single { PerturbationMode::SingleShear } else { PerturbationMode::ShearPair };
            BaseMap::perturbed_toral(l, eps, mode).unwrap()
        }),
        (0.0f64..20.0).prop_map(|k| BaseMap::standard_map(k).unwrap()),
        (unit_open(), unit_open()).prop_filter_map("valid rotation", |(a, b)| BaseMap::rotation(a, b).ok()),
    ]
}

fn sl2() -> impl Strategy<Value = [f64; 4]> {
    // [[a, b], [c, (1 + b c) / a]] is exactly representable to within rounding.
    (0.5f64..3.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b, c)| [a, b, c, (1.0 + b * c) / a])
}

fn cocycle() -> impl Strategy<Value = CocycleSection> {
    let kind = prop_oneof![
        sl2().prop_map(|m| CocycleKind::Constant { m }),
        (-4.0f64..4.0, -2.0f64..2.0).prop_map(|(energy, amp)| CocycleKind::Schrodinger { energy, amp }),
        Just(CocycleKind::Derivative),
        (sl2(), "[a-z]{1,8}\\.csv").prop_map(|(m, p)| CocycleKind::Piecewise { m, angles: PathBuf::from(p) }),
        (sl2(), -3.0f64..3.0, -1.0f64..1.0, -4i32..4, -4i32..4, -3.0f64..3.0).prop_map(|(m, constant, amplitude, ku, kv, phase)| {
            CocycleKind::Rotated {
                m,
                field: AngleField {
                    constant,
                    amplitude,
                    ku,
                    kv,
                    phase,
                },
            }
        }),
    ];
    (kind, prop_oneof![Just(0.0), -0.5f64..2.0]).prop_map(|(kind, boost)| CocycleSection { kind, boost })
}

fn estimate() -> impl Strategy<Value = EstimateSection> {
    let measure = prop_oneof![
        Just(MeasureChoice::Lebesgue),
        (0.0f64..1.0, 0.0f64..1.0).prop_map(|(u, v)| MeasureChoice::Point(u, v)),
    ];
    (100u64..10_000_000, 1usize..100, proptest::option::of(any::<u64>()), measure).prop_map(|(n_steps, n_orbits, seed, measure)| {
        EstimateSection {
            n_steps,
            n_orbits,
            seed,
            measure,
        }
    })
}

fn classify() -> impl Strategy<Value = ClassifySection> {
    (16usize..200, 8usize..64, 1e-8f64..1.0, 1e-3f64..=1.0).prop_map(|(grid, n_window, lambda_min, nu)| ClassifySection {
        grid,
        n_window,
        lambda_min,
        nu,
    })
}

fn scan() -> impl Strategy<Value = ScanSection> {
    let family = prop_oneof![
        (-5.0f64..0.0, 0.1f64..5.0, 2usize..50, -2.0f64..2.0).prop_map(|(lo, w, steps, amp)| ScanFamily::SchrodingerEnergy {
            lo,
            hi: lo + w,
            steps,
            amp
        }),
        (0.0f64..2.0, 0.1f64..5.0, 2usize..50).prop_map(|(lo, w, steps)| ScanFamily::StandardMapK { lo, hi: lo + w, steps }),
        (0.0f64..0.02, 0.001f64..0.03, 2usize..50).prop_map(|(lo, w, steps)| ScanFamily::PerturbationEps { lo, hi: lo + w, steps }),
    ];
    family.prop_map(|family| ScanSection { family })
}

fn experiment() -> impl Strategy<Value = ExperimentSection> {
    let mode = prop_oneof![Just(ExperimentMode::Raise), Just(ExperimentMode::Lower), Just(ExperimentMode::Probe)];
    let search = prop_oneof![
        Just(SearchStrategy::Random),
        Just(SearchStrategy::Greedy),
        (1e-4f64..10.0, 0.01f64..0.9999).prop_map(|(t0, cooling)| SearchStrategy::Anneal { t0, cooling }),
    ];
    (
        mode,
        0.0f64..1.0,
        0usize..1000,
        search,
        0.0f64..0.5,
        (2usize..128, 1usize..32),
        (100u64..100_000, 1usize..20),
    )
        .prop_map(
            |(mode, epsilon, trials, search, delta, (audit_grid, rotation_grid), (search_steps, search_orbits))| ExperimentSection {
                mode,
                epsilon,
                trials,
                search,
                delta,
                audit_grid,
                rotation_grid,
                search_steps,
                search_orbits,
            },
        )
}

fn conjugacy() -> impl Strategy<Value = ConjugacySection> {
    (64usize..1024, 1e-9f64..1.0).prop_map(|(resolution, tol)| ConjugacySection { resolution, tol })
}

prop_compose! {
    fn run_config()(
        seed in any::<u64>(),
        out in "[a-z][a-z0-9_/]{0,12}",
        base in proptest::option::of(base()),
        cocycle in proptest::option::of(cocycle()),
        estimate in proptest::option::of(estimate()),
        classify in proptest::option::of(classify()),
        scan in proptest::option::of(scan()),
        experiment in proptest::option::of(experiment()),
        conjugacy in proptest::option::of(conjugacy()),
    ) -> RunConfig {
        RunConfig { seed, out_dir: PathBuf::from(out), base, cocycle, estimate, classify, scan, experiment, conjugacy }
    }
}

proptest! {
    #[test]
    fn canonical_print_round_trips(cfg in run_config()) {
        let text = canonical_print(&cfg);
        let parsed = parse_config(&text);
        prop_assert!(parsed.is_ok(), "{}\n{:?}", text, parsed);
        let parsed = parsed.unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(canonical_print(&parsed), text);
        prop_assert_eq!(config_hash(&parsed), config_hash(&cfg));
    }

}
