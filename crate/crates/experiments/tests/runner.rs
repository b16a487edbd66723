use std::fs;

use mvml_core::masking::{corrupt, CorruptionSpec, SyntheticSpec};
use mvml_core::metrics::MetricsReport;
use mvml_core::solver::{fit, predict, SolverConfig, Variant};
use mvml_core::{Dataset64, Matrix64};
use mvml_experiments::config::{splitmix64, RepeatSeeds};
use mvml_experiments::report::{convergence_csv, export_report, Format};
use mvml_experiments::runner::{ablate, run_on, split_indices, MetricSummary, RunRecord};
use mvml_experiments::{run_experiment, DataSource, ExpError, ExperimentConfig};
use mvml_oracles::Dense;
use proptest::prelude::*;

fn small(seed: u64, repeats: usize) -> ExperimentConfig {
    let spec = SyntheticSpec { n: 120, c: 5, dims: vec![6, 8, 10], positives_per_sample: 1.5, ..SyntheticSpec::desk(seed) };
    ExperimentConfig {
        data: DataSource::Synthetic(spec),
        corruption: CorruptionSpec::new(0.3, 0.4, true, seed),
        solver: SolverConfig { max_iters: 60, init_seed: seed, ..SolverConfig::default() },
        repeats,
        ..ExperimentConfig::desk(seed)
    }
}

/// Per-view least squares from the normal equations, averaged over views.
fn least_squares_scores(train: &Dataset64, test: &Dataset64) -> Matrix64 {
    let mut total = Dense::zeros(test.n(), test.c());
    for (tr, te) in train.views().iter().zip(test.views()) {
        let x = Dense::from_fn(tr.n(), tr.dim(), |r, c| tr.features()[(r, c)]);
        let y = Dense::from_fn(tr.n(), tr.c(), |r, c| tr.labels()[(r, c)]);
        let w = (x.transpose() * &x).lu().solve(&(x.transpose() * y)).unwrap();
        let xt = Dense::from_fn(te.n(), te.dim(), |r, c| te.features()[(r, c)]);
        total += xt * w;
    }
    let v = test.num_views() as f64;
    Matrix64::from_fn(test.n(), test.c(), |r, c| total[(r, c)] / v)
}

#[test]
fn clean_unregularized_run_matches_least_squares() {
    let mut config = small(3, 1);
    config.corruption = CorruptionSpec::new(0.0, 0.0, false, 3);
    config.solver = SolverConfig { lambda: 0.0, mu: 1.0, rel_tol: 0.0, max_iters: 3000, ..config.solver };
    let out = run_experiment(&config).unwrap();

    let data = config.data.load().unwrap();
    let seeds = RepeatSeeds::derive(&config, 0);
    let (train_idx, test_idx) = split_indices(data.n(), config.train_fraction, seeds.split);
    let (train, test) = (data.select_samples(&train_idx).unwrap(), data.select_samples(&test_idx).unwrap());
    let truth = test.sample_labels().unwrap();
    let expected = MetricsReport::evaluate(&least_squares_scores(&train, &test), &truth).unwrap();
    let got = out.record.repeats[0].metrics;
    for ((name, a), (_, b)) in got.values().iter().zip(expected.values()) {
        assert!((a - b).abs() < 1e-12, "{name}: {a} vs {b}");
    }
}

#[test]
fn repeat_equals_direct_pipeline() {
    let config = small(5, 2);
    let out = run_experiment(&config).unwrap();
    let data = config.data.load().unwrap();
    for r in 0..2 {
        let seeds = RepeatSeeds::derive(&config, r);
        assert_eq!(out.record.repeats[r].seeds, seeds);
        let (train_idx, test_idx) = split_indices(data.n(), config.train_fraction, seeds.split);
        let train = data.select_samples(&train_idx).unwrap();
        let test = data.select_samples(&test_idx).unwrap();
        let train = corrupt(&train, &CorruptionSpec { seed: seeds.corruption, ..config.corruption }).unwrap();
        let solver = SolverConfig { init_seed: seeds.init, ..config.solver.clone() };
        let (w, trace) = fit(&train, &solver).unwrap();
        let metrics = MetricsReport::evaluate(&predict(&w, &test).unwrap(), &test.sample_labels().unwrap()).unwrap();
        assert_eq!(out.record.repeats[r].metrics, metrics);
        assert_eq!(out.record.repeats[r].trace.final_objective, trace.final_objective());
        assert_eq!((out.record.repeats[r].n_train, out.record.repeats[r].n_test), (84, 36));
    }
    assert_ne!(out.record.repeats[0].seeds, out.record.repeats[1].seeds);
}

#[test]
fn same_config_twice_gives_identical_reports() {
    let config = small(7, 2);
    let (a, b) = (run_experiment(&config).unwrap(), run_experiment(&config).unwrap());
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = export_report(&a.record, &a.timings, da.path(), Format::Csv).unwrap();
    let fb = export_report(&b.record, &b.timings, db.path(), Format::Csv).unwrap();
    assert_eq!(fa.len(), fb.len());
    for (pa, pb) in fa.iter().zip(&fb) {
        if pa.ends_with("timings.json") {
            continue;
        }
        assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap(), "{}", pa.display());
    }
}

#[test]
fn report_files_round_trip_and_have_expected_shape() {
    let config = small(9, 3);
    let out = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_report(&out.record, &out.timings, dir.path(), Format::Csv).unwrap();
    let parsed: RunRecord = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(parsed, out.record);

    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3 + 1);
    assert_eq!(metrics.lines().next().unwrap(), "repeat,one_minus_hl,one_minus_rl,ap,auc");
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), "metric,mean,std,r0,r1,r2");
    assert_eq!(summary.lines().count(), 5);
    for r in 0..3 {
        let conv = fs::read_to_string(dir.path().join(format!("convergence_r{r}.csv"))).unwrap();
        assert_eq!(conv.lines().next().unwrap(), "iteration,f,J,residual");
        assert_eq!(conv.lines().count(), out.record.repeats[r].trace.iterations + 1);
    }

    let json_only = tempfile::tempdir().unwrap();
    let files = export_report(&out.record, &out.timings, json_only.path(), Format::Json).unwrap();
    assert_eq!(files.len(), 2);
}

#[test]
fn aggregates_are_recomputable_from_repeats() {
    let out = run_experiment(&small(11, 4)).unwrap();
    assert_eq!(RunRecord::summarize(&out.record.repeats), out.record.summary);
    let auc: Vec<f64> = out.record.repeats.iter().map(|r| r.metrics.auc).collect();
    assert_eq!(out.record.metric("auc").unwrap().values, auc);
}

#[test]
fn desk_run_convergence_series_is_non_increasing() {
    let mut config = ExperimentConfig::desk(0);
    config.repeats = 1;
    let out = run_experiment(&config).unwrap();
    let csv = convergence_csv(&out.record.repeats[0].trace);
    let f: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(f.len() > 2);
    for w in f.windows(2) {
        assert!(w[1] <= w[0] + 1e-8 * w[0].abs(), "{} then {}", w[0], w[1]);
    }
}

#[test]
fn ablation_pairs_variants_on_identical_seeds() {
    let out = ablate(&small(13, 2)).unwrap();
    let names: Vec<&str> = out.study.entries.iter().map(|e| e.setting.as_str()).collect();
    assert_eq!(names, ["loss_only", "loss_plus_local", "full"]);
    let seeds: Vec<_> = out.study.entries.iter().map(|e| e.record.repeats[1].seeds).collect();
    assert!(seeds.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(out.study.entry("full").unwrap().config.solver.variant, Variant::Full);
    assert_eq!(out.study.entry("loss_only").unwrap().repeats[0].trace.iterations, 1);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = small(1, 1);
    c.train_fraction = 1.0;
    assert!(matches!(run_experiment(&c), Err(ExpError::Config(_))));
    let mut c = small(1, 0);
    assert!(matches!(run_experiment(&c), Err(ExpError::Config(_))));
    c.repeats = 1;
    c.solver.mu = 0.0;
    let err = run_experiment(&c).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let mut c = small(1, 1);
    c.corruption.alpha = 0.9;
    assert!(matches!(run_experiment(&c), Err(ExpError::Repeat { index: 0, .. })));
    let unaligned = corrupt(&small(1, 1).data.load().unwrap(), &CorruptionSpec::new(0.0, 0.0, true, 1)).unwrap();
    assert!(run_on(&unaligned, &small(1, 1)).is_err());
}

#[test]
fn hash_ignores_output_dir_and_tracks_seeds() {
    let a = small(2, 1);
    let mut b = a.clone();
    b.output_dir = Some("elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    b.reseed(99);
    assert_ne!(a.hash(), b.hash());
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), a);
}

#[test]
fn splitmix_reference_values() {
    // First outputs of the reference SplitMix64 generator seeded with 0.
    assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    assert_eq!(splitmix64(0x9e37_79b9_7f4a_7c15), 0x6e78_9e6a_a1b9_65f4);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn split_partitions_the_samples(n in 2usize..400, fraction in 0.01f64..0.99, seed in any::<u64>()) {
        let (train, test) = split_indices(n, fraction, seed);
        prop_assert!(!train.is_empty() && !test.is_empty());
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!((train.len() as f64 - fraction * n as f64).abs() <= 1.0);
        prop_assert_eq!(split_indices(n, fraction, seed), (train, test));
    }

    #[test]
    fn metric_summary_matches_definition(values in proptest::collection::vec(0.0f64..1.0, 1..12)) {
        let s = MetricSummary::of("x", values.clone());
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        prop_assert!((s.mean - mean).abs() <= 1e-15);
        if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            prop_assert!((s.std - var.sqrt()).abs() <= 1e-12);
        } else {
            prop_assert_eq!(s.std, 0.0);
        }
    }
}
