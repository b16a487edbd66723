mod common;

use common::{from_dense, gaussian, random_dataset, to_dense};
use mvml_core::linalg::trace_norm_subgradient;
use mvml_core::masking::{corrupt, generate_synthetic, stream_rng, CorruptionSpec, SyntheticSpec};
use mvml_core::solver::{
    fit, fit_state, init_state, predict, update_multipliers, update_w, update_z, SolverConfig, SolverState, Variant,
};
use mvml_core::{Dataset64, Error, Matrix64, ViewData, Weights64};
use mvml_oracles as oracle;
use proptest::prelude::*;

fn m(rows: &[&[f64]]) -> Matrix64 {
    Matrix64::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn stacked_present(ds: &Dataset64, w: &Weights64) -> Matrix64 {
    mvml_core::data::stack_predictions(ds, w, &ds.present_rows()).unwrap()
}

/// State with random split variables and multipliers of the right shapes.
fn randomized_state(ds: &Dataset64, config: &SolverConfig, seed: u64) -> SolverState<f64> {
    let mut state = init_state(ds, config).unwrap();
    let mut rng = stream_rng(seed, 300);
    for (z, l) in state.z.iter_mut().zip(state.lambda_mult.iter_mut()) {
        *z = gaussian(&mut rng, z.rows(), z.cols());
        *l = gaussian(&mut rng, l.rows(), l.cols());
    }
    state
}

fn dense_step(ds: &Dataset64, state: &SolverState<f64>, config: &SolverConfig) -> Vec<oracle::Dense> {
    let views: Vec<_> = ds
        .views()
        .iter()
        .map(|v| (to_dense(v.features()), to_dense(v.labels()), v.missing().to_vec()))
        .collect();
    let w_prev: Vec<_> = state.w.weights().iter().map(to_dense).collect();
    let z: Vec<_> = state.z.iter().map(to_dense).collect();
    let mult: Vec<_> = state.lambda_mult.iter().map(to_dense).collect();
    let grad = oracle::polar(&to_dense(&stacked_present(ds, &state.w)), 1e-10);
    oracle::dense_weight_step(&views, &w_prev, &z, &mult, &grad, config.lambda, config.mu, config.tolerances.ridge_rel)
}

#[test]
fn weight_step_matches_dense_system_on_one_view_toy() {
    let x = m(&[&[1.0, 0.5], &[-0.3, 2.0], &[0.8, -1.1], &[1.5, 0.2], &[-0.7, -0.4], &[0.1, 1.3]]);
    let y = m(&[&[1.0, -1.0], &[1.0, 1.0], &[-1.0, 1.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, -1.0]]);
    let ds = Dataset64::new(vec![ViewData::complete(x, y).unwrap()], true).unwrap();
    let config = SolverConfig { lambda: 0.7, ..SolverConfig::default() };
    let state = randomized_state(&ds, &config, 1);
    let grad = trace_norm_subgradient(&stacked_present(&ds, &state.w)).unwrap();
    let w = update_w(&state, &ds, &config, &grad).unwrap();
    let expected = dense_step(&ds, &state, &config);
    let diff = (to_dense(w.view(0)) - &expected[0]).norm();
    assert!(diff <= 1e-9 * expected[0].norm().max(1.0), "difference {diff:e}");
}

#[test]
fn weight_step_matches_dense_system_with_missing_rows() {
    for seed in 0..10 {
        let ds = random_dataset(&mut stream_rng(seed, 301), 12, 3, &[2, 3, 2], 0.4, 0.3);
        let config = SolverConfig { lambda: 0.4, mu: 3.0, ..SolverConfig::default() };
        let state = randomized_state(&ds, &config, seed);
        let grad = trace_norm_subgradient(&stacked_present(&ds, &state.w)).unwrap();
        let w = update_w(&state, &ds, &config, &grad).unwrap();
        let expected = dense_step(&ds, &state, &config);
        for (got, want) in w.weights().iter().zip(&expected) {
            let diff = (to_dense(got) - want).norm();
            assert!(diff <= 1e-9 * want.norm().max(1.0), "seed {seed}: difference {diff:e}");
        }
    }
}

#[test]
fn weight_step_vanishes_at_exact_fit_without_regularization() {
    let y = m(&[&[1.0, -1.0], &[-1.0, 1.0]]);
    let ds = Dataset64::new(vec![ViewData::complete(Matrix64::identity(2), y.clone()).unwrap()], true).unwrap();
    let config = SolverConfig { lambda: 0.0, ..SolverConfig::default() };
    let mut state = init_state(&ds, &config).unwrap();
    state.w = Weights64::new(vec![y]).unwrap();
    let grad = Matrix64::zeros(2, 2);
    let w = update_w(&state, &ds, &config, &grad).unwrap();
    assert!(w.view(0).frobenius_norm() < 1e-12);
}

#[test]
fn weight_step_rejects_mismatched_gradient() {
    let ds = random_dataset(&mut stream_rng(2, 302), 8, 2, &[2], 0.0, 0.0);
    let config = SolverConfig::default();
    let state = init_state(&ds, &config).unwrap();
    assert!(matches!(update_w(&state, &ds, &config, &Matrix64::zeros(3, 2)), Err(Error::InvalidInput(_))));
}

#[test]
fn split_update_examples() {
    let ds = random_dataset(&mut stream_rng(3, 303), 15, 3, &[3, 2], 0.3, 0.2);

    let free = SolverConfig { lambda: 0.0, ..SolverConfig::default() };
    let state = randomized_state(&ds, &free, 3);
    let z = update_z(&state, &ds, &free).unwrap();
    let groups = ds.sublabel_groups();
    for (a, &k) in state.labels.iter().enumerate() {
        let block = mvml_core::data::stack_predictions(&ds, &state.w, &groups[k]).unwrap();
        let mut expect = block.clone();
        expect.add_scaled(1.0 / free.mu, &state.lambda_mult[a]);
        assert_eq!(z[a], expect);
        assert_eq!(block.rows(), groups[k].iter().map(Vec::len).sum::<usize>());
    }

    let heavy = SolverConfig { lambda: 1e6, ..SolverConfig::default() };
    let state = randomized_state(&ds, &heavy, 3);
    assert!(update_z(&state, &ds, &heavy).unwrap().iter().all(|z| z.frobenius_norm() == 0.0));

    let config = SolverConfig { lambda: 2.0, mu: 4.0, ..SolverConfig::default() };
    let state = randomized_state(&ds, &config, 4);
    let z = update_z(&state, &ds, &config).unwrap();
    for (a, &k) in state.labels.iter().enumerate() {
        let mut arg = mvml_core::data::stack_predictions(&ds, &state.w, &groups[k]).unwrap();
        arg.add_scaled(1.0 / config.mu, &state.lambda_mult[a]);
        let expect = oracle::shrink(&to_dense(&arg), config.lambda / config.mu);
        assert!((to_dense(&z[a]) - expect).norm() <= 1e-8);
    }
}

#[test]
fn multiplier_update_examples() {
    let ds = random_dataset(&mut stream_rng(5, 304), 10, 2, &[2, 2], 0.2, 0.1);
    let config = SolverConfig { mu: 5.0, ..SolverConfig::default() };
    let groups = ds.sublabel_groups();
    let mut state = randomized_state(&ds, &config, 5);
    let blocks: Vec<Matrix64> = state
        .labels
        .iter()
        .map(|&k| mvml_core::data::stack_predictions(&ds, &state.w, &groups[k]).unwrap())
        .collect();

    state.z = blocks.clone();
    assert_eq!(update_multipliers(&state, &ds, &config).unwrap(), state.lambda_mult);

    // Λ = 0 and residual R = XW − Z = XW − (XW − R).
    let residuals: Vec<Matrix64> = blocks.iter().map(|b| gaussian(&mut stream_rng(6, 304), b.rows(), b.cols())).collect();
    state.z = blocks.iter().zip(&residuals).map(|(b, r)| b.sub(r)).collect();
    state.lambda_mult = residuals.iter().map(|r| Matrix64::zeros(r.rows(), r.cols())).collect();
    let once = update_multipliers(&state, &ds, &config).unwrap();
    for (l, r) in once.iter().zip(&residuals) {
        assert!(l.max_abs_diff(&r.scale(5.0)) < 1e-12);
    }
    state.lambda_mult = once;
    let twice = update_multipliers(&state, &ds, &config).unwrap();
    for (l, r) in twice.iter().zip(&residuals) {
        assert!(l.max_abs_diff(&r.scale(2.0 * 5.0)) < 1e-12);
    }
}

#[test]
fn init_state_is_seeded_with_zero_split_variables() {
    let ds = random_dataset(&mut stream_rng(7, 305), 20, 4, &[3, 5], 0.3, 0.2);
    let config = SolverConfig { init_seed: 11, ..SolverConfig::default() };
    let a = init_state(&ds, &config).unwrap();
    assert_eq!(a, init_state(&ds, &config).unwrap());
    assert_ne!(a.w, init_state(&ds, &SolverConfig { init_seed: 12, ..config.clone() }).unwrap().w);
    assert!(a.z.iter().chain(&a.lambda_mult).all(|m| m.frobenius_norm() == 0.0));
    assert_eq!(a.iteration, 0);
}

// Oracle: E‖w‖ for w ~ N(0, I/d) is √(2/d)·Γ((d+1)/2)/Γ(d/2) ≈ 1 − 1/(4d).
#[test]
fn initial_weight_columns_have_unit_scale() {
    let d = 40;
    let ds = Dataset64::new(
        vec![ViewData::complete(Matrix64::zeros(2, d), m(&[&[1.0], &[-1.0]])).unwrap()],
        true,
    )
    .unwrap();
    let draws = 1000;
    let mut total = 0.0;
    for seed in 0..draws {
        let state = init_state(&ds, &SolverConfig { init_seed: seed, ..SolverConfig::default() }).unwrap();
        total += state.w.view(0).frobenius_norm();
    }
    let mean = total / draws as f64;
    assert!((mean - 1.0).abs() <= 0.1, "mean column norm {mean}");
}

#[test]
fn without_regularization_full_reaches_least_squares() {
    let ds = random_dataset(&mut stream_rng(8, 306), 40, 3, &[3, 4], 0.3, 0.2);
    let loss_only = SolverConfig { variant: Variant::LossOnly, ..SolverConfig::default() };
    let (w_ls, trace) = fit(&ds, &loss_only).unwrap();
    assert_eq!(trace.iterations(), 1);

    let full = SolverConfig { lambda: 0.0, mu: 1.0, rel_tol: 0.0, max_iters: 4000, ..SolverConfig::default() };
    let (w_full, _) = fit(&ds, &full).unwrap();
    let mut worst = 0.0f64;
    for (i, v) in ds.views().iter().enumerate() {
        let (a, b) = (v.features().matmul(w_ls.view(i)), v.features().matmul(w_full.view(i)));
        for j in v.present_rows() {
            for k in 0..ds.c() {
                if v.labels()[(j, k)] != 0.0 {
                    worst = worst.max((a[(j, k)] - b[(j, k)]).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-6, "largest observed-entry gap {worst:e}");
}

#[test]
fn predict_examples() {
    let x = m(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0]]);
    let y = m(&[&[1.0, -1.0], &[-1.0, 1.0], &[1.0, 1.0]]);
    let w1 = m(&[&[0.2, -0.1], &[0.4, 0.3]]);
    let single = Dataset64::new(vec![ViewData::complete(x.clone(), y.clone()).unwrap()], true).unwrap();
    let w = Weights64::new(vec![w1.clone()]).unwrap();
    assert_eq!(predict(&w, &single).unwrap(), x.matmul(&w1));

    let twin = Dataset64::new(
        vec![ViewData::complete(x.clone(), y.clone()).unwrap(), ViewData::complete(x.clone(), y.clone()).unwrap()],
        true,
    )
    .unwrap();
    let w2 = Weights64::new(vec![w1.clone(), w1.clone()]).unwrap();
    assert!(predict(&w2, &twin).unwrap().max_abs_diff(&x.matmul(&w1)) < 1e-15);

    let x2 = m(&[&[-1.0], &[2.0], &[0.5]]);
    let mut x1 = x.clone();
    x1.row_mut(1).fill(0.0);
    let mut y1 = y.clone();
    y1.row_mut(1).fill(0.0);
    let partial = Dataset64::new(
        vec![
            ViewData::new(x1, y1, vec![false, true, false]).unwrap(),
            ViewData::complete(x2.clone(), y.clone()).unwrap(),
        ],
        true,
    )
    .unwrap();
    let wv2 = m(&[&[0.6, -0.2]]);
    let w = Weights64::new(vec![w1.clone(), wv2.clone()]).unwrap();
    let scores = predict(&w, &partial).unwrap();
    assert_eq!(scores.row(1), x2.matmul(&wv2).row(1));

    let mut lone = x.clone();
    lone.row_mut(0).fill(0.0);
    let mut lone_y = y.clone();
    lone_y.row_mut(0).fill(0.0);
    let gap = Dataset64::new(vec![ViewData::new(lone, lone_y, vec![true, false, false]).unwrap()], false).unwrap();
    assert_eq!(predict(&Weights64::new(vec![w1]).unwrap(), &gap), Err(Error::AllViewsMissing(0)));
}

#[test]
fn config_validation() {
    let ds = random_dataset(&mut stream_rng(9, 307), 6, 2, &[2], 0.0, 0.0);
    for bad in [
        SolverConfig { mu: 0.0, ..SolverConfig::default() },
        SolverConfig { lambda: -1.0, ..SolverConfig::default() },
        SolverConfig { max_iters: 0, ..SolverConfig::default() },
    ] {
        assert!(matches!(fit(&ds, &bad), Err(Error::InvalidInput(_))));
    }
}

fn small_synthetic(seed: u64, n: usize, c: usize, dims: Vec<usize>) -> Dataset64 {
    let spec = SyntheticSpec { n, c, dims, ..SyntheticSpec::desk(seed) };
    let clean: Dataset64 = generate_synthetic(&spec).unwrap();
    corrupt(&clean, &CorruptionSpec::new(0.3, 0.5, true, seed)).unwrap()
}

#[test]
fn weight_solves_stay_accurate_and_state_shapes_hold() {
    let ds = small_synthetic(21, 400, 10, vec![12, 16, 20]);
    let config = SolverConfig { max_iters: 60, ..SolverConfig::default() };
    let (state, trace) = fit_state(&ds, &config).unwrap();
    assert!(trace.records.iter().all(|r| r.solve_residual <= 1e-8));
    let groups = ds.sublabel_groups();
    for (a, &k) in state.labels.iter().enumerate() {
        let rows: usize = groups[k].iter().map(Vec::len).sum();
        assert_eq!(state.z[a].shape(), (rows, ds.c()));
        assert_eq!(state.lambda_mult[a].shape(), (rows, ds.c()));
    }
    assert_eq!(trace.iterations(), state.iteration);
}

#[test]
fn fit_is_deterministic() {
    let ds = small_synthetic(22, 200, 8, vec![8, 10]);
    let config = SolverConfig { max_iters: 15, ..SolverConfig::default() };
    let (a, ta) = fit(&ds, &config).unwrap();
    let (b, tb) = fit(&ds, &config).unwrap();
    assert_eq!(a, b);
    let objectives = |t: &mvml_core::solver::SolverTrace| t.records.iter().map(|r| r.objective).collect::<Vec<_>>();
    assert_eq!(objectives(&ta), objectives(&tb));
}

proptest! {
    #![proptest_config(common::cases(24))]

    #[test]
    fn objective_never_increases(seed in any::<u64>(), variant in prop_oneof![Just(Variant::Full), Just(Variant::LossPlusLocal)]) {
        let ds = small_synthetic(seed, 120, 5, vec![6, 8, 10]);
        let config = SolverConfig { variant, max_iters: 60, ..SolverConfig::default() };
        let (_, trace) = fit(&ds, &config).unwrap();
        let mut previous = trace.initial_objective;
        for r in &trace.records {
            prop_assert!(r.objective <= previous + 1e-8 * previous.abs(), "iteration {}: {} after {}", r.iteration, r.objective, previous);
            prop_assert!(r.objective >= 0.0);
            previous = r.objective;
        }
    }

    #[test]
    fn weight_step_matches_dense_system(seed in any::<u64>(), lambda in 0.0f64..3.0, mu in 0.5f64..10.0) {
        let ds = random_dataset(&mut stream_rng(seed, 308), 10, 3, &[2, 3], 0.3, 0.3);
        let config = SolverConfig { lambda, mu, ..SolverConfig::default() };
        let state = randomized_state(&ds, &config, seed);
        let grad = from_dense(&oracle::polar(&to_dense(&stacked_present(&ds, &state.w)), 1e-10));
        let w = update_w(&state, &ds, &config, &grad).unwrap();
        let expected = dense_step(&ds, &state, &config);
        for (got, want) in w.weights().iter().zip(&expected) {
            prop_assert!((to_dense(got) - want).norm() <= 1e-9 * want.norm().max(1.0));
        }
    }
}
