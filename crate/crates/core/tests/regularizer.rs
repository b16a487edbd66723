mod common;

use std::time::Instant;

use common::{random_dataset, random_weights, to_dense};
use mvml_core::data::stack_predictions;
use mvml_core::masking::{corrupt, generate_synthetic, stream_rng, CorruptionSpec, SyntheticSpec};
use mvml_core::regularizer::{masked_loss, objective, regularizer_value};
use mvml_core::solver::{fit, SolverConfig};
use mvml_core::{Dataset64, Matrix64, ViewData, Weights64};
use mvml_oracles as oracle;
use proptest::prelude::*;
use rand::Rng;

fn random_instance(seed: u64) -> (Dataset64, Weights64) {
    let mut rng = stream_rng(seed, 200);
    let n = rng.random_range(5..60usize);
    let c = rng.random_range(1..8usize);
    let views = rng.random_range(1..4usize);
    let dims: Vec<usize> = (0..views).map(|_| rng.random_range(1..8usize)).collect();
    let missing_p = rng.random_range(0.0..0.6);
    let hidden_p = rng.random_range(0.0..0.5);
    let ds = random_dataset(&mut rng, n, c, &dims, missing_p, hidden_p);
    let w = random_weights(&mut rng, &dims, c);
    (ds, w)
}

// Every present row carries an observed positive label, so the label groups
// cover all rows and at least one group is non-empty.
#[test]
fn local_term_dominates_global_term_on_500_instances() {
    let started = Instant::now();
    let mut worst = f64::INFINITY;
    for seed in 0..500 {
        let (ds, w) = random_instance(seed);
        let (local, global) = regularizer_value(&ds, &w).unwrap();
        assert!(local - global >= -1e-7 * local, "seed {seed}: local {local}, global {global}");
        worst = worst.min((local - global) / local.max(1e-300));
    }
    assert!(started.elapsed().as_secs() < 60);
    println!("smallest relative gap {worst:.3e}");
}

// Oracle: block stack assembled entry by entry.
#[test]
fn stack_predictions_matches_hand_stack() {
    let x1 = Matrix64::from_fn(3, 2, |r, c| (r * 2 + c) as f64);
    let x2 = Matrix64::from_fn(3, 1, |r, _| 1.0 + r as f64);
    let labels = Matrix64::from_fn(3, 4, |_, _| 1.0);
    let ds = Dataset64::new(
        vec![ViewData::complete(x1.clone(), labels.clone()).unwrap(), ViewData::complete(x2.clone(), labels).unwrap()],
        false,
    )
    .unwrap();
    let w1 = Matrix64::from_fn(2, 4, |r, c| r as f64 - c as f64);
    let w2 = Matrix64::from_fn(1, 4, |_, c| 0.5 * c as f64);
    let w = Weights64::new(vec![w1.clone(), w2.clone()]).unwrap();
    let stacked = stack_predictions(&ds, &w, &[vec![0, 2], vec![2, 1, 0]]).unwrap();
    assert_eq!(stacked.shape(), (5, 4));
    for k in 0..4 {
        for (r, &j) in [0usize, 2].iter().enumerate() {
            let expect = x1[(j, 0)] * w1[(0, k)] + x1[(j, 1)] * w1[(1, k)];
            assert_eq!(stacked[(r, k)], expect);
        }
        for (r, &j) in [2usize, 1, 0].iter().enumerate() {
            assert_eq!(stacked[(2 + r, k)], x2[(j, 0)] * w2[(0, k)]);
        }
    }
    let first_only = stack_predictions(&ds, &w, &[vec![0, 1, 2], vec![]]).unwrap();
    assert_eq!(first_only, x1.matmul(&w1));
}

/// Objective from definitions: loss over observed entries, nuclear norms from
/// the nalgebra SVD of explicitly assembled stacks.
fn objective_oracle(ds: &Dataset64, w: &Weights64, lambda: f64) -> f64 {
    let preds: Vec<Matrix64> = ds.views().iter().zip(w.weights()).map(|(v, wi)| v.features().matmul(wi)).collect();
    let mut loss = 0.0;
    let mut all_rows = Vec::new();
    for (v, f) in ds.views().iter().zip(&preds) {
        for j in 0..v.n() {
            if v.is_missing(j) {
                continue;
            }
            all_rows.push(f.row(j).to_vec());
            for k in 0..ds.c() {
                let y = v.labels()[(j, k)];
                if y != 0.0 {
                    loss += 0.5 * (f[(j, k)] - y).powi(2);
                }
            }
        }
    }
    let mut local = 0.0;
    for k in 0..ds.c() {
        let mut rows = Vec::new();
        for (v, f) in ds.views().iter().zip(&preds) {
            for j in 0..v.n() {
                if !v.is_missing(j) && v.labels()[(j, k)] == 1.0 {
                    rows.push(f.row(j).to_vec());
                }
            }
        }
        if !rows.is_empty() {
            local += oracle::nuclear(&to_dense(&Matrix64::from_rows(&rows).unwrap()));
        }
    }
    let global = oracle::nuclear(&to_dense(&Matrix64::from_rows(&all_rows).unwrap()));
    loss + lambda * (local - global)
}

#[test]
fn objective_at_fitted_weights_matches_recomputation() {
    let spec = SyntheticSpec { n: 300, c: 8, dims: vec![10, 12, 14], ..SyntheticSpec::desk(3) };
    let clean: Dataset64 = generate_synthetic(&spec).unwrap();
    let ds = corrupt(&clean, &CorruptionSpec::new(0.5, 0.5, true, 3)).unwrap();
    let config = SolverConfig { max_iters: 40, ..SolverConfig::default() };
    let (w, trace) = fit(&ds, &config).unwrap();
    let total = objective(&ds, &w, config.lambda).unwrap().total();
    let expected = objective_oracle(&ds, &w, config.lambda);
    assert!((total - expected).abs() <= 1e-9 * expected.abs());
    assert!((trace.final_objective() - expected).abs() <= 1e-9 * expected.abs());
}

proptest! {
    #![proptest_config(common::cases(48))]

    #[test]
    fn objective_is_nonnegative_and_matches_oracle(seed in any::<u64>(), lambda in 0.0f64..5.0) {
        let (ds, w) = random_instance(seed);
        let value = objective(&ds, &w, lambda).unwrap();
        prop_assert!(value.total() >= -1e-6 * (value.loss + lambda * value.local_term));
        let expected = objective_oracle(&ds, &w, lambda);
        prop_assert!((value.total() - expected).abs() <= 1e-9 * (value.loss + lambda * value.local_term).max(1.0));
        prop_assert_eq!(masked_loss(&ds, &w).unwrap(), value.loss);
    }
}
