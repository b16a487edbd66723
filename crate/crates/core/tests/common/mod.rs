#![allow(dead_code)]

use mvml_core::Matrix64;
use mvml_oracles::Dense;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn to_dense(a: &Matrix64) -> Dense {
    Dense::from_fn(a.rows(), a.cols(), |r, c| a[(r, c)])
}

pub fn from_dense(a: &Dense) -> Matrix64 {
    Matrix64::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)])
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix64 {
    Matrix64::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Product of two Gaussian factors, rank `min(rank, rows, cols)`.
pub fn low_rank(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rank: usize) -> Matrix64 {
    gaussian(rng, rows, rank).matmul(&gaussian(rng, rank, cols))
}

pub fn frob_dist(a: &Matrix64, b: &Dense) -> f64 {
    (to_dense(a) - b).norm()
}

/// Random aligned instance. Each sample keeps one randomly chosen anchor
/// view; every other view drops it with probability `missing_p`. Label
/// entries are hidden with probability `hidden_p`, and every present row gets
/// at least one observed positive label.
pub fn random_dataset(
    rng: &mut ChaCha8Rng,
    n: usize,
    c: usize,
    dims: &[usize],
    missing_p: f64,
    hidden_p: f64,
) -> mvml_core::Dataset64 {
    use mvml_core::{Dataset64, ViewData};
    let v = dims.len();
    let anchor: Vec<usize> = (0..n).map(|_| rng.random_range(0..v)).collect();
    let views = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let missing: Vec<bool> = (0..n).map(|j| anchor[j] != i && rng.random_bool(missing_p)).collect();
            let mut x = gaussian(rng, n, d);
            let mut y = Matrix64::from_fn(n, c, |_, _| {
                if rng.random_bool(hidden_p) {
                    0.0
                } else if rng.random_bool(0.4) {
                    1.0
                } else {
                    -1.0
                }
            });
            for j in 0..n {
                if missing[j] {
                    x.row_mut(j).fill(0.0);
                    y.row_mut(j).fill(0.0);
                } else {
                    let k = rng.random_range(0..c);
                    y[(j, k)] = 1.0;
                }
            }
            ViewData::new(x, y, missing).unwrap()
        })
        .collect();
    Dataset64::new(views, true).unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng, dims: &[usize], c: usize) -> mvml_core::Weights64 {
    mvml_core::Weights64::new(dims.iter().map(|&d| gaussian(rng, d, c)).collect()).unwrap()
}

/// Property-test configuration without on-disk regression files.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases: n, failure_persistence: None, ..Default::default() }
}
