//! Timing of the Gram-route trace-norm subgradient against an SVD baseline.

use std::time::Instant;

use mvml_core::linalg::reference::{polar_from_svd, thin_svd, thin_svd_bytes};
use mvml_core::linalg::trace_norm_subgradient;
use mvml_core::masking::stream_rng;
use mvml_core::Matrix64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};

const STREAM_BENCH: u64 = 8 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<(usize, usize)>,
    pub repeats: usize,
    /// Repeats of the SVD baseline; it is far slower than the kernel.
    pub oracle_repeats: usize,
    /// The baseline is skipped when its working set would exceed this.
    pub memory_guard_bytes: u128,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![(10_000, 100), (20_000, 100), (40_000, 100), (10_000, 200), (20_000, 200), (40_000, 200)],
            repeats: 10,
            oracle_repeats: 10,
            memory_guard_bytes: 2 << 30,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub c: usize,
    /// Median seconds per call.
    pub subgradient_seconds: f64,
    /// `None` when the memory guard skipped the baseline.
    pub oracle_seconds: Option<f64>,
    /// Largest entry-wise gap between the two subgradients.
    pub max_abs_diff: Option<f64>,
}

/// Median seconds per call, which shrugs off the odd interrupted call.
fn median_seconds<R>(repeats: usize, mut f: impl FnMut() -> R) -> (f64, R) {
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let started = Instant::now();
        let out = std::hint::black_box(f());
        times.push(started.elapsed().as_secs_f64());
        last = Some(out);
    }
    (median(&mut times), last.expect("at least one repeat"))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 0 { 0.5 * (values[mid - 1] + values[mid]) } else { values[mid] }
}

pub fn bench_subgradient(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.repeats == 0 || config.oracle_repeats == 0 {
        return Err(ExpError::Config("bench repeats must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(config.sizes.len());
    for (s, &(n, c)) in config.sizes.iter().enumerate() {
        if n == 0 || c == 0 {
            return Err(ExpError::Config(format!("bench size {n}x{c} is empty")));
        }
        let mut rng = stream_rng(config.seed, STREAM_BENCH + s as u64);
        let a = Matrix64::from_fn(n, c, |_, _| rng.sample(StandardNormal));
        trace_norm_subgradient(&a)?;
        let (subgradient_seconds, g) = median_seconds(config.repeats, || trace_norm_subgradient(&a));
        let g = g?;
        let (oracle_seconds, max_abs_diff) = if thin_svd_bytes::<f64>(n, c) > config.memory_guard_bytes {
            (None, None)
        } else {
            let (secs, polar) = median_seconds(config.oracle_repeats, || {
                let svd = thin_svd(&a);
                polar_from_svd(&svd.u, &svd.singular_values, &svd.v, 1e-12)
            });
            (Some(secs), Some(polar.max_abs_diff(&g)))
        };
        rows.push(BenchRow { n, c, subgradient_seconds, oracle_seconds, max_abs_diff });
    }
    Ok(rows)
}

/// `n, c, subgradient_s, oracle_s, max_abs_diff` with `-` for skipped
/// baselines.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,c,subgradient_s,oracle_s,max_abs_diff\n");
    let dash = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.6e}"));
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6e},{},{}\n",
            r.n,
            r.c,
            r.subgradient_seconds,
            dash(r.oracle_seconds),
            dash(r.max_abs_diff)
        ));
    }
    out
}
