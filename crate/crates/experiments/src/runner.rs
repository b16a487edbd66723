use std::time::Instant;

use mvml_core::data::stack_predictions;
use mvml_core::masking::{corrupt, permutation, stream_rng, CorruptionSpec};
use mvml_core::metrics::{rank_diagnostics_of_blocks, MetricsReport, RankDiagnostics};
use mvml_core::regularizer::objective;
use mvml_core::solver::{fit, predict, SolverConfig, SolverTrace, Variant};
use mvml_core::{Dataset64, Weights64};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, RepeatSeeds};
use crate::error::{ExpError, Result};

const STREAM_SPLIT: u64 = 7 << 32;

/// Sorted train and test indices: a seeded permutation cut at
/// `round(fraction · n)`, clamped so both sides are non-empty.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    assert!(n >= 2, "cannot split fewer than two samples");
    let cut = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let perm = permutation(n, &mut stream_rng(seed, STREAM_SPLIT));
    let mut train = perm[..cut].to_vec();
    let mut test = perm[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub iteration: usize,
    pub objective: f64,
    pub surrogate: f64,
    pub primal_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub converged: bool,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub series: Vec<ConvergencePoint>,
}

impl From<&SolverTrace> for TraceSummary {
    fn from(t: &SolverTrace) -> Self {
        TraceSummary {
            iterations: t.iterations(),
            converged: t.converged,
            initial_objective: t.initial_objective,
            final_objective: t.final_objective(),
            series: t
                .records
                .iter()
                .map(|r| ConvergencePoint {
                    iteration: r.iteration,
                    objective: r.objective,
                    surrogate: r.surrogate,
                    primal_residual: r.primal_residual,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub index: usize,
    pub seeds: RepeatSeeds,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: MetricsReport,
    pub trace: TraceSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; zero for a single repeat.
    pub std: f64,
    pub values: Vec<f64>,
}

impl MetricSummary {
    pub fn of(metric: &str, values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricSummary { metric: metric.into(), mean, std, values }
    }
}

/// Everything about a run except wall-clock times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub repeats: Vec<RepeatRecord>,
    pub summary: Vec<MetricSummary>,
}

impl RunRecord {
    /// Mean and standard deviation per metric from the repeat entries.
    pub fn summarize(repeats: &[RepeatRecord]) -> Vec<MetricSummary> {
        let names = repeats.first().map(|r| r.metrics.values().map(|(name, _)| name)).unwrap_or_default();
        names
            .iter()
            .enumerate()
            .map(|(m, name)| MetricSummary::of(name, repeats.iter().map(|r| r.metrics.values()[m].1).collect()))
            .collect()
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|s| s.metric == name)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepeatTimings {
    pub index: usize,
    pub fit_seconds: f64,
    pub iteration_seconds: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub timings: Vec<RepeatTimings>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let data = config.data.load()?;
    run_on(&data, config)
}

/// Runs `config` on already loaded data; `config.data` is only recorded.
pub fn run_on(data: &Dataset64, config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    if !data.aligned() {
        return Err(ExpError::Config("experiments need an aligned dataset".into()));
    }
    if data.n() < 2 {
        return Err(ExpError::Config("experiments need at least two samples".into()));
    }
    let mut repeats = Vec::with_capacity(config.repeats);
    let mut timings = Vec::with_capacity(config.repeats);
    for index in 0..config.repeats {
        let (record, time) = run_repeat(data, config, index).map_err(|e| match e {
            ExpError::Core(source) => ExpError::Repeat { index, source },
            other => other,
        })?;
        repeats.push(record);
        timings.push(time);
    }
    let summary = RunRecord::summarize(&repeats);
    Ok(RunOutput { record: RunRecord { config_hash: config.hash(), config: config.recorded(), repeats, summary }, timings })
}

fn run_repeat(data: &Dataset64, config: &ExperimentConfig, index: usize) -> Result<(RepeatRecord, RepeatTimings)> {
    let seeds = RepeatSeeds::derive(config, index);
    let (train_idx, test_idx) = split_indices(data.n(), config.train_fraction, seeds.split);
    let train = data.select_samples(&train_idx)?;
    let test = data.select_samples(&test_idx)?;
    let spec = CorruptionSpec { seed: seeds.corruption, ..config.corruption };
    let train = if spec.alpha == 0.0 && spec.beta == 0.0 && !spec.dealign { train } else { corrupt(&train, &spec)? };
    let solver = SolverConfig { init_seed: seeds.init, ..config.solver.clone() };

    let started = Instant::now();
    let (w, trace) = fit(&train, &solver)?;
    let fit_seconds = started.elapsed().as_secs_f64();
    let metrics = MetricsReport::evaluate(&predict(&w, &test)?, &test.sample_labels()?)?;
    let record = RepeatRecord {
        index,
        seeds,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        metrics,
        trace: TraceSummary::from(&trace),
    };
    let time = RepeatTimings { index, fit_seconds, iteration_seconds: trace.records.iter().map(|r| r.seconds).collect() };
    Ok((record, time))
}

/// One setting of a study and its run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyEntry {
    pub setting: String,
    pub record: RunRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub name: String,
    pub parameter: String,
    pub entries: Vec<StudyEntry>,
}

impl Study {
    pub fn entry(&self, setting: &str) -> Option<&RunRecord> {
        self.entries.iter().find(|e| e.setting == setting).map(|e| &e.record)
    }
}

#[derive(Clone, Debug)]
pub struct StudyOutput {
    pub study: Study,
    pub timings: Vec<(String, Vec<RepeatTimings>)>,
}

fn run_study(
    name: &str,
    parameter: &str,
    base: &ExperimentConfig,
    settings: Vec<(String, ExperimentConfig)>,
) -> Result<StudyOutput> {
    base.validate()?;
    let data = base.data.load()?;
    let mut entries = Vec::new();
    let mut timings = Vec::new();
    for (setting, config) in settings {
        let out = run_on(&data, &config)?;
        entries.push(StudyEntry { setting: setting.clone(), record: out.record });
        timings.push((setting, out.timings));
    }
    Ok(StudyOutput { study: Study { name: name.into(), parameter: parameter.into(), entries }, timings })
}

pub fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Full => "full",
        Variant::LossOnly => "loss_only",
        Variant::LossPlusLocal => "loss_plus_local",
    }
}

/// The three objective variants on identical splits, corruptions and
/// initializations.
pub fn ablate(base: &ExperimentConfig) -> Result<StudyOutput> {
    let settings = [Variant::LossOnly, Variant::LossPlusLocal, Variant::Full]
        .into_iter()
        .map(|v| {
            let mut c = base.clone();
            c.solver.variant = v;
            (variant_name(v).to_owned(), c)
        })
        .collect();
    run_study("ablate", "variant", base, settings)
}

pub const DEFAULT_LAMBDAS: [f64; 6] = [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_MUS: [f64; 3] = [1.0, 5.0, 10.0];

pub fn sweep_lambda(base: &ExperimentConfig, lambdas: &[f64]) -> Result<StudyOutput> {
    let settings = lambdas
        .iter()
        .map(|&l| {
            let mut c = base.clone();
            c.solver.lambda = l;
            (format!("{l}"), c)
        })
        .collect();
    run_study("sweep_lambda", "lambda", base, settings)
}

pub fn study_mu(base: &ExperimentConfig, mus: &[f64]) -> Result<StudyOutput> {
    let settings = mus
        .iter()
        .map(|&m| {
            let mut c = base.clone();
            c.solver.mu = m;
            (format!("{m}"), c)
        })
        .collect();
    run_study("study_mu", "mu", base, settings)
}

/// Incomplete-view ratio grid at the base config's label-removal ratio.
pub fn corruption_grid(base: &ExperimentConfig, alphas: &[f64]) -> Result<StudyOutput> {
    let settings = alphas
        .iter()
        .map(|&a| {
            let mut c = base.clone();
            c.corruption.alpha = a;
            (format!("{a}"), c)
        })
        .collect();
    run_study("corruption_grid", "alpha", base, settings)
}

/// Rank structure of a fitted model's predictions on its training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub c: usize,
    /// Labels with at least one observed positive; only these have a
    /// sub-label matrix.
    pub labels: Vec<usize>,
    pub diagnostics: RankDiagnostics,
    pub objective: f64,
}

/// Numeric ranks of the stacked predictions over all present rows and over
/// each label's positive rows.
pub fn rank_report(ds: &Dataset64, w: &Weights64, lambda: f64, tol: Option<f64>) -> Result<RankReport> {
    let entire = stack_predictions(ds, w, &ds.present_rows())?;
    let mut labels = Vec::new();
    let mut blocks = Vec::new();
    for (k, rows) in ds.sublabel_groups().into_iter().enumerate() {
        if rows.iter().any(|r| !r.is_empty()) {
            labels.push(k);
            blocks.push(stack_predictions(ds, w, &rows)?);
        }
    }
    let diagnostics = rank_diagnostics_of_blocks(&entire, &blocks, tol)?;
    let objective = objective(ds, w, lambda)?.total();
    Ok(RankReport { c: ds.c(), labels, diagnostics, objective })
}

/// Corrupts the whole dataset of `config` with the config seeds, fits it
/// and reports the rank structure alongside the fit trace.
pub fn rank_diagnostics_run(config: &ExperimentConfig) -> Result<(RankReport, SolverTrace)> {
    config.validate()?;
    let data = config.data.load()?;
    let train = corrupt(&data, &config.corruption)?;
    let (w, trace) = fit(&train, &config.solver)?;
    Ok((rank_report(&train, &w, config.solver.lambda, None)?, trace))
}
