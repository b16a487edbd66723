use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvml_core::masking::{corrupt, generate_synthetic, CorruptionSpec, SyntheticSpec};
use mvml_core::metrics::MetricsReport;
use mvml_core::solver::{fit, predict, SolverConfig};
use mvml_core::{Dataset64, Weights64};
use mvml_experiments::bench::{bench_subgradient, bench_table, BenchConfig};
use mvml_experiments::dataset_io::{load_dataset, load_matrix, matrix_csv, to_json, write_atomic, write_dataset};
use mvml_experiments::report::{convergence_csv, export_report, export_study, study_csv, summary_csv, Format};
use mvml_experiments::runner::{
    ablate, corruption_grid, rank_diagnostics_run, run_experiment, study_mu, sweep_lambda, MetricSummary, StudyOutput,
    TraceSummary, DEFAULT_LAMBDAS, DEFAULT_MUS,
};
use mvml_experiments::{ExpError, ExperimentConfig, Result};
use serde::de::DeserializeOwned;

/// Multi-view multi-label learning with incomplete, non-aligned views and
/// missing labels.
#[derive(Parser)]
#[command(name = "mvml", version)]
struct Cli {
    /// JSON configuration; its type depends on the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "mvml-out")]
    out: PathBuf,
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory (config: synthetic spec).
    Synth,
    /// Corrupt a complete, aligned dataset directory.
    Corrupt {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long)]
        dealign: bool,
    },
    /// Fit a model to a dataset directory (config: solver settings).
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Score an aligned dataset with a fitted model.
    Predict {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Score predictions against a dataset's labels.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scores: PathBuf,
    },
    /// Repeated train/test experiment (config: experiment).
    Run,
    /// Loss only, loss plus local term, and the full objective.
    Ablate,
    /// Grid over the regularization weight.
    SweepLambda {
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Grid over the ADMM penalty.
    StudyMu {
        #[arg(long, value_delimiter = ',')]
        mus: Option<Vec<f64>>,
    },
    /// Grid over the incomplete-view ratio.
    Grid {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5])]
        alphas: Vec<f64>,
    },
    /// Time the trace-norm subgradient against an SVD baseline.
    BenchSubgrad(BenchArgs),
    /// Fit the corrupted dataset and report prediction ranks.
    RankDiag,
}

#[derive(Args)]
struct BenchArgs {
    /// Sizes as `NxC`, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<String>>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long)]
    oracle_repeats: Option<usize>,
    /// Memory guard for the baseline, in MiB.
    #[arg(long, default_value_t = 2048)]
    guard_mib: u64,
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ExpError::MissingFile(path.to_path_buf()),
        _ => ExpError::Io { path: path.to_path_buf(), source: e },
    })?;
    serde_json::from_str(&text).map_err(|e| ExpError::Config(format!("{}: {e}", path.display())))
}

fn config_or<T: DeserializeOwned>(cli: &Cli, default: impl FnOnce() -> T) -> Result<T> {
    cli.config.as_deref().map_or_else(|| Ok(default()), read_config)
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = config_or(cli, || ExperimentConfig::desk(0))?;
    if let Some(seed) = cli.seed {
        config.reseed(seed);
    }
    config.validate()?;
    Ok(config)
}

fn save(path: PathBuf, text: &str) -> Result<PathBuf> {
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn print_summary(summary: &[MetricSummary]) {
    for s in summary {
        println!("{:<14} {:.4} ({:.4})", s.metric, s.mean, s.std);
    }
}

fn finish_study(out: StudyOutput, cli: &Cli, format: Format) -> Result<Vec<PathBuf>> {
    match format {
        Format::Csv => print!("{}", study_csv(&out.study)),
        Format::Json => {
            for e in &out.study.entries {
                println!("{} = {}", out.study.parameter, e.setting);
                print_summary(&e.record.summary);
            }
        }
    }
    export_study(&out.study, &out.timings, &cli.out, format)
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || ExpError::Config(format!("size {s:?} is not of the form NxC"));
    let (n, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((n.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let format: Format = cli.format.parse()?;
    match &cli.command {
        Command::Synth => {
            let mut spec: SyntheticSpec = config_or(cli, || SyntheticSpec::desk(0))?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let ds: Dataset64 = generate_synthetic(&spec)?;
            println!("n={} c={} dims={:?}", ds.n(), ds.c(), ds.dims());
            write_dataset(&ds, &cli.out)
        }
        Command::Corrupt { data, alpha, beta, dealign } => {
            let ds = load_dataset(data)?;
            let spec = CorruptionSpec::new(*alpha, *beta, *dealign, cli.seed.unwrap_or(0));
            let out = corrupt(&ds, &spec)?;
            for (i, v) in out.views().iter().enumerate() {
                println!("view{i}: {} missing, {} observed labels", v.missing().iter().filter(|&&m| m).count(), v.indicator().observed_count());
            }
            write_dataset(&out, &cli.out)
        }
        Command::Fit { data } => {
            let ds = load_dataset(data)?;
            let mut solver: SolverConfig = config_or(cli, SolverConfig::default)?;
            if let Some(seed) = cli.seed {
                solver.init_seed = seed;
            }
            let (w, trace) = fit(&ds, &solver)?;
            let summary = TraceSummary::from(&trace);
            println!(
                "{} iterations, converged: {}, objective {:.6e}",
                summary.iterations, summary.converged, summary.final_objective
            );
            let mut written = vec![save(cli.out.join("model.json"), &to_json(&w))?, save(cli.out.join("fit.json"), &to_json(&summary))?];
            if format == Format::Csv {
                written.push(save(cli.out.join("convergence.csv"), &convergence_csv(&summary))?);
            }
            Ok(written)
        }
        Command::Predict { data, model } => {
            let ds = load_dataset(data)?;
            let w: Weights64 = read_config(model)?;
            let scores = predict(&w, &ds)?;
            Ok(vec![save(cli.out.join("scores.csv"), &matrix_csv(&scores, false))?])
        }
        Command::Evaluate { data, scores } => {
            let truth = load_dataset(data)?.sample_labels()?;
            let report = MetricsReport::evaluate(&load_matrix(scores)?, &truth)?;
            for (name, v) in report.values() {
                println!("{name:<14} {v:.6}");
            }
            let mut written = vec![save(cli.out.join("metrics.json"), &to_json(&report))?];
            if format == Format::Csv {
                let summary: Vec<MetricSummary> = report.values().iter().map(|(n, v)| MetricSummary::of(n, vec![*v])).collect();
                written.push(save(cli.out.join("metrics.csv"), &summary_csv(&summary))?);
            }
            Ok(written)
        }
        Command::Run => {
            let out = run_experiment(&experiment_config(cli)?)?;
            match format {
                Format::Csv => print!("{}", summary_csv(&out.record.summary)),
                Format::Json => print_summary(&out.record.summary),
            }
            export_report(&out.record, &out.timings, &cli.out, format)
        }
        Command::Ablate => finish_study(ablate(&experiment_config(cli)?)?, cli, format),
        Command::SweepLambda { lambdas } => {
            let lambdas = lambdas.clone().unwrap_or_else(|| DEFAULT_LAMBDAS.to_vec());
            finish_study(sweep_lambda(&experiment_config(cli)?, &lambdas)?, cli, format)
        }
        Command::StudyMu { mus } => {
            let mus = mus.clone().unwrap_or_else(|| DEFAULT_MUS.to_vec());
            finish_study(study_mu(&experiment_config(cli)?, &mus)?, cli, format)
        }
        Command::Grid { alphas } => finish_study(corruption_grid(&experiment_config(cli)?, alphas)?, cli, format),
        Command::BenchSubgrad(args) => {
            let mut config: BenchConfig = config_or(cli, BenchConfig::default)?;
            if let Some(sizes) = &args.sizes {
                config.sizes = sizes.iter().map(|s| parse_size(s)).collect::<Result<_>>()?;
            }
            config.repeats = args.repeats;
            config.oracle_repeats = args.oracle_repeats.unwrap_or(args.repeats);
            config.memory_guard_bytes = u128::from(args.guard_mib) << 20;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let rows = bench_subgradient(&config)?;
            let table = bench_table(&rows);
            print!("{table}");
            let mut written = vec![save(cli.out.join("bench.json"), &to_json(&rows))?];
            if format == Format::Csv {
                written.push(save(cli.out.join("bench.csv"), &table)?);
            }
            Ok(written)
        }
        Command::RankDiag => {
            let config = experiment_config(cli)?;
            let (report, trace) = rank_diagnostics_run(&config)?;
            let d = &report.diagnostics;
            println!("entire rank {} of c = {}", d.entire_rank, report.c);
            println!("mean sub-label rank {:.2} over {} labels", d.mean_sub_rank(), report.labels.len());
            println!("{} iterations, converged: {}", trace.iterations(), trace.converged);
            Ok(vec![save(cli.out.join("rank.json"), &to_json(&report))?])
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
