//! Report files. `report.json` is the source of truth and holds no wall-clock
//! times, so identical configs give byte-identical reports; times go to
//! `timings.json`. The CSV format adds flat views of the same numbers.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset_io::{to_json, write_atomic};
use crate::error::{ExpError, Result};
use crate::runner::{MetricSummary, RepeatTimings, RunRecord, Study, TraceSummary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(ExpError::Config(format!("unknown format {s:?}; expected json or csv"))),
        }
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// `metric, mean, std, r0, r1, …`: one row per metric.
pub fn summary_csv(summary: &[MetricSummary]) -> String {
    let repeats = summary.first().map_or(0, |s| s.values.len());
    let mut header: Vec<String> = ["metric", "mean", "std"].map(String::from).to_vec();
    header.extend((0..repeats).map(|r| format!("r{r}")));
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            let mut row = vec![s.metric.clone(), s.mean.to_string(), s.std.to_string()];
            row.extend(s.values.iter().map(f64::to_string));
            row
        })
        .collect();
    csv_text(&header, &rows)
}

/// One row per repeat with the four metrics.
pub fn metrics_csv(record: &RunRecord) -> String {
    let mut header = vec!["repeat".to_owned()];
    if let Some(r) = record.repeats.first() {
        header.extend(r.metrics.values().iter().map(|(name, _)| name.to_string()));
    }
    let rows: Vec<Vec<String>> = record
        .repeats
        .iter()
        .map(|r| {
            let mut row = vec![r.index.to_string()];
            row.extend(r.metrics.values().iter().map(|(_, v)| v.to_string()));
            row
        })
        .collect();
    csv_text(&header, &rows)
}

/// `iteration, f, J, residual`, where `J` is the convex surrogate.
pub fn convergence_csv(trace: &TraceSummary) -> String {
    let header = ["iteration", "f", "J", "residual"].map(String::from);
    let rows: Vec<Vec<String>> = trace
        .series
        .iter()
        .map(|p| {
            vec![p.iteration.to_string(), p.objective.to_string(), p.surrogate.to_string(), p.primal_residual.to_string()]
        })
        .collect();
    csv_text(&header, &rows)
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(())
}

pub fn export_report(record: &RunRecord, timings: &[RepeatTimings], dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    write(dir, "report.json", &to_json(record), &mut written)?;
    write(dir, "timings.json", &to_json(&timings), &mut written)?;
    if format == Format::Csv {
        write(dir, "summary.csv", &summary_csv(&record.summary), &mut written)?;
        write(dir, "metrics.csv", &metrics_csv(record), &mut written)?;
        for r in &record.repeats {
            write(dir, &format!("convergence_r{}.csv", r.index), &convergence_csv(&r.trace), &mut written)?;
        }
    }
    Ok(written)
}

/// `setting, metric, mean, std, r0, r1, …`.
pub fn study_csv(study: &Study) -> String {
    let repeats = study.entries.iter().map(|e| e.record.repeats.len()).max().unwrap_or(0);
    let mut header: Vec<String> = [study.parameter.as_str(), "metric", "mean", "std"].map(String::from).to_vec();
    header.extend((0..repeats).map(|r| format!("r{r}")));
    let mut rows = Vec::new();
    for e in &study.entries {
        for s in &e.record.summary {
            let mut row = vec![e.setting.clone(), s.metric.clone(), s.mean.to_string(), s.std.to_string()];
            row.extend(s.values.iter().map(f64::to_string));
            row.resize(header.len(), String::new());
            rows.push(row);
        }
    }
    csv_text(&header, &rows)
}

pub fn export_study(
    study: &Study,
    timings: &[(String, Vec<RepeatTimings>)],
    dir: &Path,
    format: Format,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    write(dir, "report.json", &to_json(study), &mut written)?;
    write(dir, "timings.json", &to_json(&timings), &mut written)?;
    if format == Format::Csv {
        write(dir, "study.csv", &study_csv(study), &mut written)?;
    }
    Ok(written)
}
