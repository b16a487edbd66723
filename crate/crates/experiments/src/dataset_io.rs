//! The on-disk dataset directory.
//!
//! A directory holds `manifest.json` plus headerless CSV files per view:
//!
//! ```json
//! {"n": 8, "c": 3, "V": 2, "aligned": true,
//!  "views": [{"name": "color", "dim": 2, "features_file": "color_x.csv",
//!             "labels_file": "color_y.csv", "missing_file": "color_m.txt"}]}
//! ```
//!
//! Features are decimal reals, labels are integers in `{-1, 0, 1}` and the
//! optional missing file holds one `0`/`1` flag per line. `aligned` is
//! optional and defaults to true.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mvml_core::{Dataset64, Matrix64, ViewData};
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub n: usize,
    pub c: usize,
    #[serde(rename = "V")]
    pub num_views: usize,
    #[serde(default = "yes")]
    pub aligned: bool,
    pub views: Vec<ViewEntry>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub name: String,
    pub dim: usize,
    pub features_file: String,
    pub labels_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_file: Option<String>,
}

fn read_text(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ExpError::MissingFile(path.to_path_buf())),
        Err(e) => Err(ExpError::io(path, e)),
    }
}

/// Rows of a headerless CSV as raw fields, checked for `rows x cols`.
fn read_grid(path: &Path, place: &str, rows: usize, cols: usize) -> Result<Vec<Vec<String>>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut out = Vec::with_capacity(rows);
    for (j, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ExpError::schema(place, format!("row {j}: {e}")))?;
        if record.len() != cols {
            return Err(ExpError::schema(place, format!("row {j} has {} columns, manifest says {cols}", record.len())));
        }
        out.push(record.iter().map(|f| f.trim().to_owned()).collect());
    }
    if out.len() != rows {
        return Err(ExpError::schema(place, format!("{} rows, manifest says {rows}", out.len())));
    }
    Ok(out)
}

fn parse_features(grid: &[Vec<String>], place: &str) -> Result<Matrix64> {
    let cols = grid.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(grid.len() * cols);
    for (j, row) in grid.iter().enumerate() {
        for (k, field) in row.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| ExpError::schema(place, format!("row {j}, column {k}: {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(ExpError::NonFiniteEntry { place: place.into(), row: j, col: k });
            }
            data.push(v);
        }
    }
    Ok(Matrix64::from_vec(grid.len(), cols, data)?)
}

fn parse_labels(grid: &[Vec<String>], place: &str) -> Result<Matrix64> {
    let cols = grid.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(grid.len() * cols);
    for (j, row) in grid.iter().enumerate() {
        for (k, field) in row.iter().enumerate() {
            let v: i64 = field.parse().map_err(|_| ExpError::LabelDomainViolation {
                place: place.into(),
                row: j,
                col: k,
                value: field.clone(),
            })?;
            if !(-1..=1).contains(&v) {
                return Err(ExpError::LabelDomainViolation { place: place.into(), row: j, col: k, value: field.clone() });
            }
            data.push(v as f64);
        }
    }
    Ok(Matrix64::from_vec(grid.len(), cols, data)?)
}

fn parse_missing(path: &Path, place: &str, n: usize) -> Result<Vec<bool>> {
    let text = read_text(path)?;
    let flags = text
        .lines()
        .enumerate()
        .map(|(j, line)| match line.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(ExpError::schema(place, format!("line {j}: expected 0 or 1, got {other:?}"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    if flags.len() != n {
        return Err(ExpError::schema(place, format!("{} flags, manifest says n = {n}", flags.len())));
    }
    Ok(flags)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let manifest: Manifest =
        serde_json::from_str(&read_text(&path)?).map_err(|e| ExpError::schema("manifest.json", e.to_string()))?;
    if manifest.num_views != manifest.views.len() {
        return Err(ExpError::schema(
            "manifest.json",
            format!("V = {} but {} views are listed", manifest.num_views, manifest.views.len()),
        ));
    }
    Ok(manifest)
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset64> {
    let manifest = read_manifest(dir)?;
    let mut views = Vec::with_capacity(manifest.views.len());
    for entry in &manifest.views {
        let place = |file: &str| format!("view {:?} ({file})", entry.name);
        let fplace = place(&entry.features_file);
        let features =
            parse_features(&read_grid(&dir.join(&entry.features_file), &fplace, manifest.n, entry.dim)?, &fplace)?;
        let lplace = place(&entry.labels_file);
        let labels = parse_labels(&read_grid(&dir.join(&entry.labels_file), &lplace, manifest.n, manifest.c)?, &lplace)?;
        let missing = match &entry.missing_file {
            Some(f) => parse_missing(&dir.join(f), &place(f), manifest.n)?,
            None => vec![false; manifest.n],
        };
        let view = ViewData::new(features, labels, missing)
            .map_err(|e| ExpError::schema(format!("view {:?}", entry.name), e.to_string()))?;
        views.push(view);
    }
    Ok(Dataset64::new(views, manifest.aligned)?)
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(|e| ExpError::io(&tmp, e))?;
    file.write_all(bytes).and_then(|_| file.sync_all()).map_err(|e| ExpError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| ExpError::io(path, e))
}

/// Headerless CSV of a matrix. `{}` on `f64` prints the shortest string
/// that parses back to the same value.
pub fn matrix_csv(m: &Matrix64, integer: bool) -> String {
    let mut out = String::new();
    for j in 0..m.rows() {
        let row: Vec<String> =
            m.row(j).iter().map(|&v| if integer { format!("{}", v as i64) } else { format!("{v}") }).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes `ds` as a dataset directory with views named `view0, view1, …`.
/// Returns the written paths.
pub fn write_dataset(ds: &Dataset64, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = Vec::new();
    let mut written = Vec::new();
    for (i, view) in ds.views().iter().enumerate() {
        let name = format!("view{i}");
        let entry = ViewEntry {
            features_file: format!("{name}_features.csv"),
            labels_file: format!("{name}_labels.csv"),
            missing_file: view.missing().iter().any(|&m| m).then(|| format!("{name}_missing.txt")),
            name,
            dim: view.dim(),
        };
        let mut files = vec![
            (entry.features_file.clone(), matrix_csv(view.features(), false)),
            (entry.labels_file.clone(), matrix_csv(view.labels(), true)),
        ];
        if let Some(f) = &entry.missing_file {
            let flags: String = view.missing().iter().map(|&m| if m { "1\n" } else { "0\n" }).collect();
            files.push((f.clone(), flags));
        }
        for (file, text) in files {
            let path = dir.join(file);
            write_atomic(&path, text.as_bytes())?;
            written.push(path);
        }
        entries.push(entry);
    }
    let manifest =
        Manifest { n: ds.n(), c: ds.c(), num_views: ds.num_views(), aligned: ds.aligned(), views: entries };
    let path = dir.join("manifest.json");
    write_atomic(&path, to_json(&manifest).as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Reads a headerless CSV of reals, such as a score matrix.
pub fn load_matrix(path: &Path) -> Result<Matrix64> {
    let text = read_text(path)?;
    let place = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let grid = reader
        .records()
        .enumerate()
        .map(|(j, r)| {
            r.map(|r| r.iter().map(|f| f.trim().to_owned()).collect::<Vec<_>>())
                .map_err(|e| ExpError::schema(&place, format!("row {j}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    parse_features(&grid, &place)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
