use std::path::{Path, PathBuf};

use mvml_core::masking::{generate_synthetic, CorruptionSpec, SyntheticSpec};
use mvml_core::solver::SolverConfig;
use mvml_core::Dataset64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset_io::load_dataset;
use crate::error::{ExpError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    /// A dataset directory.
    Path(PathBuf),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset64> {
        match self {
            DataSource::Synthetic(spec) => Ok(generate_synthetic(spec)?),
            DataSource::Path(dir) => load_dataset(dir),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub corruption: CorruptionSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Where the CLI writes reports. Not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_train_fraction() -> f64 {
    0.7
}

fn default_repeats() -> usize {
    10
}

impl ExperimentConfig {
    /// Desk-scale synthetic with half the views missing, half the tags
    /// removed and shuffled views.
    pub fn desk(seed: u64) -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec::desk(seed)),
            corruption: CorruptionSpec::new(0.5, 0.5, true, seed),
            solver: SolverConfig { init_seed: seed, ..SolverConfig::default() },
            train_fraction: default_train_fraction(),
            split_seed: seed,
            repeats: default_repeats(),
            output_dir: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ExpError::MissingFile(path.to_path_buf()),
            _ => ExpError::io(path, e),
        })?;
        serde_json::from_str(&text).map_err(|e| ExpError::Config(format!("{}: {e}", path.display())))
    }

    /// Replaces every seed: data generation, split, corruption and solver
    /// initialization.
    pub fn reseed(&mut self, seed: u64) {
        if let DataSource::Synthetic(spec) = &mut self.data {
            spec.seed = seed;
        }
        self.corruption.seed = seed;
        self.solver.init_seed = seed;
        self.split_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ExpError::Config(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        if self.repeats == 0 {
            return Err(ExpError::Config("repeats must be at least 1".into()));
        }
        self.corruption.validate()?;
        self.solver.validate()?;
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        Ok(())
    }

    /// The config as recorded in reports: without the output directory.
    pub fn recorded(&self) -> Self {
        ExperimentConfig { output_dir: None, ..self.clone() }
    }

    /// Hex SHA-256 of the compact JSON of [`recorded`](Self::recorded).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.recorded()).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeds of one repeat, derived from the config seeds and the repeat index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatSeeds {
    pub split: u64,
    pub corruption: u64,
    pub init: u64,
}

impl RepeatSeeds {
    pub fn derive(config: &ExperimentConfig, repeat: usize) -> Self {
        let mix = |base: u64, role: u64| splitmix64(splitmix64(base ^ role) ^ repeat as u64);
        RepeatSeeds {
            split: mix(config.split_seed, 0x5311),
            corruption: mix(config.corruption.seed, 0xc022),
            init: mix(config.solver.init_seed, 0x1417),
        }
    }
}
