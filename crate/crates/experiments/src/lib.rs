//! Experiment harness for the multi-view multi-label learner: the dataset
//! directory format, a seeded train/test runner with repeat statistics,
//! parameter studies, report export and the subgradient benchmark.

pub mod bench;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod report;
pub mod runner;

pub use config::{DataSource, ExperimentConfig};
pub use dataset_io::load_dataset;
pub use error::{ExpError, Result};
pub use report::{export_report, Format};
pub use runner::{run_experiment, RunRecord};
