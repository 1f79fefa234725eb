//! Experiment configuration, Monte Carlo runs, curriculum enumeration,
//! self-checks and figure data.

pub mod config;
pub mod enumerate;
pub mod experiment;
pub mod plot;
pub mod runner;
pub mod verify;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::orchestrator::RunError;
use crate::selectors::SelectError;

pub use config::{Domain, ExperimentConfig, SelectorKind};
pub use enumerate::{enumerate_curricula, permutations, write_enumeration, Enumeration};
pub use experiment::{build_experiment, Experiment};
pub use plot::emit_plot_data;
pub use runner::{monte_carlo, write_outputs, MonteCarloReport, RunRecord, RunSummary};
pub use verify::{verify_active, VerifyOptions, VerifyReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot access {}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{tasks} source tasks exceed the enumeration cap of {cap}")]
    TooManyTasks { tasks: usize, cap: usize },
}

impl From<SelectError> for HarnessError {
    fn from(e: SelectError) -> Self {
        HarnessError::Run(RunError::Select(e))
    }
}

/// CSV writer with the project dialect: comma, header row, LF endings.
pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}
