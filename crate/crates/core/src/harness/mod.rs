//! Experiment loop, metrics and CSV output.

mod config;
mod csv_io;
mod metrics;
mod report;
mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentSection, MappingCheck, MappingSource, Method};
pub use csv_io::{csv_header, emit_csv, read_run_csv, run_file_name, write_run_csv};
pub use metrics::{curricula_variance, curriculum_length, rank_sum_p_value, VarianceTable};
pub use report::{median, MethodSummary, Report};
pub use run::{resolve_mapping, run_experiment, sweep, IterationRecord, RunLog};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Rm(#[from] crate::rm::RmError),
    #[error(transparent)]
    Cmdp(#[from] crate::cmdp::CmdpError),
    #[error(transparent)]
    Mapping(#[from] crate::mapping::MappingError),
    #[error(transparent)]
    Curriculum(#[from] crate::curriculum::CurriculumError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
