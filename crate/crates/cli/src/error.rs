use std::path::Path;

use thiserror::Error;
use vmt_rebound::design::DesignError;
use vmt_rebound::estimator::EstimatorError;
use vmt_rebound::forecast::ForecastError;
use vmt_rebound::ingest::IngestError;
use vmt_rebound::model::ModelError;
use vmt_rebound::synthetic::SyntheticError;
use vmt_rebound::table::TableError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::Domain(_)
            | ForecastError::InvalidGrid(_)
            | ForecastError::MissingElasticity(_)
            | ForecastError::MissingShares(_) => CliError::Config(e.to_string()),
            ForecastError::NoFrontier { .. }
            | ForecastError::FrontierUnreachable { .. }
            | ForecastError::NonMonotone { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SyntheticError> for CliError {
    fn from(e: SyntheticError) -> Self {
        match e {
            SyntheticError::InvalidConfig(_) => CliError::Config(e.to_string()),
            SyntheticError::Estimation { .. } => CliError::Numeric(e.to_string()),
            SyntheticError::Model(_) | SyntheticError::Design(_) => CliError::Data(e.to_string()),
        }
    }
}
