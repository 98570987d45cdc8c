//! Experiment runner for the `driftlab` library: typed TOML configs, an
//! experiment catalog, seeded replicas and JSON/CSV result records.

pub mod catalog;
pub mod config;
pub mod experiments;
pub mod record;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DRIFTLAB_OUT_DIR";

/// JSON schema of [`record::ResultRecord`].
pub const RESULT_SCHEMA: &str = include_str!("../../../docs/result-record.schema.json");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for invalid input, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    fn from_core(e: driftlab::Error, replica: usize) -> Self {
        let msg = format!("replica {replica}: {e}");
        match e {
            driftlab::Error::Io(_) | driftlab::Error::Csv(_) => CliError::Io(std::io::Error::other(msg)),
            e if e.is_numerical() => CliError::Numerical(msg),
            _ => CliError::Validation(msg),
        }
    }
}
