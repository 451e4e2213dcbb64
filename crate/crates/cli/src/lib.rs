//! Command-line front end: configuration, subcommand dispatch, CSV output and figure presets.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub use commands::{dispatch, Command, FigureId};
pub use config::{parse_config, ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] nmqsd::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status for this failure category.
    pub fn exit_code(&self) -> i32 {
        use nmqsd::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Run(E::InvalidParams { .. } | E::ZeroState | E::WrongDimension(_) | E::GridTooLarge { .. }) => 3,
            CliError::Run(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}
