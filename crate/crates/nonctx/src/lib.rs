//! File formats, reports and the command-line front end for `nonctx-core`.

pub mod cli;
pub mod io;
pub mod report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] nonctx_core::error::Error),
}
