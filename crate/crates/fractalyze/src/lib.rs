//! IO, formats, the acceptance suite and the `fractalyze` command line.

pub mod cli;
pub mod error;
pub mod jetio;
pub mod num;
pub mod specio;
pub mod tables;
pub mod tolenv;
pub mod verify;

pub use error::{AppError, AppResult};
