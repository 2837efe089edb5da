//! `spanshap` command-line tool and `/v1` JSON service.

pub mod cli;
pub mod error;
pub mod render;
pub mod service;
pub mod settings;

pub use cli::main_with_args;
pub use error::{ErrorCode, ServiceError};
