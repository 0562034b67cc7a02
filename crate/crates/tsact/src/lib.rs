//! Filesystem half of the workspace: UCR TSV loading, the benchmark sweep
//! runner with its JSON-lines results store, comparison exports and the
//! `tsact` command line.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod export;
pub mod ucr;

pub use error::{Error, Result};
