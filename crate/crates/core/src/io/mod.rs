//! Configuration files and result writers.

mod config;
mod output;

pub use config::*;
pub use output::*;
