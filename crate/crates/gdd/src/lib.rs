//! File formats, pipeline and command-line front end for [`gdd_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod matfile;
pub mod meshio;
pub mod pipeline;
pub mod stages;

pub use error::{GddError, Result};
