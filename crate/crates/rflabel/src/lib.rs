//! File formats, command-line front-end and parallel runner for
//! [`rflabel_core`].

pub mod annotations;
pub mod cli;
pub mod coco;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod plot;
pub mod run;
pub mod tables;

pub use error::{CliError, Result};
