pub mod analytics;
pub mod artifact;
pub mod config;
pub mod cwe_catalog;
pub mod error;
pub mod git;
pub mod ingest;
pub mod pipeline;
pub mod secfilter;
pub mod semvec;
pub mod synth;
pub mod szz;
pub mod weakness;
pub mod wfc;

pub use error::{Error, Result};
