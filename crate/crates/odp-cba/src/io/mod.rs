//! Fixtures, configuration, the run pipeline and report output.

pub mod config;
pub mod fixtures;
pub mod pipeline;
pub mod report;
