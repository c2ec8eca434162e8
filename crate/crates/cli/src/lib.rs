//! Experiment runner library: configuration, fixtures, experiment
//! orchestration, and report emission. The `dirlim` binary is a thin
//! wrapper over [`experiments::run`].

pub mod config;
pub mod experiments;
pub mod fixtures;
pub mod report;
