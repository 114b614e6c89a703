//! Experiment orchestration: configuration, the end-to-end driver, Monte
//! Carlo verifiers, and plain-text report writers.

pub mod config;
pub mod experiment;
pub mod montecarlo;
pub mod report;
