//! Experiment runner around `jkolab-core`: run configs, verification suites
//! and the on-disk report formats.

pub mod config;
pub mod datum;
pub mod output;
pub mod runner;
pub mod suites;
