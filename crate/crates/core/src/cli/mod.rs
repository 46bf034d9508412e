//! Experiment configuration and runners.

pub mod commands;
pub mod config;
pub mod plot;
pub mod presets;
pub mod run;
