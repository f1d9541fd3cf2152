//! Command-line front end: configuration resolution, dataset presets,
//! training/eval orchestration, checkpoint persistence, and generator sample
//! inspection.

pub mod cfg;
pub mod checkpoint;
pub mod commands;
pub mod presets;
