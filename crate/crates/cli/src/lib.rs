//! Command-line front end for `dwmgipt-core`: image and CSV files, run
//! configuration and the `detect`, `eval` and `synth` commands.

pub mod config;
pub mod csvio;
pub mod detect;
pub mod eval;
pub mod io;
pub mod synth;

pub use config::RunConfig;
