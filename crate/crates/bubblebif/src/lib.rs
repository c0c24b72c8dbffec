//! File formats, run configuration, the verification suite and the
//! command-line frontend for `bubblebif-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod formats;
pub mod verify;

pub use bubblebif_core as core;
