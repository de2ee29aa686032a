//! File formats, reports and audit runners for `polyflex-core`, and the
//! `polyflex` command line built on them.

pub mod format;
pub mod report;
pub mod run;

pub use polyflex_core as core;
