//! File formats, reports and the `hwave` command line on top of
//! [`hwave_core`].

pub mod cli;
pub mod formats;
pub mod report;

pub use hwave_core;
