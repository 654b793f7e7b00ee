//! File formats, experiment pipeline, plotting and the `bloodmatch` CLI on
//! top of [`bloodmatch_core`].

pub use bloodmatch_core as core;

pub mod config;
pub mod error;
pub mod format;
pub mod pipeline;
pub mod plot;
pub mod sparse;
pub mod table;

pub use error::{Error, Result};
