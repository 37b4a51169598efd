//! Files, pipeline and command-line front end for `layerwalk-core`.

pub mod error;
pub mod formats;
pub mod io;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
pub use layerwalk_core as core;
