//! File formats, experiment harness and command-line front end for the
//! two-stage negativity classifier in `negcascade-core`.

pub mod bundle;
pub mod config;
pub mod error;
pub mod features;
pub mod grid;
pub mod io;
pub mod plot;
pub mod regress;
pub mod run;
pub mod score;

pub use error::{Error, Result};
