#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod cascade;
pub mod classifiers;
pub mod clustering;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod nbreg;
pub mod reduce;
pub mod resample;
mod rng;
pub mod splitcraft;
pub mod textprep;
pub mod uncertainty;

pub use error::{Error, Result};
