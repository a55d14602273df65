//! Files, weights container, run configuration and the command-line front
//! end for `ppg-screen-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod output;
pub mod weights;

pub use error::{Error, Result};
