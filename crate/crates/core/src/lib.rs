//! Wrist-PPG hypertension risk screening.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece
//! of the pipeline: signal cleaning and segmentation ([`preprocess`]),
//! fiducial-point morphology features with a logistic baseline
//! ([`features`]), a compact 1D residual network trained from scratch
//! ([`model`]), the subject-level cross-validation harness ([`eval`]) and a
//! seeded longitudinal PPG generator ([`synth`]). File formats, the CLI and
//! thread-level parallelism live in the `ppg-screen` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod math;
pub mod model;
pub mod preprocess;
pub mod seed;
pub mod synth;

pub use data::{label_subject, Dataset, PpgRecord, RecordKind, Sex, Subject};
pub use error::{Error, Result};
