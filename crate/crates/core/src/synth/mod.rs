//! Seeded synthetic cohorts: two-pulse beats whose reflection knobs follow
//! latent blood pressure, with drift, noise and motion bursts.

mod beat;
mod generate;

pub use beat::{beat_value, pulse, synth_beat, Morphology, PULSE_SIGMA, RUNOFF_AMPLITUDE, RUNOFF_TAU};
pub use generate::{generate_dataset, validate_spec, Effect, NoiseProfile, SubjectTruth, SynthOutput, SynthSpec};
