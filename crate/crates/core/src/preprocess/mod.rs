//! Five-stage cleaning of a raw recording: baseline removal, template-based
//! beat quality scoring, z-score outlier rejection, per-span min-max
//! normalisation and 4 s segmentation.

mod beats;
mod detrend;
mod outliers;
mod pipeline;
mod quality;
mod segment;

pub use beats::{detect_beats, detect_beats_with, Beat, BeatStatus};
pub use detrend::{detrend, detrend_window, detrend_with_window};
pub use outliers::remove_outlier_beats;
pub use pipeline::{
    clean_record, preprocess_record, BeatWindow, CleanSpan, CleanedRecord, QcStats, Segment,
};
pub use quality::score_beat_quality;
pub use segment::{normalize_minmax, random_crop, segment, segment_len, SegmentMode, Window};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Baseline moving-average window (s).
    pub detrend_window_s: f64,
    /// Rolling window for the adaptive peak threshold (s).
    pub threshold_window_s: f64,
    /// Peak threshold = window mean + `threshold_k` · window sd.
    pub threshold_k: f64,
    pub min_hr_bpm: f64,
    pub max_hr_bpm: f64,
    /// Neighbouring beats averaged into each beat's template.
    pub template_beats: usize,
    /// Template correlation below this marks a beat low quality.
    pub quality_threshold: f64,
    /// Beats with |z| above this (amplitude or duration) are outliers.
    pub z_limit: f64,
    /// Records keeping less than this fraction of samples are unusable.
    pub min_usable_fraction: f64,
    pub segment_s: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            detrend_window_s: 2.0,
            threshold_window_s: 3.0,
            threshold_k: 0.5,
            min_hr_bpm: 30.0,
            max_hr_bpm: 220.0,
            template_beats: 10,
            quality_threshold: 0.8,
            z_limit: 2.0,
            min_usable_fraction: 0.3,
            segment_s: 4.0,
        }
    }
}
