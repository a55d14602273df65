use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::beats::{detect_beats_with, Beat, BeatStatus};
use super::detrend::{detrend_window, detrend_with_window};
use super::outliers::remove_outlier_beats;
use super::quality::score_beat_quality;
use super::segment::{normalize_minmax, random_crop, segment_len, windows, SegmentMode};
use super::PreprocessConfig;
use crate::data::{PpgRecord, RecordKind};
use crate::error::Result;
use crate::math;
use crate::seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QcStats {
    pub beats_total: usize,
    pub beats_low_quality: usize,
    pub beats_outlier: usize,
    /// Fraction of the record's samples that survive cleaning.
    pub usable_fraction: f64,
}

/// Kept beat inside a [`CleanSpan`], indices relative to the span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeatWindow {
    pub start: usize,
    pub peak: usize,
    pub end: usize,
}

/// Contiguous run of clean samples, min-max normalised on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSpan {
    /// First sample's index in the raw record.
    pub offset: usize,
    pub samples: Vec<f64>,
    pub beats: Vec<BeatWindow>,
}

impl AsRef<[f64]> for CleanSpan {
    fn as_ref(&self) -> &[f64] {
        &self.samples
    }
}

/// Output of the cleaning stages, before segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanedRecord {
    pub subject_id: String,
    pub start_time: i64,
    pub kind: RecordKind,
    pub sample_rate: f64,
    pub segment_len: usize,
    /// Every detected beat with its quality, z-scores and status.
    pub beats: Vec<Beat>,
    pub spans: Vec<CleanSpan>,
    pub qc: QcStats,
    pub usable: bool,
}

impl CleanedRecord {
    pub fn windows(&self, mode: SegmentMode, rng: &mut seed::Rng) -> Vec<Segment> {
        let mk = |offset: usize, samples: &[f64]| Segment {
            subject_id: self.subject_id.clone(),
            start_time: self.start_time,
            offset,
            samples: samples.to_vec(),
        };
        match mode {
            SegmentMode::TestTiled => self
                .spans
                .iter()
                .flat_map(|span| {
                    windows(&span.samples, self.segment_len, mode, rng)
                        .into_iter()
                        .map(move |w| (span.offset + w.offset, w.samples))
                })
                .map(|(off, s)| mk(off, &s))
                .collect(),
            SegmentMode::TrainRandomCrop => random_crop(&self.spans, self.segment_len, rng)
                .map(|(i, start)| {
                    let span = &self.spans[i];
                    alloc::vec![mk(span.offset + start, &span.samples[start..start + self.segment_len])]
                })
                .unwrap_or_default(),
        }
    }

    /// Number of tiled segments the record would yield.
    pub fn tiled_count(&self) -> usize {
        self.spans.iter().map(|s| s.samples.len() / self.segment_len.max(1)).sum()
    }
}

/// Fixed-length, unit-normalised model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub subject_id: String,
    pub start_time: i64,
    /// Index of the first sample in the raw record.
    pub offset: usize,
    pub samples: Vec<f64>,
}

/// Runs detrending, beat detection, quality scoring and outlier removal,
/// then splits the record at removed beats and normalises each clean span.
pub fn clean_record(record: &PpgRecord, cfg: &PreprocessConfig) -> Result<CleanedRecord> {
    record.validate()?;
    let fs = record.sample_rate;
    let x = detrend_with_window(&record.samples, detrend_window(cfg.detrend_window_s, fs))?;
    let mut beats = detect_beats_with(&x, fs, cfg);
    score_beat_quality(&x, &mut beats, cfg.template_beats, cfg.quality_threshold);
    remove_outlier_beats(&x, &mut beats, cfg.z_limit);

    let n = x.len();
    let mut mask = alloc::vec![false; n];
    for b in beats.iter().filter(|b| b.is_kept()) {
        mask[b.foot_start..=b.foot_end].iter_mut().for_each(|m| *m = true);
    }
    // record edges before the first / after the last beat hold at most one
    // partial beat; keep them when the adjoining beat is clean
    let max_gap = math::floor(60.0 / cfg.min_hr_bpm * fs) as usize;
    if let (Some(first), Some(last)) = (beats.first(), beats.last()) {
        if first.is_kept() && first.foot_start <= max_gap {
            mask[..first.foot_start].iter_mut().for_each(|m| *m = true);
        }
        if last.is_kept() && n - 1 - last.foot_end <= max_gap {
            mask[last.foot_end..].iter_mut().for_each(|m| *m = true);
        }
    }
    let kept_samples = mask.iter().filter(|&&m| m).count();
    let qc = QcStats {
        beats_total: beats.len(),
        beats_low_quality: beats.iter().filter(|b| b.status == BeatStatus::LowQuality).count(),
        beats_outlier: beats.iter().filter(|b| b.status == BeatStatus::Outlier).count(),
        usable_fraction: kept_samples as f64 / n as f64,
    };
    let usable = qc.usable_fraction >= cfg.min_usable_fraction;

    let mut spans = Vec::new();
    if usable {
        let mut i = 0;
        while i < n {
            if !mask[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && mask[i] {
                i += 1;
            }
            let samples = normalize_minmax(&x[start..i])?;
            let span_beats = beats
                .iter()
                .filter(|b| b.is_kept() && b.foot_start >= start && b.foot_end < i)
                .map(|b| BeatWindow {
                    start: b.foot_start - start,
                    peak: b.systolic_peak - start,
                    end: b.foot_end - start,
                })
                .collect();
            spans.push(CleanSpan {
                offset: start,
                samples,
                beats: span_beats,
            });
        }
    }
    Ok(CleanedRecord {
        subject_id: record.subject_id.clone(),
        start_time: record.start_time,
        kind: record.kind,
        sample_rate: fs,
        segment_len: segment_len(cfg.segment_s, fs),
        beats,
        spans,
        qc,
        usable,
    })
}

/// Full pipeline for one record. Unusable records yield no segments.
pub fn preprocess_record(
    record: &PpgRecord,
    mode: SegmentMode,
    cfg: &PreprocessConfig,
    seed: u64,
) -> Result<(Vec<Segment>, QcStats)> {
    let cleaned = clean_record(record, cfg)?;
    let segments = cleaned.windows(mode, &mut seed::rng(seed));
    Ok((segments, cleaned.qc))
}
