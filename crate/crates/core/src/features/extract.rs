use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::derivative::second_derivative;
use super::fiducials::{locate_fiducials, FiducialSet};
use crate::error::{Error, Result};
use crate::math;
use crate::preprocess::CleanedRecord;

pub const N_FEATURES: usize = 15;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "systolic_amplitude",
    "reflection_index",
    "crest_time",
    "delta_t",
    "pulse_width_50",
    "pulse_interval",
    "crest_time_ratio",
    "b_a",
    "c_a",
    "d_a",
    "e_a",
    "aging_index",
    "systolic_area",
    "diastolic_area",
    "ipa_ratio",
];

/// Fifteen morphology features; `None` marks a feature whose fiducial
/// points were not found.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector(pub [Option<f64>; N_FEATURES]);

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .and_then(|i| self.0[i])
    }

    pub fn values(&self) -> &[Option<f64>; N_FEATURES] {
        &self.0
    }
}

const EPS: f64 = 1e-12;

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d.abs() >= EPS => Some(n / d),
        _ => None,
    }
}

/// Trapezoidal area of `y - base` over `[a, b]` in sample units.
fn area(y: &[f64], base: f64, a: usize, b: usize) -> f64 {
    (a..b).map(|i| 0.5 * ((y[i] - base) + (y[i + 1] - base))).sum()
}

/// Peak position refined by a parabola through the sample and its neighbours.
fn vertex(y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= y.len() {
        return i as f64;
    }
    let curv = y[i - 1] - 2.0 * y[i] + y[i + 1];
    if curv >= 0.0 {
        return i as f64;
    }
    i as f64 + (0.5 * (y[i - 1] - y[i + 1]) / curv).clamp(-0.5, 0.5)
}

fn half_width(beat: &[f64], sys: usize, sample_rate: f64) -> Option<f64> {
    let base = beat[0];
    let level = base + 0.5 * (beat[sys] - base);
    let left = (0..sys).rev().find(|&i| beat[i] < level)?;
    let right = (sys + 1..beat.len()).find(|&i| beat[i] < level)?;
    let cross = |i: usize, j: usize| {
        // linear crossing between samples i and j
        let (yi, yj) = (beat[i], beat[j]);
        i as f64 + (level - yi) / (yj - yi) * (j as f64 - i as f64)
    };
    let l = cross(left, left + 1);
    let r = cross(right - 1, right);
    Some((r - l) / sample_rate)
}

pub fn extract_features(
    beat: &[f64],
    fid: &FiducialSet,
    sample_rate: f64,
    pulse_interval: f64,
) -> FeatureVector {
    let mut f = [None; N_FEATURES];
    if beat.is_empty() {
        return FeatureVector(f);
    }
    let base = beat[fid.foot];
    let sys = fid.systolic_peak;
    let amp = beat[sys] - base;
    let sys_t = vertex(beat, sys);
    let crest = (sys_t - fid.foot as f64) / sample_rate;
    f[0] = Some(amp);
    f[1] = ratio(fid.diastolic_peak.map(|d| beat[d] - base), Some(amp));
    f[2] = Some(crest);
    f[3] = fid.diastolic_peak.map(|d| (vertex(beat, d) - sys_t) / sample_rate);
    f[4] = half_width(beat, sys, sample_rate);
    f[5] = Some(pulse_interval);
    f[6] = ratio(Some(crest), Some(pulse_interval));

    if let Ok(sd) = second_derivative(beat, sample_rate) {
        let wave = |w: Option<usize>| w.map(|i| sd[i]);
        let a = wave(fid.a_wave);
        let (b, c, d, e) = (wave(fid.b_wave), wave(fid.c_wave), wave(fid.d_wave), wave(fid.e_wave));
        f[7] = ratio(b, a);
        f[8] = ratio(c, a);
        f[9] = ratio(d, a);
        f[10] = ratio(e, a);
        let aging = match (b, c, d, e) {
            (Some(b), Some(c), Some(d), Some(e)) => Some(b - c - d - e),
            _ => None,
        };
        f[11] = ratio(aging, a);
    }

    let last = beat.len() - 1;
    let total = area(beat, base, fid.foot, last);
    if let Some(notch) = fid.dicrotic_notch {
        if total.abs() >= EPS {
            let s = area(beat, base, fid.foot, notch) / total;
            let d = area(beat, base, notch, last) / total;
            f[12] = Some(s);
            f[13] = Some(d);
            f[14] = ratio(Some(d), Some(s));
        }
    }
    FeatureVector(f)
}

/// Per-feature median over beats, ignoring missing entries.
pub fn recording_feature_vector(beats: &[FeatureVector]) -> Result<FeatureVector> {
    if beats.is_empty() {
        return Err(Error::NoUsableBeats);
    }
    let mut out = [None; N_FEATURES];
    let mut column = Vec::with_capacity(beats.len());
    for (j, slot) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(beats.iter().filter_map(|b| b.0[j]));
        *slot = math::median(&column);
    }
    Ok(FeatureVector(out))
}

/// Aggregated features over every kept beat of a cleaned record.
pub fn record_features(rec: &CleanedRecord) -> Result<FeatureVector> {
    let fs = rec.sample_rate;
    let per_beat: Vec<FeatureVector> = rec
        .spans
        .iter()
        .flat_map(|span| {
            span.beats.iter().map(move |b| {
                let beat = &span.samples[b.start..=b.end];
                let fid = locate_fiducials(beat, fs);
                extract_features(beat, &fid, fs, (b.end - b.start) as f64 / fs)
            })
        })
        .collect();
    recording_feature_vector(&per_beat)
}
