use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::PreprocessConfig;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeatStatus {
    Kept,
    LowQuality,
    Outlier,
}

/// One foot-to-foot pulse. `foot_end` is shared with the next beat's
/// `foot_start` when the beats are consecutive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beat {
    pub foot_start: usize,
    pub systolic_peak: usize,
    pub foot_end: usize,
    pub quality: f64,
    pub z_amp: f64,
    pub z_dur: f64,
    pub status: BeatStatus,
}

impl Beat {
    pub fn new(foot_start: usize, systolic_peak: usize, foot_end: usize) -> Self {
        Beat {
            foot_start,
            systolic_peak,
            foot_end,
            quality: 0.0,
            z_amp: 0.0,
            z_dur: 0.0,
            status: BeatStatus::Kept,
        }
    }

    pub fn len(&self) -> usize {
        self.foot_end - self.foot_start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_kept(&self) -> bool {
        self.status == BeatStatus::Kept
    }

    pub fn amplitude(&self, samples: &[f64]) -> f64 {
        samples[self.systolic_peak] - samples[self.foot_start]
    }
}

pub fn detect_beats(samples: &[f64], sample_rate: f64) -> Vec<Beat> {
    detect_beats_with(samples, sample_rate, &PreprocessConfig::default())
}

/// Adaptive-threshold peak picking with refractory suppression. A foot is
/// where the steepest tangent of the upstroke into a peak meets the level of
/// the minimum between that peak and the previous one. A beat is emitted only
/// when both of its neighbouring peak intervals imply a heart rate inside the
/// configured band.
pub fn detect_beats_with(samples: &[f64], sample_rate: f64, cfg: &PreprocessConfig) -> Vec<Beat> {
    let n = samples.len();
    if n < 3 {
        return Vec::new();
    }
    let threshold = rolling_threshold(samples, sample_rate, cfg);
    let min_dist = math::ceil_usize(60.0 / cfg.max_hr_bpm * sample_rate);
    let max_dist = math::floor(60.0 / cfg.min_hr_bpm * sample_rate) as usize;

    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        let x = samples[i];
        if !(x > samples[i - 1] && x >= samples[i + 1] && x > threshold[i]) {
            continue;
        }
        let mut keep = true;
        while let Some(&last) = peaks.last() {
            if i - last >= min_dist {
                break;
            }
            if x > samples[last] {
                peaks.pop();
            } else {
                keep = false;
                break;
            }
        }
        if keep {
            peaks.push(i);
        }
    }

    let foot_between = |a: usize, b: usize| -> Option<usize> {
        if b - a > max_dist || b - a < 2 {
            return None;
        }
        let mut low = a + 1;
        for j in a + 1..b {
            if samples[j] < samples[low] {
                low = j;
            }
        }
        // a flat trough leaves its minimum to baseline ripple; intersect the
        // steepest upstroke tangent with the trough level instead
        let mut steep = low + 1;
        for j in low + 1..=b {
            if samples[j] - samples[j - 1] > samples[steep] - samples[steep - 1] {
                steep = j;
            }
        }
        let slope = samples[steep] - samples[steep - 1];
        if slope.is_nan() || slope <= 0.0 {
            return Some(low);
        }
        let mid = 0.5 * (samples[steep] + samples[steep - 1]);
        let at = steep as f64 - 0.5 - (mid - samples[low]) / slope;
        Some((math::floor(at).max(low as f64) as usize).min(steep - 1))
    };
    peaks
        .windows(3)
        .filter_map(|w| {
            let start = foot_between(w[0], w[1])?;
            let end = foot_between(w[1], w[2])?;
            Some(Beat::new(start, w[1], end))
        })
        .collect()
}

/// Centred rolling mean + k·sd, window truncated at the edges.
fn rolling_threshold(samples: &[f64], sample_rate: f64, cfg: &PreprocessConfig) -> Vec<f64> {
    let n = samples.len();
    let half = (math::round(cfg.threshold_window_s * sample_rate) as usize) / 2;
    let offset = math::mean(samples);
    let mut s1 = Vec::with_capacity(n + 1);
    let mut s2 = Vec::with_capacity(n + 1);
    s1.push(0.0);
    s2.push(0.0);
    let (mut a1, mut a2) = (0.0, 0.0);
    for &x in samples {
        let y = x - offset;
        a1 += y;
        a2 += y * y;
        s1.push(a1);
        s2.push(a2);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let m = (hi - lo) as f64;
            let mean = (s1[hi] - s1[lo]) / m;
            let var = ((s2[hi] - s2[lo]) / m - mean * mean).max(0.0);
            offset + mean + cfg.threshold_k * math::sqrt(var)
        })
        .collect()
}
