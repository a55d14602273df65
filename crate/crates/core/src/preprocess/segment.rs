use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    /// One uniformly random window.
    TrainRandomCrop,
    /// All consecutive non-overlapping windows from the start.
    TestTiled,
}

/// Window of a signal; `offset` indexes the signal it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub offset: usize,
    pub samples: Vec<f64>,
}

/// Samples per segment: `round(seconds · fs)`.
pub fn segment_len(seconds: f64, sample_rate: f64) -> usize {
    math::round(seconds * sample_rate) as usize
}

/// Min-max scaling to [0, 1]; a constant signal maps to 0.5.
pub fn normalize_minmax(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::validation("samples", "empty"));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if hi == lo {
        return Ok(alloc::vec![0.5; samples.len()]);
    }
    let range = hi - lo;
    Ok(samples.iter().map(|x| (x - lo) / range).collect())
}

/// Cuts 4 s windows from one signal.
pub fn segment(samples: &[f64], sample_rate: f64, mode: SegmentMode, rng_seed: u64) -> Vec<Window> {
    let len = segment_len(4.0, sample_rate);
    windows(samples, len, mode, &mut seed::rng(rng_seed))
}

pub(crate) fn windows(samples: &[f64], len: usize, mode: SegmentMode, rng: &mut Rng) -> Vec<Window> {
    if len == 0 || samples.len() < len {
        return Vec::new();
    }
    match mode {
        SegmentMode::TestTiled => (0..samples.len() / len)
            .map(|i| Window {
                offset: i * len,
                samples: samples[i * len..(i + 1) * len].to_vec(),
            })
            .collect(),
        SegmentMode::TrainRandomCrop => {
            let start = rng.random_range(0..=samples.len() - len);
            alloc::vec![Window {
                offset: start,
                samples: samples[start..start + len].to_vec(),
            }]
        }
    }
}

/// One window drawn uniformly over every valid start position of every
/// span long enough to hold it. Returns (span index, start).
pub fn random_crop<S: AsRef<[f64]>>(spans: &[S], len: usize, rng: &mut Rng) -> Option<(usize, usize)> {
    let total: usize = spans
        .iter()
        .map(|s| (s.as_ref().len() + 1).saturating_sub(len))
        .sum();
    if total == 0 || len == 0 {
        return None;
    }
    let mut r = rng.random_range(0..total);
    for (i, s) in spans.iter().enumerate() {
        let c = (s.as_ref().len() + 1).saturating_sub(len);
        if r < c {
            return Some((i, r));
        }
        r -= c;
    }
    None
}
