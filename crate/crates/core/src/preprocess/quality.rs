use alloc::vec::Vec;

use super::beats::{Beat, BeatStatus};
use crate::math;

/// Sliding-window template matching. Every beat is resampled to the median
/// beat length; its template is the pointwise mean of up to `window_beats`
/// neighbouring beats (itself excluded, window shifted at the record edges)
/// and its quality is the clipped Pearson correlation with that template.
pub fn score_beat_quality(samples: &[f64], beats: &mut [Beat], window_beats: usize, threshold: f64) {
    if beats.len() < 3 {
        for b in beats.iter_mut() {
            b.quality = 0.0;
            b.status = BeatStatus::LowQuality;
        }
        return;
    }
    let lens: Vec<f64> = beats.iter().map(|b| b.len() as f64).collect();
    let target = math::round(math::median(&lens).unwrap_or(2.0)).max(2.0) as usize;
    let shapes: Vec<Vec<f64>> = beats
        .iter()
        .map(|b| math::resample_linear(&samples[b.foot_start..=b.foot_end], target))
        .collect();

    let n = beats.len();
    let k = window_beats.clamp(1, n - 1);
    let mut template = alloc::vec![0.0; target];
    for j in 0..n {
        // window of k + 1 beats containing j, clipped to the record
        let lo = j.saturating_sub(k / 2).min(n - (k + 1));
        let hi = lo + k + 1;
        template.iter_mut().for_each(|v| *v = 0.0);
        for (i, shape) in shapes.iter().enumerate().take(hi).skip(lo) {
            if i == j {
                continue;
            }
            for (t, v) in template.iter_mut().zip(shape) {
                *t += v;
            }
        }
        let inv = 1.0 / k as f64;
        template.iter_mut().for_each(|v| *v *= inv);
        let q = math::pearson(&shapes[j], &template).max(0.0);
        let beat = &mut beats[j];
        beat.quality = q;
        beat.status = if q < threshold {
            BeatStatus::LowQuality
        } else {
            BeatStatus::Kept
        };
    }
}
