use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Odd window length in samples closest to `seconds · fs`.
pub fn detrend_window(seconds: f64, sample_rate: f64) -> usize {
    let w = math::round(seconds * sample_rate).max(1.0) as usize;
    w | 1
}

/// Subtracts a 2 s centred moving-average baseline.
pub fn detrend(samples: &[f64], sample_rate: f64) -> Result<Vec<f64>> {
    detrend_with_window(samples, detrend_window(2.0, sample_rate))
}

/// Subtracts a centred moving average of odd length `window`, with the
/// signal reflected about its end samples. The signal mean is removed first
/// so constant offsets cancel before any accumulation.
pub fn detrend_with_window(samples: &[f64], window: usize) -> Result<Vec<f64>> {
    let window = window | 1;
    let n = samples.len();
    if n < 2 * window {
        return Err(Error::TooShort {
            needed: 2 * window,
            got: n,
        });
    }
    let half = (window / 2) as isize;
    let offset = math::mean(samples);
    let y: Vec<f64> = samples.iter().map(|x| x - offset).collect();

    let reflect = |i: isize| -> usize {
        let last = n as isize - 1;
        let j = if i < 0 {
            -i
        } else if i > last {
            2 * last - i
        } else {
            i
        };
        j as usize
    };
    // prefix[k] = sum of padded[0..k], padded index p maps to signal index p - half
    let padded_len = n + 2 * half as usize;
    let mut prefix = Vec::with_capacity(padded_len + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for p in 0..padded_len as isize {
        acc += y[reflect(p - half)];
        prefix.push(acc);
    }
    let w = window as f64;
    Ok((0..n)
        .map(|i| {
            let baseline = (prefix[i + window] - prefix[i]) / w;
            y[i] - baseline
        })
        .collect())
}
