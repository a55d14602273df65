use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const MIN_BEAT_LEN: usize = 7;

/// 5-point moving average (window truncated at the ends) followed by a
/// second difference scaled by fs²: central in the interior, one-sided at
/// the two end samples.
pub fn second_derivative(beat: &[f64], sample_rate: f64) -> Result<Vec<f64>> {
    let n = beat.len();
    if n < MIN_BEAT_LEN {
        return Err(Error::TooShort {
            needed: MIN_BEAT_LEN,
            got: n,
        });
    }
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            beat[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let fs2 = sample_rate * sample_rate;
    let d2 = |i: usize| (smooth[i - 1] - 2.0 * smooth[i] + smooth[i + 1]) * fs2;
    let mut out = Vec::with_capacity(n);
    out.push(d2(1));
    for i in 1..n - 1 {
        out.push(d2(i));
    }
    out.push(d2(n - 2));
    Ok(out)
}
