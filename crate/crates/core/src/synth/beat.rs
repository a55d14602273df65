use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Log-scale spread shared by both pulses.
pub const PULSE_SIGMA: f64 = 0.4;
/// Peak height of the slow diastolic runoff relative to the systolic pulse.
pub const RUNOFF_AMPLITUDE: f64 = 0.5;
/// Decay constant of the runoff, seconds.
pub const RUNOFF_TAU: f64 = 0.4;

/// Knobs of the two-pulse beat model. The systolic pulse starts at the foot
/// and peaks `systolic_width` seconds later; the reflected pulse has the same
/// shape, starts `reflection_delay` seconds after the foot and is scaled by
/// `reflection_ratio`, so the two peaks sit `reflection_delay` apart. A slow
/// exponential runoff underneath keeps the signal falling until the next
/// upstroke, which pins the foot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Morphology {
    pub hr_bpm: f64,
    pub systolic_width: f64,
    pub reflection_delay: f64,
    pub reflection_ratio: f64,
}

/// Log-normal shaped bump: zero at `t <= 0`, maximum 1 at `t = width`.
pub fn pulse(t: f64, width: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let z = math::ln(t / width) / PULSE_SIGMA;
    math::exp(-0.5 * z * z)
}

fn runoff(t: f64, width: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let rise = t / (1.5 * width);
    RUNOFF_AMPLITUDE * (1.0 - math::exp(-rise * rise)) * math::exp(-t / RUNOFF_TAU)
}

/// Value of the beat `t` seconds after its foot.
pub fn beat_value(m: &Morphology, t: f64) -> f64 {
    pulse(t, m.systolic_width)
        + m.reflection_ratio * pulse(t - m.reflection_delay, m.systolic_width)
        + runoff(t, m.systolic_width)
}

/// One foot-to-foot beat of `round(60 / hr * fs)` samples.
pub fn synth_beat(m: &Morphology, sample_rate: f64) -> Result<Vec<f64>> {
    if !(40.0..=180.0).contains(&m.hr_bpm) {
        return Err(Error::validation("hr_bpm", "must lie in [40, 180]"));
    }
    if !(m.systolic_width > 0.0 && m.reflection_delay >= 0.0 && m.reflection_ratio >= 0.0 && sample_rate > 0.0) {
        return Err(Error::validation("morphology", "widths, delay, ratio and rate must be non-negative"));
    }
    let n = math::round(60.0 / m.hr_bpm * sample_rate) as usize;
    Ok((0..n).map(|i| beat_value(m, i as f64 / sample_rate)).collect())
}
