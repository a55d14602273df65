use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::beat::{beat_value, Morphology};
use crate::data::{label_subject, Dataset, PpgRecord, RecordKind, Sex, Subject, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::math;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    None,
    Weak,
    Strong,
}

impl Effect {
    /// Share of the morphology latent driven by the subject's own BP.
    fn coupling(self) -> f64 {
        match self {
            Effect::None => 0.0,
            Effect::Weak => 0.35,
            Effect::Strong => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    pub drift_amplitude: f64,
    pub drift_freq_hz: f64,
    pub noise_sd: f64,
    /// Expected artifact bursts per minute of recording.
    pub burst_rate_per_min: f64,
    pub burst_duration_s: f64,
    /// Respiratory modulation depth of the beat interval (fraction).
    pub hrv_depth: f64,
    /// Respiratory modulation depth of the beat amplitude (fraction).
    pub amplitude_modulation: f64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile {
            drift_amplitude: 0.3,
            drift_freq_hz: 0.1,
            noise_sd: 0.005,
            burst_rate_per_min: 0.3,
            burst_duration_s: 3.0,
            hrv_depth: 0.02,
            amplitude_modulation: 0.035,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub positive_fraction: f64,
    pub effect: Effect,
    pub noise: NoiseProfile,
    pub days: usize,
    pub spot_per_day: usize,
    pub background_per_day: usize,
    pub background_seconds: f64,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_subjects: 200,
            positive_fraction: 189.0 / 448.0,
            effect: Effect::Strong,
            noise: NoiseProfile::default(),
            days: 2,
            spot_per_day: 3,
            background_per_day: 3,
            background_seconds: 40.0,
            sample_rate: 250.0,
            seed: 0,
        }
    }
}

/// Generating parameters of one subject, before per-recording noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub subject_id: String,
    pub sbp: f64,
    pub dbp: f64,
    /// Morphology latent in (0, 1) that sets ratio and delay.
    pub stiffness: f64,
    pub reflection_ratio: f64,
    pub reflection_delay: f64,
    pub systolic_width: f64,
    pub base_hr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub truth: Vec<SubjectTruth>,
}

const SBP: (f64, f64, f64, f64) = (111.07, 13.36, 79.76, 151.60);
const DBP: (f64, f64, f64, f64) = (75.59, 9.61, 53.76, 108.60);
const AGE: (f64, f64, f64, f64) = (37.92, 8.59, 20.0, 60.0);
const P_MALE: f64 = 249.0 / 448.0;
const BP_CORRELATION: f64 = 0.8;
const LINK_GAIN: f64 = 3.0;
const MAX_TRIES: usize = 100_000;
/// 2024-01-01T00:00:00Z
const EPOCH: i64 = 1_704_067_200;
const SPOT_HOURS: [i64; 3] = [8, 13, 19];
/// How long a beat's tail keeps contributing after the next foot.
const BEAT_TAIL_S: f64 = 3.0;
const ADC_GAIN: f64 = 2000.0;
const ADC_OFFSET: f64 = 30_000.0;

fn std_normal(rng: &mut Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

fn truncated(rng: &mut Rng, (mean, sd, lo, hi): (f64, f64, f64, f64)) -> f64 {
    loop {
        let v = mean + sd * std_normal(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
}

/// Correlated (SBP, DBP) draw truncated to the cohort ranges.
fn draw_bp(rng: &mut Rng) -> (f64, f64) {
    loop {
        let zs = std_normal(rng);
        let zd = BP_CORRELATION * zs + math::sqrt(1.0 - BP_CORRELATION * BP_CORRELATION) * std_normal(rng);
        let s = SBP.0 + SBP.1 * zs;
        let d = DBP.0 + DBP.1 * zd;
        if (SBP.2..=SBP.3).contains(&s) && (DBP.2..=DBP.3).contains(&d) && s > d {
            return (s, d);
        }
    }
}

/// Signed distance past the nearer labelling threshold, in cohort sds.
fn bp_excess(sbp: f64, dbp: f64) -> f64 {
    ((sbp - 120.0) / SBP.1).max((dbp - 80.0) / DBP.1)
}

pub fn validate_spec(spec: &SynthSpec) -> Result<()> {
    if spec.n_subjects == 0 {
        return Err(Error::validation("n_subjects", "must be positive"));
    }
    if !(0.0..=1.0).contains(&spec.positive_fraction) {
        return Err(Error::InfeasibleSpec(spec.positive_fraction));
    }
    let n = &spec.noise;
    for (field, v) in [
        ("noise.drift_amplitude", n.drift_amplitude),
        ("noise.drift_freq_hz", n.drift_freq_hz),
        ("noise.noise_sd", n.noise_sd),
        ("noise.burst_rate_per_min", n.burst_rate_per_min),
        ("noise.burst_duration_s", n.burst_duration_s),
        ("noise.hrv_depth", n.hrv_depth),
        ("noise.amplitude_modulation", n.amplitude_modulation),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::validation(field, "must be finite and non-negative"));
        }
    }
    if spec.days == 0 || spec.background_per_day == 0 {
        return Err(Error::validation("days", "every subject needs background recordings"));
    }
    if spec.background_per_day > 24 {
        return Err(Error::validation("background_per_day", "at most 24 half-hour slots per day"));
    }
    if spec.spot_per_day > SPOT_HOURS.len() {
        return Err(Error::validation("spot_per_day", "at most 3"));
    }
    if spec.background_seconds < crate::data::MIN_BACKGROUND_SECONDS {
        return Err(Error::validation("background_seconds", "must be at least 30"));
    }
    if !(spec.sample_rate >= 50.0 && spec.sample_rate.is_finite()) {
        return Err(Error::validation("sample_rate", "must be at least 50 Hz"));
    }
    Ok(())
}

fn subject_truth(id: String, positive: bool, effect: Effect, rng: &mut Rng) -> Result<SubjectTruth> {
    let mut tries = 0;
    let (sbp, dbp) = loop {
        let bp = draw_bp(rng);
        if label_subject(bp.0, bp.1)? == positive {
            break bp;
        }
        tries += 1;
        if tries > MAX_TRIES {
            return Err(Error::InfeasibleSpec(if positive { 1.0 } else { 0.0 }));
        }
    };
    let own = math::sigmoid(LINK_GAIN * bp_excess(sbp, dbp));
    let decoy = draw_bp(rng);
    let other = math::sigmoid(LINK_GAIN * bp_excess(decoy.0, decoy.1));
    let w = effect.coupling();
    let stiffness = w * own + (1.0 - w) * other;
    let reflection_ratio = (0.30 + 0.35 * stiffness + 0.02 * std_normal(rng)).clamp(0.2, 0.75);
    let reflection_delay = (0.24 - 0.08 * stiffness + 0.005 * std_normal(rng)).clamp(0.14, 0.24);
    Ok(SubjectTruth {
        subject_id: id,
        sbp,
        dbp,
        stiffness,
        reflection_ratio,
        reflection_delay,
        systolic_width: rng.random_range(0.08..0.12),
        base_hr: rng.random_range(62.0..92.0),
    })
}

/// Beat train with respiratory heart-rate and amplitude modulation, baseline
/// drift, white noise and artifact bursts, quantised to ADC counts.
fn synth_recording(truth: &SubjectTruth, seconds: f64, fs: f64, noise: &NoiseProfile, scale: f64, rng: &mut Rng) -> Vec<f64> {
    let n = math::round(seconds * fs) as usize;
    let tau = core::f64::consts::TAU;
    let hr = truth.base_hr + rng.random_range(-4.0..4.0);
    let resp_hz = rng.random_range(0.2..0.3);
    let resp_phase = rng.random_range(0.0..tau);
    let hrv = noise.hrv_depth * rng.random_range(0.5..1.5);
    let amp_mod = noise.amplitude_modulation * rng.random_range(0.5..1.5);

    let mut beat_starts = Vec::new();
    let mut t = -rng.random_range(0.0..60.0 / hr);
    while t < seconds {
        beat_starts.push(t);
        t += 60.0 / hr * (1.0 + hrv * math::sin(tau * resp_hz * t + resp_phase));
    }
    let morph = Morphology {
        hr_bpm: hr,
        systolic_width: truth.systolic_width,
        reflection_delay: truth.reflection_delay,
        reflection_ratio: truth.reflection_ratio,
    };
    let mut x = alloc::vec![0.0; n];
    for (k, &start) in beat_starts.iter().enumerate() {
        let amp = 1.0 + amp_mod * math::sin(tau * resp_hz * start + resp_phase + 1.0);
        let end = beat_starts.get(k + 1).copied().unwrap_or(seconds) + BEAT_TAIL_S;
        let i0 = math::ceil_usize((start * fs).max(0.0));
        let i1 = ((end * fs) as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(i1).skip(i0) {
            *v += amp * beat_value(&morph, i as f64 / fs - start);
        }
    }

    let drift_phase = rng.random_range(0.0..tau);
    let drift_freq = noise.drift_freq_hz * rng.random_range(0.7..1.3);
    let white = Normal::new(0.0, (noise.noise_sd * scale).max(0.0)).expect("finite sd");
    for (i, v) in x.iter_mut().enumerate() {
        let ti = i as f64 / fs;
        *v += noise.drift_amplitude * math::sin(tau * drift_freq * ti + drift_phase) + white.sample(rng);
    }

    let rate = noise.burst_rate_per_min * scale * seconds / 60.0;
    let count = if rate > 0.0 {
        Poisson::new(rate).expect("positive rate").sample(rng) as usize
    } else {
        0
    };
    let burst_len = math::round(noise.burst_duration_s * fs) as usize;
    for _ in 0..count {
        if burst_len == 0 || burst_len >= n {
            break;
        }
        let at = rng.random_range(0..n - burst_len);
        // motion artifact: large smoothed random walk plus spikes
        let mut level = 0.0;
        for v in &mut x[at..at + burst_len] {
            level = 0.95 * level + 0.4 * std_normal(rng);
            *v += level + 0.3 * std_normal(rng);
        }
    }
    x.iter().map(|v| math::round(ADC_GAIN * v + ADC_OFFSET)).collect()
}

/// Seeded cohort with spot-check and background recordings. Each subject
/// draws from its own child stream, so subjects are independent of each
/// other's draws.
pub fn generate_dataset(spec: &SynthSpec) -> Result<SynthOutput> {
    validate_spec(spec)?;
    let n = spec.n_subjects;
    let n_pos = math::round(spec.positive_fraction * n as f64) as usize;
    let mut labels: Vec<bool> = (0..n).map(|i| i < n_pos).collect();
    labels.shuffle(&mut seed::child_rng(spec.seed, "labels"));

    let fs = spec.sample_rate;
    let mut subjects = Vec::with_capacity(n);
    let mut records = Vec::new();
    let mut truths = Vec::with_capacity(n);
    for (i, &positive) in labels.iter().enumerate() {
        let id = format!("S{:04}", i + 1);
        let mut rng = seed::child_rng(spec.seed, &format!("subject/{id}"));
        let truth = subject_truth(id.clone(), positive, spec.effect, &mut rng)?;
        let age = math::round(truncated(&mut rng, AGE)) as u32;
        let sex = if rng.random_bool(P_MALE) { Sex::Male } else { Sex::Female };
        subjects.push(Subject::new(id.clone(), age, sex, truth.sbp, truth.dbp)?);

        for day in 0..spec.days as i64 {
            let midnight = EPOCH + day * SECONDS_PER_DAY;
            for &hour in SPOT_HOURS.iter().take(spec.spot_per_day) {
                let start = midnight + hour * 3600 + rng.random_range(0..1200);
                let samples = synth_recording(&truth, crate::data::SPOT_CHECK_SECONDS, fs, &spec.noise, 1.0, &mut rng);
                records.push(PpgRecord {
                    subject_id: id.clone(),
                    start_time: start,
                    kind: RecordKind::SpotCheck,
                    sample_rate: fs,
                    samples,
                });
            }
            // half-hour slots from 09:00
            let mut slots: Vec<usize> = index::sample(&mut rng, 24, spec.background_per_day).into_vec();
            slots.sort_unstable();
            for slot in slots {
                let start = midnight + 9 * 3600 + slot as i64 * 1800 + rng.random_range(0..60);
                let samples = synth_recording(&truth, spec.background_seconds, fs, &spec.noise, 2.0, &mut rng);
                records.push(PpgRecord {
                    subject_id: id.clone(),
                    start_time: start,
                    kind: RecordKind::Background,
                    sample_rate: fs,
                    samples,
                });
            }
        }
        truths.push(truth);
    }
    Ok(SynthOutput {
        dataset: Dataset::new(subjects, records)?,
        truth: truths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(effect: Effect, seed: u64) -> SynthSpec {
        SynthSpec {
            n_subjects: 20,
            effect,
            days: 1,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn positive_count_is_enforced() {
        let spec = SynthSpec {
            n_subjects: 448,
            days: 1,
            spot_per_day: 0,
            background_per_day: 1,
            background_seconds: 30.0,
            ..SynthSpec::default()
        };
        let out = generate_dataset(&spec).unwrap();
        assert_eq!(out.dataset.subjects().iter().filter(|s| s.label).count(), 189);
        for s in out.dataset.subjects() {
            assert!((SBP.2..=SBP.3).contains(&s.mean_sbp));
            assert!((DBP.2..=DBP.3).contains(&s.mean_dbp));
            assert!((20..=60).contains(&s.age));
        }
    }

    #[test]
    fn seeded() {
        let a = generate_dataset(&small(Effect::Strong, 3)).unwrap();
        let b = generate_dataset(&small(Effect::Strong, 3)).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&small(Effect::Strong, 4)).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn record_layout() {
        let out = generate_dataset(&small(Effect::Weak, 1)).unwrap();
        let ds = &out.dataset;
        assert_eq!(ds.records().len(), 20 * 6);
        for r in ds.records() {
            r.validate().unwrap();
            assert!(r.samples.iter().all(|v| v.fract() == 0.0));
        }
    }

    #[test]
    fn infeasible_fraction() {
        let spec = SynthSpec { positive_fraction: 1.5, ..small(Effect::None, 0) };
        assert!(matches!(generate_dataset(&spec), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn strong_link_is_monotone() {
        let spec = SynthSpec {
            n_subjects: 300,
            days: 1,
            spot_per_day: 0,
            background_per_day: 1,
            background_seconds: 30.0,
            ..SynthSpec::default()
        };
        let truth = generate_dataset(&spec).unwrap().truth;
        let sbp: Vec<f64> = truth.iter().map(|t| t.sbp).collect();
        let s: Vec<f64> = truth.iter().map(|t| t.stiffness).collect();
        assert!(math::spearman(&sbp, &s) > 0.8);
        let none = generate_dataset(&SynthSpec { effect: Effect::None, ..spec }).unwrap().truth;
        let sbp: Vec<f64> = none.iter().map(|t| t.sbp).collect();
        let s: Vec<f64> = none.iter().map(|t| t.stiffness).collect();
        assert!(math::spearman(&sbp, &s).abs() < 0.2);
    }
}
