use alloc::vec::Vec;

use super::beats::{Beat, BeatStatus};
use crate::math;

const AMPLITUDE_RESOLUTION: f64 = 0.03;

/// Marks surviving beats whose amplitude (peak minus foot) or foot-to-foot
/// duration lies more than `z_limit` population standard deviations from
/// the record's survivors. Needs at least three survivors; a statistic with
/// zero spread flags nothing. Returns the number of beats marked.
pub fn remove_outlier_beats(samples: &[f64], beats: &mut [Beat], z_limit: f64) -> usize {
    let survivors: Vec<usize> = (0..beats.len()).filter(|&i| beats[i].is_kept()).collect();
    if survivors.len() < 3 {
        return 0;
    }
    let amp: Vec<f64> = survivors.iter().map(|&i| beats[i].amplitude(samples)).collect();
    let dur: Vec<f64> = survivors
        .iter()
        .map(|&i| (beats[i].foot_end - beats[i].foot_start) as f64)
        .collect();
    // spreads below the measurement resolution are not evidence: sampled
    // crests and the reflected baseline near record edges move amplitudes by
    // a few percent, and a period that is not a whole number of samples
    // alternates between two lengths
    let za = zscores(&amp, AMPLITUDE_RESOLUTION * math::mean(&amp).abs());
    let zd = zscores(&dur, 1.0);
    let mut marked = 0;
    for (k, &i) in survivors.iter().enumerate() {
        let b = &mut beats[i];
        b.z_amp = za[k];
        b.z_dur = zd[k];
        if za[k].abs() > z_limit || zd[k].abs() > z_limit {
            b.status = BeatStatus::Outlier;
            marked += 1;
        }
    }
    marked
}

fn zscores(xs: &[f64], sd_floor: f64) -> Vec<f64> {
    let m = math::mean(xs);
    let sd = math::std_dev(xs);
    // identical values can leave rounding-level spread
    if sd <= 1e-12 * m.abs().max(1e-300) {
        return alloc::vec![0.0; xs.len()];
    }
    let sd = sd.max(sd_floor);
    xs.iter().map(|x| (x - m) / sd).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Beats of fixed duration whose peak sample holds the given amplitude.
    fn fixture(amps: &[f64], dur: usize) -> (Vec<f64>, Vec<Beat>) {
        let mut x = alloc::vec![0.0; amps.len() * dur + 1];
        let mut beats = Vec::new();
        for (i, a) in amps.iter().enumerate() {
            let s = i * dur;
            x[s + dur / 3] = *a;
            beats.push(Beat::new(s, s + dur / 3, s + dur));
        }
        (x, beats)
    }

    #[test]
    fn identical_beats_no_outliers() {
        let (x, mut beats) = fixture(&[0.7; 20], 200);
        assert_eq!(remove_outlier_beats(&x, &mut beats, 2.0), 0);
    }

    #[test]
    fn large_beat_removed() {
        let mut amps: Vec<f64> = (0..19).map(|i| 1.0 + 0.01 * ((i % 5) as f64 - 2.0)).collect();
        amps.push(3.0);
        let (x, mut beats) = fixture(&amps, 200);
        // oracle: z of the big beat from first principles
        let n = amps.len() as f64;
        let mean = amps.iter().sum::<f64>() / n;
        let sd = (amps.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((3.0 - mean) / sd > 2.0);
        assert_eq!(remove_outlier_beats(&x, &mut beats, 2.0), 1);
        assert_eq!(beats[19].status, BeatStatus::Outlier);
        assert!(beats[..19].iter().all(|b| b.is_kept()));
    }

    #[test]
    fn two_beats_both_kept() {
        let (x, mut beats) = fixture(&[1.0, 5.0], 200);
        assert_eq!(remove_outlier_beats(&x, &mut beats, 2.0), 0);
        assert!(beats.iter().all(|b| b.is_kept()));
    }

    #[test]
    fn low_quality_beats_are_not_counted() {
        let (x, mut beats) = fixture(&[1.0, 1.0, 1.0, 9.0], 200);
        beats[3].status = BeatStatus::LowQuality;
        assert_eq!(remove_outlier_beats(&x, &mut beats, 2.0), 0);
        assert_eq!(beats[3].status, BeatStatus::LowQuality);
    }
}
