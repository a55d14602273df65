use serde::{Deserialize, Serialize};

use super::derivative::second_derivative;

/// Landmarks of one foot-aligned beat. PPG indices refer to the beat
/// samples (foot = 0); wave indices refer to its second derivative, which
/// has the same length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FiducialSet {
    pub foot: usize,
    pub systolic_peak: usize,
    pub dicrotic_notch: Option<usize>,
    pub diastolic_peak: Option<usize>,
    pub a_wave: Option<usize>,
    pub b_wave: Option<usize>,
    pub c_wave: Option<usize>,
    pub d_wave: Option<usize>,
    pub e_wave: Option<usize>,
}

fn is_local_max(x: &[f64], i: usize) -> bool {
    i > 0 && i + 1 < x.len() && x[i] > x[i - 1] && x[i] >= x[i + 1]
}

fn is_local_min(x: &[f64], i: usize) -> bool {
    i > 0 && i + 1 < x.len() && x[i] < x[i - 1] && x[i] <= x[i + 1]
}

fn next_extremum(x: &[f64], after: usize, maximum: bool) -> Option<usize> {
    (after + 1..x.len()).find(|&i| if maximum { is_local_max(x, i) } else { is_local_min(x, i) })
}

/// Systolic peak is the global maximum. The a wave is the largest value of
/// the second derivative before it; b, c, d, e are the alternating
/// extrema that follow. The e wave is taken as the dicrotic notch when the
/// pulse still rises to a diastolic maximum after it; otherwise the notch
/// is the lowest PPG local minimum between the systolic peak and 80% of the
/// beat. The diastolic peak is the highest PPG local maximum after the
/// notch.
pub fn locate_fiducials(beat: &[f64], sample_rate: f64) -> FiducialSet {
    let mut out = FiducialSet::default();
    if beat.is_empty() {
        return out;
    }
    let sys = beat
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > beat[best] { i } else { best });
    out.systolic_peak = sys;

    if let Ok(sd) = second_derivative(beat, sample_rate) {
        if sys > 0 {
            let a = (0..sys).fold(0, |best, i| if sd[i] > sd[best] { i } else { best });
            out.a_wave = Some(a);
            out.b_wave = next_extremum(&sd, a, false);
            out.c_wave = out.b_wave.and_then(|b| next_extremum(&sd, b, true));
            out.d_wave = out.c_wave.and_then(|c| next_extremum(&sd, c, false));
            out.e_wave = out.d_wave.and_then(|d| next_extremum(&sd, d, true));
        }
    }

    let highest_max_after = |from: usize| {
        (from + 1..beat.len())
            .filter(|&i| is_local_max(beat, i))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if beat[b] >= beat[i] => Some(b),
                _ => Some(i),
            })
    };

    let notch_from_e = out
        .e_wave
        .filter(|&e| e > sys && highest_max_after(e).is_some());
    out.dicrotic_notch = notch_from_e.or_else(|| {
        let limit = (8 * (beat.len() - 1)) / 10;
        (sys + 1..=limit)
            .filter(|&i| is_local_min(beat, i))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if beat[b] <= beat[i] => Some(b),
                _ => Some(i),
            })
    });
    out.diastolic_peak = out.dicrotic_notch.and_then(highest_max_after);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn gauss(len: usize, centers: &[(f64, f64, f64)]) -> Vec<f64> {
        (0..len)
            .map(|i| {
                let t = i as f64 / len as f64;
                centers
                    .iter()
                    .map(|&(c, w, a)| a * (-((t - c) / w).powi(2) / 2.0).exp())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn two_gaussian_beat() {
        let len = 250;
        let beat = gauss(len, &[(0.3, 0.06, 1.0), (0.6, 0.06, 0.5)]);
        let f = locate_fiducials(&beat, 250.0);
        assert!((f.systolic_peak as i64 - 75).abs() <= 2, "{f:?}");
        let dia = f.diastolic_peak.expect("diastolic peak");
        assert!((dia as i64 - 150).abs() <= 3, "{f:?}");
        assert!(f.dicrotic_notch.unwrap() > f.systolic_peak && f.dicrotic_notch.unwrap() < dia);
    }

    #[test]
    fn decaying_beat_has_no_diastolic_peak() {
        let beat: Vec<f64> = (0..200)
            .map(|i| {
                let t = i as f64 / 200.0;
                if t < 0.2 { t / 0.2 } else { (-(t - 0.2) * 5.0).exp() }
            })
            .collect();
        let f = locate_fiducials(&beat, 250.0);
        assert_eq!(f.diastolic_peak, None);
    }

    #[test]
    fn single_gaussian_a_before_b() {
        let beat = gauss(200, &[(0.5, 0.1, 1.0)]);
        let f = locate_fiducials(&beat, 250.0);
        let (a, b) = (f.a_wave.unwrap(), f.b_wave.unwrap());
        assert!(a < b);
        // second derivative of a Gaussian: maxima at ±sqrt(3)σ, minimum at the centre
        let sigma = 0.1 * 200.0;
        assert!((a as f64 - (100.0 - 3f64.sqrt() * sigma)).abs() <= 3.0, "a={a}");
        assert!((b as i64 - 100).abs() <= 2, "b={b}");
    }
}
