use crate::math;

const P_MIN: f64 = 1e-7;

/// Binary cross-entropy for one prediction. Returns `(loss, dLoss/dP)`,
/// with `p` clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(g: bool, p: f64) -> (f64, f64) {
    let p = p.clamp(P_MIN, 1.0 - P_MIN);
    if g {
        (-math::ln(p), -1.0 / p)
    } else {
        (-math::ln(1.0 - p), 1.0 / (1.0 - p))
    }
}

/// Mean loss over a batch and the per-element gradient of that mean.
pub fn batch_bce(labels: &[bool], probs: &[f64]) -> (f64, alloc::vec::Vec<f64>) {
    let n = probs.len().max(1) as f64;
    let mut total = 0.0;
    let grads = labels
        .iter()
        .zip(probs)
        .map(|(&g, &p)| {
            let (l, d) = bce_loss(g, p);
            total += l;
            d / n
        })
        .collect();
    (total / n, grads)
}
