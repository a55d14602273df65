use alloc::vec::Vec;
use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

/// Indices of a class-balanced subset: every minority example plus a uniform
/// sample without replacement of the majority class, in ascending order.
pub fn downsample_majority(labels: &[bool], seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass("downsample_majority"));
    }
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = seed::rng(seed);
    let mut out = minority.clone();
    out.extend(
        index::sample(&mut rng, majority.len(), minority.len())
            .into_iter()
            .map(|i| majority[i]),
    );
    out.sort_unstable();
    Ok(out)
}
