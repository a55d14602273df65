use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Subject;
use crate::error::{Error, Result};
use crate::seed;

/// Partition of subject ids into `k` disjoint folds, each sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn fold_of(&self, subject_id: &str) -> Option<usize> {
        self.folds
            .iter()
            .position(|f| f.binary_search_by(|s| s.as_str().cmp(subject_id)).is_ok())
    }
}

/// Shuffles each class and deals positives then negatives round-robin, the
/// negatives continuing from the fold after the last positive so fold sizes
/// differ by at most one.
pub fn make_folds(subjects: &[Subject], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::validation("k", "need at least 2 folds"));
    }
    let mut pos: Vec<&str> = subjects.iter().filter(|s| s.label).map(|s| s.subject_id.as_str()).collect();
    let mut neg: Vec<&str> = subjects.iter().filter(|s| !s.label).map(|s| s.subject_id.as_str()).collect();
    let fewest = pos.len().min(neg.len());
    if fewest < k {
        return Err(Error::TooFewSubjects { k, got: fewest });
    }
    // sort first so the plan does not depend on input order
    pos.sort_unstable();
    neg.sort_unstable();
    let mut rng = seed::child_rng(seed, "folds");
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds: Vec<Vec<String>> = alloc::vec![Vec::new(); k];
    for (i, id) in pos.iter().chain(neg.iter()).enumerate() {
        folds[i % k].push(String::from(*id));
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}
