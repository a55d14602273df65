use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::config::ModelConfig;
use super::loss::batch_bce;
use super::network::{init_weights, ModelWeights};
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::preprocess::{CleanedRecord, SegmentMode};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub bn_momentum: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            max_epochs: 50,
            batch_size: 64,
            adam: AdamConfig::default(),
            bn_momentum: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LabeledRecord<'a> {
    pub record: &'a CleanedRecord,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_roc_auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub epochs: Vec<EpochLog>,
    /// Index into `epochs` of the first epoch with maximal validation ROC-AUC.
    pub best_epoch: usize,
    pub weights: ModelWeights,
    pub optimizer: AdamState,
}

const EVAL_CHUNK: usize = 64;

/// Mean eval-mode probability over a recording's segments, summed in sorted
/// order so the result does not depend on segment order.
pub fn predict_recording(weights: &ModelWeights, segments: &[&[f64]]) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::UnusableRecording);
    }
    let mut probs = Vec::with_capacity(segments.len());
    for chunk in segments.chunks(EVAL_CHUNK) {
        probs.extend(weights.predict(chunk)?);
    }
    probs.sort_by(f64::total_cmp);
    Ok(probs.iter().sum::<f64>() / probs.len() as f64)
}

/// Scores a cleaned recording from its tiled test segments.
pub fn predict_cleaned(weights: &ModelWeights, rec: &CleanedRecord) -> Result<f64> {
    let mut rng = seed::rng(0);
    let segs = rec.windows(SegmentMode::TestTiled, &mut rng);
    let views: Vec<&[f64]> = segs.iter().map(|s| s.samples.as_slice()).collect();
    predict_recording(weights, &views)
}

/// Mini-batch training with one fresh random crop per training record per
/// epoch; keeps the weights of the epoch with the best validation ROC-AUC.
pub fn train(
    config: &ModelConfig,
    train_set: &[LabeledRecord<'_>],
    val_set: &[LabeledRecord<'_>],
    hyper: &TrainHyper,
    seed: u64,
) -> Result<TrainRun> {
    if hyper.batch_size == 0 {
        return Err(Error::validation("batch_size", "must be positive"));
    }
    for r in train_set.iter().chain(val_set) {
        if r.record.segment_len != config.input_len {
            return Err(Error::ShapeMismatch {
                expected: config.input_len,
                got: r.record.segment_len,
            });
        }
    }
    if !train_set.iter().any(|r| r.label) || train_set.iter().all(|r| r.label) {
        return Err(Error::SingleClass("training set"));
    }
    if !val_set.iter().any(|r| r.label) || val_set.iter().all(|r| r.label) {
        return Err(Error::SingleClass("validation set"));
    }
    let val_labels: Vec<bool> = val_set.iter().map(|r| r.label).collect();

    let mut weights = init_weights(config, config.seed)?;
    let mut opt = AdamState::new(hyper.adam.clone(), weights.param_count());
    let mut rng = seed::child_rng(seed, "train");
    let mut epochs = Vec::with_capacity(hyper.max_epochs);
    let mut best: Option<(usize, f64, ModelWeights)> = None;

    for epoch in 0..hyper.max_epochs {
        let mut crops: Vec<(Vec<f64>, bool)> = Vec::with_capacity(train_set.len());
        for r in train_set {
            if let Some(seg) = r.record.windows(SegmentMode::TrainRandomCrop, &mut rng).pop() {
                crops.push((seg.samples, r.label));
            }
        }
        crops.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in crops.chunks(hyper.batch_size) {
            let views: Vec<&[f64]> = batch.iter().map(|(s, _)| s.as_slice()).collect();
            let labels: Vec<bool> = batch.iter().map(|&(_, l)| l).collect();
            let cache = weights.forward_train(&views)?;
            let (loss, d_probs) = batch_bce(&labels, &cache.probs);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let grad = weights.backward(&cache, &d_probs);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, loss: f64::NAN });
            }
            opt.step(&mut weights.params, &grad);
            weights.update_running(&cache.batch_stats(), hyper.bn_momentum);
            loss_sum += loss * batch.len() as f64;
        }
        let train_loss = if crops.is_empty() { 0.0 } else { loss_sum / crops.len() as f64 };

        let mut scores = Vec::with_capacity(val_set.len());
        for r in val_set {
            scores.push(predict_cleaned(&weights, r.record)?);
        }
        let val_roc_auc = roc_auc(&scores, &val_labels)?;
        log::debug!("epoch {epoch}: loss {train_loss:.5} val auc {val_roc_auc:.4}");
        epochs.push(EpochLog {
            epoch,
            train_loss,
            val_roc_auc,
        });
        if best.as_ref().is_none_or(|b| val_roc_auc > b.1) {
            best = Some((epoch, val_roc_auc, weights.clone()));
        }
    }
    let (best_epoch, weights) = match best {
        Some((e, _, w)) => (e, w),
        None => (0, weights),
    };
    Ok(TrainRun {
        epochs,
        best_epoch,
        weights,
        optimizer: opt,
    })
}
