use alloc::vec::Vec;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::config::{ModelConfig, ParamLayout};
use super::layers::{self, BnCache};
use crate::error::{Error, Result};
use crate::math;
use crate::seed;

/// Learnable parameters and batch-norm running statistics, stored flat in
/// [`ParamLayout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    pub running: Vec<f64>,
}

/// He-scaled normal weights, zero biases, unit BN scale, zero BN shift,
/// running mean 0 and variance 1.
pub fn init_weights(config: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    let layout = ParamLayout::new(config)?;
    let mut rng = seed::rng(seed);
    let mut params = alloc::vec![0.0; layout.n_params];
    let mut he = |r: core::ops::Range<usize>, fan_in: usize, params: &mut [f64]| {
        let sd = math::sqrt(2.0 / fan_in as f64);
        for v in &mut params[r] {
            *v = sd * rng.sample::<f64, _>(StandardNormal);
        }
    };
    let c1 = &layout.conv1;
    he(c1.w.clone(), c1.in_ch * c1.kernel, &mut params);
    for b in &layout.blocks {
        he(b.conv_a.w.clone(), b.conv_a.in_ch * b.conv_a.kernel, &mut params);
        he(b.conv_b.w.clone(), b.conv_b.in_ch * b.conv_b.kernel, &mut params);
    }
    he(layout.fc1.w.clone(), layout.fc1.inputs, &mut params);
    he(layout.fc2.w.clone(), layout.fc2.inputs, &mut params);
    let mut bns = alloc::vec![&layout.bn1];
    for b in &layout.blocks {
        bns.push(&b.bn_a);
        bns.push(&b.bn_b);
    }
    let mut running = alloc::vec![0.0; layout.n_running];
    for bn in bns {
        params[bn.gamma.clone()].iter_mut().for_each(|v| *v = 1.0);
        running[bn.var.clone()].iter_mut().for_each(|v| *v = 1.0);
    }
    Ok(ModelWeights {
        config: config.clone(),
        layout,
        params,
        running,
    })
}

/// Sigmoid kept strictly inside (0, 1) even for saturated logits.
fn output(z: f64) -> f64 {
    math::sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

struct BlockCache {
    input: Vec<f64>,
    bn_a: BnCache,
    act_a: Vec<f64>,
    bn_b: BnCache,
    out: Vec<f64>,
}

/// Activations kept by a training-mode forward pass for [`ModelWeights::backward`].
pub struct ForwardCache {
    batch: usize,
    input: Vec<f64>,
    bn1: BnCache,
    act1: Vec<f64>,
    pool1_idx: Vec<u32>,
    blocks: Vec<BlockCache>,
    pool2_idx: Vec<u32>,
    flat: Vec<f64>,
    hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Batch means and unbiased variances of every batch-norm layer, in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats(pub Vec<(Vec<f64>, Vec<f64>)>);

impl ForwardCache {
    pub fn batch_stats(&self) -> BatchStats {
        let mut v = alloc::vec![(self.bn1.mean.clone(), self.bn1.var_unbiased.clone())];
        for b in &self.blocks {
            v.push((b.bn_a.mean.clone(), b.bn_a.var_unbiased.clone()));
            v.push((b.bn_b.mean.clone(), b.bn_b.var_unbiased.clone()));
        }
        BatchStats(v)
    }
}

impl ModelWeights {
    pub fn param_count(&self) -> usize {
        self.layout.n_params
    }

    fn check_batch(&self, batch: &[&[f64]]) -> Result<()> {
        for s in batch {
            if s.len() != self.config.input_len {
                return Err(Error::ShapeMismatch {
                    expected: self.config.input_len,
                    got: s.len(),
                });
            }
        }
        Ok(())
    }

    /// Eval-mode probabilities using running batch-norm statistics. Each
    /// output depends only on its own input.
    pub fn predict(&self, batch: &[&[f64]]) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let l = &self.layout;
        let sh = l.shapes;
        let (n, c) = (batch.len(), sh.channels);
        let p = &self.params;
        let input: Vec<f64> = batch.iter().flat_map(|s| s.iter().copied()).collect();
        let mut x = Vec::new();
        layers::conv_forward(p, &l.conv1, &input, n, self.config.input_len, sh.conv_len, &mut x);
        layers::bn_forward_eval(p, &self.running, &l.bn1, &mut x, n, c, sh.conv_len);
        layers::relu_inplace(&mut x);
        let mut h = Vec::new();
        layers::maxpool_forward(&x, n * c, sh.conv_len, self.config.pool, &mut h, false);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for blk in &l.blocks {
            layers::conv_forward(p, &blk.conv_a, &h, n, sh.block_len, sh.block_len, &mut a);
            layers::bn_forward_eval(p, &self.running, &blk.bn_a, &mut a, n, c, sh.block_len);
            layers::relu_inplace(&mut a);
            layers::conv_forward(p, &blk.conv_b, &a, n, sh.block_len, sh.block_len, &mut b);
            layers::bn_forward_eval(p, &self.running, &blk.bn_b, &mut b, n, c, sh.block_len);
            for (v, s) in b.iter_mut().zip(&h) {
                *v += s;
            }
            layers::relu_inplace(&mut b);
            core::mem::swap(&mut h, &mut b);
        }
        let mut flat = Vec::new();
        layers::maxpool_forward(&h, n * c, sh.block_len, self.config.pool, &mut flat, false);
        let mut hidden = Vec::new();
        layers::fc_forward(p, &l.fc1, &flat, n, &mut hidden);
        layers::relu_inplace(&mut hidden);
        let mut logits = Vec::new();
        layers::fc_forward(p, &l.fc2, &hidden, n, &mut logits);
        Ok(logits.into_iter().map(output).collect())
    }

    /// Training-mode forward pass with batch statistics. Running statistics
    /// are left untouched; apply [`ModelWeights::update_running`] separately.
    pub fn forward_train(&self, batch: &[&[f64]]) -> Result<ForwardCache> {
        self.check_batch(batch)?;
        if batch.is_empty() {
            return Err(Error::validation("batch", "empty"));
        }
        let l = &self.layout;
        let sh = l.shapes;
        let (n, c) = (batch.len(), sh.channels);
        let p = &self.params;
        let input: Vec<f64> = batch.iter().flat_map(|s| s.iter().copied()).collect();
        let mut act1 = Vec::new();
        layers::conv_forward(p, &l.conv1, &input, n, self.config.input_len, sh.conv_len, &mut act1);
        let bn1 = layers::bn_forward_train(p, &l.bn1, &mut act1, n, c, sh.conv_len);
        layers::relu_inplace(&mut act1);
        let mut h = Vec::new();
        let pool1_idx = layers::maxpool_forward(&act1, n * c, sh.conv_len, self.config.pool, &mut h, true);
        let mut blocks = Vec::with_capacity(l.blocks.len());
        for blk in &l.blocks {
            let mut act_a = Vec::new();
            layers::conv_forward(p, &blk.conv_a, &h, n, sh.block_len, sh.block_len, &mut act_a);
            let bn_a = layers::bn_forward_train(p, &blk.bn_a, &mut act_a, n, c, sh.block_len);
            layers::relu_inplace(&mut act_a);
            let mut out = Vec::new();
            layers::conv_forward(p, &blk.conv_b, &act_a, n, sh.block_len, sh.block_len, &mut out);
            let bn_b = layers::bn_forward_train(p, &blk.bn_b, &mut out, n, c, sh.block_len);
            for (v, s) in out.iter_mut().zip(&h) {
                *v += s;
            }
            layers::relu_inplace(&mut out);
            let next = out.clone();
            blocks.push(BlockCache {
                input: core::mem::replace(&mut h, next),
                bn_a,
                act_a,
                bn_b,
                out,
            });
        }
        let mut flat = Vec::new();
        let pool2_idx = layers::maxpool_forward(&h, n * c, sh.block_len, self.config.pool, &mut flat, true);
        let mut hidden = Vec::new();
        layers::fc_forward(p, &l.fc1, &flat, n, &mut hidden);
        layers::relu_inplace(&mut hidden);
        let mut logits = Vec::new();
        layers::fc_forward(p, &l.fc2, &hidden, n, &mut logits);
        let probs = logits.into_iter().map(output).collect();
        Ok(ForwardCache {
            batch: n,
            input,
            bn1,
            act1,
            pool1_idx,
            blocks,
            pool2_idx,
            flat,
            hidden,
            probs,
        })
    }

    /// Gradient of the loss with respect to every learnable parameter, given
    /// dLoss/dP for each batch element.
    pub fn backward(&self, cache: &ForwardCache, d_probs: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let sh = l.shapes;
        let (n, c) = (cache.batch, sh.channels);
        let p = &self.params;
        let mut grad = alloc::vec![0.0; l.n_params];

        let d_logit: Vec<f64> = d_probs
            .iter()
            .zip(&cache.probs)
            .map(|(d, &pr)| d * pr * (1.0 - pr))
            .collect();
        let mut d_hidden = layers::fc_backward(p, &l.fc2, &cache.hidden, &d_logit, n, &mut grad);
        layers::relu_backward(&cache.hidden, &mut d_hidden);
        let d_flat = layers::fc_backward(p, &l.fc1, &cache.flat, &d_hidden, n, &mut grad);
        let mut d_h = layers::maxpool_backward(&d_flat, &cache.pool2_idx, n * c, sh.block_len, sh.pooled_len);

        let mut d_a = Vec::new();
        let mut d_in = Vec::new();
        for (blk, bc) in l.blocks.iter().zip(&cache.blocks).rev() {
            // d_h holds dLoss/d(block output); after the ReLU it feeds both branches
            layers::relu_backward(&bc.out, &mut d_h);
            let mut d_main = d_h.clone();
            layers::bn_backward(p, &blk.bn_b, &bc.bn_b, &mut d_main, n, c, sh.block_len, &mut grad);
            layers::conv_backward(
                p, &blk.conv_b, &bc.act_a, &d_main, n, sh.block_len, sh.block_len, &mut grad, Some(&mut d_a),
            );
            layers::relu_backward(&bc.act_a, &mut d_a);
            layers::bn_backward(p, &blk.bn_a, &bc.bn_a, &mut d_a, n, c, sh.block_len, &mut grad);
            layers::conv_backward(
                p, &blk.conv_a, &bc.input, &d_a, n, sh.block_len, sh.block_len, &mut grad, Some(&mut d_in),
            );
            for (s, b) in d_h.iter_mut().zip(&d_in) {
                *s += b;
            }
        }
        let mut d_act1 = layers::maxpool_backward(&d_h, &cache.pool1_idx, n * c, sh.conv_len, sh.block_len);
        layers::relu_backward(&cache.act1, &mut d_act1);
        layers::bn_backward(p, &l.bn1, &cache.bn1, &mut d_act1, n, c, sh.conv_len, &mut grad);
        layers::conv_backward(
            p, &l.conv1, &cache.input, &d_act1, n, self.config.input_len, sh.conv_len, &mut grad, None,
        );
        grad
    }

    /// running ← momentum · running + (1 − momentum) · batch.
    pub fn update_running(&mut self, stats: &BatchStats, momentum: f64) {
        let mut bns = alloc::vec![&self.layout.bn1];
        for b in &self.layout.blocks {
            bns.push(&b.bn_a);
            bns.push(&b.bn_b);
        }
        for (bn, (mean, var)) in bns.into_iter().zip(&stats.0) {
            for (r, m) in self.running[bn.mean.clone()].iter_mut().zip(mean) {
                *r = momentum * *r + (1.0 - momentum) * m;
            }
            for (r, v) in self.running[bn.var.clone()].iter_mut().zip(var) {
                *r = momentum * *r + (1.0 - momentum) * v;
            }
        }
    }

    /// Named tensors (learnable first, then running statistics) in
    /// declaration order.
    pub fn tensors(&self) -> Vec<(&str, &[f64])> {
        let mut v: Vec<(&str, &[f64])> = self
            .layout
            .tensors
            .iter()
            .map(|(n, r)| (n.as_str(), &self.params[r.clone()]))
            .collect();
        v.extend(
            self.layout
                .running_tensors
                .iter()
                .map(|(n, r)| (n.as_str(), &self.running[r.clone()])),
        );
        v
    }

    /// Rebuilds weights from a config and tensors in [`ModelWeights::tensors`] order.
    pub fn from_tensors(config: &ModelConfig, tensors: &[Vec<f64>]) -> Result<Self> {
        let mut w = init_weights(config, 0)?;
        let layout = w.layout.clone();
        let expected = layout.tensors.len() + layout.running_tensors.len();
        if tensors.len() != expected {
            return Err(Error::validation("weights", alloc::format!("expected {expected} tensors, got {}", tensors.len())));
        }
        let slots = layout
            .tensors
            .iter()
            .map(|(n, r)| (n, r, false))
            .chain(layout.running_tensors.iter().map(|(n, r)| (n, r, true)));
        for ((name, range, running), t) in slots.zip(tensors) {
            if t.len() != range.len() {
                return Err(Error::validation(name, alloc::format!("expected {} values, got {}", range.len(), t.len())));
            }
            let dst = if running { &mut w.running } else { &mut w.params };
            dst[range.clone()].copy_from_slice(t);
        }
        if w.params.iter().chain(&w.running).any(|v| !v.is_finite()) {
            return Err(Error::validation("weights", "non-finite value"));
        }
        for bn in core::iter::once(&layout.bn1).chain(layout.blocks.iter().flat_map(|b| [&b.bn_a, &b.bn_b])) {
            if w.running[bn.var.clone()].iter().any(|&v| v <= 0.0) {
                return Err(Error::validation("weights", "running variance must be positive"));
            }
        }
        Ok(w)
    }
}



/// Central finite-difference check (h = 1e-3) of [`ModelWeights::backward`]
/// on a random batch of four, returning the relative error
/// `|analytic - numeric| / max(|analytic| + |numeric|, 1e-6)` per tensor.
#[doc(hidden)]
pub fn gradient_check(cfg: &ModelConfig, weight_seed: u64, input_seed: u64) -> Vec<(alloc::string::String, f64)> {
    use super::loss::batch_bce;
    use rand::Rng as _;

    let mut w = init_weights(cfg, weight_seed).expect("valid config");
    let mut rng = seed::rng(input_seed);
    // move batch-norm affine terms and biases off their initial values
    for (name, range) in w.layout.tensors.clone() {
        if name.contains("bn") || name.ends_with("bias") {
            for v in &mut w.params[range] {
                *v += 0.3 * (rng.random::<f64>() - 0.5);
            }
        }
    }
    let x: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..cfg.input_len).map(|_| rng.random::<f64>()).collect())
        .collect();
    let batch: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
    let labels = [true, false, false, true];
    let loss = |w: &ModelWeights| batch_bce(&labels, &w.forward_train(&batch).expect("shape").probs).0;

    let cache = w.forward_train(&batch).expect("shape");
    let (_, d) = batch_bce(&labels, &cache.probs);
    let grad = w.backward(&cache, &d);
    let h = 1e-3;
    let mut out = Vec::new();
    let mut wp = w.clone();
    for (name, range) in w.layout.tensors.clone() {
        let (mut num, mut na, mut nf) = (0.0, 0.0, 0.0);
        for i in range {
            wp.params[i] = w.params[i] + h;
            let lp = loss(&wp);
            wp.params[i] = w.params[i] - h;
            let lm = loss(&wp);
            wp.params[i] = w.params[i];
            let fd = (lp - lm) / (2.0 * h);
            num += (fd - grad[i]) * (fd - grad[i]);
            na += grad[i] * grad[i];
            nf += fd * fd;
        }
        let rel = math::sqrt(num) / (math::sqrt(na) + math::sqrt(nf)).max(1e-6);
        out.push((name, rel));
    }
    out
}
