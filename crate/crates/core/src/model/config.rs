use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Residual blocks.
    pub n_blocks: usize,
    pub conv1_kernel: usize,
    pub conv1_channels: usize,
    pub conv1_stride: usize,
    pub block_kernel: usize,
    /// Max-pool factor after the stem and after the residual stage.
    pub pool: usize,
    pub fc_hidden: usize,
    pub input_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_blocks: 1,
            conv1_kernel: 15,
            conv1_channels: 32,
            conv1_stride: 4,
            block_kernel: 3,
            pool: 4,
            fc_hidden: 240,
            input_len: 1000,
            seed: 0,
        }
    }
}

/// Activation lengths through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shapes {
    pub channels: usize,
    /// After the stem convolution.
    pub conv_len: usize,
    /// After the first pool (length seen by the residual blocks).
    pub block_len: usize,
    /// After the second pool.
    pub pooled_len: usize,
    pub flat: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<Shapes> {
        let bad = |field: &str, why: String| Err(Error::validation(field, why));
        if self.n_blocks == 0 {
            return bad("model.n_blocks", "must be at least 1".into());
        }
        for (name, k) in [("model.conv1_kernel", self.conv1_kernel), ("model.block_kernel", self.block_kernel)] {
            if k % 2 == 0 {
                return bad(name, format!("kernel must be odd, got {k}"));
            }
        }
        if self.conv1_stride == 0 || self.pool == 0 || self.conv1_channels == 0 || self.fc_hidden == 0 {
            return bad("model", "stride, pool, channels and fc_hidden must be positive".into());
        }
        let pad = self.conv1_kernel / 2;
        if self.input_len + 2 * pad < self.conv1_kernel {
            return bad("model.input_len", format!("{} too short", self.input_len));
        }
        let conv_len = (self.input_len + 2 * pad - self.conv1_kernel) / self.conv1_stride + 1;
        let block_len = conv_len / self.pool;
        let pooled_len = block_len / self.pool;
        if pooled_len == 0 {
            return bad("model.input_len", format!("{} too short for the pooling stack", self.input_len));
        }
        Ok(Shapes {
            channels: self.conv1_channels,
            conv_len,
            block_len,
            pooled_len,
            flat: self.conv1_channels * pooled_len,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSlots {
    pub w: Range<usize>,
    pub b: Range<usize>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnSlots {
    pub gamma: Range<usize>,
    pub beta: Range<usize>,
    /// Ranges into the running-statistics buffer.
    pub mean: Range<usize>,
    pub var: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSlots {
    pub conv_a: ConvSlots,
    pub bn_a: BnSlots,
    pub conv_b: ConvSlots,
    pub bn_b: BnSlots,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FcSlots {
    pub w: Range<usize>,
    pub b: Range<usize>,
    pub inputs: usize,
    pub outputs: usize,
}

/// Offsets of every tensor inside the flat parameter and running-stat
/// buffers, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub shapes: Shapes,
    pub conv1: ConvSlots,
    pub bn1: BnSlots,
    pub blocks: Vec<BlockSlots>,
    pub fc1: FcSlots,
    pub fc2: FcSlots,
    pub n_params: usize,
    pub n_running: usize,
    /// (name, range into params) for every learnable tensor.
    pub tensors: Vec<(String, Range<usize>)>,
    /// (name, range into running stats).
    pub running_tensors: Vec<(String, Range<usize>)>,
}

struct Alloc {
    p: usize,
    r: usize,
    tensors: Vec<(String, Range<usize>)>,
    running: Vec<(String, Range<usize>)>,
}

impl Alloc {
    fn param(&mut self, name: String, n: usize) -> Range<usize> {
        let r = self.p..self.p + n;
        self.p += n;
        self.tensors.push((name, r.clone()));
        r
    }

    fn running(&mut self, name: String, n: usize) -> Range<usize> {
        let r = self.r..self.r + n;
        self.r += n;
        self.running.push((name, r.clone()));
        r
    }

    fn conv(&mut self, name: &str, in_ch: usize, out_ch: usize, kernel: usize, stride: usize) -> ConvSlots {
        ConvSlots {
            w: self.param(format!("{name}.weight"), out_ch * in_ch * kernel),
            b: self.param(format!("{name}.bias"), out_ch),
            in_ch,
            out_ch,
            kernel,
            stride,
            pad: kernel / 2,
        }
    }

    fn bn(&mut self, name: &str, ch: usize) -> BnSlots {
        BnSlots {
            gamma: self.param(format!("{name}.gamma"), ch),
            beta: self.param(format!("{name}.beta"), ch),
            mean: self.running(format!("{name}.running_mean"), ch),
            var: self.running(format!("{name}.running_var"), ch),
        }
    }

    fn fc(&mut self, name: &str, inputs: usize, outputs: usize) -> FcSlots {
        FcSlots {
            w: self.param(format!("{name}.weight"), outputs * inputs),
            b: self.param(format!("{name}.bias"), outputs),
            inputs,
            outputs,
        }
    }
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let shapes = cfg.validate()?;
        let c = shapes.channels;
        let mut a = Alloc {
            p: 0,
            r: 0,
            tensors: Vec::new(),
            running: Vec::new(),
        };
        let conv1 = a.conv("conv1", 1, c, cfg.conv1_kernel, cfg.conv1_stride);
        let bn1 = a.bn("bn1", c);
        let blocks = (0..cfg.n_blocks)
            .map(|i| BlockSlots {
                conv_a: a.conv(&format!("block{i}.conv_a"), c, c, cfg.block_kernel, 1),
                bn_a: a.bn(&format!("block{i}.bn_a"), c),
                conv_b: a.conv(&format!("block{i}.conv_b"), c, c, cfg.block_kernel, 1),
                bn_b: a.bn(&format!("block{i}.bn_b"), c),
            })
            .collect();
        let fc1 = a.fc("fc1", shapes.flat, cfg.fc_hidden);
        let fc2 = a.fc("fc2", cfg.fc_hidden, 1);
        Ok(ParamLayout {
            shapes,
            conv1,
            bn1,
            blocks,
            fc1,
            fc2,
            n_params: a.p,
            n_running: a.r,
            tensors: a.tensors,
            running_tensors: a.running,
        })
    }
}

/// Learnable parameters in closed form: convolution weights and biases,
/// batch-norm scale and shift, fully connected weights and biases. Running
/// statistics are not counted.
pub fn param_count(cfg: &ModelConfig) -> Result<usize> {
    let s = cfg.validate()?;
    let c = s.channels;
    let stem = c * cfg.conv1_kernel + c + 2 * c;
    let block = 2 * (c * c * cfg.block_kernel + c) + 4 * c;
    let head = s.flat * cfg.fc_hidden + cfg.fc_hidden + cfg.fc_hidden + 1;
    Ok(stem + cfg.n_blocks * block + head)
}
