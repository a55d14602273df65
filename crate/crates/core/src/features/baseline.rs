use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub l2: f64,
    pub learning_rate: f64,
    pub max_steps: usize,
    pub grad_tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            l2: 1e-3,
            learning_rate: 0.25,
            max_steps: 5000,
            grad_tol: 1e-6,
        }
    }
}

/// Logistic regression on standardised, median-imputed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub steps: usize,
}

impl LogisticModel {
    /// Every weight zero: predicts 0.5 everywhere.
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            medians: alloc::vec![0.0; dim],
            means: alloc::vec![0.0; dim],
            sds: alloc::vec![1.0; dim],
            weights: alloc::vec![0.0; dim],
            bias: 0.0,
            steps: 0,
        }
    }

    fn standardize(&self, row: &[Option<f64>], out: &mut [f64]) {
        for j in 0..out.len() {
            let v = row[j].unwrap_or(self.medians[j]);
            out[j] = (v - self.means[j]) / self.sds[j];
        }
    }

    pub fn predict(&self, row: &[Option<f64>]) -> f64 {
        let mut z = alloc::vec![0.0; self.weights.len()];
        self.standardize(row, &mut z);
        math::sigmoid(self.bias + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Full-batch gradient descent on mean BCE + (l2 / 2)·‖w‖² (bias not
    /// penalised), stopping once the gradient norm drops below `grad_tol`.
    pub fn fit(rows: &[Vec<Option<f64>>], labels: &[bool], cfg: &BaselineConfig) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch(rows.len(), labels.len()));
        }
        let n_pos = labels.iter().filter(|&&l| l).count();
        if n_pos == 0 || n_pos == labels.len() {
            return Err(Error::SingleClass("baseline training labels"));
        }
        let dim = rows[0].len();
        let mut model = LogisticModel::zeros(dim);
        for j in 0..dim {
            let present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
            model.medians[j] = math::median(&present).unwrap_or(0.0);
            let imputed: Vec<f64> = rows.iter().map(|r| r[j].unwrap_or(model.medians[j])).collect();
            model.means[j] = math::mean(&imputed);
            let sd = math::std_dev(&imputed);
            model.sds[j] = if sd > 1e-12 { sd } else { 1.0 };
        }
        let x: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut z = alloc::vec![0.0; dim];
                model.standardize(r, &mut z);
                z
            })
            .collect();
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let n = x.len() as f64;
        let mut gw = alloc::vec![0.0; dim];
        for step in 0..cfg.max_steps {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (xi, yi) in x.iter().zip(&y) {
                let p = math::sigmoid(model.bias + xi.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>());
                let r = (p - yi) / n;
                gb += r;
                for (g, v) in gw.iter_mut().zip(xi) {
                    *g += r * v;
                }
            }
            for (g, w) in gw.iter_mut().zip(&model.weights) {
                *g += cfg.l2 * w;
            }
            let norm = math::sqrt(gb * gb + gw.iter().map(|g| g * g).sum::<f64>());
            model.steps = step;
            if norm < cfg.grad_tol {
                break;
            }
            model.bias -= cfg.learning_rate * gb;
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= cfg.learning_rate * g;
            }
        }
        Ok(model)
    }
}

pub fn baseline_train(
    features: &[super::FeatureVector],
    labels: &[bool],
    cfg: &BaselineConfig,
) -> Result<LogisticModel> {
    let rows: Vec<Vec<Option<f64>>> = features.iter().map(|f| f.0.to_vec()).collect();
    LogisticModel::fit(&rows, labels, cfg)
}

pub fn baseline_predict(model: &LogisticModel, features: &super::FeatureVector) -> f64 {
    model.predict(&features.0)
}
