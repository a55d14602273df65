//! Report, curve, feature, log and manifest files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use ppg_screen_core::eval::{EvalReport, MetricSet};
use ppg_screen_core::features::{FeatureVector, FEATURE_NAMES};
use ppg_screen_core::model::EpochLog;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Provenance;
use crate::error::{Error, Result};
use crate::io;

/// EvalReport as written by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub provenance: Provenance,
    pub report: EvalReport,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = io::create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let text = io::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, format!("not a report: {e}")))
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(io::create(path)?);
    let wrap = |e: csv::Error| Error::io(path, e.into());
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_roc_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let pts = report.roc_curve()?;
    write_csv(
        path,
        ["fpr", "tpr", "threshold"],
        pts.iter().map(|p| [p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()]),
    )
}

pub fn write_pr_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let pts = report.pr_curve()?;
    write_csv(
        path,
        ["recall", "precision", "threshold"],
        pts.iter().map(|p| [p.recall.to_string(), p.precision.to_string(), p.threshold.to_string()]),
    )
}

pub fn write_training_log(path: &Path, epochs: &[EpochLog]) -> Result<()> {
    write_csv(
        path,
        ["epoch", "train_loss", "val_roc_auc"],
        epochs.iter().map(|e| [e.epoch.to_string(), e.train_loss.to_string(), e.val_roc_auc.to_string()]),
    )
}

/// One row per subject: `subject_id,label,<features>`; missing values are empty.
pub fn write_features(path: &Path, rows: &[(String, bool, FeatureVector)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(io::create(path)?);
    let wrap = |e: csv::Error| Error::io(path, e.into());
    let mut header = vec!["subject_id", "label"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header).map_err(wrap)?;
    for (id, label, f) in rows {
        let mut rec = vec![id.clone(), u8::from(*label).to_string()];
        rec.extend(f.values().iter().map(|v| v.map_or_else(String::new, |x| x.to_string())));
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

/// `manifest.json`: provenance plus a digest of every file a command wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: Provenance,
    pub artifacts: Vec<Artifact>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_manifest(dir: &Path, provenance: &Provenance, files: &[PathBuf]) -> Result<()> {
    let mut artifacts = Vec::with_capacity(files.len());
    for f in files {
        let bytes = std::fs::read(f).map_err(|e| Error::io(f, e))?;
        let digest = Sha256::digest(&bytes);
        artifacts.push(Artifact {
            file: f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            sha256: digest.iter().fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            }),
        });
    }
    let m = Manifest {
        provenance: provenance.clone(),
        artifacts,
    };
    write_json(&dir.join(MANIFEST_FILE), &m)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{:.1}", 100.0 * x))
}

fn row(name: &str, params: usize, m: &MetricSet) -> [String; 8] {
    [
        name.to_owned(),
        params.to_string(),
        pct(m.confusion.precision),
        pct(m.confusion.sensitivity),
        pct(m.confusion.specificity),
        pct(m.roc_auc),
        pct(m.pr_auc),
        format!("{}/{}", m.n_positive, m.n_subjects),
    ]
}

/// Pooled subject-level metrics as a fixed-width table (percentages), with
/// one line per fold under each model when `per_fold` is set.
pub fn render_table(reports: &[EvalReport], per_fold: bool) -> String {
    let header = ["Model", "Params", "Precision", "Sensitivity", "Specificity", "ROC_AUC", "PR_AUC", "Pos/N"];
    let mut rows = vec![header.map(str::to_owned)];
    for r in reports {
        rows.push(row(r.model.name(), r.param_count, &r.pooled));
        if per_fold {
            for f in &r.folds {
                rows.push(row(&format!("  fold {}", f.fold), r.param_count, &f.metrics));
            }
        }
    }
    let widths: Vec<usize> = (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap()).collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}
