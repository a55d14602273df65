use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan};
use super::metrics::{confusion, pr_auc, pr_curve, roc_auc, roc_curve, Confusion, PrPoint, RocPoint};
use crate::data::{Dataset, RecordKind, Subject, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::features::{baseline_predict, baseline_train, record_features, BaselineConfig, LogisticModel, N_FEATURES};
use crate::model::{self, downsample_majority, predict_cleaned, EpochLog, LabeledRecord, ModelConfig, ModelWeights, TrainHyper};
use crate::preprocess::{clean_record, CleanedRecord, PreprocessConfig};
use crate::{math, seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Resnet,
    Baseline,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Resnet => "resnet",
            ModelKind::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    /// Decision threshold on the positive ratio.
    pub threshold: f64,
    pub min_effective_days: usize,
    /// Fraction of each class among training subjects held out for epoch selection.
    pub val_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 5,
            threshold: 0.5,
            min_effective_days: 1,
            val_fraction: 0.1,
        }
    }
}

/// Everything a cross-validation run depends on besides data and seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub train: TrainHyper,
    pub baseline: BaselineConfig,
    pub eval: EvalConfig,
}

/// Scores one cleaned recording; `None` marks it unusable.
pub trait RecordScorer {
    fn score_record(&self, rec: &CleanedRecord) -> Result<Option<f64>>;
}

impl RecordScorer for ModelWeights {
    fn score_record(&self, rec: &CleanedRecord) -> Result<Option<f64>> {
        if !rec.usable || rec.tiled_count() == 0 {
            return Ok(None);
        }
        predict_cleaned(self, rec).map(Some)
    }
}

impl RecordScorer for LogisticModel {
    fn score_record(&self, rec: &CleanedRecord) -> Result<Option<f64>> {
        if !rec.usable {
            return Ok(None);
        }
        match record_features(rec) {
            Ok(f) => Ok(Some(baseline_predict(self, &f))),
            Err(Error::NoUsableBeats) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject_id: String,
    pub label: bool,
    pub fold: usize,
    pub recording_probs: Vec<f64>,
    pub positive_ratio: f64,
    pub n_recordings: usize,
    pub n_effective_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub subject_id: String,
    pub label: bool,
    pub fold: usize,
    pub n_usable_recordings: usize,
    pub n_effective_days: usize,
}

/// Record-kind and subject-overlap counters proving the train/test protocol.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub spot_records_trained: usize,
    pub background_records_trained: usize,
    pub spot_records_scored: usize,
    pub background_records_scored: usize,
    pub train_test_overlap: usize,
}

impl Audit {
    fn add(&mut self, o: &Audit) {
        self.spot_records_trained += o.spot_records_trained;
        self.background_records_trained += o.background_records_trained;
        self.spot_records_scored += o.spot_records_scored;
        self.background_records_scored += o.background_records_scored;
        self.train_test_overlap += o.train_test_overlap;
    }

    pub fn is_clean(&self) -> bool {
        self.spot_records_scored == 0 && self.background_records_trained == 0 && self.train_test_overlap == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub n_subjects: usize,
    pub n_positive: usize,
    pub confusion: Confusion,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
}

/// Metrics over subject scores, ranked ties broken by subject id.
pub fn subject_metrics(scores: &[SubjectScore], threshold: f64) -> Result<MetricSet> {
    let mut sorted: Vec<&SubjectScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    let s: Vec<f64> = sorted.iter().map(|x| x.positive_ratio).collect();
    let y: Vec<bool> = sorted.iter().map(|x| x.label).collect();
    Ok(MetricSet {
        n_subjects: s.len(),
        n_positive: y.iter().filter(|&&v| v).count(),
        confusion: confusion(&s, &y, threshold)?,
        roc_auc: roc_auc(&s, &y).ok(),
        pr_auc: pr_auc(&s, &y).ok(),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredSubjects {
    pub scores: Vec<SubjectScore>,
    pub excluded: Vec<Excluded>,
    pub spot_records_scored: usize,
    pub background_records_scored: usize,
}

/// Positive ratio per subject over usable background recordings. Spot-check
/// recordings are ignored. Subjects with fewer than `min_effective_days`
/// distinct days of usable recordings go to `excluded`.
pub fn score_subjects<S: RecordScorer + ?Sized>(
    scorer: &S,
    subjects: &[&Subject],
    records: &[&CleanedRecord],
    min_effective_days: usize,
    fold: usize,
) -> Result<ScoredSubjects> {
    let mut by_subject: BTreeMap<&str, Vec<&CleanedRecord>> = BTreeMap::new();
    for r in records {
        if r.kind == RecordKind::Background {
            by_subject.entry(r.subject_id.as_str()).or_default().push(r);
        }
    }
    let mut out = ScoredSubjects::default();
    let mut ordered: Vec<&Subject> = subjects.to_vec();
    ordered.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    for s in ordered {
        let mut recs = by_subject.remove(s.subject_id.as_str()).unwrap_or_default();
        recs.sort_by_key(|r| r.start_time);
        let mut probs = Vec::new();
        let mut days = BTreeSet::new();
        for r in recs {
            if let Some(p) = scorer.score_record(r)? {
                match r.kind {
                    RecordKind::SpotCheck => out.spot_records_scored += 1,
                    RecordKind::Background => out.background_records_scored += 1,
                }
                probs.push(p);
                days.insert(r.start_time.div_euclid(SECONDS_PER_DAY));
            }
        }
        if probs.is_empty() || days.len() < min_effective_days {
            out.excluded.push(Excluded {
                subject_id: s.subject_id.clone(),
                label: s.label,
                fold,
                n_usable_recordings: probs.len(),
                n_effective_days: days.len(),
            });
            continue;
        }
        let mut sorted = probs.clone();
        sorted.sort_by(f64::total_cmp);
        let ratio = sorted.iter().sum::<f64>() / sorted.len() as f64;
        out.scores.push(SubjectScore {
            subject_id: s.subject_id.clone(),
            label: s.label,
            fold,
            n_recordings: probs.len(),
            recording_probs: probs,
            positive_ratio: ratio,
            n_effective_days: days.len(),
        });
    }
    Ok(out)
}

/// Cleans every record of a dataset, in dataset order.
pub fn clean_dataset(ds: &Dataset, cfg: &PreprocessConfig) -> Result<Vec<CleanedRecord>> {
    ds.records().iter().map(|r| clean_record(r, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub seed: u64,
    pub train_subjects: Vec<String>,
    pub val_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub n_train_records: usize,
    pub n_val_records: usize,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub scored: ScoredSubjects,
    pub audit: Audit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub seed: u64,
    pub n_train_subjects: usize,
    pub n_val_subjects: usize,
    pub n_test_subjects: usize,
    pub n_train_records: usize,
    pub n_val_records: usize,
    pub best_epoch: Option<usize>,
    pub epochs: Vec<EpochLog>,
    pub metrics: MetricSet,
    pub audit: Audit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub seed: u64,
    pub param_count: usize,
    pub config: CvConfig,
    pub folds: Vec<FoldSummary>,
    pub pooled: MetricSet,
    pub subjects: Vec<SubjectScore>,
    pub excluded: Vec<Excluded>,
    pub audit: Audit,
}

impl EvalReport {
    fn pooled_arrays(&self) -> (Vec<f64>, Vec<bool>) {
        (
            self.subjects.iter().map(|s| s.positive_ratio).collect(),
            self.subjects.iter().map(|s| s.label).collect(),
        )
    }

    pub fn roc_curve(&self) -> Result<Vec<RocPoint>> {
        let (s, y) = self.pooled_arrays();
        roc_curve(&s, &y)
    }

    pub fn pr_curve(&self) -> Result<Vec<PrPoint>> {
        let (s, y) = self.pooled_arrays();
        pr_curve(&s, &y)
    }
}

pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed::derive_seed(seed, &format!("fold{fold}"))
}

pub fn model_param_count(kind: ModelKind, cfg: &ModelConfig) -> Result<usize> {
    match kind {
        ModelKind::Resnet => model::param_count(cfg),
        ModelKind::Baseline => Ok(N_FEATURES + 1),
    }
}

/// Moves a stratified share of each class into a validation list, keeping
/// at least one subject of each class on both sides.
fn split_validation<'a>(subjects: &[&'a Subject], fraction: f64, seed: u64) -> (Vec<&'a Subject>, Vec<&'a Subject>) {
    let mut rng = seed::child_rng(seed, "validation");
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in [true, false] {
        let mut group: Vec<&Subject> = subjects.iter().copied().filter(|s| s.label == class).collect();
        group.shuffle(&mut rng);
        let want = (math::round(fraction * group.len() as f64) as usize).max(1);
        let n_val = want.min(group.len().saturating_sub(1));
        val.extend_from_slice(&group[..n_val]);
        train.extend_from_slice(&group[n_val..]);
    }
    train.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    val.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    (train, val)
}

fn ids(xs: &[&Subject]) -> Vec<String> {
    xs.iter().map(|s| s.subject_id.clone()).collect()
}

/// Trains on spot-check recordings of the fold's training subjects and scores
/// background recordings of its test subjects.
pub fn run_fold(
    ds: &Dataset,
    cleaned: &[CleanedRecord],
    plan: &FoldPlan,
    fold: usize,
    kind: ModelKind,
    cfg: &CvConfig,
    seed: u64,
) -> Result<FoldOutcome> {
    inner_fold(ds, cleaned, plan, fold, kind, cfg, seed).map_err(|e| Error::Fold {
        fold,
        source: alloc::boxed::Box::new(e),
    })
}

/// A model fitted on one pool of subjects.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Resnet(alloc::boxed::Box<ModelWeights>),
    Baseline(LogisticModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Resnet(_) => ModelKind::Resnet,
            FittedModel::Baseline(_) => ModelKind::Baseline,
        }
    }
}

impl RecordScorer for FittedModel {
    fn score_record(&self, rec: &CleanedRecord) -> Result<Option<f64>> {
        match self {
            FittedModel::Resnet(w) => w.score_record(rec),
            FittedModel::Baseline(m) => m.score_record(rec),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub model: FittedModel,
    pub train_subjects: Vec<String>,
    pub val_subjects: Vec<String>,
    pub n_train_records: usize,
    pub n_val_records: usize,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub spot_records_trained: usize,
    pub background_records_trained: usize,
}

/// Fits a model on the spot-check recordings of `pool`: a stratified
/// validation share is held out for epoch selection and the rest is
/// downsampled to balanced classes. `cleaned` is parallel to `ds.records()`.
pub fn fit_model(
    ds: &Dataset,
    cleaned: &[CleanedRecord],
    pool: &[&Subject],
    kind: ModelKind,
    cfg: &CvConfig,
    seed: u64,
) -> Result<Fit> {
    if cleaned.len() != ds.records().len() {
        return Err(Error::LengthMismatch(cleaned.len(), ds.records().len()));
    }
    let (fit_pool, val) = split_validation(pool, cfg.eval.val_fraction, seed);
    let labels: Vec<bool> = fit_pool.iter().map(|s| s.label).collect();
    let keep = downsample_majority(&labels, seed::derive_seed(seed, "downsample"))?;
    let train_subjects: Vec<&Subject> = keep.iter().map(|&i| fit_pool[i]).collect();

    let label_of: BTreeMap<&str, bool> = ds.subjects().iter().map(|s| (s.subject_id.as_str(), s.label)).collect();
    let train_ids: BTreeSet<&str> = train_subjects.iter().map(|s| s.subject_id.as_str()).collect();
    let val_ids: BTreeSet<&str> = val.iter().map(|s| s.subject_id.as_str()).collect();
    let trainable = |r: &CleanedRecord| r.kind == RecordKind::SpotCheck && r.usable && r.tiled_count() > 0;
    let pick = |set: &BTreeSet<&str>| -> Vec<LabeledRecord<'_>> {
        cleaned
            .iter()
            .filter(|r| set.contains(r.subject_id.as_str()) && trainable(r))
            .map(|r| LabeledRecord {
                record: r,
                label: label_of[r.subject_id.as_str()],
            })
            .collect()
    };
    let train_set = pick(&train_ids);
    let val_set = pick(&val_ids);
    let (mut spot, mut background) = (0, 0);
    for r in train_set.iter().chain(&val_set) {
        match r.record.kind {
            RecordKind::SpotCheck => spot += 1,
            RecordKind::Background => background += 1,
        }
    }

    let (model, epochs, best_epoch) = match kind {
        ModelKind::Resnet => {
            let mcfg = ModelConfig {
                seed: seed::derive_seed(seed, "init"),
                ..cfg.model.clone()
            };
            let run = model::train(&mcfg, &train_set, &val_set, &cfg.train, seed::derive_seed(seed, "train"))?;
            (FittedModel::Resnet(alloc::boxed::Box::new(run.weights)), run.epochs, Some(run.best_epoch))
        }
        ModelKind::Baseline => {
            let mut feats = Vec::with_capacity(train_set.len());
            let mut ys = Vec::with_capacity(train_set.len());
            for r in &train_set {
                match record_features(r.record) {
                    Ok(f) => {
                        feats.push(f);
                        ys.push(r.label);
                    }
                    Err(Error::NoUsableBeats) => {}
                    Err(e) => return Err(e),
                }
            }
            let m = baseline_train(&feats, &ys, &cfg.baseline)?;
            (FittedModel::Baseline(m), Vec::new(), None)
        }
    };
    Ok(Fit {
        model,
        train_subjects: ids(&train_subjects),
        val_subjects: ids(&val),
        n_train_records: train_set.len(),
        n_val_records: val_set.len(),
        epochs,
        best_epoch,
        spot_records_trained: spot,
        background_records_trained: background,
    })
}

fn inner_fold(
    ds: &Dataset,
    cleaned: &[CleanedRecord],
    plan: &FoldPlan,
    fold: usize,
    kind: ModelKind,
    cfg: &CvConfig,
    seed: u64,
) -> Result<FoldOutcome> {
    let fseed = fold_seed(seed, fold);
    let test_ids: BTreeSet<&str> = plan.folds[fold].iter().map(String::as_str).collect();
    let test: Vec<&Subject> = ds.subjects().iter().filter(|s| test_ids.contains(s.subject_id.as_str())).collect();
    let pool: Vec<&Subject> = ds.subjects().iter().filter(|s| !test_ids.contains(s.subject_id.as_str())).collect();
    let fit = fit_model(ds, cleaned, &pool, kind, cfg, fseed)?;

    let mut audit = Audit {
        spot_records_trained: fit.spot_records_trained,
        background_records_trained: fit.background_records_trained,
        ..Audit::default()
    };
    audit.train_test_overlap = fit
        .train_subjects
        .iter()
        .chain(&fit.val_subjects)
        .filter(|id| test_ids.contains(id.as_str()))
        .count();

    let test_records: Vec<&CleanedRecord> = cleaned.iter().filter(|r| test_ids.contains(r.subject_id.as_str())).collect();
    let scored = score_subjects(&fit.model, &test, &test_records, cfg.eval.min_effective_days, fold)?;
    audit.spot_records_scored = scored.spot_records_scored;
    audit.background_records_scored = scored.background_records_scored;
    Ok(FoldOutcome {
        fold,
        seed: fseed,
        train_subjects: fit.train_subjects,
        val_subjects: fit.val_subjects,
        test_subjects: ids(&test),
        n_train_records: fit.n_train_records,
        n_val_records: fit.n_val_records,
        epochs: fit.epochs,
        best_epoch: fit.best_epoch,
        scored,
        audit,
    })
}

/// Joins fold outcomes (any order) into a report with per-fold and pooled metrics.
pub fn assemble_report(
    mut outcomes: Vec<FoldOutcome>,
    kind: ModelKind,
    cfg: &CvConfig,
    seed: u64,
) -> Result<EvalReport> {
    outcomes.sort_by_key(|o| o.fold);
    let mut folds = Vec::with_capacity(outcomes.len());
    let mut subjects = Vec::new();
    let mut excluded = Vec::new();
    let mut audit = Audit::default();
    for o in outcomes {
        folds.push(FoldSummary {
            fold: o.fold,
            seed: o.seed,
            n_train_subjects: o.train_subjects.len(),
            n_val_subjects: o.val_subjects.len(),
            n_test_subjects: o.test_subjects.len(),
            n_train_records: o.n_train_records,
            n_val_records: o.n_val_records,
            best_epoch: o.best_epoch,
            epochs: o.epochs,
            metrics: subject_metrics(&o.scored.scores, cfg.eval.threshold)?,
            audit: o.audit,
        });
        audit.add(&o.audit);
        subjects.extend(o.scored.scores);
        excluded.extend(o.scored.excluded);
    }
    subjects.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    excluded.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    Ok(EvalReport {
        model: kind,
        seed,
        param_count: model_param_count(kind, &cfg.model)?,
        config: cfg.clone(),
        pooled: subject_metrics(&subjects, cfg.eval.threshold)?,
        folds,
        subjects,
        excluded,
        audit,
    })
}

/// Full k-fold cross-validation, folds run in order.
pub fn run_cv(ds: &Dataset, kind: ModelKind, cfg: &CvConfig, seed: u64) -> Result<EvalReport> {
    let cleaned = clean_dataset(ds, &cfg.preprocess)?;
    run_cv_cleaned(ds, &cleaned, kind, cfg, seed)
}

pub fn run_cv_cleaned(
    ds: &Dataset,
    cleaned: &[CleanedRecord],
    kind: ModelKind,
    cfg: &CvConfig,
    seed: u64,
) -> Result<EvalReport> {
    let plan = make_folds(ds.subjects(), cfg.eval.k, seed)?;
    let outcomes = (0..plan.k)
        .map(|f| run_fold(ds, cleaned, &plan, f, kind, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    assemble_report(outcomes, kind, cfg, seed)
}
