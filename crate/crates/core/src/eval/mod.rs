//! Subject-level k-fold cross-validation: training on spot-check recordings,
//! scoring on background recordings, and the metric suite.

mod cv;
mod folds;
mod metrics;

pub use cv::{
    assemble_report, clean_dataset, fit_model, fold_seed, model_param_count, run_cv, run_cv_cleaned, run_fold, score_subjects,
    subject_metrics, Audit, CvConfig, EvalConfig, EvalReport, Excluded, Fit, FittedModel, FoldOutcome, FoldSummary, MetricSet,
    ModelKind, RecordScorer, ScoredSubjects, SubjectScore,
};
pub use folds::{make_folds, FoldPlan};
pub use metrics::{confusion, pr_auc, pr_curve, roc_auc, roc_curve, Confusion, PrPoint, RocPoint};
