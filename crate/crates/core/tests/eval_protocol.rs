use std::collections::{BTreeMap, BTreeSet};

use ppg_screen_core::data::{RecordKind, Sex, Subject, SECONDS_PER_DAY};
use ppg_screen_core::error::Result;
use ppg_screen_core::eval::*;
use ppg_screen_core::model::TrainHyper;
use ppg_screen_core::preprocess::{CleanedRecord, QcStats};
use ppg_screen_core::synth::{generate_dataset, Effect, SynthSpec};

/// Returns a fixed probability per record start time.
struct Table(BTreeMap<i64, f64>);

impl RecordScorer for Table {
    fn score_record(&self, rec: &CleanedRecord) -> Result<Option<f64>> {
        Ok(if rec.usable { self.0.get(&rec.start_time).copied() } else { None })
    }
}

fn record(id: &str, start_time: i64, kind: RecordKind, usable: bool) -> CleanedRecord {
    CleanedRecord {
        subject_id: id.into(),
        start_time,
        kind,
        sample_rate: 250.0,
        segment_len: 1000,
        beats: Vec::new(),
        spans: Vec::new(),
        qc: QcStats::default(),
        usable,
    }
}

fn subject(id: &str, sbp: f64) -> Subject {
    Subject::new(id, 40, Sex::Female, sbp, 70.0).unwrap()
}

#[test]
fn positive_ratio_is_the_mean() {
    let s = subject("A", 130.0);
    let recs = [
        record("A", 100, RecordKind::Background, true),
        record("A", 200, RecordKind::Background, true),
        // spot checks never reach the scorer's output
        record("A", 300, RecordKind::SpotCheck, true),
    ];
    let table = Table([(100, 0.8), (200, 0.6), (300, 1.0)].into());
    let out = score_subjects(&table, &[&s], &recs.iter().collect::<Vec<_>>(), 1, 0).unwrap();
    assert_eq!(out.scores.len(), 1);
    assert!((out.scores[0].positive_ratio - 0.7).abs() < 1e-15);
    assert_eq!(out.scores[0].n_recordings, 2);
    assert_eq!((out.spot_records_scored, out.background_records_scored), (0, 2));
}

#[test]
fn no_usable_recordings_excludes() {
    let s = subject("B", 110.0);
    let recs = [
        record("B", 100, RecordKind::Background, false),
        record("B", 200, RecordKind::SpotCheck, true),
    ];
    let table = Table([(100, 0.4), (200, 0.4)].into());
    let out = score_subjects(&table, &[&s], &recs.iter().collect::<Vec<_>>(), 1, 3).unwrap();
    assert!(out.scores.is_empty());
    assert_eq!(out.excluded.len(), 1);
    assert_eq!((out.excluded[0].n_usable_recordings, out.excluded[0].fold), (0, 3));

    let none = score_subjects(&table, &[&s], &[], 1, 0).unwrap();
    assert_eq!(none.excluded.len(), 1);
}

#[test]
fn effective_days_rule() {
    let s = subject("C", 125.0);
    let recs: Vec<CleanedRecord> = [0, 1, 1]
        .iter()
        .enumerate()
        .map(|(i, d)| record("C", d * SECONDS_PER_DAY + 3600 * i as i64, RecordKind::Background, true))
        .collect();
    let table = Table(recs.iter().map(|r| (r.start_time, 0.5)).collect());
    let refs: Vec<&CleanedRecord> = recs.iter().collect();
    let strict = score_subjects(&table, &[&s], &refs, 3, 0).unwrap();
    assert!(strict.scores.is_empty());
    assert_eq!(strict.excluded[0].n_effective_days, 2);
    let lenient = score_subjects(&table, &[&s], &refs, 2, 0).unwrap();
    assert_eq!(lenient.scores[0].n_effective_days, 2);
}

#[test]
fn pooled_metrics_ignore_order() {
    let mut scores: Vec<SubjectScore> = (0..12)
        .map(|i| SubjectScore {
            subject_id: format!("S{i:02}"),
            label: i % 3 == 0,
            fold: i % 4,
            recording_probs: vec![],
            positive_ratio: ((i * 7) % 5) as f64 / 4.0,
            n_recordings: 1,
            n_effective_days: 1,
        })
        .collect();
    let a = subject_metrics(&scores, 0.5).unwrap();
    scores.reverse();
    scores.rotate_left(5);
    assert_eq!(subject_metrics(&scores, 0.5).unwrap(), a);
    assert_eq!(a.confusion.total(), 12);
}

fn small_cohort() -> ppg_screen_core::data::Dataset {
    let spec = SynthSpec {
        n_subjects: 30,
        effect: Effect::Strong,
        days: 1,
        spot_per_day: 2,
        background_per_day: 2,
        seed: 21,
        ..SynthSpec::default()
    };
    generate_dataset(&spec).unwrap().dataset
}

#[test]
fn cross_validation_protocol() {
    let ds = small_cohort();
    let cfg = CvConfig::default();
    let a = run_cv(&ds, ModelKind::Baseline, &cfg, 4).unwrap();
    let b = run_cv(&ds, ModelKind::Baseline, &cfg, 4).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.audit.is_clean());
    assert_eq!(a.audit.spot_records_scored, 0);
    assert_eq!(a.audit.background_records_trained, 0);
    assert_eq!(a.folds.len(), 5);

    let mut seen = BTreeSet::new();
    for s in &a.subjects {
        assert!(seen.insert(s.subject_id.clone()));
        assert!((0.0..=1.0).contains(&s.positive_ratio));
    }
    for e in &a.excluded {
        assert!(seen.insert(e.subject_id.clone()));
    }
    assert_eq!(seen.len(), 30);
    assert_eq!(a.pooled.confusion.total(), a.subjects.len());
    assert_eq!(a.param_count, ppg_screen_core::features::N_FEATURES + 1);
}

#[test]
fn resnet_fold_is_seeded() {
    let ds = small_cohort();
    let cfg = CvConfig {
        train: TrainHyper { max_epochs: 1, ..TrainHyper::default() },
        ..CvConfig::default()
    };
    let cleaned = clean_dataset(&ds, &cfg.preprocess).unwrap();
    let a = run_cv_cleaned(&ds, &cleaned, ModelKind::Resnet, &cfg, 9).unwrap();
    let b = run_cv_cleaned(&ds, &cleaned, ModelKind::Resnet, &cfg, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.audit.is_clean());
    assert!(a.folds.iter().all(|f| f.epochs.len() == 1 && f.best_epoch == Some(f.epochs[0].epoch)));
}
