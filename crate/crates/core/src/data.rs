//! Subjects, recordings and the blood-pressure labelling rule.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

pub const SBP_THRESHOLD: f64 = 120.0;
pub const DBP_THRESHOLD: f64 = 80.0;
pub const DEFAULT_SAMPLE_RATE: f64 = 250.0;
pub const SPOT_CHECK_SECONDS: f64 = 60.0;
pub const MIN_BACKGROUND_SECONDS: f64 = 30.0;
pub const SECONDS_PER_DAY: i64 = 86_400;

/// Hypertension-risk ground truth: positive when the mean SBP exceeds
/// 120 mmHg or the mean DBP exceeds 80 mmHg (strictly).
pub fn label_subject(mean_sbp: f64, mean_dbp: f64) -> Result<bool> {
    for (name, v) in [("mean_sbp", mean_sbp), ("mean_dbp", mean_dbp)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::validation(name, format!("must be finite and positive, got {v}")));
        }
    }
    Ok(mean_sbp > SBP_THRESHOLD || mean_dbp > DBP_THRESHOLD)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub subject_id: String,
    pub age: u32,
    pub sex: Sex,
    pub mean_sbp: f64,
    pub mean_dbp: f64,
    pub label: bool,
}

impl Subject {
    pub fn new(subject_id: impl Into<String>, age: u32, sex: Sex, mean_sbp: f64, mean_dbp: f64) -> Result<Self> {
        let subject_id = subject_id.into();
        if subject_id.is_empty() {
            return Err(Error::validation("subject_id", "empty"));
        }
        let label = label_subject(mean_sbp, mean_dbp)?;
        if mean_sbp <= mean_dbp {
            return Err(Error::validation(
                "mean_sbp",
                format!("must exceed mean_dbp ({mean_sbp} <= {mean_dbp})"),
            ));
        }
        Ok(Subject {
            subject_id,
            age,
            sex,
            mean_sbp,
            mean_dbp,
            label,
        })
    }

    /// Like [`Subject::new`] but rejects a stored label that disagrees with
    /// the one computed from the blood-pressure means.
    pub fn with_stored_label(
        subject_id: impl Into<String>,
        age: u32,
        sex: Sex,
        mean_sbp: f64,
        mean_dbp: f64,
        stored: Option<bool>,
    ) -> Result<Self> {
        let s = Self::new(subject_id, age, sex, mean_sbp, mean_dbp)?;
        match stored {
            Some(stored) if stored != s.label => Err(Error::LabelMismatch {
                subject_id: s.subject_id,
                stored,
                computed: s.label,
            }),
            _ => Ok(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecordKind {
    #[serde(rename = "spot")]
    SpotCheck,
    #[serde(rename = "background")]
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpgRecord {
    pub subject_id: String,
    /// Seconds since the Unix epoch.
    pub start_time: i64,
    pub kind: RecordKind,
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl PpgRecord {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Calendar day index (UTC days since the epoch).
    pub fn day(&self) -> i64 {
        self.start_time.div_euclid(SECONDS_PER_DAY)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::validation("fs", format!("must be positive, got {}", self.sample_rate)));
        }
        if self.samples.is_empty() {
            return Err(Error::validation("samples", "empty"));
        }
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let d = self.duration_s();
        match self.kind {
            RecordKind::SpotCheck => {
                if (d - SPOT_CHECK_SECONDS).abs() > 0.05 * SPOT_CHECK_SECONDS {
                    return Err(Error::validation(
                        "samples",
                        format!("spot-check duration {d:.2} s outside 60 s ± 5%"),
                    ));
                }
            }
            RecordKind::Background => {
                if d < MIN_BACKGROUND_SECONDS {
                    return Err(Error::validation(
                        "samples",
                        format!("background duration {d:.2} s below {MIN_BACKGROUND_SECONDS} s"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Validated, immutable collection of subjects and their recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    subjects: Vec<Subject>,
    records: Vec<PpgRecord>,
}

impl Dataset {
    pub fn new(subjects: Vec<Subject>, records: Vec<PpgRecord>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, s) in subjects.iter().enumerate() {
            if index.insert(s.subject_id.as_str(), i).is_some() {
                return Err(Error::DuplicateSubject(s.subject_id.clone()));
            }
        }
        let mut has_background = alloc::vec![false; subjects.len()];
        for (i, r) in records.iter().enumerate() {
            let Some(&si) = index.get(r.subject_id.as_str()) else {
                return Err(Error::DanglingSubject {
                    record: i,
                    subject_id: r.subject_id.clone(),
                });
            };
            r.validate()?;
            if r.kind == RecordKind::Background {
                has_background[si] = true;
            }
        }
        if let Some(i) = has_background.iter().position(|b| !b) {
            return Err(Error::validation(
                "records",
                format!("subject `{}` has no background recording", subjects[i].subject_id),
            ));
        }
        Ok(Dataset { subjects, records })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn records(&self) -> &[PpgRecord] {
        &self.records
    }

    pub fn subject(&self, id: &str) -> Option<&Subject> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn into_parts(self) -> (Vec<Subject>, Vec<PpgRecord>) {
        (self.subjects, self.records)
    }

    /// Subject id -> position in [`Dataset::subjects`].
    pub fn subject_index(&self) -> BTreeMap<&str, usize> {
        self.subjects
            .iter()
            .enumerate()
            .map(|(i, s)| (s.subject_id.as_str(), i))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStat {
    fn of(xs: &[f64]) -> Self {
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        SummaryStat {
            mean: math::mean(&sorted),
            sd: math::sample_std_dev(&sorted),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_subjects: usize,
    pub n_male: usize,
    pub n_female: usize,
    pub n_records: usize,
    pub n_spot: usize,
    pub n_background: usize,
    pub n_abnormal: usize,
    pub age: SummaryStat,
    pub sbp: SummaryStat,
    pub dbp: SummaryStat,
}

/// Demographic summary in the layout of a cohort table. Statistics are
/// computed over sorted values so the result does not depend on input order.
pub fn dataset_summary(ds: &Dataset) -> Result<DatasetSummary> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let subjects = ds.subjects();
    let col = |f: fn(&Subject) -> f64| subjects.iter().map(f).collect::<Vec<_>>();
    let n_spot = ds.records().iter().filter(|r| r.kind == RecordKind::SpotCheck).count();
    Ok(DatasetSummary {
        n_subjects: subjects.len(),
        n_male: subjects.iter().filter(|s| s.sex == Sex::Male).count(),
        n_female: subjects.iter().filter(|s| s.sex == Sex::Female).count(),
        n_records: ds.records().len(),
        n_spot,
        n_background: ds.records().len() - n_spot,
        n_abnormal: subjects.iter().filter(|s| s.label).count(),
        age: SummaryStat::of(&col(|s| s.age as f64)),
        sbp: SummaryStat::of(&col(|s| s.mean_sbp)),
        dbp: SummaryStat::of(&col(|s| s.mean_dbp)),
    })
}
