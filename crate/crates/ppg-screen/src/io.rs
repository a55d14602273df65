//! Dataset directories: `subjects.csv` plus `records.ndjson`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ppg_screen_core::data::{Dataset, PpgRecord, RecordKind, Sex, Subject};
use ppg_screen_core::Error as CoreError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const SUBJECTS_FILE: &str = "subjects.csv";
pub const RECORDS_FILE: &str = "records.ndjson";
pub const SUBJECT_COLUMNS: [&str; 5] = ["subject_id", "age", "sex", "mean_sbp", "mean_dbp"];

/// One line of the records file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    subject_id: String,
    start_time: i64,
    kind: RecordKind,
    fs: f64,
    samples: Vec<f64>,
}

const WIRE_FIELDS: [&str; 5] = ["subject_id", "start_time", "kind", "fs", "samples"];

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn sex_code(s: Sex) -> &'static str {
    match s {
        Sex::Male => "M",
        Sex::Female => "F",
    }
}

/// Binds a core validation error to a location in an input file.
fn located(file: &Path, line: usize, e: CoreError) -> Error {
    match e {
        CoreError::Validation { field, reason } => Error::parse(file, line, &field, reason),
        CoreError::NonFinite(i) => Error::parse(file, line, "samples", format!("non-finite value at index {i}")),
        CoreError::LabelMismatch { .. } => Error::parse(file, line, "label", e.to_string()),
        other => Error::parse(file, line, "-", other.to_string()),
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Reads the subjects table. An optional trailing `label` column (0/1) is
/// checked against the label recomputed from the blood-pressure means.
pub fn load_subjects(path: &Path) -> Result<Vec<Subject>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, "header", e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let has_label = match header.len() {
        5 => false,
        6 if header[5] == "label" => true,
        _ => {
            return Err(Error::parse(
                path,
                1,
                "header",
                format!("expected `{}` (optionally `,label`), got `{}`", SUBJECT_COLUMNS.join(","), header.join(",")),
            ))
        }
    };
    if let Some((want, got)) = SUBJECT_COLUMNS.iter().zip(&header).find(|(w, g)| *w != g) {
        return Err(Error::parse(path, 1, "header", format!("expected column `{want}`, got `{got}`")));
    }

    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, "-", e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |field: &str, why: String| Error::parse(path, line, field, why);
        let id = row[0].to_owned();
        if !seen.insert(id.clone()) {
            return Err(bad("subject_id", format!("duplicate subject id `{id}`")));
        }
        let age: u32 = row[1].parse().map_err(|_| bad("age", format!("not a non-negative integer: `{}`", &row[1])))?;
        let sex = match &row[2] {
            "M" => Sex::Male,
            "F" => Sex::Female,
            other => return Err(bad("sex", format!("expected M or F, got `{other}`"))),
        };
        let num = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| bad(SUBJECT_COLUMNS[i], format!("not a number: `{}`", &row[i])))
        };
        let (sbp, dbp) = (num(3)?, num(4)?);
        let stored = if has_label {
            Some(parse_bool(&row[5]).ok_or_else(|| bad("label", format!("expected 0 or 1, got `{}`", &row[5])))?)
        } else {
            None
        };
        let s = Subject::with_stored_label(id, age, sex, sbp, dbp, stored).map_err(|e| located(path, line, e))?;
        out.push(s);
    }
    Ok(out)
}

/// Names the first offending field of a malformed record line.
fn diagnose_line(file: &Path, line: usize, text: &str, err: serde_json::Error) -> Error {
    let obj: Map<String, Value> = match serde_json::from_str(text) {
        Ok(Value::Object(m)) => m,
        Ok(_) => return Error::parse(file, line, "-", "expected a JSON object"),
        Err(_) => return Error::parse(file, line, "-", err.to_string()),
    };
    if let Some(k) = obj.keys().find(|k| !WIRE_FIELDS.contains(&k.as_str())) {
        return Error::parse(file, line, k, "unknown field");
    }
    fn check<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Option<String> {
        match obj.get(key) {
            None => Some("missing".into()),
            Some(v) => T::deserialize(v).err().map(|e| e.to_string()),
        }
    }
    let problems = [
        ("subject_id", check::<String>(&obj, "subject_id")),
        ("start_time", check::<i64>(&obj, "start_time")),
        ("kind", check::<RecordKind>(&obj, "kind")),
        ("fs", check::<f64>(&obj, "fs")),
        ("samples", check::<Vec<f64>>(&obj, "samples")),
    ];
    match problems.into_iter().find_map(|(k, p)| p.map(|p| (k, p))) {
        Some((field, reason)) => Error::parse(file, line, field, reason),
        None => Error::parse(file, line, "-", err.to_string()),
    }
}

pub fn load_records(path: &Path) -> Result<Vec<PpgRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, text) in BufReader::new(file).lines().enumerate() {
        let line = i + 1;
        let text = text.map_err(|e| Error::io(path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        let w: WireRecord = serde_json::from_str(&text).map_err(|e| diagnose_line(path, line, &text, e))?;
        let rec = PpgRecord {
            subject_id: w.subject_id,
            start_time: w.start_time,
            kind: w.kind,
            sample_rate: w.fs,
            samples: w.samples,
        };
        rec.validate().map_err(|e| located(path, line, e))?;
        out.push(rec);
    }
    Ok(out)
}

/// Line number (1-based) of the `index`-th non-blank record line.
fn record_line(path: &Path, index: usize) -> usize {
    let Ok(f) = File::open(path) else { return 0 };
    BufReader::new(f)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .nth(index)
        .map_or(0, |(i, _)| i + 1)
}

pub fn dataset_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(SUBJECTS_FILE), dir.join(RECORDS_FILE))
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let (sp, rp) = dataset_paths(dir);
    let subjects = load_subjects(&sp)?;
    let records = load_records(&rp)?;
    Dataset::new(subjects, records).map_err(|e| match e {
        CoreError::DanglingSubject { record, subject_id } => Error::parse(
            &rp,
            record_line(&rp, record),
            "subject_id",
            format!("references unknown subject `{subject_id}`"),
        ),
        other => Error::format(dir, other.to_string()),
    })
}

pub fn write_subjects(path: &Path, subjects: &[Subject]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| Error::io(path, e.into());
    w.write_record(SUBJECT_COLUMNS).map_err(wrap)?;
    for s in subjects {
        w.write_record([
            s.subject_id.clone(),
            s.age.to_string(),
            sex_code(s.sex).to_owned(),
            s.mean_sbp.to_string(),
            s.mean_dbp.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_records(path: &Path, records: &[PpgRecord]) -> Result<()> {
    #[derive(Serialize)]
    struct WireRef<'a> {
        subject_id: &'a str,
        start_time: i64,
        kind: RecordKind,
        fs: f64,
        samples: &'a [f64],
    }
    let mut w = create(path)?;
    for r in records {
        let wire = WireRef {
            subject_id: &r.subject_id,
            start_time: r.start_time,
            kind: r.kind,
            fs: r.sample_rate,
            samples: &r.samples,
        };
        serde_json::to_writer(&mut w, &wire).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let (sp, rp) = dataset_paths(dir);
    write_subjects(&sp, ds.subjects())?;
    write_records(&rp, ds.records())
}
