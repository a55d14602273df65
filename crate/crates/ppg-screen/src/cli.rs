//! Subcommand parsing and dispatch.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use ppg_screen_core::data::{Dataset, RecordKind};
use ppg_screen_core::eval::{
    assemble_report, fit_model, make_folds, run_fold, score_subjects, ModelKind, SubjectScore,
};
use ppg_screen_core::features::{record_features, recording_feature_vector};
use ppg_screen_core::preprocess::{clean_record, Beat, CleanedRecord, QcStats, SegmentMode};
use ppg_screen_core::seed::{self, derive_seed};
use ppg_screen_core::synth::{generate_dataset, Effect};
use ppg_screen_core::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{split_overrides, Provenance, RunConfig, SEED_ENV};
use crate::error::{Error, Result};
use crate::output::{self, ReportFile};
use crate::{io, weights};

#[derive(Debug, Parser)]
#[command(name = "ppg-screen", version, about = "Hypertension risk screening from wrist PPG recordings")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON run configuration; `--section.key=value` flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Global seed; every module seed is derived from it [default: config `seed`, 0]
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,
    /// Worker threads for records and folds; 0 uses every logical core
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset
    Synth(SynthArgs),
    /// Clean and segment every record; write segments and a QC dump
    Preprocess(DataOut),
    /// Write the per-subject morphology feature matrix
    Features(DataOut),
    /// Fit one model on every subject's spot-check recordings
    Train(TrainArgs),
    /// Subject-level k-fold cross-validation
    Evaluate(EvaluateArgs),
    /// Score one subject's background recordings with saved weights
    Screen(ScreenArgs),
    /// Render evaluation reports as a table
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EffectArg {
    None,
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Resnet,
    Baseline,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Resnet => ModelKind::Resnet,
            ModelArg::Baseline => ModelKind::Baseline,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output dataset directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Subjects to generate (synth.n_subjects) [default: 200]
    #[arg(long)]
    n: Option<usize>,
    /// Strength of the blood-pressure to morphology link (synth.effect) [default: strong]
    #[arg(long, value_enum)]
    effect: Option<EffectArg>,
}

#[derive(Debug, Args)]
struct DataOut {
    /// Dataset directory with subjects.csv and records.ndjson
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    io: DataOut,
    #[arg(long, value_enum, default_value_t = ModelArg::Resnet)]
    model: ModelArg,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    io: DataOut,
    /// Models to cross-validate, comma separated
    #[arg(long, value_enum, value_delimiter = ',', default_value = "resnet")]
    models: Vec<ModelArg>,
}

#[derive(Debug, Args)]
struct ScreenArgs {
    /// Weights file written by `train`
    #[arg(long, value_name = "FILE")]
    weights: PathBuf,
    /// Dataset directory holding the subject's recordings
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    #[arg(long, value_name = "ID")]
    subject: String,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report JSON files written by `evaluate`
    #[arg(required = true, value_name = "REPORT")]
    reports: Vec<PathBuf>,
    /// Add one row per fold
    #[arg(long)]
    per_fold: bool,
}

fn overrides_help() -> String {
    let mut s = String::from("Config keys (override with --section.key=value; defaults shown):\n");
    for (k, v) in RunConfig::default().keys() {
        s.push_str(&format!("  --{k}={v}\n"));
    }
    s
}

fn command() -> clap::Command {
    let help = overrides_help();
    Cli::command()
        .after_long_help(help.clone())
        .mut_subcommands(|c| c.after_long_help(help.clone()))
}

/// Parses `args` (without the program name), runs the subcommand and
/// returns the process exit code.
pub fn run(args: Vec<String>) -> u8 {
    let (rest, overrides) = match split_overrides(args) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let matches = match command().try_get_matches_from(std::iter::once("ppg-screen".to_owned()).chain(rest)) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).expect("matches come from the same definition");
    let level = ["warn", "info", "debug"][usize::from(cli.global.verbose.min(2))];
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli, &overrides) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_config(g: &Global, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        c.set(k, v)?;
    }
    if let Some(s) = g.seed {
        c.seed = s;
    }
    Ok(c)
}

fn dispatch(cli: Cli, overrides: &[(String, String)]) -> Result<()> {
    let mut cfg = run_config(&cli.global, overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => {
            if let Some(n) = a.n {
                cfg.synth.n_subjects = n;
            }
            if let Some(e) = a.effect {
                cfg.synth.effect = match e {
                    EffectArg::None => Effect::None,
                    EffectArg::Weak => Effect::Weak,
                    EffectArg::Strong => Effect::Strong,
                };
            }
            synth(&mut cfg, &a.out)
        }
        Command::Preprocess(a) => preprocess(&cfg, &a.data, &a.out),
        Command::Features(a) => features(&cfg, &a.data, &a.out),
        Command::Train(a) => train(&cfg, &a.io.data, &a.io.out, a.model.into()),
        Command::Evaluate(a) => {
            let mut kinds: Vec<ModelKind> = a.models.iter().map(|&m| m.into()).collect();
            kinds.dedup();
            evaluate(&cfg, &a.io.data, &a.io.out, &kinds)
        }
        Command::Screen(a) => screen(&cfg, &a.weights, &a.data, &a.subject),
        Command::Report(a) => report(&a.reports, a.per_fold),
    })
}

fn clean_all(ds: &Dataset, cfg: &RunConfig) -> Result<Vec<CleanedRecord>> {
    let out: ppg_screen_core::Result<Vec<_>> = ds.records().par_iter().map(|r| clean_record(r, &cfg.preprocess)).collect();
    Ok(out?)
}

fn load(data: &Path) -> Result<Dataset> {
    let ds = io::load_dataset(data)?;
    log::info!("loaded {} subjects, {} records from {}", ds.subjects().len(), ds.records().len(), data.display());
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
struct SynthSidecar {
    provenance: Provenance,
    spec: ppg_screen_core::synth::SynthSpec,
}

pub const SYNTH_SIDECAR: &str = "synth_spec.json";

fn synth(cfg: &mut RunConfig, out: &Path) -> Result<()> {
    cfg.synth.seed = derive_seed(cfg.seed, "synth");
    let generated = generate_dataset(&cfg.synth)?;
    let ds = &generated.dataset;
    io::save_dataset(ds, out)?;
    let prov = Provenance::new("synth", cfg);
    let sidecar = out.join(SYNTH_SIDECAR);
    output::write_json(
        &sidecar,
        &SynthSidecar {
            provenance: prov.clone(),
            spec: cfg.synth.clone(),
        },
    )?;
    let (sp, rp) = io::dataset_paths(out);
    output::write_manifest(out, &prov, &[sp, rp, sidecar])?;
    let positives = ds.subjects().iter().filter(|s| s.label).count();
    println!(
        "wrote {} subjects ({} positive) and {} records to {}",
        ds.subjects().len(),
        positives,
        ds.records().len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct QcLine<'a> {
    subject_id: &'a str,
    start_time: i64,
    kind: RecordKind,
    usable: bool,
    qc: QcStats,
    tiled_segments: usize,
    beats: &'a [Beat],
}

#[derive(Serialize)]
struct SegmentLine<'a> {
    subject_id: &'a str,
    start_time: i64,
    kind: RecordKind,
    offset: usize,
    samples: &'a [f64],
}

fn ndjson_line<T: Serialize>(w: &mut impl Write, path: &Path, v: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, v).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

fn preprocess(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let ds = load(data)?;
    let cleaned = clean_all(&ds, cfg)?;
    io::create_dir(out)?;
    let (seg_path, qc_path) = (out.join("segments.ndjson"), out.join("qc.ndjson"));
    let mut seg_w = io::create(&seg_path)?;
    let mut qc_w = io::create(&qc_path)?;
    let mut n_segments = 0;
    for c in &cleaned {
        let segs = if c.usable { c.windows(SegmentMode::TestTiled, &mut seed::rng(0)) } else { Vec::new() };
        for s in &segs {
            let line = SegmentLine {
                subject_id: &c.subject_id,
                start_time: c.start_time,
                kind: c.kind,
                offset: s.offset,
                samples: &s.samples,
            };
            ndjson_line(&mut seg_w, &seg_path, &line)?;
        }
        n_segments += segs.len();
        let qc = QcLine {
            subject_id: &c.subject_id,
            start_time: c.start_time,
            kind: c.kind,
            usable: c.usable,
            qc: c.qc,
            tiled_segments: segs.len(),
            beats: &c.beats,
        };
        ndjson_line(&mut qc_w, &qc_path, &qc)?;
    }
    seg_w.flush().map_err(|e| Error::io(&seg_path, e))?;
    qc_w.flush().map_err(|e| Error::io(&qc_path, e))?;
    output::write_manifest(out, &Provenance::new("preprocess", cfg), &[seg_path, qc_path])?;
    let usable = cleaned.iter().filter(|c| c.usable).count();
    println!("{usable} of {} records usable, {n_segments} segments written to {}", cleaned.len(), out.display());
    Ok(())
}

fn features(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let ds = load(data)?;
    let cleaned = clean_all(&ds, cfg)?;
    let mut per_subject: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for c in cleaned.iter().filter(|c| c.usable && c.kind == RecordKind::SpotCheck) {
        match record_features(c) {
            Ok(f) => per_subject.entry(c.subject_id.as_str()).or_default().push(f),
            Err(CoreError::NoUsableBeats) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let mut rows = Vec::new();
    for s in ds.subjects() {
        match per_subject.get(s.subject_id.as_str()) {
            Some(fs) => rows.push((s.subject_id.clone(), s.label, recording_feature_vector(fs)?)),
            None => log::warn!("subject {} has no usable spot-check recording; skipped", s.subject_id),
        }
    }
    io::create_dir(out)?;
    let path = out.join("features.csv");
    output::write_features(&path, &rows)?;
    output::write_manifest(out, &Provenance::new("features", cfg), &[path])?;
    println!("{} of {} subjects written to {}", rows.len(), ds.subjects().len(), out.display());
    Ok(())
}

fn train(cfg: &RunConfig, data: &Path, out: &Path, kind: ModelKind) -> Result<()> {
    let ds = load(data)?;
    let cleaned = clean_all(&ds, cfg)?;
    let all: Vec<_> = ds.subjects().iter().collect();
    let fit = fit_model(&ds, &cleaned, &all, kind, &cfg.cv(), derive_seed(cfg.seed, "train"))?;
    io::create_dir(out)?;
    let prov = Provenance::new("train", cfg);
    let (wpath, lpath) = (out.join("weights.bin"), out.join("training_log.csv"));
    weights::save(&wpath, &fit.model, &prov)?;
    output::write_training_log(&lpath, &fit.epochs)?;
    output::write_manifest(out, &prov, &[wpath, lpath])?;
    match fit.best_epoch {
        Some(e) => println!(
            "{}: trained on {} records ({} validation), best epoch {e}, saved to {}",
            kind.name(),
            fit.n_train_records,
            fit.n_val_records,
            out.display()
        ),
        None => println!("{}: trained on {} records, saved to {}", kind.name(), fit.n_train_records, out.display()),
    }
    Ok(())
}

pub fn report_file_name(kind: ModelKind) -> String {
    format!("report_{}.json", kind.name())
}

fn evaluate(cfg: &RunConfig, data: &Path, out: &Path, kinds: &[ModelKind]) -> Result<()> {
    let ds = load(data)?;
    let cleaned = clean_all(&ds, cfg)?;
    let cv = cfg.cv();
    let eseed = derive_seed(cfg.seed, "evaluate");
    let plan = make_folds(ds.subjects(), cv.eval.k, eseed)?;
    io::create_dir(out)?;
    let prov = Provenance::new("evaluate", cfg);
    let mut files = Vec::new();
    let mut reports = Vec::new();
    for &kind in kinds {
        log::info!("cross-validating {} over {} folds", kind.name(), plan.k);
        let outcomes: ppg_screen_core::Result<Vec<_>> = (0..plan.k)
            .into_par_iter()
            .map(|f| run_fold(&ds, &cleaned, &plan, f, kind, &cv, eseed))
            .collect();
        let report = assemble_report(outcomes?, kind, &cv, eseed)?;
        let name = kind.name();
        let rpath = out.join(report_file_name(kind));
        output::write_json(
            &rpath,
            &ReportFile {
                provenance: prov.clone(),
                report: report.clone(),
            },
        )?;
        let (roc, pr) = (out.join(format!("roc_{name}.csv")), out.join(format!("pr_{name}.csv")));
        output::write_roc_csv(&roc, &report)?;
        output::write_pr_csv(&pr, &report)?;
        files.extend([rpath, roc, pr]);
        reports.push(report);
    }
    output::write_manifest(out, &prov, &files)?;
    print!("{}", output::render_table(&reports, false));
    Ok(())
}

/// `positive_ratio` to two decimals and the thresholded decision.
pub fn screen_line(score: &SubjectScore, threshold: f64) -> String {
    let decision = if score.positive_ratio >= threshold { "positive" } else { "negative" };
    format!(
        "{}\tpositive_ratio {:.2}\t{decision}\t({} recordings over {} days)",
        score.subject_id, score.positive_ratio, score.n_recordings, score.n_effective_days
    )
}

fn screen(cfg: &RunConfig, weights_path: &Path, data: &Path, subject: &str) -> Result<()> {
    let (model, prov) = weights::load(weights_path)?;
    let ds = load(data)?;
    let s = ds
        .subject(subject)
        .ok_or_else(|| Error::Invalid(format!("subject `{subject}` not in {}", data.display())))?;
    // recordings are cleaned the way the training data was
    let pcfg = &prov.config.preprocess;
    if *pcfg != cfg.preprocess {
        log::warn!("using the preprocessing config stored with the weights");
    }
    let cleaned: ppg_screen_core::Result<Vec<CleanedRecord>> = ds
        .records()
        .par_iter()
        .filter(|r| r.subject_id == subject && r.kind == RecordKind::Background)
        .map(|r| clean_record(r, pcfg))
        .collect();
    let cleaned = cleaned?;
    let refs: Vec<&CleanedRecord> = cleaned.iter().collect();
    let scored = score_subjects(&model, &[s], &refs, cfg.eval.min_effective_days, 0)?;
    match scored.scores.first() {
        Some(score) => {
            println!("{}", screen_line(score, cfg.eval.threshold));
            Ok(())
        }
        None => {
            let x = &scored.excluded[0];
            Err(Error::Invalid(format!(
                "subject `{subject}` cannot be screened: {} usable background recordings over {} days (need {} days)",
                x.n_usable_recordings, x.n_effective_days, cfg.eval.min_effective_days
            )))
        }
    }
}

fn report(paths: &[PathBuf], per_fold: bool) -> Result<()> {
    let reports = paths.iter().map(|p| output::read_report(p).map(|r| r.report)).collect::<Result<Vec<_>>>()?;
    print!("{}", output::render_table(&reports, per_fold));
    Ok(())
}
