//! Run configuration: one JSON document holding every module's knobs, with
//! `section.key=value` overrides.

use std::path::Path;

use ppg_screen_core::eval::{CvConfig, EvalConfig};
use ppg_screen_core::features::BaselineConfig;
use ppg_screen_core::model::{ModelConfig, TrainHyper};
use ppg_screen_core::preprocess::PreprocessConfig;
use ppg_screen_core::synth::SynthSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io;

pub const SEED_ENV: &str = "PPG_SCREEN_SEED";
pub const SECTIONS: [&str; 6] = ["preprocess", "model", "train", "baseline", "eval", "synth"];

/// `model.seed` and `synth.seed` are placeholders: the commands overwrite
/// them with streams derived from the global seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub train: TrainHyper,
    pub baseline: BaselineConfig,
    pub eval: EvalConfig,
    pub synth: SynthSpec,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn cv(&self) -> CvConfig {
        CvConfig {
            preprocess: self.preprocess.clone(),
            model: self.model.clone(),
            train: self.train.clone(),
            baseline: self.baseline.clone(),
            eval: self.eval.clone(),
        }
    }

    /// Sets the leaf at a dotted path such as `train.adam.learning_rate`.
    /// The value is read as JSON, falling back to a bare string.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let mut doc = serde_json::to_value(&*self).expect("config serialises");
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        }
        if slot.is_object() {
            return Err(Error::Config(format!("`{key}` is a section, not a key")));
        }
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
        *self = serde_json::from_value(doc).map_err(|e| Error::Config(format!("`{key}={raw}`: {e}")))?;
        Ok(())
    }

    /// Every leaf key with its current value, in declaration order.
    pub fn keys(&self) -> Vec<(String, String)> {
        fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
            match v {
                Value::Object(m) => {
                    for (k, child) in m {
                        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                        walk(&key, child, out);
                    }
                }
                leaf => out.push((prefix.to_owned(), leaf.to_string())),
            }
        }
        let mut out = Vec::new();
        walk("", &serde_json::to_value(self).expect("config serialises"), &mut out);
        out.retain(|(k, _)| k != "seed");
        out
    }
}

/// `(dotted key, raw value)` pairs in command-line order.
pub type Overrides = Vec<(String, String)>;

/// Splits `--section.key=value` / `--section.key value` overrides out of
/// an argument list, leaving everything else for the flag parser.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_owned(), Some(v.to_owned())),
            None => (body.to_owned(), None),
        };
        let is_override = key
            .split_once('.')
            .is_some_and(|(section, _)| SECTIONS.contains(&section));
        if !is_override {
            rest.push(a);
            continue;
        }
        let value = match value {
            Some(v) => v,
            None => it.next().ok_or_else(|| Error::Config(format!("`--{key}` needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

/// What produced an artifact: embedded in every file a command writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
        }
    }
}
