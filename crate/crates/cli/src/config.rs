use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use spforge::pipeline::RunConfig;

use crate::failure::{CmdResult, Context, Failure};

/// The config file: optional paths plus every run setting, in one flat
/// JSON object. Unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub records: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub run: RunConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        // `flatten` would swallow unknown keys, so split the object by hand.
        let mut map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
        let mut path = |key: &str| map.remove(key).map(serde_json::from_value::<PathBuf>).transpose();
        let (records, embeddings, model, out) = (path("records")?, path("embeddings")?, path("model")?, path("out")?);
        let run = serde_json::from_value(serde_json::Value::Object(map))?;
        Ok(Self { records, embeddings, model, out, run })
    }

    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = std::fs::read_to_string(path).context(format!("reading config {}", path.display()))?;
        Self::from_json(&text).context(format!("parsing config {}", path.display()))
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArg {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SplitArgs {
    /// Seed for the split, validation carve-out and tree sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of stories held out for testing.
    #[arg(long, value_name = "FRACTION")]
    pub test_fraction: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
#[group(multiple = false)]
pub struct SeverityArgs {
    /// Include the severity column.
    #[arg(long)]
    pub with_severity: bool,
    /// Drop the severity column.
    #[arg(long)]
    pub without_severity: bool,
}

impl SeverityArgs {
    fn choice(&self) -> Option<bool> {
        match (self.with_severity, self.without_severity) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

/// Flags common to most subcommands; every one is optional so that the
/// config file can supply it instead.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub split: SplitArgs,
    pub severity: SeverityArgs,
}

/// Applies precedence flags > config file > defaults.
pub fn resolve(o: &Overrides) -> CmdResult<PipelineConfig> {
    let mut cfg = match &o.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for (slot, flag) in [
        (&mut cfg.records, &o.records),
        (&mut cfg.embeddings, &o.embeddings),
        (&mut cfg.model, &o.model),
        (&mut cfg.out, &o.out),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(seed) = o.split.seed {
        cfg.run.seed = seed;
        cfg.run.train.seed = seed;
    }
    if let Some(f) = o.split.test_fraction {
        cfg.run.test_fraction = f;
    }
    if let Some(s) = o.severity.choice() {
        cfg.run.include_severity = s;
    }
    cfg.run.validate()?;
    let paths: Vec<&PathBuf> = [&cfg.records, &cfg.embeddings, &cfg.model, &cfg.out].into_iter().flatten().collect();
    for (i, a) in paths.iter().enumerate() {
        if paths[i + 1..].contains(a) {
            return Err(Failure::usage(format!("path {} is used for more than one role", a.display())));
        }
    }
    Ok(cfg)
}

pub fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> CmdResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Failure::usage(format!("--{flag} is required (on the command line or in --config)")))
}
