//! Settings resolution: command-line flags, then the config file, then
//! defaults. The config file is flat TOML whose keys are the flag names
//! (`walk-length = 80`).

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use graphfolk::graph::Delimiter;
use graphfolk::predict::LearnerKind;
use graphfolk::seed::derive_seed;
use graphfolk::sgns::NOISE_POWER;
use graphfolk::{SgnsConfig, WalkConfig};
use serde::Deserialize;

use crate::args::{EvalArgs, GraphArgs, TrainArgs, WalkArgs};
use crate::InputError;

pub const DEFAULT_MIN_IN_DEGREE: usize = 10;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub delimiter: Option<String>,
    pub min_in_degree: Option<usize>,
    pub walk_length: Option<usize>,
    pub walks_per_vertex: Option<usize>,
    pub dim: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub window_radius: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub learner: Option<String>,
    pub folds: Option<usize>,
    pub inner_folds: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| InputError(format!("config {}: {e}", path.display())).into())
    }
}

/// Resolved global settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub threads: usize,
    file: std::sync::Arc<ConfigFile>,
}

pub fn parse_delimiter(s: &str) -> Result<Delimiter> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        _ if s == "whitespace" || s == " " => Ok(Delimiter::Whitespace),
        (Some('\\'), Some('t')) if s.len() == 2 => Ok(Delimiter::Char('\t')),
        (Some(c), None) => Ok(Delimiter::Char(c)),
        _ => bail!(InputError(format!("delimiter must be a single character, got {s:?}"))),
    }
}

impl Settings {
    pub fn resolve(seed: Option<u64>, threads: Option<usize>, file: ConfigFile) -> Result<Self> {
        let threads = threads.or(file.threads).unwrap_or(1);
        if threads == 0 {
            bail!(InputError("threads must be at least 1".into()));
        }
        Ok(Settings {
            seed: seed.or(file.seed).unwrap_or(0),
            threads,
            file: std::sync::Arc::new(file),
        })
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }

    pub fn delimiter(&self, args: &GraphArgs) -> Result<Delimiter> {
        match args.delimiter.as_deref().or(self.file.delimiter.as_deref()) {
            Some(s) => parse_delimiter(s),
            None => Ok(Delimiter::Whitespace),
        }
    }

    pub fn min_in_degree(&self, args: &GraphArgs) -> usize {
        args.min_in_degree.or(self.file.min_in_degree).unwrap_or(DEFAULT_MIN_IN_DEGREE)
    }

    pub fn walk(&self, args: &WalkArgs) -> Result<WalkConfig> {
        let cfg = WalkConfig {
            walk_length: args.walk_length.or(self.file.walk_length).unwrap_or(80),
            walks_per_vertex: args.walks_per_vertex.or(self.file.walks_per_vertex).unwrap_or(1),
            seed: self.stage_seed("walks"),
            parallel: self.threads > 1,
        };
        if cfg.walk_length == 0 || cfg.walks_per_vertex == 0 {
            bail!(InputError("walk length and walks per vertex must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn sgns(&self, args: &TrainArgs) -> Result<SgnsConfig> {
        let d = SgnsConfig::default();
        let cfg = SgnsConfig {
            dim: args.dim.or(self.file.dim).unwrap_or(d.dim),
            window_radius: args.window_radius.or(self.file.window_radius).unwrap_or(d.window_radius),
            negatives: args.negatives.or(self.file.negatives).unwrap_or(d.negatives),
            initial_lr: args.lr.or(self.file.lr).unwrap_or(d.initial_lr),
            epochs: args.epochs.or(self.file.epochs).unwrap_or(d.epochs),
            power: NOISE_POWER,
            seed: self.stage_seed("sgns"),
            threads: self.threads,
        };
        cfg.validate().map_err(|e| InputError(e.to_string()))?;
        Ok(cfg)
    }

    /// Embedding dimensions to sweep; a single entry unless `--dims` is given.
    pub fn dims(&self, dims: &Option<Vec<usize>>, args: &TrainArgs) -> Result<Vec<usize>> {
        let dims = dims.clone().or_else(|| self.file.dims.clone());
        match dims {
            Some(d) if d.is_empty() || d.contains(&0) => bail!(InputError("dims must be positive".into())),
            Some(d) => Ok(d),
            None => Ok(vec![self.sgns(args)?.dim]),
        }
    }

    pub fn learner(&self, args: &EvalArgs) -> Result<Option<LearnerKind>> {
        let name = args.learner.clone().or_else(|| self.file.learner.clone());
        name.map(|n| match n.as_str() {
            "logistic" => Ok(LearnerKind::Logistic),
            "ridge" => Ok(LearnerKind::Ridge),
            "kernel-ridge" => Ok(LearnerKind::KernelRidge),
            other => bail!(InputError(format!("unknown learner {other:?}"))),
        })
        .transpose()
    }

    pub fn folds(&self, args: &EvalArgs) -> (usize, usize) {
        (
            args.folds.or(self.file.folds).unwrap_or(DEFAULT_FOLDS),
            args.inner_folds.or(self.file.inner_folds).unwrap_or(DEFAULT_FOLDS),
        )
    }
}
