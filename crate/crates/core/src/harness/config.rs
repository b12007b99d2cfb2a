//! `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; see
//! [`ExperimentConfig::default`] and the README for the full list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::DEFAULT_THRESHOLD;
use crate::factorizer::MfConfig;
use crate::metrics::DEFAULT_ALPHA;
use crate::par::Execution;
use crate::reranker::DiversityKind;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key}: cannot parse {value:?}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub ratings: PathBuf,
    pub items: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub relevance_threshold: u8,
    /// Train ratings at or above this value form the liked profile.
    pub liked_threshold: u8,
    pub candidates: usize,
    pub mf: MfConfig,
    pub lambdas: Vec<f64>,
    pub cutoffs: Vec<usize>,
    /// N used for the precision-vs-diversity sweep over lambda.
    pub tradeoff_n: usize,
    pub algorithms: Vec<DiversityKind>,
    /// Lambda each diversifier is charted at in the metric-vs-N charts.
    pub sweep_lambda: BTreeMap<DiversityKind, f64>,
    pub alpha: f64,
    pub knn_k: usize,
    pub normalize_scores: bool,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ratings: PathBuf::from("data/ml-1m/ratings.dat"),
            items: PathBuf::from("data/ml-1m/movies.dat"),
            out_dir: PathBuf::from("out"),
            seed: 42,
            holdout_fraction: 0.2,
            relevance_threshold: DEFAULT_THRESHOLD,
            liked_threshold: DEFAULT_THRESHOLD,
            candidates: 100,
            mf: MfConfig::default(),
            lambdas: (0..=10).map(|k| f64::from(k) / 10.0).collect(),
            cutoffs: vec![5, 10, 20, 30],
            tradeoff_n: 10,
            algorithms: vec![
                DiversityKind::None,
                DiversityKind::Mmr,
                DiversityKind::IntentAwareFeatures,
                DiversityKind::IntentAwareSubprofiles,
            ],
            sweep_lambda: [
                (DiversityKind::Mmr, 0.5),
                (DiversityKind::IntentAwareFeatures, 0.5),
                (DiversityKind::IntentAwareSubprofiles, 0.5),
            ]
            .into(),
            alpha: DEFAULT_ALPHA,
            knn_k: 10,
            normalize_scores: false,
            execution: Execution::Parallel,
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

impl ExperimentConfig {
    /// Parses config text over the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: k + 1,
                reason: format!("expected `key = value`, found {line:?}"),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative data paths stay relative to the working
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Sets one key; does not re-validate.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason,
        };
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        match key {
            "ratings" => self.ratings = PathBuf::from(value),
            "items" => self.items = PathBuf::from(value),
            "out" | "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => {
                self.seed = num(value).map_err(bad)?;
                self.mf.seed = self.seed;
            }
            "holdout_fraction" => self.holdout_fraction = num(value).map_err(bad)?,
            "relevance_threshold" => self.relevance_threshold = num(value).map_err(bad)?,
            "liked_threshold" => self.liked_threshold = num(value).map_err(bad)?,
            "candidates" => self.candidates = num(value).map_err(bad)?,
            "mf.dims" => self.mf.dims = num(value).map_err(bad)?,
            "mf.learning_rate" => self.mf.learning_rate = num(value).map_err(bad)?,
            "mf.regularization" => self.mf.regularization = num(value).map_err(bad)?,
            "mf.epochs" => self.mf.epochs = num(value).map_err(bad)?,
            "lambdas" => self.lambdas = parse_list(value).map_err(bad)?,
            "cutoffs" => self.cutoffs = parse_list(value).map_err(bad)?,
            "tradeoff_n" => self.tradeoff_n = num(value).map_err(bad)?,
            "algorithms" => self.algorithms = parse_list(value).map_err(bad)?,
            "alpha" => self.alpha = num(value).map_err(bad)?,
            "knn_k" => self.knn_k = num(value).map_err(bad)?,
            "normalize_scores" => self.normalize_scores = parse_bool(value).map_err(bad)?,
            "parallel" => {
                self.execution = if parse_bool(value).map_err(bad)? {
                    Execution::Parallel
                } else {
                    Execution::Sequential
                }
            }
            _ => {
                let Some(alg) = key.strip_prefix("lambda.") else {
                    return Err(ConfigError::UnknownKey(key.to_string()));
                };
                let kind: DiversityKind = alg.parse().map_err(bad)?;
                if kind == DiversityKind::None {
                    return Err(bad("the baseline has no lambda".into()));
                }
                self.sweep_lambda.insert(kind, num(value).map_err(bad)?);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |s: String| Err(ConfigError::Invalid(s));
        if self.lambdas.is_empty() || self.cutoffs.is_empty() || self.algorithms.is_empty() {
            return invalid("lambda grid, N grid and algorithm roster must be non-empty".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return invalid(format!("lambda {l} outside [0, 1]"));
        }
        if self.cutoffs.contains(&0) {
            return invalid("N values must be positive".into());
        }
        if !self.cutoffs.contains(&self.tradeoff_n) {
            return invalid(format!("tradeoff_n {} is not in the N grid", self.tradeoff_n));
        }
        for (k, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..k].contains(a) {
                return invalid(format!("algorithm {} listed twice", a.algorithm_name()));
            }
            if *a != DiversityKind::None {
                let Some(l) = self.sweep_lambda.get(a) else {
                    return invalid(format!("no lambda.{} set", a.algorithm_name()));
                };
                if self.lambda_index(*l).is_none() {
                    return invalid(format!("lambda.{} = {l} is not in the lambda grid", a.algorithm_name()));
                }
            }
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return invalid(format!("holdout_fraction {} outside (0, 1)", self.holdout_fraction));
        }
        for (name, t) in [("relevance_threshold", self.relevance_threshold), ("liked_threshold", self.liked_threshold)] {
            if !(1..=5).contains(&t) {
                return invalid(format!("{name} {t} outside 1..=5"));
            }
        }
        if self.candidates == 0 || self.knn_k == 0 {
            return invalid("candidates and knn_k must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return invalid(format!("alpha {} outside [0, 1]", self.alpha));
        }
        self.mf.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Position of `lambda` in the grid.
    pub fn lambda_index(&self, lambda: f64) -> Option<usize> {
        self.lambdas.iter().position(|&l| (l - lambda).abs() < 1e-9)
    }

    pub fn max_cutoff(&self) -> usize {
        self.cutoffs.iter().copied().max().unwrap_or(0)
    }

    /// Lambda an algorithm is charted at against N. The baseline ignores
    /// lambda, so it uses the first grid value.
    pub fn chart_lambda(&self, kind: DiversityKind) -> f64 {
        self.sweep_lambda.get(&kind).copied().unwrap_or(self.lambdas[0])
    }

    pub fn roster(&self) -> Vec<String> {
        self.algorithms.iter().map(|a| a.algorithm_name().to_string()).collect()
    }
}
