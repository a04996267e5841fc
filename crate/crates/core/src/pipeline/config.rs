//! The TOML pipeline configuration.
//!
//! ```toml
//! version = 1
//! mode = "bilateral"          # or "dedup" (no d2)
//! seed = 42
//!
//! [inputs.d1]
//! path = "d1.csv"             # format from the extension unless `format` is set
//! label = "name"
//! property_map = "map.tsv"    # optional two-column rename file
//!
//! [inputs.d2]
//! path = "d2.csv"
//! label = "name"
//!
//! [blocking]
//! method = "traditional"      # sorted_neighborhood | canopies | minhash
//! key = "lower_tokens(:instance) | year(dob)"
//! purge = 200                 # optional block size cap
//!
//! [similarity]
//! spec = "two_threshold"      # threshold | two_threshold | learned_linear
//! lower = 0.4
//! upper = 0.7
//!
//! [evaluation]
//! ground_truth = "gt.tsv"
//! sweeps = [{ param = "upper", values = [0.5, 0.6, 0.7] }]
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blocking::{BlockingKeySpec, BlockingMethod, CanopyParams, Distance, FieldRef, MinHashParams, SeedOrder};
use crate::evaluation::IndeterminatePolicy;
use crate::ingest::Format;
use crate::model::Mode;
use crate::similarity::{select_features, DecisionRule, SpecKind};

/// Bumped whenever the meaning of a config field changes.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub inputs: Inputs,
    pub blocking: BlockingConfig,
    #[serde(default)]
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub evaluation: Option<EvaluationConfig>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub d1: InputConfig,
    #[serde(default)]
    pub d2: Option<InputConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<Format>,
    /// Label property (N-Triples) or column (CSV).
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub property_map: Option<PathBuf>,
    #[serde(default)]
    pub type_filter: Option<Vec<String>>,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodConfig {
    Traditional {
        key: String,
    },
    SortedNeighborhood {
        key: String,
        window: usize,
    },
    Canopies {
        field: String,
        tight: f64,
        loose: f64,
        #[serde(default = "default_distance")]
        distance: Distance,
        /// Process seeds in a seeded random order instead of by id.
        #[serde(default)]
        random_order: bool,
    },
    #[serde(rename = "minhash")]
    MinHash {
        field: String,
        num_hashes: usize,
        bands: usize,
        rows: usize,
    },
}

fn default_distance() -> Distance {
    Distance::JaccardTokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingConfig {
    #[serde(flatten)]
    pub method: MethodConfig,
    #[serde(default)]
    pub purge: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecName {
    #[default]
    Threshold,
    TwoThreshold,
    LearnedLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityConfig {
    /// Feature function names; all five when absent.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub spec: SpecName,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    /// Per-slot weights turning the mean scorer into a weighted mean.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Learned-linear: a saved model, or labeled pairs to train on.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub training: Option<PathBuf>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    /// Score pairs block by block as they are emitted.
    #[serde(default)]
    pub streaming: bool,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            features: None,
            spec: SpecName::Threshold,
            threshold: None,
            lower: None,
            upper: None,
            weights: None,
            model: None,
            training: None,
            epochs: None,
            learning_rate: None,
            streaming: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub ground_truth: PathBuf,
    #[serde(default)]
    pub indeterminate: IndeterminatePolicy,
    #[serde(default)]
    pub sweeps: Vec<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: String,
    pub values: Vec<f64>,
}

/// Parameters a sweep may vary.
pub const SWEEP_PARAMS: [&str; 7] = ["window", "tight", "loose", "purge", "threshold", "lower", "upper"];

pub fn is_threshold_param(p: &str) -> bool {
    matches!(p, "threshold" | "lower" | "upper")
}

const DEFAULT_THRESHOLD: f64 = 0.5;

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, String> {
        let mut config: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn input_format(&self, input: &InputConfig) -> Result<Format, String> {
        input
            .format
            .or_else(|| Format::from_path(&input.path))
            .ok_or_else(|| format!("cannot tell the format of {}; set `format`", input.path.display()))
    }

    /// The configured blocking method, validated.
    pub fn blocking_method(&self) -> Result<BlockingMethod, String> {
        let err = |e: crate::blocking::BlockingError| e.to_string();
        let key = |k: &str| k.parse::<BlockingKeySpec>().map_err(err);
        Ok(match &self.blocking.method {
            MethodConfig::Traditional { key: k } => BlockingMethod::Traditional { key: key(k)? },
            MethodConfig::SortedNeighborhood { key: k, window } => {
                if *window < 2 {
                    return Err(format!("window must be at least 2, got {window}"));
                }
                BlockingMethod::SortedNeighborhood { key: key(k)?.into_single_value().map_err(err)?, window: *window }
            }
            MethodConfig::Canopies { field, tight, loose, distance, random_order } => {
                let mut params = CanopyParams::new(*tight, *loose, *distance).map_err(err)?;
                if *random_order {
                    params = params.with_seed_order(SeedOrder::Random(self.seed));
                }
                BlockingMethod::Canopies { params, field: FieldRef::parse(field) }
            }
            MethodConfig::MinHash { field, num_hashes, bands, rows } => BlockingMethod::MinHash {
                params: MinHashParams::new(*num_hashes, *bands, *rows, self.seed).map_err(err)?,
                field: FieldRef::parse(field),
            },
        })
    }

    pub fn spec_kind(&self) -> SpecKind {
        match self.similarity.spec {
            SpecName::Threshold => SpecKind::BooleanThreshold,
            SpecName::TwoThreshold => SpecKind::TwoThreshold,
            SpecName::LearnedLinear => SpecKind::LearnedLinear,
        }
    }

    /// The decision rule; learned-linear uses two thresholds when both bounds
    /// are given, else a single threshold (0.5 by default).
    pub fn decision_rule(&self) -> Result<DecisionRule, String> {
        let s = &self.similarity;
        let err = |e: crate::similarity::SimilarityError| e.to_string();
        match (s.spec, s.lower, s.upper) {
            (SpecName::TwoThreshold, Some(l), Some(u)) | (SpecName::LearnedLinear, Some(l), Some(u)) => {
                DecisionRule::two_threshold(l, u).map_err(err)
            }
            (SpecName::TwoThreshold, _, _) => Err("two_threshold needs both `lower` and `upper`".into()),
            _ => DecisionRule::threshold(s.threshold.unwrap_or(DEFAULT_THRESHOLD)).map_err(err),
        }
    }

    /// Checks everything that can be checked before any stage runs.
    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        let exists = |what: &str, p: &Path| {
            let full = self.resolve(p);
            if full.is_file() {
                Ok(())
            } else {
                Err(format!("{what} {} does not exist", full.display()))
            }
        };
        match (self.mode, &self.inputs.d2) {
            (Mode::Dedup, Some(_)) => return Err("dedup mode takes a single input; remove inputs.d2".into()),
            (Mode::Bilateral, None) => return Err("bilateral mode needs inputs.d2".into()),
            _ => {}
        }
        for (name, input) in std::iter::once(("d1", &self.inputs.d1)).chain(self.inputs.d2.iter().map(|d| ("d2", d))) {
            exists(&format!("input {name}"), &input.path)?;
            self.input_format(input)?;
            if let Some(m) = &input.property_map {
                exists("property map", m)?;
            }
        }
        self.blocking_method()?;
        if let Some(cap) = self.blocking.purge {
            if cap < 2 {
                return Err(format!("purge cap must be at least 2, got {cap}"));
            }
        }
        let s = &self.similarity;
        if let Some(names) = &s.features {
            select_features(names).map_err(|e| e.to_string())?;
        }
        self.decision_rule()?;
        if s.spec == SpecName::LearnedLinear {
            if s.weights.is_some() {
                return Err("`weights` do not apply to learned_linear".into());
            }
            match (&s.model, &s.training) {
                (Some(m), None) => exists("model", m)?,
                (None, Some(t)) => exists("training file", t)?,
                _ => return Err("learned_linear needs exactly one of `model` or `training`".into()),
            }
        } else if s.model.is_some() || s.training.is_some() {
            return Err("`model` and `training` only apply to learned_linear".into());
        }
        if let Some(eval) = &self.evaluation {
            exists("ground truth", &eval.ground_truth)?;
            for sweep in &eval.sweeps {
                self.validate_sweep(&sweep.param, &sweep.values)?;
            }
        }
        Ok(())
    }

    pub fn validate_sweep(&self, param: &str, values: &[f64]) -> Result<(), String> {
        if !SWEEP_PARAMS.contains(&param) {
            return Err(format!("unknown sweep parameter {param:?}; expected one of {}", SWEEP_PARAMS.join(", ")));
        }
        if values.is_empty() {
            return Err(format!("sweep over {param} has no values"));
        }
        let method_ok = match (&self.blocking.method, param) {
            (MethodConfig::SortedNeighborhood { .. }, "window") => true,
            (MethodConfig::Canopies { .. }, "tight" | "loose") => true,
            (MethodConfig::SortedNeighborhood { .. }, "purge") => false,
            (_, "purge") => true,
            (_, p) => is_threshold_param(p),
        };
        if !method_ok {
            return Err(format!("parameter {param:?} does not apply to {:?} blocking", self.blocking_method()?.name()));
        }
        match (self.decision_rule()?, param) {
            (DecisionRule::Threshold { .. }, "lower" | "upper") | (DecisionRule::TwoThreshold { .. }, "threshold") => {
                Err(format!("parameter {param:?} does not apply to the configured decision rule"))
            }
            _ => Ok(()),
        }
    }

    /// A copy with one blocking or threshold parameter replaced.
    pub fn with_param(&self, param: &str, value: f64) -> Result<Self, String> {
        let mut c = self.clone();
        let as_count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("{param} takes whole numbers, got {v}"))
            }
        };
        match (&mut c.blocking.method, param) {
            (MethodConfig::SortedNeighborhood { window, .. }, "window") => *window = as_count(value)?,
            (MethodConfig::Canopies { tight, .. }, "tight") => *tight = value,
            (MethodConfig::Canopies { loose, .. }, "loose") => *loose = value,
            (_, "purge") => c.blocking.purge = Some(as_count(value)?),
            (_, "threshold") => c.similarity.threshold = Some(value),
            (_, "lower") => c.similarity.lower = Some(value),
            (_, "upper") => c.similarity.upper = Some(value),
            _ => return Err(format!("parameter {param:?} does not apply to this config")),
        }
        Ok(c)
    }
}
