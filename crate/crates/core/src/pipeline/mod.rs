//! Config-driven runs of ingest → blocking → similarity → evaluation.
//!
//! Outputs are written with a `.partial` suffix and renamed only once every
//! stage has succeeded, so a failed run leaves its partial files behind under
//! names no consumer will mistake for a finished run.

mod config;
mod generate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::blocking::{Blocking, LshReport};
use crate::evaluation::{curve_points, match_metrics, BlockingReport, Curve, MatchReport, SweepReport};
use crate::ingest::{load_dataset, read_file, LoadOptions, PropertyMap};
use crate::io;
use crate::model::{CandidateSet, Dataset, EntityPair, GroundTruth, Sources};
use crate::par;
use crate::similarity::{
    feature_library, score_candidates, select_features, train_linear, FeatureFunction, LinearModel, LinkSpec,
    Matching, ScoredPairs, Scorer, TrainOptions, Vectorizer,
};

pub use config::{
    is_threshold_param, BlockingConfig, EvaluationConfig, InputConfig, Inputs, MethodConfig, PipelineConfig,
    SimilarityConfig, SpecName, SweepConfig, CONFIG_VERSION, SWEEP_PARAMS,
};
pub use generate::{generate_corpus, training_pairs, Corruption, SyntheticCorpus, SyntheticCorpusSpec, CORPUS_SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Blocking,
    Similarity,
    Evaluation,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Config => "config",
            Self::Ingest => "ingest",
            Self::Blocking => "blocking",
            Self::Similarity => "similarity",
            Self::Evaluation => "evaluation",
            Self::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[error("[{stage}] {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError { stage, message: e.to_string() })
    }
}

/// Command-line overrides of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    /// 0 keeps the ambient thread pool.
    pub workers: usize,
    pub seed: Option<u64>,
}

impl RunOptions {
    /// The config with the seed override applied.
    pub fn apply(&self, config: &PipelineConfig) -> PipelineConfig {
        let mut c = config.clone();
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        c
    }

    pub fn output_dir(&self, config: &PipelineConfig) -> PathBuf {
        match (&self.output_dir, &config.output_dir) {
            (Some(dir), _) => dir.clone(),
            (None, Some(dir)) => config.resolve(dir),
            (None, None) => config.base_dir.join("erkit-out"),
        }
    }
}

/// Reads a config file; relative paths in it resolve against its directory.
pub fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    let text = read_file(path).stage(Stage::Config)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    PipelineConfig::parse(&text, base).stage(Stage::Config)
}

/// The loaded inputs of a run.
#[derive(Debug, Clone)]
pub struct LoadedInputs {
    pub d1: Dataset,
    pub d2: Option<Dataset>,
}

impl LoadedInputs {
    pub fn sources(&self) -> Sources<'_> {
        match &self.d2 {
            Some(d2) => Sources::bilateral(&self.d1, d2),
            None => Sources::dedup(&self.d1),
        }
    }
}

fn load_input(config: &PipelineConfig, input: &InputConfig) -> Result<Dataset, String> {
    let mapping = match &input.property_map {
        Some(p) => PropertyMap::parse_tsv(&read_file(&config.resolve(p)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?,
        None => PropertyMap::default(),
    };
    let opts = LoadOptions {
        mapping,
        label: input.label.clone(),
        type_filter: input.type_filter.as_ref().map(|t| t.iter().cloned().collect()),
        name: input.name.clone(),
    };
    let path = config.resolve(&input.path);
    load_dataset(&path, config.input_format(input)?, &opts).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn load_inputs(config: &PipelineConfig) -> Result<LoadedInputs, PipelineError> {
    let d1 = load_input(config, &config.inputs.d1).stage(Stage::Ingest)?;
    let d2 = config.inputs.d2.as_ref().map(|i| load_input(config, i)).transpose().stage(Stage::Ingest)?;
    log::info!("loaded {} entities in d1{}", d1.len(), d2.as_ref().map_or(String::new(), |d| format!(", {} in d2", d.len())));
    Ok(LoadedInputs { d1, d2 })
}

pub fn load_ground_truth(config: &PipelineConfig, sources: &Sources<'_>) -> Result<Option<GroundTruth>, PipelineError> {
    let Some(eval) = &config.evaluation else { return Ok(None) };
    let path = config.resolve(&eval.ground_truth);
    let text = read_file(&path).stage(Stage::Evaluation)?;
    let gt = io::read_ground_truth(&text, sources.mode())
        .map_err(|e| format!("{}: {e}", path.display()))
        .stage(Stage::Evaluation)?;
    gt.validate(sources).map_err(|e| format!("{}: {e}", path.display())).stage(Stage::Evaluation)?;
    Ok(Some(gt))
}

/// The feature library: the configured names, else the model's, else all five.
fn library(config: &PipelineConfig, model: Option<&LinearModel>) -> Result<Vec<FeatureFunction>, String> {
    match (&config.similarity.features, model) {
        (Some(names), _) => select_features(names).map_err(|e| e.to_string()),
        (None, Some(m)) => select_features(&m.library).map_err(|e| e.to_string()),
        (None, None) => Ok(feature_library()),
    }
}

pub fn read_model(path: &Path) -> Result<LinearModel, String> {
    let text = read_file(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// A vectorizer and link specification for the config. Trains the model
/// first when the config asks for training; the fitted model is returned.
pub fn build_matcher<'a>(
    config: &PipelineConfig,
    sources: Sources<'a>,
) -> Result<(Vectorizer<'a>, LinkSpec, Option<LinearModel>), PipelineError> {
    let s = &config.similarity;
    let rule = config.decision_rule().stage(Stage::Config)?;
    let loaded = s.model.as_ref().map(|p| read_model(&config.resolve(p))).transpose().stage(Stage::Similarity)?;
    let vectorizer = Vectorizer::new(sources, library(config, loaded.as_ref()).stage(Stage::Config)?);
    let names: Vec<String> = vectorizer.library().iter().map(|f| f.name().to_owned()).collect();
    let (scorer, trained) = match s.spec {
        SpecName::LearnedLinear => {
            let model = match (loaded, &s.training) {
                (Some(m), _) => {
                    if m.library != names || m.schema != vectorizer.schema() {
                        return Err(PipelineError {
                            stage: Stage::Similarity,
                            message: "model library or schema does not match the configured inputs".into(),
                        });
                    }
                    m
                }
                (None, Some(t)) => {
                    let path = config.resolve(t);
                    let text = read_file(&path).stage(Stage::Similarity)?;
                    let labeled = io::read_labeled(&text, sources.mode())
                        .map_err(|e| format!("{}: {e}", path.display()))
                        .stage(Stage::Similarity)?;
                    let defaults = TrainOptions::default();
                    let opts = TrainOptions {
                        epochs: s.epochs.unwrap_or(defaults.epochs),
                        learning_rate: s.learning_rate.unwrap_or(defaults.learning_rate),
                    };
                    train_linear(&labeled, &vectorizer, opts).stage(Stage::Similarity)?
                }
                (None, None) => unreachable!("validated: learned_linear has a model or training file"),
            };
            let trained = s.training.is_some().then(|| model.clone());
            (Scorer::Linear(model), trained)
        }
        _ => match &s.weights {
            Some(w) if w.len() != vectorizer.dimension() => {
                return Err(PipelineError {
                    stage: Stage::Config,
                    message: format!("{} weights given for {} feature slots", w.len(), vectorizer.dimension()),
                })
            }
            Some(w) => (Scorer::WeightedMean(w.clone()), None),
            None => (Scorer::Mean, None),
        },
    };
    Ok((vectorizer, LinkSpec::new(scorer, rule), trained))
}

/// Pair emission counts in streaming mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StreamStats {
    pub emitted: u64,
    pub repeats: u64,
}

/// Scores pairs as blocks emit them, classifying repeated pairs again, then
/// keeps one score per pair.
pub fn score_streaming(
    blocking: &Blocking,
    spec: &LinkSpec,
    vectorizer: &Vectorizer<'_>,
) -> Result<(CandidateSet, ScoredPairs, StreamStats), PipelineError> {
    let sources = *vectorizer.sources();
    let mut scores: BTreeMap<EntityPair, (f64, bool)> = BTreeMap::new();
    let mut stats = StreamStats::default();
    let mut failure = None;
    blocking.for_each_pair(&sources, |pair| {
        if failure.is_some() {
            return;
        }
        stats.emitted += 1;
        match vectorizer.vectorize(&pair).and_then(|v| spec.score(&v)) {
            Ok(s) => {
                if scores.insert(pair, (s.value, s.no_evidence)).is_some() {
                    stats.repeats += 1;
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e).stage(Stage::Similarity);
    }
    let no_evidence = scores.values().filter(|(_, n)| *n).count();
    let candidates = CandidateSet::new(blocking.method, scores.keys().cloned().collect::<BTreeSet<_>>());
    let scores = scores.into_iter().map(|(p, (s, _))| (p, s)).collect();
    Ok((candidates, ScoredPairs { scores, no_evidence }, stats))
}

#[derive(Debug, Serialize)]
struct BlockingMeta<'a> {
    method: &'static str,
    params: serde_json::Value,
    purge: Option<usize>,
    omega: u64,
    candidates: usize,
    stats: &'a crate::blocking::BlockStats,
    lsh: Option<&'a LshReport>,
    streaming: Option<StreamStats>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    erkit_version: &'static str,
    config_version: u32,
    config_format: &'static str,
    config_sha256: String,
    seed: u64,
    mode: crate::model::Mode,
    blocking_method: &'static str,
    spec: SpecName,
    streaming: bool,
    parallel_feature: bool,
    outputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Digest of the canonical TOML form of the config, without its output
/// directory.
pub fn config_digest(config: &PipelineConfig) -> String {
    let mut c = config.clone();
    c.output_dir = None;
    sha256_hex(c.to_toml().as_bytes())
}

/// Files of one run, staged under `.partial` names until committed.
struct Staging {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Staging {
    fn new(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display())).stage(Stage::Output)?;
        Ok(Self { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), PipelineError> {
        let path = self.dir.join(format!("{name}.partial"));
        fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display())).stage(Stage::Output)?;
        self.files.insert(name.to_owned(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(value).stage(Stage::Output)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn commit(self) -> Result<Vec<PathBuf>, PipelineError> {
        let mut out = Vec::new();
        for name in self.files.keys() {
            let from = self.dir.join(format!("{name}.partial"));
            let to = self.dir.join(name);
            fs::rename(&from, &to).map_err(|e| format!("{}: {e}", to.display())).stage(Stage::Output)?;
            out.push(to);
        }
        Ok(out)
    }
}

/// What a run produced, besides the files.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub candidates: CandidateSet,
    pub matching: Matching,
    pub blocking_report: BlockingReport,
    pub match_report: Option<MatchReport>,
    pub curves: Vec<Curve>,
}

/// Runs every stage and writes candidates.tsv, decisions.tsv, review.tsv,
/// blocking_meta.json, blocking_report.json, match_report.json (with a
/// ground truth), model.json (when trained), one curve_<param>.csv per
/// configured sweep, and manifest.json.
pub fn run_pipeline(config: &PipelineConfig, opts: &RunOptions) -> Result<RunOutput, PipelineError> {
    let config = opts.apply(config);
    config.validate().stage(Stage::Config)?;
    let dir = opts.output_dir(&config);
    par::with_workers(opts.workers, || run_validated(&config, &dir))
}

fn run_validated(config: &PipelineConfig, dir: &Path) -> Result<RunOutput, PipelineError> {
    let inputs = load_inputs(config)?;
    let sources = inputs.sources();
    let gt = load_ground_truth(config, &sources)?;

    let method = config.blocking_method().stage(Stage::Config)?;
    let blocking = method.blocks(&sources, config.blocking.purge).stage(Stage::Blocking)?;

    let (vectorizer, spec, trained) = build_matcher(config, sources)?;
    let (candidates, scored, stream) = if config.similarity.streaming {
        let (c, s, stats) = score_streaming(&blocking, &spec, &vectorizer)?;
        (c, s, Some(stats))
    } else {
        let c = blocking.candidates(&sources);
        let s = score_candidates(&c, &spec, &vectorizer).stage(Stage::Similarity)?;
        (c, s, None)
    };
    log::info!("{} produced {} candidate pairs", method.name(), candidates.len());
    let matching = scored.decide(spec.rule);
    if matching.no_evidence > 0 {
        log::warn!("{} pairs had no comparable values and scored 0", matching.no_evidence);
    }

    let omega = sources.omega_size();
    let empty = GroundTruth::default();
    let blocking_report = BlockingReport::new(&candidates, omega, gt.as_ref().unwrap_or(&empty), None).stage(Stage::Evaluation)?;
    let match_report = match (&gt, &config.evaluation) {
        (Some(gt), Some(eval)) => {
            Some(match_metrics(&matching.decisions, gt, &candidates, eval.indeterminate).stage(Stage::Evaluation)?)
        }
        _ => None,
    };
    let mut curves = Vec::new();
    if let (Some(gt), Some(eval)) = (&gt, &config.evaluation) {
        for s in &eval.sweeps {
            let cache = is_threshold_param(&s.param).then_some((&candidates, &scored));
            curves.push(sweep_loaded(config, &s.param, &s.values, &sources, gt, cache)?);
        }
    }

    let mut staging = Staging::new(dir)?;
    staging.write("candidates.tsv", &io::write_pairs(candidates.iter()))?;
    staging.write("decisions.tsv", &io::write_decisions(&matching.decisions))?;
    staging.write("review.tsv", &io::write_review(&matching.decisions))?;
    staging.write_json(
        "blocking_meta.json",
        &BlockingMeta {
            method: method.name(),
            params: method.describe(),
            purge: config.blocking.purge,
            omega,
            candidates: candidates.len(),
            stats: &blocking.stats,
            lsh: blocking.lsh.as_ref(),
            streaming: stream,
        },
    )?;
    staging.write_json("blocking_report.json", &blocking_report)?;
    if let Some(m) = &match_report {
        staging.write_json("match_report.json", m)?;
    }
    if let Some(model) = &trained {
        staging.write_json("model.json", model)?;
    }
    for curve in &curves {
        staging.write(&format!("curve_{}.csv", curve.param), &curve.to_csv().stage(Stage::Output)?)?;
    }
    let manifest = Manifest {
        erkit_version: env!("CARGO_PKG_VERSION"),
        config_version: config.version,
        config_format: "toml",
        config_sha256: config_digest(config),
        seed: config.seed,
        mode: sources.mode(),
        blocking_method: method.name(),
        spec: config.similarity.spec,
        streaming: config.similarity.streaming,
        parallel_feature: cfg!(feature = "parallel"),
        outputs: staging.files.clone(),
    };
    staging.write_json("manifest.json", &manifest)?;
    let files = staging.commit()?;

    Ok(RunOutput {
        output_dir: dir.to_path_buf(),
        files,
        candidates,
        matching,
        blocking_report,
        match_report,
        curves,
    })
}

/// Runs `param` over `values` and returns the curve: PC/RR per blocking
/// parameter value, or precision/recall per threshold value. Threshold
/// sweeps block and score once and only re-apply the decision rule.
pub fn sweep(config: &PipelineConfig, param: &str, values: &[f64], opts: &RunOptions) -> Result<Curve, PipelineError> {
    let config = opts.apply(config);
    config.validate().stage(Stage::Config)?;
    config.validate_sweep(param, values).stage(Stage::Config)?;
    if config.evaluation.is_none() {
        return Err(PipelineError { stage: Stage::Config, message: "a sweep needs [evaluation] with a ground truth".into() });
    }
    par::with_workers(opts.workers, || {
        let inputs = load_inputs(&config)?;
        let sources = inputs.sources();
        let gt = load_ground_truth(&config, &sources)?.expect("evaluation configured");
        sweep_loaded(&config, param, values, &sources, &gt, None)
    })
}

fn sweep_loaded(
    config: &PipelineConfig,
    param: &str,
    values: &[f64],
    sources: &Sources<'_>,
    gt: &GroundTruth,
    cache: Option<(&CandidateSet, &ScoredPairs)>,
) -> Result<Curve, PipelineError> {
    config.validate_sweep(param, values).stage(Stage::Config)?;
    let mut points = Vec::with_capacity(values.len());
    if is_threshold_param(param) {
        let owned;
        let (candidates, scored) = match cache {
            Some(c) => c,
            None => {
                let method = config.blocking_method().stage(Stage::Config)?;
                let (c, _) = method.run(sources, config.blocking.purge).stage(Stage::Blocking)?;
                let (vectorizer, spec, _) = build_matcher(config, *sources)?;
                let s = score_candidates(&c, &spec, &vectorizer).stage(Stage::Similarity)?;
                owned = (c, s);
                (&owned.0, &owned.1)
            }
        };
        let policy = config.evaluation.as_ref().map(|e| e.indeterminate).unwrap_or_default();
        for &v in values {
            let rule = config.with_param(param, v).and_then(|c| c.decision_rule()).stage(Stage::Config)?;
            let m = scored.decide(rule);
            let report = match_metrics(&m.decisions, gt, candidates, policy).stage(Stage::Evaluation)?;
            points.push((v, SweepReport::Matching(report)));
        }
    } else {
        let omega = sources.omega_size();
        for &v in values {
            let c = config.with_param(param, v).stage(Stage::Config)?;
            let method = c.blocking_method().stage(Stage::Config)?;
            let (cands, _) = method.run(sources, c.blocking.purge).stage(Stage::Blocking)?;
            let report = BlockingReport::new(&cands, omega, gt, None).stage(Stage::Evaluation)?;
            points.push((v, SweepReport::Blocking(report)));
        }
    }
    curve_points(param, &points).stage(Stage::Evaluation)
}
