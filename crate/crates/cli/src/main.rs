use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use erkit::evaluation::{match_metrics, BlockingReport};
use erkit::ingest::{load_dataset, write_csv, Format, LoadOptions, PropertyMap};
use erkit::io;
use erkit::model::CandidateSet;
use erkit::par;
use erkit::pipeline::{
    build_matcher, generate_corpus, load_config, load_ground_truth, load_inputs, run_pipeline, sweep, training_pairs,
    Corruption, PipelineConfig, RunOptions, SyntheticCorpusSpec,
};
use erkit::similarity::{score_candidates, train_linear, TrainOptions, Vectorizer};

/// Named entity resolution: blocking, matching and evaluation.
#[derive(Parser)]
#[command(name = "erkit", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Seed for seeded components; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Never changes outputs.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Directory for output files.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and write it back as normalized CSV.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        format: Option<String>,
        /// Label property (N-Triples) or column (CSV).
        #[arg(long)]
        label: Option<String>,
        /// Two-column property rename file.
        #[arg(long)]
        property_map: Option<PathBuf>,
        /// Keep only subjects with this rdf:type (repeatable).
        #[arg(long)]
        type_filter: Vec<String>,
    },
    /// Run the blocking stage of a config: candidates.tsv, blocking_report.json.
    Block { config: PathBuf },
    /// Score a candidate file with the config's link specification.
    Match {
        config: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
    },
    /// Fit a learned-linear model on labeled pairs: model.json.
    Train {
        config: PathBuf,
        /// left, right, label (1/0) rows.
        #[arg(long)]
        training: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Blocking and, with --decisions, matching metrics for existing files.
    Evaluate {
        config: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        decisions: Option<PathBuf>,
        /// Reference candidate set for relative RR.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Run every stage of a config.
    Run { config: PathBuf },
    /// Vary one parameter and write curve_<param>.csv.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
    /// Write a synthetic corpus with ground truth and a starter config.
    Generate {
        #[arg(long, default_value_t = 200)]
        entities: usize,
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,
        /// Comma-separated: typo, token-drop, initialism, year-only-dob.
        #[arg(long, value_delimiter = ',', default_value = "typo,initialism")]
        ops: Vec<Corruption>,
        /// Probability of applying each op to a duplicate.
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
    },
}

impl Global {
    fn run_options(&self) -> RunOptions {
        RunOptions { output_dir: self.output_dir.clone(), workers: self.workers, seed: self.seed }
    }

    fn dir(&self, config: Option<&PipelineConfig>) -> PathBuf {
        match config {
            Some(c) => self.run_options().output_dir(c),
            None => self.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<PathBuf> {
    write(dir, name, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn config(path: &Path, g: &Global) -> Result<PipelineConfig> {
    let c = g.run_options().apply(&load_config(path)?);
    c.validate().map_err(|m| anyhow::anyhow!("[config] {m}"))?;
    Ok(c)
}

fn candidates_from(path: &Path, mode: erkit::model::Mode) -> Result<CandidateSet> {
    let pairs = io::read_pairs(&read(path)?, mode).with_context(|| path.display().to_string())?;
    Ok(CandidateSet::new("file", pairs))
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    match cli.command {
        Command::Ingest { input, format, label, property_map, type_filter } => {
            let format = match format.as_deref() {
                Some("csv") => Format::Csv,
                Some("ntriples" | "nt") => Format::Ntriples,
                Some(other) => bail!("unknown format {other:?}; expected csv or ntriples"),
                None => Format::from_path(&input).context("cannot tell the input format; pass --format")?,
            };
            let mapping = match &property_map {
                Some(p) => PropertyMap::parse_tsv(&read(p)?)?,
                None => PropertyMap::default(),
            };
            let type_filter = (!type_filter.is_empty()).then(|| type_filter.into_iter().collect());
            let d = load_dataset(&input, format, &LoadOptions { mapping, label, type_filter, name: None })?;
            let name = format!("{}.csv", d.name());
            let path = write(&g.dir(None), &name, &write_csv(&d)?)?;
            println!("{} entities, {} fields -> {}", d.len(), d.schema().len(), path.display());
        }
        Command::Block { config: path } => {
            let c = config(&path, &g)?;
            let dir = g.dir(Some(&c));
            par::with_workers(g.workers, || -> Result<()> {
                let inputs = load_inputs(&c)?;
                let src = inputs.sources();
                let gt = load_ground_truth(&c, &src)?.unwrap_or_default();
                let method = c.blocking_method().map_err(anyhow::Error::msg)?;
                let (cands, _) = method.run(&src, c.blocking.purge)?;
                write(&dir, "candidates.tsv", &io::write_pairs(cands.iter()))?;
                write_json(&dir, "blocking_report.json", &BlockingReport::new(&cands, src.omega_size(), &gt, None)?)?;
                println!("{} candidate pairs of {} -> {}", cands.len(), src.omega_size(), dir.display());
                Ok(())
            })?;
        }
        Command::Match { config: path, candidates } => {
            let c = config(&path, &g)?;
            let dir = g.dir(Some(&c));
            par::with_workers(g.workers, || -> Result<()> {
                let inputs = load_inputs(&c)?;
                let src = inputs.sources();
                let cands = candidates_from(&candidates, src.mode())?;
                cands.validate(&src)?;
                let (vectorizer, spec, _) = build_matcher(&c, src)?;
                let m = score_candidates(&cands, &spec, &vectorizer)?.decide(spec.rule);
                write(&dir, "decisions.tsv", &io::write_decisions(&m.decisions))?;
                write(&dir, "review.tsv", &io::write_review(&m.decisions))?;
                println!(
                    "{} duplicates, {} non-duplicates, {} for review -> {}",
                    m.duplicates.len(),
                    m.non_duplicates.len(),
                    m.review.len(),
                    dir.display()
                );
                Ok(())
            })?;
        }
        Command::Train { config: path, training, epochs, learning_rate } => {
            let c = config(&path, &g)?;
            let dir = g.dir(Some(&c));
            let inputs = load_inputs(&c)?;
            let src = inputs.sources();
            let lib = match &c.similarity.features {
                Some(names) => erkit::similarity::select_features(names)?,
                None => erkit::similarity::feature_library(),
            };
            let labeled = io::read_labeled(&read(&training)?, src.mode())?;
            let d = TrainOptions::default();
            let opts = TrainOptions { epochs: epochs.unwrap_or(d.epochs), learning_rate: learning_rate.unwrap_or(d.learning_rate) };
            let model = par::with_workers(g.workers, || train_linear(&labeled, &Vectorizer::new(src, lib), opts))?;
            let path = write_json(&dir, "model.json", &model)?;
            println!("trained on {} pairs, final loss {:.6} -> {}", labeled.len(), model.final_loss.unwrap_or(f64::NAN), path.display());
        }
        Command::Evaluate { config: path, candidates, decisions, baseline } => {
            let c = config(&path, &g)?;
            let dir = g.dir(Some(&c));
            let inputs = load_inputs(&c)?;
            let src = inputs.sources();
            let Some(gt) = load_ground_truth(&c, &src)? else { bail!("evaluate needs [evaluation] with a ground truth") };
            let cands = candidates_from(&candidates, src.mode())?;
            let base = baseline.map(|b| candidates_from(&b, src.mode())).transpose()?;
            let report = BlockingReport::new(&cands, src.omega_size(), &gt, base.map(|b| b.len() as u64))?;
            write_json(&dir, "blocking_report.json", &report)?;
            println!("{}", serde_json::to_string(&report)?);
            if let Some(d) = decisions {
                let decided = io::read_decisions(&read(&d)?, src.mode())?;
                let policy = c.evaluation.as_ref().map(|e| e.indeterminate).unwrap_or_default();
                let m = match_metrics(&decided, &gt, &cands, policy)?;
                write_json(&dir, "match_report.json", &m)?;
                println!("{}", serde_json::to_string(&m)?);
            }
        }
        Command::Run { config: path } => {
            let c = load_config(&path)?;
            let out = run_pipeline(&c, &g.run_options())?;
            println!("{} candidate pairs, {} duplicates -> {}", out.candidates.len(), out.matching.duplicates.len(), out.output_dir.display());
            if let Some(m) = out.match_report {
                println!("precision {} recall {} f1 {}", metric(m.precision), metric(m.recall), metric(m.f1));
            }
        }
        Command::Sweep { config: path, param, values } => {
            let c = load_config(&path)?;
            let opts = g.run_options();
            let curve = sweep(&c, &param, &values, &opts)?;
            let path = write(&opts.output_dir(&opts.apply(&c)), &format!("curve_{param}.csv"), &curve.to_csv()?)?;
            println!("{} points -> {}", curve.rows.len(), path.display());
        }
        Command::Generate { entities, fraction, ops, rate } => {
            let seed = g.seed.unwrap_or(42);
            let spec = SyntheticCorpusSpec::new(entities, fraction, ops, seed).with_rate(rate);
            let corpus = generate_corpus(&spec).map_err(anyhow::Error::msg)?;
            let dir = g.dir(None);
            write(&dir, "d1.csv", &write_csv(&corpus.d1)?)?;
            write(&dir, "d2.csv", &write_csv(&corpus.d2)?)?;
            write(&dir, "ground_truth.tsv", &io::write_pairs(corpus.ground_truth.matches()))?;
            let training: String = training_pairs(&corpus, seed)
                .iter()
                .map(|l| format!("{}\t{}\n", l.pair, u8::from(l.is_duplicate)))
                .collect();
            write(&dir, "training.tsv", &training)?;
            write(&dir, "config.toml", &starter_config(seed))?;
            println!("{} + {} entities, {} ground-truth pairs -> {}", corpus.d1.len(), corpus.d2.len(), corpus.ground_truth.len(), dir.display());
        }
    }
    Ok(())
}

fn metric(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_owned(), |x| format!("{x:.6}"))
}

fn starter_config(seed: u64) -> String {
    format!(
        r#"version = 1
mode = "bilateral"
seed = {seed}
output_dir = "out"

[inputs.d1]
path = "d1.csv"
label = "name"

[inputs.d2]
path = "d2.csv"
label = "name"

[blocking]
method = "traditional"
key = "lower_tokens(:instance)"

[similarity]
spec = "two_threshold"
lower = 0.45
upper = 0.6

[evaluation]
ground_truth = "ground_truth.tsv"
sweeps = [{{ param = "upper", values = [0.5, 0.55, 0.6, 0.65, 0.7] }}]
"#
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
