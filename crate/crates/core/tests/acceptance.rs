//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use erkit::blocking::{
    apply_key, build_canopies, canopies, collision_probability, minhash_lsh, sorted_neighborhood, traditional_block,
    BlockingKeySpec, CanopyParams, Distance, FieldRef, MinHashParams, MinHasher, SeedOrder,
};
use erkit::evaluation::{f_measure, pairs_completeness, pairs_quality, reduction_ratio, BlockingCounts, BlockingReport, Rational};
use erkit::ingest::{parse_csv, parse_ntriples, triples_to_entities, write_csv, EntityOptions, PropertyMap};
use erkit::io;
use erkit::model::{canonicalize_pair, CandidateSet, Dataset, Entity, EntityPair, GroundTruth, Literal, Mode, Sources};
use erkit::pipeline::{generate_corpus, run_pipeline, sweep, Corruption, PipelineConfig, RunOptions, SyntheticCorpusSpec};
use erkit::similarity::{feature_library, log_loss, log_loss_gradient, score_candidates, DecisionRule, LinkSpec, Vectorizer};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pair(a: &str, b: &str, mode: Mode) -> EntityPair {
    canonicalize_pair(a, b, mode).unwrap()
}

fn ids(c: &CandidateSet) -> BTreeSet<(String, String)> {
    c.iter().map(|p| (p.left().to_owned(), p.right().to_owned())).collect()
}

// ---------------------------------------------------------------------------
// 1, 2: key extraction and the sliding window

const FIRST_GRAPH: &str = r#"
<http://pkg1.org/John_Adams> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://pkg1.org/Person> .
<http://pkg1.org/John_Adams> <date_of_birth> "1998-03-02"^^<http://www.w3.org/2001/XMLSchema#date> .
<http://pkg1.org/John_Adams> <citizenship> <http://pkg1.org/USA> .
<http://pkg1.org/John_Adams> <gender> "male" .
"#;

const SECOND_GRAPH: &str = r#"
<http://pkg2.org/p7> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://pkg2.org/Person> .
<http://pkg2.org/p7> <name> "J. K. Adams" .
<http://pkg2.org/p7> <DOB> "2nd March 1998" .
<http://pkg2.org/p7> <citizenship> <http://pkg2.org/US> .
<http://pkg2.org/p7> <gender> "M" .
"#;

fn two_graph_keys() -> Check {
    let one = triples_to_entities(
        &parse_ntriples(FIRST_GRAPH).map_err(|e| e.to_string())?,
        &PropertyMap::default(),
        &EntityOptions { name: "pkg1".into(), ..Default::default() },
    )
    .map_err(|e| e.to_string())?;
    let map = PropertyMap::from_pairs([("DOB", "date_of_birth")]).map_err(|e| e.to_string())?;
    let two = triples_to_entities(
        &parse_ntriples(SECOND_GRAPH).map_err(|e| e.to_string())?,
        &map,
        &EntityOptions { name: "pkg2".into(), label_property: Some("name".into()), ..Default::default() },
    )
    .map_err(|e| e.to_string())?;
    let key: BlockingKeySpec = "tokens(:instance) | year(date_of_birth)".parse().map_err(|e| format!("{e}"))?;
    let john = one.get("http://pkg1.org/John_Adams").ok_or("John_Adams missing")?;
    let jk = two.get("http://pkg2.org/p7").ok_or("p7 missing")?;
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let a = apply_key(&key, &one, john).map_err(|e| e.to_string())?;
    let b = apply_key(&key, &two, jk).map_err(|e| e.to_string())?;
    ensure(a == set(&["John", "Adams", "1998"]), || format!("first BKVs {a:?}"))?;
    ensure(b == set(&["J", "K", "Adams", "1998"]), || format!("second BKVs {b:?}"))?;
    let c = traditional_block(&key, &Sources::bilateral(&one, &two)).map_err(|e| e.to_string())?;
    ensure(c.contains(&pair(&john.id, &jk.id, Mode::Bilateral)), || "instances not paired".into())?;
    Ok(format!("BKVs {a:?} / {b:?}, paired"))
}

const PEOPLE_TABLE: &str = "id,first,last,zipcode,dob\n\
    1,John,Adams,90292,1998-03-02\n\
    2,Jon,Adams,90210,1998-03-02\n\
    3,James,Allen,90301,1975-11-20\n\
    4,Jim,Allen,90302,\n\
    5,Kate,Baker,10001,1980-01-05\n";

fn five_record_window() -> Check {
    let d = parse_csv(PEOPLE_TABLE, "people", None, &PropertyMap::default()).map_err(|e| e.to_string())?;
    let key = BlockingKeySpec::from_str_single("concat(initials(first), initials(last), prefix(zipcode, 2))")?;
    let c = sorted_neighborhood(&key, 4, &Sources::dedup(&d)).map_err(|e| e.to_string())?;
    let expected: BTreeSet<(String, String)> =
        [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4), (2, 5), (3, 5), (4, 5)]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
    let got = ids(&c);
    ensure(got == expected, || format!("got {got:?}"))?;
    Ok(format!("{} pairs", got.len()))
}

trait SingleKey: Sized {
    fn from_str_single(s: &str) -> Result<Self, String>;
}

impl SingleKey for BlockingKeySpec {
    fn from_str_single(s: &str) -> Result<Self, String> {
        s.parse::<BlockingKeySpec>().and_then(BlockingKeySpec::into_single_value).map_err(|e| e.to_string())
    }
}

// ---------------------------------------------------------------------------
// 3: PQ pitfall

fn pq_pitfall() -> Check {
    let omega: u64 = 10_000_000;
    let gt = GroundTruth::new((0..1000).map(|i| pair(&format!("l{i}"), &format!("r{i}"), Mode::Bilateral)).collect());
    let mut c: BTreeSet<EntityPair> = (0..8).map(|i| pair(&format!("l{i}"), &format!("r{i}"), Mode::Bilateral)).collect();
    c.insert(pair("l0", "r1", Mode::Bilateral));
    c.insert(pair("l1", "r0", Mode::Bilateral));
    let c = CandidateSet::new("constructed", c);
    let pq = pairs_quality(&c, &gt).map_err(|e| e.to_string())?;
    let pc = pairs_completeness(&c, &gt).map_err(|e| e.to_string())?;
    let rr = reduction_ratio(&c, omega).map_err(|e| e.to_string())?;
    let f = f_measure(pc, rr);
    ensure(pq == Rational::new(8, 10), || format!("PQ {pq}"))?;
    ensure(pc == Rational::new(8, 1000), || format!("PC {pc}"))?;
    ensure(rr >= Rational::new(999_999, 1_000_000), || format!("RR {rr}"))?;
    ensure(f < Rational::new(2, 100), || format!("F {f}"))?;
    let report = BlockingReport::new(&c, omega, &gt, None).map_err(|e| e.to_string())?;
    ensure(format!("{:.6}", report.pq.unwrap_or(f64::NAN)) == "0.800000", || "reported PQ".into())?;
    Ok(format!("PQ={pq} PC={pc} RR={rr} F={:.6}", erkit::evaluation::to_f64(f)))
}

// ---------------------------------------------------------------------------
// Random instances shared by 4 and 6

const NAME_TOKENS: [&str; 10] = ["ann", "bob", "cy", "dee", "eve", "fay", "gus", "hal", "ivy", "jo"];

fn random_dataset(prefix: &str, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let entities = (0..n)
        .map(|i| {
            let k = rng.gen_range(1..=3);
            let name: Vec<&str> = (0..k).map(|_| *NAME_TOKENS.choose(rng).unwrap()).collect();
            let name = (rng.gen::<f64>() > 0.05).then(|| name.join(" "));
            let dob = (rng.gen::<f64>() > 0.1)
                .then(|| format!("19{}-0{}-1{}", rng.gen_range(70..74), rng.gen_range(1..4), rng.gen_range(0..3)));
            let id = format!("{prefix}{i:03}");
            Entity {
                label: name.clone().unwrap_or_else(|| id.clone()),
                id,
                fields: vec![name.map(Literal::string), dob.map(Literal::string)],
            }
        })
        .collect();
    Dataset::new(prefix, vec!["name".into(), "dob".into()], entities, Some("name".into())).unwrap()
}

struct Instance {
    left: Dataset,
    right: Option<Dataset>,
}

impl Instance {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let left = random_dataset("a", rng.gen_range(0..=50), &mut rng);
        let right = seed.is_multiple_of(2).then(|| random_dataset("b", rng.gen_range(0..=50), &mut rng));
        Self { left, right }
    }

    fn sources(&self) -> Sources<'_> {
        match &self.right {
            Some(r) => Sources::bilateral(&self.left, r),
            None => Sources::dedup(&self.left),
        }
    }

    /// Every allowed pair, by nested loops.
    fn exhaustive(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        match &self.right {
            Some(r) => {
                for a in self.left.entities() {
                    for b in r.entities() {
                        out.insert((a.id.clone(), b.id.clone()));
                    }
                }
            }
            None => {
                let es = self.left.entities();
                for i in 0..es.len() {
                    for j in i + 1..es.len() {
                        let (a, b) = (&es[i].id, &es[j].id);
                        out.insert(if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) });
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// 4: oracle equivalence

fn oracle_equivalence() -> Check {
    let mut checked = 0;
    for seed in 0..100u64 {
        let inst = Instance::new(seed);
        let sources = inst.sources();
        let mode = sources.mode();
        let all = inst.exhaustive();
        let omega = all.len() as u64;
        ensure(sources.omega_size() == omega, || format!("seed {seed}: omega"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let gt_ids: BTreeSet<(String, String)> = all.iter().filter(|_| rng.gen::<f64>() < 0.05).cloned().collect();
        let gt = GroundTruth::new(gt_ids.iter().map(|(a, b)| pair(a, b, mode)).collect());

        let tight = rng.gen_range(0.1..0.5);
        let methods: Vec<(&str, CandidateSet)> = vec![
            ("traditional", traditional_block(&"lower_tokens(name) | year(dob)".parse().unwrap(), &sources)),
            (
                "sorted_neighborhood",
                sorted_neighborhood(
                    &BlockingKeySpec::from_str_single("concat(initials(name), prefix(dob, 4))")?,
                    rng.gen_range(2..=6),
                    &sources,
                ),
            ),
            (
                "canopies",
                canopies(
                    &CanopyParams::new(tight, rng.gen_range(tight..0.9), Distance::JaccardTokens).unwrap(),
                    &FieldRef::parse("name"),
                    &sources,
                ),
            ),
            ("minhash", minhash_lsh(&MinHashParams::new(16, 4, 4, seed).unwrap(), &FieldRef::parse("name"), &sources)),
        ]
        .into_iter()
        .map(|(n, c)| c.map(|c| (n, c)).map_err(|e| format!("seed {seed} {n}: {e}")))
        .collect::<Result<_, _>>()?;

        for (name, c) in methods {
            let got = ids(&c);
            ensure(got.is_subset(&all), || format!("seed {seed} {name}: pair outside the pair space"))?;
            let n_c = got.len() as i128;
            let tp = got.intersection(&gt_ids).count() as i128;
            let g = gt_ids.len() as i128;
            let om = omega as i128;
            let counts = BlockingCounts::new(&c, omega, &gt);
            let report = BlockingReport::new(&c, omega, &gt, None).map_err(|e| e.to_string())?;

            let rr = counts.rr().ok();
            let want_rr = (om > 0).then(|| Ratio::new(om - n_c, om));
            ensure(rr == want_rr, || format!("seed {seed} {name}: RR {rr:?} vs {want_rr:?}"))?;
            let pc = counts.pc().ok();
            let want_pc = (g > 0).then(|| Ratio::new(tp, g));
            ensure(pc == want_pc, || format!("seed {seed} {name}: PC {pc:?} vs {want_pc:?}"))?;
            let pq = counts.pq().ok();
            let want_pq = (n_c > 0).then(|| Ratio::new(tp, n_c));
            ensure(pq == want_pq, || format!("seed {seed} {name}: PQ {pq:?} vs {want_pq:?}"))?;

            // F(PC, PQ) = 2tp / (g + |C|); F(PC, RR) cross-multiplied.
            let f_pq = pc.zip(pq).map(|(a, b)| f_measure(a, b));
            let want_f_pq = (g > 0 && n_c > 0).then(|| Ratio::new(2 * tp, g + n_c));
            ensure(f_pq == want_f_pq, || format!("seed {seed} {name}: F(PC,PQ)"))?;
            let f_rr = pc.zip(rr).map(|(a, b)| f_measure(a, b));
            let want_f_rr = (g > 0 && om > 0).then(|| {
                let den = tp * om + g * (om - n_c);
                if den == 0 {
                    Ratio::from_integer(0)
                } else {
                    Ratio::new(2 * tp * (om - n_c), den)
                }
            });
            ensure(f_rr == want_f_rr, || format!("seed {seed} {name}: F(PC,RR)"))?;

            let as_f64 = |r: Option<Rational>| r.map(|r| *r.numer() as f64 / *r.denom() as f64);
            ensure(
                report.rr == as_f64(want_rr)
                    && report.pc == as_f64(want_pc)
                    && report.pq == as_f64(want_pq)
                    && report.f_pc_pq == as_f64(want_f_pq)
                    && report.f_pc_rr == as_f64(want_f_rr),
                || format!("seed {seed} {name}: report disagrees"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} candidate sets checked"))
}

// ---------------------------------------------------------------------------
// 5: MinHash fidelity

fn random_subset(vocab: usize, rng: &mut ChaCha8Rng) -> BTreeSet<String> {
    let size = rng.gen_range(5..=40);
    let mut all: Vec<usize> = (0..vocab).collect();
    all.shuffle(rng);
    all[..size].iter().map(|t| format!("t{t}")).collect()
}

fn minhash_fidelity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let hasher = MinHasher::new(256, 7);
    let mut total = 0.0;
    for _ in 0..1000 {
        let (a, b) = (random_subset(60, &mut rng), random_subset(60, &mut rng));
        let exact = a.intersection(&b).count() as f64 / a.union(&b).count() as f64;
        let agree = MinHasher::agreement(&hasher.signature(&a).unwrap(), &hasher.signature(&b).unwrap());
        total += (agree - exact).abs();
    }
    let mean_err = total / 1000.0;
    ensure(mean_err <= 0.02, || format!("mean |agreement - J| = {mean_err:.4}"))?;

    let mut lines = vec![format!("mean error {mean_err:.4}")];
    for (bands, rows) in [(32usize, 8usize), (16, 4)] {
        let trials = 5000;
        let mut hits = 0;
        for trial in 0..trials {
            // |A ∩ B| = 20, |A ∪ B| = 40: Jaccard exactly 0.5.
            let tag = rng.gen::<u64>();
            let shared: Vec<String> = (0..20).map(|i| format!("s{tag}x{i}")).collect();
            let a = shared.iter().cloned().chain((0..10).map(|i| format!("a{tag}x{i}"))).collect::<Vec<_>>().join(" ");
            let b = shared.iter().cloned().chain((0..10).map(|i| format!("b{tag}x{i}"))).collect::<Vec<_>>().join(" ");
            let one = |id: &str, v: &str| {
                Dataset::new(id, vec!["tokens".into()], vec![Entity { id: id.into(), label: id.into(), fields: vec![Some(Literal::string(v))] }], None)
                    .unwrap()
            };
            let (da, db) = (one("x", &a), one("y", &b));
            let params = MinHashParams::new(bands * rows, bands, rows, trial).unwrap();
            let c = minhash_lsh(&params, &FieldRef::parse("tokens"), &Sources::bilateral(&da, &db)).map_err(|e| e.to_string())?;
            hits += usize::from(!c.is_empty());
        }
        let observed = hits as f64 / trials as f64;
        let expected = collision_probability(0.5, bands, rows);
        ensure((observed - expected).abs() <= 0.05, || {
            format!("{bands}x{rows}: emission {observed:.4} vs {expected:.4}")
        })?;
        lines.push(format!("{bands}x{rows} emission {observed:.4} (expected {expected:.4})"));
    }
    Ok(lines.join(", "))
}

// ---------------------------------------------------------------------------
// 6: monotonicity

fn monotonicity() -> Check {
    let windows = [2usize, 3, 4, 5, 7, 10, 20];
    let thresholds: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let key = BlockingKeySpec::from_str_single("concat(initials(name), prefix(dob, 4))")?;
    let mut canopies_built = 0;
    for seed in 0..100u64 {
        let inst = Instance::new(seed + 1000);
        let sources = inst.sources();

        let mut prev: Option<BTreeSet<(String, String)>> = None;
        for &w in &windows {
            let c = ids(&sorted_neighborhood(&key, w, &sources).map_err(|e| e.to_string())?);
            if let Some(p) = &prev {
                ensure(p.is_subset(&c), || format!("seed {seed}: C(w) not within C(w') at w'={w}"))?;
            }
            prev = Some(c);
        }

        let c = traditional_block(&"lower_tokens(name) | year(dob)".parse().unwrap(), &sources).map_err(|e| e.to_string())?;
        let vectorizer = Vectorizer::new(sources, feature_library());
        let scored = score_candidates(&c, &LinkSpec::threshold(0.5).unwrap(), &vectorizer).map_err(|e| e.to_string())?;
        let mut prev: Option<BTreeSet<EntityPair>> = None;
        for &t in &thresholds {
            let dup: BTreeSet<EntityPair> =
                scored.decide(DecisionRule::threshold(t).unwrap()).duplicates.into_iter().collect();
            if let Some(p) = &prev {
                ensure(dup.is_subset(p), || format!("seed {seed}: C_D grew at t={t}"))?;
            }
            prev = Some(dup);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for distance in [Distance::JaccardTokens, Distance::NormalizedLevenshtein] {
            let tight = rng.gen_range(0.0..1.0);
            let params = CanopyParams::new(tight, rng.gen_range(tight..=1.0), distance)
                .unwrap()
                .with_seed_order(if rng.gen() { SeedOrder::Random(seed) } else { SeedOrder::Ascending });
            let blocks = build_canopies(&params, &FieldRef::parse("name"), &sources).map_err(|e| e.to_string())?;
            let covered: HashSet<_> = blocks.iter().flat_map(|b| b.members.iter().copied()).collect();
            ensure(sources.members().iter().all(|m| covered.contains(m)), || format!("seed {seed}: entity outside every canopy"))?;
            canopies_built += blocks.len();
        }
    }
    Ok(format!("100 instances, {} windows, {} thresholds, {canopies_built} canopies", windows.len(), thresholds.len()))
}

// ---------------------------------------------------------------------------
// 7, 9: pipeline runs over a generated corpus

fn write_corpus(dir: &Path, spec: &SyntheticCorpusSpec) -> Result<(), String> {
    let c = generate_corpus(spec)?;
    fs::write(dir.join("d1.csv"), write_csv(&c.d1).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    fs::write(dir.join("d2.csv"), write_csv(&c.d2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    fs::write(dir.join("gt.tsv"), io::write_pairs(c.ground_truth.matches())).map_err(|e| e.to_string())
}

fn config(dir: &Path, blocking: &str, similarity: &str) -> Result<PipelineConfig, String> {
    let text = format!(
        "version = 1\nseed = 17\n\
         [inputs.d1]\npath = \"d1.csv\"\nlabel = \"name\"\n\
         [inputs.d2]\npath = \"d2.csv\"\nlabel = \"name\"\n\
         [blocking]\n{blocking}\n[similarity]\n{similarity}\n\
         [evaluation]\nground_truth = \"gt.tsv\"\n"
    );
    PipelineConfig::parse(&text, dir)
}

fn recall_cap() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticCorpusSpec::new(1000, 0.5, [Corruption::YearOnlyDob, Corruption::Typo, Corruption::Initialism], 31)
        .with_rate(0.3);
    write_corpus(dir.path(), &spec)?;
    let cfg = config(dir.path(), "method = \"traditional\"\nkey = \"exact(dob)\"", "spec = \"threshold\"\nthreshold = 0.5")?;
    let opts = RunOptions { output_dir: Some(dir.path().join("out")), ..RunOptions::default() };
    let out = run_pipeline(&cfg, &opts).map_err(|e| e.to_string())?;
    let pc = out.blocking_report.pc.ok_or("PC undefined")?;
    ensure((pc - 0.7).abs() <= 0.05, || format!("coarse key gives PC {pc:.4}, not about 0.7"))?;
    let thresholds: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let curve = sweep(&cfg, "threshold", &thresholds, &opts).map_err(|e| e.to_string())?;
    let mut max_recall: f64 = 0.0;
    for &(t, _, recall) in &curve.rows {
        let recall = recall.ok_or_else(|| format!("recall undefined at {t}"))?;
        ensure(recall <= pc, || format!("recall {recall:.4} > PC {pc:.4} at threshold {t}"))?;
        max_recall = max_recall.max(recall);
    }
    Ok(format!("PC {pc:.4}, max recall {max_recall:.4} over {} thresholds", curve.rows.len()))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_corpus(dir.path(), &SyntheticCorpusSpec::new(300, 0.4, [Corruption::Typo, Corruption::Initialism], 9))?;
    let configs = [
        ("traditional", "method = \"traditional\"\nkey = \"lower_tokens(:instance)\"", "spec = \"two_threshold\"\nlower = 0.4\nupper = 0.6"),
        (
            "minhash",
            "method = \"minhash\"\nfield = \":instance\"\nnum_hashes = 64\nbands = 16\nrows = 4",
            "spec = \"threshold\"\nthreshold = 0.5",
        ),
    ];
    let mut compared = 0;
    for (name, blocking, similarity) in configs {
        let cfg = config(dir.path(), blocking, similarity)?;
        let mut runs = Vec::new();
        for (tag, workers) in [("a", 1), ("b", 8), ("c", 1), ("d", 8)] {
            let out = dir.path().join(format!("{name}-{tag}"));
            let opts = RunOptions { output_dir: Some(out.clone()), workers, ..RunOptions::default() };
            let run = run_pipeline(&cfg, &opts).map_err(|e| e.to_string())?;
            let mut files: Vec<_> = run
                .files
                .iter()
                .map(|f| (f.file_name().unwrap().to_owned(), fs::read(f).unwrap()))
                .collect();
            files.sort();
            runs.push(files);
        }
        for r in &runs[1..] {
            ensure(r == &runs[0], || format!("{name}: outputs differ across runs or worker counts"))?;
        }
        compared += runs[0].len();
    }
    Ok(format!("{compared} files identical across 4 runs each (workers 1 and 8)"))
}

// ---------------------------------------------------------------------------
// 8: gradient check

fn gradient_check() -> Check {
    let spec = SyntheticCorpusSpec::new(60, 0.5, [Corruption::Typo, Corruption::Initialism], 4);
    let corpus = generate_corpus(&spec)?;
    let sources = Sources::bilateral(&corpus.d1, &corpus.d2);
    let vectorizer = Vectorizer::new(sources, feature_library());
    let pairs = erkit::pipeline::training_pairs(&corpus, 3);
    let xs: Vec<Vec<f64>> = pairs.iter().map(|lp| vectorizer.vectorize(&lp.pair).unwrap().zeroed()).collect();
    let ys: Vec<f64> = pairs.iter().map(|lp| f64::from(u8::from(lp.is_duplicate))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let w: Vec<f64> = (0..vectorizer.dimension()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bias = rng.gen_range(-1.0..1.0);
        let (gw, gb) = log_loss_gradient(&w, bias, &xs, &ys);
        let h = 1e-5;
        for i in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[i] += h;
            down[i] -= h;
            let numeric = (log_loss(&up, bias, &xs, &ys) - log_loss(&down, bias, &xs, &ys)) / (2.0 * h);
            worst = worst.max((numeric - gw[i]).abs());
        }
        let numeric = (log_loss(&w, bias + h, &xs, &ys) - log_loss(&w, bias - h, &xs, &ys)) / (2.0 * h);
        worst = worst.max((numeric - gb).abs());
    }
    ensure(worst <= 1e-6, || format!("max component error {worst:e}"))?;
    Ok(format!("{} rows x {} features, max error {worst:.2e}", xs.len(), vectorizer.dimension() + 1))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let checks: [Criterion; 9] = [
        ("two-graph blocking keys", Duration::from_secs(1), two_graph_keys),
        ("five-record sorted neighborhood", Duration::from_secs(1), five_record_window),
        ("pq pitfall", Duration::from_secs(1), pq_pitfall),
        ("oracle equivalence", Duration::from_secs(60), oracle_equivalence),
        ("minhash fidelity", Duration::from_secs(60), minhash_fidelity),
        ("monotonicity", Duration::from_secs(30), monotonicity),
        ("recall cap", Duration::from_secs(30), recall_cap),
        ("gradient check", Duration::from_secs(5), gradient_check),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|d| {
            if elapsed <= budget {
                Ok(d)
            } else {
                Err(format!("{d}; took {elapsed:.2?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
