//! The `fbrank` command line.
//!
//! Every command reads an [`EngineConfig`] (TOML, see `fbrank config`), prints
//! line-delimited JSON on stdout and exits with 0 on success, 1 on validation
//! errors and 2 on I/O errors.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    chunk_corpus, doc_versions, load_corpus, write_corpus, Document, DEFAULT_MAX_CHUNK_SIZE,
};
use crate::embedding::{CachedProvider, EmbeddingProvider, HashingEmbedder};
use crate::eval::{
    generate_corpus, query_pool, run_iterative_benchmark, run_scenarios, EngineVariant,
    SampledQueryProvider, ScenarioConfig, SimulationConfig, Split, SynthCorpusConfig, Workbench,
};
use crate::index::{Bm25Params, CorpusIndex, SearchIndex};
use crate::indicators::{
    generate_synthetic_indicators, load_indicators, save_indicators, FeedbackEvent,
    IndicatorRepository, SignalMapping, SyntheticQueryProvider, TemplateQueryProvider,
    DEFAULT_MAX_FEEDBACK_PER_DOC, DEFAULT_QUERIES_PER_CHUNK,
};
use crate::ranker::{retrieve_adaptive, QueryBundle, RankerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Only `hashing` is built in.
    pub provider: String,
    pub dim: usize,
    /// Optional JSONL cache of computed embeddings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: "hashing".into(),
            dim: crate::embedding::DEFAULT_DIM,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// `template` or `none`.
    pub provider: String,
    pub queries_per_chunk: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            provider: "template".into(),
            queries_per_chunk: DEFAULT_QUERIES_PER_CHUNK,
        }
    }
}

/// Inputs of `simulate` beyond the protocol itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Generate the corpus from `corpus_generator` instead of reading `corpus`.
    pub synthetic_corpus: bool,
    pub corpus_generator: SynthCorpusConfig,
    /// Chunk size used for the benchmark corpus.
    pub max_chunk_size: usize,
    pub query_seed: u64,
    pub queries_per_chunk: usize,
    pub words_per_query: usize,
    /// Variant specs such as `baseline` or `feedback+hyqe:0.75`; empty means
    /// the standard matrix.
    pub variants: Vec<String>,
    pub results_dir: PathBuf,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            synthetic_corpus: true,
            corpus_generator: SynthCorpusConfig::default(),
            max_chunk_size: 600,
            query_seed: 11,
            queries_per_chunk: 2,
            words_per_query: 2,
            variants: Vec::new(),
            results_dir: "results".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub corpus: PathBuf,
    pub indicator_store: PathBuf,
    /// Append-only log of every accepted feedback event.
    pub feedback_log: PathBuf,
    pub index_dir: PathBuf,
    pub max_feedback_per_doc: usize,
    pub max_chunk_size: usize,
    pub ranker: RankerConfig,
    pub embedding: EmbeddingConfig,
    pub synthetic: SyntheticConfig,
    pub simulation: SimulationConfig,
    pub benchmark: BenchmarkConfig,
    pub scenarios: ScenarioConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            corpus: "corpus.jsonl".into(),
            indicator_store: "indicators.jsonl".into(),
            feedback_log: "feedback.jsonl".into(),
            index_dir: "index".into(),
            max_feedback_per_doc: DEFAULT_MAX_FEEDBACK_PER_DOC,
            max_chunk_size: DEFAULT_MAX_CHUNK_SIZE,
            ranker: RankerConfig::default(),
            embedding: EmbeddingConfig::default(),
            synthetic: SyntheticConfig::default(),
            simulation: SimulationConfig::default(),
            benchmark: BenchmarkConfig::default(),
            scenarios: ScenarioConfig::default(),
        }
    }
}

impl EngineConfig {
    /// Reads a TOML config; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut cfg: Self = toml::from_str(&raw)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.indicator_store);
        fix(&mut self.feedback_log);
        fix(&mut self.index_dir);
        fix(&mut self.benchmark.results_dir);
        if let Some(cache) = self.embedding.cache.as_mut() {
            fix(cache);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ranker.validate()?;
        self.simulation.validate()?;
        self.scenarios.validate()?;
        if self.max_feedback_per_doc == 0 {
            return Err(Error::InvalidConfig("max_feedback_per_doc must be >= 1".into()));
        }
        if self.max_chunk_size == 0 || self.benchmark.max_chunk_size == 0 {
            return Err(Error::InvalidConfig("max_chunk_size must be >= 1".into()));
        }
        if self.embedding.provider != "hashing" {
            return Err(Error::InvalidConfig(format!(
                "unknown embedding provider `{}`",
                self.embedding.provider
            )));
        }
        match self.synthetic.provider.as_str() {
            "template" | "none" => Ok(()),
            other => Err(Error::InvalidConfig(format!("unknown synthetic provider `{other}`"))),
        }
    }

    pub fn embedder(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        let base = HashingEmbedder::new(self.embedding.dim)?;
        Ok(match &self.embedding.cache {
            Some(path) => Arc::new(CachedProvider::open(base, path)?),
            None => Arc::new(base),
        })
    }

    pub fn synthetic_provider(&self) -> Result<Option<Box<dyn SyntheticQueryProvider>>> {
        Ok(match self.synthetic.provider.as_str() {
            "none" => None,
            _ => Some(Box::new(TemplateQueryProvider::new(self.synthetic.queries_per_chunk)?)),
        })
    }

    fn variants(&self) -> Result<Vec<EngineVariant>> {
        if self.benchmark.variants.is_empty() {
            return Ok(EngineVariant::standard_matrix(&self.ranker));
        }
        self.benchmark
            .variants
            .iter()
            .map(|v| EngineVariant::parse(v, &self.ranker))
            .collect()
    }
}

#[derive(Debug, Parser)]
#[command(name = "fbrank", version, about = "Hybrid retrieval re-ranked by user feedback")]
pub struct Cli {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the effective configuration as TOML.
    Config,
    /// Write a seeded synthetic corpus as JSONL.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        documents: Option<usize>,
    },
    /// Chunk the corpus, generate indicators and persist the index.
    Index,
    /// Retrieve and re-rank chunks for a query.
    Query {
        query: String,
        #[arg(long)]
        intent: Option<String>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Record a rated answer in the indicator store.
    Feedback {
        query: String,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        stars: u8,
        /// Cited document, best first; repeat for several.
        #[arg(long = "doc", required = true)]
        docs: Vec<String>,
        #[arg(long)]
        intent: Option<String>,
        /// RFC 3339 time of the event; now when omitted.
        #[arg(long)]
        timestamp: Option<DateTime<Utc>>,
    },
    /// Run the iterative-learning benchmark.
    Simulate {
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Engine variant, e.g. `baseline` or `feedback+hyqe:0.75`; repeatable.
        #[arg(long = "variant")]
        variants: Vec<String>,
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Evaluate the fine-grained scenarios over a feedback history.
    Scenarios {
        /// JSONL feedback events.
        #[arg(long)]
        history: PathBuf,
        /// Candidate unseen queries, one per line.
        #[arg(long)]
        unseen: Option<PathBuf>,
        #[arg(long = "variant")]
        variants: Vec<String>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
        #[arg(long)]
        threshold: Option<f64>,
        /// CSV output; defaults to `<results_dir>/scenarios.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    let line = serde_json::to_string(value)?;
    writeln!(out, "{line}").map_err(|e| Error::io("writing stdout", e))
}

fn apply_overrides(cfg: &mut EngineConfig, k: Option<u64>, threshold: Option<f64>) {
    if let Some(k) = k {
        cfg.ranker.top_k = k as usize;
    }
    if let Some(t) = threshold {
        cfg.ranker.threshold = t;
    }
}

/// Exclusive lock on the index directory, released on drop.
struct IndexLock(PathBuf);

impl IndexLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let path = dir.join(".lock");
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(format!("locking {} (is another index build running?)", dir.display()), e))?;
        Ok(Self(path))
    }
}

impl Drop for IndexLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn feedback_repo(cfg: &EngineConfig) -> Result<IndicatorRepository> {
    IndicatorRepository::from_indicators(cfg.max_feedback_per_doc, load_indicators(&cfg.indicator_store)?)
}

fn cmd_index(cfg: &EngineConfig) -> Result<()> {
    let docs = load_corpus(&cfg.corpus)?;
    let _lock = IndexLock::acquire(&cfg.index_dir)?;
    let chunks = chunk_corpus(&docs, cfg.max_chunk_size)?;
    let versions = doc_versions(&docs);
    let embedder = cfg.embedder()?;
    let mut repo = feedback_repo(cfg)?;
    let evicted = repo.evict_stale(&versions);
    if let Some(provider) = cfg.synthetic_provider()? {
        for chunk in &chunks {
            let version = versions[&chunk.doc_id];
            repo.add_synthetic(generate_synthetic_indicators(
                chunk,
                version,
                provider.as_ref(),
                embedder.as_ref(),
            )?);
        }
    }
    let corpus = Arc::new(CorpusIndex::build(chunks, embedder.as_ref(), Bm25Params::default())?);
    let index = SearchIndex::with_indicators(corpus, &repo)?;
    index.save(&cfg.index_dir)?;
    emit(&serde_json::json!({
        "documents": docs.len(),
        "chunks": index.len(),
        "synthetic_indicators": repo.synthetic_count(),
        "feedback_indicators": repo.feedback_count(),
        "evicted": evicted,
        "index_dir": cfg.index_dir,
    }))
}

fn cmd_query(cfg: &EngineConfig, query: &str, intent: Option<&str>) -> Result<()> {
    let index = SearchIndex::load(&cfg.index_dir, Bm25Params::default())?;
    let embedder = cfg.embedder()?;
    let inputs = QueryBundle::from_text(embedder.as_ref(), query, intent)?;
    let retrieval = retrieve_adaptive(&index, &inputs, &cfg.ranker)?;
    let records = retrieval.records();
    for record in &records {
        emit(record)?;
    }
    emit(&serde_json::json!({
        "summary": {
            "results": records.len(),
            "rounds": retrieval.rounds,
            "pool_size": retrieval.pool_size,
        }
    }))
}

fn cmd_feedback(cfg: &EngineConfig, event: FeedbackEvent) -> Result<()> {
    event.validate()?;
    let docs = load_corpus(&cfg.corpus)?;
    let versions = doc_versions(&docs);
    let embedder = cfg.embedder()?;
    let mut repo = feedback_repo(cfg)?;
    let written = repo.ingest_feedback(&event, &SignalMapping::default(), embedder.as_ref(), &versions)?;
    save_indicators(&cfg.indicator_store, repo.feedback())?;

    if let Some(parent) = cfg.feedback_log.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&cfg.feedback_log)
        .map_err(|e| Error::io(format!("opening {}", cfg.feedback_log.display()), e))?;
    writeln!(log, "{}", serde_json::to_string(&event)?)
        .map_err(|e| Error::io(format!("appending to {}", cfg.feedback_log.display()), e))?;

    emit(&serde_json::json!({
        "written": written,
        "feedback_indicators": repo.feedback_count(),
        "indicator_store": cfg.indicator_store,
    }))
}

fn workbench(cfg: &EngineConfig, docs: Vec<Document>, max_chunk_size: usize) -> Result<Workbench> {
    let provider = cfg.synthetic_provider()?;
    Workbench::build(
        docs,
        max_chunk_size,
        cfg.embedder()?,
        provider.as_deref(),
        cfg.max_feedback_per_doc,
    )
}

fn cmd_simulate(cfg: &EngineConfig, run_id: Option<String>) -> Result<()> {
    let docs = if cfg.benchmark.synthetic_corpus {
        generate_corpus(&cfg.benchmark.corpus_generator)?
    } else {
        load_corpus(&cfg.corpus)?
    };
    let bench = workbench(cfg, docs, cfg.benchmark.max_chunk_size)?;
    let provider = SampledQueryProvider::new(
        cfg.benchmark.query_seed,
        cfg.benchmark.queries_per_chunk,
        cfg.benchmark.words_per_query,
    )?;
    let pool = query_pool(bench.chunks(), &provider, cfg.simulation.rng_seed)?;
    let variants = cfg.variants()?;
    let report = run_iterative_benchmark(&bench, &variants, &pool, &cfg.simulation)?;
    let run_id = run_id.unwrap_or_else(|| {
        format!("seed{}-it{}", cfg.simulation.rng_seed, cfg.simulation.iterations)
    });
    let dir = cfg.benchmark.results_dir.join(&run_id);
    let corpus_info = serde_json::json!({
        "synthetic": cfg.benchmark.synthetic_corpus,
        "generator": cfg.benchmark.corpus_generator,
        "documents": bench.docs().len(),
        "chunks": bench.chunks().len(),
        "query_pool": pool.len(),
        "max_chunk_size": cfg.benchmark.max_chunk_size,
        "embedding": cfg.embedding,
        "synthetic_queries": cfg.synthetic,
        "max_feedback_per_doc": cfg.max_feedback_per_doc,
    });
    report.write(&dir, &run_id, corpus_info)?;
    for v in &variants {
        emit(&serde_json::json!({
            "config": v.name,
            "old_recall": report.mean_recall(&v.name, Split::Old),
            "new_recall": report.mean_recall(&v.name, Split::New),
        }))?;
    }
    emit(&serde_json::json!({ "summary": { "run_id": run_id, "dir": dir } }))
}

fn read_history(path: &Path) -> Result<Vec<FeedbackEvent>> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading history {}", path.display()), e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn cmd_scenarios(cfg: &EngineConfig, history: &Path, unseen: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let history = read_history(history)?;
    let unseen: Vec<String> = match unseen {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| Error::io(format!("reading {}", p.display()), e))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };
    let bench = workbench(cfg, load_corpus(&cfg.corpus)?, cfg.max_chunk_size)?;
    let variants = cfg.variants()?;
    let scenario_cfg = ScenarioConfig {
        baseline: cfg.ranker.clone(),
        ..cfg.scenarios.clone()
    };
    let report = run_scenarios(&bench, &history, &unseen, &variants, &scenario_cfg)?;
    for notice in &report.notices {
        log::warn!("{notice}");
    }
    let out = out.unwrap_or_else(|| cfg.benchmark.results_dir.join("scenarios.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    fs::write(&out, report.to_csv()?).map_err(|e| Error::io(format!("writing {}", out.display()), e))?;
    for row in &report.rows {
        emit(row)?;
    }
    emit(&serde_json::json!({ "summary": { "rows": report.rows.len(), "notices": report.notices, "csv": out } }))
}

fn cmd_synth_corpus(cfg: &EngineConfig, out: &Path, seed: Option<u64>, documents: Option<usize>) -> Result<()> {
    let mut gen = cfg.benchmark.corpus_generator.clone();
    if let Some(seed) = seed {
        gen.seed = seed;
    }
    if let Some(n) = documents {
        gen.documents = n;
    }
    let docs = generate_corpus(&gen)?;
    write_corpus(out, &docs)?;
    emit(&serde_json::json!({ "documents": docs.len(), "corpus": out }))
}

/// Executes a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    match cli.command {
        Command::Config => {
            cfg.validate()?;
            let text = toml::to_string(&cfg).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            print!("{text}");
            Ok(())
        }
        Command::SynthCorpus { out, seed, documents } => cmd_synth_corpus(&cfg, &out, seed, documents),
        Command::Index => {
            cfg.validate()?;
            cmd_index(&cfg)
        }
        Command::Query {
            query,
            intent,
            k,
            threshold,
        } => {
            apply_overrides(&mut cfg, k, threshold);
            cfg.validate()?;
            cmd_query(&cfg, &query, intent.as_deref())
        }
        Command::Feedback {
            query,
            stars,
            docs,
            intent,
            timestamp,
        } => {
            cfg.validate()?;
            cmd_feedback(
                &cfg,
                FeedbackEvent {
                    query,
                    rewritten_intent: intent,
                    star_rating: stars,
                    referenced_docs: docs,
                    timestamp: timestamp.unwrap_or_else(Utc::now),
                },
            )
        }
        Command::Simulate {
            iterations,
            seed,
            k,
            threshold,
            variants,
            run_id,
        } => {
            apply_overrides(&mut cfg, k, threshold);
            if let Some(n) = iterations {
                cfg.simulation.iterations = n;
            }
            if let Some(seed) = seed {
                cfg.simulation.rng_seed = seed;
            }
            if !variants.is_empty() {
                cfg.benchmark.variants = variants;
            }
            cfg.validate()?;
            cmd_simulate(&cfg, run_id)
        }
        Command::Scenarios {
            history,
            unseen,
            variants,
            k,
            threshold,
            out,
        } => {
            apply_overrides(&mut cfg, k, threshold);
            if !variants.is_empty() {
                cfg.benchmark.variants = variants;
            }
            cfg.validate()?;
            cmd_scenarios(&cfg, &history, unseen.as_deref(), out)
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
