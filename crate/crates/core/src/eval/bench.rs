//! Engine variants and the iterative-learning benchmark.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_corpus, doc_versions, Chunk, Document};
use crate::embedding::EmbeddingProvider;
use crate::eval::metrics::{hit_at_n, recall};
use crate::eval::synth::BenchQuery;
use crate::index::{Bm25Params, CorpusIndex, SearchIndex};
use crate::indicators::{
    generate_synthetic_indicators, FeedbackEvent, IndicatorRepository, SignalMapping,
    SyntheticQueryProvider,
};
use crate::ranker::{retrieve_adaptive, QueryBundle, RankerConfig, Retrieval};
use crate::{Error, Result};

/// Which indicators an engine consults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorSet {
    None,
    Synthetic,
    Feedback,
    Both,
}

impl IndicatorSet {
    pub fn uses_feedback(self) -> bool {
        matches!(self, IndicatorSet::Feedback | IndicatorSet::Both)
    }

    pub fn uses_synthetic(self) -> bool {
        matches!(self, IndicatorSet::Synthetic | IndicatorSet::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineVariant {
    pub name: String,
    pub indicators: IndicatorSet,
    pub ranker: RankerConfig,
}

impl EngineVariant {
    pub fn baseline(ranker: &RankerConfig) -> Self {
        Self {
            name: "Baseline".into(),
            indicators: IndicatorSet::None,
            ranker: ranker.clone(),
        }
    }

    pub fn hyqe(ranker: &RankerConfig, threshold: f64) -> Self {
        Self {
            name: "HyQE".into(),
            indicators: IndicatorSet::Synthetic,
            ranker: RankerConfig {
                threshold,
                ..ranker.clone()
            },
        }
    }

    pub fn feedback(ranker: &RankerConfig, threshold: f64) -> Self {
        Self {
            name: format!("Feedback({threshold})"),
            indicators: IndicatorSet::Feedback,
            ranker: RankerConfig {
                threshold,
                ..ranker.clone()
            },
        }
    }

    pub fn feedback_hyqe(ranker: &RankerConfig, threshold: f64) -> Self {
        Self {
            name: format!("Feedback({threshold})+HyQE"),
            indicators: IndicatorSet::Both,
            ranker: RankerConfig {
                threshold,
                ..ranker.clone()
            },
        }
    }

    /// Parses `baseline`, `hyqe[:T]`, `feedback:T` or `feedback+hyqe:T`.
    pub fn parse(text: &str, ranker: &RankerConfig) -> Result<Self> {
        let (kind, t) = match text.split_once(':') {
            Some((k, t)) => {
                let t: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad threshold in `{text}`")))?;
                (k.trim().to_ascii_lowercase(), t)
            }
            None => (text.trim().to_ascii_lowercase(), ranker.threshold),
        };
        let variant = match kind.as_str() {
            "baseline" => Self::baseline(ranker),
            "hyqe" => Self::hyqe(ranker, t),
            "feedback" => Self::feedback(ranker, t),
            "feedback+hyqe" | "hyqe+feedback" => Self::feedback_hyqe(ranker, t),
            _ => return Err(Error::InvalidConfig(format!("unknown engine variant `{text}`"))),
        };
        variant.ranker.validate()?;
        Ok(variant)
    }

    /// Baseline, HyQE, Feedback(0.75), Feedback(0.95) and Feedback(0.75)+HyQE.
    pub fn standard_matrix(ranker: &RankerConfig) -> Vec<Self> {
        vec![
            Self::baseline(ranker),
            Self::hyqe(ranker, 0.75),
            Self::feedback(ranker, 0.75),
            Self::feedback(ranker, 0.95),
            Self::feedback_hyqe(ranker, 0.75),
        ]
    }
}

/// A chunked, embedded corpus with precomputed synthetic indicators, shared
/// by every engine variant of an experiment.
pub struct Workbench {
    docs: Vec<Document>,
    versions: BTreeMap<String, u64>,
    corpus: Arc<CorpusIndex>,
    synthetic: IndicatorRepository,
    embedder: Arc<dyn EmbeddingProvider>,
    mapping: SignalMapping,
    max_feedback_per_doc: usize,
}

impl Workbench {
    pub fn build(
        docs: Vec<Document>,
        max_chunk_size: usize,
        embedder: Arc<dyn EmbeddingProvider>,
        synthetic_provider: Option<&dyn SyntheticQueryProvider>,
        max_feedback_per_doc: usize,
    ) -> Result<Self> {
        let chunks = chunk_corpus(&docs, max_chunk_size)?;
        let versions = doc_versions(&docs);
        let mut synthetic = IndicatorRepository::new(max_feedback_per_doc)?;
        if let Some(provider) = synthetic_provider {
            for chunk in &chunks {
                let version = versions.get(&chunk.doc_id).copied().unwrap_or_default();
                synthetic.add_synthetic(generate_synthetic_indicators(
                    chunk,
                    version,
                    provider,
                    embedder.as_ref(),
                )?);
            }
        }
        let corpus = Arc::new(CorpusIndex::build(chunks, embedder.as_ref(), Bm25Params::default())?);
        Ok(Self {
            docs,
            versions,
            corpus,
            synthetic,
            embedder,
            mapping: SignalMapping::default(),
            max_feedback_per_doc,
        })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn chunks(&self) -> &[Chunk] {
        self.corpus.chunks()
    }

    pub fn embedder(&self) -> &dyn EmbeddingProvider {
        self.embedder.as_ref()
    }

    pub fn synthetic_count(&self) -> usize {
        self.synthetic.synthetic_count()
    }

    pub fn empty_feedback(&self) -> IndicatorRepository {
        IndicatorRepository::new(self.max_feedback_per_doc).expect("validated at build")
    }

    pub fn ingest(&self, repo: &mut IndicatorRepository, event: &FeedbackEvent) -> Result<usize> {
        repo.ingest_feedback(event, &self.mapping, self.embedder.as_ref(), &self.versions)
    }

    /// Index for `variant`, attaching the indicators it consults.
    pub fn index(&self, variant: &EngineVariant, feedback: &IndicatorRepository) -> Result<SearchIndex> {
        let mut repo = if variant.indicators.uses_feedback() {
            feedback.feedback_only()
        } else {
            self.empty_feedback()
        };
        if variant.indicators.uses_synthetic() {
            repo.add_synthetic(self.synthetic.synthetic().cloned());
        }
        SearchIndex::with_indicators(Arc::clone(&self.corpus), &repo)
    }

    pub fn retrieve(
        &self,
        index: &SearchIndex,
        ranker: &RankerConfig,
        query: &str,
        intent: Option<&str>,
    ) -> Result<Retrieval> {
        let inputs = QueryBundle::from_text(self.embedder.as_ref(), query, intent)?;
        retrieve_adaptive(index, &inputs, ranker)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub iterations: usize,
    pub queries_per_iteration: usize,
    pub new_per_iteration: usize,
    pub repeated_per_iteration: usize,
    pub rng_seed: u64,
    pub hit_ns: Vec<usize>,
    /// Documents a 1-star answer cites, taken from the top of the retrieval.
    pub cited_on_miss: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            queries_per_iteration: 30,
            new_per_iteration: 10,
            repeated_per_iteration: 20,
            rng_seed: 7,
            hit_ns: vec![3, 5, 7, 10],
            cited_on_miss: 10,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.new_per_iteration == 0 || self.cited_on_miss == 0 {
            return Err(Error::InvalidConfig(
                "iterations, new_per_iteration and cited_on_miss must be >= 1".into(),
            ));
        }
        if self.new_per_iteration + self.repeated_per_iteration != self.queries_per_iteration {
            return Err(Error::InvalidConfig(format!(
                "new ({}) + repeated ({}) must equal queries_per_iteration ({})",
                self.new_per_iteration, self.repeated_per_iteration, self.queries_per_iteration
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Old,
    New,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Old => "old",
            Split::New => "new",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Issued {
    query: usize,
    split: Split,
}

/// Which pool queries are issued in each iteration.
///
/// Iteration `t` issues pool entries `t*new .. (t+1)*new` as new queries, plus
/// `repeated` draws (uniform, with replacement) from everything issued before
/// `t`. The first iteration has no history and issues only new queries.
fn schedule(sim: &SimulationConfig) -> Vec<Vec<Issued>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sim.rng_seed);
    let mut issued_before = 0;
    (0..sim.iterations)
        .map(|t| {
            let mut round: Vec<Issued> = (0..sim.new_per_iteration)
                .map(|i| Issued {
                    query: t * sim.new_per_iteration + i,
                    split: Split::New,
                })
                .collect();
            if issued_before > 0 {
                for _ in 0..sim.repeated_per_iteration {
                    round.push(Issued {
                        query: rng.gen_range(0..issued_before),
                        split: Split::Old,
                    });
                }
            }
            issued_before += sim.new_per_iteration;
            round
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub iteration: usize,
    pub split: Split,
    pub query: usize,
    pub recall: f64,
    /// Hit@n for each `n` of the simulation, in order.
    pub hits: Vec<u8>,
    pub rounds: usize,
}

fn epoch() -> DateTime<Utc> {
    DateTime::from_timestamp(1_704_067_200, 0).expect("valid timestamp")
}

fn run_variant(
    bench: &Workbench,
    variant: &EngineVariant,
    pool: &[BenchQuery],
    plan: &[Vec<Issued>],
    sim: &SimulationConfig,
) -> Result<Vec<QueryOutcome>> {
    let mut feedback = bench.empty_feedback();
    let mut index = bench.index(variant, &feedback)?;
    let mut outcomes = Vec::new();
    let mut clock = 0i64;
    for (t, round) in plan.iter().enumerate() {
        let mut events = Vec::new();
        for issued in round {
            let q = &pool[issued.query];
            let retrieval = bench.retrieve(&index, &variant.ranker, &q.text, None)?;
            let docs = retrieval.doc_ids();
            let golden = q.golden_set();
            let hits = sim
                .hit_ns
                .iter()
                .map(|&n| hit_at_n(&golden, &docs, n))
                .collect::<Result<Vec<_>>>()?;
            outcomes.push(QueryOutcome {
                iteration: t,
                split: issued.split,
                query: issued.query,
                recall: recall(&golden, &docs, variant.ranker.top_k)?,
                hits,
                rounds: retrieval.rounds,
            });
            clock += 1;
            if !docs.is_empty() {
                let (star_rating, referenced_docs) = if docs.contains(&q.golden) {
                    (5, vec![q.golden.clone()])
                } else {
                    (1, docs.into_iter().take(sim.cited_on_miss).collect())
                };
                events.push(FeedbackEvent {
                    query: q.text.clone(),
                    rewritten_intent: None,
                    star_rating,
                    referenced_docs,
                    timestamp: epoch() + Duration::seconds(clock),
                });
            }
        }
        if variant.indicators.uses_feedback() {
            for ev in &events {
                bench.ingest(&mut feedback, ev)?;
            }
            index = bench.index(variant, &feedback)?;
        }
    }
    Ok(outcomes)
}

/// Per-query outcomes of every variant.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub variants: Vec<EngineVariant>,
    pub sim: SimulationConfig,
    pub outcomes: Vec<Vec<QueryOutcome>>,
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub config: String,
    pub iteration: usize,
    pub split: &'static str,
    pub metric: &'static str,
    pub k: usize,
    pub value: String,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl BenchmarkReport {
    fn variant_index(&self, name: &str) -> Option<usize> {
        self.variants.iter().position(|v| v.name == name)
    }

    /// Mean recall of a variant over all iterations for one split.
    pub fn mean_recall(&self, variant: &str, split: Split) -> Option<f64> {
        let outcomes = &self.outcomes[self.variant_index(variant)?];
        mean(outcomes.iter().filter(|o| o.split == split).map(|o| o.recall))
    }

    /// Mean Hit@n of a variant over all iterations for one split.
    pub fn mean_hit(&self, variant: &str, split: Split, n: usize) -> Option<f64> {
        let col = self.sim.hit_ns.iter().position(|&x| x == n)?;
        let outcomes = &self.outcomes[self.variant_index(variant)?];
        mean(
            outcomes
                .iter()
                .filter(|o| o.split == split)
                .map(|o| f64::from(o.hits[col])),
        )
    }

    /// Fraction of retrievals of a variant that finished in the first round.
    pub fn single_round_fraction(&self, variant: &str) -> Option<f64> {
        let outcomes = &self.outcomes[self.variant_index(variant)?];
        mean(outcomes.iter().map(|o| f64::from(u8::from(o.rounds == 1))))
    }

    pub fn rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::new();
        for (variant, outcomes) in self.variants.iter().zip(&self.outcomes) {
            let mut cells: BTreeMap<(usize, Split), Vec<&QueryOutcome>> = BTreeMap::new();
            for o in outcomes {
                cells.entry((o.iteration, o.split)).or_default().push(o);
            }
            for ((iteration, split), group) in cells {
                let mut push = |metric: &'static str, k: usize, value: f64| {
                    rows.push(MetricRow {
                        config: variant.name.clone(),
                        iteration,
                        split: split.as_str(),
                        metric,
                        k,
                        value: format!("{value:.6}"),
                    })
                };
                let r = mean(group.iter().map(|o| o.recall)).unwrap_or_default();
                push("recall", variant.ranker.top_k, r);
                for (col, &n) in self.sim.hit_ns.iter().enumerate() {
                    let h = mean(group.iter().map(|o| f64::from(o.hits[col]))).unwrap_or_default();
                    push("hit", n, h);
                }
            }
        }
        rows
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in self.rows() {
            writer
                .serialize(row)
                .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `metrics.csv` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, run_id: &str, extra: serde_json::Value) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let csv_path = dir.join("metrics.csv");
        fs::write(&csv_path, self.to_csv()?)
            .map_err(|e| Error::io(format!("writing {}", csv_path.display()), e))?;
        let manifest = serde_json::json!({
            "run_id": run_id,
            "seed": self.sim.rng_seed,
            "simulation": self.sim,
            "variants": self.variants,
            "corpus": extra,
        });
        let manifest_path = dir.join("manifest.json");
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
            .map_err(|e| Error::io(format!("writing {}", manifest_path.display()), e))
    }
}

/// Runs the iterative-learning simulation for every variant.
///
/// Each iteration issues new and repeated queries and rates every retrieval:
/// 5 stars citing the golden document when it was retrieved, otherwise 1 star
/// citing the top `cited_on_miss` documents. Ratings are fed back before the
/// next iteration. Variants run on separate
/// threads; each run is sequential and seeded, so the report is reproducible.
pub fn run_iterative_benchmark(
    bench: &Workbench,
    variants: &[EngineVariant],
    pool: &[BenchQuery],
    sim: &SimulationConfig,
) -> Result<BenchmarkReport> {
    sim.validate()?;
    let required = sim.iterations * sim.new_per_iteration;
    if pool.len() < required {
        return Err(Error::InsufficientQueries {
            available: pool.len(),
            required,
        });
    }
    for v in variants {
        v.ranker.validate()?;
    }
    let plan = schedule(sim);
    let outcomes = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|v| scope.spawn(|| run_variant(bench, v, pool, &plan, sim)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("benchmark worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BenchmarkReport {
        variants: variants.to_vec(),
        sim: sim.clone(),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_mixes_new_and_repeated() {
        let sim = SimulationConfig {
            iterations: 4,
            ..SimulationConfig::default()
        };
        let plan = schedule(&sim);
        assert_eq!(plan[0].len(), 10);
        assert!(plan[1..].iter().all(|r| r.len() == 30));
        for (t, round) in plan.iter().enumerate() {
            for q in round {
                match q.split {
                    Split::New => assert_eq!(q.query / 10, t),
                    Split::Old => assert!(q.query < t * 10),
                }
            }
        }
        assert_eq!(plan, schedule(&sim));
    }

    #[test]
    fn simulation_config_validation() {
        assert!(SimulationConfig::default().validate().is_ok());
        let bad = SimulationConfig {
            repeated_per_iteration: 19,
            ..SimulationConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn variant_parsing() {
        let base = RankerConfig::default();
        assert_eq!(EngineVariant::parse("baseline", &base).unwrap().name, "Baseline");
        let f = EngineVariant::parse("feedback+hyqe:0.75", &base).unwrap();
        assert_eq!(f.name, "Feedback(0.75)+HyQE");
        assert_eq!(f.indicators, IndicatorSet::Both);
        assert_eq!(EngineVariant::parse("feedback:0.95", &base).unwrap().ranker.threshold, 0.95);
        assert!(EngineVariant::parse("feedback:2", &base).is_err());
        assert!(EngineVariant::parse("nudge", &base).is_err());
    }
}
