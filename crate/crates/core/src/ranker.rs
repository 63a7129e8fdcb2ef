//! Two-track ranking.
//!
//! The relevance track is a reciprocal rank fusion (`rrf`) of per-field
//! orderings of the candidate pool. The vote track is a threshold-gated,
//! similarity-weighted mean of the signals of a chunk's indicators. Chunks
//! with a negative vote are pruned; the rest are grouped by vote, truncated
//! per group, and ordered by `(vote desc, rrf desc, chunk_id asc)`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::embedding::{embed, vscore, Embedding, EmbeddingProvider};
use crate::index::{CandidatePool, FieldRankedList, SearchIndex, DEFAULT_DENSE_FIELDS};
use crate::indicators::{Indicator, Source};
use crate::{Error, Result};

pub const DEFAULT_RRF_CONSTANT: f64 = 60.0;
pub const DEFAULT_MAX_INPUTS: usize = 2;
/// Votes are grouped after rounding to this many decimal places.
pub const VOTE_GROUP_DECIMALS: i32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInput {
    pub text: String,
    pub embedding: Embedding,
}

/// The user inputs of one retrieval: the raw query plus an optional rewritten intent.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBundle {
    inputs: Vec<QueryInput>,
}

impl QueryBundle {
    pub fn new(inputs: Vec<QueryInput>) -> Result<Self> {
        Self::with_limit(inputs, DEFAULT_MAX_INPUTS)
    }

    pub fn with_limit(inputs: Vec<QueryInput>, max_inputs: usize) -> Result<Self> {
        if inputs.is_empty() || inputs.len() > max_inputs {
            return Err(Error::InvalidConfig(format!(
                "a query bundle needs 1..={max_inputs} inputs, got {}",
                inputs.len()
            )));
        }
        Ok(Self { inputs })
    }

    /// Embeds the query and, when present, the rewritten intent.
    pub fn from_text(
        embedder: &dyn EmbeddingProvider,
        query: &str,
        intent: Option<&str>,
    ) -> Result<Self> {
        let mut inputs = vec![QueryInput {
            text: query.to_string(),
            embedding: embed(embedder, query)?,
        }];
        if let Some(intent) = intent.filter(|i| !i.trim().is_empty()) {
            inputs.push(QueryInput {
                text: intent.to_string(),
                embedding: embed(embedder, intent)?,
            });
        }
        Self::new(inputs)
    }

    pub fn inputs(&self) -> &[QueryInput] {
        &self.inputs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerConfig {
    /// Minimum vscore for an indicator to count towards a vote.
    pub threshold: f64,
    /// Overrides `threshold` for synthetic indicators.
    pub synthetic_threshold: Option<f64>,
    /// Overrides `threshold` for feedback indicators.
    pub feedback_threshold: Option<f64>,
    pub top_k: usize,
    /// Chunks kept per vote group (N).
    pub group_truncation: usize,
    /// Whether the zero-vote group is also truncated to N.
    pub truncate_neutral_group: bool,
    pub margin_percent: Option<f64>,
    /// Minimum fraction of `top_k` that must survive before expansion stops.
    pub expansion_target: f64,
    pub max_expansion_rounds: usize,
    pub rrf_constant: f64,
    /// Per-probe fetch size of the dense hybrid search; defaults to `top_k`.
    pub hybrid_fetch: Option<usize>,
    /// Per-probe fetch size of the indicator probes.
    pub indicator_fetch: usize,
    pub dense_fields: Vec<String>,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            threshold: 0.75,
            synthetic_threshold: None,
            feedback_threshold: None,
            top_k: 10,
            group_truncation: 1,
            truncate_neutral_group: false,
            margin_percent: None,
            expansion_target: 0.5,
            max_expansion_rounds: 4,
            rrf_constant: DEFAULT_RRF_CONSTANT,
            hybrid_fetch: None,
            indicator_fetch: 50,
            dense_fields: DEFAULT_DENSE_FIELDS.iter().map(|f| f.to_string()).collect(),
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be in (0, 1], got {v}")))
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<()> {
        unit_interval("threshold", self.threshold)?;
        if let Some(t) = self.synthetic_threshold {
            unit_interval("synthetic_threshold", t)?;
        }
        if let Some(t) = self.feedback_threshold {
            unit_interval("feedback_threshold", t)?;
        }
        if let Some(m) = self.margin_percent {
            unit_interval("margin_percent", m)?;
        }
        unit_interval("expansion_target", self.expansion_target)?;
        let positive = [
            ("top_k", self.top_k),
            ("group_truncation", self.group_truncation),
            ("max_expansion_rounds", self.max_expansion_rounds),
            ("indicator_fetch", self.indicator_fetch),
            ("hybrid_fetch", self.hybrid_fetch.unwrap_or(1)),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if !(self.rrf_constant > 0.0 && self.rrf_constant.is_finite()) {
            return Err(Error::InvalidConfig("rrf_constant must be > 0".into()));
        }
        if self.dense_fields.is_empty() {
            return Err(Error::InvalidConfig("dense_fields must not be empty".into()));
        }
        Ok(())
    }

    pub fn threshold_for(&self, source: Source) -> f64 {
        match source {
            Source::Synthetic => self.synthetic_threshold.unwrap_or(self.threshold),
            Source::Feedback => self.feedback_threshold.unwrap_or(self.threshold),
        }
    }

    /// First-round fetch size of each hybrid probe.
    pub fn hybrid_fetch(&self) -> usize {
        self.hybrid_fetch.unwrap_or(self.top_k)
    }
}

/// Reciprocal rank fusion score: `sum over lists containing the chunk of 1 / (k + rank)`.
pub fn rrf(chunk_id: &str, lists: &[FieldRankedList], k_const: f64) -> Result<f64> {
    let mut found = false;
    let mut score = 0.0;
    for list in lists {
        if let Some(rank) = list.rank_of(chunk_id) {
            found = true;
            score += 1.0 / (k_const + rank as f64);
        }
    }
    if found {
        Ok(score)
    } else {
        Err(Error::NotRanked(chunk_id.to_string()))
    }
}

/// rrf of every chunk in any list, best first, ties by chunk id.
pub fn fuse(lists: &[FieldRankedList], k_const: f64) -> Vec<(String, f64)> {
    let mut scores: HashMap<&str, f64> = HashMap::new();
    for list in lists {
        for (pos, (id, _)) in list.entries.iter().enumerate() {
            *scores.entry(id.as_str()).or_default() += 1.0 / (k_const + (pos + 1) as f64);
        }
    }
    let mut fused: Vec<(String, f64)> = scores
        .into_iter()
        .map(|(id, s)| (id.to_string(), s))
        .collect();
    fused.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    fused
}

/// One admitted (indicator, input) pair of a vote.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub query: String,
    pub signal: f64,
    pub source: Source,
    /// Input the indicator matched.
    pub input: usize,
    /// vscore between the input and the indicator query.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vote {
    pub score: f64,
    pub contributions: Vec<Contribution>,
}

/// Vote with one threshold for every indicator.
pub fn vote(indicators: &[&Indicator], inputs: &QueryBundle, threshold: f64) -> Result<Vote> {
    vote_with(indicators, inputs, |_| threshold)
}

/// Mean of `c * s` over the admitted (indicator, input) pairs, where
/// `c = vscore(input, indicator query)` and a pair is admitted when
/// `c >= threshold`. With no admitted pair the vote is 0.
pub fn vote_with(
    indicators: &[&Indicator],
    inputs: &QueryBundle,
    threshold: impl Fn(&Indicator) -> f64,
) -> Result<Vote> {
    let mut total = 0.0;
    let mut contributions = Vec::new();
    for ind in indicators {
        let t = threshold(ind);
        for (u, input) in inputs.inputs().iter().enumerate() {
            let c = vscore(&input.embedding, &ind.query_embedding)?;
            if c >= t {
                total += c * ind.signal;
                contributions.push(Contribution {
                    query: ind.query.clone(),
                    signal: ind.signal,
                    source: ind.source,
                    input: u,
                    c,
                });
            }
        }
    }
    let score = if contributions.is_empty() {
        0.0
    } else {
        total / contributions.len() as f64
    };
    Ok(Vote {
        score,
        contributions,
    })
}

pub fn vote_group(vote: f64) -> i64 {
    (vote * 10f64.powi(VOTE_GROUP_DECIMALS)).round() as i64
}

/// A pooled chunk with both track scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub rrf_score: f64,
    pub vote_score: f64,
    pub vote_group: i64,
    pub contributions: Vec<Contribution>,
}

/// Pruning, per-group filters, global ordering and truncation over scored chunks.
pub fn select_and_order(scored: Vec<ScoredChunk>, cfg: &RankerConfig) -> Vec<ScoredChunk> {
    let mut groups: BTreeMap<i64, Vec<ScoredChunk>> = BTreeMap::new();
    for chunk in scored.into_iter().filter(|c| c.vote_score >= 0.0) {
        groups.entry(chunk.vote_group).or_default().push(chunk);
    }
    let mut survivors = Vec::new();
    for (key, mut group) in groups {
        group.sort_by(|a, b| {
            b.rrf_score
                .total_cmp(&a.rrf_score)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        if key != 0 || cfg.truncate_neutral_group {
            group.truncate(cfg.group_truncation);
        }
        if let (Some(margin), Some(top)) = (cfg.margin_percent, group.first()) {
            let floor = margin * top.rrf_score;
            group.retain(|c| c.rrf_score >= floor);
        }
        survivors.extend(group);
    }
    survivors.sort_by(order);
    survivors.truncate(cfg.top_k);
    survivors
}

/// `(vote desc, rrf desc, chunk_id asc)`.
pub fn order(a: &ScoredChunk, b: &ScoredChunk) -> std::cmp::Ordering {
    b.vote_score
        .total_cmp(&a.vote_score)
        .then_with(|| b.rrf_score.total_cmp(&a.rrf_score))
        .then_with(|| a.chunk_id.cmp(&b.chunk_id))
}

/// Scores every pooled chunk on both tracks and applies [`select_and_order`].
///
/// rrf is computed locally: each dense field orders the pool, per input.
/// Pooled chunks that no dense field retrieves carry no relevance score and
/// are dropped.
pub fn two_track_rerank(
    index: &SearchIndex,
    pool: &CandidatePool,
    inputs: &QueryBundle,
    cfg: &RankerConfig,
) -> Result<Vec<ScoredChunk>> {
    cfg.validate()?;
    let lists = index.local_lists(inputs, &cfg.dense_fields, &pool.chunks)?;
    let fused: HashMap<String, f64> = fuse(&lists, cfg.rrf_constant).into_iter().collect();
    let mut scored = Vec::with_capacity(pool.len());
    for chunk_id in &pool.chunks {
        let Some(&rrf_score) = fused.get(chunk_id) else {
            continue;
        };
        let chunk = index
            .chunk(chunk_id)
            .ok_or_else(|| Error::UnknownChunk(chunk_id.clone()))?;
        let attached = index.indicators_for(chunk_id);
        let v = vote_with(&attached, inputs, |ind| cfg.threshold_for(ind.source))?;
        scored.push(ScoredChunk {
            chunk_id: chunk_id.clone(),
            doc_id: chunk.doc_id.clone(),
            rrf_score,
            vote_score: v.score,
            vote_group: vote_group(v.score),
            contributions: v.contributions,
        });
    }
    Ok(select_and_order(scored, cfg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub chunks: Vec<ScoredChunk>,
    /// Retrieval rounds used, starting at 1.
    pub rounds: usize,
    pub pool_size: usize,
}

impl Retrieval {
    /// Distinct documents in ranked order.
    pub fn doc_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.chunks
            .iter()
            .filter(|c| seen.insert(c.doc_id.as_str()))
            .map(|c| c.doc_id.clone())
            .collect()
    }

    pub fn records(&self) -> Vec<RankedRecord> {
        self.chunks
            .iter()
            .map(|c| RankedRecord {
                chunk_id: c.chunk_id.clone(),
                doc_id: c.doc_id.clone(),
                vote: c.vote_score,
                rrf: c.rrf_score,
                round: self.rounds,
                indicators: c
                    .contributions
                    .iter()
                    .map(|x| IndicatorEvidence {
                        query: x.query.clone(),
                        signal: x.signal,
                        c: x.c,
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Stable output record of one ranked chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecord {
    pub chunk_id: String,
    pub doc_id: String,
    pub vote: f64,
    pub rrf: f64,
    pub round: usize,
    pub indicators: Vec<IndicatorEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorEvidence {
    pub query: String,
    pub signal: f64,
    pub c: f64,
}

/// Builds the candidate pool for one round: the dense hybrid probes plus the
/// chunks whose indicators match the query at or above the vote threshold.
pub fn gather_pool(
    index: &SearchIndex,
    inputs: &QueryBundle,
    cfg: &RankerConfig,
    hybrid_fetch: usize,
    indicator_fetch: usize,
) -> Result<CandidatePool> {
    let hybrid = index.hybrid_search(inputs, &cfg.dense_fields, hybrid_fetch, cfg.rrf_constant)?;
    let mut pool = CandidatePool::default();
    pool.add_strategy("hybrid", hybrid.probes);
    let admit = cfg
        .threshold_for(Source::Synthetic)
        .min(cfg.threshold_for(Source::Feedback));
    pool.add_strategy("indicator", index.indicator_probe(inputs, indicator_fetch, admit)?);
    Ok(pool)
}

/// Retrieve and re-rank, doubling every fetch size while fewer than
/// `expansion_target * top_k` chunks survive.
pub fn retrieve_adaptive(
    index: &SearchIndex,
    inputs: &QueryBundle,
    cfg: &RankerConfig,
) -> Result<Retrieval> {
    cfg.validate()?;
    let n = index.len();
    if n == 0 {
        return Ok(Retrieval {
            chunks: Vec::new(),
            rounds: 1,
            pool_size: 0,
        });
    }
    let target = cfg.expansion_target * cfg.top_k as f64;
    let mut hybrid_fetch = cfg.hybrid_fetch().min(n);
    let mut indicator_fetch = cfg.indicator_fetch.min(n);
    let mut round = 1;
    loop {
        let pool = gather_pool(index, inputs, cfg, hybrid_fetch, indicator_fetch)?;
        let chunks = two_track_rerank(index, &pool, inputs, cfg)?;
        let enough = chunks.len() as f64 >= target;
        let exhausted = pool.len() >= n || (hybrid_fetch >= n && indicator_fetch >= n);
        if enough || exhausted || round >= cfg.max_expansion_rounds {
            return Ok(Retrieval {
                chunks,
                rounds: round,
                pool_size: pool.len(),
            });
        }
        hybrid_fetch = (hybrid_fetch * 2).min(n);
        indicator_fetch = (indicator_fetch * 2).min(n);
        round += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::Scope;
    use chrono::DateTime;

    fn list(field: &str, ids: &[&str]) -> FieldRankedList {
        FieldRankedList {
            field: field.into(),
            input: 0,
            entries: ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), 1.0 / (i + 1) as f64))
                .collect(),
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn rrf_reference_values() {
        let one = [list("f", &["a", "b"])];
        assert!(close(rrf("a", &one, 60.0).unwrap(), 1.0 / 61.0));
        let two = [list("f", &["a"]), list("g", &["a"])];
        assert!(close(rrf("a", &two, 60.0).unwrap(), 2.0 / 61.0));
        let mixed = [list("f", &["x", "a"]), list("g", &["x", "y", "z", "w", "a"])];
        let got = rrf("a", &mixed, 60.0).unwrap();
        assert!(close(got, 1.0 / 62.0 + 1.0 / 65.0));
        assert!((got - 0.031513).abs() < 1e-6);
    }

    #[test]
    fn rrf_rejects_unranked_chunk() {
        assert!(matches!(rrf("q", &[list("f", &["a"])], 60.0), Err(Error::NotRanked(_))));
    }

    #[test]
    fn fuse_follows_majority() {
        let lists = [
            list("f", &["a", "b"]),
            list("g", &["b", "a"]),
            list("h", &["a", "b"]),
        ];
        let fused: Vec<String> = fuse(&lists, 60.0).into_iter().map(|(id, _)| id).collect();
        assert_eq!(fused, vec!["a", "b"]);
    }

    fn unit(values: &[f64]) -> Embedding {
        Embedding::new(values.to_vec()).normalized().unwrap()
    }

    /// Unit vector whose cosine with `[1, 0]` makes vscore equal `v`.
    fn at_vscore(v: f64) -> Embedding {
        let cos = 2.0 - 1.0 / v;
        unit(&[cos, (1.0 - cos * cos).sqrt()])
    }

    fn indicator(emb: Embedding, signal: f64) -> Indicator {
        Indicator {
            query: "q".into(),
            query_embedding: emb,
            keywords: vec![],
            signal,
            scope: Scope::Document("d".into()),
            source: Source::Feedback,
            created_at: DateTime::UNIX_EPOCH,
            doc_version: 1,
        }
    }

    fn bundle() -> QueryBundle {
        QueryBundle::new(vec![QueryInput {
            text: "q".into(),
            embedding: unit(&[1.0, 0.0]),
        }])
        .unwrap()
    }

    #[test]
    fn vote_single_admitted_indicator() {
        let ind = indicator(at_vscore(0.9), 1.0);
        let v = vote(&[&ind], &bundle(), 0.75).unwrap();
        assert!(close(v.score, 0.9));
        assert_eq!(v.contributions.len(), 1);
    }

    #[test]
    fn vote_below_threshold_is_zero() {
        let ind = indicator(at_vscore(0.7), -1.0);
        let v = vote(&[&ind], &bundle(), 0.75).unwrap();
        assert_eq!(v.score, 0.0);
        assert!(v.contributions.is_empty());
    }

    #[test]
    fn vote_normalizes_by_admitted_pairs() {
        let pos = indicator(at_vscore(0.8), 1.0);
        let neg = indicator(at_vscore(0.9), -1.0);
        let below = indicator(at_vscore(0.5), 1.0);
        let v = vote(&[&pos, &neg, &below], &bundle(), 0.75).unwrap();
        assert!(close(v.score, -0.05));
    }

    fn scored(id: &str, vote: f64, rrf: f64) -> ScoredChunk {
        ScoredChunk {
            chunk_id: id.into(),
            doc_id: id.into(),
            rrf_score: rrf,
            vote_score: vote,
            vote_group: vote_group(vote),
            contributions: vec![],
        }
    }

    fn ids(chunks: &[ScoredChunk]) -> Vec<&str> {
        chunks.iter().map(|c| c.chunk_id.as_str()).collect()
    }

    #[test]
    fn rerank_worked_example() {
        let pool = vec![
            scored("A", 0.9, 0.01),
            scored("D", 0.9, 0.02),
            scored("C", 0.0, 0.03),
            scored("B", -0.94, 0.05),
        ];
        let out = select_and_order(pool, &RankerConfig::default());
        assert_eq!(ids(&out), vec!["D", "C"]);
    }

    #[test]
    fn all_zero_votes_degenerate_to_rrf_order() {
        let pool = vec![scored("a", 0.0, 0.01), scored("b", 0.0, 0.03), scored("c", 0.0, 0.02)];
        let out = select_and_order(pool, &RankerConfig::default());
        assert_eq!(ids(&out), vec!["b", "c", "a"]);
    }

    #[test]
    fn margin_filter_is_per_group() {
        let cfg = RankerConfig {
            group_truncation: 5,
            margin_percent: Some(0.5),
            ..RankerConfig::default()
        };
        let pool = vec![
            scored("a", 0.5, 0.04),
            scored("b", 0.5, 0.01),
            scored("c", 0.0, 0.015),
            scored("d", 0.0, 0.03),
        ];
        let out = select_and_order(pool, &cfg);
        assert_eq!(ids(&out), vec!["a", "d", "c"]);
    }

    #[test]
    fn neutral_group_truncation_switch() {
        let cfg = RankerConfig {
            truncate_neutral_group: true,
            ..RankerConfig::default()
        };
        let pool = vec![scored("a", 0.0, 0.01), scored("b", 0.0, 0.03)];
        assert_eq!(ids(&select_and_order(pool, &cfg)), vec!["b"]);
    }

    #[test]
    fn vote_groups_quantize_to_six_decimals() {
        assert_eq!(vote_group(0.1234564), vote_group(0.1234561));
        assert_ne!(vote_group(0.123456), vote_group(0.123457));
        assert_eq!(vote_group(0.0), 0);
    }

    #[test]
    fn config_validation() {
        assert!(RankerConfig::default().validate().is_ok());
        let bad = [
            RankerConfig { threshold: 0.0, ..Default::default() },
            RankerConfig { threshold: 1.5, ..Default::default() },
            RankerConfig { top_k: 0, ..Default::default() },
            RankerConfig { margin_percent: Some(0.0), ..Default::default() },
            RankerConfig { rrf_constant: 0.0, ..Default::default() },
            RankerConfig { dense_fields: vec![], ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn bundle_bounds() {
        assert!(QueryBundle::new(vec![]).is_err());
        let input = bundle().inputs()[0].clone();
        assert!(QueryBundle::new(vec![input.clone(), input.clone(), input]).is_err());
    }
}
