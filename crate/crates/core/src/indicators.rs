//! The indicator repository.
//!
//! An indicator records that some query (a past user query, or a synthetic one
//! generated from a chunk) found a document useful or not, as a signal in
//! `[-1, 1]`. Synthetic indicators attach to the chunk they were generated
//! from and always carry `+1`. Feedback indicators attach to a whole document
//! and are capped at the `K` most recent per document.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{doc_of_chunk, Chunk};
use crate::embedding::{embed, Embedding, EmbeddingProvider};
use crate::text;
use crate::{Error, Result};

pub const DEFAULT_MAX_FEEDBACK_PER_DOC: usize = 6;
pub const DEFAULT_QUERIES_PER_CHUNK: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Scope {
    Chunk(String),
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Synthetic,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub query: String,
    pub query_embedding: Embedding,
    pub keywords: Vec<String>,
    pub signal: f64,
    pub scope: Scope,
    pub source: Source,
    pub created_at: DateTime<Utc>,
    pub doc_version: u64,
}

impl Indicator {
    /// Document the indicator ultimately refers to.
    pub fn doc_id(&self) -> &str {
        match &self.scope {
            Scope::Chunk(id) => doc_of_chunk(id),
            Scope::Document(id) => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub query: String,
    #[serde(default)]
    pub rewritten_intent: Option<String>,
    pub star_rating: u8,
    /// Cited documents, best first.
    pub referenced_docs: Vec<String>,
    pub timestamp: DateTime<Utc>,
}

impl FeedbackEvent {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.star_rating) {
            return Err(Error::InvalidFeedback(format!(
                "star rating {} outside 1..=5",
                self.star_rating
            )));
        }
        if self.referenced_docs.is_empty() {
            return Err(Error::InvalidFeedback("no referenced documents".into()));
        }
        if self.query.trim().is_empty() {
            return Err(Error::InvalidFeedback("empty query".into()));
        }
        Ok(())
    }
}

/// How star ratings become signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMapping {
    /// Apply the citation-rank multiplier to negative ratings too.
    pub rank_refine_negative: bool,
}

impl Default for SignalMapping {
    fn default() -> Self {
        Self {
            rank_refine_negative: true,
        }
    }
}

/// Multiplier for the `rank`-th citation (1-based): 1.0, 0.75, 0.5, then 0.25 onwards.
pub fn rank_multiplier(rank: usize) -> f64 {
    (1.0 - 0.25 * (rank.saturating_sub(1)) as f64).max(0.25)
}

/// Linear map of 1..=5 stars onto `[-1, 1]`, refined by citation rank.
pub fn map_star_to_signals(
    event: &FeedbackEvent,
    mapping: &SignalMapping,
) -> Result<Vec<(String, f64)>> {
    event.validate()?;
    let base = (f64::from(event.star_rating) - 3.0) / 2.0;
    let refine = base >= 0.0 || mapping.rank_refine_negative;
    Ok(event
        .referenced_docs
        .iter()
        .enumerate()
        .map(|(i, doc)| {
            let signal = if refine {
                base * rank_multiplier(i + 1)
            } else {
                base
            };
            (doc.clone(), signal)
        })
        .collect())
}

/// Lowercased, stop-word-filtered, de-duplicated tokens in document order.
pub fn extract_keywords(input: &str) -> Vec<String> {
    text::unique_content_tokens(input)
}

/// Source of synthetic queries for a chunk.
///
/// LLM-backed implementations that verify their queries (asking the model to
/// answer each generated query from the chunk) filter inside `generate`; the
/// caller only sees the surviving queries.
pub trait SyntheticQueryProvider: Send + Sync {
    fn queries_per_chunk(&self) -> usize;
    fn generate(&self, chunk: &Chunk) -> Result<Vec<String>>;
}

/// Deterministic offline provider: templates filled with the chunk's most
/// frequent keywords.
#[derive(Debug, Clone)]
pub struct TemplateQueryProvider {
    queries_per_chunk: usize,
}

impl TemplateQueryProvider {
    const TEMPLATES: [&'static str; 5] = [
        "how to {a} {b}",
        "what is {a} {c}",
        "why does {b} {c}",
        "where is {a} {b} {c}",
        "when {a} {d}",
    ];
    const TOP_KEYWORDS: usize = 6;

    pub fn new(queries_per_chunk: usize) -> Result<Self> {
        if queries_per_chunk == 0 {
            return Err(Error::InvalidConfig("queries_per_chunk must be >= 1".into()));
        }
        Ok(Self { queries_per_chunk })
    }
}

impl Default for TemplateQueryProvider {
    fn default() -> Self {
        Self {
            queries_per_chunk: DEFAULT_QUERIES_PER_CHUNK,
        }
    }
}

/// Content tokens ranked by frequency, ties by first occurrence.
pub fn top_keywords(content: &str, limit: usize) -> Vec<String> {
    let tokens = text::content_tokens(content);
    let mut stats: HashMap<&str, (usize, usize)> = HashMap::new();
    for (pos, tok) in tokens.iter().enumerate() {
        stats.entry(tok.as_str()).or_insert((0, pos)).0 += 1;
    }
    let mut ranked: Vec<(&str, usize, usize)> =
        stats.into_iter().map(|(t, (n, first))| (t, n, first)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked
        .into_iter()
        .take(limit)
        .map(|(t, _, _)| t.to_string())
        .collect()
}

impl SyntheticQueryProvider for TemplateQueryProvider {
    fn queries_per_chunk(&self) -> usize {
        self.queries_per_chunk
    }

    fn generate(&self, chunk: &Chunk) -> Result<Vec<String>> {
        let keywords = top_keywords(&chunk.content, Self::TOP_KEYWORDS);
        if keywords.is_empty() {
            return Err(Error::Provider(format!(
                "chunk {} has no keywords",
                chunk.chunk_id
            )));
        }
        let n = keywords.len();
        let queries = (0..self.queries_per_chunk)
            .map(|i| {
                let kw = |offset: usize| keywords[(i + offset) % n].as_str();
                Self::TEMPLATES[i % Self::TEMPLATES.len()]
                    .replace("{a}", kw(0))
                    .replace("{b}", kw(1))
                    .replace("{c}", kw(2))
                    .replace("{d}", kw(3))
            })
            .collect();
        Ok(queries)
    }
}

/// Builds the synthetic `+1` indicators for one chunk.
///
/// All or nothing: if the provider fails or returns the wrong number of
/// queries, no indicator is produced.
pub fn generate_synthetic_indicators(
    chunk: &Chunk,
    doc_version: u64,
    provider: &dyn SyntheticQueryProvider,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<Indicator>> {
    if chunk.content.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let queries = provider.generate(chunk)?;
    if queries.len() != provider.queries_per_chunk() {
        return Err(Error::Provider(format!(
            "expected {} queries for {}, got {}",
            provider.queries_per_chunk(),
            chunk.chunk_id,
            queries.len()
        )));
    }
    queries
        .into_iter()
        .map(|query| {
            Ok(Indicator {
                query_embedding: embed(embedder, &query)?,
                keywords: extract_keywords(&query),
                query,
                signal: 1.0,
                scope: Scope::Chunk(chunk.chunk_id.clone()),
                source: Source::Synthetic,
                created_at: DateTime::UNIX_EPOCH,
                doc_version,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRepository {
    by_document: BTreeMap<String, Vec<Indicator>>,
    by_chunk: BTreeMap<String, Vec<Indicator>>,
    max_feedback_per_doc: usize,
}

impl IndicatorRepository {
    pub fn new(max_feedback_per_doc: usize) -> Result<Self> {
        if max_feedback_per_doc == 0 {
            return Err(Error::InvalidConfig("max_feedback_per_doc must be >= 1".into()));
        }
        Ok(Self {
            by_document: BTreeMap::new(),
            by_chunk: BTreeMap::new(),
            max_feedback_per_doc,
        })
    }

    pub fn max_feedback_per_doc(&self) -> usize {
        self.max_feedback_per_doc
    }

    /// Feedback indicators of a document, most recent first.
    pub fn feedback_for(&self, doc_id: &str) -> &[Indicator] {
        self.by_document.get(doc_id).map_or(&[], Vec::as_slice)
    }

    pub fn synthetic_for(&self, chunk_id: &str) -> &[Indicator] {
        self.by_chunk.get(chunk_id).map_or(&[], Vec::as_slice)
    }

    pub fn feedback(&self) -> impl Iterator<Item = &Indicator> {
        self.by_document.values().flatten()
    }

    pub fn synthetic(&self) -> impl Iterator<Item = &Indicator> {
        self.by_chunk.values().flatten()
    }

    pub fn feedback_count(&self) -> usize {
        self.by_document.values().map(Vec::len).sum()
    }

    pub fn synthetic_count(&self) -> usize {
        self.by_chunk.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.feedback_count() == 0 && self.synthetic_count() == 0
    }

    /// Inserts one indicator, keeping feedback lists newest first and trimmed to `K`.
    ///
    /// A feedback indicator replaces an older one for the same query on the
    /// same document. Returns false when the indicator was not stored.
    pub fn insert(&mut self, indicator: Indicator) -> bool {
        match (&indicator.scope, indicator.source) {
            (Scope::Chunk(id), Source::Synthetic) => {
                self.by_chunk.entry(id.clone()).or_default().push(indicator);
                true
            }
            (Scope::Document(id), Source::Feedback) => {
                let k = self.max_feedback_per_doc;
                let list = self.by_document.entry(id.clone()).or_default();
                if let Some(pos) = list.iter().position(|i| i.query == indicator.query) {
                    if list[pos].created_at > indicator.created_at {
                        return false;
                    }
                    list.remove(pos);
                }
                let at = list
                    .iter()
                    .position(|i| i.created_at <= indicator.created_at)
                    .unwrap_or(list.len());
                if at >= k {
                    return false;
                }
                list.insert(at, indicator);
                list.truncate(k);
                true
            }
            (scope, source) => {
                warn!("rejecting {source:?} indicator with scope {scope:?}");
                false
            }
        }
    }

    /// Turns a rated interaction into document-scoped feedback indicators.
    ///
    /// Documents missing from `versions` are skipped with a warning. Returns
    /// the number of indicators stored.
    pub fn ingest_feedback(
        &mut self,
        event: &FeedbackEvent,
        mapping: &SignalMapping,
        embedder: &dyn EmbeddingProvider,
        versions: &BTreeMap<String, u64>,
    ) -> Result<usize> {
        let signals = map_star_to_signals(event, mapping)?;
        let query_embedding = embed(embedder, &event.query)?;
        let keywords = extract_keywords(&event.query);
        let mut written = 0;
        for (doc_id, signal) in signals {
            let Some(&doc_version) = versions.get(&doc_id) else {
                warn!("feedback references unknown document `{doc_id}`, skipping");
                continue;
            };
            let stored = self.insert(Indicator {
                query: event.query.clone(),
                query_embedding: query_embedding.clone(),
                keywords: keywords.clone(),
                signal,
                scope: Scope::Document(doc_id),
                source: Source::Feedback,
                created_at: event.timestamp,
                doc_version,
            });
            written += usize::from(stored);
        }
        Ok(written)
    }

    pub fn add_synthetic(&mut self, indicators: impl IntoIterator<Item = Indicator>) {
        for ind in indicators {
            self.insert(ind);
        }
    }

    /// Drops indicators for deleted documents or older document versions.
    pub fn evict_stale(&mut self, versions: &BTreeMap<String, u64>) -> usize {
        let fresh = |ind: &Indicator| {
            versions
                .get(ind.doc_id())
                .is_some_and(|&v| ind.doc_version >= v)
        };
        let mut evicted = 0;
        for lists in [&mut self.by_document, &mut self.by_chunk] {
            for list in lists.values_mut() {
                let before = list.len();
                list.retain(fresh);
                evicted += before - list.len();
            }
            lists.retain(|_, list| !list.is_empty());
        }
        evicted
    }

    /// Repository holding only the feedback indicators of `self`.
    pub fn feedback_only(&self) -> Self {
        Self {
            by_document: self.by_document.clone(),
            by_chunk: BTreeMap::new(),
            max_feedback_per_doc: self.max_feedback_per_doc,
        }
    }

    pub fn from_indicators(
        max_feedback_per_doc: usize,
        indicators: impl IntoIterator<Item = Indicator>,
    ) -> Result<Self> {
        let mut repo = Self::new(max_feedback_per_doc)?;
        for ind in indicators {
            if !(-1.0..=1.0).contains(&ind.signal) {
                return Err(Error::InvalidFeedback(format!(
                    "signal {} outside [-1, 1]",
                    ind.signal
                )));
            }
            repo.insert(ind);
        }
        Ok(repo)
    }
}

/// Writes indicators as JSONL, one per line.
pub fn save_indicators<'a>(
    path: &Path,
    indicators: impl IntoIterator<Item = &'a Indicator>,
) -> Result<()> {
    let mut out = String::new();
    for ind in indicators {
        out.push_str(&serde_json::to_string(ind)?);
        out.push('\n');
    }
    fs::write(path, out)
        .map_err(|e| Error::io(format!("writing indicators {}", path.display()), e))
}

/// Reads a JSONL indicator store. A missing file is an empty store.
pub fn load_indicators(path: &Path) -> Result<Vec<Indicator>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading indicators {}", path.display()), e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            serde_json::from_str(line).map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashingEmbedder;
    use chrono::TimeZone;

    fn at(secs: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + secs, 0).unwrap()
    }

    fn event(query: &str, stars: u8, docs: &[&str], t: i64) -> FeedbackEvent {
        FeedbackEvent {
            query: query.into(),
            rewritten_intent: None,
            star_rating: stars,
            referenced_docs: docs.iter().map(|d| d.to_string()).collect(),
            timestamp: at(t),
        }
    }

    fn versions(ids: &[(&str, u64)]) -> BTreeMap<String, u64> {
        ids.iter().map(|(d, v)| (d.to_string(), *v)).collect()
    }

    fn signals(ev: &FeedbackEvent) -> Vec<(String, f64)> {
        map_star_to_signals(ev, &SignalMapping::default()).unwrap()
    }

    #[test]
    fn five_stars_refined_by_citation_rank() {
        let got = signals(&event("q", 5, &["A", "B", "C"], 0));
        assert_eq!(
            got,
            vec![("A".into(), 1.0), ("B".into(), 0.75), ("C".into(), 0.5)]
        );
    }

    #[test]
    fn one_and_three_stars() {
        assert_eq!(signals(&event("q", 1, &["A"], 0)), vec![("A".into(), -1.0)]);
        assert_eq!(
            signals(&event("q", 3, &["A", "B"], 0)),
            vec![("A".into(), 0.0), ("B".into(), 0.0)]
        );
    }

    #[test]
    fn multiplier_floor_and_negative_switch() {
        let ev = event("q", 1, &["A", "B", "C", "D", "E"], 0);
        let refined: Vec<f64> = signals(&ev).into_iter().map(|(_, s)| s).collect();
        assert_eq!(refined, vec![-1.0, -0.75, -0.5, -0.25, -0.25]);
        let flat = map_star_to_signals(
            &ev,
            &SignalMapping {
                rank_refine_negative: false,
            },
        )
        .unwrap();
        assert!(flat.iter().all(|(_, s)| *s == -1.0));
    }

    #[test]
    fn invalid_events_are_rejected() {
        assert!(map_star_to_signals(&event("q", 0, &["A"], 0), &SignalMapping::default()).is_err());
        assert!(map_star_to_signals(&event("q", 6, &["A"], 0), &SignalMapping::default()).is_err());
        assert!(map_star_to_signals(&event("q", 4, &[], 0), &SignalMapping::default()).is_err());
    }

    #[test]
    fn keywords() {
        assert_eq!(
            extract_keywords("How do I restart the SQL server"),
            vec!["restart", "sql", "server"]
        );
        assert!(extract_keywords("").is_empty());
        assert!(extract_keywords("the the the").is_empty());
        assert_eq!(extract_keywords("Disk disk DISK full"), vec!["disk", "full"]);
    }

    #[test]
    fn ingest_stores_one_indicator_per_known_doc() {
        let emb = HashingEmbedder::default();
        let mut repo = IndicatorRepository::new(6).unwrap();
        let v = versions(&[("A", 1), ("B", 3)]);
        let n = repo
            .ingest_feedback(&event("restart sql", 5, &["A", "B"], 0), &SignalMapping::default(), &emb, &v)
            .unwrap();
        assert_eq!(n, 2);
        let b = &repo.feedback_for("B")[0];
        assert_eq!(b.signal, 0.75);
        assert_eq!(b.doc_version, 3);
        assert_eq!(b.scope, Scope::Document("B".into()));
        assert_eq!(b.keywords, vec!["restart", "sql"]);
    }

    #[test]
    fn only_k_most_recent_are_retained() {
        let emb = HashingEmbedder::default();
        let mut repo = IndicatorRepository::new(2).unwrap();
        let v = versions(&[("A", 1)]);
        for (i, q) in ["first", "second", "third"].iter().enumerate() {
            repo.ingest_feedback(&event(q, 5, &["A"], i as i64), &SignalMapping::default(), &emb, &v)
                .unwrap();
        }
        let kept: Vec<&str> = repo.feedback_for("A").iter().map(|i| i.query.as_str()).collect();
        assert_eq!(kept, vec!["third", "second"]);
    }

    #[test]
    fn late_arriving_old_event_does_not_displace_newer() {
        let emb = HashingEmbedder::default();
        let mut repo = IndicatorRepository::new(2).unwrap();
        let v = versions(&[("A", 1)]);
        let m = SignalMapping::default();
        repo.ingest_feedback(&event("b", 5, &["A"], 10), &m, &emb, &v).unwrap();
        repo.ingest_feedback(&event("c", 5, &["A"], 20), &m, &emb, &v).unwrap();
        let n = repo.ingest_feedback(&event("a", 5, &["A"], 0), &m, &emb, &v).unwrap();
        assert_eq!(n, 0);
        let kept: Vec<&str> = repo.feedback_for("A").iter().map(|i| i.query.as_str()).collect();
        assert_eq!(kept, vec!["c", "b"]);
    }

    #[test]
    fn repeated_query_replaces_older_feedback() {
        let emb = HashingEmbedder::default();
        let mut repo = IndicatorRepository::new(6).unwrap();
        let v = versions(&[("A", 1)]);
        let m = SignalMapping::default();
        repo.ingest_feedback(&event("q", 1, &["A"], 0), &m, &emb, &v).unwrap();
        repo.ingest_feedback(&event("q", 5, &["A"], 1), &m, &emb, &v).unwrap();
        assert_eq!(repo.feedback_for("A").len(), 1);
        assert_eq!(repo.feedback_for("A")[0].signal, 1.0);
    }

    #[test]
    fn unknown_documents_are_skipped() {
        let emb = HashingEmbedder::default();
        let mut repo = IndicatorRepository::new(6).unwrap();
        let n = repo
            .ingest_feedback(
                &event("q", 5, &["gone", "A"], 0),
                &SignalMapping::default(),
                &emb,
                &versions(&[("A", 1)]),
            )
            .unwrap();
        assert_eq!(n, 1);
        assert!(repo.feedback_for("gone").is_empty());
    }

    fn chunk(id: &str, content: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            doc_id: doc_of_chunk(id).into(),
            ordinal: 0,
            title: "t".into(),
            content: content.into(),
            content_length: content.chars().count(),
        }
    }

    #[test]
    fn synthetic_indicators_are_positive_and_chunk_scoped() {
        let c = chunk("d#0", "Restart the server. The server log shows disk errors on restart.");
        let inds = generate_synthetic_indicators(
            &c,
            2,
            &TemplateQueryProvider::default(),
            &HashingEmbedder::default(),
        )
        .unwrap();
        assert_eq!(inds.len(), 5);
        assert!(inds.iter().all(|i| i.signal == 1.0
            && i.scope == Scope::Chunk("d#0".into())
            && i.source == Source::Synthetic
            && i.doc_version == 2));
        assert_eq!(inds[0].query, "how to restart server");
    }

    #[test]
    fn template_provider_is_deterministic() {
        let c = chunk("d#0", "alpha beta gamma delta alpha beta alpha");
        let p = TemplateQueryProvider::default();
        assert_eq!(p.generate(&c).unwrap(), p.generate(&c).unwrap());
        assert_eq!(top_keywords(&c.content, 3), vec!["alpha", "beta", "gamma"]);
    }

    #[test]
    fn synthetic_generation_failures() {
        let emb = HashingEmbedder::default();
        let p = TemplateQueryProvider::default();
        assert!(generate_synthetic_indicators(&chunk("d#0", "  "), 1, &p, &emb).is_err());
        assert!(matches!(
            generate_synthetic_indicators(&chunk("d#0", "the of and"), 1, &p, &emb),
            Err(Error::Provider(_))
        ));
    }

    #[test]
    fn eviction_rules() {
        let emb = HashingEmbedder::default();
        let m = SignalMapping::default();
        let mut repo = IndicatorRepository::new(6).unwrap();
        let v1 = versions(&[("A", 1), ("B", 1)]);
        repo.ingest_feedback(&event("q1", 5, &["A"], 0), &m, &emb, &v1).unwrap();
        for (i, q) in ["x", "y", "z"].iter().enumerate() {
            repo.ingest_feedback(&event(q, 2, &["B"], i as i64), &m, &emb, &v1).unwrap();
        }
        assert_eq!(repo.evict_stale(&v1), 0);

        let bumped = versions(&[("A", 2), ("B", 1)]);
        assert_eq!(repo.evict_stale(&bumped), 1);
        assert!(repo.feedback_for("A").is_empty());

        let deleted = versions(&[("A", 2)]);
        assert_eq!(repo.evict_stale(&deleted), 3);
        assert_eq!(repo.feedback_count(), 0);
    }

    #[test]
    fn store_round_trip() {
        let emb = HashingEmbedder::default();
        let mut repo = IndicatorRepository::new(6).unwrap();
        let v = versions(&[("A", 1), ("B", 1)]);
        repo.ingest_feedback(&event("q", 4, &["A", "B"], 5), &SignalMapping::default(), &emb, &v)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        save_indicators(&path, repo.feedback()).unwrap();
        let back = IndicatorRepository::from_indicators(6, load_indicators(&path).unwrap()).unwrap();
        assert_eq!(back, repo);
        assert!(load_indicators(&dir.path().join("missing.jsonl")).unwrap().is_empty());
    }
}
