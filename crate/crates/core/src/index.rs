//! Searchable store over chunks and their indicators.
//!
//! Every chunk has the dense fields (title and content text, their keywords,
//! and their embeddings). Indicator fields are sparse: only chunks with at
//! least one attached indicator appear in them. Text fields are scored with
//! Okapi BM25 (`tscore`), embedding fields with `vscore` by exhaustive scan.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::Chunk;
use crate::embedding::{embed, vscore_unit, Embedding, EmbeddingProvider};
use crate::indicators::{
    extract_keywords, load_indicators, save_indicators, Indicator, IndicatorRepository, Scope,
};
use crate::ranker::{fuse, QueryBundle};
use crate::text;
use crate::{Error, Result};

pub const TITLE: &str = "title";
pub const CONTENT: &str = "content";
pub const KEYWORDS: &str = "keywords";
pub const INDICATOR_QUERIES: &str = "indicator_queries";
pub const TITLE_EMBEDDING: &str = "title_embedding";
pub const CONTENT_EMBEDDING: &str = "content_embedding";
pub const INDICATOR_EMBEDDING: &str = "indicator_embedding";

pub const TEXT_FIELDS: [&str; 4] = [TITLE, CONTENT, KEYWORDS, INDICATOR_QUERIES];
pub const VECTOR_FIELDS: [&str; 3] = [TITLE_EMBEDDING, CONTENT_EMBEDDING, INDICATOR_EMBEDDING];
pub const DEFAULT_DENSE_FIELDS: [&str; 4] = [TITLE, CONTENT, TITLE_EMBEDDING, CONTENT_EMBEDDING];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FieldQuery<'a> {
    Text(&'a str),
    Vector(&'a Embedding),
}

/// Chunks of one field ordered best first; ties by ascending chunk id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRankedList {
    pub field: String,
    /// Position of the query input this list was computed for.
    pub input: usize,
    pub entries: Vec<(String, f64)>,
}

impl FieldRankedList {
    /// 1-based rank of `chunk_id`, if present.
    pub fn rank_of(&self, chunk_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|(id, _)| id == chunk_id)
            .map(|p| p + 1)
    }

    pub fn chunk_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Inverted index for one text field.
#[derive(Debug, Clone, Default)]
struct TextField {
    postings: HashMap<String, Vec<(usize, u32)>>,
    lengths: Vec<u32>,
    present: usize,
    avg_len: f64,
}

impl TextField {
    fn build<'a>(texts: impl Iterator<Item = Option<&'a str>>) -> Self {
        let mut field = TextField::default();
        let mut total = 0u64;
        for (idx, value) in texts.enumerate() {
            let tokens = value.map(text::content_tokens).unwrap_or_default();
            field.lengths.push(tokens.len() as u32);
            if value.is_none() {
                continue;
            }
            field.present += 1;
            total += tokens.len() as u64;
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for tok in tokens {
                *tf.entry(tok).or_default() += 1;
            }
            for (term, n) in tf {
                field.postings.entry(term).or_default().push((idx, n));
            }
        }
        if field.present > 0 {
            field.avg_len = total as f64 / field.present as f64;
        }
        field
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.postings.get(term).map_or(0, Vec::len) as f64;
        let docs = self.present as f64;
        (1.0 + (docs - n + 0.5) / (n + 0.5)).ln()
    }

    fn term_weight(&self, tf: u32, len: u32, params: Bm25Params) -> f64 {
        let tf = f64::from(tf);
        let norm = if self.avg_len > 0.0 {
            f64::from(len) / self.avg_len
        } else {
            1.0
        };
        tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
    }

    /// BM25 of every chunk with a positive score.
    fn score_all(&self, query: &str, params: Bm25Params) -> HashMap<usize, f64> {
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for term in text::content_tokens(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(&term);
            for &(idx, tf) in list {
                *scores.entry(idx).or_default() +=
                    idf * self.term_weight(tf, self.lengths[idx], params);
            }
        }
        scores.retain(|_, s| *s > 0.0);
        scores
    }

    fn score_one(&self, query: &str, idx: usize, params: Bm25Params) -> f64 {
        let mut score = 0.0;
        for term in text::content_tokens(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            if let Ok(pos) = list.binary_search_by_key(&idx, |&(i, _)| i) {
                score += self.term_weight(list[pos].1, self.lengths[idx], params) * self.idf(&term);
            }
        }
        score
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldStats {
    pub kind: String,
    pub present: usize,
    pub terms: usize,
    pub avg_len: f64,
}

/// The chunk-level part of the index: dense fields only. Built once per corpus.
#[derive(Debug)]
pub struct CorpusIndex {
    chunks: Vec<Chunk>,
    positions: HashMap<String, usize>,
    doc_chunks: HashMap<String, Vec<usize>>,
    text: BTreeMap<&'static str, TextField>,
    title_embeddings: Vec<Embedding>,
    content_embeddings: Vec<Embedding>,
    params: Bm25Params,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChunkRecord {
    #[serde(flatten)]
    chunk: Chunk,
    title_embedding: Embedding,
    content_embedding: Embedding,
}

impl CorpusIndex {
    pub fn build(
        chunks: Vec<Chunk>,
        embedder: &dyn EmbeddingProvider,
        params: Bm25Params,
    ) -> Result<Self> {
        let mut title_embeddings = Vec::with_capacity(chunks.len());
        let mut content_embeddings = Vec::with_capacity(chunks.len());
        for chunk in &chunks {
            let title = if chunk.title.trim().is_empty() {
                &chunk.content
            } else {
                &chunk.title
            };
            title_embeddings.push(embed(embedder, title)?.normalized()?);
            content_embeddings.push(embed(embedder, &chunk.content)?.normalized()?);
        }
        Self::from_parts(chunks, title_embeddings, content_embeddings, params)
    }

    fn from_parts(
        chunks: Vec<Chunk>,
        title_embeddings: Vec<Embedding>,
        content_embeddings: Vec<Embedding>,
        params: Bm25Params,
    ) -> Result<Self> {
        let mut positions = HashMap::with_capacity(chunks.len());
        let mut doc_chunks: HashMap<String, Vec<usize>> = HashMap::new();
        for (idx, chunk) in chunks.iter().enumerate() {
            if positions.insert(chunk.chunk_id.clone(), idx).is_some() {
                return Err(Error::DuplicateChunk(chunk.chunk_id.clone()));
            }
            doc_chunks.entry(chunk.doc_id.clone()).or_default().push(idx);
        }
        let dims: BTreeSet<usize> = title_embeddings
            .iter()
            .chain(&content_embeddings)
            .map(Embedding::dim)
            .collect();
        if dims.len() > 1 {
            let mut it = dims.into_iter();
            return Err(Error::DimensionMismatch {
                left: it.next().unwrap_or_default(),
                right: it.next().unwrap_or_default(),
            });
        }
        let keywords: Vec<String> = chunks
            .iter()
            .map(|c| extract_keywords(&c.content).join(" "))
            .collect();
        let mut text = BTreeMap::new();
        text.insert(TITLE, TextField::build(chunks.iter().map(|c| Some(c.title.as_str()))));
        text.insert(
            CONTENT,
            TextField::build(chunks.iter().map(|c| Some(c.content.as_str()))),
        );
        text.insert(KEYWORDS, TextField::build(keywords.iter().map(|k| Some(k.as_str()))));
        Ok(Self {
            chunks,
            positions,
            doc_chunks,
            text,
            title_embeddings,
            content_embeddings,
            params,
        })
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.positions.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.content_embeddings.first().map(Embedding::dim)
    }
}

/// A corpus index plus attached indicators. Immutable once built.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    corpus: Arc<CorpusIndex>,
    indicators: Vec<Indicator>,
    /// Indicator positions attached to each chunk.
    attached: Vec<Vec<usize>>,
    /// Chunk positions each indicator is attached to.
    owners: Vec<Vec<usize>>,
    indicator_embeddings: Vec<Embedding>,
    indicator_text: TextField,
}

impl SearchIndex {
    /// Embeds and indexes `chunks`, then attaches the indicators of `repo`.
    pub fn build(
        chunks: Vec<Chunk>,
        repo: &IndicatorRepository,
        embedder: &dyn EmbeddingProvider,
        params: Bm25Params,
    ) -> Result<Self> {
        let corpus = Arc::new(CorpusIndex::build(chunks, embedder, params)?);
        Self::with_indicators(corpus, repo)
    }

    /// Attaches indicators to an existing corpus index.
    ///
    /// Document-scoped indicators attach to every chunk of their document,
    /// chunk-scoped ones to their chunk only. Indicators whose target is not
    /// in the corpus are skipped.
    pub fn with_indicators(corpus: Arc<CorpusIndex>, repo: &IndicatorRepository) -> Result<Self> {
        let mut attached = vec![Vec::new(); corpus.len()];
        let mut indicators = Vec::new();
        let mut owners = Vec::new();
        let mut indicator_embeddings = Vec::new();
        let dim = corpus.embedding_dim();
        for ind in repo.feedback().chain(repo.synthetic()) {
            let targets: Vec<usize> = match &ind.scope {
                Scope::Document(doc) => corpus.doc_chunks.get(doc).cloned().unwrap_or_default(),
                Scope::Chunk(id) => corpus.positions.get(id).map(|&i| vec![i]).unwrap_or_default(),
            };
            if targets.is_empty() {
                warn!("indicator target {:?} not in index, skipping", ind.scope);
                continue;
            }
            if dim.is_some_and(|d| d != ind.query_embedding.dim()) {
                return Err(Error::DimensionMismatch {
                    left: ind.query_embedding.dim(),
                    right: dim.unwrap_or_default(),
                });
            }
            let pos = indicators.len();
            for &t in &targets {
                attached[t].push(pos);
            }
            indicator_embeddings.push(ind.query_embedding.normalized()?);
            indicators.push(ind.clone());
            owners.push(targets);
        }
        let queries: Vec<Option<String>> = attached
            .iter()
            .map(|list| {
                (!list.is_empty()).then(|| {
                    list.iter()
                        .map(|&i| indicators[i].query.as_str())
                        .collect::<Vec<_>>()
                        .join("\n")
                })
            })
            .collect();
        let indicator_text = TextField::build(queries.iter().map(Option::as_deref));
        Ok(Self {
            corpus,
            indicators,
            attached,
            owners,
            indicator_embeddings,
            indicator_text,
        })
    }

    pub fn corpus(&self) -> &Arc<CorpusIndex> {
        &self.corpus
    }

    pub fn chunks(&self) -> &[Chunk] {
        self.corpus.chunks()
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.corpus.chunk(chunk_id)
    }

    pub fn indicators(&self) -> &[Indicator] {
        &self.indicators
    }

    /// Indicators attached to `chunk_id`, in attachment order.
    pub fn indicators_for(&self, chunk_id: &str) -> Vec<&Indicator> {
        self.corpus
            .positions
            .get(chunk_id)
            .map(|&i| self.attached[i].iter().map(|&p| &self.indicators[p]).collect())
            .unwrap_or_default()
    }

    fn position(&self, chunk_id: &str) -> Result<usize> {
        self.corpus
            .positions
            .get(chunk_id)
            .copied()
            .ok_or_else(|| Error::UnknownChunk(chunk_id.to_string()))
    }

    fn text_field(&self, field: &str) -> Result<&TextField> {
        if field == INDICATOR_QUERIES {
            return Ok(&self.indicator_text);
        }
        self.corpus
            .text
            .get(field)
            .ok_or_else(|| Error::UnknownField(field.to_string()))
    }

    fn vectors(&self, field: &str) -> Option<&[Embedding]> {
        match field {
            TITLE_EMBEDDING => Some(&self.corpus.title_embeddings),
            CONTENT_EMBEDDING => Some(&self.corpus.content_embeddings),
            _ => None,
        }
    }

    /// BM25 score of `chunk_id` for `query` on a text field; 0 when no term matches.
    pub fn tscore(&self, field: &str, query: &str, chunk_id: &str) -> Result<f64> {
        let tf = self.text_field(field)?;
        let idx = self.position(chunk_id)?;
        Ok(tf.score_one(query, idx, self.corpus.params))
    }

    fn check_dim(&self, query: &Embedding) -> Result<Embedding> {
        if let Some(dim) = self.corpus.embedding_dim() {
            if dim != query.dim() {
                return Err(Error::DimensionMismatch {
                    left: query.dim(),
                    right: dim,
                });
            }
        }
        query.normalized()
    }

    /// Best vscore of each chunk's attached indicators against `query`.
    fn indicator_scores(&self, query: &Embedding) -> HashMap<usize, f64> {
        let mut best: HashMap<usize, f64> = HashMap::new();
        for (emb, owners) in self.indicator_embeddings.iter().zip(&self.owners) {
            let s = vscore_unit(query.values(), emb.values());
            for &o in owners {
                let slot = best.entry(o).or_insert(s);
                if s > *slot {
                    *slot = s;
                }
            }
        }
        best
    }

    /// Scores of every chunk the field retrieves for `query`.
    fn field_scores(&self, field: &str, query: FieldQuery<'_>) -> Result<HashMap<usize, f64>> {
        match query {
            FieldQuery::Text(q) => {
                if VECTOR_FIELDS.contains(&field) {
                    return Err(Error::QueryKind {
                        field: field.to_string(),
                        expected: "vector",
                    });
                }
                Ok(self.text_field(field)?.score_all(q, self.corpus.params))
            }
            FieldQuery::Vector(emb) => {
                if TEXT_FIELDS.contains(&field) {
                    return Err(Error::QueryKind {
                        field: field.to_string(),
                        expected: "text",
                    });
                }
                let emb = self.check_dim(emb)?;
                if field == INDICATOR_EMBEDDING {
                    return Ok(self.indicator_scores(&emb));
                }
                let rows = self
                    .vectors(field)
                    .ok_or_else(|| Error::UnknownField(field.to_string()))?;
                Ok(rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| (i, vscore_unit(emb.values(), row.values())))
                    .collect())
            }
        }
    }

    fn ranked(&self, field: &str, input: usize, scores: impl IntoIterator<Item = (usize, f64)>, m: usize) -> FieldRankedList {
        let mut entries: Vec<(&str, f64)> = scores
            .into_iter()
            .map(|(i, s)| (self.corpus.chunks[i].chunk_id.as_str(), s))
            .collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries.truncate(m);
        FieldRankedList {
            field: field.to_string(),
            input,
            entries: entries.into_iter().map(|(id, s)| (id.to_string(), s)).collect(),
        }
    }

    /// Top-`m` chunks of one field. Text fields only return chunks with a
    /// positive BM25 score; embedding fields rank every chunk that has the field.
    pub fn search_field(&self, field: &str, query: FieldQuery<'_>, m: usize) -> Result<FieldRankedList> {
        self.search_field_for_input(field, query, m, 0)
    }

    fn search_field_for_input(
        &self,
        field: &str,
        query: FieldQuery<'_>,
        m: usize,
        input: usize,
    ) -> Result<FieldRankedList> {
        if m == 0 {
            return Err(Error::InvalidConfig("fetch size must be >= 1".into()));
        }
        let scores = self.field_scores(field, query)?;
        Ok(self.ranked(field, input, scores, m))
    }

    /// Orders `subset` by one field, dropping chunks the field does not retrieve.
    pub fn rank_subset(
        &self,
        field: &str,
        query: FieldQuery<'_>,
        input: usize,
        subset: &BTreeSet<String>,
    ) -> Result<FieldRankedList> {
        let positions: Vec<usize> = subset
            .iter()
            .map(|id| self.position(id))
            .collect::<Result<_>>()?;
        let scores: Vec<(usize, f64)> = match query {
            FieldQuery::Text(q) => {
                if VECTOR_FIELDS.contains(&field) {
                    return Err(Error::QueryKind {
                        field: field.to_string(),
                        expected: "vector",
                    });
                }
                let tf = self.text_field(field)?;
                positions
                    .into_iter()
                    .map(|i| (i, tf.score_one(q, i, self.corpus.params)))
                    .filter(|&(_, s)| s > 0.0)
                    .collect()
            }
            FieldQuery::Vector(_) => {
                let all = self.field_scores(field, query)?;
                positions
                    .into_iter()
                    .filter_map(|i| all.get(&i).map(|&s| (i, s)))
                    .collect()
            }
        };
        Ok(self.ranked(field, input, scores, usize::MAX))
    }

    fn field_query<'a>(field: &str, text: &'a str, emb: &'a Embedding) -> FieldQuery<'a> {
        if TEXT_FIELDS.contains(&field) {
            FieldQuery::Text(text)
        } else {
            FieldQuery::Vector(emb)
        }
    }

    /// One constituent list per (input, dense field) over the given chunk set,
    /// as used for local rank fusion.
    pub fn local_lists(
        &self,
        inputs: &QueryBundle,
        dense_fields: &[String],
        subset: &BTreeSet<String>,
    ) -> Result<Vec<FieldRankedList>> {
        let mut lists = Vec::new();
        for (u, input) in inputs.inputs().iter().enumerate() {
            for field in dense_fields {
                let q = Self::field_query(field, &input.text, &input.embedding);
                lists.push(self.rank_subset(field, q, u, subset)?);
            }
        }
        Ok(lists)
    }

    /// Multi-field hybrid search.
    ///
    /// Each (input, field) probe retrieves its top `m`. The retrieved union is
    /// then re-ranked per field and fused with reciprocal rank fusion.
    pub fn hybrid_search(
        &self,
        inputs: &QueryBundle,
        dense_fields: &[String],
        m: usize,
        rrf_constant: f64,
    ) -> Result<HybridResult> {
        if dense_fields.is_empty() {
            return Err(Error::InvalidConfig("dense_fields must not be empty".into()));
        }
        if let Some(f) = dense_fields.iter().find(|f| f.as_str() == INDICATOR_QUERIES || f.as_str() == INDICATOR_EMBEDDING) {
            return Err(Error::InvalidConfig(format!("`{f}` is an indicator field, not a dense field")));
        }
        let mut probes = Vec::new();
        for (u, input) in inputs.inputs().iter().enumerate() {
            for field in dense_fields {
                let q = Self::field_query(field, &input.text, &input.embedding);
                probes.push(self.search_field_for_input(field, q, m, u)?);
            }
        }
        let retrieved: BTreeSet<String> = probes
            .iter()
            .flat_map(|l| l.chunk_ids().map(str::to_string))
            .collect();
        let lists = self.local_lists(inputs, dense_fields, &retrieved)?;
        let mut fused = fuse(&lists, rrf_constant);
        fused.truncate(m);
        Ok(HybridResult {
            probes,
            retrieved,
            lists,
            fused,
        })
    }

    /// Vector probes of each input against the indicator query embeddings.
    /// A chunk scores the best match among its attached indicators; chunks
    /// whose best match is below `min_score` are not returned.
    pub fn indicator_probe(&self, inputs: &QueryBundle, m: usize, min_score: f64) -> Result<Vec<FieldRankedList>> {
        if self.indicators.is_empty() {
            return Ok(Vec::new());
        }
        inputs
            .inputs()
            .iter()
            .enumerate()
            .map(|(u, input)| {
                let mut list =
                    self.search_field_for_input(INDICATOR_EMBEDDING, FieldQuery::Vector(&input.embedding), m, u)?;
                list.entries.retain(|&(_, s)| s >= min_score);
                Ok(list)
            })
            .collect()
    }

    pub fn field_stats(&self) -> BTreeMap<String, FieldStats> {
        let mut stats = BTreeMap::new();
        let text_fields = self
            .corpus
            .text
            .iter()
            .map(|(name, f)| (*name, f))
            .chain(std::iter::once((INDICATOR_QUERIES, &self.indicator_text)));
        for (name, f) in text_fields {
            stats.insert(
                name.to_string(),
                FieldStats {
                    kind: "text".into(),
                    present: f.present,
                    terms: f.postings.len(),
                    avg_len: f.avg_len,
                },
            );
        }
        for name in [TITLE_EMBEDDING, CONTENT_EMBEDDING] {
            stats.insert(
                name.to_string(),
                FieldStats {
                    kind: "vector".into(),
                    present: self.len(),
                    terms: 0,
                    avg_len: 0.0,
                },
            );
        }
        stats.insert(
            INDICATOR_EMBEDDING.to_string(),
            FieldStats {
                kind: "vector".into(),
                present: self.attached.iter().filter(|a| !a.is_empty()).count(),
                terms: 0,
                avg_len: 0.0,
            },
        );
        stats
    }

    /// Writes `chunks.jsonl`, `indicators.jsonl` and `field_stats.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let mut out = String::new();
        for (i, chunk) in self.corpus.chunks.iter().enumerate() {
            let rec = ChunkRecord {
                chunk: chunk.clone(),
                title_embedding: self.corpus.title_embeddings[i].clone(),
                content_embedding: self.corpus.content_embeddings[i].clone(),
            };
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
        let chunks_path = dir.join("chunks.jsonl");
        fs::write(&chunks_path, out)
            .map_err(|e| Error::io(format!("writing {}", chunks_path.display()), e))?;
        save_indicators(&dir.join("indicators.jsonl"), &self.indicators)?;
        let stats = serde_json::json!({
            "bm25": self.corpus.params,
            "chunks": self.len(),
            "indicators": self.indicators.len(),
            "fields": self.field_stats(),
        });
        let stats_path = dir.join("field_stats.json");
        fs::write(&stats_path, serde_json::to_string_pretty(&stats)? + "\n")
            .map_err(|e| Error::io(format!("writing {}", stats_path.display()), e))
    }

    /// Rebuilds an index from the artifacts written by [`SearchIndex::save`].
    pub fn load(dir: &Path, params: Bm25Params) -> Result<Self> {
        let chunks_path = dir.join("chunks.jsonl");
        let raw = fs::read_to_string(&chunks_path)
            .map_err(|e| Error::io(format!("reading {}", chunks_path.display()), e))?;
        let mut chunks = Vec::new();
        let mut titles = Vec::new();
        let mut contents = Vec::new();
        for (idx, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ChunkRecord = serde_json::from_str(line).map_err(|e| Error::Malformed {
                path: chunks_path.clone(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            chunks.push(rec.chunk);
            titles.push(rec.title_embedding);
            contents.push(rec.content_embedding);
        }
        let corpus = Arc::new(CorpusIndex::from_parts(chunks, titles, contents, params)?);
        let indicators = load_indicators(&dir.join("indicators.jsonl"))?;
        let repo = IndicatorRepository::from_indicators(usize::MAX, indicators)?;
        Self::with_indicators(corpus, &repo)
    }
}

/// Output of [`SearchIndex::hybrid_search`].
#[derive(Debug, Clone)]
pub struct HybridResult {
    /// Raw top-`m` list of each (input, field) probe.
    pub probes: Vec<FieldRankedList>,
    /// Union of all probe results.
    pub retrieved: BTreeSet<String>,
    /// Per-field orderings of `retrieved`, the inputs to fusion.
    pub lists: Vec<FieldRankedList>,
    /// Top-`m` of the fused order with rrf scores.
    pub fused: Vec<(String, f64)>,
}

/// Chunks gathered by all retrieval strategies for one query.
#[derive(Debug, Clone, Default)]
pub struct CandidatePool {
    pub chunks: BTreeSet<String>,
    pub per_strategy: BTreeMap<String, Vec<FieldRankedList>>,
}

impl CandidatePool {
    pub fn add_strategy(&mut self, name: &str, lists: Vec<FieldRankedList>) {
        for list in &lists {
            self.chunks.extend(list.chunk_ids().map(str::to_string));
        }
        self.per_strategy.entry(name.to_string()).or_default().extend(lists);
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}
