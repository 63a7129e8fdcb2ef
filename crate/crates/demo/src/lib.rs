//! Browser demo: a seeded synthetic knowledge base ranked in the page.
//!
//! All methods exchange JSON strings so the page needs no generated bindings
//! beyond the `Demo` class.

use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use fbrank::corpus::Document;
use fbrank::embedding::{vscore_from_cosine, HashingEmbedder};
use fbrank::eval::{
    generate_corpus, query_pool, EngineVariant, IndicatorSet, SampledQueryProvider,
    SynthCorpusConfig, Workbench,
};
use fbrank::indicators::{
    map_star_to_signals, FeedbackEvent, IndicatorRepository, SignalMapping, TemplateQueryProvider,
};
use fbrank::ranker::RankerConfig;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const CHUNK_SIZE: usize = 600;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
struct DocSummary<'a> {
    doc_id: &'a str,
    title: &'a str,
}

#[derive(Serialize)]
struct RankOutput {
    records: Vec<fbrank::ranker::RankedRecord>,
    rounds: usize,
    pool_size: usize,
}

#[wasm_bindgen]
pub struct Demo {
    bench: Workbench,
    feedback: IndicatorRepository,
    clock: i64,
}

/// Ranking parameters a page can adjust.
pub struct RankParams {
    pub threshold: f64,
    pub top_k: usize,
    pub group_truncation: usize,
    pub margin_percent: Option<f64>,
    pub use_feedback: bool,
    pub use_synthetic: bool,
}

impl Demo {
    pub fn build(documents: usize, seed: u64) -> fbrank::Result<Self> {
        let docs = generate_corpus(&SynthCorpusConfig {
            seed,
            documents,
            ..SynthCorpusConfig::default()
        })?;
        let synthetic = TemplateQueryProvider::new(5)?;
        let bench = Workbench::build(
            docs,
            CHUNK_SIZE,
            Arc::new(HashingEmbedder::default()),
            Some(&synthetic),
            6,
        )?;
        let feedback = bench.empty_feedback();
        Ok(Self {
            bench,
            feedback,
            clock: 0,
        })
    }

    pub fn rank_with(&self, query: &str, p: &RankParams) -> fbrank::Result<String> {
        let indicators = match (p.use_feedback, p.use_synthetic) {
            (true, true) => IndicatorSet::Both,
            (true, false) => IndicatorSet::Feedback,
            (false, true) => IndicatorSet::Synthetic,
            (false, false) => IndicatorSet::None,
        };
        let variant = EngineVariant {
            name: "demo".into(),
            indicators,
            ranker: RankerConfig {
                threshold: p.threshold,
                top_k: p.top_k,
                group_truncation: p.group_truncation,
                margin_percent: p.margin_percent,
                ..RankerConfig::default()
            },
        };
        let index = self.bench.index(&variant, &self.feedback)?;
        let retrieval = self.bench.retrieve(&index, &variant.ranker, query, None)?;
        Ok(serde_json::to_string(&RankOutput {
            records: retrieval.records(),
            rounds: retrieval.rounds,
            pool_size: retrieval.pool_size,
        })?)
    }

    pub fn feedback_with(&mut self, query: &str, stars: u8, docs: Vec<String>) -> fbrank::Result<usize> {
        self.clock += 1;
        let epoch: DateTime<Utc> = DateTime::UNIX_EPOCH;
        let event = FeedbackEvent {
            query: query.to_string(),
            rewritten_intent: None,
            star_rating: stars,
            referenced_docs: docs,
            timestamp: epoch + Duration::seconds(self.clock),
        };
        event.validate()?;
        self.bench.ingest(&mut self.feedback, &event)
    }
}

#[wasm_bindgen]
impl Demo {
    /// Generates `documents` synthetic documents from `seed` and indexes them.
    #[wasm_bindgen(constructor)]
    pub fn new(documents: usize, seed: u32) -> Result<Demo, JsError> {
        Self::build(documents, u64::from(seed)).map_err(js_err)
    }

    /// `[{doc_id, title}]`
    pub fn documents(&self) -> String {
        let docs: Vec<DocSummary> = self
            .bench
            .docs()
            .iter()
            .map(|d: &Document| DocSummary {
                doc_id: &d.doc_id,
                title: &d.title,
            })
            .collect();
        serde_json::to_string(&docs).unwrap_or_default()
    }

    pub fn chunk_count(&self) -> usize {
        self.bench.chunks().len()
    }

    /// `[{text, golden}]`: example queries drawn from chunk words.
    pub fn sample_queries(&self, n: usize, seed: u32) -> Result<String, JsError> {
        let provider = SampledQueryProvider::new(u64::from(seed), 1, 2).map_err(js_err)?;
        let mut pool = query_pool(self.bench.chunks(), &provider, u64::from(seed)).map_err(js_err)?;
        pool.truncate(n);
        serde_json::to_string(&pool).map_err(js_err)
    }

    /// Ranks `query`. A negative `margin_percent` disables the margin filter.
    #[allow(clippy::too_many_arguments)]
    pub fn rank(
        &self,
        query: &str,
        threshold: f64,
        top_k: usize,
        group_truncation: usize,
        margin_percent: f64,
        use_feedback: bool,
        use_synthetic: bool,
    ) -> Result<String, JsError> {
        let params = RankParams {
            threshold,
            top_k,
            group_truncation,
            margin_percent: (margin_percent >= 0.0).then_some(margin_percent),
            use_feedback,
            use_synthetic,
        };
        self.rank_with(query, &params).map_err(js_err)
    }

    /// Records a rating; `docs` lists cited documents, best first, separated
    /// by commas. Returns how many indicators were written.
    pub fn add_feedback(&mut self, query: &str, stars: u8, docs: &str) -> Result<usize, JsError> {
        let docs = docs
            .split(',')
            .map(str::trim)
            .filter(|d| !d.is_empty())
            .map(str::to_string)
            .collect();
        self.feedback_with(query, stars, docs).map_err(js_err)
    }

    pub fn feedback_count(&self) -> usize {
        self.feedback.feedback_count()
    }

    pub fn clear_feedback(&mut self) {
        self.feedback = self.bench.empty_feedback();
    }
}

/// Signals written for a rating citing `cited` documents, best first.
#[wasm_bindgen]
pub fn star_signals(stars: u8, cited: usize, refine_negative: bool) -> Result<String, JsError> {
    let event = FeedbackEvent {
        query: "q".into(),
        rewritten_intent: None,
        star_rating: stars,
        referenced_docs: (1..=cited.max(1)).map(|i| format!("doc{i}")).collect(),
        timestamp: DateTime::UNIX_EPOCH,
    };
    let mapping = SignalMapping {
        rank_refine_negative: refine_negative,
    };
    let signals: Vec<f64> = map_star_to_signals(&event, &mapping)
        .map_err(js_err)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    serde_json::to_string(&signals).map_err(js_err)
}

/// `[[cos, vscore]]` sampled evenly over `[-1, 1]`.
#[wasm_bindgen]
pub fn vscore_curve(points: usize) -> String {
    let n = points.max(2);
    let curve: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let cos = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            [cos, vscore_from_cosine(cos)]
        })
        .collect();
    serde_json::to_string(&curve).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> RankParams {
        RankParams {
            threshold: 0.75,
            top_k: 5,
            group_truncation: 1,
            margin_percent: None,
            use_feedback: true,
            use_synthetic: false,
        }
    }

    #[test]
    fn feedback_moves_cited_document_first() {
        let mut demo = Demo::build(12, 3).unwrap();
        let query = "how does the cache expire";
        let target = demo.bench.docs()[7].doc_id.clone();
        assert_eq!(demo.feedback_with(query, 5, vec![target.clone()]).unwrap(), 1);
        let out: serde_json::Value = serde_json::from_str(&demo.rank_with(query, &params()).unwrap()).unwrap();
        assert_eq!(out["records"][0]["doc_id"], target.as_str());
        demo.clear_feedback();
        assert_eq!(demo.feedback_count(), 0);
    }

    #[test]
    fn curve_and_signals() {
        let curve: Vec<[f64; 2]> = serde_json::from_str(&vscore_curve(3)).unwrap();
        assert_eq!(curve[0], [-1.0, 1.0 / 3.0]);
        assert_eq!(curve[2], [1.0, 1.0]);
        let s: Vec<f64> = serde_json::from_str(&star_signals(5, 3, true).unwrap()).unwrap();
        assert_eq!(s, vec![1.0, 0.75, 0.5]);
    }
}
