#![allow(dead_code)]

use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use fbrank::corpus::Document;
use fbrank::embedding::{EmbeddingProvider, HashingEmbedder};
use fbrank::eval::{generate_corpus, query_pool, BenchQuery, SampledQueryProvider, SynthCorpusConfig, Workbench};
use fbrank::indicators::{FeedbackEvent, TemplateQueryProvider};

pub const CHUNK_SIZE: usize = 600;

/// The desk-scale benchmark fixture: 100 synthetic documents (about 500
/// chunks), template synthetic queries, and a shuffled pool of two-word
/// held-out queries labelled with their source document.
pub struct Fixture {
    pub bench: Workbench,
    pub pool: Vec<BenchQuery>,
}

pub fn fixture() -> Fixture {
    fixture_with(SynthCorpusConfig::default())
}

pub fn fixture_with(cfg: SynthCorpusConfig) -> Fixture {
    let docs = generate_corpus(&cfg).expect("corpus");
    let hyqe = TemplateQueryProvider::new(5).expect("provider");
    let bench = Workbench::build(docs, CHUNK_SIZE, embedder(), Some(&hyqe), 6).expect("workbench");
    let held_out = SampledQueryProvider::new(11, 2, 2).expect("provider");
    let pool = query_pool(bench.chunks(), &held_out, 5).expect("pool");
    Fixture { bench, pool }
}

pub fn embedder() -> Arc<dyn EmbeddingProvider> {
    Arc::new(HashingEmbedder::default())
}

pub fn at(secs: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(1_700_000_000, 0).unwrap() + Duration::seconds(secs)
}

pub fn event(query: &str, stars: u8, docs: &[&str], secs: i64) -> FeedbackEvent {
    FeedbackEvent {
        query: query.to_string(),
        rewritten_intent: None,
        star_rating: stars,
        referenced_docs: docs.iter().map(|d| d.to_string()).collect(),
        timestamp: at(secs),
    }
}

pub fn doc(id: &str, title: &str, body: &str) -> Document {
    Document {
        doc_id: id.to_string(),
        title: title.to_string(),
        body: body.to_string(),
        version: 1,
    }
}
