//! Round trips through the on-disk formats.

mod common;

use fbrank::corpus::{load_corpus, write_corpus};
use fbrank::embedding::{embed, CachedProvider, EmbeddingProvider, HashingEmbedder};
use fbrank::eval::{EngineVariant, SynthCorpusConfig};
use fbrank::index::{Bm25Params, SearchIndex};
use fbrank::indicators::{load_indicators, save_indicators, IndicatorRepository};
use fbrank::ranker::RankerConfig;
use tempfile::TempDir;

fn small() -> common::Fixture {
    common::fixture_with(SynthCorpusConfig {
        documents: 20,
        ..SynthCorpusConfig::default()
    })
}

#[test]
fn saved_index_retrieves_identically() {
    let fx = small();
    let mut feedback = fx.bench.empty_feedback();
    for (i, q) in fx.pool.iter().take(10).enumerate() {
        let stars = if i % 3 == 0 { 1 } else { 5 };
        fx.bench.ingest(&mut feedback, &common::event(&q.text, stars, &[&q.golden], i as i64)).unwrap();
    }
    let variant = EngineVariant::feedback_hyqe(&RankerConfig::default(), 0.75);
    let index = fx.bench.index(&variant, &feedback).unwrap();

    let dir = TempDir::new().unwrap();
    index.save(dir.path()).unwrap();
    let loaded = SearchIndex::load(dir.path(), Bm25Params::default()).unwrap();
    assert_eq!(loaded.len(), index.len());

    for q in fx.pool.iter().take(40) {
        let a = fx.bench.retrieve(&index, &variant.ranker, &q.text, None).unwrap();
        let b = fx.bench.retrieve(&loaded, &variant.ranker, &q.text, None).unwrap();
        assert_eq!(a.records(), b.records(), "{}", q.text);
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.pool_size, b.pool_size);
    }
}

#[test]
fn corpus_round_trips() {
    let fx = small();
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, fx.bench.docs()).unwrap();
    assert_eq!(load_corpus(&path).unwrap(), fx.bench.docs());
}

#[test]
fn indicator_store_round_trips() {
    let fx = small();
    let mut repo = fx.bench.empty_feedback();
    for (i, q) in fx.pool.iter().take(5).enumerate() {
        fx.bench.ingest(&mut repo, &common::event(&q.text, 4, &[&q.golden], i as i64)).unwrap();
    }
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("store.jsonl");
    save_indicators(&path, repo.feedback()).unwrap();
    let loaded = load_indicators(&path).unwrap();
    let original: Vec<_> = repo.feedback().cloned().collect();
    assert_eq!(loaded.len(), 5);
    let rebuilt = IndicatorRepository::from_indicators(6, loaded).unwrap();
    let mut a: Vec<_> = rebuilt.feedback().cloned().collect();
    let mut b = original;
    a.sort_by(|x, y| x.query.cmp(&y.query));
    b.sort_by(|x, y| x.query.cmp(&y.query));
    assert_eq!(a, b);
}

#[test]
fn embedding_cache_survives_reopen() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("cache.jsonl");
    let texts = ["replica failover", "cache expiry", "replica failover"];
    let first: Vec<_> = {
        let cache = CachedProvider::open(HashingEmbedder::default(), &path).unwrap();
        let out = texts.iter().map(|t| embed(&cache, t).unwrap()).collect();
        assert_eq!(cache.len(), 2);
        out
    };
    let cache = CachedProvider::open(HashingEmbedder::default(), &path).unwrap();
    assert_eq!(cache.len(), 2);
    let plain = HashingEmbedder::default();
    for (t, e) in texts.iter().zip(&first) {
        assert_eq!(&embed(&cache, t).unwrap(), e);
        assert_eq!(&embed(&plain, t).unwrap(), e);
    }
    assert_eq!(cache.dim(), plain.dim());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
}
