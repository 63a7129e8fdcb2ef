//! Fine-grained scenarios over a fixed feedback history.
//!
//! Four slices of queries are evaluated against every engine variant:
//! queries re-issued verbatim after high or low ratings, near-duplicates of a
//! single highly rated query, and queries unrelated to any history.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embedding::{embed, vscore_unit, Embedding};
use crate::eval::bench::{EngineVariant, Workbench};
use crate::eval::metrics::{doc_set_similarity, recall};
use crate::indicators::{FeedbackEvent, IndicatorRepository};
use crate::index::SearchIndex;
use crate::ranker::RankerConfig;
use crate::text;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ExactHigh,
    ExactLow,
    SimilarHigh,
    Unseen,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::ExactHigh => "exact_high",
            Scenario::ExactLow => "exact_low",
            Scenario::SimilarHigh => "similar_high",
            Scenario::Unseen => "unseen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub ks: Vec<usize>,
    /// Two queries are similar when their vscore reaches this value.
    pub similar_threshold: f64,
    pub high_min_stars: u8,
    pub low_max_stars: u8,
    /// Ranker used for the reference Baseline of the unseen slice.
    #[serde(skip)]
    pub baseline: RankerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            ks: vec![3, 7, 12],
            similar_threshold: 0.9,
            high_min_stars: 4,
            low_max_stars: 2,
            baseline: RankerConfig::default(),
        }
    }
}

impl ScenarioConfig {
    fn depth(&self) -> usize {
        self.ks.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidConfig("scenario ks must be non-empty and >= 1".into()));
        }
        if !(1.0 / 3.0..=1.0).contains(&self.similar_threshold) {
            return Err(Error::InvalidConfig("similar_threshold must lie in [1/3, 1]".into()));
        }
        if self.low_max_stars >= self.high_min_stars {
            return Err(Error::InvalidConfig("low_max_stars must be below high_min_stars".into()));
        }
        Ok(())
    }
}

/// Aggregate line of `scenarios.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub scenario: &'static str,
    pub config: String,
    pub metric: &'static str,
    pub k: usize,
    pub value: String,
    pub queries: usize,
}

/// Metric of one query under one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioQuery {
    pub scenario: Scenario,
    pub config: String,
    pub query: String,
    pub k: usize,
    pub value: f64,
    /// Whether the query's own feedback indicators are all still stored.
    pub survives: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioReport {
    pub rows: Vec<ScenarioRow>,
    pub details: Vec<ScenarioQuery>,
    pub notices: Vec<String>,
}

impl ScenarioReport {
    pub fn mean(&self, scenario: Scenario, config: &str, k: usize) -> Option<f64> {
        let values: Vec<f64> = self
            .details
            .iter()
            .filter(|d| d.scenario == scenario && d.config == config && d.k == k)
            .map(|d| d.value)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer
                .serialize(row)
                .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn push(&mut self, scenario: Scenario, config: &str, metric: &'static str, k: usize, values: &[f64]) {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        self.rows.push(ScenarioRow {
            scenario: scenario.as_str(),
            config: config.to_string(),
            metric,
            k,
            value: format!("{mean:.6}"),
            queries: values.len(),
        });
    }
}

/// Near-duplicates of a query: its content words reversed, and each variant
/// with one content word dropped.
pub fn query_variants(query: &str) -> Vec<String> {
    let tokens = text::content_tokens(query);
    let mut out = BTreeSet::new();
    if tokens.len() >= 2 {
        let mut rev = tokens.clone();
        rev.reverse();
        out.insert(rev.join(" "));
    }
    if tokens.len() >= 3 {
        for skip in 0..tokens.len() {
            let kept: Vec<&str> = tokens
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, t)| t.as_str())
                .collect();
            out.insert(kept.join(" "));
        }
    }
    out.remove(query);
    out.into_iter().collect()
}

/// Latest event per distinct query, in timestamp order.
fn latest_per_query(history: &[FeedbackEvent]) -> Vec<&FeedbackEvent> {
    let mut latest: BTreeMap<&str, &FeedbackEvent> = BTreeMap::new();
    for ev in history {
        match latest.get(ev.query.as_str()) {
            Some(prev) if prev.timestamp > ev.timestamp => {}
            _ => {
                latest.insert(&ev.query, ev);
            }
        }
    }
    let mut events: Vec<&FeedbackEvent> = latest.into_values().collect();
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.query.cmp(&b.query)));
    events
}

/// Probes of one scenario, with optional reference retrievals per probe.
type ProbeSet<'a> = (Scenario, &'a [Probe], Option<&'a [Vec<String>]>);

struct Probe {
    query: String,
    intent: Option<String>,
    reference: Vec<String>,
    survives: bool,
}

fn run_probes(
    bench: &Workbench,
    index: &SearchIndex,
    ranker: &RankerConfig,
    probes: &[Probe],
) -> Result<Vec<Vec<String>>> {
    probes
        .iter()
        .map(|p| Ok(bench.retrieve(index, ranker, &p.query, p.intent.as_deref())?.doc_ids()))
        .collect()
}

/// Runs every scenario for every variant.
///
/// `history` is ingested in timestamp order into a fresh feedback store.
/// `unseen` lists candidate queries for the unseen slice; candidates similar
/// to any history query are discarded.
pub fn run_scenarios(
    bench: &Workbench,
    history: &[FeedbackEvent],
    unseen: &[String],
    variants: &[EngineVariant],
    cfg: &ScenarioConfig,
) -> Result<ScenarioReport> {
    cfg.validate()?;
    let depth = cfg.depth();
    let mut ordered: Vec<&FeedbackEvent> = history.iter().collect();
    ordered.sort_by_key(|e| e.timestamp);
    let mut feedback = bench.empty_feedback();
    for ev in &ordered {
        ev.validate()?;
        bench.ingest(&mut feedback, ev)?;
    }

    let latest = latest_per_query(history);
    let exact = |keep: &dyn Fn(u8) -> bool| -> Vec<Probe> {
        latest
            .iter()
            .filter(|ev| keep(ev.star_rating))
            .map(|ev| Probe {
                query: ev.query.clone(),
                intent: ev.rewritten_intent.clone(),
                reference: ev.referenced_docs.clone(),
                survives: survives(&feedback, ev),
            })
            .collect()
    };
    let high = exact(&|s| s >= cfg.high_min_stars);
    let low = exact(&|s| s <= cfg.low_max_stars);

    let embedder = bench.embedder();
    let history_vectors: Vec<(&FeedbackEvent, Embedding)> = latest
        .iter()
        .map(|ev| Ok((*ev, embed(embedder, &ev.query)?.normalized()?)))
        .collect::<Result<_>>()?;
    let known: BTreeSet<&str> = latest.iter().map(|e| e.query.as_str()).collect();
    let similar_to = |q: &str| -> Result<Vec<&FeedbackEvent>> {
        let v = embed(embedder, q)?.normalized()?;
        Ok(history_vectors
            .iter()
            .filter(|(_, h)| vscore_unit(v.values(), h.values()) >= cfg.similar_threshold)
            .map(|(ev, _)| *ev)
            .collect())
    };

    let mut similar = Vec::new();
    let mut used = BTreeSet::new();
    for ev in latest.iter().filter(|e| e.star_rating >= cfg.high_min_stars) {
        for variant in query_variants(&ev.query) {
            if known.contains(variant.as_str()) || !used.insert(variant.clone()) {
                continue;
            }
            let matches = similar_to(&variant)?;
            if matches.len() == 1 && matches[0].query == ev.query {
                similar.push(Probe {
                    query: variant,
                    intent: None,
                    reference: ev.referenced_docs.clone(),
                    survives: survives(&feedback, ev),
                });
            }
        }
    }

    let mut fresh = Vec::new();
    for q in unseen {
        if !known.contains(q.as_str()) && similar_to(q)?.is_empty() {
            fresh.push(Probe {
                query: q.clone(),
                intent: None,
                reference: Vec::new(),
                survives: true,
            });
        }
    }

    let mut report = ScenarioReport::default();
    for (scenario, probes) in [
        (Scenario::ExactHigh, &high),
        (Scenario::ExactLow, &low),
        (Scenario::SimilarHigh, &similar),
        (Scenario::Unseen, &fresh),
    ] {
        if probes.is_empty() {
            report
                .notices
                .push(format!("scenario {} skipped: no queries", scenario.as_str()));
        }
    }

    let baseline_docs = if fresh.is_empty() {
        Vec::new()
    } else {
        let base = EngineVariant::baseline(&RankerConfig {
            top_k: depth,
            ..cfg.baseline.clone()
        });
        let index = bench.index(&base, &feedback)?;
        run_probes(bench, &index, &base.ranker, &fresh)?
    };

    for variant in variants {
        let ranker = RankerConfig {
            top_k: depth,
            ..variant.ranker.clone()
        };
        let index = bench.index(variant, &feedback)?;
        let name = variant.name.as_str();

        for (scenario, probes) in [(Scenario::ExactHigh, &high), (Scenario::SimilarHigh, &similar)] {
            if probes.is_empty() {
                continue;
            }
            let retrieved = run_probes(bench, &index, &ranker, probes)?;
            for &k in &cfg.ks {
                let mut values = Vec::with_capacity(probes.len());
                for (p, docs) in probes.iter().zip(&retrieved) {
                    let golden: BTreeSet<String> = p.reference.iter().cloned().collect();
                    let value = recall(&golden, docs, k)?;
                    values.push(value);
                    report.details.push(ScenarioQuery {
                        scenario,
                        config: name.to_string(),
                        query: p.query.clone(),
                        k,
                        value,
                        survives: p.survives,
                    });
                }
                report.push(scenario, name, "recall", k, &values);
            }
        }

        let pairs: [ProbeSet<'_>; 2] = [
            (Scenario::ExactLow, &low[..], None),
            (Scenario::Unseen, &fresh[..], Some(&baseline_docs[..])),
        ];
        for (scenario, probes, reference) in pairs {
            if probes.is_empty() {
                continue;
            }
            let retrieved = run_probes(bench, &index, &ranker, probes)?;
            for &k in &cfg.ks {
                let mut values = Vec::with_capacity(probes.len());
                for (i, (p, docs)) in probes.iter().zip(&retrieved).enumerate() {
                    let old_list = match reference {
                        Some(base) => &base[i],
                        None => &p.reference,
                    };
                    let old: BTreeSet<String> = old_list.iter().take(k).cloned().collect();
                    if old.is_empty() {
                        continue;
                    }
                    let new: BTreeSet<String> = docs.iter().take(k).cloned().collect();
                    let value = doc_set_similarity(&old, &new)?;
                    values.push(value);
                    report.details.push(ScenarioQuery {
                        scenario,
                        config: name.to_string(),
                        query: p.query.clone(),
                        k,
                        value,
                        survives: p.survives,
                    });
                }
                if !values.is_empty() {
                    report.push(scenario, name, "doc_set_similarity", k, &values);
                }
            }
        }
    }
    Ok(report)
}

/// True when every document the event referenced still holds an indicator
/// for the event's query.
fn survives(repo: &IndicatorRepository, ev: &FeedbackEvent) -> bool {
    ev.referenced_docs.iter().all(|doc| {
        repo.feedback_for(doc).iter().any(|i| i.query == ev.query)
    })
}
