//! Evaluation: metrics, synthetic fixtures, the iterative benchmark and the
//! scenario suite.

pub mod bench;
pub mod metrics;
pub mod scenarios;
pub mod synth;

pub use bench::{
    run_iterative_benchmark, BenchmarkReport, EngineVariant, IndicatorSet, QueryOutcome,
    SimulationConfig, Split, Workbench,
};
pub use metrics::{doc_set_similarity, hit_at_n, recall, EvalRecord};
pub use scenarios::{run_scenarios, Scenario, ScenarioConfig, ScenarioReport, ScenarioRow};
pub use synth::{generate_corpus, query_pool, BenchQuery, SampledQueryProvider, SynthCorpusConfig};
