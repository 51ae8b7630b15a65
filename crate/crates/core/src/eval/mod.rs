//! Evaluation: metrics, query and judgment construction, and the experiment driver.

pub mod experiment;
pub mod metrics;
pub mod queries;

pub use experiment::{
    run_experiment, run_on_partitions, ExperimentConfig, MetricKind, MetricReport, System,
};
pub use metrics::{
    ndcg_at, normalized_entropy, paired_t_test, precision_at, recall_at, recall_at_nr,
};
pub use queries::{make_qrels, make_query, memberships_from_participation, Memberships, QrelSet};
