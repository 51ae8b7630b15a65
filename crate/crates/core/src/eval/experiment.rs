//! End-to-end evaluation over repeated train/test partitions.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_partitions, Corpus, CorpusPartition, PreprocessConfig, Vocabulary};
use crate::error::{Error, Result};
use crate::fusion::{comb_lg_dcs, fuse_lm_hits, CandidateRanking, DEFAULT_DEPTH};
use crate::lda::{self, choose_k, KHeuristic, LdaConfig, TopicModel, DEFAULT_FOLD_IN_ITERATIONS};
use crate::profiles::{
    build_lda_subprofiles, build_term_intervention, build_term_monolithic, build_topic_profiles,
    profile_stats_with, split_counts, ProfileStats, TopicProfile, TopicProfileMode, TINY_THRESHOLD,
};
use crate::retrieval::{cosine_topic_search, search, Index, Query, ScoredHit, DEFAULT_MU};
use crate::topicselect::Strategy;

use super::metrics::{ndcg_at, paired_t_test, precision_at, recall_at_nr};
use super::queries::{
    entropy_scatter, make_qrels, make_query, memberships_from_participation, Memberships, QrelSet,
    DEFAULT_MIN_INTERVENTIONS, SCATTER_TOP,
};

/// A retrieval system under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    /// LDA topic subprofiles split with a selection strategy.
    Lda(Strategy),
    TermMon,
    TermInt,
    TopicMon,
    TopicInt,
}

impl System {
    pub fn uses_k(self) -> bool {
        !matches!(self, System::TermMon | System::TermInt)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            System::Lda(s) => write!(f, "{s}"),
            System::TermMon => f.write_str("termmon"),
            System::TermInt => f.write_str("termint"),
            System::TopicMon => f.write_str("topicmon"),
            System::TopicInt => f.write_str("topicint"),
        }
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "termmon" => Ok(System::TermMon),
            "termint" => Ok(System::TermInt),
            "topicmon" => Ok(System::TopicMon),
            "topicint" => Ok(System::TopicInt),
            other => other
                .parse()
                .map(System::Lda)
                .map_err(|_| Error::UnknownName {
                    kind: "system",
                    name: s.to_string(),
                }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub systems: Vec<System>,
    pub k_heuristics: Vec<KHeuristic>,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub fold_in_iterations: usize,
    pub lda_seed: u64,
    pub mu: f64,
    pub depth: usize,
    pub ratio: f64,
    pub n_splits: usize,
    pub split_seed: u64,
    pub cutoff: usize,
    pub min_interventions: usize,
    pub tiny_threshold: u32,
    pub preprocess: PreprocessConfig,
    /// Collect topic/candidate entropy pairs for LDA systems.
    pub scatter: bool,
    pub parallel_splits: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            systems: Strategy::ALL.into_iter().map(System::Lda).collect(),
            k_heuristics: vec![KHeuristic::SqrtHalfN],
            alpha: None,
            beta: lda::DEFAULT_BETA,
            iterations: lda::DEFAULT_ITERATIONS,
            fold_in_iterations: DEFAULT_FOLD_IN_ITERATIONS,
            lda_seed: 0,
            mu: DEFAULT_MU,
            depth: DEFAULT_DEPTH,
            ratio: 0.8,
            n_splits: 5,
            split_seed: 0,
            cutoff: 10,
            min_interventions: DEFAULT_MIN_INTERVENTIONS,
            tiny_threshold: TINY_THRESHOLD,
            preprocess: PreprocessConfig::default(),
            scatter: false,
            parallel_splits: false,
        }
    }
}

impl ExperimentConfig {
    pub fn lda_config(&self, k: usize) -> LdaConfig {
        LdaConfig {
            k,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            seed: self.lda_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub split: usize,
    pub query_id: String,
    pub ndcg: f64,
    pub precision: f64,
    pub recall_nr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    /// Topic-count heuristic label, `-` for term baselines.
    pub k: String,
    /// Topic count used in each split.
    pub k_values: Vec<usize>,
    pub ndcg: f64,
    pub precision: f64,
    pub recall_nr: f64,
    pub per_query: Vec<QueryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub split: usize,
    pub strategy: String,
    pub k: String,
    pub k_value: usize,
    pub stats: ProfileStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub split: usize,
    pub strategy: String,
    pub k: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cutoff: usize,
    pub rows: Vec<SystemRow>,
    pub profile_stats: Vec<StatsRow>,
    pub scatter: Vec<ScatterRow>,
    /// Queries per split after dropping empty or unjudged ones.
    pub queries_per_split: Vec<usize>,
    pub skipped_queries: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Ndcg,
    Precision,
    RecallNr,
}

impl MetricKind {
    fn of(self, m: &QueryMetrics) -> f64 {
        match self {
            MetricKind::Ndcg => m.ndcg,
            MetricKind::Precision => m.precision,
            MetricKind::RecallNr => m.recall_nr,
        }
    }
}

impl MetricReport {
    pub fn row(&self, system: &str, k: &str) -> Option<&SystemRow> {
        self.rows.iter().find(|r| r.system == system && r.k == k)
    }

    /// Paired t-test p-values between every pair of rows on one metric,
    /// pairing per (split, query).
    pub fn pairwise_p_values(&self, metric: MetricKind) -> Result<Vec<(String, String, f64)>> {
        let label = |r: &SystemRow| format!("{}@{}", r.system, r.k);
        let mut out = Vec::new();
        for (i, a) in self.rows.iter().enumerate() {
            for b in &self.rows[i + 1..] {
                let va: Vec<f64> = a.per_query.iter().map(|m| metric.of(m)).collect();
                let vb: Vec<f64> = b.per_query.iter().map(|m| metric.of(m)).collect();
                out.push((label(a), label(b), paired_t_test(&va, &vb)?));
            }
        }
        Ok(out)
    }

    pub fn write_table<W: Write>(&self, out: &mut W) -> Result<()> {
        let c = self.cutoff;
        writeln!(
            out,
            "{:<10} {:<10} {:>9} {:>9} {:>10}",
            "system",
            "k",
            format!("ndcg@{c}"),
            format!("p@{c}"),
            "recall@nr"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{:<10} {:<10} {:>9.4} {:>9.4} {:>10.4}",
                r.system, r.k, r.ndcg, r.precision, r.recall_nr
            )?;
        }
        Ok(())
    }

    /// One JSON object per row, without per-query values.
    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> Result<()> {
        for r in &self.rows {
            let line = serde_json::json!({
                "system": r.system,
                "k": r.k,
                "k_values": r.k_values,
                format!("ndcg@{}", self.cutoff): r.ndcg,
                format!("p@{}", self.cutoff): r.precision,
                "recall@nr": r.recall_nr,
                "queries": r.per_query.len(),
            });
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_p_values<W: Write>(&self, out: &mut W, metric: MetricKind) -> Result<()> {
        for (a, b, p) in self.pairwise_p_values(metric)? {
            writeln!(out, "{a} {b} {p:.6}")?;
        }
        Ok(())
    }

    pub fn write_stats<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut groups: BTreeMap<(usize, String), Vec<(String, ProfileStats)>> = BTreeMap::new();
        for s in &self.profile_stats {
            groups
                .entry((s.split, format!("{}={}", s.k, s.k_value)))
                .or_default()
                .push((s.strategy.clone(), s.stats.clone()));
        }
        for ((split, k), rows) in groups {
            writeln!(out, "split {split}, k {k}")?;
            crate::profiles::write_stats_table(out, &rows)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Candidate ranking for one query against one built system.
pub enum BuiltSystem {
    Terms(Index),
    Topics {
        model: TopicModel,
        profiles: Vec<TopicProfile>,
    },
}

impl BuiltSystem {
    /// Subprofile-level hits before fusion.
    pub fn hits(
        &self,
        query: &Query,
        config: &ExperimentConfig,
        seed: u64,
    ) -> Result<Vec<ScoredHit>> {
        match self {
            BuiltSystem::Terms(index) => Ok(search(query, index, config.mu, config.depth)),
            BuiltSystem::Topics { model, profiles } => {
                let q = lda::fold_in(model, &query.terms, config.fold_in_iterations, seed)?;
                cosine_topic_search(&q, profiles, config.depth)
            }
        }
    }

    pub fn rank(
        &self,
        query: &Query,
        config: &ExperimentConfig,
        seed: u64,
    ) -> Result<(CandidateRanking, Vec<ScoredHit>)> {
        let hits = self.hits(query, config, seed)?;
        let ranking = match self {
            BuiltSystem::Terms(_) => fuse_lm_hits(&hits, config.depth),
            BuiltSystem::Topics { .. } => comb_lg_dcs(&hits),
        };
        Ok((ranking, hits))
    }
}

/// Fold-in seed of a query: FNV-1a over its id, independent of evaluation order.
pub fn query_seed(base: u64, query_id: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ base;
    for b in query_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct SplitOutcome {
    rows: Vec<(System, String, usize, Vec<QueryMetrics>)>,
    stats: Vec<StatsRow>,
    scatter: Vec<ScatterRow>,
    n_queries: usize,
    skipped: Vec<String>,
}

fn evaluate_queries(
    system: &BuiltSystem,
    queries: &[Query],
    qrels: &QrelSet,
    config: &ExperimentConfig,
    split: usize,
) -> Result<(Vec<QueryMetrics>, Vec<Vec<ScoredHit>>)> {
    let results: Vec<(QueryMetrics, Vec<ScoredHit>)> = queries
        .par_iter()
        .map(|q| {
            let relevant = qrels.relevant(&q.id).ok_or(Error::UndefinedForEmptyQrel)?;
            let (ranking, hits) = system.rank(q, config, query_seed(config.lda_seed, &q.id))?;
            let ranked = ranking.candidates();
            Ok((
                QueryMetrics {
                    split,
                    query_id: q.id.clone(),
                    ndcg: ndcg_at(&ranked, relevant, config.cutoff)?,
                    precision: precision_at(&ranked, relevant, config.cutoff)?,
                    recall_nr: recall_at_nr(&ranked, relevant)?,
                },
                hits,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().unzip())
}

fn run_split(
    corpus: &Corpus,
    vocab: &Vocabulary,
    memberships: Option<&Memberships>,
    partition: &CorpusPartition,
    config: &ExperimentConfig,
) -> Result<SplitOutcome> {
    let split = partition.index;
    let train = corpus.subset(&partition.train);
    let derived;
    let memberships = match memberships {
        Some(m) => m,
        None => {
            derived = memberships_from_participation(&train);
            &derived
        }
    };
    let test = corpus
        .initiatives
        .iter()
        .filter(|i| partition.test.contains(&i.id));
    let qrels = make_qrels(test, memberships, &train, config.min_interventions);

    let mut queries = Vec::new();
    let mut skipped = Vec::new();
    for id in qrels.queries.keys() {
        let init = corpus
            .initiative(id)
            .expect("qrels come from corpus initiatives");
        match make_query(init, vocab, &config.preprocess) {
            Ok(q) => queries.push(q),
            Err(Error::EmptyQuery(id)) => skipped.push(format!("{split}:{id}")),
            Err(e) => return Err(e),
        }
    }

    let n_candidates = train.candidates().len();
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    let mut scatter = Vec::new();

    for &system in config.systems.iter().filter(|s| !s.uses_k()) {
        let profiles = match system {
            System::TermMon => build_term_monolithic(&train),
            _ => build_term_intervention(&train),
        };
        let built = BuiltSystem::Terms(Index::build(profiles)?);
        let (metrics, _) = evaluate_queries(&built, &queries, &qrels, config, split)?;
        rows.push((system, "-".to_string(), 0, metrics));
    }

    let topic_systems: Vec<System> = config
        .systems
        .iter()
        .copied()
        .filter(|s| s.uses_k())
        .collect();
    if !topic_systems.is_empty() {
        for &heuristic in &config.k_heuristics {
            let k = choose_k(train.stats(vocab.len()), heuristic);
            let label = heuristic.to_string();
            let lda_config = config.lda_config(k);
            let needs_split_model = topic_systems.iter().any(|s| matches!(s, System::Lda(_)));
            let model = if needs_split_model {
                Some(lda::train(&train.documents, vocab.len(), &lda_config)?)
            } else {
                None
            };
            for &system in &topic_systems {
                let built = match system {
                    System::Lda(strategy) => {
                        let model = model.as_ref().expect("trained above");
                        let (subprofiles, splits) = build_lda_subprofiles(&train, model, strategy)?;
                        stats.push(StatsRow {
                            split,
                            strategy: strategy.to_string(),
                            k: label.clone(),
                            k_value: k,
                            stats: profile_stats_with(
                                &subprofiles,
                                &split_counts(&train.documents, &splits),
                                config.tiny_threshold,
                            ),
                        });
                        BuiltSystem::Terms(Index::build(subprofiles)?)
                    }
                    System::TopicMon | System::TopicInt => {
                        let mode = if system == System::TopicMon {
                            TopicProfileMode::Monolithic
                        } else {
                            TopicProfileMode::Intervention
                        };
                        let (model, profiles) =
                            build_topic_profiles(&train, vocab.len(), mode, &lda_config)?;
                        BuiltSystem::Topics { model, profiles }
                    }
                    System::TermMon | System::TermInt => unreachable!("filtered above"),
                };
                let (metrics, hits) = evaluate_queries(&built, &queries, &qrels, config, split)?;
                if config.scatter && n_candidates >= 2 {
                    if let System::Lda(strategy) = system {
                        scatter.push(ScatterRow {
                            split,
                            strategy: strategy.to_string(),
                            k: label.clone(),
                            points: entropy_scatter(&hits, SCATTER_TOP, k, n_candidates)?,
                        });
                    }
                }
                rows.push((system, label.clone(), k, metrics));
            }
        }
    }

    Ok(SplitOutcome {
        rows,
        stats,
        scatter,
        n_queries: queries.len(),
        skipped,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Runs every configured system on every split. Metrics are averaged over a
/// split's queries first, then over splits. Membership defaults to training
/// participation when `memberships` is `None`.
pub fn run_experiment(
    corpus: &Corpus,
    vocab: &Vocabulary,
    memberships: Option<&Memberships>,
    config: &ExperimentConfig,
) -> Result<MetricReport> {
    let partitions = make_partitions(corpus, config.ratio, config.n_splits, config.split_seed)?;
    run_on_partitions(corpus, vocab, memberships, &partitions, config)
}

pub fn run_on_partitions(
    corpus: &Corpus,
    vocab: &Vocabulary,
    memberships: Option<&Memberships>,
    partitions: &[CorpusPartition],
    config: &ExperimentConfig,
) -> Result<MetricReport> {
    let outcomes: Vec<SplitOutcome> = if config.parallel_splits {
        partitions
            .par_iter()
            .map(|p| run_split(corpus, vocab, memberships, p, config))
            .collect::<Result<_>>()?
    } else {
        partitions
            .iter()
            .map(|p| run_split(corpus, vocab, memberships, p, config))
            .collect::<Result<_>>()?
    };

    let mut report = MetricReport {
        cutoff: config.cutoff,
        ..Default::default()
    };
    // Every split emits its rows in the same order, so rows are matched by
    // position; repeated systems stay separate rows.
    let mut grouped: Vec<((System, String), Vec<usize>, Vec<Vec<QueryMetrics>>)> = Vec::new();
    for outcome in outcomes {
        for (i, (system, label, k, metrics)) in outcome.rows.into_iter().enumerate() {
            match grouped.get_mut(i) {
                Some((_, ks, per_split)) => {
                    ks.push(k);
                    per_split.push(metrics);
                }
                None => grouped.push(((system, label), vec![k], vec![metrics])),
            }
        }
        report.profile_stats.extend(outcome.stats);
        report.scatter.extend(outcome.scatter);
        report.queries_per_split.push(outcome.n_queries);
        report.skipped_queries.extend(outcome.skipped);
    }
    for ((system, label), ks, per_split) in grouped {
        let split_mean = |kind: MetricKind| {
            mean(
                per_split
                    .iter()
                    .filter(|qs| !qs.is_empty())
                    .map(|qs| mean(qs.iter().map(|m| kind.of(m)))),
            )
        };
        report.rows.push(SystemRow {
            system: system.to_string(),
            k: label,
            k_values: if system.uses_k() { ks } else { Vec::new() },
            ndcg: split_mean(MetricKind::Ndcg),
            precision: split_mean(MetricKind::Precision),
            recall_nr: split_mean(MetricKind::RecallNr),
            per_query: per_split.into_iter().flatten().collect(),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_names() {
        for name in [
            "termmon", "termint", "topicmon", "topicint", "sorensen", "overlap",
        ] {
            assert_eq!(name.parse::<System>().unwrap().to_string(), name);
        }
        assert!("bm25".parse::<System>().is_err());
        assert!(System::Lda(Strategy::Dice).uses_k());
        assert!(!System::TermInt.uses_k());
    }

    #[test]
    fn query_seeds_differ_by_id() {
        assert_ne!(query_seed(1, "a"), query_seed(1, "b"));
        assert_eq!(query_seed(1, "a"), query_seed(1, "a"));
    }
}
