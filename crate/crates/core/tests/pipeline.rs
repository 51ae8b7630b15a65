use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use subprof::corpus::{
    build_corpus, make_partitions, Corpus, PreprocessConfig, RawIntervention, Vocabulary,
};
use subprof::eval::{run_experiment, ExperimentConfig, MetricReport, System};
use subprof::lda::{self, KHeuristic, LdaConfig};
use subprof::profiles::build_lda_subprofiles;
use subprof::synth::{generate, SynthParams, SynthTruth};
use subprof::topicselect::Strategy;

fn toy() -> Corpus {
    let records: Vec<RawIntervention> = (0..10)
        .map(|i| RawIntervention {
            initiative_id: format!("i{i}"),
            candidate_id: format!("c{}", i % 3),
            committee_id: None,
            title: String::new(),
            subjects: vec![],
            body: "alpha beta gamma".into(),
        })
        .collect();
    build_corpus(&records, &PreprocessConfig::default())
        .unwrap()
        .0
}

#[test]
fn partitions_are_frozen_for_a_seed() {
    let parts = make_partitions(&toy(), 0.8, 3, 7).unwrap();
    let tests: Vec<Vec<&str>> = parts
        .iter()
        .map(|p| p.test.iter().map(String::as_str).collect())
        .collect();
    assert_eq!(
        tests,
        vec![vec!["i3", "i4"], vec!["i4", "i9"], vec!["i2", "i3"]]
    );
    for p in &parts {
        assert_eq!(p.train.len(), 8);
        assert!(p.train.is_disjoint(&p.test));
    }
}

fn small_params() -> SynthParams {
    SynthParams {
        n_candidates: 12,
        docs_per_candidate: (8, 12),
        doc_length: (40, 80),
        seed: 21,
        ..SynthParams::default()
    }
}

fn small_corpus() -> (Corpus, Vocabulary, SynthTruth) {
    let (records, truth) = generate(&small_params()).unwrap();
    let (corpus, vocab) = build_corpus(&records, &PreprocessConfig::default()).unwrap();
    (corpus, vocab, truth)
}

fn small_config(systems: Vec<System>) -> ExperimentConfig {
    ExperimentConfig {
        systems,
        k_heuristics: vec![KHeuristic::SqrtHalfN],
        iterations: 50,
        fold_in_iterations: 10,
        lda_seed: 3,
        n_splits: 2,
        split_seed: 3,
        min_interventions: 3,
        ..ExperimentConfig::default()
    }
}

#[test]
fn perplexity_falls_with_training() {
    let (corpus, vocab, _) = small_corpus();
    let short = lda::train(
        &corpus.documents,
        vocab.len(),
        &LdaConfig::new(8, 1).with_iterations(2),
    )
    .unwrap();
    let long = lda::train(
        &corpus.documents,
        vocab.len(),
        &LdaConfig::new(8, 1).with_iterations(200),
    )
    .unwrap();
    let p_short = lda::perplexity(&short, &corpus.documents, 20, 9);
    let p_long = lda::perplexity(&long, &corpus.documents, 20, 9);
    assert!(p_long < p_short, "{p_long} >= {p_short}");
    assert!(p_long < vocab.len() as f64);
}

#[test]
fn overlap_yields_at_least_as_many_subprofiles_as_euclidean() {
    let (corpus, vocab, _) = small_corpus();
    let model = lda::train(
        &corpus.documents,
        vocab.len(),
        &LdaConfig::new(10, 4).with_iterations(100),
    )
    .unwrap();
    let mut per_candidate: BTreeMap<Strategy, BTreeMap<String, usize>> = BTreeMap::new();
    for s in [Strategy::Overlap, Strategy::Euclidean] {
        let (subprofiles, _) = build_lda_subprofiles(&corpus, &model, s).unwrap();
        for sp in subprofiles {
            *per_candidate
                .entry(s)
                .or_default()
                .entry(sp.id.candidate_id)
                .or_default() += 1;
        }
    }
    for (cand, &n) in &per_candidate[&Strategy::Euclidean] {
        assert!(per_candidate[&Strategy::Overlap][cand] >= n, "{cand}");
    }
}

#[test]
fn single_system_gives_one_row() {
    let (corpus, vocab, truth) = small_corpus();
    let report = run_experiment(
        &corpus,
        &vocab,
        Some(&truth.memberships()),
        &small_config(vec![System::TermMon]),
    )
    .unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.system, "termmon");
    assert_eq!(row.k, "-");
    assert_eq!(
        row.per_query.len(),
        report.queries_per_split.iter().sum::<usize>()
    );
    for m in &row.per_query {
        for v in [m.ndcg, m.precision, m.recall_nr] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn duplicated_systems_give_identical_rows() {
    let (corpus, vocab, truth) = small_corpus();
    let systems = vec![System::Lda(Strategy::Dice), System::Lda(Strategy::Dice)];
    let mut config = small_config(systems);
    config.k_heuristics = vec![KHeuristic::Fixed(6), KHeuristic::Fixed(6)];
    let report = run_experiment(&corpus, &vocab, Some(&truth.memberships()), &config).unwrap();
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows[1..] {
        assert_eq!(row, &report.rows[0]);
    }
}

fn render(report: &MetricReport) -> String {
    let mut out = Vec::new();
    report.write_table(&mut out).unwrap();
    report.write_jsonl(&mut out).unwrap();
    report.write_stats(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn small_synthetic_report_is_frozen() {
    let (corpus, vocab, truth) = small_corpus();
    let systems = vec![
        System::TermMon,
        System::TermInt,
        System::Lda(Strategy::Sorensen),
        System::Lda(Strategy::Euclidean),
        System::TopicMon,
    ];
    let report = run_experiment(
        &corpus,
        &vocab,
        Some(&truth.memberships()),
        &small_config(systems),
    )
    .unwrap();
    let text = render(&report);
    let path = fixture("small_report.txt");
    if std::env::var_os("SUBPROF_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let frozen =
        std::fs::read_to_string(&path).expect("fixture missing; rerun with SUBPROF_BLESS=1");
    assert_eq!(text, frozen);
    let skipped: BTreeSet<&String> = report.skipped_queries.iter().collect();
    assert_eq!(skipped.len(), report.skipped_queries.len());
}
