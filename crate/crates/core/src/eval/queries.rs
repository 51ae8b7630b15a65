//! Queries from test initiatives and committee-based relevance judgments.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{normalize, Corpus, Initiative, PreprocessConfig, Vocabulary};
use crate::error::{Error, Result};
use crate::profiles::ProfileKey;
use crate::retrieval::{Query, ScoredHit};

use super::metrics::normalized_entropy;

pub const DEFAULT_MIN_INTERVENTIONS: usize = 10;
pub const SCATTER_TOP: usize = 20;

/// Committee id to member candidate ids.
pub type Memberships = BTreeMap<String, BTreeSet<String>>;

/// Relevant candidates per query id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelSet {
    pub queries: BTreeMap<String, BTreeSet<String>>,
}

impl QrelSet {
    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.queries.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// `query_id 0 candidate_id 1` lines.
    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        for (q, rel) in &self.queries {
            for c in rel {
                writeln!(out, "{q} 0 {c} 1")?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut queries: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split_ascii_whitespace().collect();
            match f[..] {
                [] => continue,
                [q, _, c, grade] => {
                    let grade: i64 = grade
                        .parse()
                        .map_err(|_| Error::parse(name, i + 1, format!("bad grade `{grade}`")))?;
                    if grade > 0 {
                        queries
                            .entry(q.to_string())
                            .or_default()
                            .insert(c.to_string());
                    }
                }
                _ => return Err(Error::parse(name, i + 1, "expected 4 fields")),
            }
        }
        Ok(Self { queries })
    }
}

/// Query text is the initiative title followed by its subject labels,
/// normalized like the corpus and restricted to the vocabulary.
pub fn make_query(
    initiative: &Initiative,
    vocab: &Vocabulary,
    config: &PreprocessConfig,
) -> Result<Query> {
    let mut text = initiative.title.clone();
    for s in &initiative.subjects {
        text.push(' ');
        text.push_str(s);
    }
    let terms = vocab.bag_of(&normalize(&text, config));
    if terms.is_empty() {
        return Err(Error::EmptyQuery(initiative.id.clone()));
    }
    Ok(Query {
        id: initiative.id.clone(),
        terms,
    })
}

/// Builds a free-text query with the same normalization.
pub fn text_query(
    id: &str,
    text: &str,
    vocab: &Vocabulary,
    config: &PreprocessConfig,
) -> Result<Query> {
    make_query(
        &Initiative {
            id: id.to_string(),
            committee_id: None,
            title: text.to_string(),
            subjects: vec![],
        },
        vocab,
        config,
    )
}

/// Membership inferred from participation: a candidate belongs to every
/// committee whose initiatives they spoke in.
pub fn memberships_from_participation(corpus: &Corpus) -> Memberships {
    let committee_of: BTreeMap<&str, &str> = corpus
        .initiatives
        .iter()
        .filter_map(|i| i.committee_id.as_deref().map(|c| (i.id.as_str(), c)))
        .collect();
    let mut out = Memberships::new();
    for doc in &corpus.documents {
        if let Some(c) = committee_of.get(doc.initiative_id.as_str()) {
            out.entry(c.to_string())
                .or_default()
                .insert(doc.candidate_id.clone());
        }
    }
    out
}

/// Reads `committee_id candidate_id` lines (whitespace separated).
pub fn read_memberships(path: &Path) -> Result<Memberships> {
    let name = path.display().to_string();
    let mut out = Memberships::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let f: Vec<&str> = line.split_ascii_whitespace().collect();
        match f[..] {
            [] => {}
            [c, m] => {
                out.entry(c.to_string()).or_default().insert(m.to_string());
            }
            _ => {
                return Err(Error::parse(
                    &name,
                    i + 1,
                    "expected `committee_id candidate_id`",
                ))
            }
        }
    }
    Ok(out)
}

pub fn write_memberships(path: &Path, memberships: &Memberships) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (c, members) in memberships {
        for m in members {
            writeln!(out, "{c} {m}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Relevant set of each test initiative: members of its committee with at
/// least `min_interventions` training documents. Initiatives without a
/// committee, or whose relevant set ends up empty, are left out.
pub fn make_qrels<'a>(
    test: impl IntoIterator<Item = &'a Initiative>,
    memberships: &Memberships,
    train: &Corpus,
    min_interventions: usize,
) -> QrelSet {
    let activity = train.interventions_per_candidate();
    let eligible = |c: &String| activity.get(c).copied().unwrap_or(0) >= min_interventions;
    let mut queries = BTreeMap::new();
    for init in test {
        let Some(committee) = &init.committee_id else {
            continue;
        };
        let relevant: BTreeSet<String> = memberships
            .get(committee)
            .map(|m| m.iter().filter(|c| eligible(c)).cloned().collect())
            .unwrap_or_default();
        if !relevant.is_empty() {
            queries.insert(init.id.clone(), relevant);
        }
    }
    QrelSet { queries }
}

/// Normalized entropies of the topic and candidate distributions over the
/// top hits of each query. Empty hit lists are skipped; hits without a topic
/// key only count toward candidates.
pub fn entropy_scatter(
    hit_lists: &[Vec<ScoredHit>],
    top: usize,
    n_topics: usize,
    n_candidates: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for hits in hit_lists {
        let head = &hits[..top.min(hits.len())];
        if head.is_empty() {
            continue;
        }
        let mut topics: BTreeMap<usize, u64> = BTreeMap::new();
        let mut candidates: BTreeMap<&str, u64> = BTreeMap::new();
        for h in head {
            if let ProfileKey::Topic(x) = h.target.key {
                *topics.entry(x).or_insert(0) += 1;
            }
            *candidates
                .entry(h.target.candidate_id.as_str())
                .or_insert(0) += 1;
        }
        let topic_counts: Vec<u64> = topics.into_values().collect();
        let topic_h = if topic_counts.is_empty() {
            0.0
        } else {
            normalized_entropy(&topic_counts, n_topics)?
        };
        let cand_counts: Vec<u64> = candidates.into_values().collect();
        points.push((topic_h, normalized_entropy(&cand_counts, n_candidates)?));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, RawIntervention};
    use crate::profiles::ProfileRef;

    fn record(
        init: &str,
        cand: &str,
        committee: Option<&str>,
        title: &str,
        subjects: &[&str],
        body: &str,
    ) -> RawIntervention {
        RawIntervention {
            initiative_id: init.into(),
            candidate_id: cand.into(),
            committee_id: committee.map(str::to_string),
            title: title.into(),
            subjects: subjects.iter().map(|s| s.to_string()).collect(),
            body: body.into(),
        }
    }

    #[test]
    fn query_from_title_and_subjects() {
        let cfg = PreprocessConfig::default()
            .with_min_df(0.0)
            .with_stopwords(["for"]);
        let records = vec![record(
            "i1",
            "a",
            Some("welfare"),
            "Transport concessions for older people",
            &["Public Transport", "Elderly"],
            "transport concessions older people public elderly budget",
        )];
        let (corpus, vocab) = build_corpus(&records, &cfg).unwrap();
        let q = make_query(&corpus.initiatives[0], &vocab, &cfg).unwrap();
        let words: BTreeMap<&str, u32> = q
            .terms
            .iter()
            .map(|(&t, &c)| (vocab.term(t).unwrap(), c))
            .collect();
        assert_eq!(
            words,
            BTreeMap::from([
                ("concessions", 1),
                ("elderly", 1),
                ("older", 1),
                ("people", 1),
                ("public", 1),
                ("transport", 2),
            ])
        );

        let mut title_only = corpus.initiatives[0].clone();
        title_only.subjects.clear();
        let q = make_query(&title_only, &vocab, &cfg).unwrap();
        assert_eq!(q.terms.values().sum::<u32>(), 4);

        let stop = Initiative {
            id: "i2".into(),
            committee_id: None,
            title: "for for".into(),
            subjects: vec!["For".into()],
        };
        assert!(matches!(
            make_query(&stop, &vocab, &cfg),
            Err(Error::EmptyQuery(_))
        ));
    }

    #[test]
    fn qrels_apply_participation_floor() {
        let mut records = Vec::new();
        // 15 committee members; members m0..m11 have 10 training documents,
        // m12..m14 have 9.
        for m in 0..15 {
            let n = if m < 12 { 10 } else { 9 };
            for j in 0..n {
                records.push(record(
                    &format!("t{m}_{j}"),
                    &format!("m{m}"),
                    Some("c1"),
                    "x",
                    &[],
                    "word",
                ));
            }
        }
        records.push(record("q1", "m0", Some("c1"), "x", &[], "word"));
        records.push(record("q2", "m0", None, "x", &[], "word"));
        let (corpus, _) = build_corpus(&records, &PreprocessConfig::default()).unwrap();
        let train_ids: BTreeSet<String> = corpus
            .initiatives
            .iter()
            .filter(|i| i.id.starts_with('t'))
            .map(|i| i.id.clone())
            .collect();
        let train = corpus.subset(&train_ids);
        let memberships = memberships_from_participation(&train);
        assert_eq!(memberships["c1"].len(), 15);
        let test: Vec<&Initiative> = corpus
            .initiatives
            .iter()
            .filter(|i| i.id.starts_with('q'))
            .collect();
        let qrels = make_qrels(test, &memberships, &train, DEFAULT_MIN_INTERVENTIONS);
        assert_eq!(qrels.len(), 1);
        let rel = qrels.relevant("q1").unwrap();
        assert_eq!(rel.len(), 12);
        assert!(!rel.contains("m12"));
        assert!(qrels.relevant("q2").is_none());
    }

    #[test]
    fn qrels_file_round_trip() {
        let mut q = QrelSet::default();
        q.queries.insert(
            "q1".into(),
            ["a", "b"].iter().map(|s| s.to_string()).collect(),
        );
        let mut buf = Vec::new();
        q.write(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "q1 0 a 1\nq1 0 b 1\n"
        );
        assert_eq!(QrelSet::read(&buf[..], "mem").unwrap(), q);
    }

    fn hit(cand: &str, topic: usize) -> ScoredHit {
        ScoredHit {
            target: ProfileRef::new(cand, ProfileKey::Topic(topic)),
            score: 0.0,
            rank: 0,
        }
    }

    #[test]
    fn scatter_cases() {
        let same_topic: Vec<ScoredHit> = (0..20).map(|i| hit(&format!("c{i}"), 4)).collect();
        let spread: Vec<ScoredHit> = (0..20).map(|i| hit("c0", i)).collect();
        let pts = entropy_scatter(&[same_topic, vec![], spread], SCATTER_TOP, 70, 40).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].0, 0.0);
        assert!((pts[0].1 - 20f64.ln() / 40f64.ln()).abs() < 1e-12);
        // 20 distinct topics out of 70: ln 20 / ln 70 = 0.7051.
        assert!((pts[1].0 - 20f64.ln() / 70f64.ln()).abs() < 1e-12);
        assert!((pts[1].0 - 0.7051).abs() < 1e-4);
        assert_eq!(pts[1].1, 0.0);
    }
}
