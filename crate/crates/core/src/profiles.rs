//! Candidate profiles: LDA topic subprofiles and the term/topic baselines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, TermBag, Vocabulary};
use crate::error::{Error, Result};
use crate::lda::{self, LdaConfig, TopicModel};
use crate::splitter::{split_corpus, Subdocument};
use crate::topicselect::Strategy;

/// Subprofiles with fewer occurrences than this are counted as tiny.
pub const TINY_THRESHOLD: u32 = 50;

/// What a profile unit stands for within its candidate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProfileKey {
    /// An LDA topic id.
    Topic(usize),
    /// The candidate's whole history in one unit.
    Monolithic,
    /// One unit per initiative the candidate took part in.
    Initiative(String),
}

impl fmt::Display for ProfileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKey::Topic(x) => write!(f, "{x}"),
            ProfileKey::Monolithic => f.write_str("*"),
            ProfileKey::Initiative(id) => write!(f, "@{id}"),
        }
    }
}

impl FromStr for ProfileKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "*" {
            Ok(ProfileKey::Monolithic)
        } else if let Some(id) = s.strip_prefix('@') {
            Ok(ProfileKey::Initiative(id.to_string()))
        } else {
            s.parse()
                .map(ProfileKey::Topic)
                .map_err(|_| Error::UnknownName {
                    kind: "profile key",
                    name: s.to_string(),
                })
        }
    }
}

/// Identity of a retrievable profile unit. Orders by candidate, then key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProfileRef {
    pub candidate_id: String,
    pub key: ProfileKey,
}

impl ProfileRef {
    pub fn new(candidate_id: impl Into<String>, key: ProfileKey) -> Self {
        Self {
            candidate_id: candidate_id.into(),
            key,
        }
    }
}

impl fmt::Display for ProfileRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.candidate_id, self.key)
    }
}

impl FromStr for ProfileRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (cand, key) = s.rsplit_once('#').ok_or_else(|| Error::UnknownName {
            kind: "profile reference",
            name: s.to_string(),
        })?;
        Ok(Self::new(cand, key.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subprofile {
    pub id: ProfileRef,
    pub terms: TermBag,
    pub size: u32,
}

impl Subprofile {
    pub fn new(id: ProfileRef, terms: TermBag) -> Self {
        let size = terms.values().sum();
        Self { id, terms, size }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicProfile {
    pub id: ProfileRef,
    pub topics: Vec<f64>,
}

fn add_bag(into: &mut TermBag, from: &TermBag) {
    for (&t, &c) in from {
        *into.entry(t).or_insert(0) += c;
    }
}

/// Merges subdocuments into one subprofile per (candidate, topic). `docs`
/// and `splits` are parallel.
pub fn merge_subdocuments(docs: &[Document], splits: &[Vec<Subdocument>]) -> Vec<Subprofile> {
    let mut merged: BTreeMap<ProfileRef, TermBag> = BTreeMap::new();
    for (doc, subs) in docs.iter().zip(splits) {
        for sub in subs {
            let id = ProfileRef::new(doc.candidate_id.clone(), ProfileKey::Topic(sub.topic_id));
            add_bag(merged.entry(id).or_default(), &sub.terms);
        }
    }
    merged
        .into_iter()
        .filter(|(_, bag)| !bag.is_empty())
        .map(|(id, bag)| Subprofile::new(id, bag))
        .collect()
}

/// Topic subprofiles of every candidate in the training corpus, plus the
/// per-document splits they came from.
pub fn build_lda_subprofiles(
    train: &Corpus,
    model: &TopicModel,
    strategy: Strategy,
) -> Result<(Vec<Subprofile>, Vec<Vec<Subdocument>>)> {
    let splits = split_corpus(model, &train.documents, strategy)?;
    Ok((merge_subdocuments(&train.documents, &splits), splits))
}

/// One profile per candidate holding all their training terms.
pub fn build_term_monolithic(train: &Corpus) -> Vec<Subprofile> {
    let mut merged: BTreeMap<String, TermBag> = BTreeMap::new();
    for doc in &train.documents {
        add_bag(
            merged.entry(doc.candidate_id.clone()).or_default(),
            &doc.terms,
        );
    }
    merged
        .into_iter()
        .map(|(cand, bag)| Subprofile::new(ProfileRef::new(cand, ProfileKey::Monolithic), bag))
        .collect()
}

/// Each training document becomes its own subprofile, keyed by initiative.
pub fn build_term_intervention(train: &Corpus) -> Vec<Subprofile> {
    let mut out: Vec<Subprofile> = train
        .documents
        .iter()
        .map(|d| {
            Subprofile::new(
                ProfileRef::new(
                    d.candidate_id.clone(),
                    ProfileKey::Initiative(d.initiative_id.clone()),
                ),
                d.terms.clone(),
            )
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopicProfileMode {
    Monolithic,
    Intervention,
}

/// Trains a dedicated LDA model and returns it with the candidates' topic
/// vectors. Monolithic mode first concatenates each candidate's documents.
pub fn build_topic_profiles(
    train: &Corpus,
    vocab_size: usize,
    mode: TopicProfileMode,
    config: &LdaConfig,
) -> Result<(TopicModel, Vec<TopicProfile>)> {
    let (docs, ids): (Vec<Document>, Vec<ProfileRef>) = match mode {
        TopicProfileMode::Monolithic => build_term_monolithic(train)
            .into_iter()
            .map(|sp| {
                let doc = Document::from_bag("*", &sp.id.candidate_id, sp.terms);
                (doc, sp.id)
            })
            .unzip(),
        TopicProfileMode::Intervention => train
            .documents
            .iter()
            .map(|d| {
                let id = ProfileRef::new(
                    d.candidate_id.clone(),
                    ProfileKey::Initiative(d.initiative_id.clone()),
                );
                (d.clone(), id)
            })
            .unzip(),
    };
    let model = lda::train(&docs, vocab_size, config)?;
    let mut profiles = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            Ok(TopicProfile {
                id,
                topics: model.doc_topics(i)?.to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    profiles.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((model, profiles))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub total_subprofiles: usize,
    pub candidates: usize,
    pub avg_per_candidate: f64,
    pub avg_size: f64,
    pub tiny_count: usize,
    pub tiny_fraction: f64,
    /// Mean over candidates of the per-document subdocument count mean.
    pub subdocs_mean: f64,
    /// Mean over candidates of the per-document subdocument count maximum.
    pub subdocs_max: f64,
    /// Mean over candidates of the per-document subdocument count minimum.
    pub subdocs_min: f64,
}

/// Size statistics. `splits_per_doc` holds `(candidate_id, subdocument
/// count)` for every split document.
pub fn profile_stats(
    subprofiles: &[Subprofile],
    splits_per_doc: &[(String, usize)],
) -> ProfileStats {
    profile_stats_with(subprofiles, splits_per_doc, TINY_THRESHOLD)
}

/// [`profile_stats`] with a custom tiny-subprofile threshold.
pub fn profile_stats_with(
    subprofiles: &[Subprofile],
    splits_per_doc: &[(String, usize)],
    tiny_threshold: u32,
) -> ProfileStats {
    let mut stats = ProfileStats::default();
    if !subprofiles.is_empty() {
        let candidates: BTreeSet<&str> = subprofiles
            .iter()
            .map(|s| s.id.candidate_id.as_str())
            .collect();
        let total = subprofiles.len();
        let tiny = subprofiles
            .iter()
            .filter(|s| s.size < tiny_threshold)
            .count();
        stats.total_subprofiles = total;
        stats.candidates = candidates.len();
        stats.avg_per_candidate = total as f64 / candidates.len() as f64;
        stats.avg_size = subprofiles.iter().map(|s| s.size as f64).sum::<f64>() / total as f64;
        stats.tiny_count = tiny;
        stats.tiny_fraction = tiny as f64 / total as f64;
    }

    let mut per_candidate: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (cand, n) in splits_per_doc {
        per_candidate.entry(cand).or_default().push(*n);
    }
    if !per_candidate.is_empty() {
        let c = per_candidate.len() as f64;
        let (mut mean, mut max, mut min) = (0.0, 0.0, 0.0);
        for counts in per_candidate.values() {
            mean += counts.iter().sum::<usize>() as f64 / counts.len() as f64;
            max += *counts.iter().max().unwrap_or(&0) as f64;
            min += *counts.iter().min().unwrap_or(&0) as f64;
        }
        stats.subdocs_mean = mean / c;
        stats.subdocs_max = max / c;
        stats.subdocs_min = min / c;
    }
    stats
}

/// `(candidate_id, subdocument count)` for each split document.
pub fn split_counts(docs: &[Document], splits: &[Vec<Subdocument>]) -> Vec<(String, usize)> {
    docs.iter()
        .zip(splits)
        .map(|(d, s)| (d.candidate_id.clone(), s.len()))
        .collect()
}

/// Renders a set of stats as the columns of a profile-size table.
pub fn write_stats_table<W: Write>(out: &mut W, rows: &[(String, ProfileStats)]) -> Result<()> {
    write!(out, "{:<16}", "")?;
    for (name, _) in rows {
        write!(out, "{name:>12}")?;
    }
    writeln!(out)?;
    type Cell = fn(&ProfileStats) -> String;
    let lines: [(&str, Cell); 8] = [
        ("#SP", |s| s.total_subprofiles.to_string()),
        ("Avg. #SP", |s| format!("{:.2}", s.avg_per_candidate)),
        ("Avg. SP-size", |s| format!("{:.2}", s.avg_size)),
        ("#tinySP", |s| s.tiny_count.to_string()),
        ("%tinySP/#SP", |s| format!("{:.2}", 100.0 * s.tiny_fraction)),
        ("subdocs mean", |s| format!("{:.2}", s.subdocs_mean)),
        ("subdocs max", |s| format!("{:.2}", s.subdocs_max)),
        ("subdocs min", |s| format!("{:.2}", s.subdocs_min)),
    ];
    for (label, cell) in lines {
        write!(out, "{label:<16}")?;
        for (_, s) in rows {
            write!(out, "{:>12}", cell(s))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes tab-separated `candidate_id topic_id term count` lines.
pub fn save_profiles(path: &Path, profiles: &[Subprofile], vocab: &Vocabulary) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for sp in profiles {
        for (&t, &c) in &sp.terms {
            let term = vocab.term(t).ok_or_else(|| Error::UnknownName {
                kind: "term id",
                name: t.to_string(),
            })?;
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                sp.id.candidate_id, sp.id.key, term, c
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_profiles(path: &Path, vocab: &Vocabulary) -> Result<Vec<Subprofile>> {
    let name = path.display().to_string();
    let mut merged: BTreeMap<ProfileRef, TermBag> = BTreeMap::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [cand, key, term, count] = fields[..] else {
            return Err(Error::parse(
                &name,
                i + 1,
                "expected 4 tab-separated fields",
            ));
        };
        let id = ProfileRef::new(cand, key.parse()?);
        let t = vocab
            .id(term)
            .ok_or_else(|| Error::parse(&name, i + 1, format!("unknown term `{term}`")))?;
        let c: u32 = count
            .parse()
            .map_err(|_| Error::parse(&name, i + 1, format!("bad count `{count}`")))?;
        *merged.entry(id).or_default().entry(t).or_insert(0) += c;
    }
    Ok(merged
        .into_iter()
        .map(|(id, bag)| Subprofile::new(id, bag))
        .collect())
}
