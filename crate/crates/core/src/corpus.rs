//! Raw intervention records, text normalization, bag-of-words documents and
//! initiative-level train/test partitions.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type TermId = u32;

/// Sparse term counts keyed by term id. Ordered so iteration is deterministic.
pub type TermBag = BTreeMap<TermId, u32>;

/// One speech contribution of a candidate inside an initiative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawIntervention {
    pub initiative_id: String,
    pub candidate_id: String,
    #[serde(
        default,
        serialize_with = "committee_ser",
        deserialize_with = "committee_de"
    )]
    pub committee_id: Option<String>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub subjects: Vec<String>,
    #[serde(default)]
    pub body: String,
}

fn committee_ser<S: Serializer>(
    value: &Option<String>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(value.as_deref().unwrap_or(""))
}

fn committee_de<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    let raw: Option<String> = Option::deserialize(d)?;
    Ok(raw.filter(|s| !s.is_empty()))
}

/// Reads line-delimited JSON records. Blank lines are ignored.
pub fn read_records(path: &Path) -> Result<Vec<RawIntervention>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawIntervention = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string()))?;
        validate_record(&record, i + 1)?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_records(path: &Path, records: &[RawIntervention]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn validate_record(record: &RawIntervention, line: usize) -> Result<()> {
    if record.initiative_id.is_empty() {
        return Err(Error::InvalidRecord {
            line,
            reason: "empty initiative_id".into(),
        });
    }
    if record.candidate_id.is_empty() {
        return Err(Error::InvalidRecord {
            line,
            reason: "empty candidate_id".into(),
        });
    }
    Ok(())
}

type StemFn = dyn Fn(&str) -> String + Send + Sync;

/// A token transform applied after stopword removal.
#[derive(Clone)]
pub enum Stemmer {
    Identity,
    Snowball {
        name: &'static str,
        inner: Arc<rust_stemmers::Stemmer>,
    },
    Custom {
        name: String,
        transform: Arc<StemFn>,
    },
}

impl Stemmer {
    /// Looks up a registered transform: `identity`, `english`, `spanish`.
    pub fn by_name(name: &str) -> Result<Self> {
        use rust_stemmers::Algorithm;
        let (name, algorithm) = match name {
            "identity" | "none" | "" => return Ok(Stemmer::Identity),
            "english" => ("english", Algorithm::English),
            "spanish" => ("spanish", Algorithm::Spanish),
            other => {
                return Err(Error::UnknownName {
                    kind: "stemmer",
                    name: other.to_string(),
                })
            }
        };
        Ok(Stemmer::Snowball {
            name,
            inner: Arc::new(rust_stemmers::Stemmer::create(algorithm)),
        })
    }

    pub fn custom<F>(name: impl Into<String>, transform: F) -> Self
    where
        F: Fn(&str) -> String + Send + Sync + 'static,
    {
        Stemmer::Custom {
            name: name.into(),
            transform: Arc::new(transform),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Stemmer::Identity => "identity",
            Stemmer::Snowball { name, .. } => name,
            Stemmer::Custom { name, .. } => name,
        }
    }

    pub fn apply(&self, token: &str) -> String {
        match self {
            Stemmer::Identity => token.to_string(),
            Stemmer::Snowball { inner, .. } => inner.stem(token).into_owned(),
            Stemmer::Custom { transform, .. } => transform(token),
        }
    }
}

impl fmt::Debug for Stemmer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Stemmer({})", self.name())
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    pub stemmer: Stemmer,
    /// Terms present in fewer than `ceil(min_df_fraction * n_documents)`
    /// documents are removed from the vocabulary.
    pub min_df_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: HashSet::new(),
            stemmer: Stemmer::Identity,
            min_df_fraction: 0.01,
        }
    }
}

impl PreprocessConfig {
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stopwords = words
            .into_iter()
            .map(|w| w.as_ref().to_lowercase())
            .collect();
        self
    }

    pub fn with_stemmer(mut self, stemmer: Stemmer) -> Self {
        self.stemmer = stemmer;
        self
    }

    pub fn with_min_df(mut self, fraction: f64) -> Self {
        self.min_df_fraction = fraction;
        self
    }
}

/// Reads a stopword list: one word per line, `#` starts a comment.
pub fn read_stopwords(path: &Path) -> Result<HashSet<String>> {
    let reader = BufReader::new(File::open(path)?);
    let mut words = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.split('#').next().unwrap_or("").trim();
        if !word.is_empty() {
            words.insert(word.to_lowercase());
        }
    }
    Ok(words)
}

/// Lowercases, splits on non-alphabetic characters, drops stopwords and
/// applies the configured stemmer.
pub fn normalize(text: &str, config: &PreprocessConfig) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|tok| !tok.is_empty())
        .map(str::to_lowercase)
        .filter(|tok| !config.stopwords.contains(tok))
        .map(|tok| config.stemmer.apply(&tok))
        .filter(|tok| !tok.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub initiative_id: String,
    pub candidate_id: String,
    pub terms: TermBag,
    pub length: u32,
}

impl Document {
    pub fn from_bag(initiative_id: &str, candidate_id: &str, terms: TermBag) -> Self {
        let length = terms.values().sum();
        Self {
            id: document_id(initiative_id, candidate_id),
            initiative_id: initiative_id.to_string(),
            candidate_id: candidate_id.to_string(),
            terms,
            length,
        }
    }
}

pub fn document_id(initiative_id: &str, candidate_id: &str) -> String {
    format!("{initiative_id}/{candidate_id}")
}

/// Initiative metadata kept for query formulation and relevance judgments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Initiative {
    pub id: String,
    pub committee_id: Option<String>,
    pub title: String,
    pub subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    ids: HashMap<String, TermId>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = String;

    fn try_from(repr: VocabularyRepr) -> std::result::Result<Self, String> {
        if repr.terms.len() != repr.doc_freq.len() {
            return Err("terms and doc_freq differ in length".into());
        }
        let ids: HashMap<String, TermId> = repr
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();
        if ids.len() != repr.terms.len() {
            return Err("duplicate term in vocabulary".into());
        }
        Ok(Self {
            terms: repr.terms,
            doc_freq: repr.doc_freq,
            ids,
        })
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            terms: v.terms,
            doc_freq: v.doc_freq,
        }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn doc_freq(&self, id: TermId) -> u32 {
        self.doc_freq.get(id as usize).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Maps normalized tokens to a bag, dropping tokens outside the vocabulary.
    pub fn bag_of<S: AsRef<str>>(&self, tokens: &[S]) -> TermBag {
        let mut bag = TermBag::new();
        for tok in tokens {
            if let Some(id) = self.id(tok.as_ref()) {
                *bag.entry(id).or_insert(0) += 1;
            }
        }
        bag
    }
}

/// Corpus-level counts used by the topic-count heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusStats {
    /// Number of distinct terms.
    pub m: usize,
    /// Number of documents.
    pub n: usize,
    /// Non-zero entries of the document-term matrix.
    pub t_nnz: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Every initiative seen in the records, in first-appearance order.
    pub initiatives: Vec<Initiative>,
    /// Ids of documents dropped because filtering left them empty.
    pub skipped: Vec<String>,
}

impl Corpus {
    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn initiative(&self, id: &str) -> Option<&Initiative> {
        self.initiatives.iter().find(|i| i.id == id)
    }

    /// Distinct candidate ids, sorted.
    pub fn candidates(&self) -> Vec<String> {
        self.documents
            .iter()
            .map(|d| d.candidate_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Number of documents per candidate.
    pub fn interventions_per_candidate(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for doc in &self.documents {
            *counts.entry(doc.candidate_id.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Keeps only documents and initiatives whose initiative id is in `keep`.
    pub fn subset(&self, keep: &BTreeSet<String>) -> Corpus {
        Corpus {
            documents: self
                .documents
                .iter()
                .filter(|d| keep.contains(&d.initiative_id))
                .cloned()
                .collect(),
            initiatives: self
                .initiatives
                .iter()
                .filter(|i| keep.contains(&i.id))
                .cloned()
                .collect(),
            skipped: Vec::new(),
        }
    }

    pub fn stats(&self, vocab_size: usize) -> CorpusStats {
        CorpusStats {
            m: vocab_size,
            n: self.documents.len(),
            t_nnz: self.documents.iter().map(|d| d.terms.len()).sum(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, self)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn write_skip_log(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for id in &self.skipped {
            writeln!(out, "{id}")?;
        }
        out.flush()?;
        Ok(())
    }
}

impl Vocabulary {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, self)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

/// Builds one document per (initiative, candidate) pair, applying the
/// minimum document-frequency filter. Term ids follow first appearance in
/// record order.
pub fn build_corpus(
    records: &[RawIntervention],
    config: &PreprocessConfig,
) -> Result<(Corpus, Vocabulary)> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    for (i, record) in records.iter().enumerate() {
        validate_record(record, i + 1)?;
    }

    let mut raw_ids: HashMap<String, u32> = HashMap::new();
    let mut raw_terms: Vec<String> = Vec::new();
    let mut doc_index: HashMap<(String, String), usize> = HashMap::new();
    let mut raw_docs: Vec<(String, String, TermBag)> = Vec::new();
    let mut initiatives: Vec<Initiative> = Vec::new();
    let mut seen_initiatives: HashMap<String, usize> = HashMap::new();

    for record in records {
        match seen_initiatives.get(&record.initiative_id) {
            Some(&i) => {
                let init = &mut initiatives[i];
                if init.committee_id.is_none() {
                    init.committee_id = record.committee_id.clone();
                }
            }
            None => {
                seen_initiatives.insert(record.initiative_id.clone(), initiatives.len());
                initiatives.push(Initiative {
                    id: record.initiative_id.clone(),
                    committee_id: record.committee_id.clone(),
                    title: record.title.clone(),
                    subjects: record.subjects.clone(),
                });
            }
        }

        let key = (record.initiative_id.clone(), record.candidate_id.clone());
        let slot = *doc_index.entry(key).or_insert_with(|| {
            raw_docs.push((
                record.initiative_id.clone(),
                record.candidate_id.clone(),
                TermBag::new(),
            ));
            raw_docs.len() - 1
        });
        for token in normalize(&record.body, config) {
            let next = raw_terms.len() as u32;
            let id = *raw_ids.entry(token.clone()).or_insert_with(|| {
                raw_terms.push(token);
                next
            });
            *raw_docs[slot].2.entry(id).or_insert(0) += 1;
        }
    }

    let mut raw_df = vec![0u32; raw_terms.len()];
    for (_, _, bag) in &raw_docs {
        for &t in bag.keys() {
            raw_df[t as usize] += 1;
        }
    }
    let threshold = (config.min_df_fraction.max(0.0) * raw_docs.len() as f64).ceil() as u32;

    let mut remap: Vec<Option<TermId>> = vec![None; raw_terms.len()];
    let mut terms = Vec::new();
    let mut doc_freq = Vec::new();
    for (raw, term) in raw_terms.into_iter().enumerate() {
        if raw_df[raw] >= threshold {
            remap[raw] = Some(terms.len() as TermId);
            terms.push(term);
            doc_freq.push(raw_df[raw]);
        }
    }

    let mut documents = Vec::new();
    let mut skipped = Vec::new();
    for (initiative_id, candidate_id, bag) in raw_docs {
        let filtered: TermBag = bag
            .into_iter()
            .filter_map(|(t, c)| remap[t as usize].map(|id| (id, c)))
            .collect();
        if filtered.is_empty() {
            skipped.push(document_id(&initiative_id, &candidate_id));
        } else {
            documents.push(Document::from_bag(&initiative_id, &candidate_id, filtered));
        }
    }
    if documents.is_empty() {
        return Err(Error::AllDocumentsEmpty);
    }

    // Dropped documents contributed nothing to the surviving terms' counts,
    // but recount so the stored frequencies describe the kept documents.
    let mut kept_df = vec![0u32; terms.len()];
    for doc in &documents {
        for &t in doc.terms.keys() {
            kept_df[t as usize] += 1;
        }
    }
    debug_assert_eq!(kept_df, doc_freq);

    let ids = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as TermId))
        .collect();
    Ok((
        Corpus {
            documents,
            initiatives,
            skipped,
        },
        Vocabulary {
            terms,
            doc_freq: kept_df,
            ids,
        },
    ))
}

/// Initiative-level split of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPartition {
    pub index: usize,
    pub seed: u64,
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

/// Draws `n_splits` random initiative-level partitions from one seeded
/// generator. The train side holds `round(ratio * total)` initiatives,
/// clamped so neither side is empty.
pub fn make_partitions(
    corpus: &Corpus,
    ratio: f64,
    n_splits: usize,
    seed: u64,
) -> Result<Vec<CorpusPartition>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    let ids: Vec<&str> = corpus.initiatives.iter().map(|i| i.id.as_str()).collect();
    let total = ids.len();
    if total < 2 {
        return Err(Error::TooFewInitiatives(total));
    }
    let n_train = ((ratio * total as f64).round() as usize).clamp(1, total - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partitions = Vec::with_capacity(n_splits);
    for index in 0..n_splits {
        let mut order = ids.clone();
        order.shuffle(&mut rng);
        let train = order[..n_train].iter().map(|s| s.to_string()).collect();
        let test = order[n_train..].iter().map(|s| s.to_string()).collect();
        partitions.push(CorpusPartition {
            index,
            seed,
            train,
            test,
        });
    }
    Ok(partitions)
}
