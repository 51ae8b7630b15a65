//! Synthetic corpora with planted topics, candidate expertise and committees.
//!
//! Every committee covers a subset of topics and every candidate belongs to
//! one committee, whose topics are the candidate's expertise. Initiatives are
//! attached to a committee and one of its topics. A document draws a topic
//! mixture from a Dirichlet centred on the initiative topic and the
//! speaker's expertise, then draws each token either from the shared
//! vocabulary or from a Zipf-shaped unigram over its topic's words.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::corpus::RawIntervention;
use crate::error::{Error, Result};
use crate::eval::Memberships;

const ONSETS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aiou";
const CODAS: &[u8] = b"kmnprt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_topics: usize,
    pub vocab_per_topic: usize,
    pub shared_vocab: usize,
    pub n_candidates: usize,
    /// Topic ids covered by each committee.
    pub committees: Vec<Vec<usize>>,
    /// Inclusive range.
    pub docs_per_candidate: (usize, usize),
    /// Inclusive range, in tokens.
    pub doc_length: (usize, usize),
    /// Dirichlet concentration of document topic mixtures. Small values give
    /// near-pure documents.
    pub topic_mixture_concentration: f64,
    /// Probability that a token comes from the shared vocabulary.
    pub shared_fraction: f64,
    /// Probability that a document belongs to an initiative of another
    /// committee than the speaker's.
    pub off_committee_fraction: f64,
    /// Probability that a document belongs to an initiative with no committee.
    pub no_committee_fraction: f64,
    /// Mean number of speakers per initiative.
    pub speakers_per_initiative: f64,
    /// Zipf exponent of per-topic unigrams.
    pub zipf_exponent: f64,
    /// Probability that a topical token is drawn from another topic's word
    /// list, so topic unigrams overlap.
    pub topic_overlap: f64,
    /// Share of a document's prior topic mass spread evenly over all topics;
    /// the rest goes 5:4 to the initiative topic and the speaker's expertise.
    pub background_weight: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_topics: 8,
            vocab_per_topic: 80,
            shared_vocab: 100,
            n_candidates: 40,
            committees: vec![
                vec![0, 1],
                vec![2, 3],
                vec![4],
                vec![5, 6],
                vec![7],
                vec![1, 4, 7],
            ],
            docs_per_candidate: (20, 30),
            doc_length: (80, 200),
            topic_mixture_concentration: 1.0,
            shared_fraction: 0.25,
            off_committee_fraction: 0.2,
            no_committee_fraction: 0.1,
            speakers_per_initiative: 4.0,
            zipf_exponent: 1.0,
            topic_overlap: 0.0,
            background_weight: 0.1,
            seed: 0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

fn fraction_ok(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl SynthParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_topics == 0 {
            return Err(invalid("n_topics must be positive"));
        }
        if self.vocab_per_topic == 0 {
            return Err(invalid("vocab_per_topic must be positive"));
        }
        if self.committees.is_empty() {
            return Err(invalid("at least one committee is required"));
        }
        if self.n_candidates < self.committees.len() {
            return Err(invalid(format!(
                "{} candidates cannot cover {} committees",
                self.n_candidates,
                self.committees.len()
            )));
        }
        for (c, topics) in self.committees.iter().enumerate() {
            if topics.is_empty() {
                return Err(invalid(format!("committee {c} has no topics")));
            }
            if let Some(t) = topics.iter().find(|&&t| t >= self.n_topics) {
                return Err(invalid(format!("committee {c} refers to topic {t}")));
            }
        }
        for (name, (lo, hi)) in [
            ("docs_per_candidate", self.docs_per_candidate),
            ("doc_length", self.doc_length),
        ] {
            if lo == 0 || lo > hi {
                return Err(invalid(format!(
                    "{name} range ({lo}, {hi}) is empty or starts at 0"
                )));
            }
        }
        if !(self.topic_mixture_concentration > 0.0 && self.topic_mixture_concentration.is_finite())
        {
            return Err(invalid("topic_mixture_concentration must be positive"));
        }
        for (name, x) in [
            ("shared_fraction", self.shared_fraction),
            ("off_committee_fraction", self.off_committee_fraction),
            ("no_committee_fraction", self.no_committee_fraction),
            ("topic_overlap", self.topic_overlap),
            ("background_weight", self.background_weight),
        ] {
            if !fraction_ok(x) {
                return Err(invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.off_committee_fraction + self.no_committee_fraction > 1.0 {
            return Err(invalid(
                "off_committee_fraction + no_committee_fraction exceeds 1",
            ));
        }
        if self.shared_fraction > 0.0 && self.shared_vocab == 0 {
            return Err(invalid("shared_fraction is positive but shared_vocab is 0"));
        }
        if self.shared_fraction == 1.0 {
            return Err(invalid("shared_fraction of 1 leaves no topical tokens"));
        }
        if !(self.speakers_per_initiative >= 1.0) {
            return Err(invalid("speakers_per_initiative must be at least 1"));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return Err(invalid("zipf_exponent must be non-negative"));
        }
        Ok(())
    }

    /// The `i`-th word of topic `t`.
    pub fn topic_word(&self, topic: usize, i: usize) -> String {
        pseudo_word(topic * self.vocab_per_topic + i)
    }

    pub fn shared_word(&self, i: usize) -> String {
        pseudo_word(self.n_topics * self.vocab_per_topic + i)
    }

    pub fn topic_words(&self, topic: usize) -> Vec<String> {
        (0..self.vocab_per_topic)
            .map(|i| self.topic_word(topic, i))
            .collect()
    }

    pub fn shared_words(&self) -> Vec<String> {
        (0..self.shared_vocab)
            .map(|i| self.shared_word(i))
            .collect()
    }
}

/// Alphabetic word for index `g`, unique per index: two onset-vowel
/// syllables, a coda, then further syllables while digits remain.
fn pseudo_word(mut g: usize) -> String {
    let mut w = String::new();
    let mut syllable = |g: &mut usize| {
        w.push(ONSETS[*g % ONSETS.len()] as char);
        *g /= ONSETS.len();
        w.push(VOWELS[*g % VOWELS.len()] as char);
        *g /= VOWELS.len();
    };
    syllable(&mut g);
    syllable(&mut g);
    let coda = CODAS[g % CODAS.len()] as char;
    g /= CODAS.len();
    while g > 0 {
        g -= 1;
        syllable(&mut g);
    }
    w.push(coda);
    w
}

/// Planted assignments behind a generated corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// Candidate id to expertise topics.
    pub expertise: BTreeMap<String, Vec<usize>>,
    /// Candidate id to committee id.
    pub candidate_committee: BTreeMap<String, String>,
    pub committee_topics: BTreeMap<String, Vec<usize>>,
    pub initiative_committee: BTreeMap<String, Option<String>>,
    pub initiative_topic: BTreeMap<String, usize>,
    /// Topic of every body token, aligned with the records; `None` marks
    /// shared-vocabulary tokens.
    pub token_topics: Vec<Vec<Option<usize>>>,
}

impl SynthTruth {
    pub fn memberships(&self) -> Memberships {
        let mut out = Memberships::new();
        for (cand, com) in &self.candidate_committee {
            out.entry(com.clone()).or_default().insert(cand.clone());
        }
        out
    }

    /// Line-delimited truth: `candidate <id> <committee> <topics...>`,
    /// `initiative <id> <committee or -> <topic>`.
    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        for (cand, topics) in &self.expertise {
            write!(out, "candidate {cand} {}", self.candidate_committee[cand])?;
            for t in topics {
                write!(out, " {t}")?;
            }
            writeln!(out)?;
        }
        for (init, com) in &self.initiative_committee {
            writeln!(
                out,
                "initiative {init} {} {}",
                com.as_deref().unwrap_or("-"),
                self.initiative_topic[init]
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// One line per record: `initiative candidate labels...`, `-` for shared
    /// tokens.
    pub fn save_token_topics(&self, path: &Path, records: &[RawIntervention]) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for (r, labels) in records.iter().zip(&self.token_topics) {
            write!(out, "{} {}", r.initiative_id, r.candidate_id)?;
            for l in labels {
                match l {
                    Some(t) => write!(out, " {t}")?,
                    None => out.write_all(b" -")?,
                }
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn candidate_id(i: usize) -> String {
    format!("mp{i:03}")
}

pub fn committee_id(i: usize) -> String {
    format!("com{i}")
}

fn initiative_id(i: usize) -> String {
    format!("ini{i:04}")
}

struct InitiativeDraft {
    committee: Option<usize>,
    topic: usize,
    speakers: BTreeSet<usize>,
}

fn dirichlet(rng: &mut ChaCha8Rng, params: &[f64]) -> Vec<f64> {
    let mut draw: Vec<f64> = params
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = draw.iter().sum();
    if total > 0.0 && total.is_finite() {
        draw.iter_mut().for_each(|x| *x /= total);
    } else {
        // Every gamma draw underflowed: fall back to the heaviest component.
        let best = params
            .iter()
            .enumerate()
            .fold(0, |b, (i, &a)| if a > params[b] { i } else { b });
        draw = vec![0.0; params.len()];
        draw[best] = 1.0;
    }
    draw
}

fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-s)).collect()
}

/// Generates records and their planted truth. Deterministic in the seed.
pub fn generate(params: &SynthParams) -> Result<(Vec<RawIntervention>, SynthTruth)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let k = params.n_topics;
    let n_com = params.committees.len();

    let topic_words: Vec<Vec<String>> = (0..k).map(|t| params.topic_words(t)).collect();
    let shared_words = params.shared_words();
    let topic_dist = WeightedIndex::new(zipf_weights(params.vocab_per_topic, params.zipf_exponent))
        .expect("positive weights");
    let shared_dist = (params.shared_vocab > 0).then(|| {
        WeightedIndex::new(zipf_weights(params.shared_vocab, params.zipf_exponent))
            .expect("positive weights")
    });

    let mut truth = SynthTruth::default();
    for (c, topics) in params.committees.iter().enumerate() {
        let mut topics = topics.clone();
        topics.sort_unstable();
        topics.dedup();
        truth.committee_topics.insert(committee_id(c), topics);
    }
    let committee_of: Vec<usize> = (0..params.n_candidates).map(|a| a % n_com).collect();
    for (a, &c) in committee_of.iter().enumerate() {
        truth.expertise.insert(
            candidate_id(a),
            truth.committee_topics[&committee_id(c)].clone(),
        );
        truth
            .candidate_committee
            .insert(candidate_id(a), committee_id(c));
    }

    // Document slots in random order, each joining or opening an initiative.
    let mut slots: Vec<usize> = Vec::new();
    for a in 0..params.n_candidates {
        let n = rng.random_range(params.docs_per_candidate.0..=params.docs_per_candidate.1);
        slots.extend(std::iter::repeat_n(a, n));
    }
    slots.shuffle(&mut rng);

    let mut initiatives: Vec<InitiativeDraft> = Vec::new();
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); n_com + 1];
    let mut documents: Vec<(usize, usize)> = Vec::with_capacity(slots.len());
    let p_new = 1.0 / params.speakers_per_initiative;
    for &a in &slots {
        let u: f64 = rng.random();
        let committee = if u < params.no_committee_fraction {
            None
        } else if u < params.no_committee_fraction + params.off_committee_fraction && n_com > 1 {
            let other = rng.random_range(0..n_com - 1);
            Some(if other >= committee_of[a] {
                other + 1
            } else {
                other
            })
        } else {
            Some(committee_of[a])
        };
        let pool = committee.unwrap_or(n_com);
        let open: Vec<usize> = pools[pool]
            .iter()
            .copied()
            .filter(|&i| !initiatives[i].speakers.contains(&a))
            .collect();
        let init = match open.choose(&mut rng) {
            Some(&i) if rng.random::<f64>() >= p_new => i,
            _ => {
                let topic = match committee {
                    Some(c) => *truth.committee_topics[&committee_id(c)]
                        .choose(&mut rng)
                        .expect("committees have topics"),
                    None => rng.random_range(0..k),
                };
                initiatives.push(InitiativeDraft {
                    committee,
                    topic,
                    speakers: BTreeSet::new(),
                });
                pools[pool].push(initiatives.len() - 1);
                initiatives.len() - 1
            }
        };
        initiatives[init].speakers.insert(a);
        documents.push((init, a));
    }

    let mut headers: Vec<(String, Vec<String>)> = Vec::with_capacity(initiatives.len());
    for (i, draft) in initiatives.iter().enumerate() {
        let words = &topic_words[draft.topic];
        let mut title: Vec<&str> = (0..4)
            .map(|_| words[topic_dist.sample(&mut rng)].as_str())
            .collect();
        if let Some(d) = &shared_dist {
            title.push(shared_words[d.sample(&mut rng)].as_str());
        }
        let subjects: Vec<String> = (0..2)
            .map(|_| {
                let n = rng.random_range(1..=2);
                (0..n)
                    .map(|_| words[topic_dist.sample(&mut rng)].as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        headers.push((title.join(" "), subjects));
        let id = initiative_id(i);
        truth
            .initiative_committee
            .insert(id.clone(), draft.committee.map(committee_id));
        truth.initiative_topic.insert(id, draft.topic);
    }

    documents.sort_unstable();
    let mut records = Vec::with_capacity(documents.len());
    let conc = params.topic_mixture_concentration;
    for &(init, a) in &documents {
        let draft = &initiatives[init];
        let expertise = &truth.expertise[&candidate_id(a)];
        let focus = 1.0 - params.background_weight;
        let mut base = vec![params.background_weight / k as f64; k];
        base[draft.topic] += focus * 5.0 / 9.0;
        for &t in expertise {
            base[t] += focus * 4.0 / 9.0 / expertise.len() as f64;
        }
        let shape: Vec<f64> = base.iter().map(|b| b * conc).collect();
        let mixture = dirichlet(&mut rng, &shape);
        let topic_pick = WeightedIndex::new(&mixture).expect("mixture has mass");

        let len = rng.random_range(params.doc_length.0..=params.doc_length.1);
        let mut body = Vec::with_capacity(len);
        let mut labels = Vec::with_capacity(len);
        for _ in 0..len {
            match &shared_dist {
                Some(d) if rng.random::<f64>() < params.shared_fraction => {
                    body.push(shared_words[d.sample(&mut rng)].as_str());
                    labels.push(None);
                }
                _ => {
                    let t = topic_pick.sample(&mut rng);
                    let source = if k > 1 && rng.random::<f64>() < params.topic_overlap {
                        let other = rng.random_range(0..k - 1);
                        if other >= t {
                            other + 1
                        } else {
                            other
                        }
                    } else {
                        t
                    };
                    body.push(topic_words[source][topic_dist.sample(&mut rng)].as_str());
                    labels.push(Some(t));
                }
            }
        }
        let (title, subjects) = &headers[init];
        records.push(RawIntervention {
            initiative_id: initiative_id(init),
            candidate_id: candidate_id(a),
            committee_id: draft.committee.map(committee_id),
            title: title.clone(),
            subjects: subjects.clone(),
            body: body.join(" "),
        });
        truth.token_topics.push(labels);
    }
    Ok((records, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, PreprocessConfig};
    use std::collections::HashSet;

    fn small() -> SynthParams {
        SynthParams {
            n_candidates: 12,
            docs_per_candidate: (5, 8),
            doc_length: (20, 40),
            seed: 3,
            ..SynthParams::default()
        }
    }

    #[test]
    fn words_are_unique_and_alphabetic() {
        let params = SynthParams::default();
        let mut seen = HashSet::new();
        for t in 0..params.n_topics {
            for w in params.topic_words(t) {
                assert!(w.chars().all(|c| c.is_ascii_lowercase()), "{w}");
                assert!(seen.insert(w));
            }
        }
        for w in params.shared_words() {
            assert!(seen.insert(w));
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let (a, ta) = generate(&small()).unwrap();
        let (b, tb) = generate(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate(&small().with_seed(4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tokens_match_their_labels() {
        let params = small();
        let (records, truth) = generate(&params).unwrap();
        let topic_sets: Vec<HashSet<String>> = (0..params.n_topics)
            .map(|t| params.topic_words(t).into_iter().collect())
            .collect();
        let shared: HashSet<String> = params.shared_words().into_iter().collect();
        assert_eq!(records.len(), truth.token_topics.len());
        for (r, labels) in records.iter().zip(&truth.token_topics) {
            let words: Vec<&str> = r.body.split(' ').collect();
            assert_eq!(words.len(), labels.len());
            for (w, l) in words.iter().zip(labels) {
                match l {
                    Some(t) => assert!(topic_sets[*t].contains(*w)),
                    None => assert!(shared.contains(*w)),
                }
            }
        }
    }

    #[test]
    fn two_disjoint_topics_without_shared_words() {
        let params = SynthParams {
            n_topics: 2,
            shared_vocab: 0,
            shared_fraction: 0.0,
            n_candidates: 4,
            committees: vec![vec![0], vec![1]],
            topic_mixture_concentration: 1e-3,
            no_committee_fraction: 0.0,
            seed: 9,
            ..SynthParams::default()
        };
        let (records, truth) = generate(&params).unwrap();
        for labels in &truth.token_topics {
            assert!(labels.iter().all(|l| l.is_some()));
            // A tiny concentration leaves documents nearly pure.
            let first = labels.iter().filter(|l| **l == Some(0)).count();
            let dominant = first.max(labels.len() - first);
            assert!(dominant as f64 >= 0.95 * labels.len() as f64);
        }
        assert!(records.iter().all(|r| r.committee_id.is_some()));
    }

    #[test]
    fn structure_of_defaults() {
        let params = SynthParams::default();
        let (records, truth) = generate(&params).unwrap();
        let per_cand = records
            .iter()
            .fold(BTreeMap::<&str, usize>::new(), |mut m, r| {
                *m.entry(r.candidate_id.as_str()).or_default() += 1;
                m
            });
        assert_eq!(per_cand.len(), 40);
        assert!(per_cand.values().all(|&n| (20..=30).contains(&n)));
        let memberships = truth.memberships();
        assert_eq!(memberships.len(), 6);
        assert_eq!(memberships.values().map(|m| m.len()).sum::<usize>(), 40);
        assert!(truth.initiative_committee.values().any(|c| c.is_none()));
        for (cand, topics) in &truth.expertise {
            assert!((1..=3).contains(&topics.len()), "{cand}");
        }
        let ids: BTreeSet<(&str, &str)> = records
            .iter()
            .map(|r| (r.initiative_id.as_str(), r.candidate_id.as_str()))
            .collect();
        assert_eq!(ids.len(), records.len());

        let (corpus, vocab) = build_corpus(&records, &PreprocessConfig::default()).unwrap();
        assert_eq!(corpus.documents.len(), records.len());
        assert!(corpus.skipped.is_empty());
        assert!(vocab.len() > 600);
    }

    #[test]
    fn truth_file_lines() {
        let (_, truth) = generate(&small()).unwrap();
        let mut buf = Vec::new();
        truth.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("candidate mp000 com0 0 1\n"));
        assert_eq!(
            text.lines()
                .filter(|l| l.starts_with("initiative "))
                .count(),
            truth.initiative_committee.len()
        );
    }

    #[test]
    fn invalid_params() {
        let bad = [
            SynthParams {
                n_topics: 0,
                ..SynthParams::default()
            },
            SynthParams {
                committees: vec![vec![8]],
                ..SynthParams::default()
            },
            SynthParams {
                committees: vec![vec![]],
                ..SynthParams::default()
            },
            SynthParams {
                n_candidates: 3,
                ..SynthParams::default()
            },
            SynthParams {
                doc_length: (10, 5),
                ..SynthParams::default()
            },
            SynthParams {
                topic_mixture_concentration: 0.0,
                ..SynthParams::default()
            },
            SynthParams {
                shared_fraction: 1.5,
                ..SynthParams::default()
            },
            SynthParams {
                speakers_per_initiative: 0.5,
                ..SynthParams::default()
            },
        ];
        for params in bad {
            assert!(
                matches!(generate(&params), Err(Error::InvalidParams(_))),
                "{params:?}"
            );
        }
    }
}
