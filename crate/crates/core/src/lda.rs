//! Latent Dirichlet allocation trained by collapsed Gibbs sampling.
//!
//! The model keeps two row-major matrices: `phi` holds p(t|x) with one row per
//! topic, `theta` holds p(x|d) with one row per training document. Both are
//! point estimates from the final sampler state with Dirichlet smoothing.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusStats, Document, TermBag};
use crate::error::{Error, Result};

pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_FOLD_IN_ITERATIONS: usize = 50;

/// Rule for picking the number of topics from corpus size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KHeuristic {
    /// `m * n / t` with `t` the non-zero entries of the document-term matrix.
    TermsDocsOverNnz,
    /// `sqrt(n / 2)`.
    SqrtHalfN,
    Fixed(usize),
}

impl KHeuristic {
    pub fn fixed(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidK(k));
        }
        Ok(KHeuristic::Fixed(k))
    }
}

impl fmt::Display for KHeuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KHeuristic::TermsDocsOverNnz => f.write_str("mn/t"),
            KHeuristic::SqrtHalfN => f.write_str("sqrt(n/2)"),
            KHeuristic::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for KHeuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mn/t" | "terms_docs_over_nnz" => Ok(KHeuristic::TermsDocsOverNnz),
            "sqrt(n/2)" | "sqrt_half_n" => Ok(KHeuristic::SqrtHalfN),
            other => match other.parse::<usize>() {
                Ok(k) => KHeuristic::fixed(k),
                Err(_) => Err(Error::UnknownName {
                    kind: "k heuristic",
                    name: other.to_string(),
                }),
            },
        }
    }
}

/// Number of topics for a corpus. Ratios are truncated toward zero and the
/// result is never below 2.
pub fn choose_k(stats: CorpusStats, heuristic: KHeuristic) -> usize {
    let k = match heuristic {
        KHeuristic::TermsDocsOverNnz => {
            (stats.m as u128 * stats.n as u128 / stats.t_nnz.max(1) as u128) as usize
        }
        KHeuristic::SqrtHalfN => (stats.n as f64 / 2.0).sqrt().floor() as usize,
        KHeuristic::Fixed(k) => k,
    };
    k.max(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaConfig {
    pub k: usize,
    /// Document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            alpha: None,
            beta: DEFAULT_BETA,
            iterations: DEFAULT_ITERATIONS,
            seed,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    phi: Vec<f64>,
    theta: Vec<f64>,
}

impl TopicModel {
    pub fn n_docs(&self) -> usize {
        self.theta.len() / self.k
    }

    /// p(t|x) over the vocabulary for one topic.
    pub fn topic_terms(&self, topic: usize) -> &[f64] {
        &self.phi[topic * self.m..(topic + 1) * self.m]
    }

    pub fn term_prob(&self, topic: usize, term: u32) -> f64 {
        self.phi[topic * self.m + term as usize]
    }

    /// p(x|d) for a training document, by position in the training corpus.
    pub fn doc_topics(&self, doc: usize) -> Result<&[f64]> {
        if doc >= self.n_docs() {
            return Err(Error::UnknownDocument(doc));
        }
        Ok(&self.theta[doc * self.k..(doc + 1) * self.k])
    }

    pub fn covers(&self, term: u32) -> bool {
        (term as usize) < self.m
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "k {}", self.k)?;
        writeln!(out, "m {}", self.m)?;
        writeln!(out, "n {}", self.n_docs())?;
        writeln!(out, "alpha {}", self.alpha)?;
        writeln!(out, "beta {}", self.beta)?;
        writeln!(out, "seed {}", self.seed)?;
        writeln!(out, "iterations {}", self.iterations)?;
        writeln!(out, "phi")?;
        for row in self.phi.chunks(self.m) {
            write_row(out, row)?;
        }
        writeln!(out, "theta")?;
        for row in self.theta.chunks(self.k) {
            write_row(out, row)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        Self::read_from(BufReader::new(File::open(path)?), &name)
    }

    pub fn read_from<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let mut it = lines.iter().enumerate();
        let mut header = |key: &str| -> Result<String> {
            let (i, line) = it
                .next()
                .ok_or_else(|| Error::parse(name, lines.len(), format!("missing `{key}`")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(name, i + 1, format!("expected `{key}`")))
        };
        let num = |s: String, line: usize| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(name, line, format!("bad number `{s}`")))
        };
        let k = num(header("k")?, 1)? as usize;
        let m = num(header("m")?, 2)? as usize;
        let n = num(header("n")?, 3)? as usize;
        let alpha = num(header("alpha")?, 4)?;
        let beta = num(header("beta")?, 5)?;
        let seed = header("seed")?
            .parse()
            .map_err(|_| Error::parse(name, 6, "bad seed"))?;
        let iterations = num(header("iterations")?, 7)? as usize;

        let expect = |i: usize, want: &str| -> Result<()> {
            match lines.get(i) {
                Some(l) if l == want => Ok(()),
                _ => Err(Error::parse(name, i + 1, format!("expected `{want}`"))),
            }
        };
        let parse_rows = |start: usize, rows: usize, width: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(rows * width);
            for r in 0..rows {
                let line = lines
                    .get(start + r)
                    .ok_or_else(|| Error::parse(name, start + r + 1, "truncated matrix"))?;
                let before = out.len();
                for v in line.split_ascii_whitespace() {
                    out.push(v.parse::<f64>().map_err(|_| {
                        Error::parse(name, start + r + 1, format!("bad value `{v}`"))
                    })?);
                }
                if out.len() - before != width {
                    return Err(Error::parse(name, start + r + 1, "wrong row width"));
                }
            }
            Ok(out)
        };
        expect(7, "phi")?;
        let phi = parse_rows(8, k, m)?;
        expect(8 + k, "theta")?;
        let theta = parse_rows(9 + k, n, k)?;
        Ok(Self {
            k,
            m,
            alpha,
            beta,
            seed,
            iterations,
            phi,
            theta,
        })
    }
}

fn write_row<W: Write>(out: &mut W, row: &[f64]) -> Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            out.write_all(b" ")?;
        }
        first = false;
        // `{}` prints the shortest representation that parses back exactly.
        write!(out, "{v}")?;
    }
    out.write_all(b"\n")?;
    Ok(())
}

struct Sampler {
    k: usize,
    m: usize,
    alpha: f64,
    beta: f64,
    tokens: Vec<u32>,
    offsets: Vec<usize>,
    assignments: Vec<u32>,
    doc_topic: Vec<u32>,
    // term-major: [t * k + x]
    term_topic: Vec<u32>,
    topic_total: Vec<u32>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl Sampler {
    fn new(docs: &[Document], m: usize, k: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        let mut tokens = Vec::new();
        let mut offsets = vec![0];
        for doc in docs {
            for (&t, &c) in &doc.terms {
                tokens.extend(std::iter::repeat_n(t, c as usize));
            }
            offsets.push(tokens.len());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut doc_topic = vec![0u32; docs.len() * k];
        let mut term_topic = vec![0u32; m * k];
        let mut topic_total = vec![0u32; k];
        let mut assignments = Vec::with_capacity(tokens.len());
        for d in 0..docs.len() {
            for &t in &tokens[offsets[d]..offsets[d + 1]] {
                let x = rng.random_range(0..k);
                assignments.push(x as u32);
                doc_topic[d * k + x] += 1;
                term_topic[t as usize * k + x] += 1;
                topic_total[x] += 1;
            }
        }
        Self {
            k,
            m,
            alpha,
            beta,
            tokens,
            offsets,
            assignments,
            doc_topic,
            term_topic,
            topic_total,
            rng,
            weights: vec![0.0; k],
        }
    }

    fn sweep(&mut self) {
        let k = self.k;
        let m_beta = self.m as f64 * self.beta;
        for d in 0..self.offsets.len() - 1 {
            let dt = &mut self.doc_topic[d * k..(d + 1) * k];
            for i in self.offsets[d]..self.offsets[d + 1] {
                let t = self.tokens[i] as usize;
                let old = self.assignments[i] as usize;
                let tt = &mut self.term_topic[t * k..(t + 1) * k];
                dt[old] -= 1;
                tt[old] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for x in 0..k {
                    total += (dt[x] as f64 + self.alpha) * (tt[x] as f64 + self.beta)
                        / (self.topic_total[x] as f64 + m_beta);
                    self.weights[x] = total;
                }
                let new = draw(&self.weights, total, &mut self.rng);

                self.assignments[i] = new as u32;
                dt[new] += 1;
                tt[new] += 1;
                self.topic_total[new] += 1;
            }
        }
        if cfg!(debug_assertions) {
            for d in 0..self.offsets.len() - 1 {
                let assigned: u32 = self.doc_topic[d * k..(d + 1) * k].iter().sum();
                debug_assert_eq!(assigned as usize, self.offsets[d + 1] - self.offsets[d]);
            }
        }
    }

    fn into_model(self, seed: u64, iterations: usize) -> TopicModel {
        let (k, m) = (self.k, self.m);
        let mut phi = vec![0.0; k * m];
        for x in 0..k {
            let denom = self.topic_total[x] as f64 + m as f64 * self.beta;
            for t in 0..m {
                phi[x * m + t] = (self.term_topic[t * k + x] as f64 + self.beta) / denom;
            }
        }
        let n = self.offsets.len() - 1;
        let mut theta = vec![0.0; n * k];
        for d in 0..n {
            let len = (self.offsets[d + 1] - self.offsets[d]) as f64;
            let denom = len + k as f64 * self.alpha;
            for x in 0..k {
                theta[d * k + x] = (self.doc_topic[d * k + x] as f64 + self.alpha) / denom;
            }
        }
        TopicModel {
            k,
            m,
            alpha: self.alpha,
            beta: self.beta,
            seed,
            iterations,
            phi,
            theta,
        }
    }
}

/// Inverse-transform draw from unnormalized cumulative weights.
fn draw(cumulative: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u = rng.random::<f64>() * total;
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Trains a model over `docs`, whose term ids must be below `vocab_size`.
pub fn train(docs: &[Document], vocab_size: usize, config: &LdaConfig) -> Result<TopicModel> {
    if docs.is_empty() || vocab_size == 0 {
        return Err(Error::EmptyCorpus);
    }
    if config.k < 2 {
        return Err(Error::InvalidK(config.k));
    }
    let mut sampler = Sampler::new(
        docs,
        vocab_size,
        config.k,
        config.alpha(),
        config.beta,
        config.seed,
    );
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model(config.seed, config.iterations))
}

/// Infers p(x|d) for an unseen bag of terms with the topic-term
/// distributions held fixed. Terms outside the model vocabulary are ignored.
pub fn fold_in(
    model: &TopicModel,
    bag: &TermBag,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let tokens: Vec<u32> = bag
        .iter()
        .filter(|(&t, _)| model.covers(t))
        .flat_map(|(&t, &c)| std::iter::repeat_n(t, c as usize))
        .collect();
    if tokens.is_empty() {
        return Err(Error::NoKnownTerms);
    }
    let k = model.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u32; k];
    let mut assignments: Vec<usize> = tokens
        .iter()
        .map(|_| {
            let x = rng.random_range(0..k);
            counts[x] += 1;
            x
        })
        .collect();
    let mut weights = vec![0.0; k];
    for _ in 0..iterations {
        for (i, &t) in tokens.iter().enumerate() {
            counts[assignments[i]] -= 1;
            let mut total = 0.0;
            for x in 0..k {
                total += (counts[x] as f64 + model.alpha) * model.term_prob(x, t);
                weights[x] = total;
            }
            let new = draw(&weights, total, &mut rng);
            assignments[i] = new;
            counts[new] += 1;
        }
    }
    let denom = tokens.len() as f64 + k as f64 * model.alpha;
    Ok(counts
        .iter()
        .map(|&c| (c as f64 + model.alpha) / denom)
        .collect())
}

/// Held-out perplexity, with each document's topic mixture obtained by
/// [`fold_in`]. Documents without known terms are skipped.
pub fn perplexity(
    model: &TopicModel,
    docs: &[Document],
    fold_in_iterations: usize,
    seed: u64,
) -> f64 {
    let mut log_lik = 0.0;
    let mut tokens = 0u64;
    for (i, doc) in docs.iter().enumerate() {
        let Ok(mix) = fold_in(
            model,
            &doc.terms,
            fold_in_iterations,
            seed.wrapping_add(i as u64),
        ) else {
            continue;
        };
        for (&t, &c) in &doc.terms {
            if !model.covers(t) {
                continue;
            }
            let p: f64 = (0..model.k).map(|x| mix[x] * model.term_prob(x, t)).sum();
            log_lik += c as f64 * p.ln();
            tokens += c as u64;
        }
    }
    if tokens == 0 {
        return f64::NAN;
    }
    (-log_lik / tokens as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: usize, terms: &[(u32, u32)]) -> Document {
        Document::from_bag(&format!("i{id}"), "c", terms.iter().copied().collect())
    }

    /// Two groups of documents over disjoint halves of a 10-term vocabulary.
    pub(crate) fn planted() -> Vec<Document> {
        (0..20)
            .map(|i| {
                let base = if i % 2 == 0 { 0 } else { 5 };
                let terms: Vec<(u32, u32)> = (0..5)
                    .map(|j| (base + j, 1 + ((i + j as usize) % 3) as u32))
                    .collect();
                doc(i, &terms)
            })
            .collect()
    }

    #[test]
    fn k_heuristics_match_reported_values() {
        let stats = CorpusStats {
            m: 4208,
            n: 10025,
            t_nnz: 1_702_296,
        };
        assert_eq!(choose_k(stats, KHeuristic::TermsDocsOverNnz), 24);
        assert_eq!(choose_k(stats, KHeuristic::SqrtHalfN), 70);
        assert_eq!(choose_k(stats, KHeuristic::Fixed(300)), 300);
        let tiny = CorpusStats {
            m: 1,
            n: 1,
            t_nnz: 1,
        };
        assert_eq!(choose_k(tiny, KHeuristic::SqrtHalfN), 2);
        assert!(KHeuristic::fixed(1).is_err());
        assert_eq!(
            "sqrt(n/2)".parse::<KHeuristic>().unwrap(),
            KHeuristic::SqrtHalfN
        );
        assert_eq!("300".parse::<KHeuristic>().unwrap(), KHeuristic::Fixed(300));
    }

    #[test]
    fn planted_topics_separate() {
        let docs = planted();
        // The default alpha of 25 would swamp ten-token documents.
        let cfg = LdaConfig {
            alpha: Some(0.1),
            ..LdaConfig::new(2, 11).with_iterations(200)
        };
        let model = train(&docs, 10, &cfg).unwrap();
        let mut group_topic = [None, None];
        for (i, _) in docs.iter().enumerate() {
            let theta = model.doc_topics(i).unwrap();
            let (top, &p) = theta
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            assert!(p >= 0.9, "doc {i}: {theta:?}");
            let g = i % 2;
            match group_topic[g] {
                None => group_topic[g] = Some(top),
                Some(t) => assert_eq!(t, top),
            }
        }
        assert_ne!(group_topic[0], group_topic[1]);
    }

    #[test]
    fn matrices_are_normalized_and_deterministic() {
        let docs = planted();
        let cfg = LdaConfig::new(3, 5).with_iterations(30);
        let a = train(&docs, 12, &cfg).unwrap();
        let b = train(&docs, 12, &cfg).unwrap();
        assert_eq!(a, b);
        for x in 0..a.k {
            let s: f64 = a.topic_terms(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(a.topic_terms(x).iter().all(|&p| p > 0.0));
        }
        for d in 0..a.n_docs() {
            let s: f64 = a.doc_topics(d).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(a.doc_topics(a.n_docs()).is_err());
    }

    #[test]
    fn train_errors() {
        assert!(matches!(
            train(&[], 5, &LdaConfig::new(2, 0)),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            train(&planted(), 10, &LdaConfig::new(1, 0)),
            Err(Error::InvalidK(1))
        ));
    }

    #[test]
    fn default_alpha_is_fifty_over_k() {
        assert_eq!(LdaConfig::new(25, 0).alpha(), 2.0);
    }

    #[test]
    fn fold_in_single_topic_and_unknown_terms() {
        let docs = planted();
        let mut model = train(&docs, 10, &LdaConfig::new(2, 1).with_iterations(5)).unwrap();
        let bag: TermBag = [(99u32, 3u32)].into_iter().collect();
        assert!(matches!(
            fold_in(&model, &bag, 10, 0),
            Err(Error::NoKnownTerms)
        ));

        // Collapse to a one-topic model by hand.
        model.k = 1;
        model.phi = vec![0.1; 10];
        model.theta = vec![1.0; docs.len()];
        let v = fold_in(&model, &docs[0].terms, 10, 0).unwrap();
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn fold_in_recovers_training_theta() {
        let docs = planted();
        let model = train(&docs, 10, &LdaConfig::new(2, 3).with_iterations(200)).unwrap();
        for (i, d) in docs.iter().enumerate() {
            let folded = fold_in(&model, &d.terms, DEFAULT_FOLD_IN_ITERATIONS, 17).unwrap();
            let trained = model.doc_topics(i).unwrap();
            let tv: f64 = folded
                .iter()
                .zip(trained)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv <= 0.15, "doc {i}: tv {tv}");
        }
    }

    #[test]
    fn persistence_round_trip_is_lossless() {
        let model = train(&planted(), 10, &LdaConfig::new(3, 9).with_iterations(10)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = TopicModel::read_from(&buf[..], "mem").unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn truncated_model_file_is_rejected() {
        let model = train(&planted(), 10, &LdaConfig::new(2, 9).with_iterations(2)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            TopicModel::read_from(cut.as_bytes(), "mem"),
            Err(Error::Parse { .. })
        ));
    }
}
