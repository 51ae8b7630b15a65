//! Query-likelihood retrieval over term subprofiles, cosine matching over
//! topic profiles, and run-file IO.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{TermBag, TermId};
use crate::error::{Error, Result};
use crate::profiles::{ProfileRef, Subprofile, TopicProfile};

pub const DEFAULT_MU: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub terms: TermBag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub target: ProfileRef,
    pub score: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
}

/// Inverted index over subprofiles, ordered by subprofile id.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    units: Vec<Subprofile>,
    postings: BTreeMap<TermId, Vec<(u32, u32)>>,
    collection_tf: BTreeMap<TermId, u64>,
    collection_len: u64,
}

impl Index {
    pub fn build(mut subprofiles: Vec<Subprofile>) -> Result<Self> {
        if subprofiles.is_empty() {
            return Err(Error::EmptyInput);
        }
        subprofiles.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = subprofiles.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateSubprofile(w[0].id.to_string()));
        }
        let mut postings: BTreeMap<TermId, Vec<(u32, u32)>> = BTreeMap::new();
        let mut collection_tf: BTreeMap<TermId, u64> = BTreeMap::new();
        let mut collection_len = 0u64;
        for (i, sp) in subprofiles.iter().enumerate() {
            for (&t, &c) in &sp.terms {
                postings.entry(t).or_default().push((i as u32, c));
                *collection_tf.entry(t).or_insert(0) += c as u64;
            }
            collection_len += sp.size as u64;
        }
        Ok(Self {
            units: subprofiles,
            postings,
            collection_tf,
            collection_len,
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[Subprofile] {
        &self.units
    }

    pub fn collection_len(&self) -> u64 {
        self.collection_len
    }

    pub fn collection_tf(&self, term: TermId) -> u64 {
        self.collection_tf.get(&term).copied().unwrap_or(0)
    }

    pub fn postings(&self, term: TermId) -> &[(u32, u32)] {
        self.postings.get(&term).map(Vec::as_slice).unwrap_or(&[])
    }

    /// One line per subprofile: `id<TAB>term:count term:count ...`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for sp in &self.units {
            write!(out, "{}\t", sp.id)?;
            let mut first = true;
            for (t, c) in &sp.terms {
                if !first {
                    out.write_all(b" ")?;
                }
                first = false;
                write!(out, "{t}:{c}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let mut units = Vec::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(&name, i + 1, "missing tab"))?;
            let mut terms = TermBag::new();
            for pair in rest.split_ascii_whitespace() {
                let parsed = pair
                    .split_once(':')
                    .and_then(|(t, c)| Some((t.parse().ok()?, c.parse().ok()?)));
                let (t, c): (TermId, u32) = parsed
                    .ok_or_else(|| Error::parse(&name, i + 1, format!("bad posting `{pair}`")))?;
                terms.insert(t, c);
            }
            units.push(Subprofile::new(id.parse()?, terms));
        }
        Self::build(units)
    }
}

/// Dirichlet-smoothed query log-likelihood of `sp`. Query terms absent from
/// the whole collection are skipped.
pub fn lm_score(query: &Query, sp: &Subprofile, index: &Index, mu: f64) -> f64 {
    let denom = (sp.size as f64 + mu).ln();
    let mut score = 0.0;
    for (&t, &qc) in &query.terms {
        let cf = index.collection_tf(t);
        if cf == 0 {
            continue;
        }
        let p_coll = cf as f64 / index.collection_len as f64;
        let tf = sp.terms.get(&t).copied().unwrap_or(0) as f64;
        score += qc as f64 * ((tf + mu * p_coll).ln() - denom);
    }
    score
}

fn rank_hits(mut scored: Vec<(ProfileRef, f64)>, top_n: usize) -> Vec<ScoredHit> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(i, (target, score))| ScoredHit {
            target,
            score,
            rank: i + 1,
        })
        .collect()
}

/// Scores every subprofile sharing at least one term with the query and
/// returns the best `top_n`, ties broken by ascending subprofile id.
pub fn search(query: &Query, index: &Index, mu: f64, top_n: usize) -> Vec<ScoredHit> {
    let mut touched: HashSet<u32> = HashSet::new();
    for &t in query.terms.keys() {
        touched.extend(index.postings(t).iter().map(|&(u, _)| u));
    }
    let scored = touched
        .into_iter()
        .map(|u| {
            let sp = &index.units[u as usize];
            (sp.id.clone(), lm_score(query, sp, index, mu))
        })
        .collect();
    rank_hits(scored, top_n)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Ranks topic profiles by cosine similarity to a query topic vector.
pub fn cosine_topic_search(
    query: &[f64],
    profiles: &[TopicProfile],
    top_n: usize,
) -> Result<Vec<ScoredHit>> {
    if query.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    let scored = profiles
        .iter()
        .map(|p| (p.id.clone(), cosine(query, &p.topics)))
        .collect();
    Ok(rank_hits(scored, top_n))
}

/// Writes `query_id Q0 target rank score tag` lines.
pub fn write_run<W: Write, T: std::fmt::Display>(
    out: &mut W,
    query_id: &str,
    hits: impl IntoIterator<Item = (T, usize, f64)>,
    tag: &str,
) -> Result<()> {
    for (target, rank, score) in hits {
        writeln!(out, "{query_id} Q0 {target} {rank} {score} {tag}")?;
    }
    Ok(())
}

pub fn write_hits<W: Write>(
    out: &mut W,
    query_id: &str,
    hits: &[ScoredHit],
    tag: &str,
) -> Result<()> {
    write_run(
        out,
        query_id,
        hits.iter().map(|h| (&h.target, h.rank, h.score)),
        tag,
    )
}

/// One parsed run line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLine {
    pub query_id: String,
    pub target: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// Reads run lines, grouped by query in first-appearance order.
pub fn read_run<R: BufRead>(reader: R, name: &str) -> Result<Vec<(String, Vec<RunLine>)>> {
    let mut grouped: Vec<(String, Vec<RunLine>)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_ascii_whitespace().collect();
        let [qid, _q0, target, rank, score, tag] = f[..] else {
            return Err(Error::parse(name, i + 1, "expected 6 fields"));
        };
        let rank = rank
            .parse()
            .map_err(|_| Error::parse(name, i + 1, format!("bad rank `{rank}`")))?;
        let score = score
            .parse()
            .map_err(|_| Error::parse(name, i + 1, format!("bad score `{score}`")))?;
        let entry = RunLine {
            query_id: qid.to_string(),
            target: target.to_string(),
            rank,
            score,
            tag: tag.to_string(),
        };
        match grouped.last_mut() {
            Some((q, lines)) if q == qid => lines.push(entry),
            _ => grouped.push((qid.to_string(), vec![entry])),
        }
    }
    Ok(grouped)
}

/// Converts parsed run lines back into hits on subprofiles.
pub fn hits_from_run(lines: &[RunLine]) -> Result<Vec<ScoredHit>> {
    lines
        .iter()
        .map(|l| {
            Ok(ScoredHit {
                target: l.target.parse()?,
                score: l.score,
                rank: l.rank,
            })
        })
        .collect()
}
