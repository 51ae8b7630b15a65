//! Choosing how many of a document's most probable topics to keep.
//!
//! A sorted distribution `p` is compared against the indicator vectors
//! `I_j = (1, .., 1, 0, .., 0)` (j leading ones). Each of fifteen similarity
//! or distance measures picks a best `j`; they reduce to five closed-form
//! strategies.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A topic distribution sorted by non-increasing probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedTopicDist {
    probs: Vec<f64>,
    topic_ids: Vec<usize>,
}

impl SortedTopicDist {
    /// Sorts an unordered distribution indexed by topic id. Equal
    /// probabilities keep ascending topic id order.
    pub fn from_unsorted(probs: &[f64]) -> Result<Self> {
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        let sorted = order.iter().map(|&i| probs[i]).collect();
        Self::new(sorted, order)
    }

    pub fn new(probs: Vec<f64>, topic_ids: Vec<usize>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if probs.len() != topic_ids.len() {
            return Err(Error::InvalidDistribution(
                "ids and probabilities differ in length".into(),
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "negative or non-finite entry".into(),
            ));
        }
        if probs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidDistribution(
                "not sorted in non-increasing order".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self { probs, topic_ids })
    }

    /// Sorted values with ids `0..k` (for already sorted input).
    pub fn from_sorted(probs: &[f64]) -> Result<Self> {
        Self::new(probs.to_vec(), (0..probs.len()).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn topic_ids(&self) -> &[usize] {
        &self.topic_ids
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn positive_count(&self) -> usize {
        self.probs.iter().take_while(|&&p| p > 0.0).count()
    }

    /// Topic ids of the `count` most probable topics.
    pub fn top(&self, count: usize) -> &[usize] {
        &self.topic_ids[..count.min(self.k())]
    }
}

/// The five distinct selection rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Euclidean,
    Dice,
    Sorensen,
    Cosine,
    Overlap,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Euclidean,
        Strategy::Dice,
        Strategy::Sorensen,
        Strategy::Cosine,
        Strategy::Overlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Euclidean => "euclidean",
            Strategy::Dice => "dice",
            Strategy::Sorensen => "sorensen",
            Strategy::Cosine => "cosine",
            Strategy::Overlap => "overlap",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownName {
                kind: "strategy",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Cosine,
    Dice,
    Jaccard,
    Czekanowski,
    Ruzicka,
    Overlap,
    Euclidean,
    Hamming,
    Chebyshev,
    SorensenDist,
    Soergel,
    Kulczynski,
    Camberra,
    Divergence,
    Neyman,
}

impl Measure {
    pub const ALL: [Measure; 15] = [
        Measure::Cosine,
        Measure::Dice,
        Measure::Jaccard,
        Measure::Czekanowski,
        Measure::Ruzicka,
        Measure::Overlap,
        Measure::Euclidean,
        Measure::Hamming,
        Measure::Chebyshev,
        Measure::SorensenDist,
        Measure::Soergel,
        Measure::Kulczynski,
        Measure::Camberra,
        Measure::Divergence,
        Measure::Neyman,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Cosine => "cosine",
            Measure::Dice => "dice",
            Measure::Jaccard => "jaccard",
            Measure::Czekanowski => "czekanowski",
            Measure::Ruzicka => "ruzicka",
            Measure::Overlap => "overlap",
            Measure::Euclidean => "euclidean",
            Measure::Hamming => "hamming",
            Measure::Chebyshev => "chebyshev",
            Measure::SorensenDist => "sorensen",
            Measure::Soergel => "soergel",
            Measure::Kulczynski => "kulczynski",
            Measure::Camberra => "camberra",
            Measure::Divergence => "divergence",
            Measure::Neyman => "neyman",
        }
    }

    /// Distances are minimized, similarities maximized.
    pub fn is_distance(self) -> bool {
        matches!(
            self,
            Measure::Euclidean
                | Measure::Hamming
                | Measure::Chebyshev
                | Measure::SorensenDist
                | Measure::Soergel
                | Measure::Kulczynski
                | Measure::Camberra
                | Measure::Divergence
                | Measure::Neyman
        )
    }

    /// Measures with a term that divides by an individual `p_i`.
    pub fn needs_positive(self) -> bool {
        matches!(
            self,
            Measure::Kulczynski | Measure::Neyman | Measure::Camberra | Measure::Divergence
        )
    }

    /// The strategy whose selection this measure always reproduces.
    pub fn strategy(self) -> Strategy {
        match self {
            Measure::Cosine => Strategy::Cosine,
            Measure::Dice | Measure::Jaccard => Strategy::Dice,
            Measure::Czekanowski
            | Measure::Ruzicka
            | Measure::SorensenDist
            | Measure::Soergel
            | Measure::Kulczynski => Strategy::Sorensen,
            Measure::Euclidean | Measure::Hamming | Measure::Chebyshev | Measure::Neyman => {
                Strategy::Euclidean
            }
            Measure::Overlap | Measure::Camberra | Measure::Divergence => Strategy::Overlap,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == lower || (lower == "canberra" && *m == Measure::Camberra))
            .ok_or_else(|| Error::UnknownName {
                kind: "measure",
                name: s.to_string(),
            })
    }
}

/// Index of the best score over `1..=scores.len()`, ties toward the smaller
/// index. Comparisons are exact.
fn argbest(scores: impl IntoIterator<Item = f64>, minimize: bool) -> usize {
    let mut best_j = 0;
    let mut best = f64::NAN;
    for (i, s) in scores.into_iter().enumerate() {
        let better = if i == 0 {
            true
        } else if minimize {
            s < best
        } else {
            s > best
        };
        if better {
            best = s;
            best_j = i + 1;
        }
    }
    best_j
}

/// Number of leading topics to keep under `strategy`.
pub fn select_count(dist: &SortedTopicDist, strategy: Strategy) -> Result<usize> {
    let positive = dist.positive_count();
    if positive == 0 {
        return Err(Error::DegenerateDistribution);
    }
    let p = &dist.probs()[..positive];
    let prefix = || {
        p.iter().scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
    };
    Ok(match strategy {
        Strategy::Euclidean => 1,
        Strategy::Overlap => positive,
        Strategy::Cosine => argbest(
            prefix()
                .enumerate()
                .map(|(i, s)| s / ((i + 1) as f64).sqrt()),
            false,
        ),
        Strategy::Dice => {
            let sq: f64 = dist.probs().iter().map(|x| x * x).sum();
            argbest(
                prefix().enumerate().map(|(i, s)| s / ((i + 1) as f64 + sq)),
                false,
            )
        }
        Strategy::Sorensen => argbest(
            prefix().enumerate().map(|(i, s)| s / ((i + 2) as f64)),
            false,
        ),
    })
}

/// Value of `measure` between the distribution and `I_j`.
///
/// Similarities use their reduced closed forms. Distances are accumulated
/// term by term in index order (each term is the per-coordinate contribution
/// against `I_j`), which equals the reduced form and keeps monotonicity in
/// `j` exact under floating point. A division by a zero `p_i` yields
/// `+inf`.
pub fn measure_score(dist: &SortedTopicDist, j: usize, measure: Measure) -> Result<f64> {
    let k = dist.k();
    if j == 0 || j > k {
        return Err(Error::InvalidDistribution(format!(
            "j = {j} outside 1..={k}"
        )));
    }
    let p = dist.probs();
    let head: f64 = p[..j].iter().sum();
    let sq: f64 = p.iter().map(|x| x * x).sum();
    let jf = j as f64;
    let per_coord = |f: &dyn Fn(f64, bool) -> f64| -> f64 {
        p.iter().enumerate().map(|(i, &pi)| f(pi, i < j)).sum()
    };
    Ok(match measure {
        Measure::Cosine => head / (jf.sqrt() * sq.sqrt()),
        Measure::Dice => 2.0 * head / (jf + sq),
        Measure::Jaccard => head / (jf + sq - head),
        Measure::Czekanowski => 2.0 * head / (jf + 1.0),
        Measure::Ruzicka => head / (jf + 1.0 - head),
        Measure::Overlap => head,
        Measure::Euclidean => {
            per_coord(&|pi, on| if on { (1.0 - pi).powi(2) } else { pi * pi }).sqrt()
        }
        Measure::Hamming => per_coord(&|pi, on| if on { 1.0 - pi } else { pi }),
        Measure::Chebyshev => {
            let next = p.get(j).copied().unwrap_or(0.0);
            (1.0 - p[j - 1]).max(next)
        }
        Measure::SorensenDist => 1.0 - 2.0 * head / (jf + 1.0),
        Measure::Soergel => 1.0 - head / (jf + 1.0 - head),
        Measure::Kulczynski => {
            if head == 0.0 {
                f64::INFINITY
            } else {
                (jf + 1.0) / head - 2.0
            }
        }
        // Outside the head each coordinate contributes |p - 0| / (p + 0) = 1.
        Measure::Camberra => per_coord(&|pi, on| if on { (1.0 - pi) / (1.0 + pi) } else { 1.0 }),
        Measure::Divergence => {
            2.0 * per_coord(&|pi, on| {
                if on {
                    ((1.0 - pi) / (1.0 + pi)).powi(2)
                } else {
                    1.0
                }
            })
        }
        Measure::Neyman => {
            if p[..j].iter().any(|&x| x == 0.0) {
                f64::INFINITY
            } else {
                p[..j].iter().map(|x| 1.0 / x).sum::<f64>() + 1.0 - 2.0 * jf
            }
        }
    })
}

/// Evaluates `measure` at every `j` in `1..=k` and returns the best `j`.
pub fn brute_force_select(dist: &SortedTopicDist, measure: Measure) -> Result<usize> {
    if dist.positive_count() == 0 {
        return Err(Error::DegenerateDistribution);
    }
    let scores = (1..=dist.k())
        .map(|j| measure_score(dist, j, measure))
        .collect::<Result<Vec<_>>>()?;
    Ok(argbest(scores, measure.is_distance()))
}
