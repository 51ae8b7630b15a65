//! CombLgDCS: turning a ranking of subprofiles into a ranking of candidates.
//!
//! Each hit contributes `score / log2(rank + 1)`, where a candidate's first
//! hit in the ranking counts as rank 1 and later hits keep their raw
//! position.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::profiles::ProfileRef;
use crate::retrieval::ScoredHit;

pub const DEFAULT_DEPTH: usize = 1000;
/// Offset added after shifting scores so the lowest hit stays positive.
pub const SHIFT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateRanking {
    pub entries: Vec<(String, f64)>,
    /// Contributing subprofiles per candidate, in ranking order.
    pub provenance: BTreeMap<String, Vec<ProfileRef>>,
}

impl CandidateRanking {
    pub fn candidates(&self) -> Vec<&str> {
        self.entries.iter().map(|(c, _)| c.as_str()).collect()
    }

    pub fn score(&self, candidate: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(c, _)| c == candidate)
            .map(|(_, s)| *s)
    }
}

/// Shifts scores so the minimum becomes [`SHIFT_EPSILON`]. Order and ranks
/// are unchanged. Log-likelihood scores are negative and need this before
/// fusion.
pub fn shift_positive(hits: &[ScoredHit]) -> Vec<ScoredHit> {
    let min = hits.iter().map(|h| h.score).fold(f64::INFINITY, f64::min);
    hits.iter()
        .map(|h| ScoredHit {
            score: h.score - min + SHIFT_EPSILON,
            ..h.clone()
        })
        .collect()
}

pub fn comb_lg_dcs(hits: &[ScoredHit]) -> CandidateRanking {
    let mut ordered: Vec<&ScoredHit> = hits.iter().collect();
    ordered.sort_by_key(|h| h.rank);

    let mut totals: HashMap<&str, f64> = HashMap::new();
    let mut provenance: BTreeMap<String, Vec<ProfileRef>> = BTreeMap::new();
    for hit in ordered {
        let cand = hit.target.candidate_id.as_str();
        let rank = if totals.contains_key(cand) {
            hit.rank
        } else {
            1
        };
        *totals.entry(cand).or_insert(0.0) += hit.score / ((rank + 1) as f64).log2();
        provenance
            .entry(cand.to_string())
            .or_default()
            .push(hit.target.clone());
    }
    let mut entries: Vec<(String, f64)> = totals
        .into_iter()
        .map(|(c, s)| (c.to_string(), s))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    CandidateRanking {
        entries,
        provenance,
    }
}

/// Shifts, fuses and truncates the input to `depth` hits first.
pub fn fuse_lm_hits(hits: &[ScoredHit], depth: usize) -> CandidateRanking {
    let top: Vec<ScoredHit> = hits.iter().filter(|h| h.rank <= depth).cloned().collect();
    comb_lg_dcs(&shift_positive(&top))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ProfileKey;

    fn hit(cand: &str, topic: usize, score: f64, rank: usize) -> ScoredHit {
        ScoredHit {
            target: ProfileRef::new(cand, ProfileKey::Topic(topic)),
            score,
            rank,
        }
    }

    #[test]
    fn single_hit_uses_rank_one() {
        let r = comb_lg_dcs(&[hit("A", 0, 3.0, 5)]);
        assert_eq!(r.entries, vec![("A".to_string(), 3.0)]);
    }

    #[test]
    fn later_hits_are_discounted_by_position() {
        let r = comb_lg_dcs(&[hit("A", 0, 2.0, 1), hit("A", 1, 1.0, 3)]);
        assert_eq!(r.score("A"), Some(2.5));
        assert_eq!(r.provenance["A"].len(), 2);
    }

    #[test]
    fn each_candidate_first_hit_is_undiscounted() {
        let r = comb_lg_dcs(&[hit("A", 0, 2.0, 1), hit("B", 0, 1.9, 2)]);
        assert_eq!(
            r.entries,
            vec![("A".to_string(), 2.0), ("B".to_string(), 1.9)]
        );
    }

    #[test]
    fn empty_input() {
        assert!(comb_lg_dcs(&[]).entries.is_empty());
        assert!(fuse_lm_hits(&[], 10).entries.is_empty());
    }

    #[test]
    fn ties_break_by_candidate_id() {
        let r = comb_lg_dcs(&[hit("B", 0, 1.0, 1), hit("A", 0, 1.0, 2)]);
        assert_eq!(r.candidates(), ["A", "B"]);
    }

    #[test]
    fn shift_makes_scores_positive_and_keeps_order() {
        let hits = vec![hit("A", 0, -3.0, 1), hit("B", 0, -5.0, 2)];
        let shifted = shift_positive(&hits);
        assert_eq!(shifted[1].score, SHIFT_EPSILON);
        assert!((shifted[0].score - (2.0 + SHIFT_EPSILON)).abs() < 1e-12);
        let r = fuse_lm_hits(&hits, 1);
        assert_eq!(r.candidates(), ["A"]);
    }
}
