#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use subprof::topicselect::{Measure, SortedTopicDist};

/// Sorted distribution of size `k`. With `allow_zeros`, a random tail of the
/// entries is zero. Positive entries stay above 1e-4 of the largest, so the
/// per-coordinate terms never round to their limits.
pub fn random_sorted(rng: &mut ChaCha8Rng, k: usize, allow_zeros: bool) -> SortedTopicDist {
    let positive = if allow_zeros && rng.random_bool(0.3) {
        rng.random_range(1..=k)
    } else {
        k
    };
    let shape: f64 = rng.random_range(0.5..4.0);
    let mut raw: Vec<f64> = (0..k)
        .map(|i| {
            if i < positive {
                1e-4 + rng.random::<f64>().powf(shape)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|x| *x /= total);
    raw.sort_by(|a, b| b.total_cmp(a));
    SortedTopicDist::from_sorted(&raw).unwrap()
}

/// Indicator vector of the first `j` coordinates.
pub fn indicator(k: usize, j: usize) -> Vec<f64> {
    (0..k).map(|i| if i < j { 1.0 } else { 0.0 }).collect()
}

/// Textbook definition of each measure between `p` and `q`.
pub fn generic_measure(m: Measure, p: &[f64], q: &[f64]) -> f64 {
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|a| a * a).sum();
    let qq: f64 = q.iter().map(|b| b * b).sum();
    let sum_p: f64 = p.iter().sum();
    let sum_q: f64 = q.iter().sum();
    let sum_min: f64 = p.iter().zip(q).map(|(a, b)| a.min(*b)).sum();
    let sum_max: f64 = p.iter().zip(q).map(|(a, b)| a.max(*b)).sum();
    let sum_abs: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    match m {
        Measure::Cosine => dot / (pp.sqrt() * qq.sqrt()),
        Measure::Dice => 2.0 * dot / (pp + qq),
        Measure::Jaccard => dot / (pp + qq - dot),
        Measure::Czekanowski => 2.0 * sum_min / (sum_p + sum_q),
        Measure::Ruzicka => sum_min / sum_max,
        Measure::Overlap => sum_min / sum_p.min(sum_q),
        Measure::Euclidean => p
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt(),
        Measure::Hamming => sum_abs,
        Measure::Chebyshev => p
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
        Measure::SorensenDist => sum_abs / (sum_p + sum_q),
        Measure::Soergel => sum_abs / sum_max,
        Measure::Kulczynski => sum_abs / sum_min,
        Measure::Camberra => p.iter().zip(q).map(|(a, b)| (a - b).abs() / (a + b)).sum(),
        Measure::Divergence => {
            2.0 * p
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b).powi(2) / (a + b).powi(2))
                .sum::<f64>()
        }
        Measure::Neyman => p.iter().zip(q).map(|(a, b)| (a - b).powi(2) / a).sum(),
    }
}

/// All subsets of `0..n` with at most `max` elements, as sorted vectors.
pub fn subsets_up_to(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize <= max {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

pub fn id_set(ids: impl IntoIterator<Item = String>) -> BTreeSet<String> {
    ids.into_iter().collect()
}
