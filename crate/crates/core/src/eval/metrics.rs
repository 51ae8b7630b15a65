//! Binary-relevance ranking metrics, the paired t-test and normalized entropy.

use std::collections::BTreeSet;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn hits_in_top<S: AsRef<str>>(ranking: &[S], relevant: &BTreeSet<String>, cutoff: usize) -> usize {
    ranking
        .iter()
        .take(cutoff)
        .filter(|c| relevant.contains(c.as_ref()))
        .count()
}

/// NDCG with binary gains and a `log2(i + 1)` discount.
pub fn ndcg_at<S: AsRef<str>>(
    ranking: &[S],
    relevant: &BTreeSet<String>,
    cutoff: usize,
) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::UndefinedForEmptyQrel);
    }
    let dcg: f64 = ranking
        .iter()
        .take(cutoff)
        .enumerate()
        .filter(|(_, c)| relevant.contains(c.as_ref()))
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..relevant.len().min(cutoff))
        .map(|i| 1.0 / ((i + 2) as f64).log2())
        .sum();
    Ok(dcg / ideal)
}

pub fn precision_at<S: AsRef<str>>(
    ranking: &[S],
    relevant: &BTreeSet<String>,
    cutoff: usize,
) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::UndefinedForEmptyQrel);
    }
    if cutoff == 0 {
        return Ok(0.0);
    }
    Ok(hits_in_top(ranking, relevant, cutoff) as f64 / cutoff as f64)
}

pub fn recall_at<S: AsRef<str>>(
    ranking: &[S],
    relevant: &BTreeSet<String>,
    cutoff: usize,
) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::UndefinedForEmptyQrel);
    }
    Ok(hits_in_top(ranking, relevant, cutoff) as f64 / relevant.len() as f64)
}

/// Recall over the top `nr` positions, `nr` being the number of relevant
/// candidates.
pub fn recall_at_nr<S: AsRef<str>>(ranking: &[S], relevant: &BTreeSet<String>) -> Result<f64> {
    recall_at(ranking, relevant, relevant.len())
}

pub fn precision_at_nr<S: AsRef<str>>(ranking: &[S], relevant: &BTreeSet<String>) -> Result<f64> {
    precision_at(ranking, relevant, relevant.len())
}

/// Two-sided p-value of the paired t-test on per-query values. When every
/// difference is identical the statistic is undefined: equal samples give
/// 1.0, a constant non-zero shift gives 0.0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewValues {
            expected: 2,
            got: n,
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = paired_t_statistic(mean, var, n);
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("degrees of freedom are positive");
    Ok((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

fn paired_t_statistic(mean: f64, var: f64, n: usize) -> f64 {
    mean / (var.sqrt() / (n as f64).sqrt())
}

/// Entropy of the normalized counts divided by `ln(n_categories)`.
pub fn normalized_entropy(counts: &[u64], n_categories: usize) -> Result<f64> {
    if n_categories < 2 {
        return Err(Error::SingleCategory(n_categories));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::ZeroMass);
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    Ok(h / (n_categories as f64).ln())
}
