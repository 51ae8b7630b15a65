//! Splitting a document into per-topic subdocuments.
//!
//! Each term's occurrences are shared out over the document's selected topics
//! in proportion to p(x|t,d) ∝ p(t|x) p(x|d), with rounding to the nearest
//! integer followed by a repair pass that restores the original count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TermBag, Vocabulary};
use crate::error::{Error, Result};
use crate::lda::TopicModel;
use crate::topicselect::{select_count, SortedTopicDist, Strategy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subdocument {
    pub doc_id: String,
    pub topic_id: usize,
    /// Only positive counts are stored.
    pub terms: TermBag,
}

impl Subdocument {
    pub fn size(&self) -> u32 {
        self.terms.values().sum()
    }
}

/// p(x|t,d) over all k topics for a training document (by corpus position).
pub fn topic_posterior(model: &TopicModel, doc: usize, term: u32) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..model.k).collect();
    renormalized_posterior(model, doc, term, &all)
}

/// p(x|t,d) restricted to `selected` topics and renormalized over them. The
/// result is parallel to `selected`.
pub fn renormalized_posterior(
    model: &TopicModel,
    doc: usize,
    term: u32,
    selected: &[usize],
) -> Result<Vec<f64>> {
    let theta = model.doc_topics(doc)?;
    if !model.covers(term) {
        return Err(Error::ZeroDenominator { term });
    }
    let joint: Vec<f64> = selected
        .iter()
        .map(|&x| model.term_prob(x, term) * theta[x])
        .collect();
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroDenominator { term });
    }
    Ok(joint.into_iter().map(|j| j / total).collect())
}

/// Shares `freq` occurrences among entries in proportion to `probs`.
///
/// Each share is rounded to the nearest integer (halves round up). Surplus
/// units are then taken one at a time from the least probable entries that
/// still hold one, and missing units given to the most probable entries.
/// Entries are ranked by probability then position; additions walk that
/// ranking from the front and removals from the back.
pub fn distribute_frequency(freq: u32, probs: &[f64]) -> Vec<u32> {
    if probs.is_empty() {
        return Vec::new();
    }
    let mut counts: Vec<u32> = probs
        .iter()
        .map(|&p| (freq as f64 * p + 0.5).floor().max(0.0) as u32)
        .collect();
    let mut by_prob_desc: Vec<usize> = (0..probs.len()).collect();
    by_prob_desc.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let by_prob_asc: Vec<usize> = by_prob_desc.iter().rev().copied().collect();

    let mut assigned: u32 = counts.iter().sum();
    // Rounding moves each entry by at most 1/2, so one pass normally
    // suffices; the outer loops only matter for malformed `probs`.
    while assigned < freq {
        for &i in &by_prob_desc {
            if assigned == freq {
                break;
            }
            counts[i] += 1;
            assigned += 1;
        }
    }
    while assigned > freq {
        for &i in &by_prob_asc {
            if assigned == freq {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                assigned -= 1;
            }
        }
    }
    counts
}

/// Topics kept for a training document under `strategy`, most probable first.
pub fn selected_topics(model: &TopicModel, doc: usize, strategy: Strategy) -> Result<Vec<usize>> {
    let dist = SortedTopicDist::from_unsorted(model.doc_topics(doc)?)?;
    let count = select_count(&dist, strategy)?;
    Ok(dist.top(count).to_vec())
}

/// Splits the training document at position `index` of the model's corpus.
/// Subdocuments come out in order of topic probability, empty ones omitted.
pub fn split_document(
    model: &TopicModel,
    doc: &Document,
    index: usize,
    strategy: Strategy,
) -> Result<Vec<Subdocument>> {
    let selected = selected_topics(model, index, strategy)?;
    let mut parts: Vec<TermBag> = vec![TermBag::new(); selected.len()];
    for (&term, &freq) in &doc.terms {
        let probs = renormalized_posterior(model, index, term, &selected)?;
        for (slot, count) in distribute_frequency(freq, &probs).into_iter().enumerate() {
            if count > 0 {
                parts[slot].insert(term, count);
            }
        }
    }
    Ok(selected
        .into_iter()
        .zip(parts)
        .filter(|(_, terms)| !terms.is_empty())
        .map(|(topic_id, terms)| Subdocument {
            doc_id: doc.id.clone(),
            topic_id,
            terms,
        })
        .collect())
}

/// Splits every document of the corpus the model was trained on.
pub fn split_corpus(
    model: &TopicModel,
    docs: &[Document],
    strategy: Strategy,
) -> Result<Vec<Vec<Subdocument>>> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| split_document(model, d, i, strategy))
        .collect()
}

/// Tab-separated `doc_id topic_id term count` lines.
pub fn write_debug_dump<W: Write>(
    out: &mut W,
    splits: &[Vec<Subdocument>],
    vocab: &Vocabulary,
) -> Result<()> {
    for sub in splits.iter().flatten() {
        for (&t, &c) in &sub.terms {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                sub.doc_id,
                sub.topic_id,
                vocab.term(t).unwrap_or("?"),
                c
            )?;
        }
    }
    Ok(())
}
