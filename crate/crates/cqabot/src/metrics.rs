//! Evaluation measures: Average Precision / MAP for ranking quality and
//! smoothed sentence-level BLEU for generation quality.
//!
//! MAP is the extrinsic yardstick: a ranking is good when Good comments sit
//! above the rest. BLEU+1 is sentence BLEU with add-one smoothing of the
//! higher-order n-gram precisions, usable on single short sentences where
//! plain BLEU would collapse to zero.

use std::collections::HashMap;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::textrep::tokenize;

/// Per-rank relevance flags for one ranked thread, true ⇔ gold label Good.
pub type RelevanceList = Vec<bool>;

/// Average precision of one ranked list at full depth.
///
/// Returns `None` when the list has no relevant item; such queries are
/// excluded from the mean rather than scored zero.
pub fn average_precision(rel: &[bool]) -> Option<f64> {
    average_precision_at(rel, None)
}

/// Average precision with an optional rank cutoff.
///
/// With `depth = Some(k)` only the top `k` positions are scanned and the
/// divisor becomes `min(R, k)`, which matches the depth-limited scorers used
/// by shared tasks. `None` means full depth.
pub fn average_precision_at(rel: &[bool], depth: Option<usize>) -> Option<f64> {
    let total_relevant = rel.iter().filter(|r| **r).count();
    if total_relevant == 0 {
        return None;
    }
    let cutoff = depth.unwrap_or(rel.len()).min(rel.len());
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &relevant) in rel.iter().take(cutoff).enumerate() {
        if relevant {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    let divisor = match depth {
        Some(k) => total_relevant.min(k),
        None => total_relevant,
    };
    Some(sum / divisor as f64)
}

/// Mean of [`average_precision`] over the lists where it is defined.
/// Errors when no list has a relevant item.
pub fn mean_average_precision(rels: &[RelevanceList]) -> Result<f64> {
    mean_average_precision_at(rels, None)
}

/// Depth-limited variant of [`mean_average_precision`].
pub fn mean_average_precision_at(rels: &[RelevanceList], depth: Option<usize>) -> Result<f64> {
    let aps: Vec<f64> = rels
        .iter()
        .filter_map(|rel| average_precision_at(rel, depth))
        .collect();
    if aps.is_empty() {
        return Err(Error::invalid(
            "MAP undefined: no query has a relevant item",
        ));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Settings for sentence-level BLEU+1.
#[derive(Debug, Clone)]
pub struct BleuConfig {
    /// Highest n-gram order; 4 is the standard.
    pub max_n: usize,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig { max_n: 4 }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level BLEU+1 with multi-reference clipping.
///
/// Modified n-gram precisions use add-one smoothing for n ≥ 2 only; the
/// unigram precision is unsmoothed, so zero word overlap scores 0. Orders
/// where the candidate has no n-grams are skipped in the geometric mean.
/// The brevity penalty uses the closest reference length, ties going to the
/// shorter one. An empty candidate scores 0; an empty reference list is an
/// error.
pub fn sentence_bleu_plus1(
    candidate: &[String],
    references: &[Vec<String>],
    cfg: &BleuConfig,
) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::invalid("BLEU needs at least one reference"));
    }
    if cfg.max_n == 0 {
        return Err(Error::invalid("BLEU max_n must be at least 1"));
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }

    let mut log_sum = 0.0;
    let mut orders_used = 0usize;
    for n in 1..=cfg.max_n {
        let cand_grams = ngram_counts(candidate, n);
        if cand_grams.is_empty() {
            continue;
        }
        let ref_grams: Vec<HashMap<&[String], usize>> =
            references.iter().map(|r| ngram_counts(r, n)).collect();
        let mut matches = 0usize;
        let mut total = 0usize;
        for (gram, count) in &cand_grams {
            let clip = ref_grams
                .iter()
                .map(|rg| rg.get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            matches += count.min(&clip);
            total += count;
        }
        let precision = if n == 1 {
            matches as f64 / total as f64
        } else {
            (matches + 1) as f64 / (total + 1) as f64
        };
        if precision == 0.0 {
            return Ok(0.0);
        }
        log_sum += precision.ln();
        orders_used += 1;
    }

    let geo_mean = (log_sum / orders_used as f64).exp();

    let c = candidate.len();
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|len| ((*len as i64 - c as i64).abs(), *len))
        .expect("non-empty reference list");
    let brevity = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    Ok(geo_mean * brevity)
}

/// Mean per-thread BLEU+1 of generated answers against each thread's Good
/// comments.
///
/// `outputs[i]` is the tokenized generation for `dataset.threads[i]`.
/// Threads without a Good comment are skipped; if none has one, that is an
/// error.
pub fn multi_reference_bleu(
    outputs: &[Vec<String>],
    dataset: &Dataset,
    cfg: &BleuConfig,
) -> Result<f64> {
    if outputs.len() != dataset.threads.len() {
        return Err(Error::invalid(format!(
            "{} outputs for {} threads",
            outputs.len(),
            dataset.threads.len()
        )));
    }
    let mut sum = 0.0;
    let mut scored = 0usize;
    for (output, thread) in outputs.iter().zip(&dataset.threads) {
        let references: Vec<Vec<String>> = thread
            .comments
            .iter()
            .filter(|c| c.label == crate::corpus::Label::Good)
            .map(|c| tokenize(&c.text))
            .collect();
        if references.is_empty() {
            continue;
        }
        sum += sentence_bleu_plus1(output, &references, cfg)?;
        scored += 1;
    }
    if scored == 0 {
        return Err(Error::invalid("no thread has a Good comment"));
    }
    Ok(sum / scored as f64)
}
