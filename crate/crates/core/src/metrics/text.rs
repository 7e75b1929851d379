use std::collections::HashMap;
use std::hash::Hash;

use super::MetricsError;
use crate::ingest::normalize_text;

/// Word error rate: unit-cost edit distance divided by reference length.
/// Can exceed 1 when the hypothesis has many insertions.
pub fn wer<S: PartialEq>(reference: &[S], hypothesis: &[S]) -> Result<f64, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[hypothesis.len()] as f64 / reference.len() as f64)
}

/// WER on normalized, whitespace-tokenized text.
pub fn wer_text(reference: &str, hypothesis: &str) -> Result<f64, MetricsError> {
    wer(&normalize_text(reference).words(), &normalize_text(hypothesis).words())
}

fn ngram_counts<S: Eq + Hash>(tokens: &[S], n: usize) -> HashMap<&[S], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with one reference per hypothesis: modified n-gram precisions
/// for n = 1..4 aggregated over the corpus, uniform weights, brevity
/// penalty, no smoothing (any zero precision gives 0).
pub fn corpus_bleu<S: Eq + Hash>(
    references: &[Vec<S>],
    hypotheses: &[Vec<S>],
) -> Result<f64, MetricsError> {
    if references.len() != hypotheses.len() {
        return Err(MetricsError::LengthMismatch(references.len(), hypotheses.len()));
    }
    if references.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut ref_len, mut hyp_len) = (0usize, 0usize);
    for (r, h) in references.iter().zip(hypotheses) {
        ref_len += r.len();
        hyp_len += h.len();
        for n in 1..=4 {
            let ref_counts = ngram_counts(r, n);
            for (gram, count) in ngram_counts(h, n) {
                matched[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                total[n - 1] += count;
            }
        }
    }
    if matched.iter().any(|&m| m == 0) {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..4)
        .map(|k| 0.25 * (matched[k] as f64 / total[k] as f64).ln())
        .sum();
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(bp * log_precision.exp())
}
