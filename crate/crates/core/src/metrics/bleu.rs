use serde::{Deserialize, Serialize};

use super::{ngram_counts, CaptionSet};
use crate::error::Result;

/// Corpus-level BLEU-1..BLEU-4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuScores(pub [f64; 4]);

impl BleuScores {
    pub fn get(&self, n: usize) -> f64 {
        self.0[n - 1]
    }
}

/// Corpus BLEU with clipped n-gram precision and the brevity penalty.
///
/// Candidate counts are clipped by the maximum count of that n-gram in any one
/// reference of the same image. The effective reference length per image is
/// the reference length closest to the candidate length (shorter wins ties).
/// No smoothing: a zero precision at any order up to n gives BLEU-n = 0.
pub fn bleu(set: &CaptionSet) -> Result<BleuScores> {
    let pairs = set.pairs()?;
    let mut matched = [0u64; 4];
    let mut total = [0u64; 4];
    let mut cand_len = 0u64;
    let mut ref_len = 0u64;

    for (_, cand, refs) in pairs {
        cand_len += cand.len() as u64;
        ref_len += refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
            .unwrap_or(0) as u64;

        for n in 1..=4 {
            let cand_counts = ngram_counts(cand, n);
            let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
            for (gram, &count) in &cand_counts {
                let max_ref = ref_counts
                    .iter()
                    .map(|rc| rc.get(gram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                matched[n - 1] += count.min(max_ref) as u64;
            }
            total[n - 1] += cand.len().saturating_sub(n - 1) as u64;
        }
    }

    let bp = if cand_len == 0 {
        0.0
    } else if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };

    let mut scores = [0.0; 4];
    let mut log_sum = 0.0;
    let mut zero = false;
    for n in 1..=4 {
        if matched[n - 1] == 0 || total[n - 1] == 0 {
            zero = true;
        } else {
            log_sum += (matched[n - 1] as f64 / total[n - 1] as f64).ln();
        }
        scores[n - 1] = if zero {
            0.0
        } else {
            bp * (log_sum / n as f64).exp()
        };
    }
    Ok(BleuScores(scores))
}
