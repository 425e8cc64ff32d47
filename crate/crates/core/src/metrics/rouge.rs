use std::collections::BTreeMap;

use super::CaptionSet;
use crate::error::Result;

/// Recall weight of the ROUGE-L F-measure.
pub const ROUGE_BETA: f64 = 1.2;

/// Longest common subsequence length, O(|a| |b|) time and O(|b|) space.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L of one candidate: maximum LCS precision and maximum LCS recall over
/// the references, combined with the beta = 1.2 F-measure.
pub fn rouge_l_image(candidate: &[String], references: &[Vec<String>]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut prec_max: f64 = 0.0;
    let mut rec_max: f64 = 0.0;
    for r in references.iter().filter(|r| !r.is_empty()) {
        let lcs = lcs_len(candidate, r) as f64;
        prec_max = prec_max.max(lcs / candidate.len() as f64);
        rec_max = rec_max.max(lcs / r.len() as f64);
    }
    if prec_max == 0.0 || rec_max == 0.0 {
        return 0.0;
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * prec_max * rec_max / (rec_max + b2 * prec_max)
}

pub fn rouge_l_per_image(set: &CaptionSet) -> Result<BTreeMap<String, f64>> {
    Ok(set
        .pairs()?
        .into_iter()
        .map(|(id, c, refs)| (id.to_string(), rouge_l_image(c, refs)))
        .collect())
}

/// Mean per-image ROUGE-L.
pub fn rouge_l(set: &CaptionSet) -> Result<f64> {
    let per_image = rouge_l_per_image(set)?;
    Ok(per_image.values().sum::<f64>() / per_image.len() as f64)
}
