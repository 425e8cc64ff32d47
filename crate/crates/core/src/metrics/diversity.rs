use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_POSITIONS: usize = 25;
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.03;
pub const DIVERSITY_ORDERS: [usize; 3] = [1, 2, 4];

/// Number of distinct n-grams starting at each absolute token position
/// `1..=max_pos` across all captions. Captions too short to hold an n-gram
/// at a position contribute nothing there.
pub fn positional_unique_ngrams(
    candidates: &[Vec<String>],
    n: usize,
    max_pos: usize,
) -> Vec<usize> {
    (0..max_pos)
        .map(|start| {
            candidates
                .iter()
                .filter_map(|c| c.get(start..start + n))
                .collect::<HashSet<&[String]>>()
                .len()
        })
        .collect()
}

/// Denominator of the common-word ratio between two captions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapDenominator {
    #[default]
    Max,
    Min,
    Union,
}

/// Shared distinct words over the chosen set-size denominator. Two empty
/// captions are identical (ratio 1).
pub fn common_word_ratio(a: &[String], b: &[String], denom: OverlapDenominator) -> f64 {
    let sa: HashSet<&String> = a.iter().collect();
    let sb: HashSet<&String> = b.iter().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let common = sa.intersection(&sb).count();
    let d = match denom {
        OverlapDenominator::Max => sa.len().max(sb.len()),
        OverlapDenominator::Min => sa.len().min(sb.len()),
        OverlapDenominator::Union => sa.union(&sb).count(),
    };
    if d == 0 {
        0.0
    } else {
        common as f64 / d as f64
    }
}

/// Fraction of captions that are "different" under the common-word criterion.
///
/// Captions are clustered greedily in input order: each joins the first
/// cluster whose representative shares at least `threshold` of its words,
/// otherwise it starts a new cluster. Returns clusters / captions. Depends on
/// input order.
pub fn distinct_caption_ratio(
    candidates: &[Vec<String>],
    threshold: f64,
    denom: OverlapDenominator,
) -> Result<f64> {
    if candidates.len() < 2 {
        return Err(Error::Invalid(
            "distinct-caption ratio needs at least 2 captions".into(),
        ));
    }
    let mut reps: Vec<&[String]> = Vec::new();
    for c in candidates {
        if !reps
            .iter()
            .any(|r| common_word_ratio(r, c, denom) >= threshold)
        {
            reps.push(c);
        }
    }
    Ok(reps.len() as f64 / candidates.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    /// `(n, counts)` for each n in [`DIVERSITY_ORDERS`]; `counts[p - 1]` is
    /// the number of unique n-grams at position `p`.
    pub per_position: Vec<(usize, Vec<usize>)>,
    pub distinct_ratio: Option<f64>,
    pub max_pos: usize,
}

pub fn diversity_report(
    candidates: &[Vec<String>],
    max_pos: usize,
    threshold: f64,
    denom: OverlapDenominator,
) -> DiversityReport {
    DiversityReport {
        per_position: DIVERSITY_ORDERS
            .iter()
            .map(|&n| (n, positional_unique_ngrams(candidates, n, max_pos)))
            .collect(),
        distinct_ratio: distinct_caption_ratio(candidates, threshold, denom).ok(),
        max_pos,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps(list: &[&str]) -> Vec<Vec<String>> {
        list.iter()
            .map(|s| s.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn identical_captions_flat_one() {
        let c = caps(&["nice shot great colors"; 100]);
        let counts = positional_unique_ngrams(&c, 1, 25);
        assert_eq!(&counts[..4], &[1, 1, 1, 1]);
        assert!(counts[4..].iter().all(|&x| x == 0));
    }

    #[test]
    fn hand_enumerated_positions() {
        let c = caps(&["a b c", "a d c"]);
        assert_eq!(positional_unique_ngrams(&c, 1, 3), vec![1, 2, 1]);
        assert_eq!(positional_unique_ngrams(&c, 2, 3), vec![2, 2, 0]);
        assert_eq!(positional_unique_ngrams(&c, 4, 3), vec![0, 0, 0]);
    }

    #[test]
    fn distinct_ratio_cases() {
        let same = caps(&["nice shot"; 5]);
        let d = distinct_caption_ratio(&same, 0.03, OverlapDenominator::Max).unwrap();
        assert!((d - 0.2).abs() < 1e-12);

        let disjoint = caps(&["a b", "c d", "e f", "g"]);
        assert_eq!(
            distinct_caption_ratio(&disjoint, 0.03, OverlapDenominator::Max).unwrap(),
            1.0
        );

        // two planted near-duplicate groups plus two loners -> 4 clusters of 6
        let planted = caps(&[
            "lovely soft light on the water",
            "soft light and calm water",
            "sharp focus eyes",
            "great sharp eyes focus",
            "tilted horizon",
            "too much noise",
        ]);
        let d = distinct_caption_ratio(&planted, 0.03, OverlapDenominator::Max).unwrap();
        assert!((d - 4.0 / 6.0).abs() < 1e-12);

        assert!(distinct_caption_ratio(&caps(&["x"]), 0.03, OverlapDenominator::Max).is_err());
    }

    #[test]
    fn ratio_denominators() {
        let c = caps(&["a b c d", "a b"]);
        assert_eq!(
            common_word_ratio(&c[0], &c[1], OverlapDenominator::Max),
            0.5
        );
        assert_eq!(
            common_word_ratio(&c[0], &c[1], OverlapDenominator::Min),
            1.0
        );
        assert_eq!(
            common_word_ratio(&c[0], &c[1], OverlapDenominator::Union),
            0.5
        );
        assert_eq!(common_word_ratio(&[], &[], OverlapDenominator::Max), 1.0);
        assert_eq!(common_word_ratio(&c[0], &[], OverlapDenominator::Min), 0.0);
    }
}
