//! Caption evaluation: positional n-gram diversity, distinct-caption ratio,
//! BLEU-1..4, ROUGE-L and CIDEr.

mod bleu;
mod cider;
mod diversity;
mod rouge;

use std::collections::{BTreeMap, HashMap};

pub use bleu::{bleu, BleuScores};
pub use cider::{cider, cider_per_image, CiderOptions, DEFAULT_SIGMA};
pub use diversity::{
    common_word_ratio, distinct_caption_ratio, diversity_report, positional_unique_ngrams,
    DiversityReport, OverlapDenominator, DEFAULT_MAX_POSITIONS, DEFAULT_OVERLAP_THRESHOLD,
    DIVERSITY_ORDERS,
};
pub use rouge::{lcs_len, rouge_l, rouge_l_image, rouge_l_per_image, ROUGE_BETA};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// Lowercase and split a caption into word tokens (punctuation dropped).
pub fn caption_tokens(text: &str) -> Vec<String> {
    tokenize(&text.to_lowercase())
}

/// Candidate captions and their references, keyed by image id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CaptionSet {
    pub candidates: BTreeMap<String, Vec<String>>,
    pub references: BTreeMap<String, Vec<Vec<String>>>,
}

impl CaptionSet {
    pub fn new(
        candidates: BTreeMap<String, Vec<String>>,
        references: BTreeMap<String, Vec<Vec<String>>>,
    ) -> Self {
        let lower = |ts: Vec<String>| ts.into_iter().map(|t| t.to_lowercase()).collect();
        Self {
            candidates: candidates.into_iter().map(|(k, v)| (k, lower(v))).collect(),
            references: references
                .into_iter()
                .map(|(k, refs)| (k, refs.into_iter().map(lower).collect()))
                .collect(),
        }
    }

    /// Build from raw caption strings.
    pub fn from_text<'a>(
        candidates: impl IntoIterator<Item = (&'a str, &'a str)>,
        references: impl IntoIterator<Item = (&'a str, Vec<&'a str>)>,
    ) -> Self {
        Self {
            candidates: candidates
                .into_iter()
                .map(|(id, c)| (id.to_string(), caption_tokens(c)))
                .collect(),
            references: references
                .into_iter()
                .map(|(id, refs)| {
                    (
                        id.to_string(),
                        refs.into_iter().map(caption_tokens).collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Candidate captions in image-id order.
    pub fn candidate_list(&self) -> Vec<Vec<String>> {
        self.candidates.values().cloned().collect()
    }

    /// Pairs of (candidate, references) for accuracy metrics; every candidate
    /// must have at least one reference.
    pub(crate) fn pairs(&self) -> Result<Vec<(&str, &[String], &[Vec<String>])>> {
        if self.candidates.is_empty() {
            return Err(Error::Invalid("no candidate captions".into()));
        }
        self.candidates
            .iter()
            .map(|(id, cand)| match self.references.get(id) {
                Some(refs) if !refs.is_empty() => Ok((id.as_str(), &cand[..], &refs[..])),
                _ => Err(Error::Invalid(format!(
                    "image `{id}` has no reference captions"
                ))),
            })
            .collect()
    }
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_references_are_rejected() {
        let set = CaptionSet::from_text([("a", "nice shot")], [("b", vec!["x"])]);
        assert!(set.pairs().is_err());
        let set = CaptionSet::from_text([("a", "nice shot")], [("a", vec![])]);
        assert!(set.pairs().is_err());
        assert!(CaptionSet::default().pairs().is_err());
    }

    #[test]
    fn caption_tokens_lowercase_and_split() {
        assert_eq!(caption_tokens("Nice, SHOT!"), vec!["nice", "shot"]);
    }
}
