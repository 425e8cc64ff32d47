//! Informativeness score and keep/discard filtering of comments.
//!
//! A comment's score is the negative half-sum of the log corpus
//! probabilities of its admissible unigrams and bigrams. Comments built
//! from frequent n-grams ("nice shot") score low; rare descriptor-object
//! pairs push the score up.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ngram::{extract_ngrams, Vocabulary};
use crate::text::TaggedToken;

pub const DEFAULT_THRESHOLD: f64 = 20.0;

/// Width of the score histogram bins in [`FilterStats`].
pub const HISTOGRAM_BIN_WIDTH: f64 = 1.0;
/// Upper end of the binned score range; larger scores land in the overflow bin.
pub const HISTOGRAM_MAX: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub threshold: f64,
    /// Logarithm base; natural log by default.
    pub log_base: f64,
    pub min_comments_per_image: usize,
    /// Score against a vocabulary counted from another corpus (warns instead
    /// of failing).
    pub allow_cross_corpus: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            log_base: std::f64::consts::E,
            min_comments_per_image: 1,
            allow_cross_corpus: false,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(Error::Config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if !(self.log_base > 1.0) || !self.log_base.is_finite() {
            return Err(Error::Config(format!(
                "log base must be greater than 1, got {}",
                self.log_base
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreDetail {
    pub score: f64,
    pub n_unigrams: usize,
    pub n_bigrams: usize,
}

/// Natural-log informativeness score of a tagged comment.
pub fn score_comment(tokens: &[TaggedToken], vocab: &Vocabulary) -> f64 {
    score_comment_with(tokens, vocab, std::f64::consts::E).score
}

pub fn score_comment_with(
    tokens: &[TaggedToken],
    vocab: &Vocabulary,
    log_base: f64,
) -> ScoreDetail {
    let mut n_unigrams = 0;
    let mut n_bigrams = 0;
    let probs = extract_ngrams(tokens).into_iter().map(|ex| {
        if ex.ngram.order() == 1 {
            n_unigrams += 1;
        } else {
            n_bigrams += 1;
        }
        vocab.corpus_probability(&ex.ngram)
    });
    let score = score_from_probabilities(probs, log_base);
    ScoreDetail {
        score,
        n_unigrams,
        n_bigrams,
    }
}

/// `-1/2 * sum(log P)` over a comment's n-gram probabilities. An empty
/// sequence scores exactly 0.
pub fn score_from_probabilities(probs: impl IntoIterator<Item = f64>, log_base: f64) -> f64 {
    let log_sum: f64 = probs.into_iter().map(f64::ln).sum();
    let score = -0.5 * log_sum / log_base.ln();
    // avoid -0.0
    if score == 0.0 {
        0.0
    } else {
        score
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub image_id: String,
    pub comment_id: String,
    pub score: f64,
    pub kept: bool,
    pub n_unigrams: usize,
    pub n_bigrams: usize,
}

impl FilterDecision {
    /// Re-apply a threshold to an already scored decision.
    pub fn with_threshold(&self, threshold: f64) -> FilterDecision {
        FilterDecision {
            kept: self.score >= threshold,
            ..self.clone()
        }
    }
}

/// Score every comment and keep those with score at or above the threshold.
/// Decisions are ordered by `(image_id, comment_id)`.
pub fn filter_corpus(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &FilterConfig,
) -> Result<Vec<FilterDecision>> {
    config.validate()?;
    let corpus_hash = corpus.content_hash();
    if corpus_hash != vocab.corpus_hash() {
        if config.allow_cross_corpus {
            log::warn!(
                "scoring corpus {} against a vocabulary counted from corpus {}",
                &corpus_hash[..12],
                &vocab.corpus_hash()[..vocab.corpus_hash().len().min(12)]
            );
        } else {
            return Err(Error::HashMismatch {
                what: "vocabulary corpus".into(),
                expected: vocab.corpus_hash().into(),
                actual: corpus_hash,
            });
        }
    }

    let pairs: Vec<_> = corpus.comments().collect();
    let mut decisions: Vec<FilterDecision> = pairs
        .par_iter()
        .map(|(img, c)| {
            let detail = score_comment_with(&c.tokens, vocab, config.log_base);
            FilterDecision {
                image_id: img.image_id.clone(),
                comment_id: c.comment_id.clone(),
                score: detail.score,
                kept: detail.score >= config.threshold,
                n_unigrams: detail.n_unigrams,
                n_bigrams: detail.n_bigrams,
            }
        })
        .collect();
    decisions.sort_by(|a, b| {
        (a.image_id.as_str(), a.comment_id.as_str())
            .cmp(&(b.image_id.as_str(), b.comment_id.as_str()))
    });
    Ok(decisions)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub comments: usize,
    pub kept: usize,
    pub discard_fraction: f64,
    pub images: usize,
    pub surviving_images: usize,
    /// Mean and population standard deviation of kept comments over
    /// surviving images.
    pub mean_kept_per_image: f64,
    pub sd_kept_per_image: f64,
    /// Unit-width bins over [0, 100); the last bin collects scores >= 100.
    pub histogram: Vec<u64>,
}

pub fn filter_stats(decisions: &[FilterDecision]) -> FilterStats {
    let n_bins = (HISTOGRAM_MAX / HISTOGRAM_BIN_WIDTH) as usize;
    let mut histogram = vec![0u64; n_bins + 1];
    let mut per_image: std::collections::BTreeMap<&str, usize> = Default::default();
    let mut kept = 0;
    for d in decisions {
        let bin = if d.score >= HISTOGRAM_MAX {
            n_bins
        } else {
            ((d.score.max(0.0)) / HISTOGRAM_BIN_WIDTH) as usize
        };
        histogram[bin] += 1;
        let slot = per_image.entry(d.image_id.as_str()).or_default();
        if d.kept {
            *slot += 1;
            kept += 1;
        }
    }
    let surviving: Vec<f64> = per_image
        .values()
        .filter(|&&k| k > 0)
        .map(|&k| k as f64)
        .collect();
    let (mean, sd) = if surviving.is_empty() {
        (0.0, 0.0)
    } else {
        let n = surviving.len() as f64;
        let mean = surviving.iter().sum::<f64>() / n;
        let var = surviving.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    FilterStats {
        comments: decisions.len(),
        kept,
        discard_fraction: if decisions.is_empty() {
            0.0
        } else {
            (decisions.len() - kept) as f64 / decisions.len() as f64
        },
        images: per_image.len(),
        surviving_images: surviving.len(),
        mean_kept_per_image: mean,
        sd_kept_per_image: sd,
        histogram,
    }
}
