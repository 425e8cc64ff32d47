//! Noun unigrams, descriptor-object bigrams and their corpus probabilities.
//!
//! A unigram is admitted when its tag is NOUN. A bigram is admitted when its
//! first token is a NOUN, ADJ or ADV and its second a NOUN or ADJ. Each
//! admitted n-gram gets probability `C_w / sum_i C_i`, pooled over unigrams
//! and bigrams by default.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::text::{Tag, TaggedToken};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NGram {
    Unigram(String),
    Bigram(String, String),
}

impl NGram {
    pub fn unigram(w: impl Into<String>) -> Self {
        NGram::Unigram(w.into())
    }

    pub fn bigram(a: impl Into<String>, b: impl Into<String>) -> Self {
        NGram::Bigram(a.into(), b.into())
    }

    pub fn order(&self) -> u8 {
        match self {
            NGram::Unigram(_) => 1,
            NGram::Bigram(..) => 2,
        }
    }

    pub fn terms(&self) -> Vec<&str> {
        match self {
            NGram::Unigram(a) => vec![a],
            NGram::Bigram(a, b) => vec![a, b],
        }
    }

    /// Inverse of `Display`: space-separated terms whose count must match
    /// `order`.
    pub fn parse(text: &str, order: u8) -> Result<Self> {
        let parts: Vec<&str> = text.split(' ').collect();
        match (order, parts.as_slice()) {
            (1, [a]) if !a.is_empty() => Ok(NGram::unigram(*a)),
            (2, [a, b]) if !a.is_empty() && !b.is_empty() => Ok(NGram::bigram(*a, *b)),
            _ => Err(Error::format(
                "n-gram",
                format!("{order} space-separated term(s)"),
                format!("`{text}`"),
            )),
        }
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NGram::Unigram(a) => f.write_str(a),
            NGram::Bigram(a, b) => write!(f, "{a} {b}"),
        }
    }
}

/// Tag pattern that admitted an n-gram, e.g. `NOUN` or `ADJ+NOUN`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub first: Tag,
    pub second: Option<Tag>,
}

impl Pattern {
    pub fn is_admissible(&self) -> bool {
        match self.second {
            None => self.first == Tag::Noun,
            Some(second) => is_descriptor(self.first) && is_object(second),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.second {
            None => write!(f, "{}", self.first),
            Some(s) => write!(f, "{}+{}", self.first, s),
        }
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let pattern = match s.split_once('+') {
            None => Pattern {
                first: s.parse()?,
                second: None,
            },
            Some((a, b)) => Pattern {
                first: a.parse()?,
                second: Some(b.parse()?),
            },
        };
        if !pattern.is_admissible() {
            return Err(Error::format("pattern", "admissible tag pattern", s));
        }
        Ok(pattern)
    }
}

fn is_descriptor(tag: Tag) -> bool {
    matches!(tag, Tag::Noun | Tag::Adj | Tag::Adv)
}

fn is_object(tag: Tag) -> bool {
    matches!(tag, Tag::Noun | Tag::Adj)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extracted {
    pub ngram: NGram,
    pub pattern: Pattern,
}

/// Every admissible n-gram of a tagged comment, ordered by start position
/// (a unigram before the bigram starting at the same token). Duplicates are
/// kept.
pub fn extract_ngrams(tokens: &[TaggedToken]) -> Vec<Extracted> {
    let mut out = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if tok.tag == Tag::Noun {
            out.push(Extracted {
                ngram: NGram::unigram(tok.surface.clone()),
                pattern: Pattern {
                    first: Tag::Noun,
                    second: None,
                },
            });
        }
        if let Some(next) = tokens.get(i + 1) {
            if is_descriptor(tok.tag) && is_object(next.tag) {
                out.push(Extracted {
                    ngram: NGram::bigram(tok.surface.clone(), next.surface.clone()),
                    pattern: Pattern {
                        first: tok.tag,
                        second: Some(next.tag),
                    },
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// One probability simplex over unigrams and bigrams together.
    #[default]
    Pooled,
    /// Unigrams and bigrams each normalized within their own order.
    PerOrder,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Pooled => "pooled",
            Normalization::PerOrder => "per-order",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Normalization::Pooled),
            "per-order" => Ok(Normalization::PerOrder),
            other => Err(Error::format("normalization", "pooled|per-order", other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VocabEntry {
    pub pattern: Pattern,
    /// Occurrences across all comments.
    pub corpus_freq: u64,
    /// Number of comments containing the n-gram at least once.
    pub doc_freq: u64,
    pub prob: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Count {
    pattern: Option<Pattern>,
    corpus_freq: u64,
    doc_freq: u64,
}

/// Mergeable n-gram counts. Merging is commutative and associative, so any
/// sharding of the comments produces the same totals.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NGramCounts {
    counts: HashMap<NGram, Count>,
    comments: u64,
}

impl NGramCounts {
    pub fn add_comment(&mut self, tokens: &[TaggedToken]) {
        self.comments += 1;
        let mut seen = HashSet::new();
        for ex in extract_ngrams(tokens) {
            let first = seen.insert(ex.ngram.clone());
            let c = self.counts.entry(ex.ngram).or_default();
            c.corpus_freq += 1;
            if first {
                c.doc_freq += 1;
            }
            // Context-free taggers always agree; for supplied tags keep the
            // smallest pattern seen so the result is order-independent.
            c.pattern = Some(c.pattern.map_or(ex.pattern, |p| p.min(ex.pattern)));
        }
    }

    pub fn merge(mut self, other: NGramCounts) -> NGramCounts {
        self.comments += other.comments;
        for (ngram, c) in other.counts {
            let slot = self.counts.entry(ngram).or_default();
            slot.corpus_freq += c.corpus_freq;
            slot.doc_freq += c.doc_freq;
            slot.pattern = match (slot.pattern, c.pattern) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
        self
    }

    pub fn finish(self, normalization: Normalization, corpus_hash: String) -> Result<Vocabulary> {
        if self.counts.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut order_totals = [0u64; 2];
        for (ngram, c) in &self.counts {
            order_totals[ngram.order() as usize - 1] += c.corpus_freq;
        }
        let total: u64 = order_totals.iter().sum();
        let entries = self
            .counts
            .into_iter()
            .map(|(ngram, c)| {
                let denom = match normalization {
                    Normalization::Pooled => total,
                    Normalization::PerOrder => order_totals[ngram.order() as usize - 1],
                };
                let entry = VocabEntry {
                    pattern: c.pattern.expect("counted n-gram has a pattern"),
                    corpus_freq: c.corpus_freq,
                    doc_freq: c.doc_freq,
                    prob: c.corpus_freq as f64 / denom as f64,
                };
                (ngram, entry)
            })
            .collect();
        Ok(Vocabulary {
            entries,
            total_count: total,
            normalization,
            corpus_hash,
            num_comments: self.comments,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    entries: BTreeMap<NGram, VocabEntry>,
    total_count: u64,
    normalization: Normalization,
    corpus_hash: String,
    num_comments: u64,
}

pub fn build_vocabulary(corpus: &Corpus) -> Result<Vocabulary> {
    build_vocabulary_with(corpus, Normalization::Pooled)
}

pub fn build_vocabulary_with(corpus: &Corpus, normalization: Normalization) -> Result<Vocabulary> {
    let comments: Vec<&[TaggedToken]> = corpus.comments().map(|(_, c)| &c.tokens[..]).collect();
    let counts = comments
        .par_iter()
        .fold(NGramCounts::default, |mut acc, tokens| {
            acc.add_comment(tokens);
            acc
        })
        .reduce(NGramCounts::default, NGramCounts::merge);
    counts.finish(normalization, corpus.content_hash())
}

impl Vocabulary {
    /// Reassemble a vocabulary from stored entries, checking its invariants.
    pub fn from_parts(
        entries: BTreeMap<NGram, VocabEntry>,
        normalization: Normalization,
        corpus_hash: String,
        num_comments: u64,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut total = 0u64;
        for (ngram, e) in &entries {
            let pattern_order = if e.pattern.second.is_some() { 2 } else { 1 };
            if pattern_order != ngram.order() || !e.pattern.is_admissible() {
                return Err(Error::Invalid(format!(
                    "n-gram `{ngram}` has inconsistent pattern {}",
                    e.pattern
                )));
            }
            if e.doc_freq > e.corpus_freq || e.corpus_freq == 0 || !(e.prob > 0.0) {
                return Err(Error::Invalid(format!(
                    "n-gram `{ngram}` has invalid counts or probability"
                )));
            }
            total += e.corpus_freq;
        }
        Ok(Self {
            entries,
            total_count: total,
            normalization,
            corpus_hash,
            num_comments,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn corpus_hash(&self) -> &str {
        &self.corpus_hash
    }

    /// Comments counted when building (the doc-frequency denominator).
    pub fn num_comments(&self) -> u64 {
        self.num_comments
    }

    pub fn get(&self, ngram: &NGram) -> Option<&VocabEntry> {
        self.entries.get(ngram)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NGram, &VocabEntry)> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &BTreeMap<NGram, VocabEntry> {
        &self.entries
    }

    /// Probability assigned to n-grams never seen while counting:
    /// `1 / (total_count + D + 1)`, strictly below every stored probability.
    pub fn oov_floor(&self) -> f64 {
        1.0 / (self.total_count + self.entries.len() as u64 + 1) as f64
    }

    pub fn corpus_probability(&self, ngram: &NGram) -> f64 {
        self.entries
            .get(ngram)
            .map_or_else(|| self.oov_floor(), |e| e.prob)
    }

    pub fn probability_sum(&self) -> f64 {
        self.entries.values().map(|e| e.prob).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Comment, ImageEntry};
    use proptest::prelude::*;

    fn tt(s: &str, tag: Tag) -> TaggedToken {
        TaggedToken::new(s, tag)
    }

    fn corpus_of(comments: Vec<Vec<TaggedToken>>) -> Corpus {
        let images = comments
            .into_iter()
            .enumerate()
            .map(|(i, toks)| ImageEntry {
                image_id: format!("img{i:03}"),
                comments: vec![Comment::new("c", "x").with_tokens(toks)],
            })
            .collect();
        Corpus::new(images).unwrap()
    }

    #[test]
    fn extracts_descriptor_object_patterns() {
        let toks = [
            tt("the", Tag::Other),
            tt("soft", Tag::Adj),
            tt("water", Tag::Noun),
        ];
        let got: Vec<NGram> = extract_ngrams(&toks).into_iter().map(|e| e.ngram).collect();
        assert_eq!(
            got,
            vec![NGram::bigram("soft", "water"), NGram::unigram("water")]
        );

        let toks = [
            tt("great", Tag::Adj),
            tt("shot", Tag::Noun),
            tt("great", Tag::Adj),
            tt("shot", Tag::Noun),
        ];
        let got = extract_ngrams(&toks);
        let shots = got
            .iter()
            .filter(|e| e.ngram == NGram::unigram("shot"))
            .count();
        let pairs = got
            .iter()
            .filter(|e| e.ngram == NGram::bigram("great", "shot"))
            .count();
        assert_eq!((shots, pairs), (2, 2));
        // "shot great" is NOUN+ADJ, also admissible
        assert_eq!(got.len(), 5);

        assert!(extract_ngrams(&[tt("run", Tag::Verb), tt("fast", Tag::Adv)]).is_empty());
        assert!(extract_ngrams(&[tt("fast", Tag::Adv), tt("run", Tag::Verb)]).is_empty());
    }

    #[test]
    fn pooled_probabilities() {
        let water = vec![tt("water", Tag::Noun)];
        let nice_colors = vec![tt("nice", Tag::Adj), tt("colors", Tag::Adj)];
        let corpus = corpus_of(vec![water.clone(), water.clone(), water, nice_colors]);
        let v = build_vocabulary(&corpus).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.corpus_probability(&NGram::unigram("water")), 0.75);
        assert_eq!(v.corpus_probability(&NGram::bigram("nice", "colors")), 0.25);
        assert_eq!(v.total_count(), 4);
        assert_eq!(v.oov_floor(), 1.0 / 7.0);
        assert_eq!(v.corpus_probability(&NGram::unigram("sky")), 1.0 / 7.0);
    }

    #[test]
    fn single_ngram_has_probability_one() {
        let v = build_vocabulary(&corpus_of(vec![vec![tt("sky", Tag::Noun)]])).unwrap();
        assert_eq!(v.corpus_probability(&NGram::unigram("sky")), 1.0);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let corpus = corpus_of(vec![vec![tt("is", Tag::Verb)]]);
        assert!(matches!(
            build_vocabulary(&corpus),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn per_order_normalization_sums_to_one_per_order() {
        let corpus = corpus_of(vec![vec![
            tt("soft", Tag::Adj),
            tt("water", Tag::Noun),
            tt("sky", Tag::Noun),
        ]]);
        let v = build_vocabulary_with(&corpus, Normalization::PerOrder).unwrap();
        let uni: f64 = v
            .iter()
            .filter(|(n, _)| n.order() == 1)
            .map(|(_, e)| e.prob)
            .sum();
        let bi: f64 = v
            .iter()
            .filter(|(n, _)| n.order() == 2)
            .map(|(_, e)| e.prob)
            .sum();
        assert!((uni - 1.0).abs() < 1e-12 && (bi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doc_freq_counts_comments() {
        let c = vec![tt("sky", Tag::Noun), tt("sky", Tag::Noun)];
        let v = build_vocabulary(&corpus_of(vec![c.clone(), c])).unwrap();
        let e = v.get(&NGram::unigram("sky")).unwrap();
        assert_eq!((e.corpus_freq, e.doc_freq), (4, 2));
    }

    #[test]
    fn parse_round_trips_display() {
        for g in [NGram::unigram("sky"), NGram::bigram("post", "processing")] {
            assert_eq!(NGram::parse(&g.to_string(), g.order()).unwrap(), g);
        }
        assert!(NGram::parse("a b", 1).is_err());
        assert!("ADV+NOUN".parse::<Pattern>().is_ok());
        assert!("NOUN+ADV".parse::<Pattern>().is_err());
        assert!("ADJ".parse::<Pattern>().is_err());
    }

    fn arb_tag() -> impl Strategy<Value = Tag> {
        prop_oneof![
            Just(Tag::Noun),
            Just(Tag::Adj),
            Just(Tag::Adv),
            Just(Tag::Verb),
            Just(Tag::Other)
        ]
    }

    fn arb_comment() -> impl Strategy<Value = Vec<TaggedToken>> {
        proptest::collection::vec(
            ("[a-e]{1,2}", arb_tag()).prop_map(|(s, t)| TaggedToken::new(s, t)),
            0..12,
        )
    }

    proptest! {
        #[test]
        fn shard_invariance(comments in proptest::collection::vec(arb_comment(), 1..30), k in 1usize..6) {
            let mut single = NGramCounts::default();
            for c in &comments {
                single.add_comment(c);
            }
            let mut shards = vec![NGramCounts::default(); k];
            for (i, c) in comments.iter().enumerate() {
                shards[(i * 7 + 3) % k].add_comment(c);
            }
            let merged = shards.into_iter().rev().fold(NGramCounts::default(), NGramCounts::merge);
            prop_assert_eq!(merged, single);
        }

        #[test]
        fn vocabulary_invariants(comments in proptest::collection::vec(arb_comment(), 1..30)) {
            let corpus = corpus_of(comments);
            if let Ok(v) = build_vocabulary(&corpus) {
                prop_assert!((v.probability_sum() - 1.0).abs() < 1e-9);
                let total: u64 = v.iter().map(|(_, e)| e.corpus_freq).sum();
                prop_assert_eq!(total, v.total_count());
                let min_prob = v.iter().map(|(_, e)| e.prob).fold(f64::INFINITY, f64::min);
                prop_assert!(v.oov_floor() < min_prob);
                for (n, e) in v.iter() {
                    prop_assert!(e.prob > 0.0);
                    prop_assert!(e.doc_freq <= e.corpus_freq);
                    prop_assert!(e.pattern.is_admissible());
                    prop_assert_eq!(e.pattern.second.is_some(), n.order() == 2);
                }
                for (_, a) in v.iter() {
                    for (_, b) in v.iter() {
                        if a.corpus_freq > b.corpus_freq {
                            prop_assert!(a.prob > b.prob);
                        }
                    }
                }
            }
        }
    }
}
