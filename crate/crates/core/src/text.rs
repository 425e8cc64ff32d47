//! Web-text cleanup, tokenization and coarse part-of-speech tagging.
//!
//! The tagger is a lexicon lookup followed by a suffix rule table. It only
//! needs to separate nouns, adjectives and adverbs well enough for the
//! descriptor-object n-gram patterns, so five coarse tags are enough.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Longest token (in characters) kept by [`tokenize`].
pub const MAX_TOKEN_CHARS: usize = 30;

/// Fraction of alphabetic tokens that must be known English words for a
/// comment to pass the noise gate.
pub const ENGLISH_HIT_THRESHOLD: f64 = 0.20;

const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.tsv");
const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Noun,
    Adj,
    Adv,
    Verb,
    Other,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Noun => "NOUN",
            Tag::Adj => "ADJ",
            Tag::Adv => "ADV",
            Tag::Verb => "VERB",
            Tag::Other => "OTHER",
        }
    }

    /// Map a tag from an external tagger (Penn Treebank or Universal
    /// Dependencies style) onto the coarse tagset. Unknown tags become
    /// [`Tag::Other`].
    pub fn from_supplied(raw: &str) -> Tag {
        let upper = raw.trim().to_ascii_uppercase();
        match upper.as_str() {
            "NOUN" | "PROPN" | "N" => Tag::Noun,
            "ADJ" | "A" => Tag::Adj,
            "ADV" => Tag::Adv,
            "VERB" | "V" => Tag::Verb,
            "OTHER" => Tag::Other,
            s if s.starts_with("NN") => Tag::Noun,
            s if s.starts_with("JJ") => Tag::Adj,
            s if s.starts_with("RB") => Tag::Adv,
            s if s.starts_with("VB") => Tag::Verb,
            _ => Tag::Other,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NOUN" => Ok(Tag::Noun),
            "ADJ" => Ok(Tag::Adj),
            "ADV" => Ok(Tag::Adv),
            "VERB" => Ok(Tag::Verb),
            "OTHER" => Ok(Tag::Other),
            other => Err(Error::format("tag", "NOUN|ADJ|ADV|VERB|OTHER", other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub tag: Tag,
}

impl TaggedToken {
    pub fn new(surface: impl Into<String>, tag: Tag) -> Self {
        Self {
            surface: surface.into(),
            tag,
        }
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '…' | '–' | '—' | '‘' | '’' | '“' | '”' | '«' | '»' | '¡' | '¿' | '·' | '•'
        )
}

fn normalize_pass(raw: &str) -> String {
    let decoded = html_escape::decode_html_entities(raw);
    let folded: String = decoded.nfkc().collect::<String>().to_lowercase();

    let mut out = String::with_capacity(folded.len());
    let mut prev: Option<char> = None;
    let mut prev2: Option<char> = None;
    for c in folded.chars() {
        let c = if c.is_whitespace() { ' ' } else { c };
        if c == ' ' {
            if out.is_empty() || prev == Some(' ') {
                continue;
            }
        } else if is_punct(c) {
            if prev.is_some_and(is_punct) {
                continue;
            }
        } else if prev == Some(c) && prev2 == Some(c) {
            continue;
        }
        out.push(c);
        prev2 = prev;
        prev = Some(c);
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Clean generic web-text noise.
///
/// Decodes HTML entities, applies NFKC and lowercasing, squeezes whitespace,
/// collapses runs of one character longer than two down to two, and collapses
/// runs of punctuation to their first mark. The result is a fixed point:
/// normalizing it again changes nothing.
pub fn normalize_text(raw: &str) -> String {
    let mut current = normalize_pass(raw);
    // Entity decoding can expose new entities ("&amp;lt;"), so iterate.
    for _ in 0..8 {
        let next = normalize_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '’')
}

/// Split normalized text into word tokens.
///
/// Alphanumeric runs form tokens; a hyphen or apostrophe is kept only when it
/// sits between two alphanumeric characters. Tokens over
/// [`MAX_TOKEN_CHARS`] characters are dropped.
pub fn tokenize(normalized: &str) -> Vec<String> {
    let chars: Vec<char> = normalized.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut push = |current: &mut String| {
        if !current.is_empty() {
            if current.chars().count() <= MAX_TOKEN_CHARS {
                tokens.push(std::mem::take(current));
            } else {
                current.clear();
            }
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        let inner_joiner = is_joiner(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || inner_joiner {
            current.push(c);
        } else {
            push(&mut current);
        }
    }
    push(&mut current);
    tokens
}

/// A token counts as alphabetic when it has at least one letter and nothing
/// but letters, hyphens and apostrophes.
pub fn is_alphabetic_token(token: &str) -> bool {
    token.chars().any(char::is_alphabetic)
        && token.chars().all(|c| c.is_alphabetic() || is_joiner(c))
}

const SUFFIX_RULES: &[(&str, Tag)] = &[
    ("ness", Tag::Noun),
    ("tion", Tag::Noun),
    ("sion", Tag::Noun),
    ("ment", Tag::Noun),
    ("ship", Tag::Noun),
    ("ity", Tag::Noun),
    ("ing", Tag::Noun),
    ("able", Tag::Adj),
    ("ible", Tag::Adj),
    ("less", Tag::Adj),
    ("ful", Tag::Adj),
    ("ous", Tag::Adj),
    ("ive", Tag::Adj),
    ("ish", Tag::Adj),
    ("ly", Tag::Adv),
];

/// Minimum stem length left after stripping a suffix for the rule to fire.
const MIN_STEM: usize = 2;

/// Lexicon-and-suffix part-of-speech tagger plus the English word list used by
/// the noise gate.
#[derive(Clone, Debug)]
pub struct Tagger {
    lexicon: HashMap<String, Tag>,
    stopwords: HashSet<String>,
    fingerprint: String,
}

impl Tagger {
    /// Tagger backed by the lexicon and stopword list shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON, BUILTIN_STOPWORDS).expect("shipped lexicon is well formed")
    }

    pub fn from_files(lexicon: &Path, stopwords: Option<&Path>) -> Result<Self> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|e| {
                Error::Config(format!("cannot read lexicon file {}: {e}", p.display()))
            })
        };
        let lex = read(lexicon)?;
        let stop = match stopwords {
            Some(p) => read(p)?,
            None => BUILTIN_STOPWORDS.to_string(),
        };
        Self::parse(&lex, &stop)
    }

    /// Parse a `word \t TAG` lexicon and a one-word-per-line stopword list.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(lexicon_tsv: &str, stopwords: &str) -> Result<Self> {
        let mut lexicon = HashMap::new();
        for (lineno, line) in lexicon_tsv.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line.split_once('\t').ok_or_else(|| {
                Error::Config(format!(
                    "lexicon line {}: expected `word<TAB>tag`",
                    lineno + 1
                ))
            })?;
            let tag: Tag = tag.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "lexicon line {}: unknown tag `{}`",
                    lineno + 1,
                    tag.trim()
                ))
            })?;
            lexicon.insert(word.trim().to_lowercase(), tag);
        }
        let stopwords: HashSet<String> = stopwords
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();

        let mut hasher = Sha256::new();
        let mut entries: Vec<_> = lexicon.iter().collect();
        entries.sort();
        for (w, t) in entries {
            hasher.update(w.as_bytes());
            hasher.update([0]);
            hasher.update(t.as_str().as_bytes());
            hasher.update([b'\n']);
        }
        let mut stops: Vec<_> = stopwords.iter().collect();
        stops.sort();
        for s in stops {
            hasher.update(s.as_bytes());
            hasher.update([b'\n']);
        }
        let fingerprint = hex::encode(hasher.finalize());

        Ok(Self {
            lexicon,
            stopwords,
            fingerprint,
        })
    }

    /// Content hash of the lexicon and stopword list.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn lexicon_len(&self) -> usize {
        self.lexicon.len()
    }

    /// Whether `word` is a known English word (lexicon entry or stopword).
    pub fn is_english(&self, word: &str) -> bool {
        self.lexicon.contains_key(word) || self.stopwords.contains(word)
    }

    pub fn tag(&self, token: &str) -> Tag {
        if let Some(&tag) = self.lexicon.get(token) {
            return tag;
        }
        if self.stopwords.contains(token) {
            return Tag::Other;
        }
        if !is_alphabetic_token(token) {
            return Tag::Other;
        }
        let len = token.chars().count();
        for &(suffix, tag) in SUFFIX_RULES {
            if token.ends_with(suffix) && len >= suffix.len() + MIN_STEM {
                return tag;
            }
        }
        Tag::Noun
    }

    pub fn pos_tag(&self, tokens: &[String]) -> Vec<TaggedToken> {
        tokens
            .iter()
            .map(|t| TaggedToken::new(t.clone(), self.tag(t)))
            .collect()
    }

    /// Noise gate for non-English or empty comments: rejects when no
    /// alphabetic token remains or when fewer than
    /// [`ENGLISH_HIT_THRESHOLD`] of them are known English words.
    pub fn is_noise_comment(&self, tokens: &[String]) -> bool {
        let mut alpha = 0usize;
        let mut hits = 0usize;
        for t in tokens.iter().filter(|t| is_alphabetic_token(t)) {
            alpha += 1;
            if self.is_english(t) {
                hits += 1;
            }
        }
        alpha == 0 || (hits as f64) < ENGLISH_HIT_THRESHOLD * alpha as f64
    }

    /// Normalize, tokenize and tag raw comment text.
    pub fn analyze(&self, raw: &str) -> Vec<TaggedToken> {
        self.pos_tag(&tokenize(&normalize_text(raw)))
    }
}
