//! Image-comment corpora: JSON-lines ingestion, cleanup and filtered output.
//!
//! One line per image:
//!
//! ```json
//! {"image_id": "1001", "comments": [{"id": "c1", "text": "Nice shot"}]}
//! ```
//!
//! Pre-tagged corpora additionally carry `tokens` and a parallel `tags` array
//! on every comment. Images are always held sorted by `image_id`.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::informativeness::FilterDecision;
use crate::text::{Tag, TaggedToken, Tagger};

#[derive(Clone, Debug, PartialEq)]
pub struct Comment {
    pub comment_id: String,
    pub raw_text: String,
    pub tokens: Vec<TaggedToken>,
    pub score: Option<f64>,
    pub kept: Option<bool>,
}

impl Comment {
    pub fn new(comment_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self {
            comment_id: comment_id.into(),
            raw_text: raw_text.into(),
            tokens: Vec::new(),
            score: None,
            kept: None,
        }
    }

    pub fn with_tokens(mut self, tokens: Vec<TaggedToken>) -> Self {
        self.tokens = tokens;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageEntry {
    pub image_id: String,
    pub comments: Vec<Comment>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub config_hash: Option<String>,
    pub created_unix: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    images: Vec<ImageEntry>,
    /// Whether comment tokens came from the input file rather than the tagger.
    pub pre_tagged: bool,
    pub provenance: Provenance,
}

impl Corpus {
    /// Build a corpus, sorting images by id. Duplicate image ids are rejected.
    pub fn new(mut images: Vec<ImageEntry>) -> Result<Self> {
        images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        for pair in images.windows(2) {
            if pair[0].image_id == pair[1].image_id {
                return Err(Error::Invalid(format!(
                    "duplicate image_id `{}`",
                    pair[0].image_id
                )));
            }
        }
        for image in &images {
            let mut seen = HashSet::new();
            for c in &image.comments {
                if !seen.insert(c.comment_id.as_str()) {
                    return Err(Error::Invalid(format!(
                        "duplicate comment id `{}` in image `{}`",
                        c.comment_id, image.image_id
                    )));
                }
            }
        }
        Ok(Self {
            images,
            pre_tagged: false,
            provenance: Provenance::default(),
        })
    }

    pub fn images(&self) -> &[ImageEntry] {
        &self.images
    }

    pub fn num_images(&self) -> usize {
        self.images.len()
    }

    pub fn num_comments(&self) -> usize {
        self.images.iter().map(|i| i.comments.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn comments(&self) -> impl Iterator<Item = (&ImageEntry, &Comment)> {
        self.images
            .iter()
            .flat_map(|img| img.comments.iter().map(move |c| (img, c)))
    }

    /// Hash of image ids, comment ids and tagged tokens. Vocabularies record
    /// the hash of the corpus they were counted from.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for img in &self.images {
            h.update(img.image_id.as_bytes());
            h.update([0]);
            for c in &img.comments {
                h.update(c.comment_id.as_bytes());
                h.update([0]);
                for t in &c.tokens {
                    h.update(t.surface.as_bytes());
                    h.update([b'/']);
                    h.update(t.tag.as_str().as_bytes());
                    h.update([b' ']);
                }
                h.update([b'\n']);
            }
            h.update([1]);
        }
        hex::encode(h.finalize())
    }

    /// Tokenize and tag every comment (unless pre-tagged) and drop comments
    /// rejected by the noise gate. Images left without comments are removed.
    pub fn clean(self, tagger: &Tagger) -> (Corpus, CleanReport) {
        let pre_tagged = self.pre_tagged;
        let provenance = self.provenance;
        let comments_in = self.images.iter().map(|i| i.comments.len()).sum();
        let images_in = self.images.len();

        let images: Vec<ImageEntry> = self
            .images
            .into_par_iter()
            .filter_map(|mut img| {
                img.comments = std::mem::take(&mut img.comments)
                    .into_iter()
                    .filter_map(|mut c| {
                        if !pre_tagged {
                            c.tokens = tagger.analyze(&c.raw_text);
                        }
                        let surfaces: Vec<String> =
                            c.tokens.iter().map(|t| t.surface.clone()).collect();
                        (!tagger.is_noise_comment(&surfaces)).then_some(c)
                    })
                    .collect();
                (!img.comments.is_empty()).then_some(img)
            })
            .collect();

        let corpus = Corpus {
            images,
            pre_tagged: true,
            provenance,
        };
        let report = CleanReport {
            images_in,
            images_out: corpus.num_images(),
            comments_in,
            comments_out: corpus.num_comments(),
        };
        (corpus, report)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub images_in: usize,
    pub images_out: usize,
    pub comments_in: usize,
    pub comments_out: usize,
}

impl CleanReport {
    pub fn noise_comments(&self) -> usize {
        self.comments_in - self.comments_out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadOptions {
    pub pre_tagged: bool,
    /// Loading fails when more than this fraction of lines is malformed.
    pub max_malformed_fraction: f64,
    /// The malformed-fraction limit is only enforced on files with at least
    /// this many non-blank lines; tiny files just report their bad lines.
    pub min_lines_for_limit: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            pre_tagged: false,
            max_malformed_fraction: 0.10,
            min_lines_for_limit: 20,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub total_lines: usize,
    /// 1-based line numbers of malformed lines.
    pub malformed_lines: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub report: LoadReport,
}

pub fn load_corpus(path: &Path, pre_tagged: bool) -> Result<LoadedCorpus> {
    load_corpus_with(
        path,
        LoadOptions {
            pre_tagged,
            ..LoadOptions::default()
        },
    )
}

pub fn load_corpus_with(path: &Path, opts: LoadOptions) -> Result<LoadedCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut loaded = parse_corpus(&text, opts)?;
    loaded.corpus.provenance.source = path.display().to_string();
    Ok(loaded)
}

/// Parse JSON-lines corpus text. Lines are parsed in parallel and merged in
/// line order, so the result does not depend on scheduling.
pub fn parse_corpus(text: &str, opts: LoadOptions) -> Result<LoadedCorpus> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();

    let parsed: Vec<(usize, Option<ImageEntry>)> = lines
        .par_iter()
        .map(|&(n, line)| (n, parse_line(line, opts.pre_tagged)))
        .collect();

    let mut malformed = Vec::new();
    let mut seen = HashSet::new();
    let mut images = Vec::new();
    for (n, entry) in parsed {
        match entry {
            Some(img) if seen.insert(img.image_id.clone()) => images.push(img),
            _ => malformed.push(n),
        }
    }

    let total = lines.len();
    if total >= opts.min_lines_for_limit
        && malformed.len() as f64 > opts.max_malformed_fraction * total as f64
    {
        return Err(Error::TooManyMalformed {
            malformed: malformed.len(),
            total,
            limit: opts.max_malformed_fraction * 100.0,
            lines: malformed.iter().take(20).copied().collect(),
        });
    }
    if total == 0 {
        log::warn!("corpus is empty");
    }
    if !malformed.is_empty() {
        log::warn!(
            "{} of {} lines malformed; first: {:?}",
            malformed.len(),
            total,
            &malformed[..malformed.len().min(20)]
        );
    }

    let mut corpus = Corpus::new(images)?;
    corpus.pre_tagged = opts.pre_tagged;
    corpus.provenance.created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(LoadedCorpus {
        corpus,
        report: LoadReport {
            total_lines: total,
            malformed_lines: malformed,
        },
    })
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_line(line: &str, pre_tagged: bool) -> Option<ImageEntry> {
    let value: Value = serde_json::from_str(line).ok()?;
    let image_id = id_string(value.get("image_id")?)?;
    let raw_comments = value.get("comments")?.as_array()?;

    let mut ids = HashSet::new();
    let mut comments = Vec::with_capacity(raw_comments.len());
    for rc in raw_comments {
        let id = id_string(rc.get("id")?)?;
        let text = rc.get("text")?.as_str()?;
        if text.trim().is_empty() || !ids.insert(id.clone()) {
            return None;
        }
        let mut comment = Comment::new(id, text);
        if pre_tagged {
            let tokens = rc.get("tokens")?.as_array()?;
            let tags = rc.get("tags")?.as_array()?;
            if tokens.len() != tags.len() {
                return None;
            }
            for (tok, tag) in tokens.iter().zip(tags) {
                let surface = tok.as_str()?.trim().to_lowercase();
                if surface.is_empty() || surface.chars().any(char::is_whitespace) {
                    return None;
                }
                comment
                    .tokens
                    .push(TaggedToken::new(surface, Tag::from_supplied(tag.as_str()?)));
            }
        }
        comments.push(comment);
    }
    Some(ImageEntry { image_id, comments })
}

#[derive(Serialize)]
struct CommentRecord<'a> {
    id: &'a str,
    text: &'a str,
    tokens: Vec<&'a str>,
    tags: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Serialize)]
struct ImageRecord<'a> {
    image_id: &'a str,
    comments: Vec<CommentRecord<'a>>,
}

/// Write a tagged corpus as JSON-lines, including `tokens` and `tags` so it
/// can be reloaded with `pre_tagged = true`.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for img in corpus.images() {
        let record = ImageRecord {
            image_id: &img.image_id,
            comments: img
                .comments
                .iter()
                .map(|c| CommentRecord {
                    id: &c.comment_id,
                    text: &c.raw_text,
                    tokens: c.tokens.iter().map(|t| t.surface.as_str()).collect(),
                    tags: c.tokens.iter().map(|t| t.tag.as_str()).collect(),
                    score: c.score,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub images_in: usize,
    pub images_out: usize,
    pub comments_in: usize,
    pub comments_out: usize,
    pub mean_kept_per_image: f64,
}

/// Keep only comments with a `kept` decision and prune images left with fewer
/// than `min_comments` (at least one) kept comments.
pub fn apply_decisions(
    corpus: &Corpus,
    decisions: &[FilterDecision],
    min_comments: usize,
) -> Result<(Corpus, FilterSummary)> {
    let by_key: HashMap<(&str, &str), &FilterDecision> = decisions
        .iter()
        .map(|d| ((d.image_id.as_str(), d.comment_id.as_str()), d))
        .collect();
    let min_comments = min_comments.max(1);

    let mut images = Vec::new();
    for img in corpus.images() {
        let mut kept = Vec::new();
        for c in &img.comments {
            let d = by_key
                .get(&(img.image_id.as_str(), c.comment_id.as_str()))
                .ok_or_else(|| Error::MissingDecision {
                    image_id: img.image_id.clone(),
                    comment_id: c.comment_id.clone(),
                })?;
            if d.kept {
                let mut c = c.clone();
                c.score = Some(d.score);
                c.kept = Some(true);
                kept.push(c);
            }
        }
        if kept.len() >= min_comments {
            images.push(ImageEntry {
                image_id: img.image_id.clone(),
                comments: kept,
            });
        }
    }

    let filtered = Corpus {
        images,
        pre_tagged: corpus.pre_tagged,
        provenance: corpus.provenance.clone(),
    };
    let images_out = filtered.num_images();
    let comments_out = filtered.num_comments();
    let summary = FilterSummary {
        images_in: corpus.num_images(),
        images_out,
        comments_in: corpus.num_comments(),
        comments_out,
        mean_kept_per_image: if images_out == 0 {
            0.0
        } else {
            comments_out as f64 / images_out as f64
        },
    };
    Ok((filtered, summary))
}

pub fn write_filtered_corpus(
    corpus: &Corpus,
    decisions: &[FilterDecision],
    min_comments: usize,
    path: &Path,
) -> Result<FilterSummary> {
    let (filtered, summary) = apply_decisions(corpus, decisions, min_comments)?;
    write_corpus(&filtered, path)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> LoadOptions {
        LoadOptions::default()
    }

    #[test]
    fn loads_two_images() {
        let text = r#"{"image_id":"b","comments":[{"id":"1","text":"nice water"},{"id":"2","text":"soft light"}]}
{"image_id":"a","comments":[{"id":"1","text":"great shot"}]}
"#;
        let loaded = parse_corpus(text, opts()).unwrap();
        assert_eq!(loaded.corpus.num_images(), 2);
        assert_eq!(loaded.corpus.num_comments(), 3);
        assert_eq!(loaded.corpus.images()[0].image_id, "a");
        assert!(loaded.report.malformed_lines.is_empty());
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let loaded = parse_corpus("", opts()).unwrap();
        assert!(loaded.corpus.is_empty());
        assert_eq!(loaded.report.total_lines, 0);
    }

    #[test]
    fn malformed_line_is_counted_and_skipped() {
        let text = r#"{"image_id":"a","comments":[{"id":"1","text":"x"}]}
{"comments":[{"id":"1","text":"missing image id"}]}
{"image_id":"c","comments":[{"id":"1","text":"y"}]}"#;
        let loaded = parse_corpus(text, opts()).unwrap();
        assert_eq!(loaded.corpus.num_images(), 2);
        assert_eq!(loaded.report.malformed_lines, vec![2]);
    }

    #[test]
    fn other_malformed_shapes() {
        let bad = [
            "not json",
            r#"{"image_id":"a"}"#,
            r#"{"image_id":"a","comments":[{"id":"1","text":"   "}]}"#,
            r#"{"image_id":"a","comments":[{"id":"1","text":"x"},{"id":"1","text":"y"}]}"#,
            r#"{"image_id":"a","comments":[{"text":"no id"}]}"#,
        ];
        for line in bad {
            let loaded = parse_corpus(line, opts()).unwrap();
            assert_eq!(loaded.report.malformed_lines, vec![1], "{line}");
        }
    }

    #[test]
    fn too_many_malformed_fails_with_line_numbers() {
        let mut text = String::new();
        for i in 0..30 {
            if i % 3 == 0 {
                text.push_str("garbage\n");
            } else {
                text.push_str(&format!(
                    "{{\"image_id\":\"{i}\",\"comments\":[{{\"id\":\"c\",\"text\":\"t\"}}]}}\n"
                ));
            }
        }
        match parse_corpus(&text, opts()) {
            Err(Error::TooManyMalformed {
                malformed, lines, ..
            }) => {
                assert_eq!(malformed, 10);
                assert_eq!(lines[..3], [1, 4, 7]);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn pre_tagged_requires_parallel_tags() {
        let good = r#"{"image_id":"a","comments":[{"id":"1","text":"Soft water","tokens":["Soft","water"],"tags":["JJ","NN"]}]}"#;
        let loaded = parse_corpus(
            good,
            LoadOptions {
                pre_tagged: true,
                ..opts()
            },
        )
        .unwrap();
        let toks = &loaded.corpus.images()[0].comments[0].tokens;
        assert_eq!(toks[0], TaggedToken::new("soft", Tag::Adj));
        assert_eq!(toks[1], TaggedToken::new("water", Tag::Noun));

        let bad = r#"{"image_id":"a","comments":[{"id":"1","text":"x","tokens":["a","b"],"tags":["NN"]}]}"#;
        let loaded = parse_corpus(
            bad,
            LoadOptions {
                pre_tagged: true,
                ..opts()
            },
        )
        .unwrap();
        assert_eq!(loaded.report.malformed_lines, vec![1]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_corpus(Path::new("/no/such/file.jsonl"), false).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn clean_drops_noise_comments() {
        let text = r#"{"image_id":"a","comments":[{"id":"1","text":"The colors are GREAT!!!"},{"id":"2","text":"xqzt vrkk plmn wqrt zzkq"}]}
{"image_id":"b","comments":[{"id":"1","text":"12345"}]}"#;
        let corpus = parse_corpus(text, opts()).unwrap().corpus;
        let (clean, report) = corpus.clean(&Tagger::builtin());
        assert_eq!(report.noise_comments(), 2);
        assert_eq!(clean.num_images(), 1);
        assert_eq!(clean.images()[0].comments[0].tokens.len(), 4);
        assert_eq!(clean.images()[0].comments[0].tokens[3].surface, "great");
    }
}
