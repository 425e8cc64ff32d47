//! On-disk formats for vocabularies, filter decisions, topic models and weak
//! labels.
//!
//! * Vocabulary TSV: `#crft-vocabulary\tv1` magic line, `#key\tvalue`
//!   metadata lines, then `ngram order pattern corpus_freq doc_freq prob`.
//! * Decisions TSV: `#crft-decisions\tv1` magic line, metadata, then
//!   `image_id comment_id score kept(0|1) n_unigrams n_bigrams`.
//! * Topic model: little-endian binary starting with `CRFT0001`, plus a JSON
//!   sidecar `<path>.json` with the hyperparameters and vocabulary hash.
//! * Weak labels: JSON lines `{"image_id": .., "theta": [..]}`.
//!
//! Reals are written with Rust's shortest round-trip formatting, so text
//! formats reload bit-exactly.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::informativeness::FilterDecision;
use crate::lda::{LdaDocument, LdaVocabulary, TopicModel};
use crate::ngram::{NGram, Normalization, VocabEntry, Vocabulary};

pub const VOCAB_MAGIC: &str = "#crft-vocabulary\tv1";
pub const DECISIONS_MAGIC: &str = "#crft-decisions\tv1";
pub const MODEL_MAGIC: &[u8; 8] = b"CRFT0001";

const VOCAB_HEADER: &str = "ngram\torder\tpattern\tcorpus_freq\tdoc_freq\tprob";
const DECISIONS_HEADER: &str = "image_id\tcomment_id\tscore\tkept\tn_unigrams\tn_bigrams";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn preview(s: &str) -> String {
    let p: String = s.chars().take(40).collect();
    format!("{p:?}")
}

/// Splits a text artifact into its metadata map and data rows (header row
/// removed), checking the magic line and the column header.
fn read_table(
    path: &Path,
    magic: &str,
    header: &str,
) -> Result<(BTreeMap<String, String>, Vec<(usize, String)>)> {
    let mut lines = open(path)?.lines().enumerate();
    let first = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
        None => String::new(),
    };
    if first != magic {
        return Err(Error::format(
            path.display().to_string(),
            format!("magic header {magic:?}"),
            preview(&first),
        ));
    }
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !seen_header {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('\t') {
                    meta.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            if line != header {
                return Err(Error::format(
                    path.display().to_string(),
                    format!("column header {header:?}"),
                    preview(&line),
                ));
            }
            seen_header = true;
            continue;
        }
        if !line.is_empty() {
            rows.push((i + 1, line));
        }
    }
    Ok((meta, rows))
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| {
        Error::format(
            format!("{} line {line}", path.display()),
            format!("valid {name}"),
            preview(raw),
        )
    })
}

pub fn write_vocabulary(vocab: &Vocabulary, path: &Path, config_hash: Option<&str>) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{VOCAB_MAGIC}").map_err(io)?;
    writeln!(out, "#corpus_hash\t{}", vocab.corpus_hash()).map_err(io)?;
    writeln!(out, "#normalization\t{}", vocab.normalization()).map_err(io)?;
    writeln!(out, "#num_comments\t{}", vocab.num_comments()).map_err(io)?;
    writeln!(out, "#total_count\t{}", vocab.total_count()).map_err(io)?;
    if let Some(h) = config_hash {
        writeln!(out, "#config_hash\t{h}").map_err(io)?;
    }
    writeln!(out, "{VOCAB_HEADER}").map_err(io)?;
    for (ngram, e) in vocab.iter() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            ngram,
            ngram.order(),
            e.pattern,
            e.corpus_freq,
            e.doc_freq,
            e.prob
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    let (meta, rows) = read_table(path, VOCAB_MAGIC, VOCAB_HEADER)?;
    let mut entries = BTreeMap::new();
    for (n, line) in rows {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::format(
                format!("{} line {n}", path.display()),
                "6 tab-separated columns",
                format!("{} columns", cols.len()),
            ));
        }
        let order: u8 = field(path, n, "order", cols[1])?;
        let ngram = NGram::parse(cols[0], order)?;
        let entry = VocabEntry {
            pattern: field(path, n, "pattern", cols[2])?,
            corpus_freq: field(path, n, "corpus_freq", cols[3])?,
            doc_freq: field(path, n, "doc_freq", cols[4])?,
            prob: field(path, n, "prob", cols[5])?,
        };
        if entries.insert(ngram, entry).is_some() {
            return Err(Error::Invalid(format!(
                "{} line {n}: duplicate n-gram `{}`",
                path.display(),
                cols[0]
            )));
        }
    }
    let normalization: Normalization = meta
        .get("normalization")
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or_default();
    let num_comments = meta
        .get("num_comments")
        .map(|s| field(path, 0, "num_comments", s))
        .transpose()?
        .unwrap_or(0);
    Vocabulary::from_parts(
        entries,
        normalization,
        meta.get("corpus_hash").cloned().unwrap_or_default(),
        num_comments,
    )
}

pub fn write_decisions(
    decisions: &[FilterDecision],
    path: &Path,
    meta: &[(&str, &str)],
) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{DECISIONS_MAGIC}").map_err(io)?;
    for (k, v) in meta {
        writeln!(out, "#{k}\t{v}").map_err(io)?;
    }
    writeln!(out, "{DECISIONS_HEADER}").map_err(io)?;
    for d in decisions {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            d.image_id,
            d.comment_id,
            d.score,
            u8::from(d.kept),
            d.n_unigrams,
            d.n_bigrams
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_decisions(path: &Path) -> Result<(Vec<FilterDecision>, BTreeMap<String, String>)> {
    let (meta, rows) = read_table(path, DECISIONS_MAGIC, DECISIONS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (n, line) in rows {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::format(
                format!("{} line {n}", path.display()),
                "6 tab-separated columns",
                format!("{} columns", cols.len()),
            ));
        }
        let kept = match cols[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::format(
                    format!("{} line {n}", path.display()),
                    "kept 0|1",
                    preview(other),
                ))
            }
        };
        out.push(FilterDecision {
            image_id: cols[0].to_string(),
            comment_id: cols[1].to_string(),
            score: field(path, n, "score", cols[2])?,
            kept,
            n_unigrams: field(path, n, "n_unigrams", cols[4])?,
            n_bigrams: field(path, n, "n_bigrams", cols[5])?,
        });
    }
    Ok((out, meta))
}

/// Hyperparameters stored next to the binary topic model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub format: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub vocab_hash: String,
    pub vocab_size: usize,
    pub documents: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub fn sidecar_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_str(out: &mut impl Write, s: &str) -> std::io::Result<()> {
    out.write_u32::<LittleEndian>(s.len() as u32)?;
    out.write_all(s.as_bytes())
}

fn read_str(inp: &mut impl Read) -> std::io::Result<String> {
    let len = inp.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0; len];
    inp.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

fn write_model_body(model: &TopicModel, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(MODEL_MAGIC)?;
    out.write_u32::<LittleEndian>(model.k as u32)?;
    out.write_u32::<LittleEndian>(model.vocab_size() as u32)?;
    out.write_u32::<LittleEndian>(model.num_documents() as u32)?;
    out.write_f64::<LittleEndian>(model.alpha)?;
    out.write_f64::<LittleEndian>(model.beta)?;
    out.write_u64::<LittleEndian>(model.iters as u64)?;
    out.write_u64::<LittleEndian>(model.burn_in as u64)?;
    out.write_u64::<LittleEndian>(model.seed)?;
    for t in model.vocab.terms() {
        out.write_u8(t.order())?;
        write_str(out, &t.to_string())?;
    }
    for (doc, z) in model.documents.iter().zip(&model.z) {
        write_str(out, &doc.image_id)?;
        out.write_u32::<LittleEndian>(doc.term_ids.len() as u32)?;
        for &w in &doc.term_ids {
            out.write_u32::<LittleEndian>(w)?;
        }
        for &t in z {
            out.write_u32::<LittleEndian>(t)?;
        }
    }
    for &c in &model.n_kw {
        out.write_u32::<LittleEndian>(c)?;
    }
    for &c in &model.n_dk {
        out.write_u32::<LittleEndian>(c)?;
    }
    for &c in &model.n_k {
        out.write_u64::<LittleEndian>(c)?;
    }
    for &p in model.phi.iter().chain(&model.theta) {
        out.write_f64::<LittleEndian>(p)?;
    }
    Ok(())
}

pub fn write_topic_model(model: &TopicModel, path: &Path, config_hash: Option<&str>) -> Result<()> {
    let mut out = create(path)?;
    write_model_body(model, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))?;
    let sidecar = ModelSidecar {
        format: String::from_utf8_lossy(MODEL_MAGIC).into_owned(),
        k: model.k,
        alpha: model.alpha,
        beta: model.beta,
        iters: model.iters,
        burn_in: model.burn_in,
        seed: model.seed,
        vocab_hash: model.vocab.hash().to_string(),
        vocab_size: model.vocab_size(),
        documents: model.num_documents(),
        config_hash: config_hash.map(str::to_string),
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
}

fn read_vec<T>(n: usize, mut f: impl FnMut() -> std::io::Result<T>) -> std::io::Result<Vec<T>> {
    (0..n).map(|_| f()).collect()
}

fn read_model_body(inp: &mut impl Read, path: &Path) -> Result<TopicModel> {
    let truncated = |e: std::io::Error| {
        Error::format(
            path.display().to_string(),
            "complete topic model",
            format!("read failure: {e}"),
        )
    };
    let mut magic = [0u8; 8];
    inp.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::format(
            path.display().to_string(),
            format!("magic header {:?}", String::from_utf8_lossy(MODEL_MAGIC)),
            format!("{:?}", String::from_utf8_lossy(&magic)),
        ));
    }
    let r32 = |inp: &mut dyn Read| inp.read_u32::<LittleEndian>();
    let k = r32(inp).map_err(truncated)? as usize;
    let m = r32(inp).map_err(truncated)? as usize;
    let n = r32(inp).map_err(truncated)? as usize;
    let alpha = inp.read_f64::<LittleEndian>().map_err(truncated)?;
    let beta = inp.read_f64::<LittleEndian>().map_err(truncated)?;
    let iters = inp.read_u64::<LittleEndian>().map_err(truncated)? as usize;
    let burn_in = inp.read_u64::<LittleEndian>().map_err(truncated)? as usize;
    let seed = inp.read_u64::<LittleEndian>().map_err(truncated)?;

    let mut terms = Vec::with_capacity(m);
    for _ in 0..m {
        let order = inp.read_u8().map_err(truncated)?;
        let text = read_str(inp).map_err(truncated)?;
        terms.push(NGram::parse(&text, order)?);
    }
    let vocab = LdaVocabulary::from_terms(terms)?;

    let mut documents = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let image_id = read_str(inp).map_err(truncated)?;
        let len = r32(inp).map_err(truncated)? as usize;
        let term_ids = read_vec(len, || inp.read_u32::<LittleEndian>()).map_err(truncated)?;
        let zd = read_vec(len, || inp.read_u32::<LittleEndian>()).map_err(truncated)?;
        documents.push(LdaDocument { image_id, term_ids });
        z.push(zd);
    }
    let n_kw = read_vec(k * m, || inp.read_u32::<LittleEndian>()).map_err(truncated)?;
    let n_dk = read_vec(n * k, || inp.read_u32::<LittleEndian>()).map_err(truncated)?;
    let n_k = read_vec(k, || inp.read_u64::<LittleEndian>()).map_err(truncated)?;
    let phi = read_vec(k * m, || inp.read_f64::<LittleEndian>()).map_err(truncated)?;
    let theta = read_vec(n * k, || inp.read_f64::<LittleEndian>()).map_err(truncated)?;
    let mut rest = [0u8; 1];
    if inp.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(
            path.display().to_string(),
            "end of file",
            "trailing bytes",
        ));
    }
    Ok(TopicModel {
        k,
        alpha,
        beta,
        iters,
        burn_in,
        seed,
        vocab,
        documents,
        n_kw,
        n_dk,
        n_k,
        z,
        phi,
        theta,
    })
}

/// Read a topic model and check it against its sidecar.
pub fn read_topic_model(path: &Path) -> Result<(TopicModel, ModelSidecar)> {
    let model = read_model_body(&mut open(path)?, path)?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: ModelSidecar = serde_json::from_str(&text).map_err(|e| {
        Error::format(
            side.display().to_string(),
            "model sidecar JSON",
            e.to_string(),
        )
    })?;
    if sidecar.vocab_hash != model.vocab.hash() {
        return Err(Error::HashMismatch {
            what: format!("sidecar {}", side.display()),
            expected: sidecar.vocab_hash,
            actual: model.vocab.hash().to_string(),
        });
    }
    if sidecar.k != model.k || sidecar.vocab_size != model.vocab_size() {
        return Err(Error::format(
            side.display().to_string(),
            format!("K={} M={}", model.k, model.vocab_size()),
            format!("K={} M={}", sidecar.k, sidecar.vocab_size),
        ));
    }
    Ok((model, sidecar))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakLabel {
    pub image_id: String,
    pub theta: Vec<f64>,
}

pub fn write_weak_labels(labels: &[WeakLabel], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for l in labels {
        serde_json::to_writer(&mut out, l)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_weak_labels(path: &Path) -> Result<Vec<WeakLabel>> {
    let mut labels = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        labels.push(serde_json::from_str(&line).map_err(|e| {
            Error::format(
                format!("{} line {}", path.display(), i + 1),
                "weak label JSON",
                e.to_string(),
            )
        })?);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lda::{train_lda, LdaConfig};
    use crate::ngram::Pattern;
    use crate::text::Tag;

    fn small_vocab() -> Vocabulary {
        let mut entries = BTreeMap::new();
        let rows = [
            (NGram::unigram("water"), None, 3, 2),
            (NGram::unigram("sky"), None, 1, 1),
            (NGram::bigram("soft", "water"), Some(Tag::Adj), 2, 2),
            (NGram::bigram("very", "sharp"), Some(Tag::Adj), 1, 1),
            (NGram::bigram("top", "half"), Some(Tag::Noun), 3, 3),
        ];
        for (g, second, cf, df) in rows {
            let first = match (&g, second) {
                (_, None) => Tag::Noun,
                (NGram::Bigram(a, _), Some(_)) if a == "very" => Tag::Adv,
                _ => Tag::Adj,
            };
            entries.insert(
                g,
                VocabEntry {
                    pattern: Pattern { first, second },
                    corpus_freq: cf,
                    doc_freq: df,
                    prob: cf as f64 / 10.0,
                },
            );
        }
        Vocabulary::from_parts(entries, Normalization::Pooled, "abc123".into(), 7).unwrap()
    }

    #[test]
    fn vocabulary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.tsv");
        let v = small_vocab();
        write_vocabulary(&v, &p, Some("cfg")).unwrap();
        let back = read_vocabulary(&p).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn vocabulary_magic_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.tsv");
        write_vocabulary(&small_vocab(), &p, None).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes[0] ^= 0x01;
        fs::write(&p, bytes).unwrap();
        match read_vocabulary(&p) {
            Err(Error::Format {
                expected, actual, ..
            }) => {
                assert!(expected.contains("crft-vocabulary"));
                assert!(actual.contains("\"\\\"crft"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn decisions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.tsv");
        let ds = vec![
            FilterDecision {
                image_id: "a".into(),
                comment_id: "1".into(),
                score: 0.1 + 0.2,
                kept: false,
                n_unigrams: 1,
                n_bigrams: 0,
            },
            FilterDecision {
                image_id: "b".into(),
                comment_id: "x".into(),
                score: 47.441_234_567_890_12,
                kept: true,
                n_unigrams: 4,
                n_bigrams: 3,
            },
        ];
        write_decisions(&ds, &p, &[("threshold", "20")]).unwrap();
        let (back, meta) = read_decisions(&p).unwrap();
        assert_eq!(back, ds);
        assert_eq!(meta["threshold"], "20");
    }

    #[test]
    fn topic_model_round_trip_and_magic() {
        let vocab = LdaVocabulary::from_terms(vec![
            NGram::unigram("sky"),
            NGram::bigram("soft", "water"),
            NGram::unigram("water"),
        ])
        .unwrap();
        let docs = vec![
            LdaDocument {
                image_id: "a".into(),
                term_ids: vec![0, 1, 2, 2],
            },
            LdaDocument {
                image_id: "b".into(),
                term_ids: vec![],
            },
        ];
        let cfg = LdaConfig {
            topics: 2,
            iters: 5,
            burn_in: 1,
            ..LdaConfig::default()
        };
        let model = train_lda(&docs, &vocab, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        write_topic_model(&model, &p, Some("cfg")).unwrap();
        let (back, side) = read_topic_model(&p).unwrap();
        assert_eq!(back, model);
        assert_eq!(side.k, 2);
        assert_eq!(side.vocab_hash, vocab.hash());

        let mut bytes = fs::read(&p).unwrap();
        bytes[0] ^= 0xff;
        fs::write(&p, &bytes).unwrap();
        match read_topic_model(&p) {
            Err(Error::Format { expected, .. }) => assert!(expected.contains("CRFT0001")),
            other => panic!("expected format error, got {other:?}"),
        }

        bytes[0] ^= 0xff;
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_topic_model(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let p = Path::new("/nonexistent-dir/vocab.tsv");
        assert!(matches!(
            write_vocabulary(&small_vocab(), p, None),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn weak_labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.jsonl");
        let labels = vec![WeakLabel {
            image_id: "a".into(),
            theta: vec![0.1, 0.2 + 0.1, 0.6],
        }];
        write_weak_labels(&labels, &p).unwrap();
        assert_eq!(read_weak_labels(&p).unwrap(), labels);
    }
}
