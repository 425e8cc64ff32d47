//! Pipeline stages. Each reads its inputs from the work directory (or the
//! configured input paths), writes its artifacts there, and leaves a run
//! manifest beside them.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use crft_core::corpus::{load_corpus, write_corpus, write_filtered_corpus, Corpus};
use crft_core::informativeness::{filter_corpus, filter_stats, FilterDecision};
use crft_core::lda::{assemble_documents, build_lda_vocab, train_lda, TopicModel};
use crft_core::metrics::{
    bleu, caption_tokens, cider_per_image, diversity_report, rouge_l_per_image, CaptionSet,
};
use crft_core::ngram::build_vocabulary_with;
use crft_core::persist::{
    read_decisions, read_topic_model, read_vocabulary, sidecar_path, write_decisions,
    write_topic_model, write_vocabulary, write_weak_labels, WeakLabel,
};
use crft_core::Tagger;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::manifest::{ManifestBuilder, RunManifest};

pub const CONFIG_FILE: &str = "config.toml";
pub const TAGGED: &str = "tagged.jsonl";
pub const VOCAB: &str = "vocab.tsv";
pub const DECISIONS: &str = "decisions.tsv";
pub const FILTERED: &str = "filtered.jsonl";
pub const FILTER_SUMMARY: &str = "filter_summary.json";
pub const MODEL: &str = "model.bin";
pub const TOPICS: &str = "topics.tsv";
pub const WEAK_LABELS: &str = "weak_labels.jsonl";
pub const METRICS_CSV: &str = "metrics.csv";
pub const PER_IMAGE_CSV: &str = "per_image.csv";
pub const DIVERSITY_CSV: &str = "diversity.csv";
pub const REPORT: &str = "report.md";

/// The stages in pipeline order, with the artifacts each one produces.
pub const STAGES: [(&str, &[&str]); 7] = [
    ("build-vocab", &[TAGGED, VOCAB]),
    ("score", &[DECISIONS]),
    ("filter", &[FILTERED, FILTER_SUMMARY]),
    ("lda-train", &[MODEL, TOPICS]),
    ("lda-infer", &[WEAK_LABELS]),
    ("metrics", &[METRICS_CSV, PER_IMAGE_CSV, DIVERSITY_CSV]),
    ("report", &[REPORT]),
];

fn producer_of(artifact: &str) -> &'static str {
    STAGES
        .iter()
        .find(|(_, outs)| outs.contains(&artifact))
        .map(|(stage, _)| *stage)
        .unwrap_or("an earlier stage")
}

/// Path of a work-directory artifact that must already exist.
fn upstream(cfg: &PipelineConfig, artifact: &str) -> Result<PathBuf> {
    let path = cfg.workdir().join(artifact);
    if !path.is_file() {
        bail!(
            "missing {}: run `crft {}` first",
            path.display(),
            producer_of(artifact)
        );
    }
    Ok(path)
}

fn required_input(path: &Option<PathBuf>, what: &str, key: &str) -> Result<PathBuf> {
    let path = path
        .clone()
        .ok_or_else(|| anyhow!("no {what} given: set `paths.{key}` or pass --{key}"))?;
    ensure!(path.is_file(), "{what} {} does not exist", path.display());
    Ok(path)
}

/// Create the work directory and write the effective (path-free) config,
/// whose sha256 is the config hash.
fn prepare(cfg: &PipelineConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = cfg.workdir();
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(CONFIG_FILE);
    let mut hashed = cfg.clone();
    hashed.paths = Default::default();
    fs::write(&path, hashed.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn tagger(cfg: &PipelineConfig) -> Result<Tagger> {
    match (&cfg.paths.lexicon, &cfg.paths.stopwords) {
        (Some(lex), stops) => Ok(Tagger::from_files(lex, stops.as_deref())?),
        (None, Some(_)) => bail!("a stopword list needs a lexicon (`paths.lexicon`)"),
        (None, None) => Ok(Tagger::builtin()),
    }
}

fn load_tagged(path: &Path) -> Result<Corpus> {
    Ok(load_corpus(path, true)?.corpus)
}

pub fn build_vocab(cfg: &PipelineConfig) -> Result<RunManifest> {
    let config_file = prepare(cfg)?;
    let input = required_input(&cfg.paths.corpus, "corpus", "corpus")?;
    let hash = cfg.hash();
    let mut m = ManifestBuilder::start("build-vocab", &hash, cfg.workdir());
    m.input(&input).input(&config_file);
    if let Some(p) = &cfg.paths.lexicon {
        m.input(p);
    }
    if let Some(p) = &cfg.paths.stopwords {
        m.input(p);
    }

    let tagger = tagger(cfg)?;
    let loaded = load_corpus(&input, cfg.text.pre_tagged)?;
    let (corpus, clean) = loaded.corpus.clean(&tagger);
    let vocab = build_vocabulary_with(&corpus, cfg.vocab.normalization)?;

    let tagged = cfg.workdir().join(TAGGED);
    let vocab_path = cfg.workdir().join(VOCAB);
    write_corpus(&corpus, &tagged)?;
    write_vocabulary(&vocab, &vocab_path, Some(&hash))?;
    m.output(&tagged).output(&vocab_path);
    m.finish(json!({
        "lines": loaded.report.total_lines,
        "malformed_lines": loaded.report.malformed_lines.len(),
        "images_in": clean.images_in,
        "comments_in": clean.comments_in,
        "noise_comments": clean.noise_comments(),
        "images": clean.images_out,
        "comments": clean.comments_out,
        "ngrams": vocab.len(),
        "total_count": vocab.total_count(),
        "probability_sum": vocab.probability_sum(),
        "tagger": tagger.fingerprint(),
    }))
}

pub fn score(cfg: &PipelineConfig) -> Result<RunManifest> {
    let config_file = prepare(cfg)?;
    let tagged = upstream(cfg, TAGGED)?;
    let vocab_path = upstream(cfg, VOCAB)?;
    let hash = cfg.hash();
    let mut m = ManifestBuilder::start("score", &hash, cfg.workdir());
    m.input(&tagged).input(&vocab_path).input(&config_file);

    let corpus = load_tagged(&tagged)?;
    let vocab = read_vocabulary(&vocab_path)?;
    let decisions = filter_corpus(&corpus, &vocab, &cfg.filter.to_core())?;
    let out = cfg.workdir().join(DECISIONS);
    let threshold = cfg.filter.threshold.to_string();
    let log_base = cfg.filter.log_base.to_string();
    write_decisions(
        &decisions,
        &out,
        &[
            ("config_hash", &hash),
            ("corpus_hash", vocab.corpus_hash()),
            ("threshold", &threshold),
            ("log_base", &log_base),
        ],
    )?;
    m.output(&out);
    let stats = filter_stats(&decisions);
    m.finish(json!({
        "comments": stats.comments,
        "kept": stats.kept,
        "discard_fraction": stats.discard_fraction,
    }))
}

/// What `filter` writes to `filter_summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub config_hash: String,
    pub threshold: f64,
    pub log_base: f64,
    pub min_comments_per_image: usize,
    pub images_in: usize,
    pub images_out: usize,
    pub comments_in: usize,
    pub comments_out: usize,
    pub discard_fraction: f64,
    pub mean_kept_per_image: f64,
    pub sd_kept_per_image: f64,
    /// Unit-width score bins over [0, 100) plus an overflow bin.
    pub score_histogram: Vec<u64>,
}

/// Re-threshold scored comments and prune images. Scores are recomputed
/// only when the log base differs from the one `score` used.
pub fn filter(cfg: &PipelineConfig) -> Result<RunManifest> {
    let config_file = prepare(cfg)?;
    let tagged = upstream(cfg, TAGGED)?;
    let decisions_path = upstream(cfg, DECISIONS)?;
    let hash = cfg.hash();
    let mut m = ManifestBuilder::start("filter", &hash, cfg.workdir());
    m.input(&tagged).input(&decisions_path).input(&config_file);

    let corpus = load_tagged(&tagged)?;
    let (scored, meta) = read_decisions(&decisions_path)?;
    let scored_base: Option<f64> = meta.get("log_base").and_then(|v| v.parse().ok());
    let decisions: Vec<FilterDecision> = if scored_base == Some(cfg.filter.log_base) {
        scored
            .iter()
            .map(|d| d.with_threshold(cfg.filter.threshold))
            .collect()
    } else {
        let vocab_path = upstream(cfg, VOCAB)?;
        m.input(&vocab_path);
        log::info!("log base changed since `score`; rescoring");
        filter_corpus(
            &corpus,
            &read_vocabulary(&vocab_path)?,
            &cfg.filter.to_core(),
        )?
    };

    let out = cfg.workdir().join(FILTERED);
    let summary =
        write_filtered_corpus(&corpus, &decisions, cfg.filter.min_comments_per_image, &out)?;
    let stats = filter_stats(&decisions);
    let report = FilterReport {
        config_hash: hash.clone(),
        threshold: cfg.filter.threshold,
        log_base: cfg.filter.log_base,
        min_comments_per_image: cfg.filter.min_comments_per_image,
        images_in: summary.images_in,
        images_out: summary.images_out,
        comments_in: summary.comments_in,
        comments_out: summary.comments_out,
        discard_fraction: stats.discard_fraction,
        mean_kept_per_image: summary.mean_kept_per_image,
        sd_kept_per_image: stats.sd_kept_per_image,
        score_histogram: stats.histogram,
    };
    let summary_path = cfg.workdir().join(FILTER_SUMMARY);
    fs::write(&summary_path, serde_json::to_string_pretty(&report)? + "\n")?;
    m.output(&out).output(&summary_path);
    m.finish(json!({
        "images_out": report.images_out,
        "comments_out": report.comments_out,
        "discard_fraction": report.discard_fraction,
        "mean_kept_per_image": report.mean_kept_per_image,
    }))
}

/// Train LDA on the filtered corpus. The n-gram table is recounted on the
/// kept comments so the document-frequency cap refers to them.
pub fn lda_train(cfg: &PipelineConfig) -> Result<RunManifest> {
    let config_file = prepare(cfg)?;
    let filtered = upstream(cfg, FILTERED)?;
    let hash = cfg.hash();
    let mut m = ManifestBuilder::start("lda-train", &hash, cfg.workdir());
    m.input(&filtered).input(&config_file);

    let corpus = load_tagged(&filtered)?;
    ensure!(
        !corpus.is_empty(),
        "filtered corpus is empty; nothing to train on"
    );
    let vocab = build_vocabulary_with(&corpus, cfg.vocab.normalization)?;
    let lda_vocab = build_lda_vocab(
        &vocab,
        corpus.num_comments() as u64,
        cfg.lda.doc_freq_cap,
        cfg.lda.vocab_cap,
    )?;
    let assembled = assemble_documents(&corpus, &lda_vocab);
    let model = train_lda(&assembled.documents, &lda_vocab, &cfg.lda.to_core())?;
    model.check_consistency()?;

    let model_path = cfg.workdir().join(MODEL);
    write_topic_model(&model, &model_path, Some(&hash))?;
    let topics_path = cfg.workdir().join(TOPICS);
    write_topics(&model, cfg.lda.top_terms, &topics_path)?;
    m.output(&model_path)
        .output(&sidecar_path(&model_path))
        .output(&topics_path);
    m.finish(json!({
        "documents": model.num_documents(),
        "empty_documents": assembled.empty.len(),
        "terms": lda_vocab.len(),
        "topics": model.k,
        "alpha": model.alpha,
        "beta": model.beta,
        "tokens": model.n_k.iter().sum::<u64>(),
    }))
}

fn write_topics(model: &TopicModel, n: usize, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "topic\trank\tngram\tprob")?;
    for t in 0..model.k {
        for (rank, (ngram, p)) in model.top_terms(t, n)?.into_iter().enumerate() {
            writeln!(out, "{t}\t{}\t{ngram}\t{p}", rank + 1)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Infer per-image topic distributions (weak labels). `input` is an
/// alternative corpus; by default the filtered corpus is labelled.
pub fn lda_infer(cfg: &PipelineConfig, input: Option<&Path>) -> Result<RunManifest> {
    let config_file = prepare(cfg)?;
    let model_path = upstream(cfg, MODEL)?;
    let hash = cfg.hash();
    let mut m = ManifestBuilder::start("lda-infer", &hash, cfg.workdir());
    m.input(&model_path)
        .input(&sidecar_path(&model_path))
        .input(&config_file);

    let corpus = match input {
        Some(p) => {
            m.input(p);
            let loaded = load_corpus(p, cfg.text.pre_tagged)?.corpus;
            loaded.clean(&tagger(cfg)?).0
        }
        None => {
            let p = upstream(cfg, FILTERED)?;
            m.input(&p);
            load_tagged(&p)?
        }
    };
    let (model, _) = read_topic_model(&model_path)?;
    let docs = assemble_documents(&corpus, &model.vocab).documents;
    let seed = cfg.lda.seed;
    let labels: Vec<WeakLabel> = docs
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            Ok(WeakLabel {
                image_id: d.image_id.clone(),
                theta: model.infer_topics(
                    d,
                    model.vocab.hash(),
                    cfg.lda.infer_iters,
                    seed.wrapping_add(i as u64),
                )?,
            })
        })
        .collect::<crft_core::Result<_>>()?;
    let out = cfg.workdir().join(WEAK_LABELS);
    write_weak_labels(&labels, &out)?;
    m.output(&out);
    let empty = docs.iter().filter(|d| d.term_ids.is_empty()).count();
    m.finish(json!({"images": labels.len(), "empty_documents": empty, "topics": model.k}))
}

#[derive(Deserialize)]
struct CandidateLine {
    image_id: serde_json::Value,
    caption: String,
}

#[derive(Deserialize)]
struct ReferenceLine {
    image_id: serde_json::Value,
    captions: Vec<String>,
}

fn id_text(v: &serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) if !s.is_empty() => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => bail!("bad image_id {other}"),
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{}:{}: malformed line", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

/// Load candidate and reference caption files into a [`CaptionSet`].
pub fn load_caption_set(candidates: &Path, references: &Path) -> Result<CaptionSet> {
    let mut cands = BTreeMap::new();
    for c in read_jsonl::<CandidateLine>(candidates)? {
        let id = id_text(&c.image_id)?;
        ensure!(
            cands
                .insert(id.clone(), caption_tokens(&c.caption))
                .is_none(),
            "duplicate candidate for image {id}"
        );
    }
    let mut refs: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for r in read_jsonl::<ReferenceLine>(references)? {
        refs.entry(id_text(&r.image_id)?)
            .or_default()
            .extend(r.captions.iter().map(|c| caption_tokens(c)));
    }
    Ok(CaptionSet::new(cands, refs))
}

pub fn metrics(cfg: &PipelineConfig) -> Result<RunManifest> {
    let config_file = prepare(cfg)?;
    let cand_path = required_input(&cfg.paths.candidates, "candidates file", "candidates")?;
    let ref_path = required_input(&cfg.paths.references, "references file", "references")?;
    let hash = cfg.hash();
    let mut m = ManifestBuilder::start("metrics", &hash, cfg.workdir());
    m.input(&cand_path).input(&ref_path).input(&config_file);

    let set = load_caption_set(&cand_path, &ref_path)?;
    ensure!(!set.is_empty(), "no candidate captions");
    let b = bleu(&set)?;
    let rouge = rouge_l_per_image(&set)?;
    let cider = if set.len() >= 2 {
        Some(cider_per_image(&set, &cfg.metrics.cider_options())?)
    } else {
        log::warn!("CIDEr needs at least 2 images; skipped");
        None
    };
    let mc = &cfg.metrics;
    let div = diversity_report(
        &set.candidate_list(),
        mc.max_positions,
        mc.overlap_threshold,
        mc.denominator,
    );
    let mean = |m: &BTreeMap<String, f64>| m.values().sum::<f64>() / m.len() as f64;
    let cider_name = if mc.cider_d { "CIDEr-D" } else { "CIDEr" };

    let metrics_path = cfg.workdir().join(METRICS_CSV);
    let mut w = csv::Writer::from_path(&metrics_path)?;
    w.write_record(["metric", "value"])?;
    w.write_record(["candidates", &set.len().to_string()])?;
    for n in 1..=4 {
        w.write_record([format!("BLEU-{n}"), b.get(n).to_string()])?;
    }
    w.write_record(["ROUGE-L".to_string(), mean(&rouge).to_string()])?;
    if let Some(c) = &cider {
        w.write_record([cider_name.to_string(), mean(c).to_string()])?;
    }
    if let Some(r) = div.distinct_ratio {
        w.write_record(["distinct_ratio".to_string(), r.to_string()])?;
    }
    w.flush()?;

    let per_image_path = cfg.workdir().join(PER_IMAGE_CSV);
    let mut w = csv::Writer::from_path(&per_image_path)?;
    w.write_record(["image_id", "caption", "ROUGE-L", cider_name])?;
    for (id, tokens) in &set.candidates {
        let c = cider
            .as_ref()
            .map(|c| c[id].to_string())
            .unwrap_or_default();
        w.write_record([id.as_str(), &tokens.join(" "), &rouge[id].to_string(), &c])?;
    }
    w.flush()?;

    let diversity_path = cfg.workdir().join(DIVERSITY_CSV);
    let mut w = csv::Writer::from_path(&diversity_path)?;
    w.write_record(["n", "position", "unique_count"])?;
    for (n, counts) in &div.per_position {
        for (p, c) in counts.iter().enumerate() {
            w.write_record([n.to_string(), (p + 1).to_string(), c.to_string()])?;
        }
    }
    w.flush()?;

    m.output(&metrics_path)
        .output(&per_image_path)
        .output(&diversity_path);
    m.finish(json!({
        "candidates": set.len(),
        "bleu": b.0,
        "rouge_l": mean(&rouge),
        "cider": cider.as_ref().map(mean),
        "distinct_ratio": div.distinct_ratio,
    }))
}

/// Row counts found by [`report`] while validating the metric CSVs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportCheck {
    pub candidates: usize,
    pub per_image_rows: usize,
    pub diversity_rows: usize,
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.records()
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Validate the metric CSVs and summarize every artifact present in the work
/// directory as Markdown.
pub fn report(cfg: &PipelineConfig) -> Result<(RunManifest, ReportCheck)> {
    let config_file = prepare(cfg)?;
    let metrics_path = upstream(cfg, METRICS_CSV)?;
    let per_image_path = upstream(cfg, PER_IMAGE_CSV)?;
    let diversity_path = upstream(cfg, DIVERSITY_CSV)?;
    let hash = cfg.hash();
    let mut m = ManifestBuilder::start("report", &hash, cfg.workdir());
    m.input(&metrics_path)
        .input(&per_image_path)
        .input(&diversity_path)
        .input(&config_file);

    let metric_rows = read_rows(&metrics_path)?;
    let metric = |name: &str| -> Option<String> {
        metric_rows
            .iter()
            .find(|r| r.get(0) == Some(name))
            .and_then(|r| r.get(1).map(str::to_string))
    };
    let candidates: usize = metric("candidates")
        .ok_or_else(|| anyhow!("{} has no candidates row", metrics_path.display()))?
        .parse()?;
    let per_image_rows = read_rows(&per_image_path)?.len();
    let diversity_rows = read_rows(&diversity_path)?.len();
    let check = ReportCheck {
        candidates,
        per_image_rows,
        diversity_rows,
    };
    ensure!(
        per_image_rows == candidates,
        "{} has {per_image_rows} rows for {candidates} candidates",
        per_image_path.display()
    );
    let expected_div = 3 * cfg.metrics.max_positions;
    ensure!(
        diversity_rows == expected_div,
        "{} has {diversity_rows} rows, expected {expected_div}",
        diversity_path.display()
    );

    let mut md = String::from("# Pipeline report\n\n");
    md.push_str(&format!("Config hash: `{hash}`\n\n"));

    let summary_path = cfg.workdir().join(FILTER_SUMMARY);
    if summary_path.is_file() {
        m.input(&summary_path);
        let f: FilterReport = serde_json::from_str(&fs::read_to_string(&summary_path)?)?;
        md.push_str("## Filtering\n\n| quantity | value |\n|---|---|\n");
        md.push_str(&format!("| threshold | {} |\n", f.threshold));
        md.push_str(&format!("| comments in | {} |\n", f.comments_in));
        md.push_str(&format!("| comments kept | {} |\n", f.comments_out));
        md.push_str(&format!(
            "| discard fraction | {:.4} |\n",
            f.discard_fraction
        ));
        md.push_str(&format!(
            "| images kept | {} of {} |\n",
            f.images_out, f.images_in
        ));
        md.push_str(&format!(
            "| kept comments per image | {:.2} ± {:.2} |\n\n",
            f.mean_kept_per_image, f.sd_kept_per_image
        ));
    }

    let topics_path = cfg.workdir().join(TOPICS);
    if topics_path.is_file() {
        m.input(&topics_path);
        let mut by_topic: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        let mut r = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .from_path(&topics_path)?;
        for rec in r.records() {
            let rec = rec?;
            let t: usize = rec.get(0).unwrap_or_default().parse()?;
            by_topic
                .entry(t)
                .or_default()
                .push(rec.get(2).unwrap_or_default().to_string());
        }
        md.push_str("## Topics\n\n");
        for (t, terms) in by_topic.iter().take(20) {
            md.push_str(&format!("- topic {t}: {}\n", terms.join(", ")));
        }
        if by_topic.len() > 20 {
            md.push_str(&format!("- … {} more in `{TOPICS}`\n", by_topic.len() - 20));
        }
        md.push('\n');
    }

    md.push_str("## Caption metrics\n\n| metric | value |\n|---|---|\n");
    for r in &metric_rows {
        md.push_str(&format!(
            "| {} | {} |\n",
            r.get(0).unwrap_or_default(),
            r.get(1).unwrap_or_default()
        ));
    }
    md.push_str(&format!(
        "\nPer-position unique n-grams: `{DIVERSITY_CSV}` ({diversity_rows} rows).\n"
    ));

    let out = cfg.workdir().join(REPORT);
    fs::write(&out, md)?;
    m.output(&out);
    let manifest = m.finish(serde_json::to_value(&check)?)?;
    Ok((manifest, check))
}

/// Corpus statistics at the current configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub images: usize,
    pub comments: usize,
    pub comments_per_image: f64,
    pub malformed_lines: usize,
    pub noise_comments: usize,
    /// Tokens per (clean) comment.
    pub tokens_min: usize,
    pub tokens_median: f64,
    pub tokens_mean: f64,
    pub tokens_max: usize,
    /// `(tokens, comments)` pairs.
    pub token_histogram: Vec<(usize, usize)>,
    pub vocabulary_size: usize,
}

pub fn stats(cfg: &PipelineConfig, path: &Path) -> Result<CorpusStats> {
    let loaded = load_corpus(path, cfg.text.pre_tagged)?;
    let raw = &loaded.corpus;
    let (images, comments) = (raw.num_images(), raw.num_comments());
    let (clean, report) = loaded.corpus.clone().clean(&tagger(cfg)?);

    let mut lens: Vec<usize> = clean.comments().map(|(_, c)| c.tokens.len()).collect();
    lens.sort_unstable();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in &lens {
        *hist.entry(l).or_default() += 1;
    }
    let median = match lens.len() {
        0 => 0.0,
        n if n % 2 == 1 => lens[n / 2] as f64,
        n => (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0,
    };
    let vocabulary_size = if clean.is_empty() {
        log::warn!("{} holds no usable comments", path.display());
        0
    } else {
        build_vocabulary_with(&clean, cfg.vocab.normalization)
            .map(|v| v.len())
            .unwrap_or(0)
    };
    Ok(CorpusStats {
        images,
        comments,
        comments_per_image: if images == 0 {
            0.0
        } else {
            comments as f64 / images as f64
        },
        malformed_lines: loaded.report.malformed_lines.len(),
        noise_comments: report.noise_comments(),
        tokens_min: lens.first().copied().unwrap_or(0),
        tokens_median: median,
        tokens_mean: if lens.is_empty() {
            0.0
        } else {
            lens.iter().sum::<usize>() as f64 / lens.len() as f64
        },
        tokens_max: lens.last().copied().unwrap_or(0),
        token_histogram: hist.into_iter().collect(),
        vocabulary_size,
    })
}

/// Every stage in order; `metrics` and `report` run only when candidate and
/// reference files are configured.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<RunManifest>> {
    let mut manifests = vec![
        build_vocab(cfg)?,
        score(cfg)?,
        filter(cfg)?,
        lda_train(cfg)?,
        lda_infer(cfg, None)?,
    ];
    if cfg.paths.candidates.is_some() && cfg.paths.references.is_some() {
        manifests.push(metrics(cfg)?);
        manifests.push(report(cfg)?.0);
    } else {
        log::info!("no candidates/references configured; skipping metrics and report");
    }
    Ok(manifests)
}
