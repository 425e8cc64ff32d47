//! `crft`: the corpus refinement pipeline as one subcommand per stage.
//!
//! ```text
//! build-vocab -> score -> filter -> lda-train -> lda-infer
//! metrics -> report
//! ```
//!
//! Settings come from a TOML config (`--config`, or the file named by
//! `CRFT_CONFIG`), overridden by flags. Artifacts and run manifests go to the
//! work directory.

pub mod config;
pub mod manifest;
pub mod stages;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use crft_core::metrics::OverlapDenominator;
use crft_core::Normalization;

use crate::config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(
    name = "crft",
    version,
    about = "Refine image-comment corpora into captions and weak labels"
)]
pub struct Cli {
    /// Pipeline config file (TOML). Defaults to $CRFT_CONFIG if set.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts and manifests.
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean and tag the corpus, count n-grams, write the vocabulary.
    BuildVocab(InputArgs),
    /// Score every comment against the vocabulary.
    Score(FilterArgs),
    /// Apply the threshold and write the filtered corpus.
    Filter(FilterArgs),
    /// Train the topic model on the filtered corpus.
    LdaTrain(LdaArgs),
    /// Write per-image topic distributions (weak labels).
    LdaInfer {
        #[command(flatten)]
        lda: LdaArgs,
        /// Label this corpus instead of the filtered one.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Score candidate captions against references.
    Metrics(MetricArgs),
    /// Check the metric tables and summarize the work directory.
    Report,
    /// Print corpus statistics as JSON.
    Stats {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Run every stage in order.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        filter: FilterArgs,
        #[command(flatten)]
        lda: LdaArgs,
        #[command(flatten)]
        metrics: MetricArgs,
    },
}

#[derive(Debug, Default, Args)]
pub struct InputArgs {
    /// Input corpus (JSON lines).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comments already carry `tokens` and `tags`.
    #[arg(long)]
    pub pre_tagged: bool,
    /// Tagger lexicon (TSV `word<TAB>tag`).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Stopword list, one word per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// `pooled` or `per-order` probability normalization.
    #[arg(long)]
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Default, Args)]
pub struct FilterArgs {
    /// Keep comments scoring at or above this.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Logarithm base of the score (default e).
    #[arg(long)]
    pub log_base: Option<f64>,
    /// Drop images with fewer kept comments.
    #[arg(long)]
    pub min_comments_per_image: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct LdaArgs {
    #[arg(long)]
    pub topics: Option<usize>,
    /// Document-topic prior, or `auto` for 50 / topics.
    #[arg(long, value_parser = parse_alpha)]
    pub alpha: Option<Alpha>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum number of LDA terms.
    #[arg(long)]
    pub vocab_cap: Option<usize>,
    /// Keep terms found in fewer than this fraction of comments.
    #[arg(long)]
    pub doc_freq_cap: Option<f64>,
    /// Sweeps per image when inferring weak labels.
    #[arg(long)]
    pub infer_iters: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alpha(pub Option<f64>);

fn parse_alpha(s: &str) -> Result<Alpha, String> {
    if s == "auto" {
        return Ok(Alpha(None));
    }
    s.parse::<f64>()
        .map(|a| Alpha(Some(a)))
        .map_err(|_| format!("expected a number or `auto`, got `{s}`"))
}

#[derive(Debug, Default, Args)]
pub struct MetricArgs {
    /// Candidate captions, JSON lines `{image_id, caption}`.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Reference captions, JSON lines `{image_id, captions: [...]}`.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Use CIDEr-D instead of plain CIDEr.
    #[arg(long)]
    pub cider_d: bool,
    #[arg(long)]
    pub max_positions: Option<usize>,
    /// Common-word fraction at which two captions count as the same.
    #[arg(long)]
    pub overlap_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub denominator: Option<Denominator>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Denominator {
    Max,
    Min,
    Union,
}

impl From<Denominator> for OverlapDenominator {
    fn from(d: Denominator) -> Self {
        match d {
            Denominator::Max => OverlapDenominator::Max,
            Denominator::Min => OverlapDenominator::Min,
            Denominator::Union => OverlapDenominator::Union,
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl InputArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if self.corpus.is_some() {
            cfg.paths.corpus = self.corpus.clone();
        }
        if self.lexicon.is_some() {
            cfg.paths.lexicon = self.lexicon.clone();
        }
        if self.stopwords.is_some() {
            cfg.paths.stopwords = self.stopwords.clone();
        }
        cfg.text.pre_tagged |= self.pre_tagged;
        set(&mut cfg.vocab.normalization, self.normalization);
    }
}

impl FilterArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.filter.threshold, self.threshold);
        set(&mut cfg.filter.log_base, self.log_base);
        set(
            &mut cfg.filter.min_comments_per_image,
            self.min_comments_per_image,
        );
    }
}

impl LdaArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        let l = &mut cfg.lda;
        set(&mut l.topics, self.topics);
        if let Some(Alpha(a)) = self.alpha {
            l.alpha = a;
        }
        set(&mut l.beta, self.beta);
        set(&mut l.iters, self.iters);
        set(&mut l.burn_in, self.burn_in);
        set(&mut l.seed, self.seed);
        set(&mut l.vocab_cap, self.vocab_cap);
        set(&mut l.doc_freq_cap, self.doc_freq_cap);
        set(&mut l.infer_iters, self.infer_iters);
    }
}

impl MetricArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if self.candidates.is_some() {
            cfg.paths.candidates = self.candidates.clone();
        }
        if self.references.is_some() {
            cfg.paths.references = self.references.clone();
        }
        let m = &mut cfg.metrics;
        m.cider_d |= self.cider_d;
        set(&mut m.max_positions, self.max_positions);
        set(&mut m.overlap_threshold, self.overlap_threshold);
        set(&mut m.denominator, self.denominator.map(Into::into));
    }
}

impl Cli {
    /// The effective configuration: file (or defaults), then flags.
    pub fn resolve_config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::discover(self.config.as_deref())?;
        if let Some(w) = &self.workdir {
            cfg.paths.workdir = w.clone();
        }
        match &self.command {
            Command::BuildVocab(a) => a.apply(&mut cfg),
            Command::Score(a) | Command::Filter(a) => a.apply(&mut cfg),
            Command::LdaTrain(a) | Command::LdaInfer { lda: a, .. } => a.apply(&mut cfg),
            Command::Metrics(a) => a.apply(&mut cfg),
            Command::Report => {}
            Command::Stats { input } => input.apply(&mut cfg),
            Command::Run {
                input,
                filter,
                lda,
                metrics,
            } => {
                input.apply(&mut cfg);
                filter.apply(&mut cfg);
                lda.apply(&mut cfg);
                metrics.apply(&mut cfg);
            }
        }
        Ok(cfg)
    }
}

/// Execute the parsed command; prints a JSON summary to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = cli.resolve_config()?;
    let value = match &cli.command {
        Command::BuildVocab(_) => serde_json::to_value(stages::build_vocab(&cfg)?)?,
        Command::Score(_) => serde_json::to_value(stages::score(&cfg)?)?,
        Command::Filter(_) => serde_json::to_value(stages::filter(&cfg)?)?,
        Command::LdaTrain(_) => serde_json::to_value(stages::lda_train(&cfg)?)?,
        Command::LdaInfer { input, .. } => {
            serde_json::to_value(stages::lda_infer(&cfg, input.as_deref())?)?
        }
        Command::Metrics(_) => serde_json::to_value(stages::metrics(&cfg)?)?,
        Command::Report => serde_json::to_value(stages::report(&cfg)?.0)?,
        Command::Stats { .. } => {
            let path = cfg
                .paths
                .corpus
                .clone()
                .context("no corpus given: pass --corpus or set `paths.corpus`")?;
            serde_json::to_value(stages::stats(&cfg, &path)?)?
        }
        Command::Run { .. } => serde_json::to_value(stages::run_all(&cfg)?)?,
    };
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{}", serde_json::to_string_pretty(&value)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.context("writing to stdout"),
    }
}
