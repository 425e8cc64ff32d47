//! Pipeline configuration: one TOML document, merged with flag overrides.
//!
//! ```toml
//! [paths]
//! corpus = "data/toy/corpus.jsonl"
//! workdir = "work"
//! candidates = "data/toy/candidates.jsonl"
//! references = "data/toy/references.jsonl"
//! # lexicon = "my_lexicon.tsv"
//! # stopwords = "my_stopwords.txt"
//!
//! [text]
//! pre_tagged = false
//!
//! [vocab]
//! normalization = "pooled"   # or "per-order"
//!
//! [filter]
//! threshold = 20.0
//! log_base = 2.718281828459045
//! min_comments_per_image = 1
//!
//! [lda]
//! topics = 200
//! # alpha = 0.25            # omitted: 50 / topics
//! beta = 0.01
//! iters = 500
//! burn_in = 100
//! seed = 42
//! vocab_cap = 25000
//! doc_freq_cap = 0.10
//! infer_iters = 100
//!
//! [metrics]
//! cider_d = false
//! max_positions = 25
//! overlap_threshold = 0.03
//! denominator = "max"
//! ```
//!
//! Every field is optional. The config hash stamped into artifacts covers all
//! sections except `[paths]`, so moving inputs or the work directory does not
//! change it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crft_core::informativeness::FilterConfig;
use crft_core::lda::{LdaConfig, DEFAULT_DOC_FREQ_CAP, DEFAULT_MAX_TERMS};
use crft_core::metrics::{
    CiderOptions, OverlapDenominator, DEFAULT_MAX_POSITIONS, DEFAULT_OVERLAP_THRESHOLD,
    DEFAULT_SIGMA,
};
use crft_core::Normalization;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CRFT_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub text: TextConfig,
    pub vocab: VocabConfig,
    pub filter: FilterSection,
    pub lda: LdaSection,
    pub metrics: MetricsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub workdir: PathBuf,
    pub candidates: Option<PathBuf>,
    pub references: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: None,
            workdir: PathBuf::from("work"),
            candidates: None,
            references: None,
            lexicon: None,
            stopwords: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    /// Input comments already carry `tokens` and `tags`.
    pub pre_tagged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub normalization: Normalization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub threshold: f64,
    pub log_base: f64,
    pub min_comments_per_image: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        let d = FilterConfig::default();
        Self {
            threshold: d.threshold,
            log_base: d.log_base,
            min_comments_per_image: d.min_comments_per_image,
        }
    }
}

impl FilterSection {
    pub fn to_core(&self) -> FilterConfig {
        FilterConfig {
            threshold: self.threshold,
            log_base: self.log_base,
            min_comments_per_image: self.min_comments_per_image,
            allow_cross_corpus: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSection {
    pub topics: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub average_samples: bool,
    pub vocab_cap: usize,
    pub doc_freq_cap: f64,
    /// Sweeps per document when inferring weak labels.
    pub infer_iters: usize,
    /// Top terms per topic written to `topics.tsv`.
    pub top_terms: usize,
}

impl Default for LdaSection {
    fn default() -> Self {
        let d = LdaConfig::default();
        Self {
            topics: d.topics,
            alpha: d.alpha,
            beta: d.beta,
            iters: d.iters,
            burn_in: d.burn_in,
            seed: d.seed,
            average_samples: d.average_samples,
            vocab_cap: DEFAULT_MAX_TERMS,
            doc_freq_cap: DEFAULT_DOC_FREQ_CAP,
            infer_iters: 100,
            top_terms: 10,
        }
    }
}

impl LdaSection {
    pub fn to_core(&self) -> LdaConfig {
        LdaConfig {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            iters: self.iters,
            burn_in: self.burn_in,
            seed: self.seed,
            average_samples: self.average_samples,
            ..LdaConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Use the CIDEr-D variant (clipping and length penalty).
    pub cider_d: bool,
    pub sigma: f64,
    pub max_positions: usize,
    pub overlap_threshold: f64,
    pub denominator: OverlapDenominator,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            cider_d: false,
            sigma: DEFAULT_SIGMA,
            max_positions: DEFAULT_MAX_POSITIONS,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            denominator: OverlapDenominator::Max,
        }
    }
}

impl MetricsConfig {
    pub fn cider_options(&self) -> CiderOptions {
        CiderOptions {
            length_penalty: self.cider_d,
            sigma: self.sigma,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid pipeline config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg =
            Self::from_toml(&text).with_context(|| format!("in config {}", path.display()))?;
        cfg.resolve_relative_to(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Load `explicit`, else the file named by `CRFT_CONFIG`, else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    /// Relative paths in a config file are taken relative to the file.
    fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        fix(&mut paths.workdir);
        for p in [
            &mut paths.corpus,
            &mut paths.candidates,
            &mut paths.references,
            &mut paths.lexicon,
            &mut paths.stopwords,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.to_core().validate()?;
        self.lda.to_core().validate()?;
        if self.lda.vocab_cap == 0 {
            bail!("lda.vocab_cap must be positive");
        }
        if !(self.lda.doc_freq_cap > 0.0 && self.lda.doc_freq_cap <= 1.0) {
            bail!(
                "lda.doc_freq_cap must be in (0, 1], got {}",
                self.lda.doc_freq_cap
            );
        }
        if self.metrics.max_positions == 0 {
            bail!("metrics.max_positions must be positive");
        }
        if !(0.0..=1.0).contains(&self.metrics.overlap_threshold) {
            bail!("metrics.overlap_threshold must be in [0, 1]");
        }
        if !(self.metrics.sigma > 0.0) {
            bail!("metrics.sigma must be positive");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// sha256 of the canonical TOML of every section but `[paths]`.
    pub fn hash(&self) -> String {
        let hashed = PipelineConfig {
            paths: Paths::default(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(hashed.to_toml().as_bytes()))
    }

    pub fn workdir(&self) -> &Path {
        &self.paths.workdir
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let c = PipelineConfig::default();
        assert_eq!(c.filter.threshold, 20.0);
        assert_eq!(c.lda.topics, 200);
        assert_eq!(c.lda.vocab_cap, 25_000);
        assert_eq!(c.lda.doc_freq_cap, 0.10);
        assert_eq!(c.metrics.max_positions, 25);
        assert_eq!(c.lda.to_core().alpha(), 0.25);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut c = PipelineConfig::default();
        c.lda.alpha = Some(0.1);
        c.vocab.normalization = Normalization::PerOrder;
        c.paths.corpus = Some("x.jsonl".into());
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = PipelineConfig::from_toml("[filter]\nthreshold = 12.5\n").unwrap();
        assert_eq!(c.filter.threshold, 12.5);
        assert_eq!(c.lda.topics, 200);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml("[filter]\nthreshhold = 3\n").is_err());
    }

    #[test]
    fn hash_ignores_paths_but_not_parameters() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.workdir = "/elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.lda.seed = 7;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = PipelineConfig::default();
        c.filter.threshold = 0.0;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.lda.burn_in = c.lda.iters;
        assert!(c.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("crft.toml");
        fs::write(&p, "[paths]\ncorpus = \"c.jsonl\"\nworkdir = \"out\"\n").unwrap();
        let c = PipelineConfig::load(&p).unwrap();
        assert_eq!(c.paths.corpus.unwrap(), dir.path().join("c.jsonl"));
        assert_eq!(c.paths.workdir, dir.path().join("out"));
    }
}
