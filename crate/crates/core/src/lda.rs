//! Latent Dirichlet allocation over image-level documents, trained with
//! collapsed Gibbs sampling.
//!
//! Every image is one document: the bag of admissible n-grams from all of its
//! kept comments, restricted to a capped vocabulary that excludes n-grams
//! occurring in too many comments. The per-image topic distribution (a row of
//! theta) is the weak label exported downstream.
//!
//! Randomness comes from ChaCha8 addressed by (seed, document, sweep): the
//! document selects the stream and the sweep selects the block offset, so any
//! token update can be replayed without running the chain from the start.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ngram::{extract_ngrams, NGram, Vocabulary};

pub const DEFAULT_TOPICS: usize = 200;
pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_MAX_TERMS: usize = 25_000;
pub const DEFAULT_DOC_FREQ_CAP: f64 = 0.10;

/// Words reserved per (document, sweep) in the ChaCha keystream.
const WORDS_PER_SWEEP: u128 = 1 << 40;

pub(crate) fn stream_rng(seed: u64, stream: u64, sweep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(sweep as u128 * WORDS_PER_SWEEP);
    rng
}

/// Indexed term list for topic modelling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LdaVocabulary {
    terms: Vec<NGram>,
    index: HashMap<NGram, u32>,
    hash: String,
}

impl LdaVocabulary {
    pub fn from_terms(terms: Vec<NGram>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Invalid("LDA vocabulary is empty".into()));
        }
        let mut index = HashMap::with_capacity(terms.len());
        let mut h = Sha256::new();
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Invalid(format!("duplicate LDA term `{t}`")));
            }
            h.update([t.order()]);
            h.update(t.to_string().as_bytes());
            h.update([b'\n']);
        }
        Ok(Self {
            terms,
            index,
            hash: hex::encode(h.finalize()),
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[NGram] {
        &self.terms
    }

    pub fn term(&self, id: usize) -> &NGram {
        &self.terms[id]
    }

    pub fn id_of(&self, ngram: &NGram) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }
}

/// Keep n-grams that occur in strictly less than `doc_freq_cap` of the
/// comments, then the `max_terms` most frequent of those (ties broken by the
/// n-gram's ordering).
pub fn build_lda_vocab(
    vocab: &Vocabulary,
    total_comments: u64,
    doc_freq_cap: f64,
    max_terms: usize,
) -> Result<LdaVocabulary> {
    if total_comments == 0 {
        return Err(Error::Config("total comment count must be positive".into()));
    }
    if !(doc_freq_cap > 0.0 && doc_freq_cap <= 1.0) {
        return Err(Error::Config(format!(
            "doc-frequency cap must be in (0, 1], got {doc_freq_cap}"
        )));
    }
    let mut survivors: Vec<(&NGram, u64)> = vocab
        .iter()
        // integer-safe form of doc_freq / total < cap
        .filter(|(_, e)| (e.doc_freq as f64) < doc_freq_cap * total_comments as f64)
        .map(|(n, e)| (n, e.corpus_freq))
        .collect();
    survivors.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    survivors.truncate(max_terms);
    if survivors.is_empty() {
        return Err(Error::Invalid(
            "no n-gram survives the LDA vocabulary caps".into(),
        ));
    }
    LdaVocabulary::from_terms(survivors.into_iter().map(|(n, _)| n.clone()).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LdaDocument {
    pub image_id: String,
    pub term_ids: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssembledDocuments {
    pub documents: Vec<LdaDocument>,
    /// Images whose bag came out empty after vocabulary mapping.
    pub empty: Vec<String>,
}

/// One document per image: all admissible n-grams from all its comments that
/// are in the LDA vocabulary, in comment and position order.
pub fn assemble_documents(corpus: &Corpus, vocab: &LdaVocabulary) -> AssembledDocuments {
    let documents: Vec<LdaDocument> = corpus
        .images()
        .par_iter()
        .map(|img| LdaDocument {
            image_id: img.image_id.clone(),
            term_ids: img
                .comments
                .iter()
                .flat_map(|c| extract_ngrams(&c.tokens))
                .filter_map(|ex| vocab.id_of(&ex.ngram))
                .collect(),
        })
        .collect();
    let empty: Vec<String> = documents
        .iter()
        .filter(|d| d.term_ids.is_empty())
        .map(|d| d.image_id.clone())
        .collect();
    if !empty.is_empty() {
        log::warn!(
            "{} documents are empty after vocabulary mapping",
            empty.len()
        );
    }
    AssembledDocuments { documents, empty }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub topics: usize,
    /// Symmetric document-topic prior; `None` means 50 / topics.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Average the estimates over post-burn-in sweeps instead of taking the
    /// final sample.
    pub average_samples: bool,
    /// Sweep interval for checkpoint callbacks (0 disables them).
    pub checkpoint_every: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            topics: DEFAULT_TOPICS,
            alpha: None,
            beta: DEFAULT_BETA,
            iters: 500,
            burn_in: 100,
            seed: 42,
            average_samples: false,
            checkpoint_every: 50,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::Config(format!(
                "need at least 2 topics, got {}",
                self.topics
            )));
        }
        if self.iters <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iters, self.burn_in
            )));
        }
        if !(self.alpha() > 0.0) || !(self.beta > 0.0) {
            return Err(Error::Config("Dirichlet priors must be positive".into()));
        }
        Ok(())
    }
}

/// Collapsed Gibbs sampler state. Counts are kept word-major internally.
pub struct GibbsSampler<'a> {
    docs: &'a [LdaDocument],
    k: usize,
    m: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    z: Vec<Vec<u32>>,
    /// M x K
    n_wk: Vec<u32>,
    /// N x K
    n_dk: Vec<u32>,
    n_k: Vec<u64>,
    sweeps: usize,
    scratch: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(docs: &'a [LdaDocument], vocab_size: usize, config: &LdaConfig) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(Error::Config("vocabulary is empty".into()));
        }
        if docs.iter().all(|d| d.term_ids.is_empty()) {
            return Err(Error::Config("all documents are empty".into()));
        }
        if let Some(bad) = docs
            .iter()
            .flat_map(|d| &d.term_ids)
            .find(|&&w| w as usize >= vocab_size)
        {
            return Err(Error::Invalid(format!(
                "term id {bad} outside vocabulary of size {vocab_size}"
            )));
        }
        let k = config.topics;
        let mut s = Self {
            docs,
            k,
            m: vocab_size,
            alpha: config.alpha(),
            beta: config.beta,
            seed: config.seed,
            z: Vec::with_capacity(docs.len()),
            n_wk: vec![0; vocab_size * k],
            n_dk: vec![0; docs.len() * k],
            n_k: vec![0; k],
            sweeps: 0,
            scratch: vec![0.0; k],
        };
        for (d, doc) in docs.iter().enumerate() {
            let mut rng = stream_rng(s.seed, d as u64, 0);
            let zd: Vec<u32> = doc
                .term_ids
                .iter()
                .map(|&w| {
                    let t = rng.gen_range(0..k);
                    s.n_wk[w as usize * k + t] += 1;
                    s.n_dk[d * k + t] += 1;
                    s.n_k[t] += 1;
                    t as u32
                })
                .collect();
            s.z.push(zd);
        }
        Ok(s)
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    /// One full pass over every token of every document.
    pub fn sweep(&mut self) {
        self.sweeps += 1;
        let (k, m_beta) = (self.k, self.m as f64 * self.beta);
        for (d, doc) in self.docs.iter().enumerate() {
            if doc.term_ids.is_empty() {
                continue;
            }
            let mut rng = stream_rng(self.seed, d as u64, self.sweeps as u64);
            let dk = &mut self.n_dk[d * k..(d + 1) * k];
            for (i, &w) in doc.term_ids.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                let wk = &mut self.n_wk[w * k..(w + 1) * k];
                dk[old] -= 1;
                wk[old] -= 1;
                self.n_k[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (dk[t] as f64 + self.alpha) * (wk[t] as f64 + self.beta)
                        / (self.n_k[t] as f64 + m_beta);
                    self.scratch[t] = total;
                }
                let u = rng.gen::<f64>() * total;
                let new = self.scratch.iter().position(|&c| c > u).unwrap_or(k - 1);

                dk[new] += 1;
                wk[new] += 1;
                self.n_k[new] += 1;
                self.z[d][i] = new as u32;
            }
        }
    }

    /// Recompute every count matrix from the assignments and compare.
    pub fn check_consistency(&self) -> Result<()> {
        check_counts(
            self.docs,
            &self.z,
            self.k,
            self.m,
            |w, t| self.n_wk[w * self.k + t],
            &self.n_dk,
            &self.n_k,
        )
    }

    pub fn phi(&self) -> Vec<f64> {
        phi_from_counts(
            self.k,
            self.m,
            self.beta,
            |w, t| self.n_wk[w * self.k + t],
            &self.n_k,
        )
    }

    pub fn theta(&self) -> Vec<f64> {
        theta_from_counts(self.docs, self.k, self.alpha, &self.n_dk)
    }

    /// In-sample perplexity of the current state.
    pub fn training_perplexity(&self) -> f64 {
        let phi = self.phi();
        let theta = self.theta();
        perplexity_from(
            self.docs
                .iter()
                .enumerate()
                .map(|(d, doc)| (&theta[d * self.k..(d + 1) * self.k], &doc.term_ids[..])),
            &phi,
            self.k,
            self.m,
        )
    }
}

fn check_counts(
    docs: &[LdaDocument],
    z: &[Vec<u32>],
    k: usize,
    m: usize,
    n_wk: impl Fn(usize, usize) -> u32,
    n_dk: &[u32],
    n_k: &[u64],
) -> Result<()> {
    let mut wk = vec![0u32; m * k];
    let mut dk = vec![0u32; docs.len() * k];
    let mut tk = vec![0u64; k];
    if z.len() != docs.len() {
        return Err(Error::Invalid(
            "assignment count differs from document count".into(),
        ));
    }
    for (d, (doc, zd)) in docs.iter().zip(z).enumerate() {
        if zd.len() != doc.term_ids.len() {
            return Err(Error::Invalid(format!(
                "document {d}: assignment length mismatch"
            )));
        }
        for (&w, &t) in doc.term_ids.iter().zip(zd) {
            let t = t as usize;
            if t >= k {
                return Err(Error::Invalid(format!("topic {t} out of range")));
            }
            wk[w as usize * k + t] += 1;
            dk[d * k + t] += 1;
            tk[t] += 1;
        }
    }
    for w in 0..m {
        for t in 0..k {
            if wk[w * k + t] != n_wk(w, t) {
                return Err(Error::Invalid(format!(
                    "n_kw[{t},{w}] inconsistent with assignments"
                )));
            }
        }
    }
    if dk != n_dk {
        return Err(Error::Invalid("n_dk inconsistent with assignments".into()));
    }
    if tk != n_k {
        return Err(Error::Invalid("n_k inconsistent with assignments".into()));
    }
    Ok(())
}

/// K x M row-major.
fn phi_from_counts(
    k: usize,
    m: usize,
    beta: f64,
    n_wk: impl Fn(usize, usize) -> u32,
    n_k: &[u64],
) -> Vec<f64> {
    let mut phi = vec![0.0; k * m];
    for t in 0..k {
        let denom = n_k[t] as f64 + m as f64 * beta;
        for w in 0..m {
            phi[t * m + w] = (n_wk(w, t) as f64 + beta) / denom;
        }
    }
    phi
}

/// N x K row-major.
fn theta_from_counts(docs: &[LdaDocument], k: usize, alpha: f64, n_dk: &[u32]) -> Vec<f64> {
    let mut theta = vec![0.0; docs.len() * k];
    for (d, doc) in docs.iter().enumerate() {
        let denom = doc.term_ids.len() as f64 + k as f64 * alpha;
        for t in 0..k {
            theta[d * k + t] = (n_dk[d * k + t] as f64 + alpha) / denom;
        }
    }
    theta
}

fn perplexity_from<'x>(
    rows: impl Iterator<Item = (&'x [f64], &'x [u32])>,
    phi: &[f64],
    k: usize,
    m: usize,
) -> f64 {
    let mut log_lik = 0.0;
    let mut tokens = 0usize;
    for (theta_d, words) in rows {
        for &w in words {
            let p: f64 = (0..k).map(|t| theta_d[t] * phi[t * m + w as usize]).sum();
            log_lik += p.ln();
            tokens += 1;
        }
    }
    (-log_lik / tokens as f64).exp()
}

/// Trained (or untrained) topic model with its counts and estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub vocab: LdaVocabulary,
    pub documents: Vec<LdaDocument>,
    /// K x M row-major.
    pub n_kw: Vec<u32>,
    /// N x K row-major.
    pub n_dk: Vec<u32>,
    pub n_k: Vec<u64>,
    pub z: Vec<Vec<u32>>,
    /// K x M row-major.
    pub phi: Vec<f64>,
    /// N x K row-major.
    pub theta: Vec<f64>,
}

/// State handed to checkpoint callbacks during training.
pub struct Checkpoint<'s, 'a> {
    pub sweep: usize,
    pub sampler: &'s GibbsSampler<'a>,
}

pub fn train_lda(
    docs: &[LdaDocument],
    vocab: &LdaVocabulary,
    config: &LdaConfig,
) -> Result<TopicModel> {
    train_lda_with_checkpoints(docs, vocab, config, |_| {})
}

pub fn train_lda_with_checkpoints(
    docs: &[LdaDocument],
    vocab: &LdaVocabulary,
    config: &LdaConfig,
    mut on_checkpoint: impl FnMut(&Checkpoint<'_, '_>),
) -> Result<TopicModel> {
    let mut sampler = GibbsSampler::new(docs, vocab.len(), config)?;
    let empty = docs.iter().filter(|d| d.term_ids.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} empty documents get a uniform topic distribution");
    }
    let (k, m) = (config.topics, vocab.len());
    let mut phi_sum = vec![0.0; k * m];
    let mut theta_sum = vec![0.0; docs.len() * k];
    let mut samples = 0usize;

    for it in 1..=config.iters {
        sampler.sweep();
        if config.average_samples && it > config.burn_in {
            for (acc, v) in phi_sum.iter_mut().zip(sampler.phi()) {
                *acc += v;
            }
            for (acc, v) in theta_sum.iter_mut().zip(sampler.theta()) {
                *acc += v;
            }
            samples += 1;
        }
        if config.checkpoint_every > 0 && (it % config.checkpoint_every == 0 || it == config.iters)
        {
            on_checkpoint(&Checkpoint {
                sweep: it,
                sampler: &sampler,
            });
        }
    }

    let (phi, theta) = if config.average_samples {
        let n = samples as f64;
        (
            phi_sum.into_iter().map(|v| v / n).collect(),
            theta_sum.into_iter().map(|v| v / n).collect(),
        )
    } else {
        (sampler.phi(), sampler.theta())
    };

    let mut n_kw = vec![0u32; k * m];
    for w in 0..m {
        for t in 0..k {
            n_kw[t * m + w] = sampler.n_wk[w * k + t];
        }
    }
    Ok(TopicModel {
        k,
        alpha: sampler.alpha,
        beta: sampler.beta,
        iters: config.iters,
        burn_in: config.burn_in,
        seed: config.seed,
        vocab: vocab.clone(),
        documents: docs.to_vec(),
        n_kw,
        n_dk: sampler.n_dk,
        n_k: sampler.n_k,
        z: sampler.z,
        phi,
        theta,
    })
}

impl TopicModel {
    /// Model with no training documents: every topic is uniform over the
    /// vocabulary.
    pub fn untrained(vocab: LdaVocabulary, k: usize, alpha: f64, beta: f64) -> Self {
        let m = vocab.len();
        Self {
            k,
            alpha,
            beta,
            iters: 0,
            burn_in: 0,
            seed: 0,
            vocab,
            documents: Vec::new(),
            n_kw: vec![0; k * m],
            n_dk: Vec::new(),
            n_k: vec![0; k],
            z: Vec::new(),
            phi: vec![1.0 / m as f64; k * m],
            theta: Vec::new(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn phi_row(&self, topic: usize) -> &[f64] {
        let m = self.vocab_size();
        &self.phi[topic * m..(topic + 1) * m]
    }

    pub fn theta_row(&self, doc: usize) -> &[f64] {
        &self.theta[doc * self.k..(doc + 1) * self.k]
    }

    pub fn check_consistency(&self) -> Result<()> {
        let m = self.vocab_size();
        check_counts(
            &self.documents,
            &self.z,
            self.k,
            m,
            |w, t| self.n_kw[t * m + w],
            &self.n_dk,
            &self.n_k,
        )
    }

    /// The `n` highest-probability terms of a topic, descending, ties broken by
    /// n-gram ordering.
    pub fn top_terms(&self, topic: usize, n: usize) -> Result<Vec<(NGram, f64)>> {
        if topic >= self.k {
            return Err(Error::Invalid(format!(
                "topic {topic} out of range (K = {})",
                self.k
            )));
        }
        let row = self.phi_row(topic);
        let mut ids: Vec<usize> = (0..row.len()).collect();
        ids.sort_by(|&a, &b| {
            row[b]
                .total_cmp(&row[a])
                .then_with(|| self.vocab.term(a).cmp(self.vocab.term(b)))
        });
        Ok(ids
            .into_iter()
            .take(n)
            .map(|w| (self.vocab.term(w).clone(), row[w]))
            .collect())
    }

    /// Topic distribution of a new document with topic-term probabilities held
    /// fixed. Returns the mean of theta over the second half of the sweeps.
    /// Empty documents get the uniform distribution.
    pub fn infer_topics(
        &self,
        doc: &LdaDocument,
        vocab_hash: &str,
        iters: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        if vocab_hash != self.vocab.hash() {
            return Err(Error::HashMismatch {
                what: "LDA vocabulary".into(),
                expected: self.vocab.hash().into(),
                actual: vocab_hash.into(),
            });
        }
        let (k, m) = (self.k, self.vocab_size());
        if let Some(bad) = doc.term_ids.iter().find(|&&w| w as usize >= m) {
            return Err(Error::Invalid(format!(
                "term id {bad} outside vocabulary of size {m}"
            )));
        }
        if doc.term_ids.is_empty() {
            log::warn!(
                "document `{}` is empty; returning uniform topics",
                doc.image_id
            );
            return Ok(vec![1.0 / k as f64; k]);
        }
        let iters = iters.max(1);
        let mut counts = vec![0u32; k];
        let mut init = stream_rng(seed, 0, 0);
        let mut z: Vec<usize> = doc
            .term_ids
            .iter()
            .map(|_| {
                let t = init.gen_range(0..k);
                counts[t] += 1;
                t
            })
            .collect();

        let len = doc.term_ids.len() as f64;
        let denom = len + k as f64 * self.alpha;
        let first_kept = iters / 2 + 1;
        let mut theta_sum = vec![0.0; k];
        let mut cum = vec![0.0; k];
        for sweep in 1..=iters {
            let mut rng = stream_rng(seed, 0, sweep as u64);
            for (i, &w) in doc.term_ids.iter().enumerate() {
                counts[z[i]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (counts[t] as f64 + self.alpha) * self.phi[t * m + w as usize];
                    cum[t] = total;
                }
                let u = rng.gen::<f64>() * total;
                let new = cum.iter().position(|&c| c > u).unwrap_or(k - 1);
                counts[new] += 1;
                z[i] = new;
            }
            if sweep >= first_kept {
                for t in 0..k {
                    theta_sum[t] += (counts[t] as f64 + self.alpha) / denom;
                }
            }
        }
        let n = (iters - first_kept + 1) as f64;
        Ok(theta_sum.into_iter().map(|v| v / n).collect())
    }

    /// `exp(-sum log p(w|d) / tokens)` over held-out documents, with each
    /// document's topics from [`TopicModel::infer_topics`] seeded by
    /// `seed + index`.
    pub fn perplexity(&self, heldout: &[LdaDocument], iters: usize, seed: u64) -> Result<f64> {
        let tokens: usize = heldout.iter().map(|d| d.term_ids.len()).sum();
        if tokens == 0 {
            return Err(Error::Invalid("held-out set has no tokens".into()));
        }
        let thetas: Vec<Vec<f64>> = heldout
            .par_iter()
            .enumerate()
            .map(|(i, d)| {
                self.infer_topics(d, self.vocab.hash(), iters, seed.wrapping_add(i as u64))
            })
            .collect::<Result<_>>()?;
        Ok(perplexity_from(
            thetas
                .iter()
                .zip(heldout)
                .map(|(t, d)| (&t[..], &d.term_ids[..])),
            &self.phi,
            self.k,
            self.vocab_size(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Comment, ImageEntry};
    use crate::ngram::build_vocabulary;
    use crate::text::{Tag, TaggedToken};

    fn vocab_of(n: usize) -> LdaVocabulary {
        LdaVocabulary::from_terms((0..n).map(|i| NGram::unigram(format!("w{i:03}"))).collect())
            .unwrap()
    }

    fn doc(id: &str, ids: &[u32]) -> LdaDocument {
        LdaDocument {
            image_id: id.into(),
            term_ids: ids.to_vec(),
        }
    }

    fn cfg(k: usize, iters: usize, burn_in: usize, seed: u64) -> LdaConfig {
        LdaConfig {
            topics: k,
            alpha: Some(0.5),
            beta: 0.1,
            iters,
            burn_in,
            seed,
            average_samples: false,
            checkpoint_every: 1,
        }
    }

    #[test]
    fn config_errors() {
        let v = vocab_of(3);
        let docs = [doc("a", &[0, 1])];
        assert!(matches!(
            train_lda(&docs, &v, &cfg(1, 10, 0, 1)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_lda(&docs, &v, &cfg(2, 10, 10, 1)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_lda(&[doc("a", &[])], &v, &cfg(2, 10, 0, 1)),
            Err(Error::Config(_))
        ));
        assert!(train_lda(&[doc("a", &[7])], &v, &cfg(2, 10, 0, 1)).is_err());
    }

    #[test]
    fn alpha_auto_is_fifty_over_k() {
        let c = LdaConfig {
            topics: 200,
            ..LdaConfig::default()
        };
        assert_eq!(c.alpha(), 0.25);
    }

    #[test]
    fn single_token_theta_takes_one_of_two_values() {
        let v = vocab_of(1);
        let c = LdaConfig {
            alpha: Some(0.3),
            ..cfg(2, 5, 0, 9)
        };
        let model = train_lda(&[doc("a", &[0])], &v, &c).unwrap();
        let a = 0.3;
        let hi = (1.0 + a) / (1.0 + 2.0 * a);
        let lo = a / (1.0 + 2.0 * a);
        let row = model.theta_row(0);
        let mut sorted = row.to_vec();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - lo).abs() < 1e-12 && (sorted[1] - hi).abs() < 1e-12);
    }

    #[test]
    fn empty_document_gets_uniform_theta() {
        let v = vocab_of(4);
        let docs = [doc("a", &[0, 1, 2]), doc("b", &[])];
        let model = train_lda(&docs, &v, &cfg(4, 5, 1, 3)).unwrap();
        for &x in model.theta_row(1) {
            assert!((x - 0.25).abs() < 1e-12);
        }
        let theta = model.infer_topics(&doc("c", &[]), v.hash(), 10, 1).unwrap();
        assert_eq!(theta, vec![0.25; 4]);
    }

    #[test]
    fn counts_stay_consistent() {
        let v = vocab_of(6);
        let docs = [
            doc("a", &[0, 1, 2, 0]),
            doc("b", &[3, 4, 5, 5, 3]),
            doc("c", &[1, 4]),
        ];
        let total: u64 = docs.iter().map(|d| d.term_ids.len() as u64).sum();
        let mut checks = 0;
        let model = train_lda_with_checkpoints(&docs, &v, &cfg(3, 20, 5, 11), |cp| {
            cp.sampler.check_consistency().unwrap();
            checks += 1;
        })
        .unwrap();
        assert_eq!(checks, 20);
        model.check_consistency().unwrap();
        assert_eq!(model.n_k.iter().sum::<u64>(), total);
        for t in 0..3 {
            assert!((model.phi_row(t).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for d in 0..3 {
            assert!((model.theta_row(d).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn corrupted_counts_are_detected() {
        let v = vocab_of(3);
        let docs = [doc("a", &[0, 1, 2])];
        let mut model = train_lda(&docs, &v, &cfg(2, 3, 1, 1)).unwrap();
        model.n_kw[0] += 1;
        assert!(model.check_consistency().is_err());
    }

    #[test]
    fn averaged_estimates_are_normalized() {
        let v = vocab_of(5);
        let docs = [doc("a", &[0, 1, 2, 0]), doc("b", &[3, 4, 4])];
        let c = LdaConfig {
            average_samples: true,
            ..cfg(2, 30, 10, 5)
        };
        let model = train_lda(&docs, &v, &c).unwrap();
        for t in 0..2 {
            assert!((model.phi_row(t).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for d in 0..2 {
            assert!((model.theta_row(d).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_chain() {
        let v = vocab_of(8);
        let docs: Vec<_> = (0..10)
            .map(|i| {
                doc(
                    &i.to_string(),
                    &[(i % 8) as u32, ((i * 3) % 8) as u32, 2, 5],
                )
            })
            .collect();
        let a = train_lda(&docs, &v, &cfg(3, 15, 5, 77)).unwrap();
        let b = train_lda(&docs, &v, &cfg(3, 15, 5, 77)).unwrap();
        assert_eq!(a, b);
        let c = train_lda(&docs, &v, &cfg(3, 15, 5, 78)).unwrap();
        assert_ne!(a.z, c.z);
    }

    #[test]
    fn token_order_permutation_keeps_invariants() {
        let v = vocab_of(6);
        let docs = [doc("a", &[0, 1, 2, 3, 4, 5, 0]), doc("b", &[5, 4, 3, 3])];
        let permuted = [doc("a", &[0, 5, 4, 3, 2, 1, 0]), doc("b", &[3, 3, 4, 5])];
        for d in [&docs, &permuted] {
            let model = train_lda(d, &v, &cfg(2, 10, 2, 4)).unwrap();
            model.check_consistency().unwrap();
            assert_eq!(model.n_k.iter().sum::<u64>(), 11);
        }
    }

    #[test]
    fn top_terms_contract() {
        let v = vocab_of(5);
        let docs = [doc("a", &[0, 0, 0, 1, 2]), doc("b", &[3, 4, 4])];
        let model = train_lda(&docs, &v, &cfg(2, 10, 2, 4)).unwrap();
        assert!(model.top_terms(0, 0).unwrap().is_empty());
        let all = model.top_terms(1, 5).unwrap();
        assert_eq!(all.len(), 5);
        assert!((all.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(all.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(model.top_terms(2, 1).is_err());
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        let v = vocab_of(50);
        let model = TopicModel::untrained(v.clone(), 4, 0.1, 0.01);
        let held = [doc("h", &[1, 2, 3, 40, 41]), doc("g", &[7])];
        let p = model.perplexity(&held, 20, 1).unwrap();
        assert!((p - 50.0).abs() < 0.5);
        assert!(model.perplexity(&[doc("e", &[])], 5, 1).is_err());
    }

    #[test]
    fn infer_rejects_foreign_vocabulary() {
        let model = TopicModel::untrained(vocab_of(3), 2, 0.1, 0.01);
        let other = vocab_of(4);
        assert!(matches!(
            model.infer_topics(&doc("x", &[0]), other.hash(), 5, 1),
            Err(Error::HashMismatch { .. })
        ));
    }

    #[test]
    fn lda_vocab_caps() {
        // 10 comments; "sky" appears in exactly 1 (10%) -> excluded at cap 0.10
        let mut comments = vec![vec![TaggedToken::new("sky", Tag::Noun)]];
        for i in 0..9 {
            comments.push(vec![TaggedToken::new(format!("t{i}"), Tag::Noun)]);
        }
        let images = comments
            .into_iter()
            .enumerate()
            .map(|(i, toks)| ImageEntry {
                image_id: format!("i{i}"),
                comments: vec![Comment::new("c", "x").with_tokens(toks)],
            })
            .collect();
        let corpus = Corpus::new(images).unwrap();
        let v = build_vocabulary(&corpus).unwrap();
        assert!(build_lda_vocab(&v, 10, 0.10, 100).is_err());
        let lv = build_lda_vocab(&v, 10, 0.11, 100).unwrap();
        assert_eq!(lv.len(), 10);
        assert!(lv.id_of(&NGram::unigram("sky")).is_some());
        let lv = build_lda_vocab(&v, 11, 0.10, 3).unwrap();
        let names: Vec<String> = lv.terms().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, ["sky", "t0", "t1"]);
    }

    #[test]
    fn assemble_maps_and_flags() {
        let lv = LdaVocabulary::from_terms(vec![
            NGram::unigram("water"),
            NGram::bigram("soft", "water"),
        ])
        .unwrap();
        let toks = vec![
            TaggedToken::new("soft", Tag::Adj),
            TaggedToken::new("water", Tag::Noun),
        ];
        let images = vec![
            ImageEntry {
                image_id: "a".into(),
                comments: vec![
                    Comment::new("1", "x").with_tokens(toks),
                    Comment::new("2", "y").with_tokens(vec![TaggedToken::new("water", Tag::Noun)]),
                ],
            },
            ImageEntry {
                image_id: "b".into(),
                comments: vec![
                    Comment::new("1", "z").with_tokens(vec![TaggedToken::new("sky", Tag::Noun)])
                ],
            },
        ];
        let out = assemble_documents(&Corpus::new(images).unwrap(), &lv);
        assert_eq!(out.documents[0].term_ids, vec![1, 0, 0]);
        assert!(out.documents[1].term_ids.is_empty());
        assert_eq!(out.empty, vec!["b".to_string()]);
    }
}
