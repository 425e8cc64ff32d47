//! Planted-topic corpora drawn from the LDA generative process, for checking
//! that training recovers known topics.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Dirichlet;

use crate::lda::{LdaDocument, LdaVocabulary};
use crate::ngram::NGram;

#[derive(Clone, Debug)]
pub struct PlantedCorpus {
    pub vocab: LdaVocabulary,
    /// K x M row-major topic-term distributions.
    pub phi: Vec<f64>,
    pub topics: usize,
    pub documents: Vec<LdaDocument>,
    /// Per-document topic mixtures used to generate `documents`.
    pub mixtures: Vec<Vec<f64>>,
}

/// Topics with disjoint supports of `words_per_topic` words each. Within a
/// support, word `j` has weight proportional to `1 / (j + 1)`, so each topic
/// has a unique most frequent word (its first one).
pub fn disjoint_topics(topics: usize, words_per_topic: usize) -> (LdaVocabulary, Vec<f64>) {
    let m = topics * words_per_topic;
    let terms = (0..topics)
        .flat_map(|t| (0..words_per_topic).map(move |j| NGram::unigram(format!("t{t}w{j:02}"))))
        .collect();
    let vocab = LdaVocabulary::from_terms(terms).expect("unique generated terms");
    let norm: f64 = (0..words_per_topic).map(|j| 1.0 / (j + 1) as f64).sum();
    let mut phi = vec![0.0; topics * m];
    for t in 0..topics {
        for j in 0..words_per_topic {
            phi[t * m + t * words_per_topic + j] = 1.0 / (j + 1) as f64 / norm;
        }
    }
    (vocab, phi)
}

/// Draw `docs` documents of `len` tokens: mixtures from a symmetric
/// Dirichlet(`doc_alpha`), then topic and word per token.
pub fn generate(
    topics: usize,
    words_per_topic: usize,
    docs: usize,
    len: usize,
    doc_alpha: f64,
    seed: u64,
) -> PlantedCorpus {
    let (vocab, phi) = disjoint_topics(topics, words_per_topic);
    let m = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirichlet = Dirichlet::new_with_size(doc_alpha, topics).expect("valid Dirichlet");
    let word_dists: Vec<WeightedIndex<f64>> = (0..topics)
        .map(|t| WeightedIndex::new(&phi[t * m..(t + 1) * m]).expect("valid topic"))
        .collect();

    let mut documents = Vec::with_capacity(docs);
    let mut mixtures = Vec::with_capacity(docs);
    for d in 0..docs {
        let theta: Vec<f64> = dirichlet.sample(&mut rng);
        let topic_dist = WeightedIndex::new(&theta).unwrap_or_else(|_| {
            // all-zero draws can happen for tiny alpha; fall back to one topic
            let mut w = vec![0.0; topics];
            w[rng.gen_range(0..topics)] = 1.0;
            WeightedIndex::new(w).unwrap()
        });
        let term_ids = (0..len)
            .map(|_| word_dists[topic_dist.sample(&mut rng)].sample(&mut rng) as u32)
            .collect();
        documents.push(LdaDocument {
            image_id: format!("doc{d:05}"),
            term_ids,
        });
        mixtures.push(theta);
    }
    PlantedCorpus {
        vocab,
        phi,
        topics,
        documents,
        mixtures,
    }
}

/// Documents drawn from a single planted topic each; returns the documents
/// and their source topics.
pub fn single_topic_documents(
    planted: &PlantedCorpus,
    docs: usize,
    len: usize,
    seed: u64,
) -> (Vec<LdaDocument>, Vec<usize>) {
    let m = planted.vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(docs);
    let mut labels = Vec::with_capacity(docs);
    for d in 0..docs {
        let t = rng.gen_range(0..planted.topics);
        let dist = WeightedIndex::new(&planted.phi[t * m..(t + 1) * m]).expect("valid topic");
        out.push(LdaDocument {
            image_id: format!("held{d:04}"),
            term_ids: (0..len).map(|_| dist.sample(&mut rng) as u32).collect(),
        });
        labels.push(t);
    }
    (out, labels)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Greedy one-to-one matching of recovered topics (rows of `recovered`) to
/// planted topics by descending cosine similarity. Returns, for every planted
/// topic, its matched recovered topic and the similarity.
pub fn match_topics(
    planted: &[f64],
    recovered: &[f64],
    k_planted: usize,
    k_recovered: usize,
    m: usize,
) -> Vec<(usize, f64)> {
    let mut pairs = Vec::with_capacity(k_planted * k_recovered);
    for p in 0..k_planted {
        for r in 0..k_recovered {
            let sim = cosine(&planted[p * m..(p + 1) * m], &recovered[r * m..(r + 1) * m]);
            pairs.push((sim, p, r));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut matched = vec![None; k_planted];
    let mut used = vec![false; k_recovered];
    for (sim, p, r) in pairs {
        if matched[p].is_none() && !used[r] {
            matched[p] = Some((r, sim));
            used[r] = true;
        }
    }
    matched
        .into_iter()
        .map(|m| m.unwrap_or((usize::MAX, 0.0)))
        .collect()
}
