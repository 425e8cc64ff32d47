use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{ngram_counts, CaptionSet};
use crate::error::{Error, Result};

/// Standard deviation of the CIDEr-D Gaussian length penalty.
pub const DEFAULT_SIGMA: f64 = 6.0;

const MAX_N: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CiderOptions {
    /// CIDEr-D variant: clip candidate term weights by the reference weights
    /// and apply a Gaussian penalty on the length difference.
    pub length_penalty: bool,
    pub sigma: f64,
}

impl Default for CiderOptions {
    fn default() -> Self {
        Self {
            length_penalty: false,
            sigma: DEFAULT_SIGMA,
        }
    }
}

// Ordered so that floating-point sums are reproducible.
type Vector<'a> = BTreeMap<&'a [String], f64>;

struct Weighted<'a> {
    vecs: Vec<Vector<'a>>,
    norms: Vec<f64>,
    len: usize,
}

fn weigh<'a>(
    tokens: &'a [String],
    df: &HashMap<&[String], usize>,
    log_images: f64,
) -> Weighted<'a> {
    let mut vecs = Vec::with_capacity(MAX_N);
    let mut norms = Vec::with_capacity(MAX_N);
    for n in 1..=MAX_N {
        let v: Vector<'a> = ngram_counts(tokens, n)
            .into_iter()
            .map(|(g, tf)| {
                let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
                (g, tf as f64 * (log_images - d.ln()))
            })
            .collect();
        norms.push(v.values().map(|x| x * x).sum::<f64>().sqrt());
        vecs.push(v);
    }
    Weighted {
        vecs,
        norms,
        len: tokens.len(),
    }
}

fn similarity(cand: &Weighted<'_>, reference: &Weighted<'_>, opts: &CiderOptions) -> [f64; MAX_N] {
    let mut out = [0.0; MAX_N];
    for n in 0..MAX_N {
        let mut dot = 0.0;
        for (g, &c) in &cand.vecs[n] {
            if let Some(&r) = reference.vecs[n].get(g) {
                dot += if opts.length_penalty {
                    c.min(r) * r
                } else {
                    c * r
                };
            }
        }
        if cand.norms[n] != 0.0 && reference.norms[n] != 0.0 {
            dot /= cand.norms[n] * reference.norms[n];
        }
        if opts.length_penalty {
            let delta = cand.len as f64 - reference.len as f64;
            dot *= (-(delta * delta) / (2.0 * opts.sigma * opts.sigma)).exp();
        }
        out[n] = dot;
    }
    out
}

/// Per-image CIDEr: TF-IDF n-gram vectors (n = 1..4) with document
/// frequencies counted over each image's pooled references, cosine against
/// each reference, averaged over references and n, times 10.
pub fn cider_per_image(set: &CaptionSet, opts: &CiderOptions) -> Result<BTreeMap<String, f64>> {
    let pairs = set.pairs()?;
    if pairs.len() < 2 {
        return Err(Error::Invalid(
            "CIDEr needs at least 2 images to estimate document frequencies".into(),
        ));
    }
    let mut df: HashMap<&[String], usize> = HashMap::new();
    for (_, _, refs) in &pairs {
        let mut seen: HashSet<&[String]> = HashSet::new();
        for r in refs.iter() {
            for n in 1..=MAX_N {
                seen.extend(ngram_counts(r, n).into_keys());
            }
        }
        for g in seen {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let log_images = (pairs.len() as f64).ln();

    Ok(pairs
        .iter()
        .map(|(id, cand, refs)| {
            let c = weigh(cand, &df, log_images);
            let mut acc = [0.0; MAX_N];
            for r in refs.iter() {
                let sim = similarity(&c, &weigh(r, &df, log_images), opts);
                for n in 0..MAX_N {
                    acc[n] += sim[n];
                }
            }
            let mean = acc.iter().sum::<f64>() / MAX_N as f64 / refs.len() as f64;
            (id.to_string(), mean * 10.0)
        })
        .collect())
}

/// Corpus CIDEr: mean of the per-image scores.
pub fn cider(set: &CaptionSet, opts: &CiderOptions) -> Result<f64> {
    let per_image = cider_per_image(set, opts)?;
    Ok(per_image.values().sum::<f64>() / per_image.len() as f64)
}
