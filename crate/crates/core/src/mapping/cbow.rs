//! Continuous bag-of-words embeddings with concatenated, distance-weighted
//! context.
//!
//! The hidden representation for a target word is the concatenation of the
//! vectors of the `2r` surrounding words, each scaled by `1 / distance`
//! (left context first, nearest last; then right context, nearest first).
//! Positions past the sentence edge contribute zeros. Without concatenation
//! the scaled vectors are averaged as in standard CBOW. Training uses
//! negative sampling from the unigram distribution raised to 0.75.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    /// Context radius `r`.
    pub window: usize,
    pub epochs: usize,
    pub negative: usize,
    pub learning_rate: f64,
    /// Scale context vectors by `1 / distance`.
    pub distance_decay: bool,
    /// Concatenate context vectors instead of averaging them.
    pub concatenate: bool,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 300,
            window: 2,
            epochs: 5,
            negative: 5,
            learning_rate: 0.025,
            distance_decay: true,
            concatenate: true,
            min_count: 5,
            seed: 1,
        }
    }
}

impl CbowConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("dimension", self.dim),
            ("window", self.window),
            ("epochs", self.epochs),
            ("negative samples", self.negative),
            ("min count", self.min_count),
        ] {
            if v == 0 {
                errs.push(format!("{name} must be positive"));
            }
        }
        if !(self.learning_rate > 0.0) {
            errs.push("learning rate must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Context weights for distances `1..=radius`.
pub fn decay_weights(radius: usize, decay: bool) -> Vec<f64> {
    (1..=radius).map(|d| if decay { 1.0 / d as f64 } else { 1.0 }).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains word vectors on tokenized sentences. Deterministic for a fixed
/// seed.
pub fn train_cbow_variant(corpus: &[Vec<String>], config: &CbowConfig) -> Result<EmbeddingTable> {
    config.validate()?;
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for s in corpus {
        for w in s {
            *freq.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = freq.into_iter().filter(|&(_, c)| c >= config.min_count).collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    if vocab.is_empty() {
        return Err(Error::Invalid(format!(
            "no word occurs at least {} times; the vocabulary is empty",
            config.min_count
        )));
    }
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, (w, _))| (*w, i)).collect();
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|w| index.get(w.as_str()).copied()).collect())
        .collect();

    let v = vocab.len();
    let d = config.dim;
    let r = config.window;
    let slots = 2 * r;
    let hidden = if config.concatenate { slots * d } else { d };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w_in: Vec<f64> = (0..v * d).map(|_| rng.random_range(-0.5..0.5) / d as f64).collect();
    let mut w_out = vec![0.0; v * hidden];
    let noise = WeightedIndex::new(vocab.iter().map(|(_, c)| (*c as f64).powf(0.75)))
        .map_err(|e| Error::Invalid(format!("noise distribution: {e}")))?;
    let decay = decay_weights(r, config.distance_decay);

    let total_steps = (config.epochs * sentences.iter().map(Vec::len).sum::<usize>()).max(1);
    let mut step = 0usize;
    let mut h = vec![0.0; hidden];
    let mut err = vec![0.0; hidden];
    let mut ctx: Vec<Option<(usize, f64)>> = vec![None; slots];
    for _ in 0..config.epochs {
        for s in &sentences {
            for (i, &target) in s.iter().enumerate() {
                let lr = (config.learning_rate * (1.0 - step as f64 / total_steps as f64)).max(config.learning_rate * 1e-4);
                step += 1;
                for k in 0..slots {
                    let (dist, pos) = if k < r {
                        let dist = r - k;
                        (dist, i.checked_sub(dist))
                    } else {
                        let dist = k - r + 1;
                        (dist, Some(i + dist).filter(|&p| p < s.len()))
                    };
                    ctx[k] = pos.map(|p| (s[p], decay[dist - 1]));
                }
                let present = ctx.iter().flatten().count();
                if present == 0 {
                    continue;
                }
                h.iter_mut().for_each(|x| *x = 0.0);
                for (k, c) in ctx.iter().enumerate() {
                    if let Some((w, scale)) = *c {
                        let src = &w_in[w * d..(w + 1) * d];
                        if config.concatenate {
                            for (x, y) in h[k * d..(k + 1) * d].iter_mut().zip(src) {
                                *x = scale * y;
                            }
                        } else {
                            for (x, y) in h.iter_mut().zip(src) {
                                *x += scale * y / present as f64;
                            }
                        }
                    }
                }
                err.iter_mut().for_each(|x| *x = 0.0);
                for n in 0..=config.negative {
                    let (w, label) = if n == 0 {
                        (target, 1.0)
                    } else {
                        let w = noise.sample(&mut rng);
                        if w == target {
                            continue;
                        }
                        (w, 0.0)
                    };
                    let out = &mut w_out[w * hidden..(w + 1) * hidden];
                    let score: f64 = out.iter().zip(&h).map(|(a, b)| a * b).sum();
                    let g = lr * (label - sigmoid(score));
                    for j in 0..hidden {
                        err[j] += g * out[j];
                        out[j] += g * h[j];
                    }
                }
                for (k, c) in ctx.iter().enumerate() {
                    if let Some((w, scale)) = *c {
                        let dst = &mut w_in[w * d..(w + 1) * d];
                        if config.concatenate {
                            for (x, e) in dst.iter_mut().zip(&err[k * d..(k + 1) * d]) {
                                *x += scale * e;
                            }
                        } else {
                            for (x, e) in dst.iter_mut().zip(&err) {
                                *x += scale * e / present as f64;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut table = EmbeddingTable::new(d)?;
    for (k, (w, _)) in vocab.iter().enumerate() {
        table.insert(*w, w_in[k * d..(k + 1) * d].to_vec())?;
    }
    Ok(table)
}
