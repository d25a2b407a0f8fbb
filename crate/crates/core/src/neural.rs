//! Feedforward window taggers.
//!
//! The input to the network at position `i` is the concatenation of the
//! embeddings of the `2c + 1` words around `i` and learned embeddings of the
//! previous tags. One sigmoid hidden layer feeds a softmax over labels.
//! NN2 first replaces every word vector `v` by a convex combination of
//! learned prototype rows, weighted by `softmax(cos(v, P_k) / tau)`.
//!
//! Word vectors are frozen; the unknown-word vector is trained. Positions
//! outside the sentence contribute zero vectors and are not smoothed.
//!
//! The parameter vector is laid out as `w1 (h x input)`, `b1`, `w2 (L x h)`,
//! `b2`, tag embeddings (`(L + 1) x d_t`, last row for the sentence start),
//! prototypes (`m x d`, NN2 only) and the UNK vector.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ConfidenceTaggedSentence, LabeledSentence, TagSet};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linear::crf::to_tagged;
use crate::linear::optim::{self, Objective, TrainConfig};
use crate::linear::{beam_search, log_softmax, DecodeOptions};
use crate::model_io::{ModelReader, ModelWriter};

const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Architecture {
    #[default]
    Nn1,
    Nn2,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Nn1 => "nn1",
            Architecture::Nn2 => "nn2",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nn1" => Ok(Architecture::Nn1),
            "nn2" => Ok(Architecture::Nn2),
            _ => Err(Error::Invalid(format!("unknown architecture {s:?} (expected nn1 or nn2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnConfig {
    pub architecture: Architecture,
    /// Window radius `c`.
    pub window: usize,
    pub hidden: usize,
    /// Number of previous tags fed to the network.
    pub history: usize,
    pub tag_dim: usize,
    pub prototypes: usize,
    pub temperature: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig {
            architecture: Architecture::Nn1,
            window: 2,
            hidden: 100,
            history: 1,
            tag_dim: 20,
            prototypes: 40,
            temperature: 1.0,
        }
    }
}

impl NnConfig {
    pub fn nn2() -> Self {
        NnConfig {
            architecture: Architecture::Nn2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.hidden < 1 {
            errs.push("hidden size must be at least 1".to_string());
        }
        if self.history > 0 && self.tag_dim < 1 {
            errs.push("tag embedding dimension must be at least 1".to_string());
        }
        if self.architecture == Architecture::Nn2 {
            if self.prototypes < 1 {
                errs.push("NN2 needs at least one prototype".to_string());
            }
            if !(self.temperature > 0.0 && self.temperature.is_finite()) {
                errs.push("temperature must be positive".to_string());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn num_prototypes(&self) -> usize {
        match self.architecture {
            Architecture::Nn1 => 0,
            Architecture::Nn2 => self.prototypes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnTrainConfig {
    /// Zero returns the initialization unchanged.
    pub epochs: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub l2: f64,
    /// Sentences per mini-batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Multiplier on the Glorot initialization range.
    pub init_scale: f64,
    pub tolerance: f64,
}

impl Default for NnTrainConfig {
    fn default() -> Self {
        NnTrainConfig {
            epochs: 20,
            learning_rate: 0.2,
            decay: 1e-3,
            l2: 1e-5,
            batch_size: 4,
            seed: 1,
            init_scale: 1.0,
            tolerance: 1e-7,
        }
    }
}

impl NnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.learning_rate > 0.0) {
            errs.push("learning rate must be positive".to_string());
        }
        if !(self.decay >= 0.0) {
            errs.push("decay must be non-negative".to_string());
        }
        if !(self.l2 >= 0.0) {
            errs.push("l2 must be non-negative".to_string());
        }
        if self.batch_size < 1 {
            errs.push("batch size must be at least 1".to_string());
        }
        if !(self.init_scale > 0.0) {
            errs.push("init scale must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn optimizer(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            decay: self.decay,
            l2: self.l2,
            batch_size: self.batch_size,
            seed: self.seed,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    dim: usize,
    labels: usize,
    slots: usize,
    input: usize,
    hidden: usize,
    history: usize,
    tag_dim: usize,
    protos: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    tag: usize,
    proto: usize,
    unk: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &NnConfig, dim: usize, labels: usize) -> Self {
        let slots = 2 * cfg.window + 1;
        let tag_dim = if cfg.history > 0 { cfg.tag_dim } else { 0 };
        let input = slots * dim + cfg.history * tag_dim;
        let h = cfg.hidden;
        let m = cfg.num_prototypes();
        let w1 = 0;
        let b1 = w1 + h * input;
        let w2 = b1 + h;
        let b2 = w2 + labels * h;
        let tag = b2 + labels;
        let proto = tag + (labels + 1) * tag_dim;
        let unk = proto + m * dim;
        Layout {
            dim,
            labels,
            slots,
            input,
            hidden: h,
            history: cfg.history,
            tag_dim,
            protos: m,
            w1,
            b1,
            w2,
            b2,
            tag,
            proto,
            unk,
            total: unk + dim,
        }
    }

    fn groups(&self) -> Vec<(&'static str, Range<usize>)> {
        let mut g = vec![
            ("w1", self.w1..self.b1),
            ("b1", self.b1..self.w2),
            ("w2", self.w2..self.b2),
            ("b2", self.b2..self.tag),
            ("tag_embeddings", self.tag..self.proto),
        ];
        if self.protos > 0 {
            g.push(("prototypes", self.proto..self.unk));
        }
        g.push(("unk", self.unk..self.total));
        g
    }
}

/// One position of the input window.
#[derive(Debug, Clone, Copy)]
pub enum Slot<'a> {
    Word(&'a [f64]),
    Unk,
    /// Outside the sentence.
    Pad,
}

#[derive(Debug, Clone)]
struct SmoothCache {
    weights: Vec<f64>,
    cos: Vec<f64>,
    v_norm: f64,
    p_norms: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt().max(NORM_FLOOR)
}

fn smooth_forward(v: &[f64], protos: &[f64], d: usize, tau: f64) -> (Vec<f64>, SmoothCache) {
    let v_norm = norm(v);
    let p_norms: Vec<f64> = protos.chunks(d).map(norm).collect();
    let cos: Vec<f64> = protos
        .chunks(d)
        .zip(&p_norms)
        .map(|(p, np)| dot(v, p) / (v_norm * np))
        .collect();
    let mut weights: Vec<f64> = cos.iter().map(|c| c / tau).collect();
    log_softmax(&mut weights);
    for a in weights.iter_mut() {
        *a = a.exp();
    }
    let mut out = vec![0.0; d];
    for (p, a) in protos.chunks(d).zip(&weights) {
        for (o, x) in out.iter_mut().zip(p) {
            *o += a * x;
        }
    }
    (
        out,
        SmoothCache {
            weights,
            cos,
            v_norm,
            p_norms,
        },
    )
}

/// Adds the prototype gradient into `g_protos` and returns `dL/dv`.
fn smooth_backward(
    v: &[f64],
    protos: &[f64],
    d: usize,
    tau: f64,
    cache: &SmoothCache,
    g_out: &[f64],
    g_protos: &mut [f64],
) -> Vec<f64> {
    let e: Vec<f64> = protos.chunks(d).map(|p| dot(g_out, p)).collect();
    let mean: f64 = cache.weights.iter().zip(&e).map(|(a, e)| a * e).sum();
    let mut dv = vec![0.0; d];
    for (k, p) in protos.chunks(d).enumerate() {
        let a = cache.weights[k];
        let dc = a * (e[k] - mean) / tau;
        let np = cache.p_norms[k];
        let nv = cache.v_norm;
        let c = cache.cos[k];
        let gp = &mut g_protos[k * d..(k + 1) * d];
        for j in 0..d {
            gp[j] += a * g_out[j] + dc * (v[j] / (nv * np) - c * p[j] / (np * np));
            dv[j] += dc * (p[j] / (nv * np) - c * v[j] / (nv * nv));
        }
    }
    dv
}

/// The smoothing layer on its own: `sum_k a_k P_k` with
/// `a = softmax(cos(v, P_k) / temperature)`. `prototypes` is row-major `m x d`.
pub fn prototype_smoothing(v: &[f64], prototypes: &[f64], temperature: f64) -> Vec<f64> {
    assert!(!v.is_empty() && prototypes.len() % v.len() == 0);
    smooth_forward(v, prototypes, v.len(), temperature).0
}

#[derive(Debug, Clone)]
enum SlotState {
    Pad,
    Word {
        unk: bool,
        raw: Vec<f64>,
        smooth: Option<SmoothCache>,
    },
}

/// Network math over an explicit parameter slice.
struct Net<'a> {
    cfg: &'a NnConfig,
    lay: &'a Layout,
    p: &'a [f64],
}

struct Head {
    x: Vec<f64>,
    hidden: Vec<f64>,
    log_probs: Vec<f64>,
}

impl Net<'_> {
    /// Word part of the input vector plus the per-slot state for backprop.
    fn word_segment(&self, slots: &[Slot]) -> (Vec<f64>, Vec<SlotState>) {
        let d = self.lay.dim;
        let unk = &self.p[self.lay.unk..self.lay.total];
        let protos = &self.p[self.lay.proto..self.lay.unk];
        let mut x = Vec::with_capacity(self.lay.slots * d);
        let mut states = Vec::with_capacity(self.lay.slots);
        for slot in slots {
            let (is_unk, raw) = match slot {
                Slot::Pad => {
                    x.extend(std::iter::repeat(0.0).take(d));
                    states.push(SlotState::Pad);
                    continue;
                }
                Slot::Unk => (true, unk),
                Slot::Word(v) => (false, *v),
            };
            let smooth = if self.lay.protos > 0 {
                let (s, cache) = smooth_forward(raw, protos, d, self.cfg.temperature);
                x.extend(s);
                Some(cache)
            } else {
                x.extend_from_slice(raw);
                None
            };
            states.push(SlotState::Word {
                unk: is_unk,
                raw: raw.to_vec(),
                smooth,
            });
        }
        (x, states)
    }

    fn tag_row(&self, label: Option<usize>) -> &[f64] {
        let row = label.unwrap_or(self.lay.labels);
        let td = self.lay.tag_dim;
        &self.p[self.lay.tag + row * td..self.lay.tag + (row + 1) * td]
    }

    fn head(&self, words: &[f64], history: &[Option<usize>]) -> Head {
        let lay = self.lay;
        let mut x = words.to_vec();
        for &h in history {
            x.extend_from_slice(self.tag_row(h));
        }
        let hidden: Vec<f64> = (0..lay.hidden)
            .map(|j| {
                let row = &self.p[lay.w1 + j * lay.input..lay.w1 + (j + 1) * lay.input];
                let z = dot(row, &x) + self.p[lay.b1 + j];
                1.0 / (1.0 + (-z).exp())
            })
            .collect();
        let mut log_probs: Vec<f64> = (0..lay.labels)
            .map(|r| {
                let row = &self.p[lay.w2 + r * lay.hidden..lay.w2 + (r + 1) * lay.hidden];
                dot(row, &hidden) + self.p[lay.b2 + r]
            })
            .collect();
        log_softmax(&mut log_probs);
        Head { x, hidden, log_probs }
    }

    /// Adds `d log p(gold) / d params` into `grad`; returns `log p(gold)`.
    fn backward(&self, states: &[SlotState], history: &[Option<usize>], head: &Head, gold: usize, grad: &mut [f64]) -> f64 {
        let lay = self.lay;
        let (h, input, d) = (lay.hidden, lay.input, lay.dim);
        let dout: Vec<f64> = head
            .log_probs
            .iter()
            .enumerate()
            .map(|(r, lp)| (r == gold) as u8 as f64 - lp.exp())
            .collect();
        let mut dh = vec![0.0; h];
        for (r, &g) in dout.iter().enumerate() {
            grad[lay.b2 + r] += g;
            let w = &self.p[lay.w2 + r * h..lay.w2 + (r + 1) * h];
            let gw = &mut grad[lay.w2 + r * h..lay.w2 + (r + 1) * h];
            for j in 0..h {
                gw[j] += g * head.hidden[j];
                dh[j] += g * w[j];
            }
        }
        let mut dx = vec![0.0; input];
        for j in 0..h {
            let s = head.hidden[j];
            let dz = dh[j] * s * (1.0 - s);
            if dz == 0.0 {
                continue;
            }
            grad[lay.b1 + j] += dz;
            let w = &self.p[lay.w1 + j * input..lay.w1 + (j + 1) * input];
            let gw = &mut grad[lay.w1 + j * input..lay.w1 + (j + 1) * input];
            for k in 0..input {
                gw[k] += dz * head.x[k];
                dx[k] += dz * w[k];
            }
        }
        for (s, state) in states.iter().enumerate() {
            let SlotState::Word { unk, raw, smooth } = state else {
                continue;
            };
            let seg = &dx[s * d..(s + 1) * d];
            let dv = match smooth {
                Some(cache) => {
                    let protos = &self.p[lay.proto..lay.unk];
                    let (_, rest) = grad.split_at_mut(lay.proto);
                    smooth_backward(raw, protos, d, self.cfg.temperature, cache, seg, &mut rest[..lay.unk - lay.proto])
                }
                None => seg.to_vec(),
            };
            if *unk {
                for (g, v) in grad[lay.unk..lay.total].iter_mut().zip(&dv) {
                    *g += v;
                }
            }
        }
        let base = lay.slots * d;
        for (k, &hl) in history.iter().enumerate() {
            let row = hl.unwrap_or(lay.labels);
            let td = lay.tag_dim;
            let seg = &dx[base + k * td..base + (k + 1) * td];
            for (g, v) in grad[lay.tag + row * td..lay.tag + (row + 1) * td].iter_mut().zip(seg) {
                *g += v;
            }
        }
        head.log_probs[gold]
    }
}

fn window_slots<'a>(inputs: &'a [Option<Vec<f64>>], i: usize, c: usize) -> Vec<Slot<'a>> {
    (0..2 * c + 1)
        .map(|j| {
            let p = (i + j).checked_sub(c);
            match p.and_then(|p| inputs.get(p)) {
                None => Slot::Pad,
                Some(Some(v)) => Slot::Word(v),
                Some(None) => Slot::Unk,
            }
        })
        .collect()
}

fn gold_history(labels: &[usize], i: usize, k: usize) -> Vec<Option<usize>> {
    (1..=k).map(|j| i.checked_sub(j).map(|p| labels[p])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnModel {
    config: NnConfig,
    tagset: TagSet,
    layout: Layout,
    params: Vec<f64>,
    beam_width: usize,
}

impl NnModel {
    pub fn from_parts(config: NnConfig, tagset: TagSet, dim: usize, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::Invalid("embedding dimension must be positive".into()));
        }
        let layout = Layout::new(&config, dim, tagset.num_labels());
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch {
                expected: layout.total,
                actual: params.len(),
            });
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::Model("non-finite network parameter".into()));
        }
        Ok(NnModel {
            config,
            tagset,
            layout,
            params,
            beam_width: 1,
        })
    }

    /// Seeded Glorot-uniform weights, zero biases. Prototypes start at the
    /// vectors of randomly chosen `vocabulary` words (random vectors when
    /// there are too few); the UNK vector starts at the table's UNK, or at
    /// small random values when that is zero.
    pub fn initialize(
        config: NnConfig,
        tagset: TagSet,
        embeddings: &EmbeddingTable,
        vocabulary: &[String],
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let d = embeddings.dim();
        let lay = Layout::new(&config, d, tagset.num_labels());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; lay.total];
        let mut fill = |range: Range<usize>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let x = init_scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut p[range] {
                *v = rng.random_range(-x..=x);
            }
        };
        fill(lay.w1..lay.b1, lay.input, lay.hidden, &mut rng);
        fill(lay.w2..lay.b2, lay.hidden, lay.labels, &mut rng);
        fill(lay.tag..lay.proto, lay.labels + 1, lay.tag_dim.max(1), &mut rng);

        let mut seen = std::collections::HashSet::new();
        let known: Vec<&[f64]> = vocabulary
            .iter()
            .filter(|w| seen.insert(w.as_str()))
            .filter_map(|w| embeddings.lookup(w))
            .collect();
        let rms = if known.is_empty() {
            0.1
        } else {
            let ss: f64 = known.iter().map(|v| dot(v, v)).sum();
            (ss / (known.len() * d) as f64).sqrt().max(NORM_FLOOR)
        };
        let mut picks: Vec<usize> = (0..known.len()).collect();
        picks.shuffle(&mut rng);
        for k in 0..lay.protos {
            let row = &mut p[lay.proto + k * d..lay.proto + (k + 1) * d];
            match picks.get(k) {
                Some(&i) => row.copy_from_slice(known[i]),
                None => row.iter_mut().for_each(|v| *v = rng.random_range(-rms..=rms)),
            }
        }
        let unk = &mut p[lay.unk..lay.total];
        if embeddings.unk().iter().any(|&v| v != 0.0) {
            unk.copy_from_slice(embeddings.unk());
        } else {
            unk.iter_mut().for_each(|v| *v = rng.random_range(-rms..=rms));
        }
        Self::from_parts(config, tagset, d, p)
    }

    pub fn config(&self) -> &NnConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn num_labels(&self) -> usize {
        self.layout.labels
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Named parameter ranges: `w1`, `b1`, `w2`, `b2`, `tag_embeddings`,
    /// `prototypes` (NN2) and `unk`.
    pub fn param_groups(&self) -> Vec<(&'static str, Range<usize>)> {
        self.layout.groups()
    }

    pub fn unk(&self) -> &[f64] {
        &self.params[self.layout.unk..self.layout.total]
    }

    /// Row-major `m x d` prototype matrix; empty for NN1.
    pub fn prototypes(&self) -> &[f64] {
        &self.params[self.layout.proto..self.layout.unk]
    }

    pub fn beam_width(&self) -> usize {
        self.beam_width
    }

    pub fn set_beam_width(&mut self, width: usize) {
        assert!(width >= 1);
        self.beam_width = width;
    }

    fn net(&self) -> Net<'_> {
        Net {
            cfg: &self.config,
            lay: &self.layout,
            p: &self.params,
        }
    }

    /// Smoothing layer output for `v` (NN2), or `v` itself (NN1).
    pub fn smooth(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        Ok(match self.config.architecture {
            Architecture::Nn1 => v.to_vec(),
            Architecture::Nn2 => smooth_forward(v, self.prototypes(), self.dim(), self.config.temperature).0,
        })
    }

    /// Label distribution for one window of `2c + 1` slots and the previous
    /// tags (`history[0]` most recent, `None` for the sentence start).
    pub fn forward(&self, window: &[Slot], history: &[Option<usize>]) -> Result<Vec<f64>> {
        let lay = &self.layout;
        if window.len() != lay.slots {
            return Err(Error::DimensionMismatch {
                expected: lay.slots,
                actual: window.len(),
            });
        }
        if history.len() != lay.history {
            return Err(Error::DimensionMismatch {
                expected: lay.history,
                actual: history.len(),
            });
        }
        for s in window {
            if let Slot::Word(v) = s {
                if v.len() != lay.dim {
                    return Err(Error::DimensionMismatch {
                        expected: lay.dim,
                        actual: v.len(),
                    });
                }
            }
        }
        if let Some(&bad) = history.iter().flatten().find(|&&l| l >= lay.labels) {
            return Err(Error::Invalid(format!("label index {bad} out of range")));
        }
        let net = self.net();
        let (words, _) = net.word_segment(window);
        Ok(net.head(&words, history).log_probs.iter().map(|x| x.exp()).collect())
    }

    fn objective<'a>(&'a self, data: &[LabeledSentence], embeddings: &EmbeddingTable) -> Result<NnObjective<'a>> {
        NnObjective::new(&self.config, &self.layout, &self.tagset, data, embeddings)
    }

    /// Teacher-forced log-likelihood minus `l2/2 |params|^2`.
    pub fn regularized_log_likelihood(&self, data: &[LabeledSentence], embeddings: &EmbeddingTable, l2: f64) -> Result<f64> {
        let obj = self.objective(data, embeddings)?;
        Ok(optim::regularized_objective(&obj, &self.params, l2))
    }

    pub fn gradient(&self, data: &[LabeledSentence], embeddings: &EmbeddingTable, l2: f64) -> Result<Vec<f64>> {
        let obj = self.objective(data, embeddings)?;
        Ok(optim::full_gradient(&obj, &self.params, l2))
    }

    /// Labels and per-token probabilities of the emitted labels. `inputs`
    /// holds one vector per token, `None` for the UNK vector.
    pub fn decode_labels(&self, inputs: &[Option<Vec<f64>>], beam: usize, options: DecodeOptions) -> (Vec<usize>, Vec<f64>) {
        let net = self.net();
        let words: Vec<Vec<f64>> = (0..inputs.len())
            .map(|i| net.word_segment(&window_slots(inputs, i, self.config.window)).0)
            .collect();
        let constrain = options.constrain_iob.then_some(&self.tagset);
        beam_search(inputs.len(), self.num_labels(), self.layout.history, beam, constrain, |i, h| {
            net.head(&words[i], h).log_probs
        })
    }

    /// Decodes precomputed token vectors (see [`NnModel::decode_labels`]).
    pub fn decode_vectors(&self, tokens: &[String], inputs: &[Option<Vec<f64>>], options: DecodeOptions) -> ConfidenceTaggedSentence {
        assert_eq!(tokens.len(), inputs.len());
        let (labels, conf) = self.decode_labels(inputs, self.beam_width, options);
        to_tagged(&self.tagset, tokens, &labels, conf)
    }

    /// Greedy (or beam, see [`NnModel::set_beam_width`]) decoding with each
    /// emitted tag fed back as history.
    pub fn decode(&self, tokens: &[String], embeddings: &EmbeddingTable, options: DecodeOptions) -> ConfidenceTaggedSentence {
        self.decode_vectors(tokens, &embeddings.embed(tokens), options)
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let mut out = ModelWriter::new(w, "nn")?;
        out.field("architecture", self.config.architecture)?;
        out.field("window", self.config.window)?;
        out.field("hidden", self.config.hidden)?;
        out.field("history", self.config.history)?;
        out.field("tag_dim", self.config.tag_dim)?;
        out.field("prototypes", self.config.prototypes)?;
        out.field("temperature", self.config.temperature)?;
        out.field("dim", self.dim())?;
        out.field("beam", self.beam_width)?;
        out.tagset(&self.tagset)?;
        out.floats("params", &self.params)?;
        out.finish()?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut inp = ModelReader::new(r, "nn")?;
        let config = NnConfig {
            architecture: inp.field("architecture")?.parse()?,
            window: inp.parsed("window")?,
            hidden: inp.parsed("hidden")?,
            history: inp.parsed("history")?,
            tag_dim: inp.parsed("tag_dim")?,
            prototypes: inp.parsed("prototypes")?,
            temperature: inp.parsed("temperature")?,
        };
        let dim = inp.parsed("dim")?;
        let beam: usize = inp.parsed("beam")?;
        let tagset = inp.tagset()?;
        let params = inp.floats("params")?;
        inp.finish()?;
        let mut m = Self::from_parts(config, tagset, dim, params)?;
        if beam < 1 {
            return Err(Error::Model("beam width must be at least 1".into()));
        }
        m.beam_width = beam;
        Ok(m)
    }
}

/// Teacher-forced token log-likelihood, one example per sentence.
struct NnObjective<'a> {
    cfg: &'a NnConfig,
    lay: &'a Layout,
    inputs: Vec<Vec<Option<Vec<f64>>>>,
    labels: Vec<Vec<usize>>,
}

impl<'a> NnObjective<'a> {
    fn new(
        cfg: &'a NnConfig,
        lay: &'a Layout,
        tagset: &TagSet,
        data: &[LabeledSentence],
        embeddings: &EmbeddingTable,
    ) -> Result<Self> {
        if embeddings.dim() != lay.dim {
            return Err(Error::DimensionMismatch {
                expected: lay.dim,
                actual: embeddings.dim(),
            });
        }
        let labels = data
            .iter()
            .map(|s| tagset.labels_of(s.tags()))
            .collect::<Result<Vec<_>>>()?;
        let inputs = data.iter().map(|s| embeddings.embed(s.tokens())).collect();
        Ok(NnObjective {
            cfg,
            lay,
            inputs,
            labels,
        })
    }

    fn sentence(&self, idx: usize, w: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let net = Net {
            cfg: self.cfg,
            lay: self.lay,
            p: w,
        };
        let inputs = &self.inputs[idx];
        let labels = &self.labels[idx];
        let mut ll = 0.0;
        for i in 0..inputs.len() {
            let (words, states) = net.word_segment(&window_slots(inputs, i, self.cfg.window));
            let hist = gold_history(labels, i, self.lay.history);
            let head = net.head(&words, &hist);
            ll += match grad.as_deref_mut() {
                Some(g) => net.backward(&states, &hist, &head, labels[i], g),
                None => head.log_probs[labels[i]],
            };
        }
        ll
    }
}

impl Objective for NnObjective<'_> {
    fn dim(&self) -> usize {
        self.lay.total
    }

    fn num_examples(&self) -> usize {
        self.inputs.len()
    }

    fn example_gradient(&self, idx: usize, w: &[f64], out: &mut Vec<(usize, f64)>) -> f64 {
        let mut g = vec![0.0; w.len()];
        let ll = self.sentence(idx, w, Some(&mut g));
        out.extend(g.into_iter().enumerate().filter(|(_, v)| *v != 0.0));
        ll
    }

    fn example_log_likelihood(&self, idx: usize, w: &[f64]) -> f64 {
        self.sentence(idx, w, None)
    }

    fn is_dense(&self) -> bool {
        true
    }

    fn example_gradient_dense(&self, idx: usize, w: &[f64], out: &mut [f64]) -> f64 {
        self.sentence(idx, w, Some(out))
    }
}

/// Trains a tagger over the types found in `data`.
pub fn nn_train(
    data: &[LabeledSentence],
    embeddings: &EmbeddingTable,
    config: &NnConfig,
    train: &NnTrainConfig,
) -> Result<NnModel> {
    Ok(nn_train_with_tagset(data, TagSet::from_sentences(data), embeddings, config, train)?.0)
}

/// Returns the model and the objective after initialization and after each
/// accepted epoch.
pub fn nn_train_with_tagset(
    data: &[LabeledSentence],
    tagset: TagSet,
    embeddings: &EmbeddingTable,
    config: &NnConfig,
    train: &NnTrainConfig,
) -> Result<(NnModel, Vec<f64>)> {
    train.validate()?;
    if data.is_empty() || data.iter().all(LabeledSentence::is_empty) {
        return Err(Error::EmptyData);
    }
    let vocab: Vec<String> = data.iter().flat_map(|s| s.tokens().iter().cloned()).collect();
    let mut model = NnModel::initialize(config.clone(), tagset, embeddings, &vocab, train.init_scale, train.seed)?;
    if train.epochs == 0 {
        let value = model.regularized_log_likelihood(data, embeddings, train.l2)?;
        return Ok((model, vec![value]));
    }
    let mut params = model.params.clone();
    let trace = {
        let obj = model.objective(data, embeddings)?;
        optim::maximize(&obj, &mut params, &train.optimizer())?
    };
    model.params = params;
    Ok((model, trace))
}
