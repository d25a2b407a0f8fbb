//! First-order linear-chain CRF.
//!
//! Scores are `sum_i emit(i, l_i) + sum_i trans(l_{i-1}, l_i)`; emissions
//! come from sparse observation features conjoined with the current label.
//! The weight vector is laid out as `|alphabet| * L` emission weights
//! followed by `L * L` transition weights (`from * L + to`).

use std::io::{BufRead, Write};

use crate::corpus::{normalize_iob1, ConfidenceTaggedSentence, LabeledSentence, TagSet};
use crate::error::{Error, Result};
use crate::features::{
    observation_features, observation_features_mut, FeatureAlphabet, FeatureTemplateConfig,
    FeatureVector,
};
use crate::model_io::{ModelReader, ModelWriter};

use super::optim::{self, Objective, TrainConfig};
use super::{log_sum_exp, DecodeOptions};

/// Allowed transitions; `None` in a [`Lattice`] call means unconstrained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMask {
    pub start: Vec<bool>,
    /// `from * L + to`
    pub pairs: Vec<bool>,
}

impl TransitionMask {
    pub fn iob2(tagset: &TagSet) -> Self {
        let l = tagset.num_labels();
        let start = (0..l).map(|c| tagset.allowed(None, c)).collect();
        let mut pairs = vec![false; l * l];
        for p in 0..l {
            for c in 0..l {
                pairs[p * l + c] = tagset.allowed(Some(p), c);
            }
        }
        TransitionMask { start, pairs }
    }
}

/// Log-space forward/backward tables for one sentence.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub num_positions: usize,
    pub num_labels: usize,
    pub log_z: f64,
    /// `alpha[i * L + l]`: log-sum of prefix scores ending in `l` at `i`.
    pub alpha: Vec<f64>,
    /// `beta[i * L + l]`: log-sum of suffix scores after `l` at `i`.
    pub beta: Vec<f64>,
}

impl Lattice {
    /// Forward-backward over an `n x L` emission matrix.
    pub fn compute(
        emissions: &[f64],
        transitions: &[f64],
        num_labels: usize,
        mask: Option<&TransitionMask>,
    ) -> Self {
        let l = num_labels;
        let n = emissions.len() / l;
        let trans = |p: usize, c: usize| -> f64 {
            match mask {
                Some(m) if !m.pairs[p * l + c] => f64::NEG_INFINITY,
                _ => transitions[p * l + c],
            }
        };
        let mut alpha = vec![f64::NEG_INFINITY; n * l];
        let mut beta = vec![0.0; n * l];
        if n == 0 {
            return Lattice {
                num_positions: 0,
                num_labels: l,
                log_z: 0.0,
                alpha,
                beta,
            };
        }
        for c in 0..l {
            let allowed = mask.map_or(true, |m| m.start[c]);
            alpha[c] = if allowed { emissions[c] } else { f64::NEG_INFINITY };
        }
        let mut buf = vec![0.0; l];
        for i in 1..n {
            for c in 0..l {
                for p in 0..l {
                    buf[p] = alpha[(i - 1) * l + p] + trans(p, c);
                }
                alpha[i * l + c] = log_sum_exp(&buf) + emissions[i * l + c];
            }
        }
        for i in (0..n - 1).rev() {
            for p in 0..l {
                for c in 0..l {
                    buf[c] = trans(p, c) + emissions[(i + 1) * l + c] + beta[(i + 1) * l + c];
                }
                beta[i * l + p] = log_sum_exp(&buf);
            }
        }
        let log_z = log_sum_exp(&alpha[(n - 1) * l..]);
        Lattice {
            num_positions: n,
            num_labels: l,
            log_z,
            alpha,
            beta,
        }
    }

    /// Posterior marginal `p(l_i = label | x)`.
    pub fn marginal(&self, i: usize, label: usize) -> f64 {
        let k = i * self.num_labels + label;
        (self.alpha[k] + self.beta[k] - self.log_z).exp()
    }

    pub fn marginals(&self) -> Vec<Vec<f64>> {
        (0..self.num_positions)
            .map(|i| (0..self.num_labels).map(|l| self.marginal(i, l)).collect())
            .collect()
    }
}

/// Exact max-scoring label sequence. Ties go to the lexicographically first
/// sequence by label index.
pub fn viterbi(
    emissions: &[f64],
    transitions: &[f64],
    num_labels: usize,
    mask: Option<&TransitionMask>,
) -> (Vec<usize>, f64) {
    let l = num_labels;
    let n = emissions.len() / l;
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let trans = |p: usize, c: usize| -> f64 {
        match mask {
            Some(m) if !m.pairs[p * l + c] => f64::NEG_INFINITY,
            _ => transitions[p * l + c],
        }
    };
    // best score of any suffix continuing from label p at position i
    let mut suffix = vec![0.0; n * l];
    for i in (0..n - 1).rev() {
        for p in 0..l {
            let mut best = f64::NEG_INFINITY;
            for c in 0..l {
                let s = trans(p, c) + emissions[(i + 1) * l + c] + suffix[(i + 1) * l + c];
                if s > best {
                    best = s;
                }
            }
            suffix[i * l + p] = best;
        }
    }
    // forward pass picks the first label achieving the optimum
    let mut path = Vec::with_capacity(n);
    let mut prefix = 0.0;
    let mut prev: Option<usize> = None;
    for i in 0..n {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for c in 0..l {
            let step = match prev {
                None => {
                    if mask.map_or(true, |m| m.start[c]) {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                Some(p) => trans(p, c),
            };
            let s = step + emissions[i * l + c] + suffix[i * l + c];
            if s > best {
                best = s;
                arg = c;
            }
        }
        prefix += match prev {
            None => 0.0,
            Some(p) => trans(p, arg),
        } + emissions[i * l + arg];
        path.push(arg);
        prev = Some(arg);
    }
    (path, prefix)
}

/// Trained (or hand-built) linear-chain CRF.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearChainCrf {
    tagset: TagSet,
    alphabet: FeatureAlphabet,
    template: FeatureTemplateConfig,
    l2: f64,
    weights: Vec<f64>,
}

impl LinearChainCrf {
    pub fn from_parts(
        tagset: TagSet,
        mut alphabet: FeatureAlphabet,
        template: FeatureTemplateConfig,
        l2: f64,
        weights: Vec<f64>,
    ) -> Result<Self> {
        alphabet.freeze();
        let l = tagset.num_labels();
        let expected = alphabet.len() * l + l * l;
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Model("non-finite CRF weight".into()));
        }
        Ok(LinearChainCrf {
            tagset,
            alphabet,
            template,
            l2,
            weights,
        })
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn alphabet(&self) -> &FeatureAlphabet {
        &self.alphabet
    }

    pub fn template(&self) -> &FeatureTemplateConfig {
        &self.template
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn num_labels(&self) -> usize {
        self.tagset.num_labels()
    }

    pub fn transitions(&self) -> &[f64] {
        let l = self.num_labels();
        &self.weights[self.alphabet.len() * l..]
    }

    pub fn features(&self, tokens: &[String]) -> Vec<FeatureVector> {
        (0..tokens.len())
            .map(|i| observation_features(tokens, i, &self.template, &self.alphabet))
            .collect()
    }

    pub fn emissions(&self, features: &[FeatureVector]) -> Vec<f64> {
        emission_scores(&self.weights, features, self.num_labels())
    }

    /// `log Z(x)` with forward/backward tables.
    pub fn log_partition(&self, tokens: &[String], mask: Option<&TransitionMask>) -> Lattice {
        let em = self.emissions(&self.features(tokens));
        Lattice::compute(&em, self.transitions(), self.num_labels(), mask)
    }

    /// Unnormalized score of a label sequence.
    pub fn sequence_score(&self, tokens: &[String], labels: &[usize]) -> f64 {
        let em = self.emissions(&self.features(tokens));
        score_path(&em, self.transitions(), self.num_labels(), labels)
    }

    /// Viterbi label indices with posterior marginals as confidences.
    pub fn decode_labels(&self, tokens: &[String], options: DecodeOptions) -> (Vec<usize>, Vec<f64>) {
        let mask = options.constrain_iob.then(|| TransitionMask::iob2(&self.tagset));
        let l = self.num_labels();
        let em = self.emissions(&self.features(tokens));
        let (path, _) = viterbi(&em, self.transitions(), l, mask.as_ref());
        let lattice = Lattice::compute(&em, self.transitions(), l, mask.as_ref());
        let conf = path
            .iter()
            .enumerate()
            .map(|(i, &c)| lattice.marginal(i, c).clamp(0.0, 1.0))
            .collect();
        (path, conf)
    }

    /// Viterbi tags with posterior marginals as confidences. Without the IOB2
    /// constraint, stray `I-` tags are rewritten to `B-`.
    pub fn decode(&self, tokens: &[String], options: DecodeOptions) -> ConfidenceTaggedSentence {
        let (path, conf) = self.decode_labels(tokens, options);
        to_tagged(&self.tagset, tokens, &path, conf)
    }

    /// `sum_j log p(l_j | x_j) - l2/2 |w|^2` over `data`.
    pub fn regularized_log_likelihood(&self, data: &[LabeledSentence]) -> Result<f64> {
        let obj = CrfObjective::new(self, data)?;
        Ok(optim::regularized_objective(&obj, &self.weights, self.l2))
    }

    /// Analytic gradient of [`Self::regularized_log_likelihood`].
    pub fn gradient(&self, data: &[LabeledSentence]) -> Result<Vec<f64>> {
        let obj = CrfObjective::new(self, data)?;
        Ok(optim::full_gradient(&obj, &self.weights, self.l2))
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let mut out = ModelWriter::new(w, "crf")?;
        out.tagset(&self.tagset)?;
        write_template(&mut out, &self.template)?;
        out.field("l2", self.l2)?;
        out.alphabet(&self.alphabet)?;
        out.floats("weights", &self.weights)?;
        out.finish()?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut inp = ModelReader::new(r, "crf")?;
        let tagset = inp.tagset()?;
        let template = read_template(&mut inp)?;
        let l2 = inp.parsed("l2")?;
        let alphabet = inp.alphabet()?;
        let weights = inp.floats("weights")?;
        inp.finish()?;
        Self::from_parts(tagset, alphabet, template, l2, weights)
    }
}

pub(crate) fn write_template<W: Write>(out: &mut ModelWriter<W>, t: &FeatureTemplateConfig) -> Result<()> {
    out.field("window", t.window)?;
    out.field("affix", t.affix_len)?;
    out.field("shapes", u8::from(t.shapes))?;
    out.field("order", t.order)
}

pub(crate) fn read_template<R: BufRead>(inp: &mut ModelReader<R>) -> Result<FeatureTemplateConfig> {
    let window = inp.parsed("window")?;
    let affix_len = inp.parsed("affix")?;
    let shapes: u8 = inp.parsed("shapes")?;
    let order = inp.parsed("order")?;
    Ok(FeatureTemplateConfig {
        window,
        affix_len,
        shapes: shapes != 0,
        order,
    })
}

pub(crate) fn to_tagged(
    tagset: &TagSet,
    tokens: &[String],
    labels: &[usize],
    confidences: Vec<f64>,
) -> ConfidenceTaggedSentence {
    let mut tags: Vec<_> = labels.iter().map(|&c| tagset.tag(c)).collect();
    normalize_iob1(&mut tags);
    ConfidenceTaggedSentence::new(tokens.to_vec(), tags, confidences)
        .expect("decoder output is well-formed")
}

pub(crate) fn emission_scores(weights: &[f64], features: &[FeatureVector], l: usize) -> Vec<f64> {
    let mut em = vec![0.0; features.len() * l];
    for (i, fv) in features.iter().enumerate() {
        let row = &mut em[i * l..(i + 1) * l];
        for &f in fv.ids() {
            let w = &weights[f as usize * l..(f as usize + 1) * l];
            for (r, x) in row.iter_mut().zip(w) {
                *r += x;
            }
        }
    }
    em
}

pub(crate) fn score_path(emissions: &[f64], transitions: &[f64], l: usize, labels: &[usize]) -> f64 {
    let mut s = 0.0;
    for (i, &c) in labels.iter().enumerate() {
        s += emissions[i * l + c];
        if i > 0 {
            s += transitions[labels[i - 1] * l + c];
        }
    }
    s
}

struct CrfObjective {
    examples: Vec<(Vec<FeatureVector>, Vec<usize>)>,
    num_features: usize,
    num_labels: usize,
}

impl CrfObjective {
    fn new(model: &LinearChainCrf, data: &[LabeledSentence]) -> Result<Self> {
        let examples = data
            .iter()
            .map(|s| Ok((model.features(s.tokens()), model.tagset.labels_of(s.tags())?)))
            .collect::<Result<_>>()?;
        Ok(CrfObjective {
            examples,
            num_features: model.alphabet.len(),
            num_labels: model.num_labels(),
        })
    }
}

impl Objective for CrfObjective {
    fn dim(&self) -> usize {
        self.num_features * self.num_labels + self.num_labels * self.num_labels
    }

    fn num_examples(&self) -> usize {
        self.examples.len()
    }

    fn example_gradient(&self, idx: usize, w: &[f64], out: &mut Vec<(usize, f64)>) -> f64 {
        let l = self.num_labels;
        let (feats, gold) = &self.examples[idx];
        let trans_off = self.num_features * l;
        let trans = &w[trans_off..];
        let em = emission_scores(w, feats, l);
        let lat = Lattice::compute(&em, trans, l, None);
        let n = feats.len();
        for (i, fv) in feats.iter().enumerate() {
            let marg: Vec<f64> = (0..l).map(|c| lat.marginal(i, c)).collect();
            for &f in fv.ids() {
                let base = f as usize * l;
                for (c, m) in marg.iter().enumerate() {
                    let emp = if c == gold[i] { 1.0 } else { 0.0 };
                    out.push((base + c, emp - m));
                }
            }
        }
        for i in 1..n {
            out.push((trans_off + gold[i - 1] * l + gold[i], 1.0));
            for p in 0..l {
                let ap = lat.alpha[(i - 1) * l + p];
                for c in 0..l {
                    let xi = (ap + trans[p * l + c] + em[i * l + c] + lat.beta[i * l + c] - lat.log_z).exp();
                    out.push((trans_off + p * l + c, -xi));
                }
            }
        }
        score_path(&em, trans, l, gold) - lat.log_z
    }

    fn example_log_likelihood(&self, idx: usize, w: &[f64]) -> f64 {
        let l = self.num_labels;
        let (feats, gold) = &self.examples[idx];
        let trans = &w[self.num_features * l..];
        let em = emission_scores(w, feats, l);
        let lat = Lattice::compute(&em, trans, l, None);
        score_path(&em, trans, l, gold) - lat.log_z
    }
}

/// Builds the feature alphabet from `data`, freezes it and trains a CRF.
pub fn crf_train(
    data: &[LabeledSentence],
    template: &FeatureTemplateConfig,
    config: &TrainConfig,
) -> Result<LinearChainCrf> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    template.validate()?;
    config.validate()?;
    let tagset = TagSet::from_sentences(data);
    crf_train_with_tagset(data, tagset, template, config).map(|(m, _)| m)
}

/// Like [`crf_train`] with an explicit tag set; also returns the objective
/// trace (initial value, then one entry per accepted epoch).
pub fn crf_train_with_tagset(
    data: &[LabeledSentence],
    tagset: TagSet,
    template: &FeatureTemplateConfig,
    config: &TrainConfig,
) -> Result<(LinearChainCrf, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut alphabet = FeatureAlphabet::new();
    for s in data {
        for i in 0..s.len() {
            observation_features_mut(s.tokens(), i, template, &mut alphabet);
        }
    }
    alphabet.freeze();
    let l = tagset.num_labels();
    let weights = vec![0.0; alphabet.len() * l + l * l];
    let mut model = LinearChainCrf::from_parts(tagset, alphabet, template.clone(), config.l2, weights)?;
    let obj = CrfObjective::new(&model, data)?;
    let trace = optim::maximize(&obj, &mut model.weights, config)?;
    log::info!(
        "CRF trained on {} sentences: {} features, objective {:.4}",
        data.len(),
        model.alphabet.len(),
        trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tag;

    #[test]
    fn uniform_single_token() {
        let em = vec![0.0, 0.0];
        let lat = Lattice::compute(&em, &[0.0; 4], 2, None);
        assert!((lat.log_z - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_tie_break_to_first_label() {
        let em = vec![0.0; 4 * 3];
        let (path, _) = viterbi(&em, &[0.0; 9], 3, None);
        assert_eq!(path, vec![0, 0, 0, 0]);
    }

    #[test]
    fn single_token_takes_emission_argmax() {
        let em = vec![0.1, 0.7, -0.2];
        let (path, score) = viterbi(&em, &[5.0; 9], 3, None);
        assert_eq!(path, vec![1]);
        assert!((score - 0.7).abs() < 1e-15);
    }

    #[test]
    fn masked_decode_is_iob2_valid() {
        let ts = TagSet::new(["PER"]).unwrap();
        let mask = TransitionMask::iob2(&ts);
        // emissions strongly prefer I-PER everywhere
        let em = vec![0.0, 0.0, 5.0, 0.0, 0.0, 5.0, 0.0, 0.0, 5.0];
        let (path, _) = viterbi(&em, &[0.0; 9], 3, Some(&mask));
        assert_eq!(path, vec![1, 2, 2]);
        let lat = Lattice::compute(&em, &[0.0; 9], 3, Some(&mask));
        assert!(lat.marginal(0, 2) < 1e-300);
    }

    fn toy(words: &[(&str, &str)]) -> LabeledSentence {
        let toks: Vec<&str> = words.iter().map(|w| w.0).collect();
        let tags: Vec<&str> = words.iter().map(|w| w.1).collect();
        LabeledSentence::from_strs(&toks, &tags).unwrap()
    }

    #[test]
    fn empty_data_rejected() {
        let err = crf_train(&[], &FeatureTemplateConfig::default(), &TrainConfig::default());
        assert!(matches!(err, Err(Error::EmptyData)));
    }

    #[test]
    fn save_load_is_bit_exact() {
        let data = vec![
            toy(&[("John", "B-PER"), ("runs", "O")]),
            toy(&[("in", "O"), ("Paris", "B-LOC")]),
        ];
        let cfg = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let m = crf_train(&data, &FeatureTemplateConfig::default(), &cfg).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = LinearChainCrf::load(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let toks: Vec<String> = ["Mary", "in", "Paris"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            back.decode(&toks, DecodeOptions::default()),
            m.decode(&toks, DecodeOptions::default())
        );
        let mut again = Vec::new();
        back.save(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn decode_confidences_are_marginals() {
        let data = vec![toy(&[("John", "B-PER"), ("runs", "O")])];
        let m = crf_train(&data, &FeatureTemplateConfig::default(), &TrainConfig::default()).unwrap();
        let toks: Vec<String> = vec!["John".into(), "runs".into()];
        let out = m.decode(&toks, DecodeOptions::default());
        assert_eq!(out.tags(), &[Tag::B("PER".into()), Tag::O]);
        assert!(out.confidences().iter().all(|&c| c > 0.5 && c <= 1.0));
    }
}
