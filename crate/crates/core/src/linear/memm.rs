//! Order-o maximum-entropy Markov model.
//!
//! Each token gets a softmax over labels conditioned on observation features
//! and the previous `o` labels. Training is teacher-forced (gold histories),
//! so it reduces to multinomial logistic regression. Decoding is a beam
//! search that recombines hypotheses sharing the same last `o` labels, which
//! makes a beam of `L^o` exact.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::corpus::{ConfidenceTaggedSentence, LabeledSentence, TagSet};
use crate::error::{Error, Result};
use crate::features::{
    history_feature_strings, history_features, observation_features, observation_features_mut,
    FeatureAlphabet, FeatureTemplateConfig, FeatureVector, BOS,
};
use crate::model_io::{ModelReader, ModelWriter};

use super::crf::{emission_scores, read_template, to_tagged, write_template};
use super::optim::{self, Objective, TrainConfig};
use super::{beam_search, log_softmax, DecodeOptions};

pub const DEFAULT_BEAM: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Memm {
    tagset: TagSet,
    alphabet: FeatureAlphabet,
    template: FeatureTemplateConfig,
    l2: f64,
    weights: Vec<f64>,
    beam_width: usize,
}

impl Memm {
    pub fn from_parts(
        tagset: TagSet,
        mut alphabet: FeatureAlphabet,
        template: FeatureTemplateConfig,
        l2: f64,
        weights: Vec<f64>,
        beam_width: usize,
    ) -> Result<Self> {
        template.validate()?;
        if beam_width < 1 {
            return Err(Error::Invalid("beam width must be at least 1".into()));
        }
        alphabet.freeze();
        let expected = alphabet.len() * tagset.num_labels();
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Model("non-finite MEMM weight".into()));
        }
        Ok(Memm {
            tagset,
            alphabet,
            template,
            l2,
            weights,
            beam_width,
        })
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn alphabet(&self) -> &FeatureAlphabet {
        &self.alphabet
    }

    pub fn order(&self) -> usize {
        self.template.order
    }

    pub fn num_labels(&self) -> usize {
        self.tagset.num_labels()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn beam_width(&self) -> usize {
        self.beam_width
    }

    pub fn set_beam_width(&mut self, width: usize) {
        assert!(width >= 1);
        self.beam_width = width;
    }

    fn history_names(&self, history: &[Option<usize>]) -> Vec<String> {
        history
            .iter()
            .map(|h| match h {
                None => BOS.to_string(),
                Some(l) => self.tagset.tag(*l).to_string(),
            })
            .collect()
    }

    /// `p(l_i | l_{i-1}, ..., l_{i-o}, x)`; `history[0]` is the previous label,
    /// `None` stands for the sentence-start padding.
    pub fn conditional_distribution(
        &self,
        tokens: &[String],
        position: usize,
        history: &[Option<usize>],
    ) -> Vec<f64> {
        assert_eq!(history.len(), self.order());
        let obs = observation_features(tokens, position, &self.template, &self.alphabet);
        let hist = history_features(&self.history_names(history), &self.alphabet);
        let mut s = emission_scores(&self.weights, &[obs], self.num_labels());
        add_scores(&mut s, &self.weights, &hist, self.num_labels());
        log_softmax(&mut s);
        s.iter().map(|x| x.exp()).collect()
    }

    pub fn decode(&self, tokens: &[String], options: DecodeOptions) -> ConfidenceTaggedSentence {
        self.decode_with_beam(tokens, self.beam_width, options)
    }

    pub fn decode_with_beam(
        &self,
        tokens: &[String],
        beam: usize,
        options: DecodeOptions,
    ) -> ConfidenceTaggedSentence {
        let (labels, conf) = self.decode_labels(tokens, beam, options);
        to_tagged(&self.tagset, tokens, &labels, conf)
    }

    /// Beam search returning label indices and per-token confidences (the
    /// local probability of each emitted label given the emitted history).
    pub fn decode_labels(
        &self,
        tokens: &[String],
        beam: usize,
        options: DecodeOptions,
    ) -> (Vec<usize>, Vec<f64>) {
        let l = self.num_labels();
        let obs: Vec<FeatureVector> = (0..tokens.len())
            .map(|i| observation_features(tokens, i, &self.template, &self.alphabet))
            .collect();
        let obs_scores = emission_scores(&self.weights, &obs, l);
        let mut hist_cache: HashMap<Vec<Option<usize>>, FeatureVector> = HashMap::new();
        let constrain = options.constrain_iob.then_some(&self.tagset);
        beam_search(tokens.len(), l, self.order(), beam, constrain, |i, state| {
            let hist = hist_cache
                .entry(state.to_vec())
                .or_insert_with(|| history_features(&self.history_names(state), &self.alphabet));
            let mut s = obs_scores[i * l..(i + 1) * l].to_vec();
            add_scores(&mut s, &self.weights, hist, l);
            log_softmax(&mut s);
            s
        })
    }

    /// Sum of per-token log-likelihoods under gold histories, minus the L2
    /// penalty.
    pub fn regularized_log_likelihood(&self, data: &[LabeledSentence]) -> Result<f64> {
        let obj = LocalObjective::from_memm(self, data)?;
        Ok(optim::regularized_objective(&obj, &self.weights, self.l2))
    }

    pub fn gradient(&self, data: &[LabeledSentence]) -> Result<Vec<f64>> {
        let obj = LocalObjective::from_memm(self, data)?;
        Ok(optim::full_gradient(&obj, &self.weights, self.l2))
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let mut out = ModelWriter::new(w, "memm")?;
        out.tagset(&self.tagset)?;
        write_template(&mut out, &self.template)?;
        out.field("l2", self.l2)?;
        out.field("beam", self.beam_width)?;
        out.alphabet(&self.alphabet)?;
        out.floats("weights", &self.weights)?;
        out.finish()?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut inp = ModelReader::new(r, "memm")?;
        let tagset = inp.tagset()?;
        let template = read_template(&mut inp)?;
        let l2 = inp.parsed("l2")?;
        let beam = inp.parsed("beam")?;
        let alphabet = inp.alphabet()?;
        let weights = inp.floats("weights")?;
        inp.finish()?;
        Self::from_parts(tagset, alphabet, template, l2, weights, beam)
    }
}

fn add_scores(scores: &mut [f64], weights: &[f64], fv: &FeatureVector, l: usize) {
    for &f in fv.ids() {
        let w = &weights[f as usize * l..(f as usize + 1) * l];
        for (s, x) in scores.iter_mut().zip(w) {
            *s += x;
        }
    }
}

/// Multinomial logistic regression over groups of `(features, label)` pairs;
/// one group per sentence.
struct LocalObjective {
    groups: Vec<Vec<(FeatureVector, usize)>>,
    num_features: usize,
    num_labels: usize,
}

impl LocalObjective {
    fn from_memm(model: &Memm, data: &[LabeledSentence]) -> Result<Self> {
        let mut alphabet = model.alphabet.clone();
        let groups = teacher_forced_vectors(data, &model.tagset, &model.template, &mut alphabet)?;
        Ok(LocalObjective {
            groups,
            num_features: model.alphabet.len(),
            num_labels: model.num_labels(),
        })
    }
}

impl Objective for LocalObjective {
    fn dim(&self) -> usize {
        self.num_features * self.num_labels
    }

    fn num_examples(&self) -> usize {
        self.groups.len()
    }

    fn example_gradient(&self, idx: usize, w: &[f64], out: &mut Vec<(usize, f64)>) -> f64 {
        let l = self.num_labels;
        let mut ll = 0.0;
        for (fv, gold) in &self.groups[idx] {
            let mut s = vec![0.0; l];
            add_scores(&mut s, w, fv, l);
            log_softmax(&mut s);
            ll += s[*gold];
            for &f in fv.ids() {
                let base = f as usize * l;
                for (c, lp) in s.iter().enumerate() {
                    let emp = if c == *gold { 1.0 } else { 0.0 };
                    out.push((base + c, emp - lp.exp()));
                }
            }
        }
        ll
    }

    fn example_log_likelihood(&self, idx: usize, w: &[f64]) -> f64 {
        let l = self.num_labels;
        let mut ll = 0.0;
        for (fv, gold) in &self.groups[idx] {
            let mut s = vec![0.0; l];
            add_scores(&mut s, w, fv, l);
            log_softmax(&mut s);
            ll += s[*gold];
        }
        ll
    }
}

fn teacher_forced_vectors(
    data: &[LabeledSentence],
    tagset: &TagSet,
    template: &FeatureTemplateConfig,
    alphabet: &mut FeatureAlphabet,
) -> Result<Vec<Vec<(FeatureVector, usize)>>> {
    let o = template.order;
    data.iter()
        .map(|s| {
            let labels = tagset.labels_of(s.tags())?;
            let names: Vec<String> = s.tags().iter().map(ToString::to_string).collect();
            Ok((0..s.len())
                .map(|i| {
                    let obs = observation_features_mut(s.tokens(), i, template, alphabet);
                    let hist: Vec<&str> = (1..=o)
                        .map(|j| i.checked_sub(j).map_or(BOS, |k| names[k].as_str()))
                        .collect();
                    let mut ids = obs.ids().to_vec();
                    ids.extend(
                        history_feature_strings(&hist)
                            .iter()
                            .filter_map(|f| alphabet.intern(f)),
                    );
                    (FeatureVector::from_ids(ids), labels[i])
                })
                .collect())
        })
        .collect()
}

/// Trains an MEMM of order `template.order` on `data`.
pub fn memm_train(
    data: &[LabeledSentence],
    template: &FeatureTemplateConfig,
    config: &TrainConfig,
) -> Result<Memm> {
    let tagset = TagSet::from_sentences(data);
    memm_train_with_tagset(data, tagset, template, config).map(|(m, _)| m)
}

/// [`memm_train`] with an explicit tag set; also returns the objective trace.
pub fn memm_train_with_tagset(
    data: &[LabeledSentence],
    tagset: TagSet,
    template: &FeatureTemplateConfig,
    config: &TrainConfig,
) -> Result<(Memm, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    template.validate()?;
    config.validate()?;
    let mut alphabet = FeatureAlphabet::new();
    let groups = teacher_forced_vectors(data, &tagset, template, &mut alphabet)?;
    alphabet.freeze();
    let l = tagset.num_labels();
    let obj = LocalObjective {
        groups,
        num_features: alphabet.len(),
        num_labels: l,
    };
    let mut weights = vec![0.0; alphabet.len() * l];
    let trace = optim::maximize(&obj, &mut weights, config)?;
    log::info!(
        "MEMM (order {}) trained on {} sentences: {} features, objective {:.4}",
        template.order,
        data.len(),
        alphabet.len(),
        trace.last().copied().unwrap_or(f64::NAN)
    );
    let model = Memm::from_parts(tagset, alphabet, template.clone(), config.l2, weights, DEFAULT_BEAM)?;
    Ok((model, trace))
}

/// Fits a plain multinomial logistic regression; returns `num_features * L`
/// weights. Exposed for diagnostics.
pub fn fit_multinomial(
    examples: &[(FeatureVector, usize)],
    num_features: usize,
    num_labels: usize,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let obj = LocalObjective {
        groups: examples.iter().map(|e| vec![e.clone()]).collect(),
        num_features,
        num_labels,
    };
    let mut w = vec![0.0; num_features * num_labels];
    optim::maximize(&obj, &mut w, config)?;
    Ok(w)
}

/// Softmax distribution of a multinomial model for one feature vector.
pub fn multinomial_distribution(weights: &[f64], fv: &FeatureVector, num_labels: usize) -> Vec<f64> {
    let mut s = vec![0.0; num_labels];
    add_scores(&mut s, weights, fv, num_labels);
    log_softmax(&mut s);
    s.iter().map(|x| x.exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    fn corpus() -> Vec<LabeledSentence> {
        vec![
            LabeledSentence::from_strs(&["John", "lives", "in", "Paris"], &["B-PER", "O", "O", "B-LOC"]).unwrap(),
            LabeledSentence::from_strs(&["Ann", "Lee", "left", "Rome"], &["B-PER", "I-PER", "O", "B-LOC"]).unwrap(),
        ]
    }

    #[test]
    fn balanced_bias_only_is_uniform() {
        let examples: Vec<(FeatureVector, usize)> = (0..30)
            .map(|i| (FeatureVector::from_ids(vec![0]), i % 3))
            .collect();
        let w = fit_multinomial(&examples, 1, 3, &TrainConfig::default()).unwrap();
        let p = multinomial_distribution(&w, &examples[0].0, 3);
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn distributions_sum_to_one() {
        let template = FeatureTemplateConfig {
            order: 2,
            ..Default::default()
        };
        let m = memm_train(&corpus(), &template, &TrainConfig::default()).unwrap();
        let toks = words("Ann lives in Rome");
        for i in 0..toks.len() {
            for h in [[None, None], [Some(0), None], [Some(1), Some(0)]] {
                let p = m.conditional_distribution(&toks, i, &h);
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn beam_one_is_greedy() {
        let template = FeatureTemplateConfig {
            order: 2,
            ..Default::default()
        };
        let m = memm_train(&corpus(), &template, &TrainConfig::default()).unwrap();
        let toks = words("John Lee left Paris in Rome");
        let (labels, _) = m.decode_labels(&toks, 1, DecodeOptions { constrain_iob: false });
        let mut hist: Vec<usize> = Vec::new();
        for i in 0..toks.len() {
            let h: Vec<Option<usize>> = (1..=2).map(|j| i.checked_sub(j).map(|k| hist[k])).collect();
            let p = m.conditional_distribution(&toks, i, &h);
            hist.push(crate::linear::argmax(&p));
        }
        assert_eq!(labels, hist);
    }

    #[test]
    fn save_load_round_trip() {
        let m = memm_train(&corpus(), &FeatureTemplateConfig::default(), &TrainConfig::default()).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = Memm::load(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }
}
