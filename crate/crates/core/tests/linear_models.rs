mod common;

use common::*;
use crossner::corpus::{validate_iob2, LabeledSentence, TagSet};
use crossner::features::{
    extract_features, observation_features_mut, FeatureAlphabet, FeatureTemplateConfig, BOS,
};
use crossner::linear::crf::{crf_train_with_tagset, Lattice, LinearChainCrf, TransitionMask};
use crossner::linear::memm::memm_train_with_tagset;
use crossner::linear::{crf_train, memm_train, DecodeOptions, Memm, TrainConfig};
use rand::Rng;

const VOCAB: [&str; 5] = ["the", "Paris", "said", "Acme", "Bob"];

fn random_sentence(rng: &mut impl Rng, max_len: usize) -> Vec<String> {
    let n = rng.random_range(1..=max_len);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())].to_string()).collect()
}

fn random_crf(rng: &mut impl Rng, tokens: &[String]) -> LinearChainCrf {
    let tagset = TagSet::new(["X"]).unwrap();
    let template = FeatureTemplateConfig::default();
    let mut alphabet = FeatureAlphabet::new();
    for i in 0..tokens.len() {
        observation_features_mut(tokens, i, &template, &mut alphabet);
    }
    let l = tagset.num_labels();
    let weights = random_vec(rng, alphabet.len() * l + l * l, 0.5);
    LinearChainCrf::from_parts(tagset, alphabet, template, 0.0, weights).unwrap()
}

#[test]
fn crf_matches_exhaustive_enumeration() {
    let mut rng = rng(7);
    for _ in 0..100 {
        let tokens = random_sentence(&mut rng, 5);
        let model = random_crf(&mut rng, &tokens);
        let l = model.num_labels();
        let em = model.emissions(&model.features(&tokens));
        let ts = model.tagset().clone();

        let (log_z, marg, best) = brute_force_crf(&em, model.transitions(), l, |_| true);
        let lat = model.log_partition(&tokens, None);
        assert!((lat.log_z - log_z).abs() < 1e-8);
        for (i, row) in marg.iter().enumerate() {
            for (c, m) in row.iter().enumerate() {
                assert!((lat.marginal(i, c) - m).abs() < 1e-8);
            }
        }
        let (labels, _) = model.decode_labels(&tokens, DecodeOptions { constrain_iob: false });
        assert_eq!(labels, best);

        // constrained decoding agrees with enumeration over valid sequences
        let valid = |s: &[usize]| validate_iob2(&s.iter().map(|&c| ts.tag(c)).collect::<Vec<_>>()).is_ok();
        let (_, cmarg, cbest) = brute_force_crf(&em, model.transitions(), l, valid);
        let out = model.decode(&tokens, DecodeOptions::default());
        assert_eq!(ts.labels_of(out.tags()).unwrap(), cbest);
        for (i, &c) in cbest.iter().enumerate() {
            assert!((out.confidences()[i] - cmarg[i][c]).abs() < 1e-8);
        }
    }
}

#[test]
fn crf_four_tokens_three_labels() {
    let mut rng = rng(11);
    let em = random_vec(&mut rng, 12, 0.3);
    let tr = random_vec(&mut rng, 9, 0.3);
    assert_eq!(all_sequences(4, 3).len(), 81);
    let (log_z, _, _) = brute_force_crf(&em, &tr, 3, |_| true);
    let lat = Lattice::compute(&em, &tr, 3, None);
    assert!((lat.log_z - log_z).abs() < 1e-8);
    for row in lat.marginals() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
    // masked marginals also normalize
    let mask = TransitionMask::iob2(&TagSet::new(["X"]).unwrap());
    let lat = Lattice::compute(&em, &tr, 3, Some(&mask));
    for row in lat.marginals() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

fn toy_data() -> Vec<LabeledSentence> {
    vec![
        LabeledSentence::from_strs(&["Bob", "visited", "Paris"], &["B-PER", "O", "B-LOC"]).unwrap(),
        LabeledSentence::from_strs(&["Acme", "Corp", "hired"], &["B-ORG", "I-ORG", "O"]).unwrap(),
    ]
}

#[test]
fn crf_gradient_matches_finite_differences() {
    let data = toy_data();
    let tagset = TagSet::new(["PER", "LOC", "ORG"]).unwrap();
    let template = FeatureTemplateConfig {
        window: 1,
        affix_len: 2,
        ..Default::default()
    };
    let mut alphabet = FeatureAlphabet::new();
    for s in &data {
        for i in 0..s.len() {
            observation_features_mut(s.tokens(), i, &template, &mut alphabet);
        }
    }
    let l = tagset.num_labels();
    let mut r = rng(3);
    let weights = random_vec(&mut r, alphabet.len() * l + l * l, 0.3);
    let mut model = LinearChainCrf::from_parts(tagset, alphabet, template, 0.1, weights).unwrap();
    let grad = model.gradient(&data).unwrap();
    let mut params = model.weights().to_vec();
    let n = params.len();
    let err = max_fd_error(&mut params, &grad, 0..n, 1e-5, |p| {
        model.weights_mut().copy_from_slice(p);
        model.regularized_log_likelihood(&data).unwrap()
    });
    assert!(err < 1e-4, "max relative error {err}");
}

/// Tags are fully determined by the word identity.
fn separable_corpus(n: usize) -> Vec<LabeledSentence> {
    let words = [("alpha", "B-PER"), ("beta", "O"), ("gamma", "B-LOC"), ("delta", "O"), ("eps", "B-ORG")];
    let mut r = rng(5);
    (0..n)
        .map(|_| {
            let len = r.random_range(3..8);
            let picks: Vec<(&str, &str)> = (0..len).map(|_| words[r.random_range(0..words.len())]).collect();
            let toks: Vec<&str> = picks.iter().map(|p| p.0).collect();
            let tags: Vec<&str> = picks.iter().map(|p| p.1).collect();
            LabeledSentence::from_strs(&toks, &tags).unwrap()
        })
        .collect()
}

fn accuracy(gold: &[LabeledSentence], decode: impl Fn(&[String]) -> Vec<crossner::corpus::Tag>) -> f64 {
    let mut right = 0;
    let mut total = 0;
    for s in gold {
        let tags = decode(s.tokens());
        right += tags.iter().zip(s.tags()).filter(|(a, b)| a == b).count();
        total += s.len();
    }
    right as f64 / total as f64
}

#[test]
fn crf_learns_separable_corpus() {
    let data = separable_corpus(20);
    let tagset = TagSet::from_sentences(&data);
    let (model, trace) =
        crf_train_with_tagset(&data, tagset, &FeatureTemplateConfig::default(), &TrainConfig::default()).unwrap();
    assert!(trace.windows(2).all(|w| w[1] >= w[0]), "{trace:?}");
    let acc = accuracy(&data, |t| model.decode(t, DecodeOptions::default()).tags().to_vec());
    assert_eq!(acc, 1.0);
}

#[test]
fn crf_l2_shrinks_weights() {
    let data = separable_corpus(20);
    let mut norms = Vec::new();
    for l2 in [0.1, 1.0, 10.0, 100.0] {
        let cfg = TrainConfig {
            l2,
            epochs: 60,
            ..Default::default()
        };
        let m = crf_train(&data, &FeatureTemplateConfig::default(), &cfg).unwrap();
        norms.push(m.weights().iter().map(|w| w * w).sum::<f64>().sqrt());
    }
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
}

fn random_memm(rng: &mut impl Rng, tokens: &[String], order: usize) -> Memm {
    let tagset = TagSet::new(["X"]).unwrap();
    let template = FeatureTemplateConfig {
        order,
        ..Default::default()
    };
    let names: Vec<String> = std::iter::once(BOS.to_string())
        .chain(tagset.tags().iter().map(ToString::to_string))
        .collect();
    let mut alphabet = FeatureAlphabet::new();
    for i in 0..tokens.len() {
        for hist in all_sequences(order, names.len()) {
            let h: Vec<&str> = hist.iter().map(|&k| names[k].as_str()).collect();
            extract_features(tokens, i, &h, &template, &mut alphabet);
        }
    }
    let l = tagset.num_labels();
    let weights = random_vec(rng, alphabet.len() * l, 0.7);
    Memm::from_parts(tagset, alphabet, template, 0.0, weights, 1).unwrap()
}

/// Lexicographically first sequence maximizing the product of local
/// probabilities, restricted to `allowed`.
fn brute_force_memm(model: &Memm, tokens: &[String], allowed: impl Fn(&[usize]) -> bool) -> Vec<usize> {
    let l = model.num_labels();
    let o = model.order();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for seq in all_sequences(tokens.len(), l) {
        if !allowed(&seq) {
            continue;
        }
        let mut lp = 0.0;
        for i in 0..seq.len() {
            let h: Vec<Option<usize>> = (1..=o).map(|j| i.checked_sub(j).map(|k| seq[k])).collect();
            lp += model.conditional_distribution(tokens, i, &h)[seq[i]].ln();
        }
        if best.as_ref().map_or(true, |(b, _)| lp > *b) {
            best = Some((lp, seq));
        }
    }
    best.unwrap().1
}

#[test]
fn memm_exact_beam_matches_enumeration() {
    let mut r = rng(19);
    for _ in 0..50 {
        let tokens = random_sentence(&mut r, 4);
        let model = random_memm(&mut r, &tokens, 2);
        let ts = model.tagset().clone();
        let exact = ts.num_labels().pow(2);
        let (labels, _) = model.decode_labels(&tokens, exact, DecodeOptions { constrain_iob: false });
        assert_eq!(labels, brute_force_memm(&model, &tokens, |_| true));

        let valid = |s: &[usize]| validate_iob2(&s.iter().map(|&c| ts.tag(c)).collect::<Vec<_>>()).is_ok();
        let out = model.decode_with_beam(&tokens, exact, DecodeOptions::default());
        assert_eq!(ts.labels_of(out.tags()).unwrap(), brute_force_memm(&model, &tokens, valid));
        assert!(validate_iob2(out.tags()).is_ok());

        // product of per-token maxima bounds the decoded probability
        let decoded: f64 = out.confidences().iter().product();
        let mut bound = 1.0;
        for i in 0..tokens.len() {
            let mut m: f64 = 0.0;
            for h in all_sequences(2, ts.num_labels()) {
                let hist: Vec<Option<usize>> = h.iter().map(|&k| Some(k)).collect();
                let p = model.conditional_distribution(&tokens, i, &hist);
                m = m.max(p.iter().cloned().fold(0.0, f64::max));
            }
            for h in [vec![None, None], vec![Some(0), None], vec![Some(1), None]] {
                let p = model.conditional_distribution(&tokens, i, &h);
                m = m.max(p.iter().cloned().fold(0.0, f64::max));
            }
            bound *= m;
        }
        assert!(bound + 1e-12 >= decoded);
    }
}

#[test]
fn memm_gradient_matches_finite_differences() {
    let data = toy_data();
    let template = FeatureTemplateConfig {
        order: 2,
        window: 1,
        affix_len: 2,
        ..Default::default()
    };
    let cfg = TrainConfig {
        epochs: 2,
        l2: 0.1,
        ..Default::default()
    };
    let (mut model, _) = memm_train_with_tagset(&data, TagSet::from_sentences(&data), &template, &cfg).unwrap();
    let mut r = rng(23);
    let noise = random_vec(&mut r, model.weights().len(), 0.3);
    for (w, n) in model.weights_mut().iter_mut().zip(noise) {
        *w += n;
    }
    let grad = model.gradient(&data).unwrap();
    let mut params = model.weights().to_vec();
    let n = params.len();
    let err = max_fd_error(&mut params, &grad, 0..n, 1e-5, |p| {
        model.weights_mut().copy_from_slice(p);
        model.regularized_log_likelihood(&data).unwrap()
    });
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn memm_orders_agree_on_word_determined_tags() {
    let data = separable_corpus(20);
    let mut accs = Vec::new();
    for order in [1, 2] {
        let template = FeatureTemplateConfig {
            order,
            ..Default::default()
        };
        let (m, trace) =
            memm_train_with_tagset(&data, TagSet::from_sentences(&data), &template, &TrainConfig::default()).unwrap();
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
        accs.push(accuracy(&data, |t| m.decode(t, DecodeOptions::default()).tags().to_vec()));
    }
    assert_eq!(accs, vec![1.0, 1.0]);
}

#[test]
fn memm_empty_data_rejected() {
    assert!(memm_train(&[], &FeatureTemplateConfig::default(), &TrainConfig::default()).is_err());
}
