mod common;

use common::*;
use crossner::corpus::{validate_iob2, LabeledSentence, TagSet};
use crossner::embeddings::EmbeddingTable;
use crossner::linear::DecodeOptions;
use crossner::neural::{
    nn_train, nn_train_with_tagset, prototype_smoothing, Architecture, NnConfig, NnModel, NnTrainConfig, Slot,
};
use proptest::prelude::*;
use rand::Rng;

fn small_config(arch: Architecture) -> NnConfig {
    NnConfig {
        architecture: arch,
        window: 1,
        hidden: 6,
        history: 1,
        tag_dim: 3,
        prototypes: 3,
        temperature: 0.7,
    }
}

/// Words in three clusters; the cluster decides the tag.
fn clustered_embeddings() -> EmbeddingTable {
    let mut r = rng(31);
    let centres = [[2.0, 0.0, 0.0, 0.5], [0.0, 2.0, 0.0, 0.5], [0.0, 0.0, 2.0, 0.5]];
    let groups = [
        vec!["john", "mary", "peter", "anna"],
        vec!["paris", "rome", "lima", "oslo"],
        vec!["the", "went", "to", "saw", "and", "a"],
    ];
    let mut pairs = Vec::new();
    for (g, words) in groups.iter().enumerate() {
        for w in words {
            let v: Vec<f64> = centres[g].iter().map(|c| c + r.random_range(-0.2..0.2)).collect();
            pairs.push((w.to_string(), v));
        }
    }
    EmbeddingTable::from_pairs(4, pairs).unwrap()
}

fn clustered_corpus() -> Vec<LabeledSentence> {
    let rows: [(&str, &str); 6] = [
        ("john went to paris", "B-PER O O B-LOC"),
        ("mary saw rome", "B-PER O B-LOC"),
        ("peter and anna went to lima", "B-PER O B-PER O O B-LOC"),
        ("the oslo", "O B-LOC"),
        ("a mary saw the rome", "O B-PER O O B-LOC"),
        ("anna", "B-PER"),
    ];
    rows.iter()
        .map(|(t, g)| {
            let toks: Vec<&str> = t.split(' ').collect();
            let tags: Vec<&str> = g.split(' ').collect();
            LabeledSentence::from_strs(&toks, &tags).unwrap()
        })
        .collect()
}

fn random_model(arch: Architecture, seed: u64) -> (NnModel, EmbeddingTable) {
    let emb = clustered_embeddings();
    let ts = TagSet::new(["PER", "LOC"]).unwrap();
    let mut m = NnModel::initialize(small_config(arch), ts, &emb, emb.words(), 1.0, seed).unwrap();
    let mut r = rng(seed + 100);
    for p in m.params_mut() {
        *p += r.random_range(-0.3..0.3);
    }
    (m, emb)
}

#[test]
fn forward_is_a_distribution() {
    for arch in [Architecture::Nn1, Architecture::Nn2] {
        for seed in 0..20 {
            let (m, _) = random_model(arch, seed);
            let mut r = rng(seed);
            let vs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut r, 4, 3.0)).collect();
            let windows = [
                [Slot::Word(&vs[0]), Slot::Unk, Slot::Word(&vs[2])],
                [Slot::Pad, Slot::Word(&vs[1]), Slot::Pad],
            ];
            for (window, h) in windows.iter().zip([None, Some(0), Some(4)].iter().cycle()) {
                let p = m.forward(window, &[*h]).unwrap();
                assert!(p.iter().all(|&x| x >= 0.0));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn single_prototype_is_returned_exactly() {
    let proto = [0.3, -1.2, 4.0];
    let mut r = rng(2);
    for _ in 0..20 {
        let v = random_vec(&mut r, 3, 5.0);
        assert_eq!(prototype_smoothing(&v, &proto, 0.5), proto.to_vec());
    }
}

#[test]
fn equidistant_input_averages_prototypes() {
    let protos = [1.0, 0.0, 0.0, 1.0];
    let v = [2.0, 2.0];
    for tau in [1.0, 1e3, 1e9] {
        let s = prototype_smoothing(&v, &protos, tau);
        assert!((s[0] - 0.5).abs() < 1e-8 && (s[1] - 0.5).abs() < 1e-8, "{s:?}");
    }
    // any input approaches the mean as the temperature grows
    let s = prototype_smoothing(&[3.0, -1.0], &protos, 1e12);
    assert!((s[0] - 0.5).abs() < 1e-8 && (s[1] - 0.5).abs() < 1e-8);
}

/// Barycentric coordinates of `s` w.r.t. the triangle `p` in the plane.
fn barycentric(p: &[f64], s: &[f64]) -> [f64; 3] {
    let (x1, y1, x2, y2, x3, y3) = (p[0], p[1], p[2], p[3], p[4], p[5]);
    let det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
    let l1 = ((y2 - y3) * (s[0] - x3) + (x3 - x2) * (s[1] - y3)) / det;
    let l2 = ((y3 - y1) * (s[0] - x3) + (x1 - x3) * (s[1] - y3)) / det;
    [l1, l2, 1.0 - l1 - l2]
}

proptest! {
    #[test]
    fn smoothing_stays_in_prototype_hull(
        v in proptest::collection::vec(-5.0f64..5.0, 2),
        p in proptest::collection::vec(-5.0f64..5.0, 6),
        tau in 0.05f64..20.0,
    ) {
        let det = (p[3] - p[5]) * (p[0] - p[4]) + (p[4] - p[2]) * (p[1] - p[5]);
        prop_assume!(det.abs() > 1e-2);
        let s = prototype_smoothing(&v, &p, tau);
        for l in barycentric(&p, &s) {
            prop_assert!(l >= -1e-9 && l <= 1.0 + 1e-9);
        }
        // two prototypes: the output lies on the segment between them
        let s2 = prototype_smoothing(&v, &p[..4], tau);
        let (a, b) = ((p[0], p[1]), (p[2], p[3]));
        let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
        prop_assume!(len2 > 1e-3);
        let t = ((s2[0] - a.0) * (b.0 - a.0) + (s2[1] - a.1) * (b.1 - a.1)) / len2;
        let proj = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        prop_assert!(t >= -1e-9 && t <= 1.0 + 1e-9);
        prop_assert!((proj.0 - s2[0]).abs() < 1e-8 && (proj.1 - s2[1]).abs() < 1e-8);
    }
}

#[test]
fn gradients_match_finite_differences_for_every_group() {
    // "zork" is out of vocabulary, so the UNK vector receives gradient
    let data = vec![
        LabeledSentence::from_strs(&["john", "zork", "paris"], &["B-PER", "I-PER", "B-LOC"]).unwrap(),
        LabeledSentence::from_strs(&["the", "rome"], &["O", "B-LOC"]).unwrap(),
    ];
    for arch in [Architecture::Nn1, Architecture::Nn2] {
        let (mut model, emb) = random_model(arch, 9);
        let l2 = 0.05;
        let grad = model.gradient(&data, &emb, l2).unwrap();
        let groups = model.param_groups();
        let names: Vec<&str> = groups.iter().map(|g| g.0).collect();
        assert!(names.contains(&"unk") && names.contains(&"tag_embeddings"));
        assert_eq!(names.contains(&"prototypes"), arch == Architecture::Nn2);
        let base = model.params().to_vec();
        for (name, range) in groups {
            let mut params = base.clone();
            let err = max_fd_error(&mut params, &grad, range.clone(), 1e-5, |p| {
                model.params_mut().copy_from_slice(p);
                model.regularized_log_likelihood(&data, &emb, l2).unwrap()
            });
            assert!(err < 1e-4, "{arch} group {name}: max relative error {err}");
            // the data term itself reaches every group
            let data_grad: f64 = range.clone().map(|k| (grad[k] + l2 * base[k]).abs()).sum();
            assert!(data_grad > 0.0, "{arch} group {name} receives no gradient");
        }
    }
}

#[test]
fn learns_clustered_toy_and_reproduces_gold() {
    let data = clustered_corpus();
    let emb = clustered_embeddings();
    for arch in [Architecture::Nn1, Architecture::Nn2] {
        let cfg = NnConfig {
            hidden: 12,
            ..small_config(arch)
        };
        let train = NnTrainConfig {
            epochs: 60,
            learning_rate: 0.5,
            ..Default::default()
        };
        let (model, trace) =
            nn_train_with_tagset(&data, TagSet::from_sentences(&data), &emb, &cfg, &train).unwrap();
        assert!(trace.windows(2).all(|w| w[1] >= w[0]), "{trace:?}");
        for s in &data {
            let out = model.decode(s.tokens(), &emb, DecodeOptions::default());
            assert_eq!(out.tags(), s.tags(), "{arch}");
            assert!(out.confidences().iter().all(|&c| c > 0.0 && c <= 1.0));
        }
    }
}

#[test]
fn zero_epochs_returns_initialization() {
    let data = clustered_corpus();
    let emb = clustered_embeddings();
    let cfg = small_config(Architecture::Nn2);
    let train = NnTrainConfig {
        epochs: 0,
        seed: 4,
        ..Default::default()
    };
    let model = nn_train(&data, &emb, &cfg, &train).unwrap();
    let vocab: Vec<String> = data.iter().flat_map(|s| s.tokens().to_vec()).collect();
    let init = NnModel::initialize(cfg, TagSet::from_sentences(&data), &emb, &vocab, 1.0, 4).unwrap();
    assert_eq!(model, init);
}

#[test]
fn training_is_reproducible() {
    let data = clustered_corpus();
    let emb = clustered_embeddings();
    let train = NnTrainConfig {
        epochs: 5,
        ..Default::default()
    };
    let a = nn_train(&data, &emb, &small_config(Architecture::Nn2), &train).unwrap();
    let b = nn_train(&data, &emb, &small_config(Architecture::Nn2), &train).unwrap();
    assert_eq!(a.params(), b.params());
}

/// Independent greedy decoder built on the public forward pass.
fn greedy(model: &NnModel, inputs: &[Option<Vec<f64>>]) -> Vec<usize> {
    let ts = model.tagset();
    let c = model.config().window as isize;
    let mut out: Vec<usize> = Vec::new();
    for i in 0..inputs.len() as isize {
        let window: Vec<Slot> = (i - c..=i + c)
            .map(|p| match usize::try_from(p).ok().and_then(|p| inputs.get(p)) {
                None => Slot::Pad,
                Some(Some(v)) => Slot::Word(v),
                Some(None) => Slot::Unk,
            })
            .collect();
        let prev = out.last().copied();
        let p = model.forward(&window, &[prev]).unwrap();
        let mut best: Option<usize> = None;
        for l in 0..p.len() {
            if ts.allowed(prev, l) && best.is_none_or(|b| p[l] > p[b]) {
                best = Some(l);
            }
        }
        out.push(best.unwrap());
    }
    out
}

#[test]
fn greedy_equals_beam_one() {
    for seed in 0..30 {
        let (model, emb) = random_model(Architecture::Nn2, seed);
        let mut r = rng(seed);
        let words = emb.words().to_vec();
        let n = r.random_range(1..8);
        let toks: Vec<String> = (0..n)
            .map(|_| {
                if r.random_bool(0.2) {
                    "qqq".to_string()
                } else {
                    words[r.random_range(0..words.len())].clone()
                }
            })
            .collect();
        let inputs = emb.embed(&toks);
        let (labels, _) = model.decode_labels(&inputs, 1, DecodeOptions::default());
        assert_eq!(labels, greedy(&model, &inputs));
        let out = model.decode(&toks, &emb, DecodeOptions::default());
        assert_eq!(model.tagset().labels_of(out.tags()).unwrap(), labels);
    }
}

#[test]
fn all_oov_sentence_decodes_to_valid_iob2() {
    for seed in 0..10 {
        let (model, emb) = random_model(Architecture::Nn1, seed);
        let toks = toks("xx yy zz ww vv");
        assert!(emb.embed(&toks).iter().all(Option::is_none));
        let out = model.decode(&toks, &emb, DecodeOptions::default());
        assert!(validate_iob2(out.tags()).is_ok());
    }
}
