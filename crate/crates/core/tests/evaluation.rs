use crossner::corpus::{LabeledSentence, Tag};
use crossner::eval::*;

fn s(words: &str, tags: &[&str]) -> LabeledSentence {
    let w: Vec<&str> = words.split(' ').collect();
    LabeledSentence::from_strs(&w, tags).unwrap()
}

/// Five sentences; counted by hand: 7 gold entities, 6 predicted, 4 exactly
/// right (John Smith, Paris, EU, IBM). The misses are a boundary error
/// (New York), a type error (Acme) and an unpredicted entity (Bob).
fn fixture() -> (Vec<LabeledSentence>, Vec<LabeledSentence>) {
    let gold = vec![
        s("John Smith went to Paris", &["B-PER", "I-PER", "O", "O", "B-LOC"]),
        s("the EU met in New York", &["O", "B-ORG", "O", "O", "B-LOC", "I-LOC"]),
        s("nothing happened", &["O", "O"]),
        s("Acme hired Bob", &["B-ORG", "O", "B-PER"]),
        s("IBM rose", &["B-ORG", "O"]),
    ];
    let pred = vec![
        s("John Smith went to Paris", &["B-PER", "I-PER", "O", "O", "B-LOC"]),
        s("the EU met in New York", &["O", "B-ORG", "O", "O", "B-LOC", "O"]),
        s("nothing happened", &["O", "O"]),
        s("Acme hired Bob", &["B-PER", "O", "O"]),
        s("IBM rose", &["B-ORG", "O"]),
    ];
    (gold, pred)
}

#[test]
fn five_sentence_fixture() {
    let (gold, pred) = fixture();
    let r = phrasal_f1(&gold, &pred).unwrap();
    assert_eq!(r.overall, Counts { gold: 7, predicted: 6, correct: 4 });
    assert!((r.precision() - 4.0 / 6.0).abs() < 1e-12);
    assert!((r.recall() - 4.0 / 7.0).abs() < 1e-12);
    assert!((r.f1() - 8.0 / 13.0).abs() < 1e-12);
    assert_eq!(r.per_type["PER"], Counts { gold: 2, predicted: 2, correct: 1 });
    assert_eq!(r.per_type["LOC"], Counts { gold: 2, predicted: 2, correct: 1 });
    assert_eq!(r.per_type["ORG"], Counts { gold: 3, predicted: 2, correct: 2 });
    assert_eq!(phrasal_f1(&gold, &gold).unwrap().f1(), 1.0);
}

#[test]
fn key_value_report_is_stable() {
    let (gold, pred) = fixture();
    let a = phrasal_f1(&gold, &pred).unwrap().to_key_values();
    let b = phrasal_f1(&gold, &pred).unwrap().to_key_values();
    assert_eq!(a, b);
    let keys: Vec<&str> = a.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(&keys[..6], &["precision", "recall", "f1", "gold", "predicted", "correct"]);
    assert!(keys.contains(&"LOC.f1") && keys.contains(&"ORG.recall") && keys.contains(&"PER.correct"));
}

fn synthetic(n: usize) -> (Vec<LabeledSentence>, Vec<LabeledSentence>) {
    let gold: Vec<LabeledSentence> = (0..n)
        .map(|k| match k % 3 {
            0 => s("Ann visited Rome", &["B-PER", "O", "B-LOC"]),
            1 => s("the United Nations met", &["O", "B-ORG", "I-ORG", "O"]),
            _ => s("Bo Li spoke", &["B-PER", "I-PER", "O"]),
        })
        .collect();
    let all_o = gold
        .iter()
        .map(|g| g.with_tags(vec![Tag::O; g.len()]).unwrap())
        .collect();
    (gold, all_o)
}

#[test]
fn identical_systems_are_indistinguishable() {
    let (gold, other) = synthetic(50);
    let r = stratified_shuffling_test(&other, &other, &gold, 2000, 4).unwrap();
    assert_eq!(r.observed, 0.0);
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn perfect_against_all_o_is_significant() {
    let (gold, all_o) = synthetic(200);
    let r = stratified_shuffling_test(&gold, &all_o, &gold, 10_000, 7).unwrap();
    assert_eq!(r.observed, 1.0);
    assert!(r.p_value < 0.001, "p = {}", r.p_value);
}

#[test]
fn test_is_symmetric_and_deterministic() {
    let (gold, pred) = fixture();
    let half: Vec<LabeledSentence> = gold
        .iter()
        .zip(&pred)
        .enumerate()
        .map(|(k, (g, p))| if k % 2 == 0 { g.clone() } else { p.clone() })
        .collect();
    let ab = stratified_shuffling_test(&half, &pred, &gold, 1000, 3).unwrap();
    let ba = stratified_shuffling_test(&pred, &half, &gold, 1000, 3).unwrap();
    assert_eq!(ab, ba);
    assert_eq!(ab, stratified_shuffling_test(&half, &pred, &gold, 1000, 3).unwrap());
    assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
}

#[test]
fn misaligned_inputs_are_rejected() {
    let (gold, pred) = fixture();
    assert!(phrasal_f1(&gold, &pred[..4]).is_err());
    let mut bad = pred.clone();
    bad[2] = s("nothing occurred", &["O", "O"]);
    assert!(matches!(
        phrasal_f1(&gold, &bad),
        Err(crossner::Error::TokenMismatch { sentence: 2, position: 1 })
    ));
    assert!(stratified_shuffling_test(&gold, &bad, &gold, 1000, 1).is_err());
}
