//! Exact phrasal-match precision, recall and F1, and the stratified
//! shuffling significance test.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{EntityMention, LabeledSentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            self.correct as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            0.0
        } else {
            self.correct as f64 / self.gold as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: Counts) {
        self.gold += other.gold;
        self.predicted += other.predicted;
        self.correct += other.correct;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalReport {
    pub overall: Counts,
    pub per_type: BTreeMap<String, Counts>,
}

impl EvalReport {
    pub fn precision(&self) -> f64 {
        self.overall.precision()
    }

    pub fn recall(&self) -> f64 {
        self.overall.recall()
    }

    pub fn f1(&self) -> f64 {
        self.overall.f1()
    }

    /// `key<TAB>value` lines: overall figures, then `TYPE.metric` rows.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut put = |prefix: &str, c: &Counts| {
            for (k, v) in [
                ("precision", c.precision()),
                ("recall", c.recall()),
                ("f1", c.f1()),
            ] {
                out.push_str(&format!("{prefix}{k}\t{v}\n"));
            }
            for (k, v) in [("gold", c.gold), ("predicted", c.predicted), ("correct", c.correct)] {
                out.push_str(&format!("{prefix}{k}\t{v}\n"));
            }
        };
        put("", &self.overall);
        for (t, c) in &self.per_type {
            put(&format!("{t}."), c);
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.per_type.keys().map(String::len).max().unwrap_or(0).max(7);
        writeln!(
            f,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>6}  {:>9}  {:>7}",
            "type", "precision", "recall", "f1", "gold", "predicted", "correct"
        )?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, c: &Counts| {
            writeln!(
                f,
                "{name:<width$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>6}  {:>9}  {:>7}",
                100.0 * c.precision(),
                100.0 * c.recall(),
                100.0 * c.f1(),
                c.gold,
                c.predicted,
                c.correct
            )
        };
        for (t, c) in &self.per_type {
            row(f, t, c)?;
        }
        row(f, "overall", &self.overall)
    }
}

fn check_aligned(gold: &[LabeledSentence], pred: &[LabeledSentence]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Misaligned {
            sentence: gold.len().min(pred.len()),
            message: format!("{} gold sentences but {} predicted", gold.len(), pred.len()),
        });
    }
    for (k, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Misaligned {
                sentence: k,
                message: format!("{} gold tokens but {} predicted", g.len(), p.len()),
            });
        }
        if let Some(pos) = g.tokens().iter().zip(p.tokens()).position(|(a, b)| a != b) {
            return Err(Error::TokenMismatch {
                sentence: k,
                position: pos,
            });
        }
    }
    Ok(())
}

fn sentence_counts(gold: &[EntityMention], pred: &[EntityMention]) -> Counts {
    let g: HashSet<&EntityMention> = gold.iter().collect();
    Counts {
        gold: gold.len(),
        predicted: pred.len(),
        correct: pred.iter().filter(|e| g.contains(e)).count(),
    }
}

/// Entity-level scores; an entity is correct only if start, end and type
/// all match.
pub fn phrasal_f1(gold: &[LabeledSentence], pred: &[LabeledSentence]) -> Result<EvalReport> {
    check_aligned(gold, pred)?;
    let mut report = EvalReport::default();
    for (g, p) in gold.iter().zip(pred) {
        let ge = g.entities();
        let pe = p.entities();
        report.overall.add(sentence_counts(&ge, &pe));
        let types: std::collections::BTreeSet<&str> =
            ge.iter().chain(&pe).map(|e| e.etype.as_str()).collect();
        for t in types {
            let gt: Vec<EntityMention> = ge.iter().filter(|e| e.etype == t).cloned().collect();
            let pt: Vec<EntityMention> = pe.iter().filter(|e| e.etype == t).cloned().collect();
            report
                .per_type
                .entry(t.to_string())
                .or_default()
                .add(sentence_counts(&gt, &pt));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceResult {
    pub observed: f64,
    pub p_value: f64,
    pub iterations: usize,
    /// Shuffles whose statistic reached the observed one.
    pub at_least_as_extreme: usize,
}

pub const MIN_SHUFFLES: usize = 1000;

/// Paired test of `|F1(a) - F1(b)|`: each shuffle swaps the two systems'
/// outputs for every sentence independently with probability 1/2. Shuffle
/// `k` draws from a ChaCha8 stream keyed by `(seed, k)`, so results do not
/// depend on thread scheduling.
pub fn stratified_shuffling_test(
    outputs_a: &[LabeledSentence],
    outputs_b: &[LabeledSentence],
    gold: &[LabeledSentence],
    iterations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if iterations < MIN_SHUFFLES {
        return Err(Error::Invalid(format!(
            "at least {MIN_SHUFFLES} shuffles are required, got {iterations}"
        )));
    }
    check_aligned(gold, outputs_a)?;
    check_aligned(gold, outputs_b)?;
    let per_sentence: Vec<(Counts, Counts)> = gold
        .iter()
        .zip(outputs_a.iter().zip(outputs_b))
        .map(|(g, (a, b))| {
            let ge = g.entities();
            (sentence_counts(&ge, &a.entities()), sentence_counts(&ge, &b.entities()))
        })
        .collect();
    let stat = |swaps: &dyn Fn(usize) -> bool| {
        let mut ca = Counts::default();
        let mut cb = Counts::default();
        for (k, (a, b)) in per_sentence.iter().enumerate() {
            if swaps(k) {
                ca.add(*b);
                cb.add(*a);
            } else {
                ca.add(*a);
                cb.add(*b);
            }
        }
        (ca.f1() - cb.f1()).abs()
    };
    let observed = stat(&|_| false);
    let hits = (0..iterations)
        .into_par_iter()
        .filter(|&it| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(it as u64);
            let flips: Vec<bool> = (0..per_sentence.len()).map(|_| rng.random_bool(0.5)).collect();
            stat(&|k| flips[k]) >= observed - 1e-12
        })
        .count();
    Ok(SignificanceResult {
        observed,
        p_value: (1 + hits) as f64 / (1 + iterations) as f64,
        iterations,
        at_least_as_extreme: hits,
    })
}
