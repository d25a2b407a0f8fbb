//! Linear sequence taggers: a first-order linear-chain CRF and an order-o
//! maximum-entropy Markov model.
//!
//! Both share the sparse feature templates in [`crate::features`] and the
//! mini-batch gradient ascent in [`optim`].

pub mod crf;
pub mod memm;
pub mod optim;

pub use crf::{crf_train, LinearChainCrf, Lattice};
pub use memm::{memm_train, Memm};
pub use optim::TrainConfig;

/// Decoder switches shared by the taggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Forbid label transitions that would produce invalid IOB2.
    pub constrain_iob: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            constrain_iob: true,
        }
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// In-place log-softmax.
pub(crate) fn log_softmax(xs: &mut [f64]) {
    let z = log_sum_exp(xs);
    for x in xs.iter_mut() {
        *x -= z;
    }
}

#[derive(Debug, Clone)]
struct Hypothesis {
    labels: Vec<usize>,
    log_prob: f64,
    confidences: Vec<f64>,
}

impl Hypothesis {
    /// Last `o` labels, most recent first, padded with `None`.
    fn history(&self, o: usize) -> Vec<Option<usize>> {
        (1..=o)
            .map(|j| self.labels.len().checked_sub(j).map(|k| self.labels[k]))
            .collect()
    }
}

/// Beam search for locally normalized taggers whose distribution at position
/// `i` depends on the last `order` labels. `local(i, history)` returns log
/// probabilities over labels; `history[0]` is the previous label and `None`
/// pads the sentence start. Hypotheses sharing a history are recombined, so
/// a beam of `L^order` is exact. Ties go to the lexicographically first
/// label sequence. Returns the labels and the probability of each emitted
/// label.
pub(crate) fn beam_search(
    len: usize,
    num_labels: usize,
    order: usize,
    beam: usize,
    constrain: Option<&crate::corpus::TagSet>,
    mut local: impl FnMut(usize, &[Option<usize>]) -> Vec<f64>,
) -> (Vec<usize>, Vec<f64>) {
    assert!(beam >= 1);
    let mut hyps = vec![Hypothesis {
        labels: Vec::new(),
        log_prob: 0.0,
        confidences: Vec::new(),
    }];
    for i in 0..len {
        let mut cands: Vec<Hypothesis> = Vec::with_capacity(hyps.len() * num_labels);
        for h in &hyps {
            let s = local(i, &h.history(order));
            let prev = h.labels.last().copied();
            for (c, lp) in s.iter().enumerate() {
                if constrain.is_some_and(|ts| !ts.allowed(prev, c)) {
                    continue;
                }
                let mut labels = h.labels.clone();
                labels.push(c);
                let mut confidences = h.confidences.clone();
                confidences.push(lp.exp());
                cands.push(Hypothesis {
                    labels,
                    log_prob: h.log_prob + lp,
                    confidences,
                });
            }
        }
        cands.sort_by(|a, b| {
            b.log_prob
                .total_cmp(&a.log_prob)
                .then_with(|| a.labels.cmp(&b.labels))
        });
        let mut seen = std::collections::HashSet::new();
        hyps = cands
            .into_iter()
            .filter(|h| seen.insert(h.history(order)))
            .take(beam)
            .collect();
    }
    let best = hyps.into_iter().next().expect("beam never empties");
    (best.labels, best.confidences)
}

/// Index of the first maximum.
#[cfg(test)]
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
