//! Mini-batch gradient ascent with inverse-time learning-rate decay.
//!
//! After every epoch the full regularized objective is evaluated. An epoch
//! that lowers it is rolled back and the base rate halved, so the recorded
//! objective trace never decreases.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-batch decay: rate_t = learning_rate / (1 + decay * t).
    pub decay: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Relative objective change below which training stops.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.5,
            decay: 0.001,
            l2: 1e-3,
            batch_size: 8,
            seed: 1,
            tolerance: 1e-7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.epochs < 1 {
            errs.push("epochs must be at least 1".to_string());
        }
        if !(self.learning_rate > 0.0) {
            errs.push("learning rate must be positive".to_string());
        }
        if !(self.l2 >= 0.0) {
            errs.push("l2 must be non-negative".to_string());
        }
        if !(self.decay >= 0.0) {
            errs.push("decay must be non-negative".to_string());
        }
        if self.batch_size < 1 {
            errs.push("batch size must be at least 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// A differentiable log-likelihood that decomposes over examples.
pub(crate) trait Objective: Sync {
    fn dim(&self) -> usize;
    fn num_examples(&self) -> usize;
    /// Pushes `(index, d loglik / d w[index])` pairs and returns the example
    /// log-likelihood.
    fn example_gradient(&self, idx: usize, w: &[f64], out: &mut Vec<(usize, f64)>) -> f64;
    fn example_log_likelihood(&self, idx: usize, w: &[f64]) -> f64;

    /// Objectives whose per-example gradients touch most coordinates set
    /// this and implement [`Objective::example_gradient_dense`].
    fn is_dense(&self) -> bool {
        false
    }

    /// Adds `d loglik / d w` into `out` and returns the example log-likelihood.
    fn example_gradient_dense(&self, idx: usize, w: &[f64], out: &mut [f64]) -> f64 {
        let mut buf = Vec::new();
        let ll = self.example_gradient(idx, w, &mut buf);
        for (k, v) in buf {
            out[k] += v;
        }
        ll
    }
}

pub(crate) fn regularized_objective<O: Objective>(obj: &O, w: &[f64], l2: f64) -> f64 {
    let lls: Vec<f64> = (0..obj.num_examples())
        .into_par_iter()
        .map(|i| obj.example_log_likelihood(i, w))
        .collect();
    let norm: f64 = w.iter().map(|x| x * x).sum();
    lls.iter().sum::<f64>() - 0.5 * l2 * norm
}

/// Dense gradient of the regularized objective.
pub(crate) fn full_gradient<O: Objective>(obj: &O, w: &[f64], l2: f64) -> Vec<f64> {
    let mut g: Vec<f64> = w.iter().map(|x| -l2 * x).collect();
    for i in 0..obj.num_examples() {
        obj.example_gradient_dense(i, w, &mut g);
    }
    g
}

/// Accept/reject bookkeeping for monotone epoch-level ascent.
#[derive(Debug, Clone)]
pub(crate) struct AscentGuard {
    pub current: f64,
    pub rate_scale: f64,
    tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EpochOutcome {
    Improved,
    Converged,
    Rejected,
}

impl AscentGuard {
    pub fn new(initial: f64, tolerance: f64) -> Self {
        AscentGuard {
            current: initial,
            rate_scale: 1.0,
            tolerance,
        }
    }

    pub fn judge(&mut self, epoch: usize, value: f64) -> Result<EpochOutcome> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                detail: format!("objective became {value}"),
            });
        }
        let slack = self.tolerance * self.current.abs().max(1.0);
        if value < self.current {
            self.rate_scale *= 0.5;
            return Ok(if self.rate_scale < 1e-6 {
                EpochOutcome::Converged
            } else {
                EpochOutcome::Rejected
            });
        }
        let gain = value - self.current;
        self.current = value;
        Ok(if gain <= slack {
            EpochOutcome::Converged
        } else {
            EpochOutcome::Improved
        })
    }
}

/// Maximizes `sum_i loglik_i(w) - l2/2 |w|^2` in place. Returns the objective
/// after initialization and after every accepted epoch.
pub(crate) fn maximize<O: Objective>(obj: &O, w: &mut [f64], config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = obj.num_examples();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    assert_eq!(w.len(), obj.dim());
    let initial = regularized_objective(obj, w, config.l2);
    if !initial.is_finite() {
        return Err(Error::NonFinite {
            epoch: 0,
            detail: format!("initial objective is {initial}"),
        });
    }
    let mut guard = AscentGuard::new(initial, config.tolerance);
    let mut trace = vec![initial];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    let mut snapshot = w.to_vec();

    for epoch in 1..=config.epochs {
        snapshot.copy_from_slice(w);
        let step_before = step;
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let rate = config.learning_rate * guard.rate_scale / (1.0 + config.decay * step as f64);
            step += 1;
            let scale = rate / batch.len() as f64;
            let shrink = 1.0 - rate * config.l2 / n as f64;
            let w_ref: &[f64] = w;
            if obj.is_dense() {
                let grads: Vec<Vec<f64>> = batch
                    .par_iter()
                    .map(|&i| {
                        let mut g = vec![0.0; w_ref.len()];
                        obj.example_gradient_dense(i, w_ref, &mut g);
                        g
                    })
                    .collect();
                for x in w.iter_mut() {
                    *x *= shrink;
                }
                for g in &grads {
                    for (x, v) in w.iter_mut().zip(g) {
                        *x += scale * v;
                    }
                }
            } else {
                let grads: Vec<Vec<(usize, f64)>> = batch
                    .par_iter()
                    .map(|&i| {
                        let mut g = Vec::new();
                        obj.example_gradient(i, w_ref, &mut g);
                        g
                    })
                    .collect();
                if shrink != 1.0 {
                    for x in w.iter_mut() {
                        *x *= shrink;
                    }
                }
                for g in &grads {
                    for &(k, v) in g {
                        w[k] += scale * v;
                    }
                }
            }
        }
        let value = regularized_objective(obj, w, config.l2);
        match guard.judge(epoch, value)? {
            EpochOutcome::Improved => trace.push(value),
            EpochOutcome::Converged => {
                if value >= trace[trace.len() - 1] {
                    trace.push(value);
                } else {
                    w.copy_from_slice(&snapshot);
                }
                log::debug!("converged after {epoch} epochs, objective {}", guard.current);
                break;
            }
            EpochOutcome::Rejected => {
                log::debug!("epoch {epoch} lowered the objective; halving the rate");
                w.copy_from_slice(&snapshot);
                step = step_before;
            }
        }
    }
    Ok(trace)
}
