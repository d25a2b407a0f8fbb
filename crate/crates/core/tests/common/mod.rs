//! Test-only oracles: exhaustive enumeration and finite differences.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// All label sequences of `len` over `0..labels`, in lexicographic order.
pub fn all_sequences(len: usize, labels: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..labels).map(move |l| {
                    let mut t = s.clone();
                    t.push(l);
                    t
                })
            })
            .collect();
    }
    out
}

/// Brute-force CRF quantities from raw emission/transition matrices:
/// (log Z, marginals, lexicographically-first argmax).
pub fn brute_force_crf(
    emissions: &[f64],
    transitions: &[f64],
    labels: usize,
    allowed: impl Fn(&[usize]) -> bool,
) -> (f64, Vec<Vec<f64>>, Vec<usize>) {
    let n = emissions.len() / labels;
    let seqs: Vec<Vec<usize>> = all_sequences(n, labels)
        .into_iter()
        .filter(|s| allowed(s))
        .collect();
    let scores: Vec<f64> = seqs
        .iter()
        .map(|s| {
            let mut sc = 0.0;
            for (i, &c) in s.iter().enumerate() {
                sc += emissions[i * labels + c];
                if i > 0 {
                    sc += transitions[s[i - 1] * labels + c];
                }
            }
            sc
        })
        .collect();
    let z: f64 = scores.iter().map(|s| s.exp()).sum();
    let mut marg = vec![vec![0.0; labels]; n];
    for (s, sc) in seqs.iter().zip(&scores) {
        let p = sc.exp() / z;
        for (i, &c) in s.iter().enumerate() {
            marg[i][c] += p;
        }
    }
    let mut best = 0;
    for k in 0..seqs.len() {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    (z.ln(), marg, seqs[best].clone())
}

/// Relative error used by the gradient checks: |a - n| / max(|a|, |n|, 1e-6).
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Max relative error between `analytic` and central differences of `f`
/// around `params`, over the coordinates in `indices`.
pub fn max_fd_error(
    params: &mut Vec<f64>,
    analytic: &[f64],
    indices: impl IntoIterator<Item = usize>,
    h: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for k in indices {
        let orig = params[k];
        params[k] = orig + h;
        let up = f(params);
        params[k] = orig - h;
        let down = f(params);
        params[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(rel_error(analytic[k], numeric));
    }
    worst
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}
