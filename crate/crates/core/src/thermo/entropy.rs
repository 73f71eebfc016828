//! Plug-in random Kolmogorov-Sinai entropy from itinerary words.

use crate::ergodic::{dyadic_cell, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::noise::{realize_noise, skew_step, NoiseModel, NoiseRealization};

/// Dyadic partition of the torus into half-open cells of side `2^-k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    pub dim: usize,
    pub k: u32,
}

impl PartitionSpec {
    pub fn new(dim: usize, k: u32) -> Self {
        PartitionSpec { dim, k }
    }

    pub fn cells(&self) -> usize {
        (1usize << self.k).pow(self.dim as u32)
    }

    /// Supremum of distances within a cell in the max metric.
    pub fn diameter(&self) -> f64 {
        (0.5f64).powi(self.k as i32)
    }

    /// Whether the diameter is below `eps0`, the precondition under which the
    /// partition is generating.
    pub fn below(&self, eps0: f64) -> bool {
        self.diameter() < eps0
    }
}

/// `-sum p log p` in nats, with `0 log 0 = 0`.
pub fn partition_entropy(weights: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in weights {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberEntropy {
    pub fiber: u64,
    /// `(1/n) H` of the word distribution.
    pub value: f64,
    pub words: usize,
    pub atoms: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub n: usize,
    pub per_fiber: Vec<FiberEntropy>,
}

/// Words of length `n` for the atoms of one fiber, flattened with stride `n`.
fn words(mu: &EmpiricalMeasure, real: &NoiseRealization, part: &PartitionSpec, idx: &[usize], n: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(idx.len() * n);
    for &i in idx {
        let mut p = mu.point(i);
        let s = mu.step(i);
        for t in 0..n {
            out.push(dyadic_cell(&p, part.k) as u32);
            if t + 1 < n {
                p = skew_step(real, s + t, &p);
            }
        }
    }
    out
}

/// Per fiber, codes every atom by its length-`n` itinerary through `part`
/// and takes `(1/n)` times the Shannon entropy of the weighted word
/// distribution; fibers are averaged with their marginal weights.
pub fn random_ks_entropy(mu: &EmpiricalMeasure, model: &NoiseModel, part: &PartitionSpec, n: usize) -> Result<EntropyEstimate> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("entropy needs n >= 2 (got {n})")));
    }
    if part.dim != mu.dim() {
        return Err(Error::InvalidSpec("partition and measure dimensions differ".into()));
    }
    let marg = mu.fiber_marginals();
    let mut per_fiber = Vec::new();
    let mut total = 0.0;
    for (f, idx) in mu.by_fiber() {
        let max_step = idx.iter().map(|&i| mu.step(i)).max().unwrap_or(0);
        let real = realize_noise(model, f, max_step + n)?;
        let w = words(mu, &real, part, &idx, n);
        let mut order: Vec<usize> = (0..idx.len()).collect();
        order.sort_by(|&a, &b| w[a * n..(a + 1) * n].cmp(&w[b * n..(b + 1) * n]));
        let mf = marg[&f];
        let mut run_start = 0;
        let mut probs = Vec::new();
        for r in 1..=order.len() {
            let boundary = r == order.len() || w[order[r] * n..(order[r] + 1) * n] != w[order[run_start] * n..(order[run_start] + 1) * n];
            if boundary {
                let p: f64 = order[run_start..r].iter().map(|&j| mu.weight(idx[j])).sum::<f64>() / mf;
                probs.push(p);
                run_start = r;
            }
        }
        let n_words = probs.len();
        if n_words > 1 && idx.len() < 10 * n_words {
            return Err(Error::InsufficientAtoms {
                fiber: f,
                atoms: idx.len(),
                words: n_words,
            });
        }
        let h = partition_entropy(&probs) / n as f64;
        total += mf * h;
        per_fiber.push(FiberEntropy {
            fiber: f,
            value: h,
            words: n_words,
            atoms: idx.len(),
        });
    }
    Ok(EntropyEstimate {
        value: total,
        n,
        per_fiber,
    })
}
