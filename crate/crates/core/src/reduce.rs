//! Order-fixed reductions, so parallel results do not depend on thread count.

use rayon::prelude::*;

/// Pairwise sum with a fixed split tree.
pub fn tree_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
}

pub fn tree_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    tree_sum(xs) / xs.len() as f64
}

/// Maps in parallel and collects in input order.
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.par_iter().map(f).collect()
}
