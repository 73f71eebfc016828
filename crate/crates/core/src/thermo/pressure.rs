//! Finite-scale topological pressure from greedy separated sets.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::noise::{realize_noise, NoiseModel};
use crate::reduce::{par_map, tree_mean};
use crate::thermo::potential::Potential;
use crate::thermo::separated::{check_grid, CandidateOrbits, SeparatedSet};

#[derive(Debug, Clone, PartialEq)]
pub struct PressureRow {
    pub fiber: u64,
    pub n: usize,
    pub eps: f64,
    /// `(1/n) log sum_{x in K} exp S_n phi(x)`.
    pub value: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureEstimate {
    pub per_scale: Vec<PressureRow>,
    /// Fiber averages `(n, eps, value)`.
    pub averaged: Vec<(usize, f64, f64)>,
    /// Fiber average at the largest `n` and smallest `eps`.
    pub extrapolated: f64,
    /// Every `(fiber, n)` row is non-decreasing as `eps` shrinks.
    pub monotone_in_eps: bool,
    /// Per `eps`, consecutive differences of the averaged value in `n`.
    pub growth_in_n: Vec<(f64, usize, f64)>,
}

/// `log sum exp v`, shifted by the max.
pub fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn pressure(
    model: &NoiseModel,
    phi: &Potential,
    n_list: &[usize],
    eps_list: &[f64],
    fibers: usize,
    grid_k: u32,
) -> Result<PressureEstimate> {
    if n_list.is_empty() || eps_list.is_empty() || fibers == 0 {
        return Err(Error::InvalidSpec("pressure needs nonempty n and eps lists and fibers >= 1".into()));
    }
    if n_list.contains(&0) {
        return Err(Error::InvalidSpec("pressure needs n >= 1".into()));
    }
    for &e in eps_list {
        check_grid(e, grid_k)?;
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut eps = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let n_max = *ns.last().unwrap();

    let fiber_ids: Vec<u64> = (0..fibers as u64).collect();
    let per_fiber = par_map(&fiber_ids, |&f| -> Result<Vec<PressureRow>> {
        let real = realize_noise(model, f, n_max)?;
        let orbits = CandidateOrbits::build(&real, Some(phi), n_max, grid_k)?;
        let mut rows = Vec::new();
        for &n in &ns {
            let mut set = SeparatedSet::new(&orbits, n);
            for &e in &eps {
                set.extend(e);
                let lse = log_sum_exp(set.members().iter().map(|&c| orbits.sum(c, n)));
                rows.push(PressureRow {
                    fiber: f,
                    n,
                    eps: e,
                    value: lse / n as f64,
                    count: set.len(),
                });
            }
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_fiber {
        rows.extend(r?);
    }
    let mut averaged = Vec::new();
    for &n in &ns {
        for &e in &eps {
            let v: Vec<f64> = rows.iter().filter(|r| r.n == n && r.eps == e).map(|r| r.value).collect();
            averaged.push((n, e, tree_mean(&v)));
        }
    }
    let e_min = *eps.last().unwrap();
    let extrapolated = averaged
        .iter()
        .find(|(n, e, _)| *n == n_max && *e == e_min)
        .map(|r| r.2)
        .unwrap_or(f64::NAN);
    let monotone = rows.windows(2).all(|w| {
        !(w[0].fiber == w[1].fiber && w[0].n == w[1].n) || w[1].value >= w[0].value
    });
    let mut growth = Vec::new();
    for &e in &eps {
        let series: Vec<&(usize, f64, f64)> = averaged.iter().filter(|r| r.1 == e).collect();
        for w in series.windows(2) {
            growth.push((e, w[1].0, w[1].2 - w[0].2));
        }
    }
    Ok(PressureEstimate {
        per_scale: rows,
        averaged,
        extrapolated,
        monotone_in_eps: monotone,
        growth_in_n: growth,
    })
}

impl PressureEstimate {
    /// CSV with columns `fiber, n, eps, value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fiber,n,eps,value\n");
        for r in &self.per_scale {
            let _ = writeln!(s, "{},{},{:?},{:?}", r.fiber, r.n, r.eps, r.value);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "extrapolated = {:.9}", self.extrapolated);
        let _ = writeln!(s, "monotone_in_eps = {}", self.monotone_in_eps);
        let _ = writeln!(
            s,
            "note: greedy counts lower-bound the supremum over separated sets; finite n adds a bias of order log(C(eps))/n"
        );
        for (n, e, v) in &self.averaged {
            let counts: Vec<String> = self
                .per_scale
                .iter()
                .filter(|r| r.n == *n && r.eps == *e)
                .map(|r| r.count.to_string())
                .collect();
            let _ = writeln!(s, "n = {n}  eps = {e}  value = {v:.9}  counts = [{}]", counts.join(" "));
        }
        for (e, n, g) in &self.growth_in_n {
            let _ = writeln!(s, "growth eps = {e}  up to n = {n}: {g:+.6}");
        }
        s
    }
}
