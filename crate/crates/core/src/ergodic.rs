//! Birkhoff averages, Lyapunov spectra, occupation statistics, empirical
//! measures and the `K_alpha` class test.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::MapSpec;
use crate::noise::{realize_noise, skew_step, NoiseModel, NoiseRealization};
use crate::orbit::{iterate, OrbitTrace, Region};
use crate::reduce::{tree_mean, tree_sum};
use crate::torus::{TorusPoint, MAX_DIM};

/// A per-step real channel of a trace.
pub enum Channel<'a> {
    LogInvNorm,
    LogDet,
    Indicator(Region),
    Values(&'a [f64]),
    Point(&'a (dyn Fn(&TorusPoint) -> f64 + Sync)),
}

/// Mean of the channel over steps `0..n`.
pub fn birkhoff_average(trace: &OrbitTrace, channel: Channel<'_>) -> f64 {
    let n = trace.len();
    let vals: Vec<f64> = match channel {
        Channel::LogInvNorm => trace.log_inv_norms.clone(),
        Channel::LogDet => trace.log_dets.clone(),
        Channel::Indicator(r) => trace.flags.iter().map(|f| f.is_in(r) as u8 as f64).collect(),
        Channel::Values(v) => v[..n.min(v.len())].to_vec(),
        Channel::Point(f) => trace.points[..n].iter().map(f).collect(),
    };
    tree_mean(&vals)
}

/// Finite-horizon proxy `(1/n) sum log ||Df^-1||` of the expansion rate.
pub fn expansion_exponent(trace: &OrbitTrace) -> f64 {
    tree_mean(&trace.log_inv_norms)
}

pub fn occupation_fraction(trace: &OrbitTrace, region: Region) -> f64 {
    birkhoff_average(trace, Channel::Indicator(region))
}

/// Exponents closer than this are merged into one with multiplicity.
pub const CLUSTER_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpectrum {
    /// Distinct exponents, decreasing.
    pub exponents: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// All `d` exponents with repetition, decreasing.
    pub raw: Vec<f64>,
    pub n_used: usize,
}

impl LyapunovSpectrum {
    /// `sum_i lambda_i m_i`.
    pub fn weighted_sum(&self) -> f64 {
        self.exponents.iter().zip(&self.multiplicities).map(|(l, &m)| l * m as f64).sum()
    }

    pub fn positive_sum(&self) -> f64 {
        self.raw.iter().filter(|&&l| l > 0.0).sum()
    }

    pub fn min(&self) -> f64 {
        self.raw.last().copied().unwrap_or(f64::NAN)
    }
}

fn cluster(mut raw: Vec<f64>, n_used: usize) -> LyapunovSpectrum {
    raw.sort_by(|a, b| b.total_cmp(a));
    let mut exps: Vec<f64> = vec![];
    let mut mult: Vec<usize> = vec![];
    let mut group: Vec<f64> = vec![];
    for &l in &raw {
        if let Some(&last) = group.last() {
            if last - l >= CLUSTER_TOL {
                exps.push(group.iter().sum::<f64>() / group.len() as f64);
                mult.push(group.len());
                group.clear();
            }
        }
        group.push(l);
    }
    if !group.is_empty() {
        exps.push(group.iter().sum::<f64>() / group.len() as f64);
        mult.push(group.len());
    }
    LyapunovSpectrum {
        exponents: exps,
        multiplicities: mult,
        raw,
        n_used,
    }
}

/// QR (re-orthonormalization every `reorth_every` steps) along the trace.
pub fn lyapunov_from_trace(trace: &OrbitTrace, reorth_every: usize) -> Result<LyapunovSpectrum> {
    let real = trace
        .realization
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("trace carries no realization".into()))?;
    let d = trace.dim();
    let n = trace.len();
    let mut y = DMatrix::<f64>::identity(d, d);
    let mut sums = vec![0.0f64; d];
    for k in 0..n {
        y = real.spec(k).jacobian(&trace.points[k]).to_matrix() * y;
        if (k + 1) % reorth_every == 0 || k + 1 == n {
            let qr = y.clone().qr();
            let r = qr.r();
            for i in 0..d {
                let v = r[(i, i)].abs();
                if !(v > 1e-300 && v.is_finite()) {
                    return Err(Error::DegenerateCocycle { step: k, value: r[(i, i)] });
                }
                sums[i] += v.ln();
            }
            y = qr.q();
        }
    }
    let raw: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    Ok(cluster(raw, n))
}

pub fn lyapunov_spectrum(real: &NoiseRealization, x: &TorusPoint, n: usize, reorth_every: usize) -> Result<LyapunovSpectrum> {
    if n < 100 {
        return Err(Error::InvalidSpec(format!("lyapunov needs n >= 100 (got {n})")));
    }
    if !(1..=50).contains(&reorth_every) {
        return Err(Error::InvalidSpec(format!("reorth_every = {reorth_every} outside [1, 50]")));
    }
    lyapunov_from_trace(&iterate(real, x, n)?, reorth_every)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureMeta {
    pub seed: u64,
    pub horizon: usize,
    pub burn_in: usize,
    pub fibers: usize,
}

/// Weighted point masses on `Omega x M`. Each atom carries its fiber and the
/// step at which it was recorded, so the sample measure of fiber `w` lives
/// on the fibers `T^step w`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    coords: Vec<f64>,
    fibers: Vec<u32>,
    steps: Vec<u32>,
    /// `None` means uniform weights.
    weights: Option<Vec<f64>>,
    pub meta: MeasureMeta,
    /// Generating orbits `(fiber, start)`, when known.
    pub origins: Vec<(u64, TorusPoint)>,
}

impl EmpiricalMeasure {
    pub fn from_atoms(dim: usize, atoms: &[(u64, usize, TorusPoint, f64)], meta: MeasureMeta) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.3).sum();
        if atoms.is_empty() || !(total > 0.0) || atoms.iter().any(|a| !(a.3 >= 0.0)) {
            return Err(Error::InvalidSpec("atoms need non-negative weights with positive total".into()));
        }
        let mut m = EmpiricalMeasure {
            dim,
            coords: Vec::with_capacity(atoms.len() * dim),
            fibers: Vec::with_capacity(atoms.len()),
            steps: Vec::with_capacity(atoms.len()),
            weights: Some(atoms.iter().map(|a| a.3 / total).collect()),
            meta,
            origins: vec![],
        };
        for (f, s, p, _) in atoms {
            m.coords.extend_from_slice(p.coords());
            m.fibers.push(*f as u32);
            m.steps.push(*s as u32);
        }
        Ok(m)
    }

    /// Dirac mass at `x` on fiber 0.
    pub fn dirac(x: TorusPoint) -> Self {
        EmpiricalMeasure {
            dim: x.dim(),
            coords: x.coords().to_vec(),
            fibers: vec![0],
            steps: vec![0],
            weights: None,
            meta: MeasureMeta { seed: 0, horizon: 0, burn_in: 0, fibers: 1 },
            origins: vec![(0, x)],
        }
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> TorusPoint {
        TorusPoint::new(&self.coords[i * self.dim..(i + 1) * self.dim])
    }

    pub fn fiber(&self, i: usize) -> u64 {
        self.fibers[i] as u64
    }

    pub fn step(&self, i: usize) -> usize {
        self.steps[i] as usize
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Total weight per fiber.
    pub fn fiber_marginals(&self) -> BTreeMap<u64, f64> {
        let mut m: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for i in 0..self.len() {
            m.entry(self.fiber(i)).or_default().push(self.weight(i));
        }
        m.into_iter().map(|(k, v)| (k, tree_sum(&v))).collect()
    }

    /// Atom indices grouped by fiber, in fiber order.
    pub fn by_fiber(&self) -> BTreeMap<u64, Vec<usize>> {
        let mut m: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for i in 0..self.len() {
            m.entry(self.fiber(i)).or_default().push(i);
        }
        m
    }

    /// Reweights atoms by `g(i) * weight(i)` and renormalizes.
    pub fn reweighted(&self, g: impl Fn(usize) -> f64) -> Result<Self> {
        let w: Vec<f64> = (0..self.len()).map(|i| g(i) * self.weight(i)).collect();
        let total = tree_sum(&w);
        if !(total > 0.0) || w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidSpec("reweighting must keep weights non-negative with positive total".into()));
        }
        let mut m = self.clone();
        m.weights = Some(w.iter().map(|v| v / total).collect());
        Ok(m)
    }

    /// Image under the skew product: each atom moved one step along its fiber.
    pub fn push_forward(&self, model: &NoiseModel) -> Result<Self> {
        let max_step = self.steps.iter().copied().max().unwrap_or(0) as usize;
        let mut reals: BTreeMap<u64, NoiseRealization> = BTreeMap::new();
        for f in self.by_fiber().keys() {
            reals.insert(*f, realize_noise(model, *f, max_step + 1)?);
        }
        let mut m = self.clone();
        for i in 0..self.len() {
            let r = &reals[&self.fiber(i)];
            let y = skew_step(r, self.step(i), &self.point(i));
            m.coords[i * self.dim..(i + 1) * self.dim].copy_from_slice(y.coords());
            m.steps[i] += 1;
        }
        Ok(m)
    }

    /// CSV with columns `fiber, step, x_1..x_d, weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fiber,step");
        for i in 1..=self.dim {
            let _ = write!(out, ",x_{i}");
        }
        out.push_str(",weight\n");
        for i in 0..self.len() {
            let _ = write!(out, "{},{}", self.fibers[i], self.steps[i]);
            for c in &self.coords[i * self.dim..(i + 1) * self.dim] {
                let _ = write!(out, ",{c:?}");
            }
            let _ = writeln!(out, ",{:?}", self.weight(i));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty measure file".into()))?;
        let d = header.split(',').filter(|c| c.starts_with("x_")).count();
        if d == 0 || header.split(',').count() != d + 3 {
            return Err(Error::Parse(format!("unexpected measure header `{header}`")));
        }
        let mut atoms = vec![];
        for (ln, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("bad measure row {}", ln + 1));
            if f.len() != d + 3 {
                return Err(bad());
            }
            let fiber: u64 = f[0].trim().parse().map_err(|_| bad())?;
            let step: usize = f[1].trim().parse().map_err(|_| bad())?;
            let x: Vec<f64> = f[2..2 + d].iter().map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
            let w: f64 = f[d + 2].trim().parse().map_err(|_| bad())?;
            atoms.push((fiber, step, TorusPoint::new(&x), w));
        }
        let fibers = atoms.iter().map(|a| a.0).collect::<std::collections::BTreeSet<_>>().len();
        EmpiricalMeasure::from_atoms(d, &atoms, MeasureMeta { seed: 0, horizon: 0, burn_in: 0, fibers })
    }
}

/// Uniform atoms on the orbit points `x_k`, `burn_in <= k < n`, of every
/// start; start `i` runs on fiber `i mod fibers`.
pub fn empirical_measure_fibers(
    model: &NoiseModel,
    starts: &[TorusPoint],
    n: usize,
    burn_in: usize,
    fibers: usize,
) -> Result<EmpiricalMeasure> {
    if burn_in >= n {
        return Err(Error::InvalidSpec(format!("burn_in = {burn_in} must be below n = {n}")));
    }
    if starts.is_empty() || fibers == 0 {
        return Err(Error::InvalidSpec("need at least one start and one fiber".into()));
    }
    let d = model.dim();
    let reals: Vec<NoiseRealization> = (0..fibers.min(starts.len()))
        .into_par_iter()
        .map(|f| realize_noise(model, f as u64, n))
        .collect::<Result<_>>()?;
    let per = n - burn_in;
    let chunks: Vec<Vec<f64>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let r = &reals[i % reals.len()];
            let mut out = Vec::with_capacity(per * d);
            let mut p = *x;
            for k in 0..n {
                if k >= burn_in {
                    out.extend_from_slice(p.coords());
                }
                p = skew_step(r, k, &p);
            }
            out
        })
        .collect();
    let total = starts.len() * per;
    let mut m = EmpiricalMeasure {
        dim: d,
        coords: Vec::with_capacity(total * d),
        fibers: Vec::with_capacity(total),
        steps: Vec::with_capacity(total),
        weights: None,
        meta: MeasureMeta {
            seed: model.seed(),
            horizon: n,
            burn_in,
            fibers: reals.len(),
        },
        origins: starts.iter().enumerate().map(|(i, x)| ((i % reals.len()) as u64, *x)).collect(),
    };
    for (i, c) in chunks.into_iter().enumerate() {
        m.coords.extend_from_slice(&c);
        m.fibers.extend(std::iter::repeat_n((i % reals.len()) as u32, per));
        m.steps.extend((burn_in..n).map(|k| k as u32));
    }
    Ok(m)
}

/// All starts on fiber 0.
pub fn empirical_measure(model: &NoiseModel, starts: &[TorusPoint], n: usize, burn_in: usize) -> Result<EmpiricalMeasure> {
    empirical_measure_fibers(model, starts, n, burn_in, 1)
}

/// Box counts of the `x`-marginal on the dyadic grid with `2^k` cells per axis.
pub fn box_marginal(mu: &EmpiricalMeasure, k: u32) -> Vec<f64> {
    let d = mu.dim();
    let n = 1usize << k;
    let mut out = vec![0.0; n.pow(d as u32)];
    for i in 0..mu.len() {
        out[dyadic_cell(&mu.point(i), k)] += mu.weight(i);
    }
    out
}

/// Flat index of the dyadic cell of side `2^-k` containing `x`.
pub fn dyadic_cell(x: &TorusPoint, k: u32) -> usize {
    let n = 1usize << k;
    let mut idx = 0;
    for &c in x.coords() {
        idx = idx * n + ((c * n as f64) as usize).min(n - 1);
    }
    idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct KAlphaReport {
    pub alpha: f64,
    pub v_mass: f64,
    pub in_class: bool,
    pub per_fiber_v_mass: Vec<(u64, f64)>,
}

impl KAlphaReport {
    /// The fiberwise refinement: every sample measure in `K_alpha`.
    pub fn all_fibers_in_class(&self) -> bool {
        self.per_fiber_v_mass.iter().all(|(_, m)| *m <= self.alpha)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "alpha = {}\nv_mass = {:.9}\nin_class = {}\nfibers_in_class = {}\n",
            self.alpha,
            self.v_mass,
            self.in_class,
            self.all_fibers_in_class()
        );
        for (f, m) in &self.per_fiber_v_mass {
            let _ = writeln!(s, "fiber {f}: v_mass = {m:.9}");
        }
        s
    }
}

pub fn in_v(spec: &MapSpec, x: &TorusPoint) -> bool {
    spec.jacobian(x).singular_extremes().0 * spec.v_threshold() < 1.0
}

pub fn k_alpha_test(mu: &EmpiricalMeasure, spec: &MapSpec, alpha: f64) -> KAlphaReport {
    let flags: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| if in_v(spec, &mu.point(i)) { mu.weight(i) } else { 0.0 })
        .collect();
    let v_mass = tree_sum(&flags);
    let marg = mu.fiber_marginals();
    let per_fiber = mu
        .by_fiber()
        .into_iter()
        .map(|(f, idx)| {
            let v: Vec<f64> = idx.iter().map(|&i| flags[i]).collect();
            (f, tree_sum(&v) / marg[&f])
        })
        .collect();
    KAlphaReport {
        alpha,
        v_mass,
        in_class: v_mass <= alpha,
        per_fiber_v_mass: per_fiber,
    }
}

/// First time `j <= max_n` with `d(f^j x, f^j z) > eps0`, if any.
pub fn separation_time(real: &NoiseRealization, x: &TorusPoint, z: &TorusPoint, eps0: f64, max_n: usize) -> Option<usize> {
    let (mut p, mut q) = (*x, *z);
    for j in 0..=max_n.min(real.horizon()) {
        if p.dist(&q) > eps0 {
            return Some(j);
        }
        if j < real.horizon() {
            p = skew_step(real, j, &p);
            q = skew_step(real, j, &q);
        }
    }
    None
}

/// Uniform random starts from a fixed seed.
pub fn lebesgue_starts(dim: usize, count: usize, seed: u64) -> Vec<TorusPoint> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut c = [0.0; MAX_DIM];
            for v in c.iter_mut().take(dim) {
                *v = rng.gen::<f64>();
            }
            TorusPoint::new(&c[..dim])
        })
        .collect()
}
