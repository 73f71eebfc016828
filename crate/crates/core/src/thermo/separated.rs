//! Greedy `(n, eps)`-separated sets over a dyadic candidate grid.
//!
//! Candidates are the centers of the dyadic cells of side `2^-k`, visited in
//! Morton (bit-interleaved) order. A static binary tree over that order keeps,
//! for each node and each time `j`, a radius bounding the distance from the
//! node's first candidate to every other candidate at time `j`, so a query
//! skips whole subtrees that are `eps`-far at some time.

use crate::error::{Error, Result};
use crate::noise::{skew_step, NoiseRealization};
use crate::thermo::potential::Potential;
use crate::torus::{circle_dist, TorusPoint, MAX_DIM};

const LEAF: usize = 32;

/// Orbits of every candidate of the grid for `n` steps.
pub struct CandidateOrbits {
    dim: usize,
    n: usize,
    /// Stored times per candidate, `max(n, 1)` so time 0 is always kept.
    rows: usize,
    count: usize,
    /// `[candidate][time][axis]`.
    orbit: Vec<f64>,
    /// `S_m(x)` for `m = 0..=n`, `[candidate][m]`.
    sums: Vec<f64>,
}

/// Cell center of Morton index `m` on the `2^k` grid.
pub fn morton_point(m: usize, dim: usize, k: u32) -> TorusPoint {
    let mut idx = [0usize; MAX_DIM];
    for b in 0..k as usize {
        for (i, v) in idx.iter_mut().enumerate().take(dim) {
            *v |= (m >> (b * dim + i) & 1) << b;
        }
    }
    let n = (1usize << k) as f64;
    let mut c = [0.0; MAX_DIM];
    for i in 0..dim {
        c[i] = (idx[i] as f64 + 0.5) / n;
    }
    TorusPoint::new(&c[..dim])
}

impl CandidateOrbits {
    pub fn build(real: &NoiseRealization, phi: Option<&Potential>, n: usize, grid_k: u32) -> Result<Self> {
        if n > real.horizon() {
            return Err(Error::HorizonExceeded {
                horizon: real.horizon(),
                requested: n,
            });
        }
        let dim = real.dim();
        let bits = grid_k as usize * dim;
        if bits > 40 {
            return Err(Error::InvalidSpec(format!("candidate grid 2^{bits} is too large")));
        }
        let count = 1usize << bits;
        let rows = n.max(1);
        let mut orbit = Vec::with_capacity(count * rows * dim);
        let mut sums = Vec::with_capacity(count * (n + 1));
        for m in 0..count {
            let mut p = morton_point(m, dim, grid_k);
            let mut s = 0.0;
            sums.push(0.0);
            for t in 0..rows {
                orbit.extend_from_slice(p.coords());
                if t == n {
                    break;
                }
                if let Some(phi) = phi {
                    s += phi.eval(real.fiber(), real.offset() + t, &p);
                }
                sums.push(s);
                if t + 1 < n {
                    p = skew_step(real, t, &p);
                }
            }
        }
        Ok(CandidateOrbits {
            dim,
            n,
            rows,
            count,
            orbit,
            sums,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, c: usize, t: usize) -> &[f64] {
        let o = (c * self.rows + t) * self.dim;
        &self.orbit[o..o + self.dim]
    }

    pub fn point(&self, c: usize) -> TorusPoint {
        TorusPoint::new(self.at(c, 0))
    }

    /// Birkhoff sum `S_m` of candidate `c`.
    pub fn sum(&self, c: usize, m: usize) -> f64 {
        self.sums[c * (self.n + 1) + m]
    }

    #[inline]
    fn dist_at(&self, a: usize, b: usize, t: usize) -> f64 {
        let (x, y) = (self.at(a, t), self.at(b, t));
        let mut d = 0.0f64;
        for i in 0..self.dim {
            d = d.max(circle_dist(x[i], y[i]));
        }
        d
    }
}

/// Greedy separated-set state for one prefix length `n <= orbits.horizon()`.
/// Calling [`SeparatedSet::extend`] with decreasing `eps` keeps earlier
/// points, so the sets nest.
pub struct SeparatedSet<'a> {
    orbits: &'a CandidateOrbits,
    n: usize,
    leaf: usize,
    leaves: usize,
    radii: Vec<f32>,
    /// Candidates within the current `eps` Bowen ball of some member.
    covered: Vec<bool>,
    covered_eps: f64,
    accepted: Vec<bool>,
    members: Vec<usize>,
}

impl<'a> SeparatedSet<'a> {
    pub fn new(orbits: &'a CandidateOrbits, n: usize) -> Self {
        assert!(n <= orbits.n);
        let leaf = LEAF.min(orbits.count);
        let leaves = orbits.count / leaf;
        let nodes = 2 * leaves;
        let tn = orbits.rows;
        let mut radii = vec![0f32; nodes * tn];
        let mut r64 = vec![0f64; nodes * tn];
        for l in 0..leaves {
            let node = leaves + l;
            let rep = l * leaf;
            for t in 0..tn {
                let mut r = 0.0f64;
                for c in rep + 1..rep + leaf {
                    r = r.max(orbits.dist_at(rep, c, t));
                }
                r64[node * tn + t] = r;
            }
        }
        for node in (1..leaves).rev() {
            let (lc, rc) = (2 * node, 2 * node + 1);
            let rep_r = Self::rep_of(rc, leaves, leaf);
            let rep = Self::rep_of(node, leaves, leaf);
            for t in 0..tn {
                let a = r64[lc * tn + t];
                let b = orbits.dist_at(rep, rep_r, t) + r64[rc * tn + t];
                r64[node * tn + t] = a.max(b).min(1.0);
            }
        }
        for (dst, &src) in radii.iter_mut().zip(&r64) {
            // round up so the stored radius still bounds the true one
            let f = src as f32;
            *dst = if (f as f64) < src { f32::from_bits(f.to_bits() + 1) } else { f };
        }
        SeparatedSet {
            orbits,
            n,
            leaf,
            leaves,
            radii,
            covered: vec![false; orbits.count],
            covered_eps: f64::NAN,
            accepted: vec![false; orbits.count],
            members: vec![],
        }
    }

    fn rep_of(node: usize, leaves: usize, leaf: usize) -> usize {
        // leftmost leaf below `node`
        let mut v = node;
        while v < leaves {
            v *= 2;
        }
        (v - leaves) * leaf
    }

    #[inline]
    fn conflicts(&self, a: usize, b: usize, eps: f64) -> bool {
        (0..self.n).all(|t| self.orbits.dist_at(a, b, t) <= eps)
    }

    /// Marks every candidate in the `(n, eps)` Bowen ball of `y`.
    fn mark(&mut self, y: usize, eps: f64, stack: &mut Vec<usize>) {
        let tn = self.orbits.rows;
        stack.clear();
        stack.push(1);
        while let Some(node) = stack.pop() {
            let rep = Self::rep_of(node, self.leaves, self.leaf);
            let far = (0..self.n)
                .any(|t| self.orbits.dist_at(y, rep, t) > eps + self.radii[node * tn + t] as f64);
            if far {
                continue;
            }
            if node >= self.leaves {
                for c in rep..rep + self.leaf {
                    if !self.covered[c] && self.conflicts(y, c, eps) {
                        self.covered[c] = true;
                    }
                }
            } else {
                stack.push(2 * node + 1);
                stack.push(2 * node);
            }
        }
    }

    /// Adds every candidate, in order, that is `(n, eps)`-separated from the
    /// current members.
    pub fn extend(&mut self, eps: f64) {
        let mut stack = Vec::with_capacity(64);
        if eps != self.covered_eps {
            self.covered.iter_mut().for_each(|c| *c = false);
            for i in 0..self.members.len() {
                let y = self.members[i];
                self.mark(y, eps, &mut stack);
            }
            self.covered_eps = eps;
        }
        // conflict is symmetric, so an uncovered candidate is separated from
        // every member
        for c in 0..self.orbits.count {
            if !self.accepted[c] && !self.covered[c] {
                self.accepted[c] = true;
                self.members.push(c);
                self.mark(c, eps, &mut stack);
            }
        }
    }

    /// Candidate indices, in insertion order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn points(&self) -> Vec<TorusPoint> {
        self.members.iter().map(|&c| self.orbits.point(c)).collect()
    }
}

pub(crate) fn check_grid(eps: f64, grid_k: u32) -> Result<()> {
    if (0.5f64).powi(grid_k as i32) >= eps / 4.0 {
        return Err(Error::GridTooCoarse { grid_k, eps });
    }
    Ok(())
}

/// Greedy maximal `(n, eps)`-separated subset of the dyadic candidate grid:
/// every pair has `max_{0 <= j < n} d(f^j x, f^j y) > eps`.
pub fn separated_set(real: &NoiseRealization, n: usize, eps: f64, grid_k: u32) -> Result<Vec<TorusPoint>> {
    check_grid(eps, grid_k)?;
    let orbits = CandidateOrbits::build(real, None, n, grid_k)?;
    let mut s = SeparatedSet::new(&orbits, n);
    s.extend(eps);
    Ok(s.points())
}

/// Checks pairwise separation of `points` directly (test oracle).
pub fn is_separated(real: &NoiseRealization, points: &[TorusPoint], n: usize, eps: f64) -> bool {
    let orbits: Vec<Vec<TorusPoint>> = points
        .iter()
        .map(|x| {
            let mut v = vec![*x];
            for t in 0..n.saturating_sub(1) {
                let p = skew_step(real, t, v.last().unwrap());
                v.push(p);
            }
            v
        })
        .collect();
    for a in 0..orbits.len() {
        for b in a + 1..orbits.len() {
            if (0..n).all(|t| orbits[a][t].dist(&orbits[b][t]) <= eps) {
                return false;
            }
        }
    }
    true
}
