//! Potentials `phi_w(x)` on the fibers.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::torus::{TorusPoint, MAX_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub freq: [i32; MAX_DIM],
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Constant(f64),
    /// `sum amp cos(2 pi <freq, x> + phase)`, scaled per step by
    /// `1 + modulation * m(fiber, step)` with `m` uniform in `[-1, 1]`.
    Trig { terms: Vec<TrigTerm>, modulation: f64 },
    /// Values at the centers of the dyadic cells of side `2^-k`, interpolated
    /// multilinearly (periodically) in between.
    Tabulated { dim: usize, k: u32, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Constant added to every value.
    pub shift: f64,
}

fn modulation_draw(fiber: u64, step: usize) -> f64 {
    let mut z = fiber.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (step as u64).wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    2.0 * ((z >> 11) as f64 / (1u64 << 53) as f64) - 1.0
}

impl Potential {
    pub fn zero() -> Self {
        Potential::constant(0.0)
    }

    pub fn constant(c0: f64) -> Self {
        Potential {
            kind: PotentialKind::Constant(c0),
            shift: 0.0,
        }
    }

    pub fn trig(terms: Vec<TrigTerm>, modulation: f64) -> Self {
        Potential {
            kind: PotentialKind::Trig { terms, modulation },
            shift: 0.0,
        }
    }

    pub fn tabulated(dim: usize, k: u32, values: Vec<f64>) -> Result<Self> {
        let n = 1usize << k;
        if values.len() != n.pow(dim as u32) {
            return Err(Error::InvalidSpec(format!(
                "tabulated potential needs {} values, got {}",
                n.pow(dim as u32),
                values.len()
            )));
        }
        Ok(Potential {
            kind: PotentialKind::Tabulated { dim, k, values },
            shift: 0.0,
        })
    }

    /// `phi + c0`.
    pub fn plus_constant(&self, c0: f64) -> Self {
        let mut p = self.clone();
        p.shift += c0;
        p
    }

    /// `phi_{T^step w}(x)` on fiber `fiber`.
    pub fn eval(&self, fiber: u64, step: usize, x: &TorusPoint) -> f64 {
        let base = match &self.kind {
            PotentialKind::Constant(c) => *c,
            PotentialKind::Trig { terms, modulation } => {
                let mut s = 0.0;
                for t in terms {
                    let mut arg = 0.0;
                    for i in 0..x.dim() {
                        arg += t.freq[i] as f64 * x.get(i);
                    }
                    s += t.amplitude * (TAU * arg + t.phase).cos();
                }
                if *modulation != 0.0 {
                    s *= 1.0 + modulation * modulation_draw(fiber, step);
                }
                s
            }
            PotentialKind::Tabulated { dim, k, values } => interpolate(*dim, *k, values, x),
        };
        base + self.shift
    }

    /// `||phi||_1 = int |phi_w|_inf dP`: the sup over a `64^d` grid at step 0,
    /// averaged over fibers `0..fibers`. Exact for constants.
    pub fn norm1(&self, dim: usize, fibers: usize) -> f64 {
        if let PotentialKind::Constant(c) = self.kind {
            return (c + self.shift).abs();
        }
        let per = 64usize;
        let total = per.pow(dim as u32);
        let mut acc = 0.0;
        for f in 0..fibers.max(1) {
            let mut best = 0.0f64;
            for idx in 0..total {
                let mut c = [0.0; MAX_DIM];
                let mut rest = idx;
                for v in c.iter_mut().take(dim).rev() {
                    *v = ((rest % per) as f64 + 0.5) / per as f64;
                    rest /= per;
                }
                best = best.max(self.eval(f as u64, 0, &TorusPoint::new(&c[..dim])).abs());
            }
            acc += best;
        }
        acc / fibers.max(1) as f64
    }

    /// `(inf, sup)` over the same grid and fibers as [`Potential::norm1`].
    pub fn range(&self, dim: usize, fibers: usize) -> (f64, f64) {
        if let PotentialKind::Constant(c) = self.kind {
            return (c + self.shift, c + self.shift);
        }
        let per = 64usize;
        let total = per.pow(dim as u32);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for f in 0..fibers.max(1) {
            for idx in 0..total {
                let mut c = [0.0; MAX_DIM];
                let mut rest = idx;
                for v in c.iter_mut().take(dim).rev() {
                    *v = ((rest % per) as f64 + 0.5) / per as f64;
                    rest /= per;
                }
                let v = self.eval(f as u64, 0, &TorusPoint::new(&c[..dim]));
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

fn interpolate(dim: usize, k: u32, values: &[f64], x: &TorusPoint) -> f64 {
    let n = 1usize << k;
    let nf = n as f64;
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for i in 0..dim {
        // node j sits at (j + 1/2) / n
        let s = x.get(i) * nf - 0.5;
        let fl = s.floor();
        frac[i] = s - fl;
        base[i] = (fl as i64).rem_euclid(n as i64) as usize;
    }
    let mut out = 0.0;
    for mask in 0..1usize << dim {
        let mut w = 1.0;
        let mut idx = 0;
        for i in 0..dim {
            let up = mask >> i & 1 == 1;
            w *= if up { frac[i] } else { 1.0 - frac[i] };
            let j = if up { (base[i] + 1) % n } else { base[i] };
            idx = idx * n + j;
        }
        if w != 0.0 {
            out += w * values[idx];
        }
    }
    out
}
