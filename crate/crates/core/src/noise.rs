//! Concrete noise space: i.i.d. sequences of perturbed map specs, indexed by
//! a fiber number and read through a counter-based generator so any step of
//! any fiber can be regenerated on its own.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::map::MapSpec;
use crate::torus::{wrap_unit, TorusPoint, MAX_DIM};

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationLaw {
    /// Deterministic system: every step uses the base spec.
    None,
    /// Plateau slope and window center each moved by an independent
    /// `Uniform(-magnitude, magnitude)` draw at every step.
    IidUniform { magnitude: f64 },
    /// One of finitely many specs per step, drawn with the given weights.
    FiniteSet { specs: Vec<MapSpec>, probs: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct NoiseModel {
    base: MapSpec,
    law: PerturbationLaw,
    seed: u64,
    refresh: bool,
}

impl NoiseModel {
    pub fn new(base: MapSpec, law: PerturbationLaw, seed: u64) -> Result<Self> {
        match &law {
            PerturbationLaw::None => {}
            PerturbationLaw::IidUniform { magnitude } => {
                if !(*magnitude >= 0.0 && magnitude.is_finite()) {
                    return Err(Error::InvalidSpec(format!("noise magnitude {magnitude} must be >= 0")));
                }
            }
            PerturbationLaw::FiniteSet { specs, probs } => {
                if specs.is_empty() || specs.len() != probs.len() {
                    return Err(Error::InvalidSpec("finite-set law needs one weight per spec".into()));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSpec("finite-set weights must be >= 0 and sum to 1".into()));
                }
                if specs.iter().any(|s| s.dim() != base.dim()) {
                    return Err(Error::InvalidSpec("finite-set specs must share the base dimension".into()));
                }
            }
        }
        Ok(NoiseModel {
            base,
            law,
            seed,
            refresh: true,
        })
    }

    pub fn deterministic(base: MapSpec) -> Self {
        NoiseModel {
            base,
            law: PerturbationLaw::None,
            seed: 0,
            refresh: true,
        }
    }

    /// Turns the low-bit precision refresh on or off (see [`refresh_jitter`]).
    pub fn with_refresh(mut self, on: bool) -> Self {
        self.refresh = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn base(&self) -> &MapSpec {
        &self.base
    }

    pub fn law(&self) -> &PerturbationLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn refresh(&self) -> bool {
        self.refresh
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }
}

#[derive(Debug, Clone)]
enum Steps {
    Constant(Arc<MapSpec>),
    Pool { pool: Arc<Vec<MapSpec>>, idx: Arc<Vec<u32>> },
    Owned(Arc<Vec<MapSpec>>),
}

/// The sequence `f(w), f(Tw), ..., f(T^{horizon-1} w)` for one fiber.
/// Cloning is cheap; shifting shares the storage.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    seed: u64,
    fiber: u64,
    offset: usize,
    len: usize,
    refresh: bool,
    steps: Steps,
}

impl NoiseRealization {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fiber(&self) -> u64 {
        self.fiber
    }

    /// Number of shifts applied since realization.
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Number of steps available from the current offset.
    pub fn horizon(&self) -> usize {
        self.len - self.offset
    }

    pub fn refresh(&self) -> bool {
        self.refresh
    }

    pub fn dim(&self) -> usize {
        self.spec(0).dim()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.steps, Steps::Constant(_))
    }

    /// `f(T^k w)`, relative to the current offset.
    pub fn spec(&self, k: usize) -> &MapSpec {
        let g = self.offset + k;
        match &self.steps {
            Steps::Constant(s) => s,
            Steps::Pool { pool, idx } => &pool[idx[g.min(idx.len() - 1)] as usize],
            Steps::Owned(v) => &v[g.min(v.len() - 1)],
        }
    }

    /// Left shift by `j`: the realization of `T^j w`.
    pub fn shift(&self, j: usize) -> Result<Self> {
        if j > self.horizon() {
            return Err(Error::HorizonExceeded {
                horizon: self.horizon(),
                requested: j,
            });
        }
        let mut s = self.clone();
        s.offset += j;
        Ok(s)
    }

    /// Same fiber with the refresh toggled.
    pub fn with_refresh(mut self, on: bool) -> Self {
        self.refresh = on;
        self
    }
}

/// Generator positioned at step `step` of fiber `fiber`. Each step owns 8
/// 64-bit words of the stream.
fn step_rng(seed: u64, fiber: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fiber);
    rng.set_word_pos(step as u128 * 16);
    rng
}

pub fn realize_noise(model: &NoiseModel, fiber_index: u64, horizon: usize) -> Result<NoiseRealization> {
    if horizon == 0 {
        return Err(Error::InvalidSpec("horizon must be >= 1".into()));
    }
    let steps = match &model.law {
        PerturbationLaw::None => Steps::Constant(Arc::new(model.base.clone())),
        PerturbationLaw::FiniteSet { specs, probs } => {
            let idx = (0..horizon)
                .map(|k| {
                    let u: f64 = step_rng(model.seed, fiber_index, k).gen();
                    let mut acc = 0.0;
                    let mut pick = probs.len() - 1;
                    for (i, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    pick as u32
                })
                .collect();
            Steps::Pool {
                pool: Arc::new(specs.clone()),
                idx: Arc::new(idx),
            }
        }
        PerturbationLaw::IidUniform { magnitude } => {
            if *magnitude == 0.0 {
                Steps::Constant(Arc::new(model.base.clone()))
            } else {
                let v = (0..horizon)
                    .map(|k| perturbed_spec(model, *magnitude, fiber_index, k))
                    .collect::<Result<Vec<_>>>()?;
                Steps::Owned(Arc::new(v))
            }
        }
    };
    Ok(NoiseRealization {
        seed: model.seed,
        fiber: fiber_index,
        offset: 0,
        len: horizon,
        refresh: model.refresh,
        steps,
    })
}

/// Draws the perturbed spec of one step and checks it stays in the class:
/// the construction constraints still hold and the plateau keeps
/// `||Df^-1|| <= 1 + delta0`.
fn perturbed_spec(model: &NoiseModel, eta: f64, fiber: u64, step: usize) -> Result<MapSpec> {
    let base = &model.base;
    let d = base.dim();
    let mut rng = step_rng(model.seed, fiber, step);
    let out = |reason: String| Error::PerturbationOutOfClass { fiber, step, reason };
    let mut params = base.params().clone();
    if let Some(prof) = base.profile() {
        let slope = prof.plateau_slope + eta * (2.0 * rng.gen::<f64>() - 1.0);
        if slope * (1.0 + base.delta0()) < 1.0 {
            return Err(out(format!("plateau slope {slope} breaks ||Df^-1|| <= 1+delta0")));
        }
        params.plateau_slope = Some(slope);
    }
    let c = base.window_center();
    params.window_center = (0..d)
        .map(|i| wrap_unit(c.get(i) + eta * (2.0 * rng.gen::<f64>() - 1.0)))
        .collect();
    params.fixed_point_mode = false;
    MapSpec::new(params).map_err(|e| out(e.to_string()))
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Low-bit refresh added to coordinate `i` after a step.
///
/// Multiplying by an integer `lambda` shifts `log2 lambda` bits out of a
/// double, so an unrefreshed orbit of `2x mod 1` reaches 0 after about 53
/// steps. The refresh is uniform in `[0, lambda * 2^-53)`, a deterministic
/// hash of (seed, fiber, global step, axis, bits of the image), so it never
/// depends on evaluation order.
#[inline]
pub fn refresh_jitter(seed: u64, fiber: u64, step: usize, axis: usize, image: f64, lambda: f64) -> f64 {
    let mut h = splitmix64(seed ^ 0x6a09_e667_f3bc_c909);
    h = splitmix64(h ^ fiber);
    h = splitmix64(h ^ step as u64);
    h = splitmix64(h ^ axis as u64 ^ image.to_bits().rotate_left(17));
    let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u * lambda * f64::EPSILON * 0.5
}

/// `f(T^k w) x` for the realization's current offset.
pub fn skew_step(real: &NoiseRealization, k: usize, x: &TorusPoint) -> TorusPoint {
    let spec = real.spec(k);
    let y = spec.eval(x);
    if !real.refresh {
        return y;
    }
    let d = y.dim();
    let mut c = [0.0; MAX_DIM];
    let step = real.offset + k;
    for (i, ci) in c.iter_mut().enumerate().take(d) {
        let v = y.get(i);
        *ci = wrap_unit(v + refresh_jitter(real.seed, real.fiber, step, i, v, spec.lambdas()[i]));
    }
    TorusPoint::new(&c[..d])
}
