//! Pliss lemma, hyperbolic times and backward contraction at hyperbolic times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::noise::{skew_step, NoiseRealization};
use crate::orbit::OrbitTrace;
use crate::torus::{TorusPoint, MAX_DIM};

/// Slack added per term when comparing window sums, absorbing floating
/// accumulation error.
pub const WINDOW_TOL: f64 = 1e-10;

/// `zeta = (c2 - c1) / (A - c1)`.
pub fn pliss_zeta(cap_a: f64, c1: f64, c2: f64) -> f64 {
    (c2 - c1) / (cap_a - c1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlissProblem {
    pub a: Vec<f64>,
    pub cap_a: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PlissProblem {
    pub fn zeta(&self) -> f64 {
        pliss_zeta(self.cap_a, self.c1, self.c2)
    }

    /// Checks `A >= c2 > c1 > 0`, `a_j <= A` and `sum a_j >= c2 N`.
    pub fn check(&self) -> Result<()> {
        if !(self.cap_a >= self.c2 && self.c2 > self.c1 && self.c1 > 0.0) {
            return Err(Error::HypothesisUnmet(format!(
                "need A >= c2 > c1 > 0 (A = {}, c1 = {}, c2 = {})",
                self.cap_a, self.c1, self.c2
            )));
        }
        if let Some((j, v)) = self.a.iter().enumerate().find(|(_, &v)| v > self.cap_a) {
            return Err(Error::HypothesisUnmet(format!("a_{} = {v} exceeds A = {}", j + 1, self.cap_a)));
        }
        let s: f64 = self.a.iter().sum();
        let need = self.c2 * self.a.len() as f64;
        if s < need {
            return Err(Error::HypothesisUnmet(format!("sum a_j = {s} < c2 N = {need}")));
        }
        Ok(())
    }
}

/// Indices `i` (1-based) with `sum_{j=n+1}^{i} a_j >= c1 (i - n)` for every
/// `0 <= n < i`. With `S_i = sum_{j<=i} (a_j - c1)` this is `S_i >= S_n` for
/// all `n < i`, so one pass with a running maximum suffices.
pub fn window_times(a: &[f64], c1: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 0.0f64;
    let mut best = 0.0f64;
    for (k, &v) in a.iter().enumerate() {
        s += v - c1 + WINDOW_TOL;
        if s >= best {
            out.push(k + 1);
            best = s;
        }
    }
    out
}

/// The Pliss times of a problem meeting its hypotheses. The lemma's bound
/// `|times| > zeta N` is asserted.
pub fn pliss_times(prob: &PlissProblem) -> Result<Vec<usize>> {
    prob.check()?;
    let t = window_times(&prob.a, prob.c1);
    assert!(
        t.len() as f64 > prob.zeta() * prob.a.len() as f64 || prob.a.is_empty(),
        "pliss bound failed: {} times for N = {}, zeta = {}",
        t.len(),
        prob.a.len(),
        prob.zeta()
    );
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicTimeSet {
    pub times: Vec<usize>,
    pub exponent: f64,
    pub horizon: usize,
}

impl HyperbolicTimeSet {
    pub fn density(&self) -> f64 {
        if self.horizon == 0 {
            0.0
        } else {
            self.times.len() as f64 / self.horizon as f64
        }
    }

    pub fn contains(&self, n: usize) -> bool {
        self.times.binary_search(&n).is_ok()
    }
}

/// Times `n` with `sum_{j=n-k}^{n-1} log ||Df^-1|| <= -c k` for all `1 <= k <= n`.
pub fn hyperbolic_times(trace: &OrbitTrace, c: f64) -> HyperbolicTimeSet {
    hyperbolic_times_from_logs(&trace.log_inv_norms, c)
}

pub fn hyperbolic_times_from_logs(log_inv_norms: &[f64], c: f64) -> HyperbolicTimeSet {
    let a: Vec<f64> = log_inv_norms.iter().map(|v| -v).collect();
    HyperbolicTimeSet {
        times: window_times(&a, c),
        exponent: c,
        horizon: log_inv_norms.len(),
    }
}

/// Tail proxy for the density at infinity: `min_{N/2 <= n <= N} #{n_i <= n} / n`.
pub fn density_at_infinity(times: &HyperbolicTimeSet) -> f64 {
    let big_n = times.horizon;
    if big_n == 0 {
        return 0.0;
    }
    let lo = (big_n / 2).max(1);
    let mut count = times.times.partition_point(|&t| t < lo);
    let mut best = f64::INFINITY;
    let mut it = times.times[count..].iter().peekable();
    for n in lo..=big_n {
        while it.peek().is_some_and(|&&t| t <= n) {
            it.next();
            count += 1;
        }
        best = best.min(count as f64 / n as f64);
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub n_i: usize,
    pub exponent: f64,
    pub eps0: f64,
    /// Per probe, `max_j d_{n-j} / (e^{-cj/2} d_n)` over `1 <= j <= n_i`.
    pub probe_ratios: Vec<f64>,
    /// Distance at time `n_i` reached by each probe.
    pub probe_distances: Vec<f64>,
}

impl ContractionReport {
    pub fn max_ratio(&self) -> f64 {
        self.probe_ratios.iter().cloned().fold(0.0, f64::max)
    }

    pub fn violations(&self, tolerance: f64) -> usize {
        self.probe_ratios.iter().filter(|&&r| r > tolerance).count()
    }
}

fn orbit(real: &NoiseRealization, x: &TorusPoint, n: usize) -> Vec<TorusPoint> {
    let mut v = Vec::with_capacity(n + 1);
    let mut p = *x;
    v.push(p);
    for k in 0..n {
        p = skew_step(real, k, &p);
        v.push(p);
    }
    v
}

/// Shoots probes from `x` along random directions, bisects the start offset
/// until the time-`n_i` image is within `eps0` of `f^{n_i}(w) x` (and at least
/// `eps0 / 4` away), then compares the backward distances with `e^{-cj/2}`.
pub fn check_backward_contraction(
    real: &NoiseRealization,
    x: &TorusPoint,
    n_i: usize,
    c: f64,
    eps0: f64,
    probes: usize,
) -> Result<ContractionReport> {
    if n_i > real.horizon() {
        return Err(Error::HorizonExceeded {
            horizon: real.horizon(),
            requested: n_i,
        });
    }
    let d = x.dim();
    let base = orbit(real, x, n_i);
    let target = base[n_i];
    let mut rng = ChaCha8Rng::seed_from_u64(real.seed() ^ (n_i as u64).wrapping_mul(0x9e37_79b9));
    rng.set_stream(real.fiber());
    let mut report = ContractionReport {
        n_i,
        exponent: c,
        eps0,
        probe_ratios: Vec::with_capacity(probes),
        probe_distances: Vec::with_capacity(probes),
    };
    for _ in 0..probes {
        let mut v = [0.0f64; MAX_DIM];
        for vi in v.iter_mut().take(d) {
            *vi = rng.gen_range(-1.0..1.0);
        }
        let m = v[..d].iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        for vi in v.iter_mut().take(d) {
            *vi /= m;
        }
        let dist_at = |t: f64| {
            let z = x.translate(&v[..d], t);
            orbit(real, &z, n_i)[n_i].dist(&target)
        };
        // shrink until inside, then bisect towards the band [eps0/4, eps0]
        let mut hi = eps0;
        let mut lo = 0.0;
        let mut t = hi;
        let mut found = None;
        for _ in 0..200 {
            let dn = dist_at(t);
            if dn <= eps0 && dn >= 0.25 * eps0 {
                found = Some(t);
                break;
            }
            if dn > eps0 {
                hi = t;
            } else {
                lo = t;
            }
            t = if lo == 0.0 { 0.5 * hi } else { 0.5 * (lo + hi) };
            if t <= 0.0 || hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        let t = match found.or(if lo > 0.0 { Some(lo) } else { None }) {
            Some(t) => t,
            None => return Err(Error::ProbeNotFound { eps0, time: n_i }),
        };
        let z = x.translate(&v[..d], t);
        let zo = orbit(real, &z, n_i);
        let dn = zo[n_i].dist(&target);
        if !(dn > 0.0 && dn <= eps0) {
            return Err(Error::ProbeNotFound { eps0, time: n_i });
        }
        let mut worst = 0.0f64;
        for j in 1..=n_i {
            let dj = zo[n_i - j].dist(&base[n_i - j]);
            worst = worst.max(dj / ((-0.5 * c * j as f64).exp() * dn));
        }
        report.probe_ratios.push(worst);
        report.probe_distances.push(dn);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{MapParams, MapSpec};
    use crate::noise::{realize_noise, NoiseModel};
    use crate::orbit::iterate;

    #[test]
    fn constant_sequence_all_times() {
        let p = PlissProblem { a: vec![1.5; 9], cap_a: 2.0, c1: 1.0, c2: 1.5 };
        assert_eq!(pliss_times(&p).unwrap(), (1..=9).collect::<Vec<_>>());
    }

    #[test]
    fn four_element_example() {
        let p = PlissProblem { a: vec![2.0, 2.0, 0.0, 2.0], cap_a: 2.0, c1: 1.0, c2: 1.5 };
        assert_eq!(pliss_times(&p).unwrap(), vec![1, 2, 4]);
        assert_eq!(p.zeta(), 0.5);
    }

    #[test]
    fn hypotheses_enforced() {
        let p = PlissProblem { a: vec![0.0, 0.0], cap_a: 2.0, c1: 1.0, c2: 1.5 };
        assert!(matches!(pliss_times(&p), Err(Error::HypothesisUnmet(_))));
        let p = PlissProblem { a: vec![3.0], cap_a: 2.0, c1: 1.0, c2: 1.5 };
        assert!(pliss_times(&p).is_err());
        assert_eq!(window_times(&[3.0], 1.0), vec![1]);
    }

    #[test]
    fn density_edges() {
        let all = HyperbolicTimeSet { times: (1..=200).collect(), exponent: 0.1, horizon: 200 };
        assert_eq!(density_at_infinity(&all), 1.0);
        let none = HyperbolicTimeSet { times: vec![], exponent: 0.1, horizon: 200 };
        assert_eq!(density_at_infinity(&none), 0.0);
    }

    #[test]
    fn linear_backward_contraction() {
        let spec = MapSpec::new(MapParams::linear(&[2.0, 4.0])).unwrap();
        let r = realize_noise(&NoiseModel::deterministic(spec), 0, 20).unwrap();
        let x = TorusPoint::new(&[0.31, 0.62]);
        let t = iterate(&r, &x, 20).unwrap();
        let c = (2f64).ln();
        assert_eq!(hyperbolic_times(&t, c).times.len(), 20);
        let rep = check_backward_contraction(&r, &x, 12, c, 1e-3, 8).unwrap();
        assert_eq!(rep.violations(1.05), 0, "{rep:?}");
        // backward distances halve at least, so the ratio is at most 2^{-j} e^{cj/2} <= 1
        assert!(rep.max_ratio() <= 1.0 + 1e-6);
    }
}
