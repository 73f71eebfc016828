//! Scalar building blocks of the deformed map: the slope profile `alpha`
//! along the weak direction and the radial bump `theta` on the remaining
//! coordinates.

use crate::error::{Error, Result};

/// Upper bound of `|g|` on `[lo, hi]` from 17 samples plus a Lipschitz slack.
pub(crate) fn interval_sup(g: impl Fn(f64) -> f64, lo: f64, hi: f64, lip: f64) -> f64 {
    const SAMPLES: usize = 16;
    if hi <= lo {
        return g(lo).abs();
    }
    let step = (hi - lo) / SAMPLES as f64;
    let mut best = 0.0f64;
    for i in 0..=SAMPLES {
        best = best.max(g(lo + step * i as f64).abs());
    }
    best + 0.5 * lip * step
}

#[inline]
fn smoothstep3(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[inline]
fn smoothstep3_int(t: f64) -> f64 {
    t * t * t - 0.5 * t.powi(4)
}

/// `t^2 (1-t)^2`, its antiderivative and first two derivatives.
#[inline]
fn hump(t: f64) -> f64 {
    let s = t * (1.0 - t);
    s * s
}

#[inline]
fn hump_int(t: f64) -> f64 {
    t.powi(3) / 3.0 - 0.5 * t.powi(4) + t.powi(5) / 5.0
}

/// The slope profile `alpha` on `(-2 eps, 2 eps)`.
///
/// `alpha` is odd, linear with slope `plateau_slope` on `[-eps/2, eps/2]`,
/// equal to `lambda1 * x` for `|x| >= eps`, and joined on the shoulders by a
/// quintic whose first and second derivatives match at both ends, so the
/// whole profile is `C^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationProfile {
    pub lambda1: f64,
    pub eps: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub plateau_slope: f64,
}

impl DeformationProfile {
    /// Default plateau slope: the midpoint of `((1+gamma1)^-1, 1)`.
    pub fn default_plateau_slope(gamma1: f64) -> f64 {
        0.5 * (1.0 / (1.0 + gamma1) + 1.0)
    }

    fn half(&self) -> f64 {
        0.5 * self.eps
    }

    /// Secant slope across a shoulder.
    fn shoulder_secant(&self) -> f64 {
        2.0 * self.lambda1 - self.plateau_slope
    }

    fn hump_weight(&self) -> f64 {
        30.0 * (self.shoulder_secant() - 0.5 * (self.plateau_slope + self.lambda1))
    }

    /// `alpha(x)`; outside `(-eps, eps)` this is `lambda1 * x`.
    pub fn alpha(&self, x: f64) -> f64 {
        let s = x.signum();
        let u = x.abs();
        let a0 = self.plateau_slope;
        let h = self.half();
        let v = if u >= self.eps {
            self.lambda1 * u
        } else if u <= h {
            a0 * u
        } else {
            let t = (u - h) / h;
            a0 * h
                + h * (a0 * t
                    + (self.lambda1 - a0) * smoothstep3_int(t)
                    + self.hump_weight() * hump_int(t))
        };
        s * v
    }

    pub fn alpha_prime(&self, x: f64) -> f64 {
        let u = x.abs();
        let a0 = self.plateau_slope;
        let h = self.half();
        if u >= self.eps {
            self.lambda1
        } else if u <= h {
            a0
        } else {
            let t = (u - h) / h;
            a0 + (self.lambda1 - a0) * smoothstep3(t) + self.hump_weight() * hump(t)
        }
    }

    pub fn alpha_second(&self, x: f64) -> f64 {
        let u = x.abs();
        let h = self.half();
        if u >= self.eps || u <= h {
            return 0.0;
        }
        let t = (u - h) / h;
        let dq = (self.lambda1 - self.plateau_slope) * 6.0 * t * (1.0 - t)
            + self.hump_weight() * (2.0 * t - 6.0 * t * t + 4.0 * t.powi(3));
        x.signum() * dq / h
    }

    /// Deviation `alpha(x) - lambda1 x`, supported on `(-eps, eps)`.
    #[inline]
    pub fn delta(&self, x: f64) -> f64 {
        if x.abs() >= self.eps {
            0.0
        } else {
            self.alpha(x) - self.lambda1 * x
        }
    }

    #[inline]
    pub fn delta_prime(&self, x: f64) -> f64 {
        self.alpha_prime(x) - self.lambda1
    }

    /// Global bound on `|alpha'''|`, used as Lipschitz slack for `alpha''`.
    fn third_bound(&self) -> f64 {
        let h = self.half();
        (6.0 * (self.lambda1 - self.plateau_slope).abs() + 2.0 * self.hump_weight().abs()) / (h * h)
    }

    fn second_bound(&self) -> f64 {
        let h = self.half();
        (1.5 * (self.lambda1 - self.plateau_slope).abs() + 0.2 * self.hump_weight().abs()) / h
    }

    /// Upper bounds of `(|delta|, |delta'|, |delta''|)` over `[lo, hi]`.
    pub fn delta_bounds(&self, lo: f64, hi: f64) -> (f64, f64, f64) {
        if lo >= self.eps || hi <= -self.eps {
            return (0.0, 0.0, 0.0);
        }
        let lo = lo.max(-self.eps);
        let hi = hi.min(self.eps);
        let d1 = self.lambda1 + 5.0;
        (
            interval_sup(|x| self.delta(x), lo, hi, d1),
            interval_sup(|x| self.delta_prime(x), lo, hi, self.second_bound()),
            interval_sup(|x| self.alpha_second(x), lo, hi, self.third_bound()),
        )
    }

    /// Largest value of `alpha'`, attained on the shoulders.
    pub fn max_slope(&self) -> f64 {
        (0..=1000)
            .map(|i| self.alpha_prime(self.half() * (1.0 + i as f64 / 1000.0)))
            .fold(f64::MIN, f64::max)
    }

    /// `sup |alpha(x) - lambda1 x|` over `(-eps, eps)`, by dense sampling of
    /// the shoulder (the plateau part is linear and peaks at `eps/2`).
    pub fn c0_distance(&self) -> f64 {
        (0..=4000)
            .map(|i| self.delta(self.eps * i as f64 / 4000.0).abs())
            .fold(0.0, f64::max)
    }

    /// Exact checks of the profile constraints that the construction relies on.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.lambda1 > 1.0) {
            return bad(format!("lambda1 = {} must exceed 1", self.lambda1));
        }
        if !(self.eps > 0.0 && 2.0 * self.eps < 0.5) {
            return bad(format!("eps = {} must lie in (0, 1/4)", self.eps));
        }
        let lower = 1.0 / (1.0 + self.gamma1);
        if !(self.plateau_slope > lower && self.plateau_slope < 1.0) {
            return bad(format!(
                "plateau slope {} outside ((1+gamma1)^-1, 1) = ({lower}, 1)",
                self.plateau_slope
            ));
        }
        let c0 = self.c0_distance();
        if !(c0 < self.gamma2) {
            return bad(format!("sup |alpha - lambda1 x| = {c0} is not below gamma2 = {}", self.gamma2));
        }
        Ok(())
    }
}

/// Radial bump `theta` on `R^{d-1}`: 1 on the ball of radius `r`, 0 outside
/// radius `2r`, quintic smoothstep in between.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFunction {
    pub r: f64,
}

impl BumpFunction {
    pub fn new(r: f64) -> Self {
        BumpFunction { r }
    }

    /// Exact maximal slope `15 / (8 r)` of the radial profile.
    pub fn c_bound(&self) -> f64 {
        15.0 / (8.0 * self.r)
    }

    fn t(&self, rho: f64) -> f64 {
        ((rho - self.r) / self.r).clamp(0.0, 1.0)
    }

    /// Radial profile value.
    pub fn value(&self, rho: f64) -> f64 {
        let t = self.t(rho);
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }

    /// Radial derivative `d theta / d rho`.
    pub fn radial_prime(&self, rho: f64) -> f64 {
        let t = self.t(rho);
        -30.0 * t * t * (1.0 - t) * (1.0 - t) / self.r
    }

    pub fn radial_second(&self, rho: f64) -> f64 {
        let t = self.t(rho);
        -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (self.r * self.r)
    }

    /// Gradient of `theta` at the displacement `u` (length `d-1`).
    pub fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let rho = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dp = self.radial_prime(rho);
        for (o, &ui) in out.iter_mut().zip(u) {
            *o = if dp == 0.0 { 0.0 } else { dp * ui / rho };
        }
    }

    pub fn at(&self, u: &[f64]) -> f64 {
        self.value(u.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// Bounds of `(|grad theta|, ||Hess theta||)` for radii in `[lo, hi]`.
    pub fn derivative_bounds(&self, lo: f64, hi: f64) -> (f64, f64) {
        if hi <= self.r || lo >= 2.0 * self.r {
            return (0.0, 0.0);
        }
        let lo = lo.max(self.r);
        let hi = hi.min(2.0 * self.r);
        let r2 = self.r * self.r;
        let g = interval_sup(|p| self.radial_prime(p), lo, hi, 5.8 / r2);
        let s = interval_sup(|p| self.radial_second(p), lo, hi, 60.0 / (r2 * self.r));
        (g, s + g / lo)
    }
}
