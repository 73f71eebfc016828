//! The deformed torus endomorphism: a linear expanding map `x -> diag(lambda) x`
//! whose weakest direction is slowed down inside a window around `p0`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::profile::{BumpFunction, DeformationProfile};
use crate::torus::{wrap_centered, wrap_unit, TorusPoint, MAX_DIM};

/// Raw, unvalidated map parameters as they appear in a `[map]` config section.
#[derive(Debug, Clone, PartialEq)]
pub struct MapParams {
    pub dim: usize,
    pub lambdas: Vec<f64>,
    /// `false` selects the purely linear test mode.
    pub deformed: bool,
    pub eps: f64,
    pub r: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub window_center: Vec<f64>,
    pub fixed_point_mode: bool,
    pub plateau_slope: Option<f64>,
    pub beta: Option<f64>,
}

impl MapParams {
    /// `d = 2`, `lambda = (2, 4)`, `gamma1 = gamma2 = 0.05`, `gamma3 = 0.02`,
    /// `delta1 = 0.1`, `delta0 = gamma1`.
    pub fn reference() -> Self {
        MapParams {
            dim: 2,
            lambdas: vec![2.0, 4.0],
            deformed: true,
            eps: 0.08,
            r: 0.08,
            gamma1: 0.05,
            gamma2: 0.05,
            gamma3: 0.02,
            delta0: 0.05,
            delta1: 0.1,
            window_center: vec![0.0, 0.0],
            fixed_point_mode: true,
            plateau_slope: None,
            beta: None,
        }
    }

    /// Undeformed `x -> diag(lambdas) x`.
    pub fn linear(lambdas: &[f64]) -> Self {
        MapParams {
            dim: lambdas.len(),
            lambdas: lambdas.to_vec(),
            deformed: false,
            window_center: vec![0.0; lambdas.len()],
            ..MapParams::reference()
        }
    }

    /// Circle doubling map `x -> 2x mod 1`.
    pub fn doubling() -> Self {
        MapParams::linear(&[2.0])
    }
}

/// Analytic jacobian of the map. Only the first row can be non-diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    dim: usize,
    row0: [f64; MAX_DIM],
    diag: [f64; MAX_DIM],
}

impl Jacobian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == 0 {
            self.row0[j]
        } else if i == j {
            self.diag[i]
        } else {
            0.0
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j))
    }

    /// `row0[0] * prod(diag[1..])`; exact for this triangular structure.
    pub fn det(&self) -> f64 {
        self.row0[0] * self.diag[1..self.dim].iter().product::<f64>()
    }

    /// `(sigma_min, sigma_max)`.
    pub fn singular_extremes(&self) -> (f64, f64) {
        match self.dim {
            1 => (self.row0[0].abs(), self.row0[0].abs()),
            2 => {
                let (a, b, c) = (self.row0[0], self.row0[1], self.diag[1]);
                let t = a * a + b * b + c * c;
                let det = (a * c).abs();
                let disc = (t * t - 4.0 * det * det).max(0.0).sqrt();
                let smax = (0.5 * (t + disc)).sqrt();
                (det / smax, smax)
            }
            _ => {
                let sv = self.to_matrix().singular_values();
                let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
                let smax = sv.iter().cloned().fold(0.0, f64::max);
                (smin, smax)
            }
        }
    }
}

/// Box geometry: per-axis cell counts, centered so that `p0` is a box center.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovBoxes {
    pub per_axis: Vec<usize>,
    pub exceptional: Vec<bool>,
}

impl MarkovBoxes {
    pub fn count(&self) -> usize {
        self.exceptional.len()
    }

    /// Number `q` of exceptional boxes.
    pub fn q(&self) -> usize {
        self.exceptional.iter().filter(|&&e| e).count()
    }

    pub fn p(&self) -> usize {
        self.count() - self.q()
    }
}

/// Per-cell enclosure of the key pointwise quantities.
#[derive(Debug, Clone, Copy)]
pub struct CellBounds {
    pub sigma_min: (f64, f64),
    pub det: (f64, f64),
    pub sigma_max_hi: f64,
}

#[derive(Debug, Clone)]
pub struct MapSpec {
    params: MapParams,
    lambdas: [f64; MAX_DIM],
    profile: Option<DeformationProfile>,
    bump: Option<BumpFunction>,
    center: TorusPoint,
    sigma1: f64,
    beta: f64,
    boxes: MarkovBoxes,
}

impl PartialEq for MapSpec {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

impl MapSpec {
    pub fn new(params: MapParams) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let d = params.dim;
        if !(1..=MAX_DIM).contains(&d) {
            return bad(format!("dim = {d} outside 1..={MAX_DIM}"));
        }
        if params.lambdas.len() != d {
            return bad(format!("lambdas has {} entries, dim = {d}", params.lambdas.len()));
        }
        if params.window_center.len() != d {
            return bad(format!("window_center has {} entries, dim = {d}", params.window_center.len()));
        }
        for &l in &params.lambdas {
            if !(l > 1.0) || !is_integer(l) {
                return bad(format!("lambdas must be integers > 1 (got {l})"));
            }
        }
        let strict = params.deformed;
        for w in params.lambdas.windows(2) {
            if w[1] < w[0] || (strict && w[1] == w[0]) {
                return bad("lambdas must be sorted increasingly".to_string());
            }
        }
        if !(params.delta0 >= 0.0 && params.delta1 > 0.0) {
            return bad("need delta0 >= 0 and delta1 > 0".to_string());
        }
        if params.gamma1 <= 0.0 || params.gamma2 <= 0.0 || params.gamma3 <= 0.0 {
            return bad("gamma1, gamma2, gamma3 must be positive".to_string());
        }
        let mut lambdas = [1.0; MAX_DIM];
        lambdas[..d].copy_from_slice(&params.lambdas);
        let center = TorusPoint::new(&params.window_center);
        if params.fixed_point_mode {
            for i in 0..d {
                let c = center.get(i);
                if wrap_centered(lambdas[i] * c - c).abs() > 1e-12 {
                    return bad(format!("window_center is not fixed by the linear map (axis {i})"));
                }
            }
        }

        let tail: f64 = lambdas[1..d].iter().product();
        let (profile, bump) = if params.deformed {
            if d < 2 {
                return bad("the deformed map needs dim >= 2".to_string());
            }
            let profile = DeformationProfile {
                lambda1: lambdas[0],
                eps: params.eps,
                gamma1: params.gamma1,
                gamma2: params.gamma2,
                gamma3: params.gamma3,
                plateau_slope: params
                    .plateau_slope
                    .unwrap_or_else(|| DeformationProfile::default_plateau_slope(params.gamma1)),
            };
            profile.validate()?;
            if !(params.r > 0.0 && 3.0 * params.r < 0.5) {
                return bad(format!("r = {} must lie in (0, 1/6)", params.r));
            }
            let bump = BumpFunction::new(params.r);
            let c = bump.c_bound();
            if !(lambdas[1] - params.gamma2 * c > lambdas[0] + params.gamma2) {
                return bad(format!(
                    "lambda2 - gamma2*C = {} does not exceed lambda1 + gamma2 = {}",
                    lambdas[1] - params.gamma2 * c,
                    lambdas[0] + params.gamma2
                ));
            }
            (Some(profile), Some(bump))
        } else {
            (None, None)
        };

        let sigma1 = if params.deformed {
            tail / (1.0 + params.gamma1)
        } else {
            lambdas[..d].iter().product()
        };
        let beta = params.beta.unwrap_or(params.gamma3 * tail);

        let mut spec = MapSpec {
            params,
            lambdas,
            profile,
            bump,
            center,
            sigma1,
            beta,
            boxes: MarkovBoxes {
                per_axis: vec![],
                exceptional: vec![],
            },
        };
        spec.boxes = spec.build_boxes();
        Ok(spec)
    }

    pub fn reference() -> Self {
        MapSpec::new(MapParams::reference()).expect("reference spec is valid")
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas[..self.dim()]
    }

    pub fn is_deformed(&self) -> bool {
        self.profile.is_some()
    }

    pub fn profile(&self) -> Option<&DeformationProfile> {
        self.profile.as_ref()
    }

    pub fn bump(&self) -> Option<&BumpFunction> {
        self.bump.as_ref()
    }

    pub fn window_center(&self) -> TorusPoint {
        self.center
    }

    pub fn delta0(&self) -> f64 {
        self.params.delta0
    }

    pub fn delta1(&self) -> f64 {
        self.params.delta1
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn boxes(&self) -> &MarkovBoxes {
        &self.boxes
    }

    /// Threshold `(1+delta1)^-1` defining the non-expanding region `V`.
    pub fn v_threshold(&self) -> f64 {
        1.0 / (1.0 + self.params.delta1)
    }

    /// Window coordinates `u = x - p0` wrapped to `[-1/2, 1/2)`.
    #[inline]
    pub fn local(&self, x: &TorusPoint) -> [f64; MAX_DIM] {
        self.center.displacement_to(x)
    }

    fn radial(u: &[f64]) -> f64 {
        u.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Membership in `W = (-2 eps, 2 eps) x B_{3r}(0)` around `p0`.
    pub fn in_window(&self, x: &TorusPoint) -> bool {
        match &self.profile {
            None => false,
            Some(p) => {
                let u = self.local(x);
                u[0].abs() < 2.0 * p.eps && Self::radial(&u[1..self.dim()]) < 3.0 * self.params.r
            }
        }
    }

    pub fn eval(&self, x: &TorusPoint) -> TorusPoint {
        let d = self.dim();
        let mut y = [0.0; MAX_DIM];
        for i in 0..d {
            y[i] = self.lambdas[i] * x.get(i);
        }
        if let (Some(p), Some(b)) = (&self.profile, &self.bump) {
            let u = self.local(x);
            if u[0].abs() < p.eps {
                let th = b.at(&u[1..d]);
                if th != 0.0 {
                    y[0] += th * p.delta(u[0]);
                }
            }
        }
        for v in y.iter_mut().take(d) {
            *v = wrap_unit(*v);
        }
        TorusPoint::new(&y[..d])
    }

    pub fn jacobian(&self, x: &TorusPoint) -> Jacobian {
        let d = self.dim();
        let mut row0 = [0.0; MAX_DIM];
        let mut diag = [0.0; MAX_DIM];
        diag[..d].copy_from_slice(&self.lambdas[..d]);
        row0[0] = self.lambdas[0];
        if let (Some(p), Some(b)) = (&self.profile, &self.bump) {
            let u = self.local(x);
            if u[0].abs() < p.eps {
                let th = b.at(&u[1..d]);
                row0[0] = p.alpha_prime(u[0]) * th + (1.0 - th) * self.lambdas[0];
                let mut grad = [0.0; MAX_DIM];
                b.gradient(&u[1..d], &mut grad[..d - 1]);
                let dl = p.delta(u[0]);
                for i in 1..d {
                    row0[i] = dl * grad[i - 1];
                }
            }
        }
        diag[0] = row0[0];
        Jacobian { dim: d, row0, diag }
    }

    pub fn det_jacobian(&self, x: &TorusPoint) -> f64 {
        self.jacobian(x).det()
    }

    /// Operator norm `||Df(x)^-1||`, i.e. the reciprocal smallest singular value.
    pub fn inv_norm(&self, x: &TorusPoint) -> Result<f64> {
        let (smin, _) = self.jacobian(x).singular_extremes();
        if smin < 1e-12 {
            return Err(Error::SingularJacobian {
                point: *x,
                sigma_min: smin,
            });
        }
        Ok(1.0 / smin)
    }

    fn build_boxes(&self) -> MarkovBoxes {
        let d = self.dim();
        let per_axis: Vec<usize> = self.lambdas[..d]
            .iter()
            .map(|&l| (l.ceil() as usize).next_power_of_two())
            .collect();
        let total: usize = per_axis.iter().product();
        let mut exceptional = vec![false; total];
        if let Some(p) = &self.profile {
            for (idx, e) in exceptional.iter_mut().enumerate() {
                let k = self.unflatten(idx, &per_axis);
                // closest approach of the box to p0 along each axis
                let mut near = [0.0; MAX_DIM];
                for i in 0..d {
                    let n = per_axis[i] as f64;
                    let c = wrap_centered(k[i] as f64 / n);
                    near[i] = (c.abs() - 0.5 / n).max(0.0);
                }
                *e = near[0] < 2.0 * p.eps && Self::radial(&near[1..d]) < 3.0 * self.params.r;
            }
        }
        MarkovBoxes {
            per_axis,
            exceptional,
        }
    }

    fn unflatten(&self, mut idx: usize, per_axis: &[usize]) -> [usize; MAX_DIM] {
        let mut k = [0; MAX_DIM];
        for i in (0..per_axis.len()).rev() {
            k[i] = idx % per_axis[i];
            idx /= per_axis[i];
        }
        k
    }

    /// Index of the Markov box containing `x`.
    pub fn box_index(&self, x: &TorusPoint) -> usize {
        let u = self.local(x);
        let mut idx = 0;
        for (i, &n) in self.boxes.per_axis.iter().enumerate() {
            let nf = n as f64;
            let k = (wrap_unit(u[i] + 0.5 / nf) * nf).floor() as usize;
            idx = idx * n + k.min(n - 1);
        }
        idx
    }

    pub fn in_exceptional(&self, x: &TorusPoint) -> bool {
        self.boxes.exceptional[self.box_index(x)]
    }

    /// Enclosure of `sigma_min`, `det` and an upper bound of `sigma_max` on the
    /// cube of half-width `half` around `x`, from analytic second-derivative
    /// bounds of the jacobian entries.
    pub fn cell_bounds(&self, x: &TorusPoint, half: f64) -> CellBounds {
        let d = self.dim();
        let jac = self.jacobian(x);
        let (smin, smax) = jac.singular_extremes();
        let det = jac.det();
        let (lip_j, lip_a) = match (&self.profile, &self.bump) {
            (Some(p), Some(b)) => {
                let u = self.local(x);
                let (d0, d1, d2) = p.delta_bounds(u[0] - half, u[0] + half);
                let mut lo2 = 0.0;
                let mut hi2 = 0.0;
                for &ui in &u[1..d] {
                    let m = (ui.abs() - half).max(0.0);
                    lo2 += m * m;
                    hi2 += (ui.abs() + half).powi(2);
                }
                let (g, h) = b.derivative_bounds(lo2.sqrt(), hi2.sqrt());
                // theta is radially decreasing, so its sup sits at the inner radius
                let d2 = d2 * b.value(lo2.sqrt());
                let grad_a = (d2 * d2 + (d1 * g).powi(2)).sqrt();
                let lip = (d2 * d2 + 2.0 * (d1 * g).powi(2) + (d - 1) as f64 * (d0 * h).powi(2)).sqrt();
                (lip, grad_a)
            }
            _ => (0.0, 0.0),
        };
        let rad = half * (d as f64).sqrt();
        let tail: f64 = self.lambdas[1..d].iter().product();
        let ds = lip_j * rad;
        let dd = lip_a * tail * rad;
        CellBounds {
            sigma_min: ((smin - ds).max(0.0), smin + ds),
            det: (det - dd, det + dd),
            sigma_max_hi: smax + ds,
        }
    }

    /// Copy with a different plateau slope (used by the noise model).
    pub fn with_plateau_slope(&self, slope: f64) -> Result<MapSpec> {
        let mut p = self.params.clone();
        p.plateau_slope = Some(slope);
        MapSpec::new(p)
    }

    /// Copy with the window moved; the moved center need not be a fixed point.
    pub fn with_window_center(&self, center: &[f64]) -> Result<MapSpec> {
        let mut p = self.params.clone();
        p.window_center = center.to_vec();
        p.fixed_point_mode = false;
        MapSpec::new(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_outside_window() {
        let spec = MapSpec::reference();
        let x = TorusPoint::new(&[0.4, 0.55]);
        assert!(!spec.in_window(&x));
        let y = spec.eval(&x);
        assert!((y.get(0) - 0.8).abs() < 1e-15);
        assert!((y.get(1) - 0.2).abs() < 1e-14);
        let j = spec.jacobian(&x);
        assert_eq!(j.to_matrix(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]));
        assert_eq!(spec.det_jacobian(&x), 8.0);
        assert_eq!(spec.inv_norm(&x).unwrap(), 0.5);
    }

    #[test]
    fn fixed_point_is_not_repelling() {
        let spec = MapSpec::reference();
        let p0 = spec.window_center();
        assert_eq!(spec.eval(&p0), p0);
        assert!(spec.inv_norm(&p0).unwrap() > 1.0);
    }

    #[test]
    fn plateau_jacobian_is_diagonal() {
        let spec = MapSpec::reference();
        let x = TorusPoint::new(&[0.01, 0.03]);
        let j = spec.jacobian(&x);
        let a = spec.profile().unwrap().alpha_prime(0.01);
        assert_eq!(j.entry(0, 0), a);
        assert_eq!(j.entry(0, 1), 0.0);
        assert_eq!(j.entry(1, 1), 4.0);
    }

    #[test]
    fn reference_boxes() {
        let spec = MapSpec::reference();
        assert_eq!(spec.boxes().per_axis, vec![2, 4]);
        assert_eq!(spec.boxes().q(), 3);
        assert!(spec.sigma1() > spec.boxes().q() as f64);
        assert!(spec.in_exceptional(&spec.window_center()));
        assert!(!spec.in_exceptional(&TorusPoint::new(&[0.5, 0.5])));
    }

    #[test]
    fn rejects_unsorted_lambdas() {
        let mut p = MapParams::reference();
        p.lambdas = vec![4.0, 2.0];
        assert!(matches!(MapSpec::new(p), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn rejects_non_fixed_center_in_fixed_mode() {
        let mut p = MapParams::reference();
        p.window_center = vec![0.1, 0.0];
        assert!(MapSpec::new(p).is_err());
        let mut p = MapParams::reference();
        p.window_center = vec![0.0, 1.0 / 3.0];
        assert!(MapSpec::new(p).is_ok());
    }

    #[test]
    fn equal_lambdas_allowed_in_linear_mode() {
        assert!(MapSpec::new(MapParams::linear(&[3.0, 3.0])).is_ok());
    }

    #[test]
    fn diagonal_inverse_norm() {
        let spec = MapSpec::new(MapParams::linear(&[2.0, 3.0])).unwrap();
        assert_eq!(spec.inv_norm(&TorusPoint::new(&[0.2, 0.7])).unwrap(), 0.5);
    }
}
