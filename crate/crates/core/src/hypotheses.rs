//! Grid verification of the expansion hypotheses and derivation of the
//! constants (`c`, `rho0`, `eps0`, Pliss density) that the estimators use.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::MapSpec;
use crate::pliss::pliss_zeta;
use crate::torus::{TorusPoint, MAX_DIM};

pub const MIN_GRID_RESOLUTION: usize = 64;

/// Determinant and norm statistics of the non-expanding region `V` and of `W^c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    /// inf / sup of `|det Df|` on `V` (NaN when `V` is empty).
    pub m1: f64,
    pub m2: f64,
    /// inf / sup of `|det Df|` on `W^c`.
    pub big_m1: f64,
    pub big_m2: f64,
    /// inf / sup of `||Df||` on `V` and on `W^c`.
    pub v_norm: (f64, f64),
    pub wc_norm: (f64, f64),
    /// Flat grid indices of cells that may meet `V`, and of cells inside `W`.
    pub v_cells: Vec<usize>,
    pub w_cells: Vec<usize>,
}

impl RegionStats {
    pub fn v_empty(&self) -> bool {
        self.v_cells.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: &'static str,
    pub pass: bool,
    pub witness: Vec<(&'static str, f64)>,
    pub violation: Option<Error>,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub resolution: usize,
    pub stats: RegionStats,
    pub verdicts: Vec<Verdict>,
    /// Upper bound of `-log ||Df^-1||` over the torus (the Pliss cap `A`).
    pub a_sup: f64,
    /// `log sup ||Df||`, reported as the C^1 part of the `A0` bound.
    pub a0_bound: f64,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn into_result(self) -> Result<HypothesisReport> {
        match self.verdicts.iter().find_map(|v| v.violation.clone()) {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    /// Human-readable report.
    pub fn to_text(&self) -> String {
        let s = &self.stats;
        let mut out = String::new();
        let _ = writeln!(out, "hypothesis check on a {}-per-axis grid", self.resolution);
        let _ = writeln!(out, "  V cells: {}  W cells: {}", s.v_cells.len(), s.w_cells.len());
        let _ = writeln!(out, "  m1 = {:.6}  m2 = {:.6}  M1 = {:.6}  M2 = {:.6}", s.m1, s.m2, s.big_m1, s.big_m2);
        let _ = writeln!(out, "  ||Df|| on V: [{:.6}, {:.6}]  on W^c: [{:.6}, {:.6}]", s.v_norm.0, s.v_norm.1, s.wc_norm.0, s.wc_norm.1);
        let _ = writeln!(out, "  A = {:.6}  A0 >= {:.6}", self.a_sup, self.a0_bound);
        for v in &self.verdicts {
            let _ = writeln!(out, "  {}: {}", v.name, if v.pass { "pass" } else { "FAIL" });
            for (k, x) in &v.witness {
                let _ = writeln!(out, "    {k} = {x:.9}");
            }
            if let Some(e) = &v.violation {
                let _ = writeln!(out, "    {e}");
            }
        }
        out
    }

    /// One line per hypothesis: `name,verdict,key=value;key=value`.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let w: Vec<String> = v.witness.iter().map(|(k, x)| format!("{k}={x:.12e}")).collect();
            let _ = writeln!(out, "{},{},{}", v.name, if v.pass { "pass" } else { "fail" }, w.join(";"));
        }
        out
    }
}

/// Maximal number of bisections of a grid cell whose enclosure is inconclusive.
pub const MAX_REFINE_DEPTH: u32 = 6;

#[derive(Debug, Clone, Copy)]
struct CellInfo {
    /// min over leaves of the sigma_min lower bound, and where it occurred.
    smin_lo: f64,
    smin_at: TorusPoint,
    /// Upper bound of sigma_min (for the Pliss cap).
    smin_hi: f64,
    det_lo: f64,
    det_at: TorusPoint,
    sigma_max_hi: f64,
    /// Possibly meets V; then the det and norm ranges over such leaves.
    in_v: bool,
    v_det: (f64, f64),
    v_norm: (f64, f64),
    det: (f64, f64),
    norm: (f64, f64),
    inside_w: bool,
    meets_wc: bool,
    meets_expanding: bool,
    inside_exceptional: bool,
}

fn cell_center(idx: usize, n: usize, d: usize) -> TorusPoint {
    let mut c = [0.0; MAX_DIM];
    let mut rest = idx;
    for i in (0..d).rev() {
        c[i] = ((rest % n) as f64 + 0.5) / n as f64;
        rest /= n;
    }
    TorusPoint::new(&c[..d])
}

fn offsets(center: &TorusPoint, step: f64) -> impl Iterator<Item = TorusPoint> + '_ {
    let d = center.dim();
    (0..1usize << d).map(move |mask| {
        let mut c = [0.0; MAX_DIM];
        for i in 0..d {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            c[i] = center.get(i) + s * step;
        }
        TorusPoint::new(&c[..d])
    })
}

struct Thresholds {
    never_contracting: f64,
    v_sigma: f64,
    sigma1: f64,
}

fn refine(spec: &MapSpec, th: &Thresholds, x: &TorusPoint, half: f64, depth: u32, info: &mut CellInfo) {
    let b = spec.cell_bounds(x, half);
    let v_possible = b.sigma_min.0 < th.v_sigma;
    let inconclusive = b.sigma_min.0 < th.never_contracting
        || (info.meets_expanding && v_possible)
        || b.det.0 < th.sigma1
        || (v_possible && b.sigma_min.1 >= th.v_sigma && b.det.1 - b.det.0 > 0.01);
    if inconclusive && depth < MAX_REFINE_DEPTH {
        for child in offsets(x, 0.5 * half) {
            refine(spec, th, &child, 0.5 * half, depth + 1, info);
        }
        return;
    }
    if b.sigma_min.0 < info.smin_lo {
        info.smin_lo = b.sigma_min.0;
        info.smin_at = *x;
    }
    if b.det.0 < info.det_lo {
        info.det_lo = b.det.0;
        info.det_at = *x;
    }
    info.smin_hi = info.smin_hi.max(b.sigma_min.1);
    info.sigma_max_hi = info.sigma_max_hi.max(b.sigma_max_hi);
    let norm_lo = (b.sigma_max_hi - (b.sigma_min.1 - b.sigma_min.0)).max(0.0);
    info.det = (info.det.0.min(b.det.0), info.det.1.max(b.det.1));
    info.norm = (info.norm.0.min(norm_lo), info.norm.1.max(b.sigma_max_hi));
    if v_possible {
        info.in_v = true;
        info.v_det = (info.v_det.0.min(b.det.0), info.v_det.1.max(b.det.1));
        info.v_norm = (info.v_norm.0.min(norm_lo), info.v_norm.1.max(b.sigma_max_hi));
    }
}

fn classify(spec: &MapSpec, th: &Thresholds, idx: usize, n: usize) -> CellInfo {
    let d = spec.dim();
    let half = 0.5 / n as f64;
    let x = cell_center(idx, n, d);
    let (mut inside_w, mut meets_wc) = (true, false);
    let (mut meets_exp, mut inside_exc) = (false, true);
    for p in std::iter::once(x).chain(offsets(&x, half * (1.0 - 1e-9))) {
        let w = spec.in_window(&p);
        inside_w &= w;
        meets_wc |= !w;
        let e = spec.in_exceptional(&p);
        meets_exp |= !e;
        inside_exc &= e;
    }
    let mut info = CellInfo {
        smin_lo: f64::INFINITY,
        smin_at: x,
        smin_hi: 0.0,
        det_lo: f64::INFINITY,
        det_at: x,
        sigma_max_hi: 0.0,
        in_v: false,
        v_det: (f64::INFINITY, f64::NEG_INFINITY),
        v_norm: (f64::INFINITY, f64::NEG_INFINITY),
        det: (f64::INFINITY, f64::NEG_INFINITY),
        norm: (f64::INFINITY, f64::NEG_INFINITY),
        inside_w,
        meets_wc,
        meets_expanding: meets_exp,
        inside_exceptional: inside_exc,
    };
    refine(spec, th, &x, half, 0, &mut info);
    info
}

/// Checks (H1), (H2), (H3) on a uniform grid with per-cell Lipschitz
/// enclosures, so a pass certifies the inequalities up to the enclosure.
pub fn check_hypotheses(spec: &MapSpec, grid_resolution: usize) -> Result<HypothesisReport> {
    if grid_resolution < MIN_GRID_RESOLUTION {
        return Err(Error::InvalidSpec(format!(
            "grid resolution {grid_resolution} below {MIN_GRID_RESOLUTION}"
        )));
    }
    let d = spec.dim();
    let n = grid_resolution;
    let total = n.pow(d as u32);
    let th = Thresholds {
        never_contracting: 1.0 / (1.0 + spec.delta0()),
        v_sigma: 1.0 + spec.delta1(),
        sigma1: spec.sigma1(),
    };
    let cells: Vec<CellInfo> = (0..total)
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| classify(spec, &th, i, n))
        .collect();

    let upper_inv = 1.0 + spec.delta0();
    let expand_inv = spec.v_threshold();

    let mut stats = RegionStats {
        m1: f64::INFINITY,
        m2: f64::NEG_INFINITY,
        big_m1: f64::INFINITY,
        big_m2: f64::NEG_INFINITY,
        v_norm: (f64::INFINITY, f64::NEG_INFINITY),
        wc_norm: (f64::INFINITY, f64::NEG_INFINITY),
        v_cells: vec![],
        w_cells: vec![],
    };
    let mut worst_inv = (0.0f64, TorusPoint::origin(d));
    let mut worst_exp_inv = (0.0f64, TorusPoint::origin(d));
    let mut worst_det = (f64::INFINITY, TorusPoint::origin(d));
    let mut v_outside_w = None;
    let mut w_outside_exc = None;
    let mut a_sup = f64::NEG_INFINITY;
    let mut smax_sup = 0.0f64;

    for (i, c) in cells.iter().enumerate() {
        let inv_hi = 1.0 / c.smin_lo;
        if inv_hi > worst_inv.0 {
            worst_inv = (inv_hi, c.smin_at);
        }
        if c.meets_expanding && inv_hi > worst_exp_inv.0 {
            worst_exp_inv = (inv_hi, c.smin_at);
        }
        if c.det_lo < worst_det.0 {
            worst_det = (c.det_lo, c.det_at);
        }
        a_sup = a_sup.max(c.smin_hi.ln());
        smax_sup = smax_sup.max(c.sigma_max_hi);
        if c.inside_w {
            stats.w_cells.push(i);
            if !c.inside_exceptional && w_outside_exc.is_none() {
                w_outside_exc = Some(i);
            }
        }
        if c.in_v {
            stats.v_cells.push(i);
            stats.m1 = stats.m1.min(c.v_det.0);
            stats.m2 = stats.m2.max(c.v_det.1);
            stats.v_norm.0 = stats.v_norm.0.min(c.v_norm.0);
            stats.v_norm.1 = stats.v_norm.1.max(c.v_norm.1);
            if !c.inside_w && v_outside_w.is_none() {
                v_outside_w = Some(i);
            }
        }
        if c.meets_wc {
            stats.big_m1 = stats.big_m1.min(c.det.0);
            stats.big_m2 = stats.big_m2.max(c.det.1);
            stats.wc_norm.0 = stats.wc_norm.0.min(c.norm.0);
            stats.wc_norm.1 = stats.wc_norm.1.max(c.norm.1);
        }
    }
    if stats.v_cells.is_empty() {
        stats.m1 = f64::NAN;
        stats.m2 = f64::NAN;
        stats.v_norm = (f64::NAN, f64::NAN);
    }

    let point = |i: usize| cell_center(i, n, d);
    let mut verdicts = Vec::with_capacity(3);

    // H1
    let h1_never = worst_inv.0 <= upper_inv;
    let h1_exp = worst_exp_inv.0 <= expand_inv;
    let h1_violation = if !h1_never {
        Some(Error::HypothesisViolated {
            name: "H1",
            point: worst_inv.1,
            quantity: "||Df^-1|| > 1+delta0",
            value: worst_inv.0,
        })
    } else if !h1_exp {
        Some(Error::HypothesisViolated {
            name: "H1",
            point: worst_exp_inv.1,
            quantity: "||Df^-1|| > (1+delta1)^-1 on expanding boxes",
            value: worst_exp_inv.0,
        })
    } else {
        None
    };
    verdicts.push(Verdict {
        name: "H1",
        pass: h1_violation.is_none(),
        witness: vec![
            ("sup_inv_norm", worst_inv.0),
            ("bound_1_plus_delta0", upper_inv),
            ("sup_inv_norm_expanding", worst_exp_inv.0),
            ("bound_expanding", expand_inv),
        ],
        violation: h1_violation,
    });

    // H2
    let q = spec.boxes().q() as f64;
    let h2_violation = if worst_det.0 < spec.sigma1() {
        Some(Error::HypothesisViolated {
            name: "H2",
            point: worst_det.1,
            quantity: "|det Df| < sigma1",
            value: worst_det.0,
        })
    } else if !(spec.sigma1() > q) {
        Some(Error::HypothesisViolated {
            name: "H2",
            point: spec.window_center(),
            quantity: "sigma1 <= q",
            value: spec.sigma1(),
        })
    } else {
        None
    };
    verdicts.push(Verdict {
        name: "H2",
        pass: h2_violation.is_none(),
        witness: vec![("inf_det", worst_det.0), ("sigma1", spec.sigma1()), ("q", q)],
        violation: h2_violation,
    });

    // H3
    let h3_violation = if let Some(i) = v_outside_w {
        Some(Error::HypothesisViolated {
            name: "H3",
            point: point(i),
            quantity: "V not contained in W",
            value: cells[i].smin_lo,
        })
    } else if let Some(i) = w_outside_exc {
        Some(Error::HypothesisViolated {
            name: "H3",
            point: point(i),
            quantity: "W not contained in exceptional boxes",
            value: 0.0,
        })
    } else if !stats.v_empty() && !(stats.big_m1 > stats.m2) {
        Some(Error::HypothesisViolated {
            name: "H3",
            point: spec.window_center(),
            quantity: "M1 <= m2",
            value: stats.big_m1 - stats.m2,
        })
    } else if !stats.v_empty() && !(stats.m2 - stats.m1 < spec.beta()) {
        Some(Error::HypothesisViolated {
            name: "H3",
            point: spec.window_center(),
            quantity: "m2 - m1 >= beta",
            value: stats.m2 - stats.m1,
        })
    } else {
        None
    };
    verdicts.push(Verdict {
        name: "H3",
        pass: h3_violation.is_none(),
        witness: vec![
            ("m1", stats.m1),
            ("m2", stats.m2),
            ("M1", stats.big_m1),
            ("M2", stats.big_m2),
            ("m2_minus_m1", stats.m2 - stats.m1),
            ("beta", spec.beta()),
            ("v_outside_w_cells", if v_outside_w.is_some() { 1.0 } else { 0.0 }),
        ],
        violation: h3_violation,
    });

    Ok(HypothesisReport {
        resolution: n,
        stats,
        verdicts,
        a_sup,
        a0_bound: smax_sup.ln(),
    })
}

/// Constants driving the estimators downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionConstants {
    pub alpha: f64,
    pub gamma0: f64,
    /// Largest `c` with `(1+delta0)^alpha (1+delta1)^-(1-alpha) <= e^{-2c}`.
    pub c: f64,
    /// `alpha m2 + (1-alpha) M2 + l log(1+delta0)`.
    pub chain_lhs: f64,
    /// `gamma0 m1 + (1-gamma0) M1`.
    pub chain_rhs: f64,
    pub rho0: f64,
    /// Radius below which the one-step distortion stays within `e^{c/2}`.
    pub eps0: f64,
    /// Pliss density `zeta` for `c1 = c`, `c2 = 3c/2` and the cap `A`.
    pub d0: f64,
    pub a_cap: f64,
}

pub fn derive_constants(
    spec: &MapSpec,
    report: &HypothesisReport,
    gamma0: f64,
    alpha_weight: f64,
) -> Result<ExpansionConstants> {
    if !(gamma0 < alpha_weight && alpha_weight < 1.0 && gamma0 >= 0.0) {
        return Err(Error::ConstantsInfeasible(format!(
            "need 0 <= gamma0 < alpha < 1 (gamma0 = {gamma0}, alpha = {alpha_weight})"
        )));
    }
    let a = alpha_weight;
    let l0 = (1.0 + spec.delta0()).ln();
    let l1 = (1.0 + spec.delta1()).ln();
    let c = 0.5 * ((1.0 - a) * l1 - a * l0);
    if !(c > 0.0) {
        return Err(Error::ConstantsInfeasible(format!(
            "(1+delta0)^alpha (1+delta1)^-(1-alpha) = {} >= 1",
            (a * l0 - (1.0 - a) * l1).exp()
        )));
    }
    let s = &report.stats;
    let dim = spec.dim() as f64;
    let (lhs, rhs, rho0) = if s.v_empty() {
        // Every measure lies in K_alpha, so the exclusion chain is vacuous
        // and any rho0 in (0, 1) serves.
        (f64::NAN, f64::NAN, 0.5)
    } else {
        let lhs = a * s.m2 + (1.0 - a) * s.big_m2 + dim * l0;
        let rhs = gamma0 * s.m1 + (1.0 - gamma0) * s.big_m1;
        let ratio = lhs / rhs;
        if !(ratio < 1.0) {
            return Err(Error::ConstantsInfeasible(format!(
                "alpha m2 + (1-alpha) M2 + l log(1+delta0) = {lhs} is not below gamma0 m1 + (1-gamma0) M1 = {rhs}"
            )));
        }
        (lhs, rhs, 0.5 * (ratio + 1.0))
    };
    let a_cap = report.a_sup.max(1.5 * c + 1e-12);
    let eps0 = estimate_eps0(spec, c, 4000, 0x5eed_e050);
    Ok(ExpansionConstants {
        alpha: a,
        gamma0,
        c,
        chain_lhs: lhs,
        chain_rhs: rhs,
        rho0,
        eps0,
        d0: pliss_zeta(a_cap, c, 1.5 * c),
        a_cap,
    })
}

/// Largest dyadic radius `2^-j` such that, over `samples` random pairs
/// `(xi, eta)` with `d(xi, eta) = 2^-j`, the ratio of inverse norms stays
/// within `e^{c/2}` both ways.
pub fn estimate_eps0(spec: &MapSpec, c: f64, samples: usize, seed: u64) -> f64 {
    let bound = (0.5 * c).exp();
    let d = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<(TorusPoint, [f64; MAX_DIM])> = (0..samples)
        .map(|_| {
            let mut x = [0.0; MAX_DIM];
            let mut v = [0.0f64; MAX_DIM];
            for i in 0..d {
                x[i] = rng.gen::<f64>();
                v[i] = rng.gen_range(-1.0..1.0);
            }
            let m = v[..d].iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for vi in v.iter_mut().take(d) {
                *vi /= m;
            }
            (TorusPoint::new(&x[..d]), v)
        })
        .collect();
    for j in 2..50 {
        let rad = (0.5f64).powi(j);
        let ok = base.par_iter().all(|(x, v)| {
            let y = x.translate(&v[..d], rad);
            match (spec.inv_norm(x), spec.inv_norm(&y)) {
                (Ok(a), Ok(b)) => a / b <= bound && b / a <= bound,
                _ => false,
            }
        });
        if ok {
            return rad;
        }
    }
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::MapParams;

    #[test]
    fn linear_map_passes_with_empty_v() {
        let spec = MapSpec::new(MapParams::linear(&[2.0, 4.0])).unwrap();
        let rep = check_hypotheses(&spec, 64).unwrap();
        assert!(rep.all_pass(), "{}", rep.to_text());
        assert!(rep.stats.v_empty());
        assert_eq!(rep.stats.big_m1, 8.0);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(check_hypotheses(&MapSpec::reference(), 32).is_err());
    }

    #[test]
    fn large_delta1_breaks_containment() {
        let mut p = MapParams::reference();
        p.delta1 = 1.2;
        let spec = MapSpec::new(p).unwrap();
        let rep = check_hypotheses(&spec, 128).unwrap();
        let h3 = rep.verdict("H3").unwrap();
        assert!(!h3.pass);
        assert!(matches!(
            h3.violation,
            Some(Error::HypothesisViolated { quantity: "V not contained in W", .. })
        ));
    }

    #[test]
    fn records_have_one_line_per_hypothesis() {
        let spec = MapSpec::new(MapParams::linear(&[2.0, 4.0])).unwrap();
        let rep = check_hypotheses(&spec, 64).unwrap();
        let rec = rep.to_records();
        assert_eq!(rec.lines().count(), 3);
        assert!(rec.starts_with("H1,pass,"));
    }

    #[test]
    fn degenerate_slack_gives_closed_form_c() {
        let mut p = MapParams::linear(&[2.0, 4.0]);
        p.delta0 = 0.0;
        let spec = MapSpec::new(p).unwrap();
        let rep = check_hypotheses(&spec, 64).unwrap();
        let k = derive_constants(&spec, &rep, 0.1, 0.3).unwrap();
        assert!((k.c - 0.7 * (1.1f64).ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn huge_delta0_is_infeasible() {
        let mut p = MapParams::linear(&[2.0, 4.0]);
        p.delta0 = 10.0;
        let spec = MapSpec::new(p).unwrap();
        let rep = check_hypotheses(&spec, 64).unwrap();
        assert!(matches!(
            derive_constants(&spec, &rep, 0.1, 0.5),
            Err(Error::ConstantsInfeasible(_))
        ));
    }
}
