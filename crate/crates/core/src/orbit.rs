//! Random orbits `x, f(w)x, f^2(w)x, ...` with their per-step derivative data.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::noise::{skew_step, NoiseRealization};
use crate::torus::TorusPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionFlags {
    pub in_v: bool,
    pub in_w: bool,
    /// Flat Markov box index of the point.
    pub box_index: u32,
    pub exceptional: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    V,
    W,
    Exceptional,
}

impl RegionFlags {
    pub fn is_in(&self, region: Region) -> bool {
        match region {
            Region::V => self.in_v,
            Region::W => self.in_w,
            Region::Exceptional => self.exceptional,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrbitTrace {
    pub start: TorusPoint,
    /// `n + 1` points.
    pub points: Vec<TorusPoint>,
    /// `n` entries each.
    pub log_inv_norms: Vec<f64>,
    pub log_dets: Vec<f64>,
    pub flags: Vec<RegionFlags>,
    /// The realization that produced the trace; `None` for imported traces.
    pub realization: Option<NoiseRealization>,
}

impl OrbitTrace {
    /// Number of steps.
    pub fn len(&self) -> usize {
        self.log_inv_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_inv_norms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    /// CSV with columns `step, x_1..x_d, log_inv_norm, log_det, in_V, in_W, box`.
    /// The last point has no step data and is omitted.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("step");
        for i in 1..=d {
            let _ = write!(out, ",x_{i}");
        }
        out.push_str(",log_inv_norm,log_det,in_V,in_W,box\n");
        for k in 0..self.len() {
            let _ = write!(out, "{k}");
            for i in 0..d {
                let _ = write!(out, ",{:?}", self.points[k].get(i));
            }
            let f = &self.flags[k];
            let _ = writeln!(
                out,
                ",{:?},{:?},{},{},{}",
                self.log_inv_norms[k],
                self.log_dets[k],
                f.in_v as u8,
                f.in_w as u8,
                f.box_index
            );
        }
        out
    }

    /// Reads the CSV written by [`OrbitTrace::to_csv`]. Lines starting with
    /// `#` are skipped. The exceptional flag is not stored and reads as `in_W`.
    pub fn from_csv(text: &str) -> Result<OrbitTrace> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty trace file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let d = cols.iter().filter(|c| c.starts_with("x_")).count();
        if d == 0 || cols.len() != d + 6 {
            return Err(Error::Parse(format!("unexpected trace header `{header}`")));
        }
        let mut t = OrbitTrace {
            start: TorusPoint::origin(d),
            points: vec![],
            log_inv_norms: vec![],
            log_dets: vec![],
            flags: vec![],
            realization: None,
        };
        for (ln, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != d + 6 {
                return Err(Error::Parse(format!("trace row {} has {} fields", ln + 1, f.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}` in trace row {}", ln + 1)))
            };
            let mut x = vec![0.0; d];
            for i in 0..d {
                x[i] = num(f[1 + i])?;
            }
            t.points.push(TorusPoint::new(&x));
            t.log_inv_norms.push(num(f[d + 1])?);
            t.log_dets.push(num(f[d + 2])?);
            let flag = |s: &str| s.trim() == "1";
            let in_w = flag(f[d + 4]);
            t.flags.push(RegionFlags {
                in_v: flag(f[d + 3]),
                in_w,
                box_index: f[d + 5].trim().parse().map_err(|_| Error::Parse(format!("bad box in row {}", ln + 1)))?,
                exceptional: in_w,
            });
        }
        if let Some(p) = t.points.first() {
            t.start = *p;
        }
        Ok(t)
    }
}

/// Runs `n` steps of the random composition, `spec_0` applied first.
pub fn iterate(real: &NoiseRealization, x: &TorusPoint, n: usize) -> Result<OrbitTrace> {
    if n > real.horizon() {
        return Err(Error::HorizonExceeded {
            horizon: real.horizon(),
            requested: n,
        });
    }
    let mut t = OrbitTrace {
        start: *x,
        points: Vec::with_capacity(n + 1),
        log_inv_norms: Vec::with_capacity(n),
        log_dets: Vec::with_capacity(n),
        flags: Vec::with_capacity(n),
        realization: Some(real.clone()),
    };
    let mut p = *x;
    t.points.push(p);
    for k in 0..n {
        let spec = real.spec(k);
        let j = spec.jacobian(&p);
        let (smin, _) = j.singular_extremes();
        t.log_inv_norms.push(-smin.ln());
        t.log_dets.push(j.det().abs().ln());
        t.flags.push(RegionFlags {
            in_v: smin * spec.v_threshold() < 1.0,
            in_w: spec.in_window(&p),
            box_index: spec.box_index(&p) as u32,
            exceptional: spec.in_exceptional(&p),
        });
        p = skew_step(real, k, &p);
        t.points.push(p);
    }
    Ok(t)
}

/// `Df^k(T^j w)(x_j)`: product of the Jacobians of steps `j..j+k`, the
/// earliest applied first.
pub fn derivative_cocycle(trace: &OrbitTrace, j: usize, k: usize) -> Result<DMatrix<f64>> {
    let d = trace.dim();
    if j + k > trace.len() {
        return Err(Error::HorizonExceeded {
            horizon: trace.len(),
            requested: j + k,
        });
    }
    let real = trace
        .realization
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("trace carries no realization".into()))?;
    let mut m = DMatrix::identity(d, d);
    for s in j..j + k {
        m = real.spec(s).jacobian(&trace.points[s]).to_matrix() * m;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{MapParams, MapSpec};
    use crate::noise::{realize_noise, NoiseModel};

    fn exact(spec: MapSpec, horizon: usize) -> NoiseRealization {
        realize_noise(&NoiseModel::deterministic(spec).with_refresh(false), 0, horizon).unwrap()
    }

    #[test]
    fn doubling_orbit() {
        let r = exact(MapSpec::new(MapParams::doubling()).unwrap(), 2);
        let t = iterate(&r, &TorusPoint::new(&[0.3]), 2).unwrap();
        let xs: Vec<f64> = t.points.iter().map(|p| p.get(0)).collect();
        assert!((xs[1] - 0.6).abs() < 1e-15 && (xs[2] - 0.2).abs() < 1e-15, "{xs:?}");
    }

    #[test]
    fn linear_inv_norms_constant() {
        let r = exact(MapSpec::new(MapParams::linear(&[2.0, 4.0])).unwrap(), 100);
        let t = iterate(&r, &TorusPoint::new(&[0.123, 0.77]), 100).unwrap();
        assert!(t.log_inv_norms.iter().all(|&v| v == -(2f64).ln()));
        let c = derivative_cocycle(&t, 3, 4).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[16.0, 0.0, 0.0, 256.0]));
        assert_eq!(derivative_cocycle(&t, 5, 0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn horizon_enforced() {
        let r = exact(MapSpec::reference(), 5);
        assert!(iterate(&r, &TorusPoint::origin(2), 6).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let r = realize_noise(&NoiseModel::deterministic(MapSpec::reference()), 0, 30).unwrap();
        let t = iterate(&r, &TorusPoint::new(&[0.01, 0.02]), 30).unwrap();
        let back = OrbitTrace::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.log_inv_norms, t.log_inv_norms);
        assert_eq!(back.points[..30], t.points[..30]);
    }
}
