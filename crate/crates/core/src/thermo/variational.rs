//! Free energy `h + int phi`, the low-variation condition, and the ranking of
//! candidate measures.

use std::fmt::Write as _;

use crate::ergodic::{k_alpha_test, lyapunov_spectrum, EmpiricalMeasure, KAlphaReport};
use crate::error::{Error, Result};
use crate::noise::{realize_noise, NoiseModel};
use crate::reduce::{tree_mean, tree_sum};
use crate::thermo::entropy::{random_ks_entropy, PartitionSpec};
use crate::thermo::potential::Potential;

/// `int phi d mu`.
pub fn integral(mu: &EmpiricalMeasure, phi: &Potential) -> f64 {
    let v: Vec<f64> = (0..mu.len())
        .map(|i| mu.weight(i) * phi.eval(mu.fiber(i), mu.step(i), &mu.point(i)))
        .collect();
    tree_sum(&v)
}

/// `Psi(mu) = h_mu + int phi d mu`.
pub fn free_energy(mu: &EmpiricalMeasure, model: &NoiseModel, part: &PartitionSpec, phi: &Potential, n: usize) -> Result<f64> {
    Ok(random_ks_entropy(mu, model, part, n)?.value + integral(mu, phi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowVariation {
    pub holds: bool,
    /// `pi(phi) - rho0 h_top - ||phi||_1` (literal) or the same for the
    /// recentered potential.
    pub margin: f64,
}

/// Literal test `||phi||_1 < pi(phi) - rho0 h_top`. With `centered`, `phi` is
/// first shifted by the midpoint `c` of its range, which replaces the norm
/// by the half-oscillation and `pi(phi)` by `pi(phi) - c`.
pub fn low_variation_test(
    phi: &Potential,
    dim: usize,
    pressure_est: f64,
    htop_est: f64,
    rho0: f64,
    centered: bool,
) -> Result<LowVariation> {
    if !(htop_est > 0.0) || !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(Error::InvalidSpec(format!("need htop > 0 and rho0 in (0, 1) (htop = {htop_est}, rho0 = {rho0})")));
    }
    let margin = if centered {
        let (lo, hi) = phi.range(dim, 8);
        let c = 0.5 * (lo + hi);
        pressure_est - c - rho0 * htop_est - 0.5 * (hi - lo)
    } else {
        pressure_est - rho0 * htop_est - phi.norm1(dim, 8)
    };
    Ok(LowVariation { holds: margin > 0.0, margin })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    /// Itinerary length for the entropy.
    pub n: usize,
    pub alpha: f64,
    /// Pressure estimate the winner is compared with.
    pub pressure: Option<f64>,
    /// Horizon and number of generating orbits for the Lyapunov check.
    pub lyap_n: usize,
    pub lyap_orbits: usize,
    pub reorth: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            n: 6,
            alpha: 0.58,
            pressure: None,
            lyap_n: 1000,
            lyap_orbits: 16,
            reorth: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub id: usize,
    pub entropy: f64,
    pub integral: f64,
    pub psi: f64,
    pub kalpha: KAlphaReport,
    /// Mean over generating orbits of the smallest Lyapunov exponent.
    pub min_lyap: f64,
    /// Mean over generating orbits of the sum of positive exponents.
    pub pos_lyap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    /// Sorted by decreasing `psi`.
    pub entries: Vec<ScanEntry>,
    /// Index into `entries` of the best candidate in `K_alpha`.
    pub winner: usize,
    pub pressure: Option<f64>,
}

impl ScanReport {
    pub fn best(&self) -> &ScanEntry {
        &self.entries[self.winner]
    }

    /// `pressure - psi(winner)`.
    pub fn gap(&self) -> Option<f64> {
        self.pressure.map(|p| p - self.best().psi)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("candidate_id,entropy,integral,psi,v_mass,min_lyap\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{:?},{:?},{:?},{:?},{:?}", e.id, e.entropy, e.integral, e.psi, e.kalpha.v_mass, e.min_lyap);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let b = self.best();
        let mut s = String::new();
        let _ = writeln!(s, "winner = candidate {}", b.id);
        let _ = writeln!(s, "psi = {:.9}  entropy = {:.9}  integral = {:.9}", b.psi, b.entropy, b.integral);
        if let Some(g) = self.gap() {
            let _ = writeln!(s, "gap to pressure = {g:.9}");
        }
        let _ = writeln!(s, "min lyapunov exponent = {:.9}", b.min_lyap);
        s.push_str(&b.kalpha.to_text());
        for e in &self.entries {
            let _ = writeln!(
                s,
                "candidate {}: psi = {:.9}  v_mass = {:.6}  in_class = {}",
                e.id, e.psi, e.kalpha.v_mass, e.kalpha.in_class
            );
        }
        s
    }
}

fn lyap_summary(mu: &EmpiricalMeasure, model: &NoiseModel, opts: &ScanOptions) -> Result<(f64, f64)> {
    if mu.origins.is_empty() || opts.lyap_orbits == 0 {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut mins = vec![];
    let mut pos = vec![];
    for (f, x) in mu.origins.iter().take(opts.lyap_orbits) {
        let real = realize_noise(model, *f, opts.lyap_n)?;
        let s = lyapunov_spectrum(&real, x, opts.lyap_n, opts.reorth)?;
        mins.push(s.min());
        pos.push(s.positive_sum());
    }
    Ok((tree_mean(&mins), tree_mean(&pos)))
}

/// Ranks candidates by `Psi`; the winner is the best one inside `K_alpha`.
pub fn equilibrium_scan(
    model: &NoiseModel,
    phi: &Potential,
    part: &PartitionSpec,
    candidates: &[EmpiricalMeasure],
    opts: &ScanOptions,
) -> Result<ScanReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidSpec("equilibrium scan needs at least one candidate".into()));
    }
    let mut entries = Vec::with_capacity(candidates.len());
    for (id, mu) in candidates.iter().enumerate() {
        let h = random_ks_entropy(mu, model, part, opts.n)?.value;
        let int = integral(mu, phi);
        let kalpha = k_alpha_test(mu, model.base(), opts.alpha);
        let (min_lyap, pos_lyap) = lyap_summary(mu, model, opts)?;
        entries.push(ScanEntry {
            id,
            entropy: h,
            integral: int,
            psi: h + int,
            kalpha,
            min_lyap,
            pos_lyap,
        });
    }
    entries.sort_by(|a, b| b.psi.total_cmp(&a.psi).then(a.id.cmp(&b.id)));
    let winner = entries
        .iter()
        .position(|e| e.kalpha.in_class)
        .ok_or(Error::NoCandidateInClass { alpha: opts.alpha })?;
    Ok(ScanReport {
        entries,
        winner,
        pressure: opts.pressure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_is_low_variation() {
        let lv = low_variation_test(&Potential::zero(), 1, 0.69, 0.69, 0.9, false).unwrap();
        assert!(lv.holds);
        assert!((lv.margin - 0.069).abs() < 1e-12);
    }

    #[test]
    fn large_negative_constant_fails_literal_but_not_centered() {
        let h = (2f64).ln();
        let phi = Potential::constant(-h);
        let lit = low_variation_test(&phi, 1, 0.0, h, 0.5, false).unwrap();
        assert!(!lit.holds);
        let cen = low_variation_test(&phi, 1, 0.0, h, 0.5, true).unwrap();
        assert!(cen.holds);
    }
}
