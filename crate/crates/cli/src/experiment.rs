//! `ExperimentConfig`: the `[map]`, `[noise]` and `[run]` sections.

use std::path::PathBuf;

use rne_core::config::{IniDoc, Section};
use rne_core::{Error, MapParams, MapSpec, NoiseModel, PerturbationLaw, Potential, TrigTerm};
use sha2::{Digest, Sha256};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum LawKind {
    None,
    Iid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub law: LawKind,
    pub magnitude: f64,
    pub seed: u64,
    pub fibers: usize,
    pub horizon: usize,
    pub refresh: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Orbit length for orbit, lyapunov, occupation and empirical runs.
    pub n: usize,
    pub starts: usize,
    pub burn_in: usize,
    pub eps_list: Vec<f64>,
    /// Separated-set horizons for the pressure.
    pub n_list: Vec<usize>,
    pub grid_k: u32,
    pub partition_k: u32,
    /// Itinerary length for the entropy.
    pub entropy_n: usize,
    pub alpha: f64,
    pub gamma0: f64,
    /// Overrides the derived `rho0` in the low-variation test.
    pub rho0: Option<f64>,
    /// Resolution of the hypothesis grid.
    pub grid: usize,
    /// `phi(x) = amplitude * cos(2 pi x_1)`.
    pub potential_amplitude: f64,
    pub lyap_orbits: usize,
    pub reorth: usize,
    /// Hyperbolic times checked for backward contraction.
    pub probes: usize,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub map: MapParams,
    pub noise: NoiseConfig,
    pub run: RunConfig,
    pub format_version: u32,
}

const NOISE_KEYS: &[&str] = &["law", "magnitude", "seed", "fibers", "horizon", "refresh"];
const RUN_KEYS: &[&str] = &[
    "format_version",
    "n",
    "fibers",
    "starts",
    "burn_in",
    "eps_list",
    "n_list",
    "grid_k",
    "partition_k",
    "entropy_n",
    "alpha",
    "gamma0",
    "rho0",
    "grid",
    "potential_amplitude",
    "lyap_orbits",
    "reorth",
    "probes",
    "output_dir",
];

fn cfg_err(line: usize, key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let doc = IniDoc::parse(text)?;
        for s in &doc.sections {
            if !["map", "noise", "run"].contains(&s.name.as_str()) {
                return Err(cfg_err(s.line, &s.name, "unknown section"));
            }
        }
        let empty = |n: &str| Section::new(n);
        let map_sec = doc.section("map").cloned().unwrap_or_else(|| empty("map"));
        let noise_sec = doc.section("noise").cloned().unwrap_or_else(|| empty("noise"));
        let run_sec = doc.section("run").cloned().unwrap_or_else(|| empty("run"));

        let map = MapParams::from_section(&map_sec)?;
        // remaining map constraints, blamed on the section header
        MapSpec::new(map.clone()).map_err(|e| cfg_err(map_sec.line, "map", e.to_string()))?;

        noise_sec.reject_unknown(NOISE_KEYS)?;
        run_sec.reject_unknown(RUN_KEYS)?;

        let format_version = run_sec.usize_or("format_version", FORMAT_VERSION as usize)? as u32;
        if format_version != FORMAT_VERSION {
            return Err(cfg_err(
                run_sec.line_of("format_version"),
                "format_version",
                format!("only version {FORMAT_VERSION} is supported"),
            ));
        }

        let law = match noise_sec.get("law").map(|e| e.value.as_str()) {
            None | Some("none") => LawKind::None,
            Some("iid") => LawKind::Iid,
            Some(v) => return Err(cfg_err(noise_sec.line_of("law"), "law", format!("expected none or iid, got `{v}`"))),
        };
        let magnitude = noise_sec.f64_or("magnitude", 0.0)?;
        if !(magnitude >= 0.0) {
            return Err(cfg_err(noise_sec.line_of("magnitude"), "magnitude", "must be >= 0"));
        }

        let fibers_noise = noise_sec.get("fibers").map(|e| e.usize()).transpose()?;
        let fibers_run = run_sec.get("fibers").map(|e| e.usize()).transpose()?;
        let fibers = match (fibers_noise, fibers_run) {
            (Some(a), Some(b)) if a != b => {
                return Err(cfg_err(run_sec.line_of("fibers"), "fibers", format!("[run] fibers = {b} disagrees with [noise] fibers = {a}")))
            }
            (a, b) => a.or(b).unwrap_or(2),
        };
        if fibers == 0 {
            return Err(cfg_err(noise_sec.line_of("fibers").max(run_sec.line_of("fibers")), "fibers", "must be >= 1"));
        }

        let n = run_sec.usize_or("n", 1000)?;
        let burn_in = run_sec.usize_or("burn_in", 100)?;
        let eps_list = match run_sec.get("eps_list") {
            Some(e) => e.f64_list()?,
            None => vec![0.24],
        };
        if eps_list.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return Err(cfg_err(run_sec.line_of("eps_list"), "eps_list", "every eps must lie in (0, 1/2)"));
        }
        let n_list = match run_sec.get("n_list") {
            Some(e) => e.usize_list()?,
            None => vec![2, 3, 4],
        };
        if n_list.is_empty() || n_list.contains(&0) {
            return Err(cfg_err(run_sec.line_of("n_list"), "n_list", "needs positive entries"));
        }
        let entropy_n = run_sec.usize_or("entropy_n", 4)?;
        let reorth = run_sec.usize_or("reorth", 10)?;
        if !(1..=50).contains(&reorth) {
            return Err(cfg_err(run_sec.line_of("reorth"), "reorth", "must lie in 1..=50"));
        }
        let needed = (n + burn_in).max(*n_list.iter().max().unwrap()).max(entropy_n);
        let horizon = noise_sec.usize_or("horizon", needed)?;
        if horizon < needed {
            return Err(cfg_err(
                noise_sec.line_of("horizon"),
                "horizon",
                format!("{horizon} is shorter than the {needed} steps the run needs"),
            ));
        }
        let alpha = run_sec.f64_or("alpha", 0.58)?;
        let gamma0 = run_sec.f64_or("gamma0", 0.42)?;
        if !(0.0 <= gamma0 && gamma0 < alpha && alpha < 1.0) {
            return Err(cfg_err(run_sec.line_of("alpha"), "alpha", "need 0 <= gamma0 < alpha < 1"));
        }
        let rho0 = run_sec.get("rho0").map(|e| e.f64()).transpose()?;
        if let Some(r) = rho0 {
            if !(r > 0.0 && r < 1.0) {
                return Err(cfg_err(run_sec.line_of("rho0"), "rho0", "must lie in (0, 1)"));
            }
        }
        let grid_k = run_sec.usize_or("grid_k", 10)? as u32;
        let partition_k = run_sec.usize_or("partition_k", 1)? as u32;
        let grid = run_sec.usize_or("grid", 1024)?;
        let output_dir = PathBuf::from(run_sec.get("output_dir").map_or("results", |e| e.value.as_str()));

        Ok(ExperimentConfig {
            map,
            noise: NoiseConfig {
                law,
                magnitude,
                seed: noise_sec.u64_or("seed", 1)?,
                fibers,
                horizon,
                refresh: noise_sec.bool_or("refresh", true)?,
            },
            run: RunConfig {
                n,
                starts: run_sec.usize_or("starts", 64)?,
                burn_in,
                eps_list,
                n_list,
                grid_k,
                partition_k,
                entropy_n,
                alpha,
                gamma0,
                rho0,
                grid,
                potential_amplitude: run_sec.f64_or("potential_amplitude", 0.0)?,
                lyap_orbits: run_sec.usize_or("lyap_orbits", 8)?,
                reorth,
                probes: run_sec.usize_or("probes", 8)?,
                output_dir,
            },
            format_version,
        })
    }

    /// Sections with every value spelled out, `output_dir` left out so the
    /// text only depends on what determines the numbers.
    pub fn canonical(&self) -> String {
        let mut noise = Section::new("noise");
        noise.push("law", if self.noise.law == LawKind::Iid { "iid" } else { "none" });
        noise.push("magnitude", format!("{:?}", self.noise.magnitude));
        noise.push("seed", self.noise.seed.to_string());
        noise.push("fibers", self.noise.fibers.to_string());
        noise.push("horizon", self.noise.horizon.to_string());
        noise.push("refresh", self.noise.refresh.to_string());
        let r = &self.run;
        let mut run = Section::new("run");
        run.push("format_version", self.format_version.to_string());
        run.push("n", r.n.to_string());
        run.push("starts", r.starts.to_string());
        run.push("burn_in", r.burn_in.to_string());
        run.push("eps_list", r.eps_list.iter().map(|e| format!("{e:?}")).collect::<Vec<_>>().join(", "));
        run.push("n_list", list(&r.n_list));
        run.push("grid_k", r.grid_k.to_string());
        run.push("partition_k", r.partition_k.to_string());
        run.push("entropy_n", r.entropy_n.to_string());
        run.push("alpha", format!("{:?}", r.alpha));
        run.push("gamma0", format!("{:?}", r.gamma0));
        if let Some(v) = r.rho0 {
            run.push("rho0", format!("{v:?}"));
        }
        run.push("grid", r.grid.to_string());
        run.push("potential_amplitude", format!("{:?}", r.potential_amplitude));
        run.push("lyap_orbits", r.lyap_orbits.to_string());
        run.push("reorth", r.reorth.to_string());
        run.push("probes", r.probes.to_string());
        IniDoc {
            sections: vec![self.map.to_section(), noise, run],
        }
        .to_text()
    }

    /// Hex SHA-256 of [`ExperimentConfig::canonical`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn spec(&self) -> Result<MapSpec, Error> {
        MapSpec::new(self.map.clone())
    }

    pub fn model(&self) -> Result<NoiseModel, Error> {
        let law = match self.noise.law {
            LawKind::None => PerturbationLaw::None,
            LawKind::Iid => PerturbationLaw::IidUniform {
                magnitude: self.noise.magnitude,
            },
        };
        Ok(NoiseModel::new(self.spec()?, law, self.noise.seed)?.with_refresh(self.noise.refresh))
    }

    pub fn potential(&self) -> Potential {
        let a = self.run.potential_amplitude;
        if a == 0.0 {
            return Potential::zero();
        }
        let mut freq = [0; 4];
        freq[0] = 1;
        Potential::trig(
            vec![TrigTerm {
                amplitude: a,
                freq,
                phase: 0.0,
            }],
            0.0,
        )
    }

    /// Seed for the Lebesgue starts, kept apart from the noise stream.
    pub fn start_seed(&self) -> u64 {
        self.noise.seed ^ 0x5747_4152_5453_0001
    }
}
