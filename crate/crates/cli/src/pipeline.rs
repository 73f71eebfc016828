//! The subcommands and the `all` pipeline.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rne_core::config::parse_decimal;
use rne_core::ergodic::in_v;
use rne_core::hypotheses::{check_hypotheses, derive_constants, ExpansionConstants, HypothesisReport};
use rne_core::pliss::{check_backward_contraction, density_at_infinity, hyperbolic_times, pliss_times, window_times, PlissProblem};
use rne_core::reduce::{par_map, tree_mean};
use rne_core::thermo::{equilibrium_scan, low_variation_test, pressure, random_ks_entropy, PartitionSpec, PressureEstimate, ScanOptions};
use rne_core::{
    birkhoff_average, empirical_measure_fibers, expansion_exponent, iterate, lebesgue_starts, lyapunov_from_trace, occupation_fraction,
    realize_noise, Channel, EmpiricalMeasure, MapSpec, NoiseModel, OrbitTrace, Potential, Region, TorusPoint,
};

use crate::experiment::ExperimentConfig;
use crate::output::{self, OutputDir};
use crate::plot::emit_plot_data;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Check,
    Orbit,
    Pliss,
    Hyptimes,
    Lyapunov,
    Occupation,
    Empirical,
    Pressure,
    Entropy,
    Equilibrium,
    All,
}

impl Subcommand {
    pub const ALL_NAMES: [&'static str; 11] = [
        "check",
        "orbit",
        "pliss",
        "hyptimes",
        "lyapunov",
        "occupation",
        "empirical",
        "pressure",
        "entropy",
        "equilibrium",
        "all",
    ];

    pub fn parse(s: &str) -> Option<Self> {
        use Subcommand::*;
        Some(match s {
            "check" => Check,
            "orbit" => Orbit,
            "pliss" => Pliss,
            "hyptimes" => Hyptimes,
            "lyapunov" => Lyapunov,
            "occupation" => Occupation,
            "empirical" => Empirical,
            "pressure" => Pressure,
            "entropy" => Entropy,
            "equilibrium" => Equilibrium,
            "all" => All,
            _ => return None,
        })
    }
}

/// Inputs of the `pliss` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct PlissArgs {
    pub input: PathBuf,
    pub cap_a: f64,
    pub c1: f64,
    pub c2: f64,
    /// Return the index set even when the hypotheses fail.
    pub waive: bool,
}

/// Extra inputs some subcommands take from the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    pub pliss: Option<PlissArgs>,
    /// Orbit CSV for `hyptimes`; defaults to `orbit.csv` in the output dir.
    pub trace: Option<PathBuf>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    spec: MapSpec,
    model: NoiseModel,
    phi: Potential,
    out: OutputDir,
    written: Vec<PathBuf>,
    report: Option<HypothesisReport>,
    constants: Option<ExpansionConstants>,
    measure: Option<EmpiricalMeasure>,
    pressure: Option<PressureEstimate>,
}

fn core<T>(context: &str, r: rne_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_core(context, e))
}

impl<'a> Ctx<'a> {
    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.out.write(name, body)?;
        self.written.push(p);
        Ok(())
    }

    fn report(&mut self) -> Result<&HypothesisReport, CliError> {
        if self.report.is_none() {
            self.report = Some(core("check", check_hypotheses(&self.spec, self.cfg.run.grid))?);
        }
        Ok(self.report.as_ref().unwrap())
    }

    fn constants(&mut self) -> Result<ExpansionConstants, CliError> {
        if self.constants.is_none() {
            let (g, a) = (self.cfg.run.gamma0, self.cfg.run.alpha);
            let spec = self.spec.clone();
            let rep = self.report()?;
            let k = core("constants", derive_constants(&spec, rep, g, a))?;
            self.constants = Some(k);
        }
        Ok(self.constants.clone().unwrap())
    }

    fn starts(&self, count: usize) -> Vec<TorusPoint> {
        lebesgue_starts(self.spec.dim(), count, self.cfg.start_seed())
    }

    fn measure(&mut self) -> Result<EmpiricalMeasure, CliError> {
        if self.measure.is_none() {
            let r = &self.cfg.run;
            let starts = self.starts(r.starts);
            let mu = core(
                "empirical",
                empirical_measure_fibers(&self.model, &starts, r.n + r.burn_in, r.burn_in, self.cfg.noise.fibers),
            )?;
            self.measure = Some(mu);
        }
        Ok(self.measure.clone().unwrap())
    }

    fn pressure_est(&mut self) -> Result<PressureEstimate, CliError> {
        if self.pressure.is_none() {
            let r = &self.cfg.run;
            let p = core(
                "pressure",
                pressure(&self.model, &self.phi, &r.n_list, &r.eps_list, self.cfg.noise.fibers, r.grid_k),
            )?;
            self.pressure = Some(p);
        }
        Ok(self.pressure.clone().unwrap())
    }
}

fn check(ctx: &mut Ctx) -> Result<(), CliError> {
    let rep = ctx.report()?.clone();
    let mut text = rep.to_text();
    let constants = ctx.constants();
    match &constants {
        Ok(k) => {
            let _ = writeln!(
                text,
                "constants: c = {:.9}  rho0 = {:.9}  eps0 = {:e}  d0 = {:.9}  A = {:.9}",
                k.c, k.rho0, k.eps0, k.d0, k.a_cap
            );
        }
        Err(e) => {
            let _ = writeln!(text, "constants: {e}");
        }
    }
    ctx.write("check.txt", &text)?;
    ctx.write("check.records", &rep.to_records())?;
    if !rep.all_pass() {
        let failed: Vec<&str> = rep.verdicts.iter().filter(|v| !v.pass).map(|v| v.name).collect();
        return Err(CliError::Infeasible(format!("hypotheses failed: {}", failed.join(", "))));
    }
    constants.map(|_| ())
}

fn orbit_trace(ctx: &Ctx) -> Result<OrbitTrace, CliError> {
    let n = ctx.cfg.run.n;
    let real = core("orbit", realize_noise(&ctx.model, 0, n))?;
    core("orbit", iterate(&real, &ctx.starts(1)[0], n))
}

fn orbit(ctx: &mut Ctx) -> Result<(), CliError> {
    let t = orbit_trace(ctx)?;
    ctx.write("orbit.csv", &t.to_csv())
}

fn read_sequence(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = output::read(path)?;
    let mut a = vec![];
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let v = parse_decimal(s).ok_or_else(|| {
            CliError::Config(rne_core::Error::Config {
                line: i + 1,
                key: path.display().to_string(),
                msg: format!("expected a decimal number, got `{s}`"),
            })
        })?;
        a.push(v);
    }
    Ok(a)
}

fn pliss(ctx: &mut Ctx, args: &PlissArgs) -> Result<(), CliError> {
    let prob = PlissProblem {
        a: read_sequence(&args.input)?,
        cap_a: args.cap_a,
        c1: args.c1,
        c2: args.c2,
    };
    let times = match pliss_times(&prob) {
        Ok(t) => t,
        Err(e) if args.waive => {
            eprintln!("warning: {e}; guarantee waived");
            window_times(&prob.a, prob.c1)
        }
        Err(e) => return Err(CliError::from_core("pliss", e)),
    };
    let body: String = times.iter().map(|t| format!("{t}\n")).collect();
    ctx.write("pliss.txt", &body)
}

fn hyptimes(ctx: &mut Ctx, trace: Option<&PathBuf>) -> Result<(), CliError> {
    let k = ctx.constants()?;
    let path = trace.cloned().unwrap_or_else(|| ctx.out.path("orbit.csv"));
    let t = core("hyptimes", OrbitTrace::from_csv(&output::read(&path)?))?;
    let hs = hyperbolic_times(&t, k.c);
    let mut body = String::from("time\n");
    for n in &hs.times {
        let _ = writeln!(body, "{n}");
    }
    ctx.write("hyptimes.csv", &body)?;

    // running density #{n_i <= m} / m at dyadic-ish checkpoints
    let mut dens = String::from("horizon,density\n");
    let mut m = 16usize;
    while m <= hs.horizon {
        let cnt = hs.times.partition_point(|&x| x <= m);
        let _ = writeln!(dens, "{m},{:?}", cnt as f64 / m as f64);
        m *= 2;
    }
    ctx.write("hyptimes_density.csv", &dens)?;

    // backward contraction at the first hyperbolic times of the configured orbit
    let mut contr = String::from("n_i,max_ratio,violations\n");
    let mut summary = format!(
        "c = {:.9}\nhyperbolic times = {}\ndensity = {:.9}\ndensity_at_infinity = {:.9}\nd0 = {:.9}\n",
        k.c,
        hs.times.len(),
        hs.density(),
        density_at_infinity(&hs),
        k.d0
    );
    if trace.is_none() && ctx.cfg.run.probes > 0 {
        let n = ctx.cfg.run.n;
        let real = core("hyptimes", realize_noise(&ctx.model, 0, n))?;
        let x = ctx.starts(1)[0];
        let mut total = 0;
        for &ni in hs.times.iter().take(ctx.cfg.run.probes) {
            let r = core("contraction", check_backward_contraction(&real, &x, ni, k.c, k.eps0, 4))?;
            let v = r.violations(1.05);
            total += v;
            let _ = writeln!(contr, "{ni},{:?},{v}", r.max_ratio());
        }
        let _ = writeln!(summary, "contraction violations (tolerance 1.05) = {total}");
        ctx.write("contraction.csv", &contr)?;
    }
    ctx.write("hyptimes.txt", &summary)
}

fn lyapunov(ctx: &mut Ctx) -> Result<(), CliError> {
    let r = &ctx.cfg.run;
    let (n, reorth, fibers) = (r.n, r.reorth, ctx.cfg.noise.fibers as u64);
    let starts = ctx.starts(r.lyap_orbits);
    let idx: Vec<usize> = (0..starts.len()).collect();
    let model = &ctx.model;
    let rows = par_map(&idx, |&i| -> rne_core::Result<(u64, Vec<f64>, f64)> {
        let f = i as u64 % fibers;
        let real = realize_noise(model, f, n)?;
        let t = iterate(&real, &starts[i], n)?;
        let s = lyapunov_from_trace(&t, reorth)?;
        Ok((f, s.raw, birkhoff_average(&t, Channel::LogDet)))
    });
    let d = ctx.spec.dim();
    let mut body = String::from("orbit,fiber");
    for i in 1..=d {
        let _ = write!(body, ",lambda_{i}");
    }
    body.push_str(",log_det\n");
    for (i, row) in rows.into_iter().enumerate() {
        let (f, raw, ld) = core("lyapunov", row)?;
        let _ = write!(body, "{i},{f}");
        for v in raw {
            let _ = write!(body, ",{v:?}");
        }
        let _ = writeln!(body, ",{ld:?}");
    }
    ctx.write("lyapunov.csv", &body)
}

fn occupation(ctx: &mut Ctx) -> Result<(), CliError> {
    let r = &ctx.cfg.run;
    let (n, fibers) = (r.n, ctx.cfg.noise.fibers as u64);
    let starts = ctx.starts(r.starts);
    let idx: Vec<usize> = (0..starts.len()).collect();
    let model = &ctx.model;
    let rows = par_map(&idx, |&i| -> rne_core::Result<(u64, f64, f64, f64)> {
        let f = i as u64 % fibers;
        let real = realize_noise(model, f, n)?;
        let t = iterate(&real, &starts[i], n)?;
        Ok((
            f,
            occupation_fraction(&t, Region::Exceptional),
            occupation_fraction(&t, Region::V),
            expansion_exponent(&t),
        ))
    });
    let mut body = String::from("orbit,fiber,exceptional,in_v,expansion\n");
    let mut rows_ok = vec![];
    for (i, row) in rows.into_iter().enumerate() {
        let (f, e, v, x) = core("occupation", row)?;
        let _ = writeln!(body, "{i},{f},{e:?},{v:?},{x:?}");
        rows_ok.push((e, x));
    }
    ctx.write("occupation.csv", &body)?;
    let g = rows_ok.iter().map(|r| r.0).fold(0.0, f64::max);
    let (l0, l1) = ((1.0 + ctx.spec.delta0()).ln(), (1.0 + ctx.spec.delta1()).ln());
    let bound = g * l0 - (1.0 - g) * l1;
    let ok = rows_ok.iter().filter(|r| r.1 <= bound).count();
    let frac = ok as f64 / rows_ok.len().max(1) as f64;
    let text = format!(
        "gamma0_hat = {g:.9}\nexpansion bound = {bound:.9}\norbits within bound = {ok} of {}\nfraction = {frac:.6}\nmean expansion exponent = {:.9}\n",
        rows_ok.len(),
        tree_mean(&rows_ok.iter().map(|r| r.1).collect::<Vec<_>>())
    );
    ctx.write("occupation.txt", &text)
}

fn empirical(ctx: &mut Ctx) -> Result<(), CliError> {
    let mu = ctx.measure()?;
    let rep = rne_core::k_alpha_test(&mu, &ctx.spec, ctx.cfg.run.alpha);
    ctx.write("empirical.csv", &mu.to_csv())?;
    ctx.write("kalpha.txt", &rep.to_text())
}

fn partition(ctx: &Ctx) -> PartitionSpec {
    PartitionSpec::new(ctx.spec.dim(), ctx.cfg.run.partition_k)
}

fn entropy(ctx: &mut Ctx) -> Result<(), CliError> {
    let mu = ctx.measure()?;
    let part = partition(ctx);
    let e = core("entropy", random_ks_entropy(&mu, &ctx.model, &part, ctx.cfg.run.entropy_n))?;
    let mut text = format!(
        "entropy = {:.9}\nn = {}\npartition cells = {}\npartition diameter = {}\n",
        e.value,
        e.n,
        part.cells(),
        part.diameter()
    );
    if let Ok(k) = ctx.constants() {
        let _ = writeln!(text, "generating (diameter < eps0 = {:e}) = {}", k.eps0, part.below(k.eps0));
    }
    for f in &e.per_fiber {
        let _ = writeln!(text, "fiber {}: entropy = {:.9}  words = {}  atoms = {}", f.fiber, f.value, f.words, f.atoms);
    }
    ctx.write("entropy.txt", &text)
}

fn pressure_stage(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = ctx.pressure_est()?;
    ctx.write("pressure.csv", &p.to_csv())?;
    let mut text = p.to_text();
    if ctx.phi != Potential::zero() {
        let r = &ctx.cfg.run;
        let h = core(
            "pressure",
            pressure(&ctx.model, &Potential::zero(), &r.n_list, &r.eps_list, ctx.cfg.noise.fibers, r.grid_k),
        )?;
        let rho0 = match ctx.cfg.run.rho0 {
            Some(v) => v,
            None => ctx.constants()?.rho0,
        };
        for centered in [false, true] {
            let lv = core("low variation", low_variation_test(&ctx.phi, ctx.spec.dim(), p.extrapolated, h.extrapolated, rho0, centered))?;
            let _ = writeln!(
                text,
                "low variation ({}) = {}  margin = {:.9}",
                if centered { "centered" } else { "literal" },
                lv.holds,
                lv.margin
            );
        }
    }
    ctx.write("pressure.txt", &text)
}

/// The Lebesgue empirical measure, Dirac masses at `p0` and at a point off
/// the window, and the orbit measure of starts packed near `p0`.
fn candidates(ctx: &mut Ctx) -> Result<Vec<EmpiricalMeasure>, CliError> {
    let mu = ctx.measure()?;
    let d = ctx.spec.dim();
    let p0 = ctx.spec.window_center();
    let mut far = [0.0; 4];
    far[d - 1] = 1.0 / 3.0;
    let mut near: Vec<TorusPoint> = ctx.starts(ctx.cfg.run.starts);
    for x in near.iter_mut() {
        let off: Vec<f64> = x.coords().iter().map(|c| 0.02 * (c - 0.5)).collect();
        *x = p0.translate(&off, 1.0);
    }
    let r = &ctx.cfg.run;
    let packed = core(
        "equilibrium",
        empirical_measure_fibers(&ctx.model, &near, r.n.min(200) + 1, 0, ctx.cfg.noise.fibers),
    )?;
    Ok(vec![
        mu,
        EmpiricalMeasure::dirac(p0),
        EmpiricalMeasure::dirac(TorusPoint::new(&far[..d])),
        packed,
    ])
}

fn equilibrium(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = ctx.pressure_est()?;
    let cands = candidates(ctx)?;
    let r = &ctx.cfg.run;
    let opts = ScanOptions {
        n: r.entropy_n,
        alpha: r.alpha,
        pressure: Some(p.extrapolated),
        lyap_n: r.n.max(100),
        lyap_orbits: r.lyap_orbits,
        reorth: r.reorth,
    };
    let rep = core("equilibrium", equilibrium_scan(&ctx.model, &ctx.phi, &partition(ctx), &cands, &opts))?;
    ctx.write("equilibrium.csv", &rep.to_csv())?;
    let mut text = rep.to_text();
    for e in &rep.entries {
        let _ = writeln!(
            text,
            "candidate {}: ruelle slack = {:.9}  variational slack = {:.9}",
            e.id,
            e.pos_lyap - e.entropy,
            p.extrapolated - e.psi
        );
    }
    // the Dirac at p0 is where the map fails to expand
    let _ = writeln!(text, "p0 in V = {}", in_v(&ctx.spec, &ctx.spec.window_center()));
    ctx.write("equilibrium.txt", &text)
}

/// Runs one subcommand (or the whole pipeline) and returns the files written.
/// With `all`, failed hypotheses still let the pipeline run to the end and
/// are returned afterwards; infeasible constants stop it after `check`.
pub fn run_experiment(cfg: &ExperimentConfig, sub: Subcommand, out_dir: Option<&std::path::Path>, inputs: &Inputs) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.spec().map_err(CliError::Config)?;
    let model = cfg.model().map_err(CliError::Config)?;
    let dir = out_dir.map(|p| p.to_path_buf()).unwrap_or_else(|| cfg.run.output_dir.clone());
    let out = OutputDir::create(&dir, &cfg.hash())?;
    let mut ctx = Ctx {
        cfg,
        spec,
        model,
        phi: cfg.potential(),
        out,
        written: vec![],
        report: None,
        constants: None,
        measure: None,
        pressure: None,
    };
    use Subcommand::*;
    match sub {
        Check => check(&mut ctx)?,
        Orbit => orbit(&mut ctx)?,
        Pliss => {
            let args = inputs
                .pliss
                .as_ref()
                .ok_or_else(|| CliError::Usage("pliss needs --input".into()))?;
            pliss(&mut ctx, args)?
        }
        Hyptimes => {
            if inputs.trace.is_none() && !ctx.out.path("orbit.csv").exists() {
                orbit(&mut ctx)?;
            }
            hyptimes(&mut ctx, inputs.trace.as_ref())?
        }
        Lyapunov => lyapunov(&mut ctx)?,
        Occupation => occupation(&mut ctx)?,
        Empirical => empirical(&mut ctx)?,
        Pressure => pressure_stage(&mut ctx)?,
        Entropy => entropy(&mut ctx)?,
        Equilibrium => equilibrium(&mut ctx)?,
        All => {
            // a failed verdict is reported at the end; the estimators only
            // need the constants
            let verdict = check(&mut ctx);
            if let Err(e) = &verdict {
                if ctx.constants.is_none() || !matches!(e, CliError::Infeasible(_)) {
                    return verdict.map(|_| ctx.written);
                }
            }
            orbit(&mut ctx)?;
            if let Some(args) = &inputs.pliss {
                pliss(&mut ctx, args)?;
            }
            hyptimes(&mut ctx, None)?;
            lyapunov(&mut ctx)?;
            occupation(&mut ctx)?;
            empirical(&mut ctx)?;
            pressure_stage(&mut ctx)?;
            entropy(&mut ctx)?;
            equilibrium(&mut ctx)?;
            let plots = emit_plot_data(ctx.out.dir())?;
            ctx.written.extend(plots);
            verdict?;
        }
    }
    Ok(ctx.written)
}
