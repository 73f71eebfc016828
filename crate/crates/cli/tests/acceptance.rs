//! Acceptance run: one PASS/FAIL line per criterion, then a summary.
//!
//! The binary exits non-zero if a criterion fails for any reason other than
//! the one recorded as out of reach (the H3 oscillation clause on the
//! reference spec, which is checked to fail for exactly that reason).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rne_cli::{load_config, run_experiment, Inputs, Subcommand};
use rne_core::hypotheses::{check_hypotheses, derive_constants};
use rne_core::pliss::{check_backward_contraction, hyperbolic_times, pliss_times, pliss_zeta, PlissProblem};
use rne_core::thermo::{pressure, random_ks_entropy, PartitionSpec, Potential, TrigTerm};
use rne_core::torus::wrap_centered;
use rne_core::{
    birkhoff_average, empirical_measure_fibers, equilibrium_scan, expansion_exponent, iterate, lebesgue_starts, lyapunov_from_trace,
    lyapunov_spectrum, occupation_fraction, realize_noise, Channel, EmpiricalMeasure, MapParams, MapSpec, NoiseModel, PerturbationLaw,
    Region, ScanOptions, TorusPoint,
};

struct Outcome {
    pass: bool,
    detail: String,
    /// Failure matches the recorded infeasibility analysis.
    expected_failure: bool,
}

fn ok(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        detail,
        expected_failure: false,
    }
}

fn reference_noise(seed: u64) -> NoiseModel {
    NoiseModel::new(MapSpec::reference(), PerturbationLaw::IidUniform { magnitude: 0.002 }, seed).unwrap()
}

fn doubling() -> NoiseModel {
    NoiseModel::deterministic(MapSpec::new(MapParams::doubling()).unwrap())
}

fn brute_pliss(a: &[f64], c1: f64) -> Vec<usize> {
    (1..=a.len())
        .filter(|&i| (0..i).all(|n| a[n..i].iter().sum::<f64>() >= c1 * (i - n) as f64 - 1e-9))
        .collect()
}

fn pliss_walk(prefix: &mut Vec<f64>, len: usize, stats: &mut (usize, usize)) {
    let sum: f64 = prefix.iter().sum();
    if prefix.len() == len {
        if sum < 1.5 * (len as f64) {
            return;
        }
        let prob = PlissProblem {
            a: prefix.clone(),
            cap_a: 2.0,
            c1: 1.0,
            c2: 1.5,
        };
        let good = match pliss_times(&prob) {
            Ok(t) => t == brute_pliss(prefix, 1.0) && t.len() as f64 > 0.5 * len as f64,
            Err(_) => false,
        };
        stats.0 += 1;
        stats.1 += (!good) as usize;
        return;
    }
    if sum + 2.0 * ((len - prefix.len()) as f64) < 1.5 * (len as f64) {
        return;
    }
    for v in [0.0, 0.5, 1.0, 1.5, 2.0] {
        prefix.push(v);
        pliss_walk(prefix, len, stats);
        prefix.pop();
    }
}

fn criterion_1() -> Outcome {
    let mut stats = (0, 0);
    for len in 1..=12 {
        pliss_walk(&mut vec![], len, &mut stats);
    }
    let zeta = pliss_zeta(2.0, 1.0, 1.5);
    ok(
        stats.1 == 0 && zeta == 0.5,
        format!("{} admissible sequences, {} mismatches, zeta = {zeta}", stats.0, stats.1),
    )
}

fn criterion_2() -> Outcome {
    let spec = MapSpec::reference();
    let prof = spec.profile().unwrap();
    let bump = spec.bump().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-6;
    let (mut worst_fd, mut worst_det) = (0.0f64, 0.0f64);
    for i in 0..2000 {
        // the second half samples the deformation window
        let x = if i < 1000 {
            TorusPoint::new(&[rng.gen(), rng.gen()])
        } else {
            TorusPoint::new(&[rng.gen_range(-0.16..0.16), rng.gen_range(-0.24..0.24)])
        };
        let jac = spec.jacobian(&x);
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for col in 0..2 {
            let mut e = [0.0; 2];
            e[col] = 1.0;
            let (p, m) = (spec.eval(&x.translate(&e, h)), spec.eval(&x.translate(&e, -h)));
            for row in 0..2 {
                let fd = wrap_centered(p.get(row) - m.get(row)) / (2.0 * h);
                err = err.max((fd - jac.entry(row, col)).abs());
                scale = scale.max(jac.entry(row, col).abs());
            }
        }
        worst_fd = worst_fd.max(err / scale);
        let u = spec.local(&x);
        let a = if u[0].abs() < prof.eps {
            2.0 + bump.at(&u[1..2]) * (prof.alpha_prime(u[0]) - 2.0)
        } else {
            2.0
        };
        let closed = 4.0 * a;
        worst_det = worst_det.max((spec.det_jacobian(&x) - closed).abs() / closed.abs());
    }
    ok(
        worst_fd <= 1e-5 && worst_det <= 1e-10,
        format!("max relative FD error {worst_fd:.2e}, max relative det error {worst_det:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let spec = MapSpec::reference();
    let rep = check_hypotheses(&spec, 1024).unwrap();
    let k = derive_constants(&spec, &rep, 0.42, 0.58);
    let verdict = |n: &str| rep.verdict(n).map(|v| v.pass).unwrap_or(false);
    let (h1, h2, h3) = (verdict("H1"), verdict("H2"), verdict("H3"));
    let s = &rep.stats;
    let osc = s.m2 - s.m1;
    let mut detail = format!(
        "H1 {} H2 {} H3 {} (m1 = {:.4}, m2 = {:.4}, M1 = {:.1}, m2 - m1 = {:.4} vs beta = {:.3})",
        if h1 { "pass" } else { "fail" },
        if h2 { "pass" } else { "fail" },
        if h3 { "pass" } else { "fail" },
        s.m1,
        s.m2,
        s.big_m1,
        osc,
        spec.beta()
    );
    match &k {
        Ok(k) => detail.push_str(&format!("; c = {:.6}, rho0 = {:.6}", k.c, k.rho0)),
        Err(e) => detail.push_str(&format!("; constants: {e}")),
    }
    let pass = h1 && h2 && h3 && k.is_ok();
    // H3 fails only on the oscillation clause: V inside W, W inside the
    // exceptional boxes and M1 > m2 all hold
    let w = rep.verdict("H3").unwrap();
    let only_osc = !h3
        && osc >= spec.beta()
        && s.big_m1 > s.m2
        && w.witness.iter().any(|(n, v)| *n == "v_outside_w_cells" && *v == 0.0);
    Outcome {
        pass,
        detail,
        expected_failure: h1 && h2 && only_osc && k.is_ok(),
    }
}

fn criterion_4() -> Outcome {
    let lin = NoiseModel::deterministic(MapSpec::new(MapParams::linear(&[2.0, 4.0])).unwrap());
    let real = realize_noise(&lin, 0, 1000).unwrap();
    let s = lyapunov_spectrum(&real, &TorusPoint::new(&[0.2718, 0.3141]), 1000, 10).unwrap();
    let lin_err = (s.raw[0] - 4f64.ln()).abs().max((s.raw[1] - 2f64.ln()).abs());
    let m = reference_noise(4);
    let mut det_err = 0.0f64;
    for (i, x) in lebesgue_starts(2, 8, 44).iter().enumerate() {
        let real = realize_noise(&m, i as u64, 1000).unwrap();
        let t = iterate(&real, x, 1000).unwrap();
        let sp = lyapunov_from_trace(&t, 10).unwrap();
        det_err = det_err.max((sp.weighted_sum() - birkhoff_average(&t, Channel::LogDet)).abs());
    }
    ok(
        lin_err <= 1e-8 && det_err <= 1e-4,
        format!("linear exponent error {lin_err:.2e}, determinant identity error {det_err:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let log2 = 2f64.ln();
    let d = pressure(&doubling(), &Potential::zero(), &[4, 8, 12], &[0.45, 0.3], 1, 16).unwrap();
    let rel_d = d.extrapolated / log2 - 1.0;
    let lin = NoiseModel::deterministic(MapSpec::new(MapParams::linear(&[2.0, 4.0])).unwrap());
    let l = pressure(&lin, &Potential::zero(), &[2, 3, 4], &[0.3, 0.24], 1, 11).unwrap();
    let rel_l = l.extrapolated / 8f64.ln() - 1.0;
    let phi = Potential::trig(
        vec![TrigTerm {
            amplitude: 0.4,
            freq: [1, 1, 0, 0],
            phase: 0.3,
        }],
        0.25,
    );
    let m = reference_noise(5);
    let c0 = 2.5;
    let a = pressure(&m, &phi, &[1, 2, 3], &[0.3, 0.24], 2, 9).unwrap();
    let b = pressure(&m, &phi.plus_constant(c0), &[1, 2, 3], &[0.3, 0.24], 2, 9).unwrap();
    let shift_err = a
        .per_scale
        .iter()
        .zip(&b.per_scale)
        .map(|(x, y)| (y.value - x.value - c0).abs())
        .fold(0.0, f64::max);
    ok(
        rel_d.abs() <= 0.05 && rel_l.abs() <= 0.05 && shift_err <= 1e-12,
        format!("doubling {:.6} ({rel_d:+.4}), linear (2,4) {:.6} ({rel_l:+.4}), shift error {shift_err:.1e}", d.extrapolated, l.extrapolated),
    )
}

fn criterion_6() -> Outcome {
    let m = doubling();
    let mu = empirical_measure_fibers(&m, &lebesgue_starts(1, 100_000, 6), 1, 0, 1).unwrap();
    let e = random_ks_entropy(&mu, &m, &PartitionSpec::new(1, 1), 10).unwrap();
    let rel = e.value / 2f64.ln() - 1.0;
    let dirac = [0.0, 0.3, 0.77]
        .iter()
        .map(|&x| random_ks_entropy(&EmpiricalMeasure::dirac(TorusPoint::new(&[x])), &m, &PartitionSpec::new(1, 1), 10).unwrap().value)
        .collect::<Vec<_>>();
    ok(
        rel.abs() <= 0.1 && dirac.iter().all(|&v| v == 0.0),
        format!("h = {:.6} ({rel:+.4}), dirac values {dirac:?}", e.value),
    )
}

fn check_scan(name: &str, m: &NoiseModel, phi: &Potential, n_list: &[usize], eps: &[f64], k: u32, part: PartitionSpec, cands: &[EmpiricalMeasure], n: usize) -> (bool, String) {
    let p = pressure(m, phi, n_list, eps, 1.max(m.dim() - 1), k).unwrap();
    let opts = ScanOptions {
        n,
        pressure: Some(p.extrapolated),
        lyap_n: 500,
        lyap_orbits: 4,
        ..ScanOptions::default()
    };
    let rep = equilibrium_scan(m, phi, &part, cands, &opts).unwrap();
    let var = rep.entries.iter().map(|e| e.psi - p.extrapolated).fold(f64::NEG_INFINITY, f64::max);
    let ruelle = rep.entries.iter().map(|e| e.entropy - e.pos_lyap).fold(f64::NEG_INFINITY, f64::max);
    (
        var <= 0.05 && ruelle <= 0.05,
        format!("{name}: max psi - pressure {var:+.4}, max h - sum of positive exponents {ruelle:+.4}"),
    )
}

fn criterion_7() -> Outcome {
    let cos = |a: f64| {
        Potential::trig(
            vec![TrigTerm {
                amplitude: a,
                freq: [1, 0, 0, 0],
                phase: 0.0,
            }],
            0.0,
        )
    };
    let d = doubling();
    let leb = empirical_measure_fibers(&d, &lebesgue_starts(1, 20_000, 7), 1, 0, 1).unwrap();
    let per2: Vec<_> = (0..20).map(|i| (0, 0, TorusPoint::new(&[(1 + i % 2) as f64 / 3.0]), 0.05)).collect();
    let per2 = EmpiricalMeasure::from_atoms(1, &per2, leb.meta.clone()).unwrap();
    let dcands = vec![leb, EmpiricalMeasure::dirac(TorusPoint::new(&[0.0])), per2];
    let (p1, t1) = check_scan("doubling", &d, &cos(0.1), &[4, 8, 12], &[0.45, 0.3], 16, PartitionSpec::new(1, 1), &dcands, 8);

    let m = reference_noise(7);
    let starts = lebesgue_starts(2, 64, 8);
    let leb2 = empirical_measure_fibers(&m, &starts, 600, 100, 2).unwrap();
    let near: Vec<TorusPoint> = starts.iter().map(|x| TorusPoint::new(&[0.02 * (x.get(0) - 0.5), 0.02 * (x.get(1) - 0.5)])).collect();
    let packed = empirical_measure_fibers(&m, &near, 201, 0, 2).unwrap();
    let rcands = vec![
        leb2,
        EmpiricalMeasure::dirac(TorusPoint::new(&[0.0, 0.0])),
        EmpiricalMeasure::dirac(TorusPoint::new(&[0.0, 1.0 / 3.0])),
        packed,
    ];
    let phi = Potential::trig(
        vec![TrigTerm {
            amplitude: 0.2,
            freq: [1, 1, 0, 0],
            phase: 0.0,
        }],
        0.0,
    );
    let (p2, t2) = check_scan("reference", &m, &phi, &[2, 3, 4], &[0.3, 0.24], 10, PartitionSpec::new(2, 1), &rcands, 4);
    ok(p1 && p2, format!("{t1}; {t2}"))
}

fn criterion_8() -> Outcome {
    let spec = MapSpec::reference();
    let rep = check_hypotheses(&spec, 1024).unwrap();
    let k = derive_constants(&spec, &rep, 0.42, 0.58).unwrap();
    let m = reference_noise(8);
    // a probe starts about eps0 * 4^-n_i away, so beyond this n_i the
    // perturbation falls under double-precision resolution
    let n_res = ((k.eps0 / (64.0 * f64::EPSILON)).ln() / 4f64.ln()).floor() as usize;
    let (mut sampled, mut violations, mut worst) = (0usize, 0usize, 0.0f64);
    for (i, x) in lebesgue_starts(2, 16, 88).iter().enumerate() {
        let real = realize_noise(&m, i as u64, 400).unwrap();
        let t = iterate(&real, x, 400).unwrap();
        let hs = hyperbolic_times(&t, k.c);
        for &ni in hs.times.iter().filter(|&&n| n <= n_res).take(8) {
            let r = check_backward_contraction(&real, x, ni, k.c, k.eps0, 4).unwrap();
            sampled += 1;
            violations += r.violations(1.05);
            worst = worst.max(r.max_ratio());
        }
    }
    ok(
        sampled >= 100 && violations == 0,
        format!("{sampled} hyperbolic times up to n = {n_res}, {violations} violations, worst ratio {worst:.4}"),
    )
}

fn criterion_9() -> Outcome {
    let m = reference_noise(9);
    let (l0, l1) = (0.05f64.ln_1p(), 0.1f64.ln_1p());
    let starts = lebesgue_starts(2, 1000, 99);
    let idx: Vec<usize> = (0..starts.len()).collect();
    let rows = rne_core::reduce::par_map(&idx, |&i| {
        let real = realize_noise(&m, i as u64, 10_000).unwrap();
        let t = iterate(&real, &starts[i], 10_000).unwrap();
        (occupation_fraction(&t, Region::Exceptional), expansion_exponent(&t))
    });
    let g = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let bound = g * l0 - (1.0 - g) * l1;
    let within = rows.iter().filter(|r| r.1 <= bound).count();
    ok(
        g < 1.0 && within as f64 >= 0.95 * rows.len() as f64,
        format!("gamma0_hat = {g:.4}, bound = {bound:.5}, {within} of {} orbits within", rows.len()),
    )
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.ini");
    let cfg = load_config(&cfg_path, None).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut outs = vec![];
    for threads in [1usize, 8] {
        let dir = tmp.path().join(format!("t{threads}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        // the reference spec exits 2 (H3) after writing every file
        let r = pool.install(|| run_experiment(&cfg, Subcommand::All, Some(&dir), &Inputs::default()));
        if let Err(e) = &r {
            if e.exit_code() != 2 {
                return ok(false, format!("run at {threads} threads failed: {e}"));
            }
        }
        outs.push(read_dir(&dir));
    }
    let same = outs[0] == outs[1];
    let diff: Vec<&String> = outs[0].keys().filter(|k| outs[0].get(*k) != outs[1].get(*k)).collect();
    ok(
        same && outs[0].len() >= 15,
        format!("{} files, identical at 1 and 8 threads: {same} {diff:?}", outs[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("pliss oracle equivalence", criterion_1, Duration::from_secs(60)),
        ("jacobian correctness", criterion_2, Duration::from_secs(10)),
        ("hypothesis verification", criterion_3, Duration::from_secs(120)),
        ("lyapunov exactness", criterion_4, Duration::from_secs(10)),
        ("pressure baselines", criterion_5, Duration::from_secs(300)),
        ("entropy baseline", criterion_6, Duration::from_secs(60)),
        ("variational and ruelle inequalities", criterion_7, Duration::from_secs(300)),
        ("hyperbolic-time contraction", criterion_8, Duration::from_secs(300)),
        ("occupation and expansion bound", criterion_9, Duration::from_secs(600)),
        ("determinism", criterion_10, Duration::from_secs(900)),
    ];
    let mut out = std::io::stdout().lock();
    let mut unexpected = 0;
    let mut passed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let el = t.elapsed();
        let in_time = el <= *budget;
        let pass = o.pass && in_time;
        passed += pass as usize;
        if !pass && !(o.expected_failure && in_time) {
            unexpected += 1;
        }
        let _ = writeln!(
            out,
            "criterion {:>2} {}: {} [{:.1}s of {}s] {}{}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            el.as_secs_f64(),
            budget.as_secs(),
            o.detail,
            if !pass && o.expected_failure { " (known infeasible, see decisions)" } else { "" }
        );
        let _ = out.flush();
    }
    let _ = writeln!(out, "{passed} of {} criteria pass, {unexpected} unexpected failures", criteria.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
