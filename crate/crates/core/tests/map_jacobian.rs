use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rne_core::torus::wrap_centered;
use rne_core::{MapParams, MapSpec, TorusPoint};

fn fd_jacobian(spec: &MapSpec, x: &TorusPoint, h: f64) -> Vec<Vec<f64>> {
    let d = spec.dim();
    let mut j = vec![vec![0.0; d]; d];
    for col in 0..d {
        let mut e = vec![0.0; d];
        e[col] = 1.0;
        let (p, m) = (spec.eval(&x.translate(&e, h)), spec.eval(&x.translate(&e, -h)));
        for row in 0..d {
            j[row][col] = wrap_centered(p.get(row) - m.get(row)) / (2.0 * h);
        }
    }
    j
}

fn max_rel_err(spec: &MapSpec, x: &TorusPoint) -> f64 {
    let fd = fd_jacobian(spec, x, 1e-6);
    let jac = spec.jacobian(x);
    let d = spec.dim();
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..d {
        for k in 0..d {
            err = err.max((jac.entry(i, k) - fd[i][k]).abs());
            scale = scale.max(jac.entry(i, k).abs());
        }
    }
    err / scale
}

#[test]
fn jacobian_matches_central_differences() {
    let spec = MapSpec::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let x = TorusPoint::new(&[rng.gen(), rng.gen()]);
        assert!(max_rel_err(&spec, &x) <= 1e-5, "{x:?}");
    }
    // concentrate on the deformation window
    for _ in 0..300 {
        let x = TorusPoint::new(&[rng.gen_range(-0.16..0.16), rng.gen_range(-0.24..0.24)]);
        assert!(max_rel_err(&spec, &x) <= 1e-5, "{x:?}");
    }
}

#[test]
fn determinant_closed_form() {
    let spec = MapSpec::reference();
    let p = spec.profile().unwrap();
    let b = spec.bump().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let x = TorusPoint::new(&[rng.gen_range(-0.1..0.1), rng.gen_range(-0.3..0.3)]);
        let u = spec.local(&x);
        let a = if u[0].abs() < p.eps {
            2.0 + b.at(&u[1..2]) * (p.alpha_prime(u[0]) - 2.0)
        } else {
            2.0
        };
        let closed = a * 4.0;
        let det = spec.det_jacobian(&x);
        assert!((det - closed).abs() <= 1e-10 * closed.abs(), "{det} vs {closed}");
    }
}

#[test]
fn fixed_point_is_not_expanding() {
    let spec = MapSpec::reference();
    let p0 = spec.window_center();
    assert!(spec.eval(&p0).dist(&p0) < 1e-15);
    assert!(spec.inv_norm(&p0).unwrap() > 1.0);
    assert!(spec.in_exceptional(&p0));
}

#[test]
fn linear_mode_outside_window() {
    let spec = MapSpec::reference();
    let x = TorusPoint::new(&[0.4, 0.4]);
    let y = spec.eval(&x);
    assert!((y.get(0) - 0.8).abs() < 1e-15);
    assert!((y.get(1) - 0.6).abs() < 1e-12);
    assert_eq!(spec.det_jacobian(&x), 8.0);
}

#[test]
fn invalid_specs_rejected() {
    let mut p = MapParams::reference();
    p.lambdas = vec![4.0, 2.0];
    assert!(MapSpec::new(p).is_err());
    let mut p = MapParams::reference();
    p.lambdas = vec![2.5, 4.0];
    assert!(MapSpec::new(p).is_err());
    let mut p = MapParams::reference();
    p.window_center = vec![0.3, 0.0];
    assert!(MapSpec::new(p).is_err());
}
