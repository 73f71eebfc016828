use proptest::prelude::*;
use rne_core::pliss::{pliss_times, pliss_zeta, window_times, PlissProblem};

/// Indices `i` (1-based) with `sum_{j=n+1}^{i} a_j >= c1 (i - n)` for all `n < i`.
fn brute(a: &[f64], c1: f64) -> Vec<usize> {
    (1..=a.len())
        .filter(|&i| (0..i).all(|n| a[n..i].iter().sum::<f64>() >= c1 * (i - n) as f64 - 1e-9))
        .collect()
}

fn visit(prefix: &mut Vec<f64>, len: usize, checked: &mut usize) {
    if prefix.len() == len {
        let n = len as f64;
        if prefix.iter().sum::<f64>() < 1.5 * n {
            return;
        }
        let prob = PlissProblem {
            a: prefix.clone(),
            cap_a: 2.0,
            c1: 1.0,
            c2: 1.5,
        };
        let got = pliss_times(&prob).unwrap();
        assert_eq!(got, brute(prefix, 1.0), "{prefix:?}");
        assert!(got.len() as f64 > 0.5 * n);
        *checked += 1;
        return;
    }
    // prune: even all-2 tails cannot reach the mean
    let rest = (len - prefix.len()) as f64;
    if prefix.iter().sum::<f64>() + 2.0 * rest < 1.5 * len as f64 {
        return;
    }
    for v in [0.0, 0.5, 1.0, 1.5, 2.0] {
        prefix.push(v);
        visit(prefix, len, checked);
        prefix.pop();
    }
}

#[test]
fn exhaustive_up_to_nine() {
    let mut checked = 0;
    for len in 1..=9 {
        visit(&mut vec![], len, &mut checked);
    }
    assert!(checked > 1000);
}

#[test]
fn documented_example() {
    let prob = PlissProblem {
        a: vec![2.0, 2.0, 0.0, 2.0],
        cap_a: 2.0,
        c1: 1.0,
        c2: 1.5,
    };
    assert_eq!(pliss_times(&prob).unwrap(), vec![1, 2, 4]);
    assert_eq!(pliss_zeta(2.0, 1.0, 1.5), 0.5);
}

proptest! {
    #[test]
    fn scan_matches_brute_force(a in prop::collection::vec(-3.0f64..3.0, 0..40), c1 in 0.0f64..2.0) {
        prop_assert_eq!(window_times(&a, c1), brute(&a, c1));
    }
}
