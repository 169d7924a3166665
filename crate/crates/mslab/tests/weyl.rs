use mslab::weyl::*;
use mslab::C64;
use num_rational::Ratio;
use proptest::prelude::*;
use std::collections::HashSet;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn wv(x: &[f64]) -> WeightVector {
    WeightVector::from_real(x).unwrap()
}

#[test]
fn rho_examples() {
    assert!(rho(2).unwrap().approx_eq(&wv(&[0.5, -0.5]), 0.0));
    assert_eq!(rho(3).unwrap().entries, vec![c(1.0), c(0.0), c(-1.0)]);
    for n in 2..=8 {
        let shifted = wv(&(0..n).map(|i| (n - i) as f64).collect::<Vec<_>>());
        assert!(rho(n).unwrap().approx_eq(&shifted, 1e-12));
    }
    assert!(rho(1).is_err());
}

#[test]
fn lambda_examples() {
    let s = C64::new(0.3, 1.7);
    let l = lambda_of_s(2, 1, s).unwrap();
    assert_eq!(l.entries, vec![c(-2.0), -s - 1.0]);
    let l = lambda_of_s(3, 1, s).unwrap();
    assert_eq!(l.entries, vec![c(-3.0), c(-2.0), -s - 1.0]);
    let l = lambda_of_s(4, 2, c(4.0)).unwrap();
    assert_eq!(l.entries, vec![c(-4.0), c(-3.0), c(-6.0), c(-5.0)]);
    assert!(lambda_of_s(4, 0, s).is_err() && lambda_of_s(4, 4, s).is_err());
}

#[test]
fn w_star_sends_lambda_n_to_minus_rho() {
    for n in 2..=6 {
        for k in 1..n {
            let w = w_star(n, k).unwrap();
            let image = act(&w, &lambda_of_s(n, k, c(n as f64)).unwrap()).unwrap();
            assert!(image.approx_eq(&rho(n).unwrap().scale(c(-1.0)), 1e-12), "n={n} k={k}");
            assert_eq!(inversion_set(&w).len(), k * (n - k));
        }
    }
    assert_eq!(w_star(2, 1).unwrap(), WeylElement::new(vec![2, 1]).unwrap());
    // the defining inequalities w(n−k+1) < … < w(n) < w(1) < … < w(n−k), filtered by brute force
    let w = w_star(4, 2).unwrap();
    let brute: Vec<_> = all_weyl(4)
        .unwrap()
        .into_iter()
        .filter(|v| v.apply(3) < v.apply(4) && v.apply(4) < v.apply(1) && v.apply(1) < v.apply(2))
        .collect();
    assert_eq!(brute, vec![w]);
}

#[test]
fn act_examples() {
    let l = WeightVector::new(vec![C64::new(0.3, 1.0), C64::new(-2.0, 0.5)]).unwrap();
    assert_eq!(act(&WeylElement::identity(2), &l).unwrap(), l);
    let t = WeylElement::new(vec![2, 1]).unwrap();
    assert_eq!(act(&t, &l).unwrap().entries, vec![l.entries[1], l.entries[0]]);
    // (wλ)_{w(i)} = λ_i
    let w = WeylElement::new(vec![3, 1, 4, 2]).unwrap();
    let l = wv(&[1.0, 2.0, 3.0, 4.0]);
    let r = act(&w, &l).unwrap();
    for i in 1..=4 {
        assert_eq!(r.entries[w.apply(i) - 1], l.entries[i - 1]);
    }
    assert!(act(&w, &rho(3).unwrap()).is_err());
}

#[test]
fn coroot_examples() {
    for n in 2..=6 {
        for j in 1..n {
            assert_eq!(coroot_pairing(j, &rho(n).unwrap()).unwrap(), c(1.0));
        }
    }
    let s = C64::new(2.2, -0.4);
    for n in 2..=6 {
        for k in 1..n {
            let l = lambda_of_s(n, k, s).unwrap();
            // −k−1 − (−s−k)
            assert!((coroot_pairing(n - k, &l).unwrap() - (s - 1.0)).norm() < 1e-14);
            for j in (1..n).filter(|&j| j != n - k) {
                assert_eq!(coroot_pairing(j, &l).unwrap().im, 0.0);
            }
        }
    }
    // λ(s) = (−3, −2, −s−1): ⟨α₁∨, λ⟩ = −3 − (−2) = −1
    assert_eq!(coroot_pairing(1, &lambda_of_s(3, 1, s).unwrap()).unwrap(), c(-1.0));
    assert!(coroot_pairing(0, &rho(3).unwrap()).is_err());
    assert!(coroot_pairing(3, &rho(3).unwrap()).is_err());
}

#[test]
fn rho_covector_examples() {
    for n in 2..=8 {
        let two_rho = rho(n).unwrap().scale(c(2.0));
        let want = (n * (n * n - 1)) as f64 / 6.0;
        assert!((rho_covector_pairing(&two_rho) - want).norm() < 1e-12);
    }
    assert_eq!(rho_covector_pairing(&rho(4).unwrap().scale(c(2.0))), c(10.0));
    assert_eq!(rho_covector_pairing(&wv(&[7.0; 5])), c(0.0));
    let rv = CoweightVector::rho_vee(4).unwrap();
    assert_eq!(rv.entries, vec![Ratio::new(3, 2), Ratio::new(1, 2), Ratio::new(-1, 2), Ratio::new(-3, 2)]);
}

#[test]
fn inversion_examples() {
    assert!(inversion_set(&WeylElement::identity(5)).is_empty());
    assert_eq!(inversion_set(&WeylElement::longest(3)), vec![(1, 2), (1, 3), (2, 3)]);
}

#[test]
fn all_weyl_counts() {
    for (n, count) in [(2usize, 2usize), (4, 24), (6, 720)] {
        let ws = all_weyl(n).unwrap();
        assert_eq!(ws.len(), count);
        let set: HashSet<Vec<usize>> = ws.iter().map(|w| w.image().to_vec()).collect();
        assert_eq!(set.len(), count);
    }
    assert_eq!(all_weyl(6).unwrap().len().pow(2), 518_400);
    assert_eq!(all_weyl(3).unwrap(), all_weyl(3).unwrap());
    assert!(all_weyl(9).is_err());
}

fn perm_strategy(n: usize) -> impl Strategy<Value = WeylElement> {
    Just((1..=n).collect::<Vec<usize>>()).prop_shuffle().prop_map(|v| WeylElement::new(v).unwrap())
}

fn weight_strategy(n: usize) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), n).prop_map(|v| WeightVector::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap())
}

fn case() -> impl Strategy<Value = (WeylElement, WeylElement, WeightVector, Vec<f64>)> {
    (2usize..=6).prop_flat_map(|n| (perm_strategy(n), perm_strategy(n), weight_strategy(n), prop::collection::vec(-3.0..3.0f64, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prop_left_action((w1, w2, l, _x) in case()) {
        let lhs = act(&w1.compose(&w2).unwrap(), &l).unwrap();
        let rhs = act(&w1, &act(&w2, &l).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(act(&w1.inverse(), &act(&w1, &l).unwrap()).unwrap(), l);
    }

    #[test]
    fn prop_duality((w, _w2, l, x) in case()) {
        // Σ (wλ)_i x_i = Σ λ_i x_{w(i)}
        let wl = act(&w, &l).unwrap();
        let a: C64 = wl.entries.iter().zip(&x).map(|(p, q)| p * q).sum();
        let b: C64 = l.entries.iter().enumerate().map(|(i, p)| p * x[w.apply(i + 1) - 1]).sum();
        prop_assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn prop_pairings((w, _w2, l, _x) in case()) {
        let n = l.n();
        let rv = CoweightVector::rho_vee(n).unwrap().as_f64();
        let direct: C64 = (1..=n).map(|i| rv[w.apply(i) - 1] * l.entries[i - 1]).sum();
        prop_assert!((rho_covector_pairing(&act(&w, &l).unwrap()) - direct).norm() < 1e-10);
        let winv = w.inverse();
        let wl = act(&w, &l).unwrap();
        for j in 1..n {
            let want = l.entries[winv.apply(j) - 1] - l.entries[winv.apply(j + 1) - 1];
            prop_assert_eq!(coroot_pairing(j, &wl).unwrap(), want);
        }
        let shifted = l.shifted(C64::new(0.7, -1.3));
        for j in 1..n {
            prop_assert!((coroot_pairing(j, &shifted).unwrap() - coroot_pairing(j, &l).unwrap()).norm() < 1e-12);
        }
        prop_assert!((rho_covector_pairing(&shifted) - rho_covector_pairing(&l)).norm() < 1e-12);
        prop_assert!(l.canonical().entries.iter().sum::<C64>().norm() <= 1e-12);
    }

    #[test]
    fn prop_length_subadditive((w1, w2, _l, _x) in case()) {
        let l12 = inversion_set(&w1.compose(&w2).unwrap()).len();
        prop_assert!(l12 <= inversion_set(&w1).len() + inversion_set(&w2).len());
        prop_assert_eq!(w1.length(), inversion_set(&w1).len());
    }
}
