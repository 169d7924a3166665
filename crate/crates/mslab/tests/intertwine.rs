use mslab::intertwine::*;
use mslab::msrel::circle_integral;
use mslab::weyl::*;
use mslab::xifunc::{c_fn, xi_nk, xi_real};
use mslab::C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn random_weight(n: usize, rng: &mut ChaCha8Rng) -> WeightVector {
    WeightVector::new((0..n).map(|_| C64::new(rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0))).collect()).unwrap()
}

fn random_perm(n: usize, rng: &mut ChaCha8Rng) -> WeylElement {
    let mut v: Vec<usize> = (1..=n).collect();
    v.shuffle(rng);
    WeylElement::new(v).unwrap()
}

#[test]
fn identity_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 2..=6 {
        let v = m_op(&WeylElement::identity(n), &random_weight(n, &mut rng)).unwrap();
        assert_eq!(v, IntertwiningValue::one());
    }
}

#[test]
fn w_star_near_lambda_n() {
    // λ(3) + ερ = (−3+ε, −2, −4−ε): M = c(1+2ε)c(2+ε) ≈ ξ(1+2ε)ξ(2)/(ξ(2)ξ(3))
    let e = 1e-3;
    let lam = lambda_of_s(3, 1, c(3.0)).unwrap().add(&rho(3).unwrap().scale(c(e))).unwrap();
    let v = m_op(&w_star(3, 1).unwrap(), &lam).unwrap();
    assert_eq!((v.zero_order, v.pole_order), (0, 0));
    let direct = c_fn(c(1.0 + 2.0 * e)).value * c_fn(c(2.0 + e)).value;
    assert!((v.value - direct).norm() < 1e-12 * direct.norm());
    let xi1 = 1.0 / (2.0 * e); // ξ(1+x) ≈ 1/x
    let approx = xi1 * xi_real(2.0) / (xi_real(2.0) * xi_real(3.0));
    assert!((v.value.re / approx - 1.0).abs() < 1e-2);
}

#[test]
fn residue_of_w_star_is_xi_nk() {
    for (n, k) in [(2usize, 1usize), (3, 1), (3, 2), (4, 1), (4, 2)] {
        let w = w_star(n, k).unwrap();
        let f = |s: C64| Ok(m_op(&w, &lambda_of_s(n, k, s)?)?.value);
        let res = circle_integral(&f, c(n as f64), 0.1, 64).unwrap() / C64::new(0.0, 2.0 * PI);
        let want = xi_nk(n, k).unwrap();
        assert!((res - want).norm() < 1e-9 * want, "n={n} k={k}: {res} vs {want}");
    }
}

#[test]
fn functional_equation_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let lam = random_weight(4, &mut rng);
        let (w1, w2) = (random_perm(4, &mut rng), random_perm(4, &mut rng));
        assert!(m_functional_check(&w1, &w2, &lam).unwrap() <= 1e-9);
        assert!(m_functional_check(&w1, &WeylElement::identity(4), &lam).unwrap() < 1e-14);
        assert!(m_functional_check(&w1.inverse(), &w1, &lam).unwrap() < 1e-12);
    }
    let near = WeightVector::from_real(&[0.0, -1.0 - 1e-8, 3.3]).unwrap();
    assert!(m_functional_check(&WeylElement::longest(3), &WeylElement::identity(3), &near).is_err());
}

#[test]
fn functional_equation_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut done = 0;
    while done < 500 {
        let n = rng.random_range(3..=5);
        let lam = random_weight(n, &mut rng);
        let (w1, w2) = (random_perm(n, &mut rng), random_perm(n, &mut rng));
        if let Ok(r) = m_functional_check(&w1, &w2, &lam) {
            assert!(r <= 1e-8, "n={n} residual {r}");
            done += 1;
        }
    }
}

#[test]
fn zero_order_counts_exact_minus_one_pairings() {
    let s = C64::new(2.3, 0.7);
    for n in 2..=5 {
        for k in 1..n {
            let lam = lambda_of_s(n, k, s).unwrap();
            for w in all_weyl(n).unwrap() {
                let expected = inversion_set(&w).iter().filter(|&&(i, j)| lam.entries[i - 1] - lam.entries[j - 1] == c(-1.0)).count();
                let v = m_op(&w, &lam).unwrap();
                assert_eq!(v.zero_order as usize, expected, "n={n} k={k} w={w}");
                assert_eq!(v.pole_order, 0);
            }
        }
    }
}

#[test]
fn longest_at_minus_rho() {
    // c(⟨α_ij∨, −ρ⟩) = c(i − j): the n−1 height-one roots give the zeros
    for n in 2..=6 {
        let v = m_op(&WeylElement::longest(n), &rho(n).unwrap().scale(c(-1.0))).unwrap();
        assert_eq!((v.zero_order, v.pole_order), (n as u32 - 1, 0));
        assert!(v.value.norm() > 0.0 && v.value.is_finite());
    }
}
