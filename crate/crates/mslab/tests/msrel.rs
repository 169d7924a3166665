use mslab::msrel::*;
use mslab::numerics::fit::loglog_slope;
use mslab::weyl::*;
use mslab::xifunc::{total_volume, xi_nk};
use mslab::C64;
use std::f64::consts::PI;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn tr(t: f64) -> TruncationParam {
    TruncationParam::new(t).unwrap()
}

fn vol(n: usize, t: f64) -> f64 {
    truncated_volume(n, &tr(t), &SumOptions::default()).unwrap().value
}

#[test]
fn truncation_param() {
    let p = tr(10.0);
    assert!((p.log_t() - 10f64.ln()).abs() < 1e-15);
    let cv = p.c_vector(3);
    assert!((cv[0] - 10f64.ln()).abs() < 1e-15 && cv[1] == 0.0 && (cv[2] + 10f64.ln()).abs() < 1e-15);
    assert!(TruncationParam::new(1.0).is_err() && TruncationParam::new(0.5).is_err());
}

#[test]
fn ms_term_n2_by_hand() {
    // Ĩ(id,id) = T^{⟨ρ∨,λ₁+λ₂⟩}/⟨α∨,λ₁+λ₂⟩ with ρ∨ = (½,−½)
    let l1 = WeightVector::new(vec![C64::new(0.4, 0.3), C64::new(-1.1, 0.0)]).unwrap();
    let l2 = WeightVector::new(vec![C64::new(1.7, -0.2), C64::new(0.2, 0.5)]).unwrap();
    let t = 10.0;
    let id = WeylElement::identity(2);
    let term = ms_term(&id, &id, &l1, &l2, &tr(t)).unwrap();
    let a = l1.entries[0] + l2.entries[0];
    let b = l1.entries[1] + l2.entries[1];
    let expo = 0.5 * (a - b);
    let hand = (expo * t.ln()).exp() / (a - b);
    assert!((term.value - hand).norm() < 1e-13 * hand.norm());
    assert!((term.t_exponent - expo).norm() < 1e-15);
    assert_eq!(term.net_order, 0);
    assert!((term.magnitude_logsum(&tr(t)) / term.value.norm() - 1.0).abs() < 1e-9);
}

#[test]
fn ms_term_t_exponent_is_rho_vee_pairing() {
    let l1 = WeightVector::new(vec![C64::new(0.6, 1.3), C64::new(-0.4, 0.2), C64::new(1.1, -0.5)]).unwrap();
    let l2 = WeightVector::new(vec![C64::new(2.2, -0.8), C64::new(0.3, 0.6), C64::new(-1.7, 0.1)]).unwrap();
    let ws = all_weyl(3).unwrap();
    for w1 in &ws {
        for w2 in &ws {
            let term = ms_term(w1, w2, &l1, &l2, &tr(7.0)).unwrap();
            let sum = act(w1, &l1).unwrap().add(&act(w2, &l2).unwrap()).unwrap();
            assert!((term.t_exponent - rho_covector_pairing(&sum)).norm() < 1e-13);
            if term.value != c(0.0) {
                assert!((term.magnitude_logsum(&tr(7.0)) / term.value.norm() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn within_block_violation_vanishes() {
    // λ₂ = (−3, −2, −s−1): swapping the first block pairs c(−1) = 0
    let l1 = WeightVector::new(vec![C64::new(0.3, 0.2), C64::new(-0.9, 0.1), C64::new(1.4, -0.6)]).unwrap();
    let l2 = lambda_of_s(3, 1, C64::new(2.4, 0.9)).unwrap();
    let w2 = WeylElement::new(vec![2, 1, 3]).unwrap();
    let term = ms_term(&WeylElement::identity(3), &w2, &l1, &l2, &tr(5.0)).unwrap();
    assert_eq!(term.value, c(0.0));
    assert!(term.m2.zero_order >= 1);
}

#[test]
fn ms_sum_symmetry_and_schedule() {
    let t = tr(10.0);
    let l1 = WeightVector::from_real(&[0.71, -0.53, -1.9]).unwrap();
    let l2 = WeightVector::from_real(&[1.93, 0.27, -0.98]).unwrap();
    let a = ms_sum(&l1, &l2, &t, &DEFAULT_SCHEDULE).unwrap();
    let b = ms_sum(&l2, &l1, &t, &DEFAULT_SCHEDULE).unwrap();
    assert!((a.value - b.value).norm() < 1e-8 * a.value.norm());
    let half: Vec<f64> = DEFAULT_SCHEDULE.iter().map(|e| e / 2.0).collect();
    let h = ms_sum(&l1, &l2, &t, &half).unwrap();
    assert!((a.value - h.value).norm() < 1e-8 * a.value.norm());
    assert!(ms_sum(&WeightVector::from_real(&[0.0; 7]).unwrap(), &WeightVector::from_real(&[0.0; 7]).unwrap(), &t, &DEFAULT_SCHEDULE).is_err());
}

#[test]
fn ms_sum_dominant_exponent() {
    // at large T the sum grows like T^{max ⟨ρ∨, w₁λ₁+w₂λ₂⟩}
    // exponent gaps of at least 1.5 keep the subdominant terms out of the fit
    let l1 = WeightVector::from_real(&[2.1, 0.05, -2.15]).unwrap();
    let l2 = WeightVector::from_real(&[1.45, -0.1, -1.35]).unwrap();
    let ws = all_weyl(3).unwrap();
    let mut top = f64::NEG_INFINITY;
    for w1 in &ws {
        for w2 in &ws {
            let sum = act(w1, &l1).unwrap().add(&act(w2, &l2).unwrap()).unwrap();
            top = top.max(rho_covector_pairing(&sum).re);
        }
    }
    // regular λ: a finer schedule keeps ε·log T small at large T
    let schedule = [1e-5, 5e-6, 2.5e-6];
    let ts = [1e2, 1e3, 1e4];
    let v: Vec<f64> = ts.iter().map(|&t| ms_sum(&l1, &l2, &tr(t), &schedule).unwrap().value.norm()).collect();
    let slope = loglog_slope(&ts, &v);
    assert!((slope - top).abs() < 0.05, "slope {slope} vs {top}");
}

#[test]
fn volume_examples() {
    let v = vol(2, 100.0);
    assert!((v - 0.5185988).abs() < 1e-6);
    assert!((v - (PI / 6.0 - 0.005)).abs() < 1e-12);
    assert!((vol(2, 1e8) - total_volume(2).unwrap()).abs() < 1e-8);
    let ts = [10.0, 100.0, 1e3, 1e4];
    let d: Vec<f64> = ts.iter().map(|&t| total_volume(3).unwrap() - vol(3, t)).collect();
    assert!((loglog_slope(&ts, &d) + 3.0).abs() < 0.1);
}

#[test]
fn volume_monotone_and_bounded() {
    for n in 2..=5 {
        let mut prev = 0.0;
        for t in [3.0, 10.0, 30.0, 100.0, 1e3] {
            let v = vol(n, t);
            assert!(v >= prev && v < total_volume(n).unwrap(), "n={n} T={t}");
            prev = v;
        }
    }
}

#[test]
fn volume_direction_independent() {
    for n in 3..=5 {
        let t = tr(20.0);
        let a = truncated_volume(n, &t, &SumOptions::default()).unwrap().value;
        let b = truncated_volume_along(n, &t, &generic_direction(n), &SumOptions::default()).unwrap().value;
        assert!((a - b).abs() < 1e-7 * a, "n={n}");
    }
}

#[test]
fn residue_bundle_examples() {
    let t = tr(50.0);
    let v = residue_bundle_at_n(2, 1, &t, &DEFAULT_SCHEDULE).unwrap().integral / C64::new(0.0, 2.0 * PI);
    let want = xi_nk(2, 1).unwrap() * vol(2, 50.0);
    assert!((v - c(want)).norm() < 1e-6 * want);
    let a = residue_bundle_at_n(3, 1, &t, &DEFAULT_SCHEDULE).unwrap().integral;
    let half: Vec<f64> = DEFAULT_SCHEDULE.iter().map(|e| e / 2.0).collect();
    let b = residue_bundle_at_n(3, 1, &t, &half).unwrap().integral;
    assert!((a - b).norm() < 1e-6 * a.norm());
    // two extraction methods
    for (n, k) in [(2usize, 1usize), (3, 1)] {
        let bundle = residue_bundle_at_n(n, k, &t, &DEFAULT_SCHEDULE).unwrap().integral;
        let limit = residue_at_n_limit(n, k, &t).unwrap();
        assert!((bundle - limit).norm() < 1e-7 * limit.norm(), "n={n}");
    }
}

#[test]
fn permissible_examples() {
    for n in 2..=7 {
        let p = permissible_perms(n).unwrap();
        assert_eq!(p.len(), 1 << (n - 1));
        assert!(p.iter().any(|w| w.is_identity()));
        // brute-force definition: every descent is a unit descent
        let brute: Vec<_> = all_weyl(n)
            .unwrap()
            .into_iter()
            .filter(|w| (1..n).all(|h| w.apply(h + 1) > w.apply(h) || w.apply(h + 1) + 1 == w.apply(h)))
            .collect();
        assert_eq!(brute.len(), p.len());
        assert!(brute.iter().all(|w| p.contains(w)));
        let (a, b) = subleading_elements(n).unwrap();
        assert!(p.contains(&a) && p.contains(&b));
    }
    let (a, b) = subleading_elements(4).unwrap();
    assert_eq!(a.image(), &[3, 2, 1, 4]);
    assert_eq!(b.image(), &[1, 4, 3, 2]);
}

#[test]
fn subleading_examples() {
    // n = 3: equal, and their sum scales like T^{−3}
    let scaled: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&t| {
            let (a, b) = subleading_volume_terms(3, &tr(t)).unwrap();
            assert!((a - b).norm() <= 1e-8 * a.norm());
            (a + b).re * t.powi(3)
        })
        .collect();
    // stable up to the log T factor a double pole would bring
    let ratio = scaled[2] / scaled[0];
    assert!(ratio.abs() < 10.0 && ratio > 0.0, "{scaled:?}");
    let (a, b) = subleading_volume_terms(2, &tr(10.0)).unwrap();
    assert_eq!(a, b);
    assert!((a.re + 0.5 / 10.0).abs() < 1e-14);
    let ts = [10.0, 100.0, 1000.0];
    let v: Vec<f64> = ts.iter().map(|&t| subleading_volume_terms(4, &tr(t)).unwrap().0.norm()).collect();
    assert!((loglog_slope(&ts, &v) + 6.0).abs() < 0.3);
}
