use mslab::mellin::*;
use mslab::numerics::quad::{adaptive, QuadOptions};
use mslab::C64;
use proptest::prelude::*;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// f_{[N1,N2],δ}(x) by direct quadrature of the bump, without the CDF table.
fn convolved_oracle(n1: f64, n2: f64, delta: f64, x: f64) -> f64 {
    // ∫ h_A(x e^{−u}) B_δ(u) du over x e^{−u} ∈ (N1, N2]
    let hi = (x / n1.max(1e-300)).ln().min(delta);
    let lo = (x / n2).ln().max(-delta);
    if lo >= hi {
        return 0.0;
    }
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, ..Default::default() };
    let f = |u: f64| c(bump(u / delta) / delta);
    adaptive(&f, lo, hi, &opts).unwrap().value.re
}

/// ∫₀^∞ f(x)x^{s−1}dx with x = e^u; the flat part below N·e^{−δ} is done in closed form.
fn mellin_oracle(n2: f64, delta: f64, s: C64) -> C64 {
    let a = n2.ln() - delta;
    let b = n2.ln() + delta;
    let flat = (s * a).exp() / s;
    let f = |u: f64| (s * u).exp() * convolved_oracle(0.0, n2, delta, u.exp());
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, initial_panels: 16, ..Default::default() };
    flat + adaptive(&f, a, b, &opts).unwrap().value
}

#[test]
fn sharp_mellin_is_exact() {
    for n in 2..=5 {
        for big_n in [2.0, 10.0, 37.5] {
            let v = TestFunction::sharp(big_n).unwrap().mellin(c(n as f64)).unwrap();
            let exact = f64::powi(big_n, n) / n as f64;
            assert!((v.re - exact).abs() <= 1e-14 * exact && v.im == 0.0);
        }
    }
    assert_eq!(TestFunction::sharp(10.0).unwrap().mellin(c(3.0)).unwrap().re, 1000.0 / 3.0);
}

#[test]
fn bump_mellin_near_one() {
    for cc in [0.5, 1.0, 2.0, 3.0, 4.0, 5.0] {
        for delta in [0.01, 0.05, 0.1, 0.2, 0.3] {
            let v = TestFunction::bump(delta).unwrap().mellin(c(cc)).unwrap();
            assert!((v - 1.0).norm() <= 2.0 * cc * delta, "c={cc} delta={delta} v={v}");
        }
    }
    let v = TestFunction::bump(0.01).unwrap().mellin(c(3.0)).unwrap();
    assert!((v - 1.0).norm() <= 0.05);
}

#[test]
fn bump_mellin_rate_in_delta() {
    // Mβ_δ(c) − 1 is even in δ (σ is even), so the deviation shrinks like δ²
    let ds = [0.1, 0.05, 0.025];
    let dev: Vec<f64> = ds.iter().map(|&d| (TestFunction::bump(d).unwrap().mellin(c(3.0)).unwrap() - 1.0).norm()).collect();
    let slope = mslab::numerics::fit::loglog_slope(&ds, &dev);
    assert!(slope >= 1.0 - 0.05, "slope {slope}");
}

#[test]
fn window_bound() {
    let grid: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.5).collect();
    let r = mellin_window_bound_check(10.0, 10.3, 3.0, &grid).unwrap();
    assert!(r <= 10.0, "ratio {r}");
    let r0 = mellin_window_bound_check(0.0, 7.0, 2.0, &grid).unwrap();
    assert!((r0 - 1.0).abs() < 1e-14);
    assert!(mellin_window_bound_check(10.0, 20.0, 3.0, &grid).is_err());
    assert!(mellin_window_bound_check(1.0, 1.1, 0.5, &grid).is_err());
    // decay along the grid
    let far = mellin_window_bound_check(10.0, 10.3, 3.0, &[1e4]).unwrap();
    assert!(far < 0.01);
}

#[test]
fn multiplicativity_against_quadrature() {
    let f = TestFunction::smoothed_upto(5.0, 0.05).unwrap();
    let s = C64::new(3.0, 2.0);
    let v = f.mellin(s).unwrap();
    let o = mellin_oracle(5.0, 0.05, s);
    assert!((v - o).norm() <= 1e-6 * v.norm(), "{v} vs {o}");
}

#[test]
fn smoothed_eval_matches_convolution() {
    for &(n1, n2, d) in &[(0.0, 5.0, 0.1), (2.0, 3.0, 0.05), (1.0, 9.0, 0.3)] {
        let f = TestFunction::smoothed(n1, n2, d).unwrap();
        for i in 0..60 {
            let x = 0.2 + 0.17 * i as f64;
            let a = f.eval(x);
            let b = convolved_oracle(n1, n2, d, x);
            assert!((a - b).abs() < 1e-10, "x={x} {a} vs {b}");
        }
    }
}

#[test]
fn sandwich_pointwise() {
    for p in [3.0, 10.0, 50.0] {
        for d in [0.05, 0.2] {
            let lo = TestFunction::smoothed_upto(p * f64::exp(-d), d).unwrap();
            let hi = TestFunction::smoothed_upto(p * f64::exp(d), d).unwrap();
            let h = TestFunction::sharp(p).unwrap();
            for i in 0..400 {
                let x = p * (0.5 + i as f64 / 200.0);
                assert!(lo.eval(x) <= h.eval(x) + 1e-15 && h.eval(x) <= hi.eval(x) + 1e-15, "p={p} d={d} x={x}");
            }
        }
    }
}

#[test]
fn fourier_decay_profile() {
    for t in [50.0, 100.0, 200.0, 400.0] {
        let v = bump_fourier(c(t)).norm();
        let scaled = v * f64::powf(t, 0.75) * t.sqrt().exp();
        assert!(scaled < 10.0, "t={t} scaled={scaled}");
        assert!(bump_fourier_majorant(c(t)) >= v);
    }
}

#[test]
fn mellin_rapid_decay() {
    let f = TestFunction::smoothed_upto(10.0, 0.5).unwrap();
    let ts = [10.0, 25.0, 50.0, 100.0, 200.0];
    let m: Vec<f64> = ts.iter().map(|&t| f.mellin_majorant(C64::new(2.0, t))).collect();
    // local log-log exponents keep steepening
    let local: Vec<f64> = (0..ts.len() - 1).map(|i| (m[i + 1] / m[i]).ln() / (ts[i + 1] / ts[i]).ln()).collect();
    for w in local.windows(2) {
        assert!(w[1] < w[0], "{local:?}");
    }
    for (&t, &mj) in ts.iter().zip(&m) {
        assert!(f.mellin(C64::new(2.0, t)).unwrap().norm() <= mj);
    }
}

#[test]
fn saddle_single_segment_converges() {
    // the complex contribution of one saddle approaches its main term like k^{-1/2}
    let rows: Vec<SaddleRow> = [100.0, 400.0, 1600.0].iter().map(|&k| saddle_row(k).unwrap()).collect();
    for w in rows.windows(2) {
        assert!(w[1].saddle_rel_error < w[0].saddle_rel_error / 1.5);
    }
    assert!(rows[0].rel_error <= 0.5);
    assert!(rows[2].rel_error <= 0.2);
    assert!(saddle_asymptotic(5.0).is_err());
    // F is real and 2·Re of the segment
    for k in [100.0, 400.0] {
        assert!((saddle_quadrature(k) - 2.0 * saddle_segment(k).re).abs() < 1e-9 * saddle_quadrature(k).abs());
    }
}

#[test]
fn saddle_even_in_k() {
    for k in [12.0, 37.0, 100.0] {
        assert!((bump_fourier(c(-k)) - bump_fourier(c(k)).conj()).norm() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_fourier_reality(x in -40.0f64..40.0, y in -3.0f64..3.0) {
        let z = C64::new(x, y);
        let a = bump_fourier(-z.conj());
        let b = bump_fourier(z).conj();
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
    }

    #[test]
    fn prop_multiplicative(n2 in 2.0f64..8.0, d in 0.05f64..0.5, t in -6.0f64..6.0) {
        let s = C64::new(2.5, t);
        let v = TestFunction::smoothed_upto(n2, d).unwrap().mellin(s).unwrap();
        let o = mellin_oracle(n2, d, s);
        prop_assert!((v - o).norm() <= 1e-6 * TestFunction::sharp(n2).unwrap().mellin(s).unwrap().norm());
    }
}
