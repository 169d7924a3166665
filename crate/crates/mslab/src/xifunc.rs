//! Γ, ζ, the completed zeta ξ(s) = π^{−s/2}Γ(s/2)ζ(s), its entire completion
//! ξ̂(s) = s(s−1)ξ(s), and the c-function c(z) = ξ(z)/ξ(1+z).
//!
//! ζ uses Euler–Maclaurin on Re s ≥ 1/2 and the functional equation of ξ̂
//! elsewhere. Γ uses Stirling's series after an upward shift. The
//! c-function is always evaluated as ξ̂(z)(1+z)/(ξ̂(1+z)(z−1)), so its zero at
//! −1 and pole at +1 come from explicit linear factors.

use crate::error::{MsError, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// A value of ξ or c together with a pole flag. At a pole, `value` is the
/// residue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletedZetaValue {
    pub value: C64,
    pub pole_order: u32,
}

impl CompletedZetaValue {
    fn regular(value: C64) -> Self {
        CompletedZetaValue { value, pole_order: 0 }
    }
}

const EM_TERMS: usize = 20;

/// B_{2m}/(2m)! for m = 1..=EM_TERMS, via (−1)^{m+1} 2ζ(2m)/(2π)^{2m}.
fn bernoulli_ratios() -> &'static [f64; EM_TERMS + 1] {
    static CACHE: OnceLock<[f64; EM_TERMS + 1]> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut out = [0.0; EM_TERMS + 1];
        for (m, slot) in out.iter_mut().enumerate().skip(1) {
            let p = 2.0 * m as f64;
            let big_j = 1000usize;
            let mut z = 0.0;
            for j in (1..big_j).rev() {
                z += (j as f64).powf(-p);
            }
            let jf = big_j as f64;
            z += jf.powf(1.0 - p) / (p - 1.0) + 0.5 * jf.powf(-p) + p / 12.0 * jf.powf(-p - 1.0);
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            *slot = sign * 2.0 * z / (2.0 * PI).powf(p);
        }
        out
    })
}

/// π·z reduced: sin(πz) with the integer part of Re z removed exactly first.
fn sin_pi(z: C64) -> C64 {
    let r = z.re.round();
    let frac = C64::new(z.re - r, z.im);
    let s = (frac * PI).sin();
    if (r as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

/// A logarithm of Γ(z) for Re z ≥ 1/2 (branch irrelevant once exponentiated).
fn ln_gamma_right(z: C64) -> C64 {
    let mut w = z;
    let mut prod = C64::new(1.0, 0.0);
    while w.norm() < 15.0 {
        prod *= w;
        w += 1.0;
    }
    let inv = 1.0 / w;
    let inv2 = inv * inv;
    let mut series = C64::new(0.0, 0.0);
    for c in STIRLING.iter().rev() {
        series = series * inv2 + *c;
    }
    series *= inv;
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - prod.ln()
}

fn is_nonpositive_integer(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// Γ(z).
pub fn gamma_fn(z: C64) -> Result<C64> {
    if is_nonpositive_integer(z) {
        return Err(MsError::Pole(format!("Gamma at {z}")));
    }
    if z.re < 0.5 {
        let g1 = ln_gamma_right(1.0 - z).exp();
        Ok(PI / (sin_pi(z) * g1))
    } else {
        Ok(ln_gamma_right(z).exp())
    }
}

/// 1/Γ(z), entire.
pub fn rgamma(z: C64) -> C64 {
    if is_nonpositive_integer(z) {
        return C64::new(0.0, 0.0);
    }
    if z.re < 0.5 {
        sin_pi(z) * ln_gamma_right(1.0 - z).exp() / PI
    } else {
        (-ln_gamma_right(z)).exp()
    }
}

/// (s−1)ζ(s) by Euler–Maclaurin, intended for Re s ≥ 1/2.
fn zeta_times_sm1(s: C64) -> C64 {
    let b = bernoulli_ratios();
    let big_n = ((s.norm() + 2.0 * EM_TERMS as f64) / (2.0 * PI * 0.35)).ceil().max(10.0) as usize;
    let mut re = crate::numerics::sum::Neumaier::new();
    let mut im = crate::numerics::sum::Neumaier::new();
    for j in 1..big_n {
        let t = (-s * (j as f64).ln()).exp();
        re.add(t.re);
        im.add(t.im);
    }
    let head = C64::new(re.value(), im.value());
    let nf = big_n as f64;
    let n_ms = (-s * nf.ln()).exp();
    let mut tail = 0.5 * n_ms;
    let mut poch = s;
    let mut npow = n_ms / nf;
    for (m, bm) in b.iter().enumerate().skip(1) {
        let term = poch * npow * *bm;
        tail += term;
        if term.norm() < 1e-18 * (head + tail).norm() {
            break;
        }
        let m2 = 2.0 * m as f64;
        poch *= (s + (m2 - 1.0)) * (s + m2);
        npow /= nf * nf;
    }
    (s - 1.0) * (head + tail) + n_ms * nf
}

/// ξ̂(s) = s(s−1)π^{−s/2}Γ(s/2)ζ(s), entire, with ξ̂(s) = ξ̂(1−s).
pub fn xi_entire(s: C64) -> C64 {
    let s = if s.re < 0.5 { 1.0 - s } else { s };
    let half = 0.5 * s;
    let front = (-half * PI.ln() + ln_gamma_right(half)).exp();
    s * front * zeta_times_sm1(s)
}

/// ζ(s).
pub fn zeta_fn(s: C64) -> Result<C64> {
    if s == C64::new(1.0, 0.0) {
        return Err(MsError::Pole("zeta at s=1".into()));
    }
    if s.re >= 0.5 {
        Ok(zeta_times_sm1(s) / (s - 1.0))
    } else {
        let pis = (0.5 * s * PI.ln()).exp();
        Ok(xi_entire(s) * pis * rgamma(0.5 * s + 1.0) / (2.0 * (s - 1.0)))
    }
}

/// ξ(s); at s ∈ {0, 1} reports the residue (−1 and 1).
pub fn xi(s: C64) -> CompletedZetaValue {
    if s == C64::new(1.0, 0.0) {
        return CompletedZetaValue { value: xi_entire(s), pole_order: 1 };
    }
    if s == C64::new(0.0, 0.0) {
        return CompletedZetaValue { value: -xi_entire(s), pole_order: 1 };
    }
    CompletedZetaValue::regular(xi_entire(s) / (s * (s - 1.0)))
}

/// ξ(s) for real s > 1.
pub fn xi_real(s: f64) -> f64 {
    xi(C64::new(s, 0.0)).value.re
}

/// c(z) from caller-supplied exact values of 1+z and z−1. This is the form
/// used by the symbolic machinery, where 1+z may be a pure O(ε) quantity.
#[inline]
pub fn c_parts(z: C64, zp1: C64, zm1: C64) -> C64 {
    xi_entire(z) * zp1 / (xi_entire(zp1) * zm1)
}

/// c(z) = ξ(z)/ξ(1+z).
pub fn c_fn(z: C64) -> CompletedZetaValue {
    if z == C64::new(1.0, 0.0) {
        return CompletedZetaValue { value: c_pole_residue(), pole_order: 1 };
    }
    if z == C64::new(-1.0, 0.0) {
        return CompletedZetaValue::regular(C64::new(0.0, 0.0));
    }
    CompletedZetaValue::regular(c_parts(z, z + 1.0, z - 1.0))
}

/// Residue of c at z = 1, namely 2ξ̂(1)/ξ̂(2) = 1/ξ(2).
pub fn c_pole_residue() -> C64 {
    2.0 * xi_entire(C64::new(1.0, 0.0)) / xi_entire(C64::new(2.0, 0.0))
}

/// c′(−1) by Richardson-extrapolated central differences (radii 1e−3, 5e−4).
pub fn c_fn_slope_at_minus_one() -> C64 {
    static CACHE: OnceLock<C64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let d1 = central_difference_at_minus_one(1e-3);
        let d2 = central_difference_at_minus_one(5e-4);
        (4.0 * d2 - d1) / 3.0
    })
}

/// (c(−1+h) − c(−1−h))/(2h).
pub fn central_difference_at_minus_one(h: f64) -> C64 {
    let z = |d: f64| c_parts(C64::new(-1.0 + d, 0.0), C64::new(d, 0.0), C64::new(-2.0 + d, 0.0));
    (z(h) - z(-h)) / (2.0 * h)
}

/// ξ(n,k) = ξ(2)⋯ξ(n−k) / (ξ(k+1)⋯ξ(n)).
pub fn xi_nk(n: usize, k: usize) -> Result<f64> {
    if !(2..=crate::weyl::MAX_N).contains(&n) {
        return Err(MsError::InvalidDimension(n));
    }
    if k == 0 || k >= n {
        return Err(MsError::InvalidParabolic { n, k });
    }
    let num: f64 = (2..=n - k).map(|j| xi_real(j as f64)).product();
    let den: f64 = (k + 1..=n).map(|j| xi_real(j as f64)).product();
    Ok(num / den)
}

/// vol(Γ\G) = ξ(2)⋯ξ(n).
pub fn total_volume(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(MsError::InvalidDimension(n));
    }
    Ok((2..=n).map(|j| xi_real(j as f64)).product())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn gamma_classical_values() {
        assert!(rel(gamma_fn(c(1.0)).unwrap(), c(1.0)) < 1e-14);
        assert!(rel(gamma_fn(c(0.5)).unwrap(), c(PI.sqrt())) < 1e-14);
        assert!(rel(gamma_fn(c(-0.5)).unwrap(), c(-2.0 * PI.sqrt())) < 1e-14);
        assert!(rel(gamma_fn(c(11.0)).unwrap(), c(3628800.0)) < 1e-14);
        assert!(matches!(gamma_fn(c(-3.0)), Err(MsError::Pole(_))));
        // |Γ(1/2 + it)|² = π / cosh(πt)
        for t in [1.0, 10.0, 100.0, 190.0] {
            let g = gamma_fn(C64::new(0.5, t)).unwrap();
            let expect = PI / (PI * t).cosh();
            assert!((g.norm_sqr() / expect - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn gamma_recurrence_off_axis() {
        for z in [C64::new(0.3, 7.0), C64::new(-4.2, 1.5), C64::new(37.0, -60.0), C64::new(2.0, 150.0)] {
            let lhs = gamma_fn(z + 1.0).unwrap();
            let rhs = z * gamma_fn(z).unwrap();
            assert!(rel(lhs, rhs) < 1e-12, "z={z}");
        }
    }

    #[test]
    fn gamma_ratio_bound() {
        let sigma = 2.0;
        let bound = (gamma_fn(c(sigma)).unwrap().norm() / gamma_fn(c(sigma + 0.5)).unwrap().norm()).powi(2);
        for t in [1.0, 5.0, 20.0] {
            let r = (gamma_fn(C64::new(sigma, t)).unwrap().norm() / gamma_fn(C64::new(sigma + 0.5, t)).unwrap().norm())
                .powi(2);
            assert!(r <= bound);
        }
    }

    #[test]
    fn zeta_special_values() {
        assert!(rel(zeta_fn(c(2.0)).unwrap(), c(PI * PI / 6.0)) < 1e-14);
        assert!(rel(zeta_fn(c(0.0)).unwrap(), c(-0.5)) < 1e-13);
        assert!(rel(zeta_fn(c(-1.0)).unwrap(), c(-1.0 / 12.0)) < 1e-13);
        assert!(rel(zeta_fn(c(4.0)).unwrap(), c(PI.powi(4) / 90.0)) < 1e-14);
        assert!(zeta_fn(c(-2.0)).unwrap().norm() < 1e-15);
        assert!(matches!(zeta_fn(c(1.0)), Err(MsError::Pole(_))));
        // ζ(−3) = 1/120, ζ(−25) = 192.1... (B_26 / 26 with sign)
        assert!(rel(zeta_fn(c(-3.0)).unwrap(), c(1.0 / 120.0)) < 1e-12);
        let b26 = 8553103.0 / 6.0;
        assert!(rel(zeta_fn(c(-25.0)).unwrap(), c(-b26 / 26.0)) < 1e-11);
    }

    #[test]
    fn zeta_direct_series_oracle() {
        // ζ(3) by a long alternating-free direct sum with integral tail
        let mut z3 = 0.0;
        for j in (1..200_000u64).rev() {
            z3 += (j as f64).powi(-3);
        }
        z3 += 0.5 / (200_000f64).powi(2);
        assert!(rel(zeta_fn(c(3.0)).unwrap(), c(z3)) < 1e-12);
    }

    #[test]
    fn zeta_first_zero() {
        let rho1 = C64::new(0.5, 14.134_725_141_734_693);
        assert!(zeta_fn(rho1).unwrap().norm() < 1e-12);
    }

    #[test]
    fn xi_values() {
        assert!((xi_real(2.0) - PI / 6.0).abs() < 1e-14);
        assert!((xi_entire(c(2.0)).re - 2.0 * PI / 6.0).abs() < 1e-14);
        assert!((xi_real(3.0) - 0.191_313_298_015_585_17).abs() < 1e-12);
        // ξ(4) = π^{-2}ζ(4) = π²/90
        assert!((xi_real(4.0) - PI * PI / 90.0).abs() < 1e-14);
        let s = C64::new(3.7, 2.1);
        assert!((xi_entire(s) - xi_entire(1.0 - s)).norm() < 1e-10 * xi_entire(s).norm());
        assert!((xi_entire(c(0.0)) - c(1.0)).norm() < 1e-14);
        assert!((xi_entire(c(1.0)) - c(1.0)).norm() < 1e-14);
        assert_eq!(xi(c(1.0)).pole_order, 1);
        assert_eq!(xi(c(0.0)).pole_order, 1);
        assert!((xi(c(0.0)).value + 1.0).norm() < 1e-14);
        assert_eq!(xi(c(2.0)).pole_order, 0);
    }

    #[test]
    fn c_function_structure() {
        assert_eq!(c_fn(c(-1.0)).value, c(0.0));
        assert_eq!(c_fn(c(1.0)).pole_order, 1);
        assert!((c_fn(c(1.0)).value - c(6.0 / PI)).norm() < 1e-13);
        assert!((c_fn(c(0.0)).value + 1.0).norm() < 1e-14);
        for z in [c(0.3), C64::new(2.5, 1.0), C64::new(-0.7, 3.0)] {
            assert!((c_fn(z).value * c_fn(-z).value - 1.0).norm() < 1e-10);
        }
        assert!((c_fn(c(2.0)).value.re - xi_real(2.0) / xi_real(3.0)).abs() < 1e-13);
        assert!((c_fn(c(2.0)).value.re - 2.737).abs() < 1e-3);
    }

    #[test]
    fn slope_at_minus_one() {
        let d = c_fn_slope_at_minus_one();
        // structural value: c'(−1) = ξ̂(−1)/(ξ̂(0)·(−2)) = −ξ(2)
        let structural = xi_entire(c(-1.0)) / (xi_entire(c(0.0)) * -2.0);
        assert!((d - structural).norm() < 1e-9);
        assert!((d.re + PI / 6.0).abs() < 1e-9);
        // the difference quotient converges at first order (c''(−1) ≈ −0.48),
        // so 1e−6 agreement needs ε ≈ 1e−6
        let q = |eps: f64| c_parts(c(-1.0 + eps), c(eps), c(-2.0 + eps)) / eps;
        assert!((q(1e-6) - d).norm() <= 1e-6);
        let ratio = (q(1e-4) - d).norm() / (q(5e-5) - d).norm();
        assert!((ratio - 2.0).abs() < 0.01);
        let d1 = central_difference_at_minus_one(1e-3);
        let d2 = central_difference_at_minus_one(5e-4);
        assert!((d1 - d2).norm() < 1e-6);
        assert!(((4.0 * d2 - d1) / 3.0 - structural).norm() < 1e-8);
    }

    #[test]
    fn xi_nk_values() {
        assert!((xi_nk(2, 1).unwrap() - 6.0 / PI).abs() < 1e-13);
        assert!((xi_nk(3, 1).unwrap() - 1.0 / xi_real(3.0)).abs() < 1e-12);
        assert!((xi_nk(3, 1).unwrap() - 5.22703).abs() < 1e-5);
        for (n, k) in [(4, 1), (5, 2)] {
            assert!((xi_nk(n, k).unwrap() - xi_nk(n, n - k).unwrap()).abs() < 1e-12);
        }
        assert!(xi_nk(3, 0).is_err());
        assert!((total_volume(3).unwrap() - 0.100_171).abs() < 1e-6);
    }
}
