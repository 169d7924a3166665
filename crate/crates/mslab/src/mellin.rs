//! Test functions, their Mellin transforms, the bump σ and its Fourier
//! transform, and the saddle-point main term for F(k) = ∫₋₁¹ e^{ikx − 1/(1−x²)} dx.
//!
//! σ(x) = A·e^{−1/(1−x²)} on (−1, 1), B_δ(x) = σ(x/δ)/δ, β_δ(x) = B_δ(log x).
//! Smoothed windows are multiplicative convolutions f_{A,δ} = h_A ∗ β_δ,
//! so M f_{A,δ} = M h_A · M β_δ and M β_δ(s) = σ̂(−iδs).

use crate::error::{MsError, Result};
use crate::numerics::quad::{adaptive, gk21, QuadOptions};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// e^{−1/(1−x²)} on (−1,1), zero outside.
#[inline]
fn bump_raw(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

#[inline]
fn bump_raw_c(x: C64) -> C64 {
    let d = 1.0 - x * x;
    if d.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    (-1.0 / d).exp()
}

/// The normalizer A with ∫σ = 1.
pub fn bump_normalizer() -> f64 {
    static A: OnceLock<f64> = OnceLock::new();
    *A.get_or_init(|| {
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 5e-14, initial_panels: 16, max_panels: 4000, ..Default::default() };
        let r = adaptive(&|x: f64| C64::new(bump_raw(x), 0.0), -1.0, 1.0, &opts).expect("bump normalizer");
        1.0 / r.value.re
    })
}

/// σ(x).
pub fn bump(x: f64) -> f64 {
    bump_normalizer() * bump_raw(x)
}

const CDF_INTERVALS: usize = 4096;

struct CdfTable {
    h: f64,
    s: Vec<f64>,
    d: Vec<f64>,
}

fn cdf_table() -> &'static CdfTable {
    static T: OnceLock<CdfTable> = OnceLock::new();
    T.get_or_init(|| {
        let h = 2.0 / CDF_INTERVALS as f64;
        let mut s = Vec::with_capacity(CDF_INTERVALS + 1);
        let mut d = Vec::with_capacity(CDF_INTERVALS + 1);
        let mut acc = 0.0;
        let mut comp = 0.0;
        s.push(0.0);
        d.push(0.0);
        for i in 0..CDF_INTERVALS {
            let a = -1.0 + h * i as f64;
            let (v, _) = gk21(&|x: f64| C64::new(bump(x), 0.0), a, a + h);
            // Kahan accumulation keeps S(1) = 1 to rounding
            let y = v.re - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            s.push(acc);
            d.push(bump(a + h));
        }
        CdfTable { h, s, d }
    })
}

/// S(u) = ∫₋₁ᵘ σ, by cubic Hermite interpolation on a fine table.
pub fn bump_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let t = cdf_table();
    let x = (u + 1.0) / t.h;
    let i = (x.floor() as usize).min(CDF_INTERVALS - 1);
    let th = x - i as f64;
    let (p0, p1) = (t.s[i], t.s[i + 1]);
    let (m0, m1) = (t.d[i] * t.h, t.d[i + 1] * t.h);
    let th2 = th * th;
    let th3 = th2 * th;
    (2.0 * th3 - 3.0 * th2 + 1.0) * p0 + (th3 - 2.0 * th2 + th) * m0 + (-2.0 * th3 + 3.0 * th2) * p1 + (th3 - th2) * m1
}

/// σ̂(z) = ∫σ(x)e^{izx}dx. For |Re z| ≤ 30 the real segment is used; beyond
/// that the path −1 → i → 1, which runs through both saddle points and
/// avoids the cancellation of the oscillatory real-line integral.
pub fn bump_fourier(z: C64) -> C64 {
    // σ is even, so σ̂(z) = σ̂(−z); work with Re z ≥ 0
    let z = if z.re < 0.0 { -z } else { z };
    let a = bump_normalizer();
    if z.re <= 30.0 {
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-13, initial_panels: 8, max_panels: 20_000, ..Default::default() };
        let f = |x: f64| (C64::new(0.0, 1.0) * z * x).exp() * bump_raw(x);
        return a * adaptive(&f, -1.0, 1.0, &opts).map(|r| r.value).unwrap_or(C64::new(f64::NAN, f64::NAN));
    }
    let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-12, initial_panels: 8, max_panels: 20_000, ..Default::default() };
    a * deformed_fourier(z, &opts)
}

fn deformed_fourier(z: C64, opts: &QuadOptions) -> C64 {
    let i = C64::new(0.0, 1.0);
    let seg = |p: C64, q: C64| -> C64 {
        let dir = q - p;
        let f = |t: f64| {
            let x = p + dir * t;
            (i * z * x).exp() * bump_raw_c(x) * dir
        };
        adaptive(&f, 0.0, 1.0, opts).map(|r| r.value).unwrap_or(C64::new(f64::NAN, f64::NAN))
    };
    seg(C64::new(-1.0, 0.0), i) + seg(i, C64::new(1.0, 0.0))
}

/// Upper bound for |σ̂(z)|: A·∫|e^{izx}σ₀(x)||dx| along −1 → i → 1 (after
/// reflecting to Re z ≥ 0). Smooth in z, so it can be sampled safely.
pub fn bump_fourier_majorant(z: C64) -> f64 {
    let z = if z.re < 0.0 { -z } else { z };
    let i = C64::new(0.0, 1.0);
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-6, initial_panels: 8, max_panels: 4000, ..Default::default() };
    let seg = |p: C64, q: C64| -> f64 {
        let dir = q - p;
        let f = |t: f64| {
            let x = p + dir * t;
            C64::new(((i * z * x).exp() * bump_raw_c(x)).norm() * dir.norm(), 0.0)
        };
        adaptive(&f, 0.0, 1.0, &opts).map(|r| r.value.re + r.error).unwrap_or(f64::INFINITY)
    };
    let path = bump_normalizer() * (seg(C64::new(-1.0, 0.0), i) + seg(i, C64::new(1.0, 0.0)));
    // the real segment gives |σ̂(z)| ≤ e^{|Im z|}
    path.min(z.im.abs().exp())
}

/// Contribution of the single saddle near x = 1: ∫ e^{ikx − 1/(1−x²)} dx
/// along the segment i → 1. Its real part doubled is F(k).
pub fn saddle_segment(k: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let (p, q) = (i, C64::new(1.0, 0.0));
    let dir = q - p;
    let f = |t: f64| {
        let x = p + dir * t;
        (i * k * x).exp() * bump_raw_c(x) * dir
    };
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-11, initial_panels: 64, max_panels: 200_000, ..Default::default() };
    adaptive(&f, 0.0, 1.0, &opts).map(|r| r.value).unwrap_or(C64::new(f64::NAN, f64::NAN))
}

/// The complex single-saddle main term √(−iπ/(√(2i)k^{3/2}))·e^{ik − √(2ik) − 1/4}.
pub fn saddle_main_complex(k: f64) -> Result<C64> {
    if k < 10.0 {
        return Err(MsError::AsymptoticUnreliable(k));
    }
    let i = C64::new(0.0, 1.0);
    let kk = C64::new(k, 0.0);
    let pref = (-i * std::f64::consts::PI / ((2.0 * i).sqrt() * kk.powf(1.5))).sqrt();
    Ok(pref * (i * kk - (2.0 * i * kk).sqrt() - 0.25).exp())
}

/// One row of the saddle-point comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleRow {
    pub k: f64,
    pub quadrature: f64,
    pub asymptotic: f64,
    /// |F − main| / |main| on the real values
    pub rel_error: f64,
    /// log|F| + √k − ¾·log k
    pub profile: f64,
    /// log|F| + √k + ¾·log k (the exponent the saddle actually gives)
    pub profile_corrected: f64,
    /// relative error of the single-saddle segment against its complex main term
    pub saddle_rel_error: f64,
}

pub fn saddle_row(k: f64) -> Result<SaddleRow> {
    let quadrature = saddle_quadrature(k);
    let asymptotic = saddle_asymptotic(k)?.re;
    let seg = saddle_segment(k);
    let main = saddle_main_complex(k)?;
    let lf = quadrature.abs().ln();
    Ok(SaddleRow {
        k,
        quadrature,
        asymptotic,
        rel_error: (quadrature - asymptotic).abs() / asymptotic.abs(),
        profile: lf + k.sqrt() - 0.75 * k.ln(),
        profile_corrected: lf + k.sqrt() + 0.75 * k.ln(),
        saddle_rel_error: ((seg - main) / main).norm(),
    })
}

/// F(k) = ∫₋₁¹ e^{ikx − 1/(1−x²)} dx by quadrature, F = σ̂/A.
pub fn saddle_quadrature(k: f64) -> f64 {
    (bump_fourier(C64::new(k, 0.0)) / bump_normalizer()).re
}

/// Main term 2·Re(√(−iπ/(√(2i)k^{3/2})) · e^{ik − √(2ik) − 1/4}), principal branches.
pub fn saddle_asymptotic(k: f64) -> Result<C64> {
    if k < 10.0 {
        return Err(MsError::AsymptoticUnreliable(k));
    }
    let m = saddle_main_complex(k)?;
    Ok(C64::new(2.0 * m.re, 0.0))
}

/// The supported test functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// h_N, the indicator of [0, N]
    SharpUpto { n: f64 },
    /// indicator of (N₁, N₂]
    SharpWindow { n1: f64, n2: f64 },
    /// β_δ
    Bump { delta: f64 },
    /// f_{(N₁,N₂],δ} = h_{(N₁,N₂]} ∗ β_δ; N₁ = 0 gives f_{N₂,δ}
    Smoothed { n1: f64, n2: f64, delta: f64 },
}

impl TestFunction {
    pub fn sharp(n: f64) -> Result<Self> {
        if !(n > 0.0) {
            return Err(MsError::InvalidArgument(format!("N={n} must be positive")));
        }
        Ok(TestFunction::SharpUpto { n })
    }

    pub fn window(n1: f64, n2: f64) -> Result<Self> {
        if !(0.0 <= n1 && n1 < n2) {
            return Err(MsError::InvalidArgument(format!("window needs 0 <= N1 < N2, got ({n1}, {n2})")));
        }
        Ok(TestFunction::SharpWindow { n1, n2 })
    }

    pub fn bump(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(TestFunction::Bump { delta })
    }

    /// f_{[N1,N2],δ}.
    pub fn smoothed(n1: f64, n2: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(0.0 <= n1 && n1 < n2) {
            return Err(MsError::InvalidArgument(format!("window needs 0 <= N1 < N2, got ({n1}, {n2})")));
        }
        Ok(TestFunction::Smoothed { n1, n2, delta })
    }

    /// f_{N,δ}.
    pub fn smoothed_upto(n: f64, delta: f64) -> Result<Self> {
        Self::smoothed(0.0, n, delta)
    }

    /// Pointwise value.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::SharpUpto { n } => {
                if (0.0..=n).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::SharpWindow { n1, n2 } => {
                if x > n1 && x <= n2 {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Bump { delta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    bump(x.ln() / delta) / delta
                }
            }
            TestFunction::Smoothed { n1, n2, delta } => {
                if x <= 0.0 {
                    return if n1 == 0.0 { 1.0 } else { 0.0 };
                }
                let upper = bump_cdf((n2 / x).ln() / delta);
                let lower = if n1 == 0.0 { 0.0 } else { bump_cdf((n1 / x).ln() / delta) };
                upper - lower
            }
        }
    }

    /// Largest x where the function can be nonzero.
    pub fn support_max(&self) -> f64 {
        match *self {
            TestFunction::SharpUpto { n } => n,
            TestFunction::SharpWindow { n2, .. } => n2,
            TestFunction::Bump { delta } => delta.exp(),
            TestFunction::Smoothed { n2, delta, .. } => n2 * delta.exp(),
        }
    }

    /// Mellin transform ∫₀^∞ f(x)x^{s−1}dx for Re s > 0.
    pub fn mellin(&self, s: C64) -> Result<C64> {
        if !(s.re > 0.0) {
            return Err(MsError::OutOfStrip(format!("Re s = {} <= 0", s.re)));
        }
        Ok(match *self {
            TestFunction::SharpUpto { n } => mellin_sharp(0.0, n, s),
            TestFunction::SharpWindow { n1, n2 } => mellin_sharp(n1, n2, s),
            TestFunction::Bump { delta } => mellin_bump(delta, s),
            TestFunction::Smoothed { n1, n2, delta } => mellin_sharp(n1, n2, s) * mellin_bump(delta, s),
        })
    }

    /// Upper bound for |Mf(s)|, smooth in Im s (used for tail certificates).
    pub fn mellin_majorant(&self, s: C64) -> f64 {
        let sharp = |n1: f64, n2: f64| (n2.powf(s.re) + if n1 == 0.0 { 0.0 } else { n1.powf(s.re) }) / s.norm();
        let bump = |delta: f64| bump_fourier_majorant(C64::new(0.0, -delta) * s);
        match *self {
            TestFunction::SharpUpto { n } => sharp(0.0, n),
            TestFunction::SharpWindow { n1, n2 } => sharp(n1, n2),
            TestFunction::Bump { delta } => bump(delta),
            TestFunction::Smoothed { n1, n2, delta } => sharp(n1, n2) * bump(delta),
        }
    }

    /// The sharp part h_A of the function (itself for sharp kinds).
    pub fn sharp_part(&self) -> Option<(f64, f64)> {
        match *self {
            TestFunction::SharpUpto { n } => Some((0.0, n)),
            TestFunction::SharpWindow { n1, n2 } | TestFunction::Smoothed { n1, n2, .. } => Some((n1, n2)),
            TestFunction::Bump { .. } => None,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match *self {
            TestFunction::Bump { delta } | TestFunction::Smoothed { delta, .. } => Some(delta),
            _ => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, TestFunction::Smoothed { .. } | TestFunction::Bump { .. })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(MsError::InvalidArgument(format!("delta={delta} must lie in (0,1)")))
    }
}

/// Mh_A(s) = (N₂ˢ − N₁ˢ)/s.
fn mellin_sharp(n1: f64, n2: f64, s: C64) -> C64 {
    if s.im == 0.0 {
        // real powers keep N^n/n exact where the floating powers are
        return C64::new((n2.powf(s.re) - if n1 == 0.0 { 0.0 } else { n1.powf(s.re) }) / s.re, 0.0);
    }
    let p2 = (s * n2.ln()).exp();
    let p1 = if n1 == 0.0 { C64::new(0.0, 0.0) } else { (s * n1.ln()).exp() };
    (p2 - p1) / s
}

/// Mβ_δ(s) = σ̂(−iδs) = σ̂(δ(t − ci)) for s = c + it.
fn mellin_bump(delta: f64, s: C64) -> C64 {
    bump_fourier(C64::new(0.0, -delta) * s)
}

/// Free-function form of [`TestFunction::mellin`].
pub fn mellin(f: &TestFunction, s: C64) -> Result<C64> {
    f.mellin(s)
}

/// max over the grid of |Mh_A(c+it)| / |Mh_A(c)| for A = (N₁, N₂].
pub fn mellin_window_bound_check(n1: f64, n2: f64, c: f64, t_grid: &[f64]) -> Result<f64> {
    if c < 1.0 {
        return Err(MsError::WindowTooWide(format!("abscissa c={c} < 1")));
    }
    if !(0.0 <= n1 && n1 < n2) {
        return Err(MsError::InvalidArgument(format!("window needs 0 <= N1 < N2, got ({n1}, {n2})")));
    }
    if n1 > 0.0 && n2.powf(c) - n1.powf(c) > n1.powf(c) / 2.0 {
        return Err(MsError::WindowTooWide(format!(
            "N2^c - N1^c = {:.4e} exceeds N1^c/2 = {:.4e}",
            n2.powf(c) - n1.powf(c),
            n1.powf(c) / 2.0
        )));
    }
    let base = mellin_sharp(n1, n2, C64::new(c, 0.0)).norm();
    Ok(t_grid.iter().map(|&t| mellin_sharp(n1, n2, C64::new(c, t)).norm() / base).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizer_value() {
        assert!((bump_normalizer() - 2.252_283_6).abs() < 1e-6);
        assert!((bump_cdf(1.0) - 1.0).abs() < 1e-15);
        assert!((bump_cdf(0.0) - 0.5).abs() < 1e-13);
        assert!((bump_cdf(0.3) + bump_cdf(-0.3) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn fourier_basics() {
        assert!((bump_fourier(C64::new(0.0, 0.0)) - 1.0).norm() < 1e-13);
        let z = C64::new(3.7, -0.4);
        let a = bump_fourier(-z.conj());
        assert!((a - bump_fourier(z).conj()).norm() < 1e-13);
        // the two paths agree where both are accurate
        let z = C64::new(25.0, -0.3);
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, initial_panels: 8, max_panels: 20_000, ..Default::default() };
        let d = bump_normalizer() * deformed_fourier(z, &opts);
        assert!((d - bump_fourier(z)).norm() < 1e-12, "{d} vs {}", bump_fourier(z));
    }

    #[test]
    fn sharp_mellin() {
        let f = TestFunction::sharp(10.0).unwrap();
        let v = f.mellin(C64::new(3.0, 0.0)).unwrap();
        assert!((v.re - 1000.0 / 3.0).abs() < 1e-10);
        assert!(f.mellin(C64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn smoothed_eval_shape() {
        let f = TestFunction::smoothed_upto(5.0, 0.1).unwrap();
        assert_eq!(f.eval(1.0), 1.0);
        assert!((f.eval(5.0) - 0.5).abs() < 1e-12);
        assert_eq!(f.eval(5.0 * 1.2), 0.0);
        let g = TestFunction::smoothed(2.0, 5.0, 0.1).unwrap();
        assert!((g.eval(2.0) - 0.5).abs() < 1e-12);
        assert!((g.eval(3.0) - 1.0).abs() < 1e-14);
    }
}
