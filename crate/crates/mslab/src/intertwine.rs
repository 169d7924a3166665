//! M(w, λ) = ∏_{(i,j) ∈ Inv(w)} c(λ_i − λ_j) with zero/pole bookkeeping.
//!
//! Two entry points: [`m_op`] works on numeric weights and snaps pairings
//! within 1e−9 of ±1; [`m_op_sym`] works on symbolic weights and decides
//! which factors are O(ε) from the affine forms alone.

use crate::error::{MsError, Result};
use crate::weyl::{act, inversion_set, AffineForm, SymWeight, WeightVector, WeylElement};
use crate::xifunc::{c_fn, c_fn_slope_at_minus_one, c_parts, c_pole_residue};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub const SNAP_TOL: f64 = 1e-9;

/// Leading coefficient of M in the perturbation parameter, with its order.
/// `exact_zero` marks products containing c(−1) with no perturbation at all;
/// such a product vanishes identically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntertwiningValue {
    pub value: C64,
    pub zero_order: u32,
    pub pole_order: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exact_zero: bool,
}

impl IntertwiningValue {
    pub fn one() -> Self {
        IntertwiningValue { value: C64::new(1.0, 0.0), zero_order: 0, pole_order: 0, exact_zero: false }
    }

    /// Net order in ε (zeros minus poles).
    pub fn order(&self) -> i32 {
        self.zero_order as i32 - self.pole_order as i32
    }

    fn reduce(mut self) -> Self {
        let m = self.zero_order.min(self.pole_order);
        self.zero_order -= m;
        self.pole_order -= m;
        self
    }
}

/// How one c-factor behaves as ε → 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FactorClass {
    /// finite nonzero generic value
    Regular,
    /// c(−1 + eε) = c′(−1)·eε + O(ε²); `coef` = c′(−1)·e
    Zero { coef: C64 },
    /// c(1 + eε) = Res/(eε) + O(1); `coef` = Res/e
    Pole { coef: C64 },
    /// argument is exactly −1 for every ε
    ExactZero,
}

/// Classify a factor c(arg) from its affine form. Only s-free arguments can
/// sit at ±1 identically; s-dependent ones are regular on generic lines.
pub fn classify(arg: &AffineForm) -> Result<FactorClass> {
    if !arg.is_s_free() {
        return Ok(FactorClass::Regular);
    }
    if arg.c == -1.0 {
        if arg.e == 0.0 {
            return Ok(FactorClass::ExactZero);
        }
        return Ok(FactorClass::Zero { coef: c_fn_slope_at_minus_one() * arg.e });
    }
    if arg.c == 1.0 {
        if arg.e == 0.0 {
            return Err(MsError::SingularConfiguration(format!("c-factor with argument identically 1 ({arg})")));
        }
        return Ok(FactorClass::Pole { coef: c_pole_residue() / arg.e });
    }
    Ok(FactorClass::Regular)
}

/// c(arg) at finite ε, with 1+z and z−1 formed exactly from the affine form.
#[inline]
pub fn c_of_form(arg: &AffineForm, s1: C64, s2: C64, eps: f64) -> C64 {
    c_parts(arg.eval(s1, s2, eps), arg.plus_const(1.0).eval(s1, s2, eps), arg.plus_const(-1.0).eval(s1, s2, eps))
}

/// Evaluation mode of symbolic quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EvalMode {
    /// exact termwise limit ε → 0 (leading coefficients)
    Limit,
    /// plain evaluation at the given ε
    Finite(f64),
}

/// M(w, λ) for numeric λ. Pairings within [`SNAP_TOL`] of −1 (resp. +1)
/// contribute a zero (resp. pole) with coefficient c′(−1) (resp. the residue).
pub fn m_op(w: &WeylElement, lam: &WeightVector) -> Result<IntertwiningValue> {
    if w.n() != lam.n() {
        return Err(MsError::DimensionMismatch(w.n(), lam.n()));
    }
    let mut out = IntertwiningValue::one();
    for (i, j) in inversion_set(w) {
        let z = lam.entries[i - 1] - lam.entries[j - 1];
        if (z + 1.0).norm() <= SNAP_TOL {
            out.zero_order += 1;
            out.value *= c_fn_slope_at_minus_one();
        } else if (z - 1.0).norm() <= SNAP_TOL {
            out.pole_order += 1;
            out.value *= c_pole_residue();
        } else {
            out.value *= c_fn(z).value;
        }
    }
    Ok(out.reduce())
}

/// Plain product of c-values, refusing arguments within `tol` of ±1.
fn m_regular(w: &WeylElement, lam: &WeightVector, tol: f64) -> Result<C64> {
    let mut v = C64::new(1.0, 0.0);
    for (i, j) in inversion_set(w) {
        let z = lam.entries[i - 1] - lam.entries[j - 1];
        if (z + 1.0).norm() <= tol || (z - 1.0).norm() <= tol {
            return Err(MsError::SingularConfiguration(format!("pairing {z} near ±1 for {w}")));
        }
        v *= c_fn(z).value;
    }
    Ok(v)
}

/// |M(w₁w₂,λ) − M(w₁,w₂λ)M(w₂,λ)| / |M(w₁w₂,λ)|.
pub fn m_functional_check(w1: &WeylElement, w2: &WeylElement, lam: &WeightVector) -> Result<f64> {
    let tol = 1e-6;
    let w12 = w1.compose(w2)?;
    let lhs = m_regular(&w12, lam, tol)?;
    let rhs = m_regular(w1, &act(w2, lam)?, tol)? * m_regular(w2, lam, tol)?;
    Ok((lhs - rhs).norm() / lhs.norm())
}

/// M(w, λ) for a symbolic weight evaluated at (s₁, s₂).
pub fn m_op_sym(w: &WeylElement, lam: &SymWeight, s1: C64, s2: C64, mode: EvalMode) -> Result<IntertwiningValue> {
    if w.n() != lam.n() {
        return Err(MsError::DimensionMismatch(w.n(), lam.n()));
    }
    let mut out = IntertwiningValue::one();
    for (i, j) in inversion_set(w) {
        let arg = lam.entries[i - 1].sub(lam.entries[j - 1]);
        match mode {
            EvalMode::Finite(eps) => {
                if let FactorClass::ExactZero = classify(&arg)? {
                    out.exact_zero = true;
                    out.value = C64::new(0.0, 0.0);
                }
                if !out.exact_zero {
                    out.value *= c_of_form(&arg, s1, s2, eps);
                }
            }
            EvalMode::Limit => match classify(&arg)? {
                FactorClass::Regular => out.value *= c_of_form(&arg, s1, s2, 0.0),
                FactorClass::Zero { coef } => {
                    out.zero_order += 1;
                    out.value *= coef;
                }
                FactorClass::Pole { coef } => {
                    out.pole_order += 1;
                    out.value *= coef;
                }
                FactorClass::ExactZero => {
                    out.zero_order += 1;
                    out.exact_zero = true;
                    out.value = C64::new(0.0, 0.0);
                }
            },
        }
    }
    if out.exact_zero {
        out.value = C64::new(0.0, 0.0);
    }
    Ok(out.reduce())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weyl::{all_weyl, lambda_of_s, rho, w_star, SVar};
    use crate::xifunc::xi_nk;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn identity_is_one() {
        let lam = WeightVector::from_real(&[0.3, -1.1, 2.0]).unwrap();
        assert_eq!(m_op(&WeylElement::identity(3), &lam).unwrap(), IntertwiningValue::one());
    }

    #[test]
    fn functional_equation_examples() {
        let lam = WeightVector::new(vec![
            C64::new(0.31, 0.7),
            C64::new(-1.27, 0.2),
            C64::new(2.13, -0.4),
            C64::new(0.77, 1.1),
        ])
        .unwrap();
        let ws = all_weyl(4).unwrap();
        for w1 in &ws {
            for w2 in ws.iter().step_by(5) {
                assert!(m_functional_check(w1, w2, &lam).unwrap() < 1e-9);
            }
            assert!(m_functional_check(w1, &WeylElement::identity(4), &lam).unwrap() < 1e-14);
            assert!(m_functional_check(&w1.inverse(), w1, &lam).unwrap() < 1e-12);
        }
        let near = WeightVector::from_real(&[0.0, -1.0 - 1e-8, 3.3]).unwrap();
        assert!(m_functional_check(&WeylElement::longest(3), &WeylElement::identity(3), &near).is_err());
    }

    #[test]
    fn residue_of_wstar_is_xi_nk() {
        // Res_{s=n} M(w_*, λ(s)) = ξ(n,k), by a small circle in s.
        for (n, k) in [(2usize, 1usize), (3, 1), (3, 2), (4, 2)] {
            let w = w_star(n, k).unwrap();
            let m = 64;
            let r = 0.05;
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..m {
                let th = 2.0 * std::f64::consts::PI * (q as f64 + 0.5) / m as f64;
                let ds = C64::from_polar(r, th);
                let lam = lambda_of_s(n, k, c(n as f64) + ds).unwrap();
                acc += m_op(&w, &lam).unwrap().value * ds;
            }
            let res = acc / m as f64;
            assert!((res - c(xi_nk(n, k).unwrap())).norm() < 1e-10, "n={n} k={k} res={res}");
        }
    }

    #[test]
    fn zero_order_counts_minus_one_pairings() {
        let s = C64::new(2.4, 3.0);
        for (n, k) in [(3usize, 1usize), (4, 2), (5, 2)] {
            let sym = SymWeight::lambda(n, k, SVar::S1).unwrap();
            let pert = sym.perturbed(&rho(n).unwrap().entries.iter().map(|z| z.re).collect::<Vec<_>>()).unwrap();
            for w in all_weyl(n).unwrap() {
                let v = m_op_sym(&w, &pert, s, s, EvalMode::Limit).unwrap();
                let expect = inversion_set(&w)
                    .into_iter()
                    .filter(|&(i, j)| {
                        let a = sym.entries[i - 1].sub(sym.entries[j - 1]);
                        a.is_s_free() && a.c == -1.0
                    })
                    .count() as u32;
                assert_eq!(v.zero_order, expect, "w={w}");
            }
        }
    }

    #[test]
    fn longest_at_minus_rho() {
        for n in 2..=5 {
            let sym = SymWeight::neg_rho(n).unwrap();
            let dir: Vec<f64> = rho(n).unwrap().entries.iter().map(|z| -z.re).collect();
            let pert = sym.perturbed(&dir).unwrap();
            let v = m_op_sym(&WeylElement::longest(n), &pert, c(0.0), c(0.0), EvalMode::Limit).unwrap();
            // n−1 simple roots of height 1 give zeros; no poles at −ρ
            assert_eq!((v.zero_order, v.pole_order), (n as u32 - 1, 0));
            let num = m_op(&WeylElement::longest(n), &rho(n).unwrap().scale(c(-1.0))).unwrap();
            assert_eq!(num.zero_order, n as u32 - 1);
        }
    }

    #[test]
    fn exact_zero_detection() {
        // w2 breaking within-block order at unperturbed λ(s) vanishes identically
        let sym = SymWeight::lambda(3, 1, SVar::S2).unwrap();
        let w = WeylElement::new(vec![2, 1, 3]).unwrap();
        let v = m_op_sym(&w, &sym, c(0.0), C64::new(2.0, 1.0), EvalMode::Limit).unwrap();
        assert!(v.exact_zero);
        assert_eq!(v.value, c(0.0));
    }
}
