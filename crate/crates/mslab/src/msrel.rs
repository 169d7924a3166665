//! The Maass-Selberg double Weyl sum
//!
//!   Σ_{w₁,w₂} T^{⟨ρ∨, w₁λ̃₁+w₂λ̃₂⟩} / ∏_j ⟨α_j∨, w₁λ̃₁+w₂λ̃₂⟩ · M(w₁,λ̃₁) M(w₂,λ̃₂),
//!
//! its ε → 0 limit, the truncated volume, and residue clusters at s = n.
//!
//! The workhorse is [`SumPlan`]: built once from two symbolic weights, it
//! drops pairs that vanish identically, classifies every O(ε) factor, and
//! then evaluates the sum at any (s₁, s₂) either termwise in the limit or at
//! a finite ε.

use crate::error::{MsError, Result};
use crate::intertwine::{classify, c_of_form, EvalMode, FactorClass, IntertwiningValue};
use crate::numerics::fit::extrapolate_to_zero;
use crate::numerics::sum::{ComplexAcc, Precision};
use crate::weyl::{
    act, all_weyl, inversion_set, rho, rho_covector_pairing, w_star, AffineForm, SVar, SymWeight, WeightVector,
    WeylElement,
};
use crate::xifunc::c_fn;
use crate::{exec, intertwine};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Default ε schedule for Richardson extrapolation.
pub const DEFAULT_SCHEDULE: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Term magnitude above which sums switch to double-double accumulation.
pub const DD_THRESHOLD: f64 = 1e6;

/// Truncation parameter T; the truncation point is C = log T · ρ∨.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationParam {
    t: f64,
}

impl TruncationParam {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 1.0) || !t.is_finite() {
            return Err(MsError::InvalidArgument(format!("truncation parameter T={t} must exceed 1")));
        }
        Ok(TruncationParam { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn log_t(&self) -> f64 {
        self.t.ln()
    }

    /// C = log T · ρ∨ as a real vector.
    pub fn c_vector(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.log_t() * ((n as f64 - 1.0) / 2.0 - i as f64)).collect()
    }

    /// e^{⟨C, μ⟩} = T^{⟨ρ∨, μ⟩} given the exponent ⟨ρ∨, μ⟩.
    #[inline]
    pub fn power(&self, exponent: C64) -> C64 {
        (exponent * self.log_t()).exp()
    }
}

/// One denominator ⟨α_j∨, w₁λ̃₁+w₂λ̃₂⟩.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenomFactor {
    pub j: usize,
    /// symbolic form when the term came from symbolic weights
    pub form: Option<AffineForm>,
    /// numeric value (the ε-coefficient for ε-only factors in limit mode)
    pub value: C64,
    /// vanishes at ε = 0 for every s
    pub eps_only: bool,
}

/// A single summand Ĩ(w₁, w₂).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsTerm {
    pub w1: WeylElement,
    pub w2: WeylElement,
    pub t_exponent: C64,
    pub denom_factors: Vec<DenomFactor>,
    pub m1: IntertwiningValue,
    pub m2: IntertwiningValue,
    pub value: C64,
    /// zeros minus poles in ε, after counting O(ε) denominators as poles
    pub net_order: i32,
}

impl MsTerm {
    /// |value| recomputed as exp(Σ log|factor|), an independent check on
    /// the direct product.
    pub fn magnitude_logsum(&self, trunc: &TruncationParam) -> f64 {
        if self.value == C64::new(0.0, 0.0) {
            return 0.0;
        }
        let mut l = self.t_exponent.re * trunc.log_t() + self.m1.value.norm().ln() + self.m2.value.norm().ln();
        for d in &self.denom_factors {
            l -= d.value.norm().ln();
        }
        l.exp()
    }
}

/// Ĩ(w₁,w₂) for numeric weights. Pairings within the snap tolerance of ±1
/// and denominators within it of 0 are treated as exact zeros and poles;
/// a term with more singular denominators than zeros is refused.
pub fn ms_term(
    w1: &WeylElement,
    w2: &WeylElement,
    lam1: &WeightVector,
    lam2: &WeightVector,
    trunc: &TruncationParam,
) -> Result<MsTerm> {
    let n = lam1.n();
    if lam2.n() != n || w1.n() != n || w2.n() != n {
        return Err(MsError::DimensionMismatch(n, lam2.n()));
    }
    let m1 = intertwine::m_op(w1, lam1)?;
    let m2 = intertwine::m_op(w2, lam2)?;
    let a = act(w1, lam1)?;
    let b = act(w2, lam2)?;
    let sum = a.add(&b)?;
    let t_exponent = rho_covector_pairing(&sum);
    let mut denom_factors = Vec::with_capacity(n - 1);
    let mut small = Vec::new();
    for j in 1..n {
        let v = sum.entries[j - 1] - sum.entries[j];
        let eps_only = v.norm() <= intertwine::SNAP_TOL;
        if eps_only {
            small.push(format!("<alpha_{j}, w1 l1 + w2 l2> = {v}"));
        }
        denom_factors.push(DenomFactor { j, form: None, value: v, eps_only });
    }
    let net_order = m1.order() + m2.order() - small.len() as i32;
    let value = if net_order > 0 || m1.exact_zero || m2.exact_zero {
        C64::new(0.0, 0.0)
    } else if net_order < 0 || !small.is_empty() {
        return Err(MsError::SingularTerm { w1: w1.to_string(), w2: w2.to_string(), factors: small });
    } else {
        let mut v = trunc.power(t_exponent) * m1.value * m2.value;
        for d in &denom_factors {
            v /= d.value;
        }
        v
    };
    Ok(MsTerm { w1: w1.clone(), w2: w2.clone(), t_exponent, denom_factors, m1, m2, value, net_order })
}

/// Per-Weyl-element data of one side of the double sum.
#[derive(Clone, Debug)]
pub struct Side {
    pub w: WeylElement,
    /// ⟨α_j∨, wλ⟩ for j = 1..n−1
    pub pairings: Vec<AffineForm>,
    /// ⟨ρ∨, wλ⟩
    pub rho_pair: AffineForm,
    /// arguments of all c-factors of M(w, λ)
    pub args: Vec<AffineForm>,
    /// indices into the plan's distinct s-dependent arguments (limit mode)
    s_args: Vec<usize>,
    /// product of c over s-free regular arguments at ε = 0
    const_part: C64,
    pub zero_order: u32,
    pub pole_order: u32,
    /// product of the leading coefficients of the O(ε) factors
    pub coef: C64,
}

impl Side {
    pub fn intertwining_limit(&self, s_vals: &[C64]) -> IntertwiningValue {
        let mut value = self.coef * self.const_part;
        for &i in &self.s_args {
            value *= s_vals[i];
        }
        IntertwiningValue { value, zero_order: self.zero_order, pole_order: self.pole_order, exact_zero: false }
    }
}

/// A surviving (w₁, w₂) pair.
#[derive(Clone, Debug)]
pub struct Pair {
    pub i1: usize,
    pub i2: usize,
    /// bit j−1 set when the j-th denominator is O(ε)
    pub eps_mask: u32,
    /// ∏ 1/e over the O(ε) denominators
    pub coef: f64,
    pub net_order: i32,
    /// full symbolic denominators
    pub denoms: Vec<AffineForm>,
}

/// Evaluation of one side at a point: A = (leading M) · T^{⟨ρ∨,wλ⟩} and the
/// pairings ⟨α_j∨, wλ⟩ at ε = 0.
#[derive(Clone, Debug)]
pub struct SideEval {
    pub a: C64,
    pub p: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SumMode {
    Limit,
    Richardson(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumOptions {
    pub mode: SumMode,
    pub precision: Precision,
}

impl Default for SumOptions {
    fn default() -> Self {
        SumOptions { mode: SumMode::Limit, precision: Precision::Double }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumResult {
    pub value: C64,
    pub uncertainty: f64,
    pub precision_used: Precision,
}

/// Precomputed structure of the double sum for symbolic λ₁, λ₂.
#[derive(Clone, Debug)]
pub struct SumPlan {
    pub n: usize,
    pub lam1: SymWeight,
    pub lam2: SymWeight,
    pub side1: Vec<Side>,
    pub side2: Vec<Side>,
    /// every pair with both intertwining factors not identically zero
    pub pairs: Vec<Pair>,
    /// indices of pairs with net order 0 (those carrying the ε → 0 limit)
    pub limit_pairs: Vec<usize>,
    /// indices of pairs with negative net order
    pub singular_pairs: Vec<usize>,
    args1: Vec<AffineForm>,
    args2: Vec<AffineForm>,
}

fn form_key(a: &AffineForm) -> [u64; 4] {
    [a.c.to_bits(), a.s1.to_bits(), a.s2.to_bits(), a.e.to_bits()]
}

fn build_sides(lam: &SymWeight, distinct: &mut Vec<AffineForm>) -> Result<Vec<Side>> {
    let n = lam.n();
    let mut index: HashMap<[u64; 4], usize> = HashMap::new();
    let mut out = Vec::new();
    'outer: for w in all_weyl(n)? {
        let img = lam.act(&w)?;
        let pairings: Vec<AffineForm> = (1..n).map(|j| img.pairing(j)).collect();
        let rho_pair = img.rho_pairing();
        let mut args = Vec::new();
        let mut s_args = Vec::new();
        let mut const_part = C64::new(1.0, 0.0);
        let mut coef = C64::new(1.0, 0.0);
        let (mut zero_order, mut pole_order) = (0u32, 0u32);
        for (i, j) in inversion_set(&w) {
            let arg = lam.entries[i - 1].sub(lam.entries[j - 1]);
            args.push(arg);
            match classify(&arg)? {
                FactorClass::ExactZero => continue 'outer,
                FactorClass::Zero { coef: c } => {
                    zero_order += 1;
                    coef *= c;
                }
                FactorClass::Pole { coef: c } => {
                    pole_order += 1;
                    coef *= c;
                }
                FactorClass::Regular => {
                    let a0 = arg.at_eps0();
                    if a0.is_s_free() {
                        const_part *= c_fn(C64::new(a0.c, 0.0)).value;
                    } else {
                        let key = form_key(&a0);
                        let idx = *index.entry(key).or_insert_with(|| {
                            distinct.push(a0);
                            distinct.len() - 1
                        });
                        s_args.push(idx);
                    }
                }
            }
        }
        out.push(Side { w, pairings, rho_pair, args, s_args, const_part, zero_order, pole_order, coef });
    }
    Ok(out)
}

impl SumPlan {
    pub fn new(lam1: &SymWeight, lam2: &SymWeight) -> Result<Self> {
        let n = lam1.n();
        if lam2.n() != n {
            return Err(MsError::DimensionMismatch(n, lam2.n()));
        }
        let mut args1 = Vec::new();
        let mut args2 = Vec::new();
        let side1 = build_sides(lam1, &mut args1)?;
        let side2 = build_sides(lam2, &mut args2)?;
        let mut pairs = Vec::with_capacity(side1.len() * side2.len());
        let mut limit_pairs = Vec::new();
        let mut singular_pairs = Vec::new();
        for (i1, a) in side1.iter().enumerate() {
            for (i2, b) in side2.iter().enumerate() {
                let mut mask = 0u32;
                let mut coef = 1.0;
                let mut denoms = Vec::with_capacity(n - 1);
                for j in 0..n - 1 {
                    let d = a.pairings[j].add(b.pairings[j]);
                    if d.is_s_free() && d.c == 0.0 {
                        if d.e == 0.0 {
                            return Err(MsError::SingularConfiguration(format!(
                                "denominator j={} identically zero for ({}, {})",
                                j + 1,
                                a.w,
                                b.w
                            )));
                        }
                        mask |= 1 << j;
                        coef /= d.e;
                    }
                    denoms.push(d);
                }
                let net_order = a.zero_order as i32 + b.zero_order as i32
                    - a.pole_order as i32
                    - b.pole_order as i32
                    - mask.count_ones() as i32;
                let idx = pairs.len();
                match net_order.cmp(&0) {
                    std::cmp::Ordering::Equal => limit_pairs.push(idx),
                    std::cmp::Ordering::Less => singular_pairs.push(idx),
                    std::cmp::Ordering::Greater => {}
                }
                pairs.push(Pair { i1, i2, eps_mask: mask, coef, net_order, denoms });
            }
        }
        Ok(SumPlan {
            n,
            lam1: lam1.clone(),
            lam2: lam2.clone(),
            side1,
            side2,
            pairs,
            limit_pairs,
            singular_pairs,
            args1,
            args2,
        })
    }

    /// Plan for the L¹ sum: λ̃ = λ(s₁) + ε·dir paired against −ρ.
    pub fn l1(n: usize, k: usize, dir: &[f64]) -> Result<Self> {
        let lam = SymWeight::lambda(n, k, SVar::S1)?.perturbed(dir)?;
        Self::new(&lam, &SymWeight::neg_rho(n)?)
    }

    /// Plan for the inner-product sum: λ₁(s₁) + ε·dir against unperturbed λ₂(s₂).
    pub fn inner(n: usize, k1: usize, k2: usize, dir: &[f64]) -> Result<Self> {
        let lam1 = SymWeight::lambda(n, k1, SVar::S1)?.perturbed(dir)?;
        let lam2 = SymWeight::lambda(n, k2, SVar::S2)?;
        Self::new(&lam1, &lam2)
    }

    /// True when λ₁ involves only s₁ and λ₂ only s₂.
    pub fn is_separable(&self) -> bool {
        self.lam1.entries.iter().all(|a| a.s2 == 0.0) && self.lam2.entries.iter().all(|a| a.s1 == 0.0)
    }

    fn side_eval_limit(&self, side: &[Side], args: &[AffineForm], s1: C64, s2: C64, trunc: &TruncationParam) -> Vec<SideEval> {
        let vals: Vec<C64> = args.iter().map(|a| c_of_form(a, s1, s2, 0.0)).collect();
        side.iter()
            .map(|sd| {
                let m = sd.intertwining_limit(&vals);
                let a = m.value * trunc.power(sd.rho_pair.eval(s1, s2, 0.0));
                SideEval { a, p: sd.pairings.iter().map(|f| f.eval(s1, s2, 0.0)).collect() }
            })
            .collect()
    }

    /// Limit-mode data of side 1 at s₁ (λ₁ must not involve s₂).
    pub fn side1_limit(&self, s1: C64, trunc: &TruncationParam) -> Vec<SideEval> {
        self.side_eval_limit(&self.side1, &self.args1, s1, C64::new(0.0, 0.0), trunc)
    }

    /// Limit-mode data of side 2 at s₂ (λ₂ must not involve s₁).
    pub fn side2_limit(&self, s2: C64, trunc: &TruncationParam) -> Vec<SideEval> {
        self.side_eval_limit(&self.side2, &self.args2, C64::new(0.0, 0.0), s2, trunc)
    }

    /// Value of one limit pair from side data.
    #[inline]
    pub fn pair_limit(&self, pair: &Pair, e1: &SideEval, e2: &SideEval) -> C64 {
        let mut den = C64::new(1.0, 0.0);
        for j in 0..self.n - 1 {
            if pair.eps_mask & (1 << j) == 0 {
                den *= e1.p[j] + e2.p[j];
            }
        }
        e1.a * e2.a * pair.coef / den
    }

    fn check_limit(&self) -> Result<()> {
        if let Some(&i) = self.singular_pairs.first() {
            let p = &self.pairs[i];
            let factors = (0..self.n - 1)
                .filter(|j| p.eps_mask & (1 << j) != 0)
                .map(|j| format!("<alpha_{}> = {}", j + 1, p.denoms[j]))
                .collect();
            return Err(MsError::SingularTerm {
                w1: self.side1[p.i1].w.to_string(),
                w2: self.side2[p.i2].w.to_string(),
                factors,
            });
        }
        Ok(())
    }

    /// Limit-mode terms (value per surviving pair, in plan order).
    pub fn limit_terms(&self, s1: C64, s2: C64, trunc: &TruncationParam) -> Result<Vec<C64>> {
        self.check_limit()?;
        let e1 = self.side_eval_limit(&self.side1, &self.args1, s1, s2, trunc);
        let e2 = self.side_eval_limit(&self.side2, &self.args2, s1, s2, trunc);
        Ok(self.limit_pairs.iter().map(|&i| {
            let p = &self.pairs[i];
            self.pair_limit(p, &e1[p.i1], &e2[p.i2])
        }).collect())
    }

    /// Termwise ε → 0 limit of the sum at (s₁, s₂).
    pub fn eval_limit(&self, s1: C64, s2: C64, trunc: &TruncationParam, precision: Precision) -> Result<SumResult> {
        let terms = self.limit_terms(s1, s2, trunc)?;
        Ok(accumulate(&terms, precision))
    }

    /// All terms at finite ε, in plan order.
    pub fn finite_terms(&self, s1: C64, s2: C64, eps: f64, trunc: &TruncationParam) -> Vec<C64> {
        let side = |sd: &Side| -> C64 {
            let mut m = C64::new(1.0, 0.0);
            for a in &sd.args {
                m *= c_of_form(a, s1, s2, eps);
            }
            m * trunc.power(sd.rho_pair.eval(s1, s2, eps))
        };
        let a1: Vec<C64> = self.side1.iter().map(side).collect();
        let a2: Vec<C64> = self.side2.iter().map(side).collect();
        self.pairs
            .iter()
            .map(|p| {
                let mut den = C64::new(1.0, 0.0);
                for d in &p.denoms {
                    den *= d.eval(s1, s2, eps);
                }
                a1[p.i1] * a2[p.i2] / den
            })
            .collect()
    }

    /// The sum at finite ε.
    pub fn eval_finite(&self, s1: C64, s2: C64, eps: f64, trunc: &TruncationParam, precision: Precision) -> SumResult {
        accumulate(&self.finite_terms(s1, s2, eps, trunc), precision)
    }

    /// Sum at (s₁, s₂) according to `opts`. Richardson mode extrapolates the
    /// finite-ε sums to ε = 0; its uncertainty is |value(ε_min) − limit|.
    pub fn eval(&self, s1: C64, s2: C64, trunc: &TruncationParam, opts: &SumOptions) -> Result<SumResult> {
        match &opts.mode {
            SumMode::Limit => self.eval_limit(s1, s2, trunc, opts.precision),
            SumMode::Richardson(schedule) => {
                let runs: Vec<SumResult> =
                    schedule.iter().map(|&e| self.eval_finite(s1, s2, e, trunc, opts.precision)).collect();
                let vals: Vec<C64> = runs.iter().map(|r| r.value).collect();
                let (limit, lower) = extrapolate_checked(schedule, &vals)?;
                let i_min = schedule.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
                let _ = lower;
                let precision_used =
                    if runs.iter().any(|r| r.precision_used == Precision::Dd) { Precision::Dd } else { Precision::Double };
                Ok(SumResult { value: limit, uncertainty: (vals[i_min] - limit).norm(), precision_used })
            }
        }
    }

    /// Full term records in limit or finite mode, for reports.
    pub fn terms(&self, s1: C64, s2: C64, trunc: &TruncationParam, mode: EvalMode) -> Result<Vec<MsTerm>> {
        let eps = match mode {
            EvalMode::Limit => 0.0,
            EvalMode::Finite(e) => e,
        };
        let mut out = Vec::with_capacity(self.pairs.len());
        for p in &self.pairs {
            let (a, b) = (&self.side1[p.i1], &self.side2[p.i2]);
            let m1 = intertwine::m_op_sym(&a.w, &self.lam1, s1, s2, mode)?;
            let m2 = intertwine::m_op_sym(&b.w, &self.lam2, s1, s2, mode)?;
            let t_exponent = a.rho_pair.add(b.rho_pair).eval(s1, s2, eps);
            let denom_factors: Vec<DenomFactor> = p
                .denoms
                .iter()
                .enumerate()
                .map(|(j, d)| {
                    let eps_only = p.eps_mask & (1 << j) != 0;
                    let value = if eps_only && mode == EvalMode::Limit { C64::new(d.e, 0.0) } else { d.eval(s1, s2, eps) };
                    DenomFactor { j: j + 1, form: Some(*d), value, eps_only }
                })
                .collect();
            let value = match mode {
                EvalMode::Limit => {
                    if p.net_order > 0 {
                        C64::new(0.0, 0.0)
                    } else if p.net_order < 0 {
                        C64::new(f64::NAN, f64::NAN)
                    } else {
                        let mut v = trunc.power(t_exponent) * m1.value * m2.value;
                        for d in &denom_factors {
                            v /= d.value;
                        }
                        v
                    }
                }
                EvalMode::Finite(_) => {
                    let mut v = trunc.power(t_exponent) * m1.value * m2.value;
                    for d in &denom_factors {
                        v /= d.value;
                    }
                    v
                }
            };
            out.push(MsTerm {
                w1: a.w.clone(),
                w2: b.w.clone(),
                t_exponent,
                denom_factors,
                m1,
                m2,
                value,
                net_order: p.net_order,
            });
        }
        Ok(out)
    }
}

/// Sum with automatic double-double when a term exceeds [`DD_THRESHOLD`].
pub fn accumulate(terms: &[C64], precision: Precision) -> SumResult {
    let big = terms.iter().any(|t| t.norm() > DD_THRESHOLD);
    let p = if big { Precision::Dd } else { precision };
    let mut acc = ComplexAcc::new(p);
    let mut mag = 0.0;
    for t in terms {
        acc.add(*t);
        mag += t.norm();
    }
    let ulp = match p {
        Precision::Double => f64::EPSILON,
        Precision::Dd => f64::EPSILON * f64::EPSILON,
    };
    // rounding in the terms themselves dominates the accumulation error
    let uncertainty = 4.0 * f64::EPSILON * mag + ulp * mag;
    SumResult { value: acc.value(), uncertainty, precision_used: p }
}

fn extrapolate_checked(schedule: &[f64], vals: &[C64]) -> Result<(C64, C64)> {
    if schedule.is_empty() {
        return Err(MsError::InvalidArgument("empty ε schedule".into()));
    }
    let (limit, lower) = extrapolate_to_zero(schedule, vals);
    if !(limit.re.is_finite() && limit.im.is_finite()) {
        return Err(MsError::DivergingLimit { a: format!("{limit}"), b: format!("{lower}") });
    }
    let scale = limit.norm().max(lower.norm()).max(1e-300);
    if schedule.len() >= 2 && (limit - lower).norm() > 1e-6 * scale && (limit - lower).norm() > 1e-12 {
        return Err(MsError::DivergingLimit { a: format!("{limit}"), b: format!("{lower}") });
    }
    Ok((limit, lower))
}

/// ms_sum for numeric weights: λ̃₁ = λ₁ + ερ on each ε of the schedule,
/// Richardson-extrapolated to ε = 0.
pub fn ms_sum(lam1: &WeightVector, lam2: &WeightVector, trunc: &TruncationParam, schedule: &[f64]) -> Result<SumResult> {
    let n = lam1.n();
    if lam2.n() != n {
        return Err(MsError::DimensionMismatch(n, lam2.n()));
    }
    if n > 6 {
        return Err(MsError::InvalidDimension(n));
    }
    let ws = all_weyl(n)?;
    let r = rho(n)?;
    let mut vals = Vec::with_capacity(schedule.len());
    let mut dd = false;
    for &eps in schedule {
        let l1 = lam1.add(&r.scale(C64::new(eps, 0.0)))?;
        let side = |lam: &WeightVector| -> Result<Vec<(WeightVector, C64)>> {
            ws.iter()
                .map(|w| {
                    let mut m = C64::new(1.0, 0.0);
                    for (i, j) in inversion_set(w) {
                        m *= c_fn(lam.entries[i - 1] - lam.entries[j - 1]).value;
                    }
                    Ok((act(w, lam)?, m))
                })
                .collect()
        };
        let a = side(&l1)?;
        let b: Vec<(WeightVector, C64)> = side(lam2)?.into_iter().filter(|(_, m)| *m != C64::new(0.0, 0.0)).collect();
        let rows: Vec<Vec<C64>> = exec::map(&a, |(wa, ma)| {
            b.iter()
                .map(|(wb, mb)| {
                    let sum = WeightVector { entries: wa.entries.iter().zip(&wb.entries).map(|(x, y)| x + y).collect() };
                    let mut den = C64::new(1.0, 0.0);
                    for j in 0..n - 1 {
                        den *= sum.entries[j] - sum.entries[j + 1];
                    }
                    trunc.power(rho_covector_pairing(&sum)) * ma * mb / den
                })
                .collect()
        });
        let terms: Vec<C64> = rows.into_iter().flatten().collect();
        let r = accumulate(&terms, Precision::Double);
        dd |= r.precision_used == Precision::Dd;
        vals.push(r.value);
    }
    let (limit, _) = extrapolate_checked(schedule, &vals)?;
    let i_min = schedule.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    Ok(SumResult {
        value: limit,
        uncertainty: (vals[i_min] - limit).norm(),
        precision_used: if dd { Precision::Dd } else { Precision::Double },
    })
}

/// Perturbation direction w_*ρ used for ρ̃ = ρ − ε·w_*ρ (k = 1).
pub fn volume_direction(n: usize) -> Result<Vec<f64>> {
    let ws = w_star(n, 1)?;
    Ok(act(&ws, &rho(n)?)?.entries.iter().map(|z| z.re).collect())
}

/// A fixed generic direction with distinct, non-dyadic-aligned entries.
pub fn generic_direction(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.8125 - 0.3671875 * i as f64 + 0.0546875 * (i * i) as f64).collect()
}

/// Plan of the truncated-volume sum along λ̃ = −ρ + ε·dir.
pub fn volume_plan(n: usize, dir: &[f64]) -> Result<SumPlan> {
    let lam1 = SymWeight::neg_rho(n)?.perturbed(dir)?;
    SumPlan::new(&lam1, &SymWeight::neg_rho(n)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeResult {
    pub value: f64,
    pub uncertainty: f64,
}

/// vol^C along a given perturbation direction.
pub fn truncated_volume_along(n: usize, trunc: &TruncationParam, dir: &[f64], opts: &SumOptions) -> Result<VolumeResult> {
    let plan = volume_plan(n, dir)?;
    let zero = C64::new(0.0, 0.0);
    let r = plan.eval(zero, zero, trunc, opts)?;
    if r.value.im.abs() > 1e-8 * r.value.re.abs().max(1e-300) && r.value.im.abs() > r.uncertainty {
        return Err(MsError::PerturbationFailure(format!("non-real volume {}", r.value)));
    }
    if r.value.re <= 0.0 {
        return Err(MsError::PerturbationFailure(format!("non-positive volume {} (T too small?)", r.value.re)));
    }
    Ok(VolumeResult { value: r.value.re, uncertainty: r.uncertainty })
}

/// vol^C(Γ\G) = lim_ε Σ_w T^{⟨ρ∨,−wρ̃−ρ⟩}/∏⟨α_j∨,−wρ̃−ρ⟩ · M(w,−ρ̃) with
/// ρ̃ = ρ − ε·w_*ρ.
pub fn truncated_volume(n: usize, trunc: &TruncationParam, opts: &SumOptions) -> Result<VolumeResult> {
    truncated_volume_along(n, trunc, &volume_direction(n)?, opts)
}

/// Limit-mode volume summands keyed by w, with their T-degree.
pub fn volume_terms(n: usize, trunc: &TruncationParam) -> Result<Vec<(WeylElement, C64, f64)>> {
    let plan = volume_plan(n, &volume_direction(n)?)?;
    let zero = C64::new(0.0, 0.0);
    let vals = plan.limit_terms(zero, zero, trunc)?;
    Ok(plan
        .limit_pairs
        .iter()
        .zip(vals)
        .map(|(&i, v)| {
            let p = &plan.pairs[i];
            let deg = plan.side1[p.i1].rho_pair.add(plan.side2[p.i2].rho_pair).c;
            (plan.side1[p.i1].w.clone(), v, deg)
        })
        .collect())
}

/// Elements whose every descent is a unit descent: w(h+1) < w(h) ⇒ w(h+1)+1 = w(h).
pub fn permissible_perms(n: usize) -> Result<Vec<WeylElement>> {
    Ok(all_weyl(n)?
        .into_iter()
        .filter(|w| {
            let im = w.image();
            im.windows(2).all(|p| p[1] > p[0] || p[1] + 1 == p[0])
        })
        .collect())
}

/// The two subleading φ's: (n−1,…,2,1,n) and (1,n,…,3,2).
pub fn subleading_elements(n: usize) -> Result<(WeylElement, WeylElement)> {
    let mut a: Vec<usize> = (1..n).rev().collect();
    a.push(n);
    let mut b = vec![1];
    b.extend((2..=n).rev());
    Ok((WeylElement::new(a)?, WeylElement::new(b)?))
}

/// The limit-mode volume contributions of the two subleading φ's. For n ≥ 3
/// they must agree to 1e−8 relative and sit at T-degree −n(n−1)/2.
pub fn subleading_volume_terms(n: usize, trunc: &TruncationParam) -> Result<(C64, C64)> {
    let (pa, pb) = subleading_elements(n)?;
    let terms = volume_terms(n, trunc)?;
    let find = |w: &WeylElement| -> Result<(C64, f64)> {
        terms
            .iter()
            .find(|(x, _, _)| x == w)
            .map(|(_, v, d)| (*v, *d))
            .ok_or_else(|| MsError::PipelineInconsistency(format!("subleading element {w} does not contribute")))
    };
    let (va, da) = find(&pa)?;
    let (vb, db) = find(&pb)?;
    let want = -((n * (n - 1)) as f64) / 2.0;
    if da != want || db != want {
        return Err(MsError::PipelineInconsistency(format!("subleading T-degrees {da}, {db}; expected {want}")));
    }
    if (va - vb).norm() > 1e-8 * va.norm() {
        return Err(MsError::PipelineInconsistency(format!("subleading terms differ: {va} vs {vb}")));
    }
    Ok((va, vb))
}

/// Points where the finite-ε L¹ summand can be singular in s: zeros of
/// s-dependent denominators and s-dependent c-arguments equal to 1.
fn l1_singular_points(plan: &SumPlan, eps: f64) -> Vec<C64> {
    let mut pts = Vec::new();
    let mut push_root = |f: &AffineForm, target: f64| {
        if f.s1 != 0.0 {
            pts.push(C64::new((target - f.c - f.e * eps) / f.s1, 0.0));
        }
    };
    for side in &plan.side1 {
        for a in &side.args {
            push_root(a, 1.0);
        }
    }
    for p in &plan.pairs {
        for d in &p.denoms {
            push_root(d, 0.0);
        }
    }
    pts
}

/// Trapezoidal ∮ F(s) ds over |s − center| = r with m nodes.
pub fn circle_integral<F: Fn(C64) -> Result<C64> + Sync>(f: &F, center: C64, r: f64, m: usize) -> Result<C64> {
    let vals: Vec<Result<C64>> = exec::map_range(m, |q| {
        let th = 2.0 * PI * (q as f64 + 0.5) / m as f64;
        let ds = C64::from_polar(r, th);
        Ok(f(center + ds)? * ds * C64::new(0.0, 1.0))
    });
    let mut acc = ComplexAcc::new(Precision::Dd);
    for v in vals {
        acc.add(v?);
    }
    Ok(acc.value() * (2.0 * PI / m as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleResult {
    /// raw contour integral ∮ Σ_w Ĩ ds (2πi times the residue sum)
    pub integral: C64,
    pub uncertainty: f64,
}

/// ∮ over |s−n| = 1.5nε of the finite-ε L¹ summand for λ̃ = λ(s)+ερ, per ε
/// of the schedule, extrapolated to ε = 0.
pub fn residue_bundle_at_n(n: usize, k: usize, trunc: &TruncationParam, schedule: &[f64]) -> Result<BundleResult> {
    let dir: Vec<f64> = rho(n)?.entries.iter().map(|z| z.re).collect();
    let plan = SumPlan::l1(n, k, &dir)?;
    let center = C64::new(n as f64, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut vals = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let pts = l1_singular_points(&plan, eps);
        let mut r = 1.5 * n as f64 * eps;
        let clear = |r: f64| pts.iter().all(|p| ((p - center).norm() - r).abs() >= 0.1 * eps);
        if !clear(r) {
            r *= 1.1;
            if !clear(r) {
                return Err(MsError::ContourCollision(format!("radius {r} around s={n} at ε={eps}")));
            }
        }
        let f = |s: C64| -> Result<C64> { Ok(plan.eval_finite(s, zero, eps, trunc, Precision::Dd).value) };
        vals.push(circle_integral(&f, center, r, 64)?);
    }
    let (limit, _) = extrapolate_checked(schedule, &vals)?;
    let i_min = schedule.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    Ok(BundleResult { integral: limit, uncertainty: (vals[i_min] - limit).norm() })
}

/// The same residue sum from the limit-mode summand, whose cluster has
/// merged into s = n: ∮ over |s−n| = 1/2 with 128 nodes.
pub fn residue_at_n_limit(n: usize, k: usize, trunc: &TruncationParam) -> Result<C64> {
    let dir: Vec<f64> = rho(n)?.entries.iter().map(|z| z.re).collect();
    let plan = SumPlan::l1(n, k, &dir)?;
    let zero = C64::new(0.0, 0.0);
    let f = |s: C64| -> Result<C64> { Ok(plan.eval_limit(s, zero, trunc, Precision::Dd)?.value) };
    circle_integral(&f, C64::new(n as f64, 0.0), 0.5, 128)
}
