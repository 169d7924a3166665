//! Cancellation of the denominator poles of the inner-product sum.
//!
//! A pair (w₁, w₂) whose pairings ⟨α_j∨, w₁λ̃₁ + w₂λ̃₂⟩ equal ±z for the
//! indices j₁ < … < j_r of a [`ZeroPattern`] is grouped with its orbit
//! {τ^e(w₁, w₂)}, τ_i = (j_i j_i+1). The orbit sum is O(z^r·Ĩ(w₁,w₂)); this
//! module measures that order, the μ/Δ factor calculus behind it, and the
//! vanishing of the orbit residue.

use crate::error::{MsError, Result};
use crate::intertwine::{m_op_sym, EvalMode};
use crate::msrel::{circle_integral, TruncationParam};
use crate::numerics::fit::{linear_fit, loglog_slope};
use crate::numerics::sum::{ComplexAcc, Precision};
use crate::weyl::{all_weyl, inversion_set, AffineForm, SVar, SymWeight, WeylElement};
use crate::xifunc::c_fn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// The z grid of the order fits.
pub const Z_GRID: [f64; 4] = [1e-1, 3e-2, 1e-2, 3e-3];
pub const LEMMA_MIN_SLOPE: f64 = 1.9;
pub const ORDER_SLACK: f64 = 0.1;
pub const RESIDUE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroKind {
    /// zero at s₂ = n + aε, the pairing does not involve s₁
    TypeI,
    /// zero at s₂ = s₁ − 1 − aε
    TypeII,
}

/// Indices j with ⟨α_j∨, w₁λ̃₁+w₂λ̃₂⟩ = signs·z, where z = `form` (s₂ coefficient 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroPattern {
    pub indices: Vec<usize>,
    pub signs: Vec<i8>,
    pub kinds: Vec<ZeroKind>,
    pub form: AffineForm,
}

impl ZeroPattern {
    pub fn new(indices: Vec<usize>, signs: Vec<i8>, kinds: Vec<ZeroKind>, form: AffineForm) -> Result<Self> {
        if indices.len() != signs.len() || indices.len() != kinds.len() {
            return Err(MsError::InvalidArgument("pattern fields differ in length".into()));
        }
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(MsError::InvalidArgument("pattern indices must increase".into()));
            }
            if w[1] == w[0] + 1 {
                return Err(MsError::ImpossibilityViolation(w[0], w[1]));
            }
        }
        Ok(ZeroPattern { indices, signs, kinds, form })
    }

    pub fn empty() -> Self {
        ZeroPattern { indices: vec![], signs: vec![], kinds: vec![], form: AffineForm::ZERO }
    }

    pub fn r(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Maximal runs of indices spaced exactly 2 apart, as positions into `indices`.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, &j) in self.indices.iter().enumerate() {
            match out.last_mut() {
                Some(b) if self.indices[*b.last().unwrap()] + 2 == j => b.push(i),
                _ => out.push(vec![i]),
            }
        }
        out
    }

    pub fn has_consecutive(&self) -> bool {
        self.blocks().iter().any(|b| b.len() > 1)
    }

    /// "isolated", "consecutive" or "mixed".
    pub fn shape(&self) -> &'static str {
        let b = self.blocks();
        if b.iter().all(|x| x.len() == 1) {
            "isolated"
        } else if b.len() == 1 {
            "consecutive"
        } else {
            "mixed"
        }
    }
}

/// λ̃₁ = λ(s₁) + ερ and λ₂ = λ(s₂).
pub fn pipeline_weights(n: usize, k1: usize, k2: usize) -> Result<(SymWeight, SymWeight)> {
    let rho: Vec<f64> = (0..n).map(|i| (n as f64 - 1.0) / 2.0 - i as f64).collect();
    let lam1 = SymWeight::lambda(n, k1, SVar::S1)?.perturbed(&rho)?;
    let lam2 = SymWeight::lambda(n, k2, SVar::S2)?;
    Ok((lam1, lam2))
}

fn pair_weight(w1: &WeylElement, w2: &WeylElement, lam1: &SymWeight, lam2: &SymWeight) -> Result<SymWeight> {
    lam1.act(w1)?.add(&lam2.act(w2)?)
}

fn classify_form(l: &AffineForm, n: usize) -> Option<ZeroKind> {
    if l.s1 == 0.0 && l.c == -(n as f64) && l.e != 0.0 {
        Some(ZeroKind::TypeI)
    } else if l.s1 == -1.0 && l.c == 1.0 {
        Some(ZeroKind::TypeII)
    } else {
        None
    }
}

/// Every Type I / Type II cluster of the pair, read off the symbolic pairings.
pub fn detect_zero_patterns(
    w1: &WeylElement,
    w2: &WeylElement,
    lam1: &SymWeight,
    lam2: &SymWeight,
) -> Result<Vec<ZeroPattern>> {
    let n = lam1.n();
    let v = pair_weight(w1, w2, lam1, lam2)?;
    let mut groups: Vec<(AffineForm, ZeroKind, Vec<usize>, Vec<i8>)> = Vec::new();
    for j in 1..n {
        let p = v.pairing(j);
        if p.s2 == 0.0 {
            continue;
        }
        let sign = p.s2.signum();
        let l = p.scale(sign);
        let Some(kind) = classify_form(&l, n) else { continue };
        match groups.iter_mut().find(|g| g.0 == l) {
            Some(g) => {
                g.2.push(j);
                g.3.push(sign as i8);
            }
            None => groups.push((l, kind, vec![j], vec![sign as i8])),
        }
    }
    groups
        .into_iter()
        .map(|(l, kind, idx, signs)| {
            let kinds = vec![kind; idx.len()];
            ZeroPattern::new(idx, signs, kinds, l)
        })
        .collect()
}

/// The largest cluster of the pair (empty when there is none).
pub fn detect_zero_pattern(w1: &WeylElement, w2: &WeylElement, lam1: &SymWeight, lam2: &SymWeight) -> Result<ZeroPattern> {
    Ok(detect_zero_patterns(w1, w2, lam1, lam2)?
        .into_iter()
        .max_by_key(|p| p.r())
        .unwrap_or_else(ZeroPattern::empty))
}

/// τ^e = ∏ τ_i^{e_i}, bit i of `e` selecting τ_i.
pub fn tau_e(pattern: &ZeroPattern, e: u32, n: usize) -> Result<WeylElement> {
    let mut t = WeylElement::identity(n);
    for (i, &j) in pattern.indices.iter().enumerate() {
        if e & (1 << i) != 0 {
            t = WeylElement::simple(n, j)?.compose(&t)?;
        }
    }
    Ok(t)
}

/// The orbit {(τ^e w₁, τ^e w₂)} in the order e = 0, …, 2^r − 1.
pub fn orbit(pattern: &ZeroPattern, w1: &WeylElement, w2: &WeylElement) -> Result<Vec<(WeylElement, WeylElement)>> {
    let n = w1.n();
    (0..1u32 << pattern.r())
        .map(|e| {
            let t = tau_e(pattern, e, n)?;
            Ok((t.compose(w1)?, t.compose(w2)?))
        })
        .collect()
}

/// Ĩ(w₁,w₂) = T^{⟨ρ∨,v⟩}M(w₁,λ̃₁)M(w₂,λ̃₂)/∏_j⟨α_j∨,v⟩ with v = w₁λ̃₁+w₂λ̃₂, at finite ε.
#[allow(clippy::too_many_arguments)]
pub fn term(
    w1: &WeylElement,
    w2: &WeylElement,
    lam1: &SymWeight,
    lam2: &SymWeight,
    s1: C64,
    s2: C64,
    eps: f64,
    trunc: &TruncationParam,
) -> Result<C64> {
    let n = lam1.n();
    let v = pair_weight(w1, w2, lam1, lam2)?;
    let m1 = m_op_sym(w1, lam1, s1, s2, EvalMode::Finite(eps))?.value;
    let m2 = m_op_sym(w2, lam2, s1, s2, EvalMode::Finite(eps))?.value;
    let mut den = C64::new(1.0, 0.0);
    for j in 1..n {
        den *= v.pairing(j).eval(s1, s2, eps);
    }
    Ok(trunc.power(v.rho_pairing().eval(s1, s2, eps)) * m1 * m2 / den)
}

/// The point where the cluster coordinate z takes a given value, s₁ fixed.
pub fn point_at(pattern: &ZeroPattern, s1: C64, eps: f64, z: C64) -> C64 {
    let rest = AffineForm { s2: 0.0, ..pattern.form };
    z - rest.eval(s1, C64::new(0.0, 0.0), eps)
}

/// Pairings of w₁λ̃₁, w₂λ̃₂ and their sum at one point.
#[derive(Clone, Debug)]
pub struct PairPoint {
    pub n: usize,
    pub p1: Vec<C64>,
    pub p2: Vec<C64>,
    pub p: Vec<C64>,
    pub log_t: f64,
    /// include the T-power garnishes in the Δ factors
    pub garnish: bool,
}

impl PairPoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w1: &WeylElement,
        w2: &WeylElement,
        lam1: &SymWeight,
        lam2: &SymWeight,
        s1: C64,
        s2: C64,
        eps: f64,
        trunc: &TruncationParam,
        garnish: bool,
    ) -> Result<Self> {
        let n = lam1.n();
        let a = lam1.act(w1)?;
        let b = lam2.act(w2)?;
        let p1: Vec<C64> = (1..n).map(|j| a.pairing(j).eval(s1, s2, eps)).collect();
        let p2: Vec<C64> = (1..n).map(|j| b.pairing(j).eval(s1, s2, eps)).collect();
        let p = p1.iter().zip(&p2).map(|(x, y)| x + y).collect();
        Ok(PairPoint { n, p1, p2, p, log_t: trunc.log_t(), garnish })
    }

    fn pp(&self, j: usize) -> Result<C64> {
        if j == 0 || j >= self.n {
            return Err(MsError::IndexOutOfRange { index: j, max: self.n - 1 });
        }
        Ok(self.p[j - 1])
    }

    fn tpow(&self, x: C64) -> C64 {
        (x * self.log_t).exp()
    }

    fn garnish_at(&self, l: usize, x: C64) -> C64 {
        if self.garnish {
            let h = 0.5 * (l * (self.n - l)) as f64;
            self.tpow(x * h)
        } else {
            C64::new(1.0, 0.0)
        }
    }

    fn ratio(num: C64, den: C64) -> Result<C64> {
        if den.norm() == 0.0 {
            return Err(MsError::SingularFactor(format!("zero denominator over {num}")));
        }
        Ok(num / den)
    }

    /// μ_j = c(⟨α_j∨,w₁λ̃₁⟩)c(⟨α_j∨,w₂λ̃₂⟩)T^{−⟨α_j∨,v⟩}.
    pub fn factor_mu(&self, j: usize) -> Result<C64> {
        let pj = self.pp(j)?;
        Ok(c_fn(self.p1[j - 1]).value * c_fn(self.p2[j - 1]).value * self.tpow(-pj))
    }

    /// Δ̲_{j−1} = ⟨α_{j−1}∨,v⟩/⟨α_{j−1}∨+α_j∨,v⟩ (garnish T^{½(j−1)(n−j+1)⟨α_j∨,v⟩}).
    pub fn factor_delta_under(&self, j: usize) -> Result<C64> {
        let (a, b) = (self.pp(j - 1)?, self.pp(j)?);
        Ok(Self::ratio(a, a + b)? * self.garnish_at(j - 1, b))
    }

    /// Δ̄_{j+1} = ⟨α_{j+1}∨,v⟩/⟨α_j∨+α_{j+1}∨,v⟩ (garnish T^{½(j+1)(n−j−1)⟨α_j∨,v⟩}).
    pub fn factor_delta_over(&self, j: usize) -> Result<C64> {
        let (a, b) = (self.pp(j + 1)?, self.pp(j)?);
        Ok(Self::ratio(a, a + b)? * self.garnish_at(j + 1, b))
    }

    /// Δ̲̄_{j+1} between j and j+2 = ⟨α_{j+1}∨,v⟩/⟨α_j∨+α_{j+1}∨+α_{j+2}∨,v⟩
    /// (garnish T^{½(j+1)(n−j−1)⟨α_j∨+α_{j+2}∨,v⟩}).
    pub fn factor_delta_double(&self, j: usize) -> Result<C64> {
        let (a, b, c) = (self.pp(j)?, self.pp(j + 1)?, self.pp(j + 2)?);
        Ok(Self::ratio(b, a + b + c)? * self.garnish_at(j + 1, a + c))
    }

    /// ℰ_e = ∏_ℓ L_ℓ for the flips selected by `e`.
    pub fn script_e(&self, pattern: &ZeroPattern, e: u32) -> Result<C64> {
        let idx = &pattern.indices;
        let on = |i: usize| e & (1 << i) != 0;
        let mut v = C64::new(1.0, 0.0);
        for (i, &j) in idx.iter().enumerate() {
            if !on(i) {
                continue;
            }
            v *= self.factor_mu(j)?;
            let lower_joined = i > 0 && on(i - 1) && idx[i - 1] + 2 == j;
            if j > 1 && !lower_joined {
                v *= self.factor_delta_under(j)?;
            }
            if j + 1 < self.n {
                let upper_joined = i + 1 < idx.len() && on(i + 1) && idx[i + 1] == j + 2;
                v *= if upper_joined { self.factor_delta_double(j)? } else { self.factor_delta_over(j)? };
            }
        }
        Ok(v)
    }

    /// Σ_e (−1)^{|e|}ℰ_e.
    pub fn factor_sum(&self, pattern: &ZeroPattern) -> Result<C64> {
        let mut acc = ComplexAcc::new(Precision::Dd);
        for e in 0..1u32 << pattern.r() {
            let sgn = if e.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(self.script_e(pattern, e)? * sgn);
        }
        Ok(acc.value())
    }
}

/// One member of an orbit at one z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRow {
    pub e: u32,
    pub w1: String,
    pub w2: String,
    /// Ĩ(τ^e w₁, τ^e w₂)/Ĩ(w₁, w₂)
    pub ratio: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    pub r: usize,
    pub shape: String,
    pub z_grid: Vec<f64>,
    /// |Σ_e Ĩ(τ^e w)/Ĩ(w)| per z
    pub sums: Vec<f64>,
    /// fitted order with the largest z dropped
    pub order: f64,
    /// per-e ratios at the smallest z
    pub table: Vec<OrbitRow>,
}

/// Where and how to evaluate an orbit. The grid value z is placed at
/// cluster coordinate z·z_unit: Type I factors contain c(−1+O(ε))c(1+O(ε)+z),
/// which is 1+O(z/ε), so z has to be small against ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub s1: C64,
    pub eps: f64,
    pub z_unit: f64,
}

impl ProbeOptions {
    pub fn for_n(n: usize) -> Self {
        ProbeOptions { s1: C64::new(n as f64 - 0.3, 0.37), eps: 1e-1, z_unit: 1e-2 }
    }
}

/// Σ_e Ĩ(τ^e w₁, τ^e w₂)/Ĩ(w₁, w₂) on a z grid with the fitted vanishing order.
#[allow(clippy::too_many_arguments)]
pub fn cancellation_sum(
    pattern: &ZeroPattern,
    w1: &WeylElement,
    w2: &WeylElement,
    lam1: &SymWeight,
    lam2: &SymWeight,
    trunc: &TruncationParam,
    z_grid: &[f64],
    probe: &ProbeOptions,
) -> Result<CancellationReport> {
    let r = pattern.r();
    if r == 0 || r > 4 {
        return Err(MsError::InvalidArgument(format!("orbit sums need 1 <= r <= 4, got {r}")));
    }
    if z_grid.len() < 3 {
        return Err(MsError::InvalidArgument("z grid needs at least three points".into()));
    }
    let members = orbit(pattern, w1, w2)?;
    let precision = if r >= 2 { Precision::Dd } else { Precision::Double };
    let mut sums = Vec::new();
    let mut table = Vec::new();
    for (q, &z) in z_grid.iter().enumerate() {
        let s2 = point_at(pattern, probe.s1, probe.eps, C64::new(z * probe.z_unit, 0.0));
        let base = term(w1, w2, lam1, lam2, probe.s1, s2, probe.eps, trunc)?;
        if base.norm() == 0.0 || !base.is_finite() {
            return Err(MsError::SingularFactor(format!("base term {base} at z = {z}")));
        }
        let mut acc = ComplexAcc::new(precision);
        let mut rows = Vec::new();
        for (e, (a, b)) in members.iter().enumerate() {
            let ratio = term(a, b, lam1, lam2, probe.s1, s2, probe.eps, trunc)? / base;
            acc.add(ratio);
            rows.push(OrbitRow { e: e as u32, w1: a.to_string(), w2: b.to_string(), ratio });
        }
        sums.push(acc.value().norm());
        if q + 1 == z_grid.len() {
            table = rows;
        }
    }
    let order = fit_dropping_largest(z_grid, &sums);
    Ok(CancellationReport { r, shape: pattern.shape().into(), z_grid: z_grid.to_vec(), sums, order, table })
}

/// Log-log slope of (z, y) after removing the largest z.
pub fn fit_dropping_largest(z: &[f64], y: &[f64]) -> f64 {
    let imax = (0..z.len()).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap_or(0);
    let (zs, ys): (Vec<f64>, Vec<f64>) = z.iter().zip(y).enumerate().filter(|(i, _)| *i != imax).map(|(_, (a, b))| (*a, *b)).unzip();
    loglog_slope(&zs, &ys)
}

/// [`cancellation_sum`] that fails below order r − 0.1.
#[allow(clippy::too_many_arguments)]
pub fn verify_cancellation(
    pattern: &ZeroPattern,
    w1: &WeylElement,
    w2: &WeylElement,
    lam1: &SymWeight,
    lam2: &SymWeight,
    trunc: &TruncationParam,
    z_grid: &[f64],
    probe: &ProbeOptions,
) -> Result<CancellationReport> {
    let rep = cancellation_sum(pattern, w1, w2, lam1, lam2, trunc, z_grid, probe)?;
    let needed = rep.r as f64 - ORDER_SLACK;
    if rep.order < needed {
        return Err(MsError::CancellationFailure {
            order: rep.order,
            needed,
            table: rep.z_grid.iter().cloned().zip(rep.sums.iter().cloned()).collect(),
        });
    }
    Ok(rep)
}

/// An abstract consecutive pair j, j+2 of pattern indices for Lemma checks:
/// ⟨α_j∨,v⟩ = z, ⟨α_{j+2}∨,v⟩ = ±z, ⟨α_{j+1}∨,v⟩ = u.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub n: usize,
    pub j: usize,
    pub equal_signs: bool,
    pub u: C64,
    pub t: f64,
}

/// |Δ̲̄_{j+1} − Δ̄_{j+1}Δ̲_{j+1}| per z, with the T garnishes.
pub fn lemma_table(cfg: &LemmaConfig, z_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if cfg.j == 0 || cfg.j + 2 >= cfg.n {
        return Err(MsError::IndexOutOfRange { index: cfg.j, max: cfg.n });
    }
    let trunc = TruncationParam::new(cfg.t)?;
    z_grid
        .iter()
        .map(|&z| {
            let zc = C64::new(z, 0.0);
            let mut p = vec![C64::new(0.7, 0.2); cfg.n - 1];
            p[cfg.j - 1] = zc;
            p[cfg.j] = cfg.u;
            p[cfg.j + 1] = if cfg.equal_signs { zc } else { -zc };
            let pt = PairPoint { n: cfg.n, p1: p.clone(), p2: vec![C64::new(0.0, 0.0); cfg.n - 1], p, log_t: trunc.log_t(), garnish: true };
            let d = pt.factor_delta_double(cfg.j)? - pt.factor_delta_over(cfg.j)? * pt.factor_delta_under(cfg.j + 2)?;
            Ok((z, d.norm()))
        })
        .collect()
}

/// Fitted slope of log|Δ̲̄ − Δ̄Δ̲| against log z; LemmaViolation below 1.9.
pub fn lemma_approx_cancel_check(cfg: &LemmaConfig, z_grid: &[f64]) -> Result<f64> {
    let table = lemma_table(cfg, z_grid)?;
    let lx: Vec<f64> = table.iter().map(|r| r.0.ln()).collect();
    let ly: Vec<f64> = table.iter().map(|r| r.1.ln()).collect();
    let slope = linear_fit(&lx, &ly).0;
    if slope < LEMMA_MIN_SLOPE {
        return Err(MsError::LemmaViolation { slope, table });
    }
    Ok(slope)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidueCheck {
    pub orbit_residue: f64,
    pub max_term_residue: f64,
    pub relative: f64,
}

/// Residue of the orbit sum at z = 0 by a circle of radius ε/4 in s₂,
/// against the largest residue of a single member.
pub fn orbit_residue(
    pattern: &ZeroPattern,
    w1: &WeylElement,
    w2: &WeylElement,
    lam1: &SymWeight,
    lam2: &SymWeight,
    trunc: &TruncationParam,
    s1: C64,
    eps: f64,
) -> Result<ResidueCheck> {
    let members = orbit(pattern, w1, w2)?;
    let center = point_at(pattern, s1, eps, C64::new(0.0, 0.0));
    let rad = eps / 4.0;
    let m = 96;
    let mut max_term = 0.0f64;
    for (a, b) in &members {
        let f = |s2: C64| term(a, b, lam1, lam2, s1, s2, eps, trunc);
        max_term = max_term.max(circle_integral(&f, center, rad, m)?.norm());
    }
    let g = |s2: C64| -> Result<C64> {
        let mut acc = ComplexAcc::new(Precision::Dd);
        for (a, b) in &members {
            acc.add(term(a, b, lam1, lam2, s1, s2, eps, trunc)?);
        }
        Ok(acc.value())
    };
    let res = circle_integral(&g, center, rad, m)?.norm();
    Ok(ResidueCheck { orbit_residue: res, max_term_residue: max_term, relative: res / max_term.max(f64::MIN_POSITIVE) })
}

/// A cluster found by the scan, with its orbit representative.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternInstance {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub w1: WeylElement,
    pub w2: WeylElement,
    pub pattern: ZeroPattern,
}

/// w₂ keeping the order inside both blocks of λ(s₂); all others give M(w₂,λ₂) = 0.
fn block_order_preserving(n: usize, k: usize) -> Result<Vec<WeylElement>> {
    Ok(all_weyl(n)?
        .into_iter()
        .filter(|w| inversion_set(w).iter().all(|&(i, j)| (i <= n - k) != (j <= n - k)))
        .collect())
}

/// All clusters of the inner-product sum for (n, k₁, k₂), one per orbit.
pub fn scan_patterns(n: usize, k1: usize, k2: usize) -> Result<Vec<PatternInstance>> {
    let (lam1, lam2) = pipeline_weights(n, k1, k2)?;
    let w1s = all_weyl(n)?;
    let w2s = block_order_preserving(n, k2)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for w2 in &w2s {
        for w1 in &w1s {
            for pattern in detect_zero_patterns(w1, w2, &lam1, &lam2)? {
                let mut key: Vec<(Vec<usize>, Vec<usize>)> = orbit(&pattern, w1, w2)?
                    .into_iter()
                    .map(|(a, b)| (a.image().to_vec(), b.image().to_vec()))
                    .collect();
                key.sort();
                if seen.insert((key, pattern.indices.clone(), pattern.kinds[0] == ZeroKind::TypeI)) {
                    out.push(PatternInstance { n, k1, k2, w1: w1.clone(), w2: w2.clone(), pattern });
                }
            }
        }
    }
    Ok(out)
}
