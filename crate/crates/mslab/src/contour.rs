//! Vertical-line quadrature and the two pipelines built on it: the truncated
//! L¹ integral ∫ H^C E_f and the truncated inner product ⟨Λ^C E_{f₁}, E_{f₂}⟩.
//!
//! Both are written as main term plus itemized remainders and are checked
//! against a direct quadrature on lines to the right of every pole. Line
//! integrals are normalized as (1/2πi)∫ ds; integrands are conjugate
//! symmetric, so only Im s ≥ 0 is integrated and twice the real part kept.

use crate::error::{MsError, Result};
use crate::exec;
use crate::mellin::TestFunction;
use crate::msrel::{circle_integral, generic_direction, truncated_volume, SideEval, SumOptions, SumPlan, TruncationParam};
use crate::numerics::quad::{adaptive, panel_nodes, QuadOptions};
use crate::numerics::sum::{ComplexAcc, Precision};
use crate::weyl::AffineForm;
use crate::xifunc::xi_nk;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_HEIGHT: f64 = 120.0;
pub const DEFAULT_HEIGHT_2D: f64 = 80.0;
/// Largest height cut accepted (special-function validity).
pub const MAX_HEIGHT: f64 = 200.0;
/// Polynomial growth allowed for the Weyl sum on vertical lines.
pub const GROWTH_EXPONENT: f64 = 0.6;
/// Local error target for adaptive panels.
pub const LOCAL_TOL: f64 = 1e-10;
const DEFAULT_NODE_BUDGET: usize = 2_000_000;
/// Width of a fixed 2D panel, in units of 1/ω (ω the local frequency).
const PANEL_PHASE: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// integrate over −Λ ≤ t ≤ Λ
    None,
    /// F(s̄) = conj F(s): integrate over 0 ≤ t ≤ Λ and keep 2·Re
    Conjugate,
}

/// A vertical line Re s = abscissa cut at |Im s| ≤ height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub abscissa: f64,
    pub height: f64,
    pub node_budget: usize,
    /// bound on the discarded part |Im s| > height, filled in by the integrator
    pub tail_bound: f64,
    pub symmetry: Symmetry,
}

impl ContourSpec {
    pub fn new(abscissa: f64, height: f64) -> Result<Self> {
        if !(height > 0.0 && height <= MAX_HEIGHT) {
            return Err(MsError::InvalidArgument(format!("height cut {height} outside (0, {MAX_HEIGHT}]")));
        }
        Ok(ContourSpec {
            abscissa,
            height,
            node_budget: DEFAULT_NODE_BUDGET,
            tail_bound: f64::INFINITY,
            symmetry: Symmetry::Conjugate,
        })
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn with_budget(mut self, nodes: usize) -> Self {
        self.node_budget = nodes;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerticalResult {
    /// (1/2πi)∫ F(s) ds over the cut line
    pub value: C64,
    pub quad_error: f64,
    pub tail_bound: f64,
    /// (1/2π)∫|F| over the cut line; value/abs_integral measures cancellation
    pub abs_integral: f64,
    pub evals: usize,
    pub spec: ContourSpec,
}

impl VerticalResult {
    pub fn error(&self) -> f64 {
        self.quad_error + self.tail_bound
    }
}

/// ∫_Λ^∞ m(t) dt over doubling intervals. Fails when the pieces stop
/// shrinking, i.e. when m is not integrable.
pub fn tail_integral<M: Fn(f64) -> f64 + Sync + ?Sized>(m: &M, lam: f64) -> Result<f64> {
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-3, initial_panels: 4, max_panels: 512, roundoff_floor: 1e3 };
    let g = |t: f64| C64::new(m(t), 0.0);
    let mut total = 0.0;
    let mut a = lam;
    for _ in 0..48 {
        let b = 2.0 * a;
        let r = adaptive(&g, a, b, &opts)?;
        let piece = r.value.re.abs() + r.error;
        total += piece;
        if piece <= 1e-6 * total && m(b) * b <= 1e-6 * total {
            return Ok(1.05 * total);
        }
        a = b;
    }
    Err(MsError::QuadratureFailure { worst: a, detail: "tail majorant is not integrable".into() })
}

/// (1/2πi)∫ F(s) ds along `spec`, with a certified tail when a majorant
/// m(|t|) ≥ |F(c+it)| for |t| ≥ Λ is supplied (otherwise the tail bound is ∞).
pub fn vertical_integral<F, M>(f: &F, majorant: Option<&M>, spec: &ContourSpec) -> Result<VerticalResult>
where
    F: Fn(C64) -> C64 + Sync + ?Sized,
    M: Fn(f64) -> f64 + Sync + ?Sized,
{
    let c = spec.abscissa;
    let lam = spec.height;
    let g = |t: f64| f(C64::new(c, t));
    let (a, b) = match spec.symmetry {
        Symmetry::Conjugate => (0.0, lam),
        Symmetry::None => (-lam, lam),
    };
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: LOCAL_TOL,
        initial_panels: ((b - a) / 2.0).ceil().max(8.0) as usize,
        max_panels: (spec.node_budget / 21).max(16),
        roundoff_floor: 1e3,
    };
    let r = adaptive(&g, a, b, &opts)?;
    let (value, scale) = match spec.symmetry {
        Symmetry::Conjugate => (C64::new(r.value.re / PI, 0.0), 1.0 / PI),
        Symmetry::None => (r.value / (2.0 * PI), 1.0 / (2.0 * PI)),
    };
    let tail_bound = match majorant {
        Some(m) => tail_integral(m, lam)? / PI,
        None => f64::INFINITY,
    };
    let mut out_spec = *spec;
    out_spec.tail_bound = tail_bound;
    Ok(VerticalResult {
        value,
        quad_error: r.error * scale,
        tail_bound,
        abs_integral: r.abs_integral * scale,
        evals: r.evals,
        spec: out_spec,
    })
}

/// Options shared by the pipelines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// height cut of one-dimensional line integrals
    pub height: f64,
    /// height cut of each variable in double integrals
    pub height_2d: f64,
    pub precision: Precision,
    pub node_budget: usize,
    /// perturbation direction of λ₁ (a generic one by default)
    pub direction: Option<Vec<f64>>,
    /// run the direct pre-shift quadrature
    pub cross_check: bool,
    /// repeat the double integrals at half height and report the change
    pub height_drift: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            height: DEFAULT_HEIGHT,
            height_2d: DEFAULT_HEIGHT_2D,
            precision: Precision::Double,
            node_budget: DEFAULT_NODE_BUDGET,
            direction: None,
            cross_check: true,
            height_drift: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownItem {
    pub name: String,
    pub value: f64,
    pub error: f64,
}

/// Direct quadrature of the unshifted integral against the assembled total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub direct: f64,
    pub direct_error: f64,
    /// error of the total plus the direct error plus the horizontal-segment bound
    pub combined_error: f64,
    pub discrepancy: f64,
    pub consistent: bool,
    /// ∫|F| over the direct contour relative to |direct|
    pub cancellation: f64,
    /// |Δdirect| + |Δremain| when the double-integral height is halved: an
    /// empirical error scale, for cases where the certified tail is uninformative
    pub height_drift: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormulaBreakdown {
    pub main: f64,
    pub residue_extra: f64,
    pub shifted_integral: f64,
    pub slack: f64,
    pub total: f64,
    pub main_error: f64,
    pub residue_extra_error: f64,
    pub shifted_error: f64,
    /// the pieces behind residue_extra and shifted_integral
    pub items: Vec<BreakdownItem>,
    pub contours: Vec<ContourSpec>,
    pub cross_check: Option<CrossCheck>,
    /// exponent of the T-growth bound of the remaining integral (inner product only)
    pub kappa: Option<f64>,
}

impl FormulaBreakdown {
    fn assemble(main: (f64, f64), residue_extra: (f64, f64), shifted: (f64, f64)) -> Self {
        let slack = 0.0;
        FormulaBreakdown {
            main: main.0,
            residue_extra: residue_extra.0,
            shifted_integral: shifted.0,
            slack,
            total: main.0 + residue_extra.0 + shifted.0 + slack,
            main_error: main.1,
            residue_extra_error: residue_extra.1,
            shifted_error: shifted.1,
            items: Vec::new(),
            contours: Vec::new(),
            cross_check: None,
            kappa: None,
        }
    }

    pub fn total_error(&self) -> f64 {
        self.main_error + self.residue_extra_error + self.shifted_error
    }

    /// Err(PipelineInconsistency) when the cross-check ran and failed.
    pub fn verify(&self) -> Result<()> {
        match &self.cross_check {
            Some(cc) if !cc.consistent => Err(MsError::PipelineInconsistency(format!(
                "direct {:.12e} vs total {:.12e}: |diff| {:.3e} > 3 x {:.3e}",
                cc.direct, self.total, cc.discrepancy, cc.combined_error
            ))),
            _ => Ok(()),
        }
    }
}

fn check_eta(eta: f64, name: &str) -> Result<()> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(MsError::InvalidArgument(format!("{name}={eta} must lie in (0,1)")))
    }
}

fn direction(n: usize, opts: &PipelineOptions) -> Vec<f64> {
    opts.direction.clone().unwrap_or_else(|| generic_direction(n))
}

/// Mf(s)·Σ_w Ĩ(w, id) for the L¹ sum of rank k.
struct L1Kernel {
    plan: SumPlan,
    f: TestFunction,
    trunc: TruncationParam,
    precision: Precision,
}

impl L1Kernel {
    fn new(n: usize, k: usize, f: &TestFunction, trunc: &TruncationParam, opts: &PipelineOptions) -> Result<Self> {
        let plan = SumPlan::l1(n, k, &direction(n, opts))?;
        let kern = L1Kernel { plan, f: *f, trunc: *trunc, precision: opts.precision };
        // surfaces unmatched singular terms once, up front
        kern.plan.eval_limit(C64::new(n as f64 + 0.5, 1.0), C64::new(0.0, 0.0), trunc, opts.precision)?;
        Ok(kern)
    }

    fn sum(&self, s: C64) -> C64 {
        self.plan
            .eval_limit(s, C64::new(0.0, 0.0), &self.trunc, self.precision)
            .map(|r| r.value)
            .unwrap_or(C64::new(f64::NAN, f64::NAN))
    }

    fn integrand(&self, s: C64) -> C64 {
        self.f.mellin(s).unwrap_or(C64::new(f64::NAN, f64::NAN)) * self.sum(s)
    }

    /// m(t) = |Mf|-majorant · G · (t/Λ)^{0.6}, with G the largest |Σ| sampled on [Λ/2, Λ].
    fn majorant(&self, c: f64, lam: f64) -> impl Fn(f64) -> f64 + Sync + '_ {
        let g = (0..=32)
            .map(|i| {
                let t = lam * (0.5 + 0.5 * i as f64 / 32.0);
                self.sum(C64::new(c, t)).norm() / (t / lam).powf(GROWTH_EXPONENT)
            })
            .fold(0.0, f64::max);
        move |t: f64| self.f.mellin_majorant(C64::new(c, t)) * g * (t / lam).powf(GROWTH_EXPONENT)
    }

    fn line(&self, c: f64, opts: &PipelineOptions) -> Result<VerticalResult> {
        let spec = ContourSpec::new(c, opts.height)?.with_budget(opts.node_budget);
        let f = |s: C64| self.integrand(s);
        let m = self.majorant(c, opts.height);
        vertical_integral(&f, Some(&m), &spec)
    }

    /// (1/π)·(c_hi − c_lo)·max |F| on the segment Im s = Λ, with a safety factor 2.
    fn horizontal_bound(&self, c_lo: f64, c_hi: f64, lam: f64) -> f64 {
        let m = (0..=24)
            .map(|i| self.integrand(C64::new(c_lo + (c_hi - c_lo) * i as f64 / 24.0, lam)).norm())
            .fold(0.0, f64::max);
        2.0 * (c_hi - c_lo) * m / PI
    }
}

/// Mf(n)·ξ(n,k)·vol^C with its error.
fn main_term(n: usize, k: usize, f: &TestFunction, trunc: &TruncationParam) -> Result<(f64, f64)> {
    let vol = truncated_volume(n, trunc, &SumOptions::default())?;
    let mf = f.mellin(C64::new(n as f64, 0.0))?.re;
    let v = mf * xi_nk(n, k)? * vol.value;
    Ok((v, 1e-13 * v.abs() + (mf * xi_nk(n, k)?).abs() * vol.uncertainty))
}

/// The L¹ remainder (1/2πi)∫_{Re s = n−η} Mf(s)Σ_w Ĩ ds.
pub fn l1_shifted(
    n: usize,
    k: usize,
    f: &TestFunction,
    trunc: &TruncationParam,
    eta: f64,
    opts: &PipelineOptions,
) -> Result<VerticalResult> {
    check_eta(eta, "eta")?;
    L1Kernel::new(n, k, f, trunc, opts)?.line(n as f64 - eta, opts)
}

fn consistency(direct: &VerticalResult, total: f64, total_err: f64, horizontal: f64) -> CrossCheck {
    let combined = direct.error() + total_err + horizontal;
    let discrepancy = (direct.value.re - total).abs();
    CrossCheck {
        direct: direct.value.re,
        direct_error: direct.error(),
        combined_error: combined,
        discrepancy,
        consistent: discrepancy <= 3.0 * combined,
        cancellation: direct.abs_integral / direct.value.re.abs(),
        height_drift: None,
    }
}

/// The truncated L¹ pipeline without the final consistency verdict; the
/// cross-check (if requested) is recorded in the breakdown.
pub fn truncated_l1_report(
    n: usize,
    k: usize,
    f: &TestFunction,
    trunc: &TruncationParam,
    eta: f64,
    opts: &PipelineOptions,
) -> Result<FormulaBreakdown> {
    check_eta(eta, "eta")?;
    if !f.is_smooth() {
        return Err(MsError::InvalidArgument("truncated_l1 needs a smoothed test function".into()));
    }
    let kern = L1Kernel::new(n, k, f, trunc, opts)?;
    let main = main_term(n, k, f, trunc)?;
    let shifted = kern.line(n as f64 - eta, opts)?;
    let mut bd = FormulaBreakdown::assemble(main, (0.0, 0.0), (shifted.value.re, shifted.error()));
    bd.items.push(BreakdownItem { name: "shifted_integral".into(), value: shifted.value.re, error: shifted.error() });
    bd.contours.push(shifted.spec);
    if opts.cross_check {
        let c_hi = n as f64 + 0.5;
        let direct = kern.line(c_hi, opts)?;
        let horizontal = kern.horizontal_bound(n as f64 - eta, c_hi, opts.height);
        bd.contours.push(direct.spec);
        bd.items.push(BreakdownItem { name: "horizontal_segments".into(), value: 0.0, error: horizontal });
        bd.cross_check = Some(consistency(&direct, bd.total, bd.total_error(), horizontal));
    }
    Ok(bd)
}

/// ∫ H^C E_f = Mf(n)ξ(n,k)vol^C + (Re s = n−η remainder), cross-checked
/// against the direct line Re s = n + 1/2.
pub fn truncated_l1(
    n: usize,
    k: usize,
    f: &TestFunction,
    trunc: &TruncationParam,
    eta: f64,
    opts: &PipelineOptions,
) -> Result<FormulaBreakdown> {
    let bd = truncated_l1_report(n, k, f, trunc, eta, opts)?;
    bd.verify()?;
    Ok(bd)
}

/// κ = ⟨ρ∨, w₁λ̃₁(n−η₁) + w₂λ̃₂(n−η₂)⟩ for the extremal pair
/// w₁λ̃₁ = ρ + (0,…,0; η₁,…,η₁) and w₂λ̃₂ = −ρ + (n,…,n; η₂,…,η₂).
pub fn error_kappa(n: usize, k1: usize, k2: usize, eta1: f64, eta2: f64) -> Result<f64> {
    for k in [k1, k2] {
        if k == 0 || k >= n {
            return Err(MsError::InvalidParabolic { n, k });
        }
    }
    let rho: Vec<f64> = (0..n).map(|i| (n as f64 - 1.0) / 2.0 - i as f64).collect();
    let mut kappa = 0.0;
    for (i, r) in rho.iter().enumerate() {
        let v1 = r + if i >= n - k1 { eta1 } else { 0.0 };
        let v2 = -r + if i >= n - k2 { eta2 } else { n as f64 };
        kappa += r * (v1 + v2);
    }
    Ok(kappa)
}

/// Largest Re of the T-exponent over the surviving pairs at (n−η₁, n−η₂).
pub fn observed_kappa(plan: &SumPlan, eta1: f64, eta2: f64) -> f64 {
    let n = plan.n as f64;
    let (s1, s2) = (C64::new(n - eta1, 0.0), C64::new(n - eta2, 0.0));
    plan.limit_pairs
        .iter()
        .map(|&i| {
            let p = &plan.pairs[i];
            plan.side1[p.i1].rho_pair.add(plan.side2[p.i2].rho_pair).eval(s1, s2, 0.0).re
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A pole hyperplane a·s₁ + b·s₂ + c = 0 of individual terms that a contour
/// shift crosses, with the residue of the full sum measured across it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossedPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// 1 when crossed while moving s₁, 2 while moving s₂
    pub stage: u8,
    /// |residue of the sum| / (largest |term| · radius)
    pub relative_residue: f64,
}

/// Relative threshold below which a measured residue counts as cancelled.
pub const RESIDUE_CANCEL_TOL: f64 = 1e-6;

fn plane_of(d: &AffineForm) -> Option<(f64, f64, f64)> {
    if d.is_s_free() {
        None
    } else {
        Some((d.s1, d.s2, d.c))
    }
}

/// Every term-level pole hyperplane crossed by the schedule
/// (c₁, c₂) → (n−η₁, c₂) → (n−η₁, n−η₂), apart from the expected s_i = n.
/// Each is tested by a small circle in the moving variable; a residue that
/// does not cancel is a schedule violation.
pub fn crossing_scan(
    plan: &SumPlan,
    trunc: &TruncationParam,
    start: (f64, f64),
    eta1: f64,
    eta2: f64,
    precision: Precision,
) -> Result<Vec<CrossedPlane>> {
    let n = plan.n as f64;
    let mut planes: Vec<(f64, f64, f64)> = Vec::new();
    for &i in &plan.limit_pairs {
        let p = &plan.pairs[i];
        for (j, d) in p.denoms.iter().enumerate() {
            if p.eps_mask & (1 << j) != 0 {
                continue;
            }
            if let Some(pl) = plane_of(&d.at_eps0()) {
                // normalize sign so the first nonzero coefficient is positive
                let sg = if pl.0 != 0.0 { pl.0.signum() } else { pl.1.signum() };
                let pl = (pl.0 * sg, pl.1 * sg, pl.2 * sg);
                if !planes.contains(&pl) {
                    planes.push(pl);
                }
            }
        }
    }
    let mut out = Vec::new();
    let t_probe = 3.3;
    for &(a, b, c) in &planes {
        // stage 1: Re s₂ = c₂ fixed, Re s₁ moves from c₁ to n−η₁
        let stages = [(1u8, a, b, start.1, (n - eta1, start.0)), (2u8, b, a, n - eta1, (n - eta2, start.1))];
        for (stage, coef_mov, coef_fix, fixed_re, (lo, hi)) in stages {
            if coef_mov == 0.0 {
                continue;
            }
            let root = -(coef_fix * fixed_re + c) / coef_mov;
            if !(root > lo && root < hi) {
                continue;
            }
            if coef_fix == 0.0 && (root - n).abs() < 1e-12 {
                continue;
            }
            let fixed = C64::new(fixed_re, t_probe);
            let center = -(coef_fix * fixed + c) / coef_mov;
            let r = 0.02;
            let eval = |z: C64| -> Result<Vec<C64>> {
                let (s1, s2) = if stage == 1 { (z, fixed) } else { (fixed, z) };
                plan.limit_terms(s1, s2, trunc)
            };
            let f = |z: C64| -> Result<C64> {
                let terms = eval(z)?;
                let mut acc = ComplexAcc::new(if precision == Precision::Dd { precision } else { Precision::Dd });
                for t in &terms {
                    acc.add(*t);
                }
                Ok(acc.value())
            };
            let big = eval(center + r)?.iter().map(|t| t.norm()).fold(0.0, f64::max);
            let res = circle_integral(&f, center, r, 64)? / (2.0 * PI);
            let rel = res.norm() / (big * r).max(f64::MIN_POSITIVE);
            out.push(CrossedPlane { a, b, c, stage, relative_residue: rel });
        }
    }
    Ok(out)
}

/// Tensor GK21 grid on one variable.
struct Axis {
    t: Vec<f64>,
    wk: Vec<f64>,
    wg: Vec<f64>,
    /// panel index of each node
    panel: Vec<usize>,
    panels: usize,
}

impl Axis {
    /// Breakpoints: graded towards t = 0 at scale `d` when a singular line is
    /// close, then uniform of width `w` out to Λ. `full` mirrors to [−Λ, Λ].
    fn new(lam: f64, w: f64, d: Option<f64>, full: bool) -> Self {
        let mut br = vec![0.0];
        if let Some(d) = d {
            let mut x = d / 4.0;
            while x < w {
                br.push(x);
                x *= 2.0;
            }
        }
        let start = *br.last().unwrap();
        let m = ((lam - start) / w).ceil().max(1.0) as usize;
        let h = (lam - start) / m as f64;
        for i in 1..=m {
            br.push(start + h * i as f64);
        }
        if full {
            let mut neg: Vec<f64> = br.iter().skip(1).rev().map(|x| -x).collect();
            neg.extend_from_slice(&br);
            br = neg;
        }
        let mut ax = Axis { t: Vec::new(), wk: Vec::new(), wg: Vec::new(), panel: Vec::new(), panels: br.len() - 1 };
        for (p, win) in br.windows(2).enumerate() {
            for (x, k, g) in panel_nodes(win[0], win[1]) {
                ax.t.push(x);
                ax.wk.push(k);
                ax.wg.push(g);
                ax.panel.push(p);
            }
        }
        ax
    }
}

/// Side data at every node of one axis, with Mf folded into the A-values.
struct SideTable {
    sides: usize,
    j: usize,
    a: Vec<C64>,
    p: Vec<C64>,
    /// |Mf|·Σ_w |A_w| per node
    env: Vec<f64>,
}

impl SideTable {
    fn build(evals: Vec<(C64, Vec<SideEval>)>, j: usize) -> Self {
        let sides = evals.first().map(|e| e.1.len()).unwrap_or(0);
        let mut t = SideTable { sides, j, a: Vec::new(), p: Vec::new(), env: Vec::new() };
        for (mf, ev) in evals {
            let mut env = 0.0;
            for e in ev {
                let a = e.a * mf;
                env += a.norm();
                t.a.push(a);
                t.p.extend_from_slice(&e.p);
            }
            t.env.push(env);
        }
        t
    }

    #[inline]
    fn a(&self, node: usize, side: usize) -> C64 {
        self.a[node * self.sides + side]
    }

    #[inline]
    fn p(&self, node: usize, side: usize) -> &[C64] {
        let o = (node * self.sides + side) * self.j;
        &self.p[o..o + self.j]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleResult {
    /// (1/(2πi)²)∫∫ F ds₂ ds₁ over the cut box
    pub value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
    /// bound on node pairs skipped because the separable envelope was negligible
    pub pruned_bound: f64,
    pub abs_integral: f64,
    pub node_pairs: usize,
    pub spec1: ContourSpec,
    pub spec2: ContourSpec,
}

impl DoubleResult {
    pub fn error(&self) -> f64 {
        self.quad_error + self.tail_bound + self.pruned_bound
    }
}

/// Local frequency of the integrand in Im s for one side.
fn frequency(f: &TestFunction, trunc: &TruncationParam, rho_pairs: &[AffineForm], var: usize) -> f64 {
    let b = rho_pairs.iter().map(|r| if var == 1 { r.s1.abs() } else { r.s2.abs() }).fold(0.0, f64::max);
    f.support_max().ln().abs() + f.delta().unwrap_or(0.0) + trunc.log_t() * b + 2.0
}

/// Distance from Re s = c to the nearest singular line of one variable
/// (c-factor poles of the side and single-variable denominators).
fn singular_distance(plan: &SumPlan, c: f64, var: usize) -> f64 {
    let mut d = f64::INFINITY;
    let sides = if var == 1 { &plan.side1 } else { &plan.side2 };
    for sd in sides {
        for arg in &sd.args {
            let a = arg.at_eps0();
            let co = if var == 1 { a.s1 } else { a.s2 };
            if co != 0.0 {
                // pole of c at argument 1
                d = d.min(((1.0 - a.c) / co - c).abs());
            }
        }
    }
    for &i in &plan.limit_pairs {
        for den in &plan.pairs[i].denoms {
            let a = den.at_eps0();
            let (co, other) = if var == 1 { (a.s1, a.s2) } else { (a.s2, a.s1) };
            if co != 0.0 && other == 0.0 {
                d = d.min((-a.c / co - c).abs());
            }
        }
    }
    d
}

/// (1/(2πi)²)∫∫ Mf₁(s₁)Mf₂(s₂)·Σ(limit pairs) on Re s = (c₁, c₂), on a
/// tensor GK21 grid with |t₁| ≤ Λ, 0 ≤ t₂ ≤ Λ and conjugate symmetry.
pub fn double_integral(
    plan: &SumPlan,
    f1: &TestFunction,
    f2: &TestFunction,
    trunc: &TruncationParam,
    c1: f64,
    c2: f64,
    lam: f64,
) -> Result<DoubleResult> {
    if !plan.is_separable() {
        return Err(MsError::InvalidArgument("double_integral needs a separable plan".into()));
    }
    let spec1 = ContourSpec::new(c1, lam)?.with_symmetry(Symmetry::None);
    let spec2 = ContourSpec::new(c2, lam)?;
    let rp1: Vec<AffineForm> = plan.side1.iter().map(|s| s.rho_pair).collect();
    let rp2: Vec<AffineForm> = plan.side2.iter().map(|s| s.rho_pair).collect();
    let w1 = (PANEL_PHASE / frequency(f1, trunc, &rp1, 1)).min(2.0);
    let w2 = (PANEL_PHASE / frequency(f2, trunc, &rp2, 2)).min(2.0);
    let grade = |d: f64, w: f64| if d < w { Some(d) } else { None };
    let ax1 = Axis::new(lam, w1, grade(singular_distance(plan, c1, 1), w1), true);
    let ax2 = Axis::new(lam, w2, grade(singular_distance(plan, c2, 2), w2), false);
    let j = plan.n - 1;

    let mf = |f: &TestFunction, s: C64| f.mellin(s).unwrap_or(C64::new(f64::NAN, f64::NAN));
    let tab1 = SideTable::build(
        exec::map(&ax1.t, |&t| {
            let s = C64::new(c1, t);
            (mf(f1, s), plan.side1_limit(s, trunc))
        }),
        j,
    );
    let tab2 = SideTable::build(
        exec::map(&ax2.t, |&t| {
            let s = C64::new(c2, t);
            (mf(f2, s), plan.side2_limit(s, trunc))
        }),
        j,
    );

    // pairs with their non-ε denominator indices
    struct P {
        i1: usize,
        i2: usize,
        coef: f64,
        js: Vec<usize>,
        denoms: Vec<AffineForm>,
    }
    let pairs: Vec<P> = plan
        .limit_pairs
        .iter()
        .map(|&i| {
            let p = &plan.pairs[i];
            P {
                i1: p.i1,
                i2: p.i2,
                coef: p.coef,
                js: (0..j).filter(|q| p.eps_mask & (1 << q) == 0).collect(),
                denoms: p.denoms.clone(),
            }
        })
        .collect();

    // envelope bound on |F| from the distance of each denominator to zero
    let mut dmax: f64 = 0.0;
    for p in &pairs {
        let mut v = p.coef.abs();
        for &q in &p.js {
            let d = p.denoms[q].at_eps0();
            let re = d.s1 * c1 + d.s2 * c2 + d.c;
            v /= re.abs();
        }
        dmax = dmax.max(v);
    }
    let npairs = pairs.len() as f64;
    let peak1 = tab1.env.iter().cloned().fold(0.0, f64::max);
    let peak2 = tab2.env.iter().cloned().fold(0.0, f64::max);
    let prune = if dmax.is_finite() { 1e-17 * peak1 * peak2 } else { 0.0 };

    let rows_by_panel: Vec<Vec<usize>> = {
        let mut v = vec![Vec::new(); ax2.panels];
        for (q, &p) in ax2.panel.iter().enumerate() {
            v[p].push(q);
        }
        v
    };
    // per t₂-panel: per t₁-panel (K, G), plus ∫|F| and pruned mass
    let blocks: Vec<(Vec<(C64, C64)>, f64, f64, usize)> = exec::map(&rows_by_panel, |rows| {
        let mut acc = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); ax1.panels];
        let mut abs = 0.0;
        let mut pruned = 0.0;
        let mut count = 0usize;
        for &q in rows {
            let e2 = tab2.env[q];
            let mut row = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); ax1.panels];
            for i in 0..ax1.t.len() {
                let e1 = tab1.env[i];
                if e1 * e2 <= prune {
                    pruned += ax1.wk[i] * ax2.wk[q] * e1 * e2 * dmax;
                    continue;
                }
                count += 1;
                let mut v = C64::new(0.0, 0.0);
                for p in &pairs {
                    let (p1, p2) = (tab1.p(i, p.i1), tab2.p(q, p.i2));
                    let mut den = C64::new(1.0, 0.0);
                    for &jj in &p.js {
                        den *= p1[jj] + p2[jj];
                    }
                    let num = tab1.a(i, p.i1) * tab2.a(q, p.i2) * p.coef;
                    v += num * den.conj() / den.norm_sqr();
                }
                let pp = ax1.panel[i];
                row[pp].0 += v * ax1.wk[i];
                row[pp].1 += v * ax1.wg[i];
                abs += ax1.wk[i] * ax2.wk[q] * v.norm();
            }
            for (slot, r) in acc.iter_mut().zip(&row) {
                slot.0 += r.0 * ax2.wk[q];
                slot.1 += r.1 * ax2.wg[q];
            }
        }
        (acc, abs, pruned * npairs, count)
    });
    let mut total = ComplexAcc::new(Precision::Dd);
    let mut err = 0.0;
    let mut abs = 0.0;
    let mut pruned = 0.0;
    let mut count = 0;
    for (acc, a, p, c) in &blocks {
        for (k, g) in acc {
            total.add(*k);
            err += (k - g).norm();
        }
        abs += a;
        pruned += p;
        count += c;
    }
    err += 50.0 * f64::EPSILON * abs;
    // 2·Re over t₂ ≥ 0, with 1/(2πi)² · i² = 1/(4π²)
    let norm = 2.0 / (4.0 * PI * PI);
    let value = total.value().re * norm;

    let tail = double_tail(plan, f1, f2, trunc, c1, c2, lam)?;
    let mut s1 = spec1;
    let mut s2 = spec2;
    s1.tail_bound = tail;
    s2.tail_bound = tail;
    s1.node_budget = ax1.t.len();
    s2.node_budget = ax2.t.len();
    Ok(DoubleResult {
        value,
        quad_error: err * norm,
        tail_bound: tail,
        pruned_bound: pruned * norm,
        abs_integral: abs * norm,
        node_pairs: count,
        spec1: s1,
        spec2: s2,
    })
}

/// Bound on the integral outside the cut box, assuming |Σ| ≤ G·Ω(t₁)Ω(t₂)
/// with G fitted to samples on the box edges; m_i ≥ |Mf_i| are the Mellin
/// majorants. Two growth profiles are tried, Ω(t) = ((1+|t|)/(1+Λ))^{0.6}
/// and the same clamped below by 1, and the smaller bound is kept.
fn double_tail(
    plan: &SumPlan,
    f1: &TestFunction,
    f2: &TestFunction,
    trunc: &TruncationParam,
    c1: f64,
    c2: f64,
    lam: f64,
) -> Result<f64> {
    let sum_at = |t1: f64, t2: f64| -> f64 {
        plan.eval_limit(C64::new(c1, t1), C64::new(c2, t2), trunc, Precision::Double)
            .map(|r| r.value.norm())
            .unwrap_or(f64::INFINITY)
    };
    let mut us: Vec<f64> = (0..=32).map(|i| lam * i as f64 / 32.0).collect();
    us.extend([1e-3, 1e-2, 3e-2, 0.1, 0.3]);
    let mut samples = Vec::new();
    for &u in &us {
        samples.extend([(lam, u), (-lam, u), (u, lam), (-u, lam)]);
    }
    let values = exec::map(&samples, |&(t1, t2)| sum_at(t1, t2));
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-3, initial_panels: 16, max_panels: 4096, roundoff_floor: 1e3 };
    let norm = 2.0 / (4.0 * PI * PI);
    let mut best = f64::INFINITY;
    for clamp in [false, true] {
        let om = |t: f64| {
            let w = ((1.0 + t.abs()) / (1.0 + lam)).powf(GROWTH_EXPONENT);
            if clamp { w.max(1.0) } else { w }
        };
        let g = samples.iter().zip(&values).map(|(&(t1, t2), v)| v / (om(t1) * om(t2))).fold(0.0, f64::max);
        let m1 = |t: f64| f1.mellin_majorant(C64::new(c1, t)) * om(t);
        let m2 = |t: f64| f2.mellin_majorant(C64::new(c2, t)) * om(t);
        let inner = |m: &(dyn Fn(f64) -> f64 + Sync)| -> Result<f64> {
            let r = adaptive(&|t: f64| C64::new(m(t), 0.0), 0.0, lam, &opts)?;
            Ok(r.value.re + r.error)
        };
        let (in1, in2) = (2.0 * inner(&m1)?, inner(&m2)?);
        let (out1, out2) = (2.0 * tail_integral(&m1, lam)?, tail_integral(&m2, lam)?);
        best = best.min(norm * g * (out1 * in2 + in1 * out2 + out1 * out2));
    }
    Ok(best)
}

/// ⟨Λ^C E_{f₁}, E_{f₂}⟩ = main + residue_extra + shifted_integral with
///  * main = Mf₁(n)Mf₂(n)ξ(n,k₁)ξ(n,k₂)vol^C,
///  * residue_extra = Mf₁(n)ξ(n,k₁)·R₂(η₂) + Mf₂(n)ξ(n,k₂)·R₁(η₁), R_i the L¹
///    remainders of f_i on Re s = n−η_i (the s₁ = n residue continued past
///    s₂ = n, and the s₂ = n residue taken on Re s₁ = n−η₁),
///  * shifted_integral = the double integral on (n−η₁, n−η₂),
///
/// cross-checked against the double integral on c₁ = n+2η₂−η₂²,
/// c₂ = n+η₂(1−η₂)². The result is reported even when the check fails.
#[allow(clippy::too_many_arguments)]
pub fn truncated_inner_product_report(
    n: usize,
    k1: usize,
    k2: usize,
    f1: &TestFunction,
    f2: &TestFunction,
    trunc: &TruncationParam,
    eta1: f64,
    eta2: f64,
    opts: &PipelineOptions,
) -> Result<FormulaBreakdown> {
    check_eta(eta1, "eta1")?;
    check_eta(eta2, "eta2")?;
    if eta1 >= eta2 {
        return Err(MsError::InvalidArgument(format!("need eta1 < eta2, got {eta1} >= {eta2}")));
    }
    let plan = SumPlan::inner(n, k1, k2, &direction(n, opts))?;
    if !plan.singular_pairs.is_empty() {
        plan.eval_limit(C64::new(n as f64 + 0.5, 1.0), C64::new(n as f64 + 0.25, 2.0), trunc, opts.precision)?;
    }
    let start = (n as f64 + 2.0 * eta2 - eta2 * eta2, n as f64 + eta2 * (1.0 - eta2) * (1.0 - eta2));
    let crossings = crossing_scan(&plan, trunc, start, eta1, eta2, opts.precision)?;
    if let Some(bad) = crossings.iter().find(|c| c.relative_residue > RESIDUE_CANCEL_TOL) {
        return Err(MsError::ScheduleViolation(format!(
            "residue across {}*s1 + {}*s2 + {} = 0 (stage {}) does not cancel: relative size {:.3e}",
            bad.a, bad.b, bad.c, bad.stage, bad.relative_residue
        )));
    }

    let nn = C64::new(n as f64, 0.0);
    let vol = truncated_volume(n, trunc, &SumOptions::default())?;
    let (m1, m2) = (f1.mellin(nn)?.re, f2.mellin(nn)?.re);
    let (x1, x2) = (xi_nk(n, k1)?, xi_nk(n, k2)?);
    let main = m1 * m2 * x1 * x2 * vol.value;
    let main_err = 1e-13 * main.abs() + (m1 * m2 * x1 * x2).abs() * vol.uncertainty;

    let r2 = l1_shifted(n, k2, f2, trunc, eta2, opts)?;
    let r1 = l1_shifted(n, k1, f1, trunc, eta1, opts)?;
    let half = (m1 * x1 * r2.value.re, (m1 * x1).abs() * r2.error());
    let swapped = (m2 * x2 * r1.value.re, (m2 * x2).abs() * r1.error());
    let remain = double_integral(&plan, f1, f2, trunc, n as f64 - eta1, n as f64 - eta2, opts.height_2d)?;

    let mut bd = FormulaBreakdown::assemble(
        (main, main_err),
        (half.0 + swapped.0, half.1 + swapped.1),
        (remain.value, remain.error()),
    );
    bd.kappa = Some(error_kappa(n, k1, k2, eta1, eta2)?);
    bd.items.push(BreakdownItem { name: "res_half".into(), value: half.0, error: half.1 });
    bd.items.push(BreakdownItem { name: "res_half_swapped".into(), value: swapped.0, error: swapped.1 });
    bd.items.push(BreakdownItem { name: "res_remain".into(), value: remain.value, error: remain.error() });
    bd.items.push(BreakdownItem {
        name: "observed_kappa".into(),
        value: observed_kappa(&plan, eta1, eta2),
        error: 0.0,
    });
    bd.items.push(BreakdownItem {
        name: "crossed_planes".into(),
        value: crossings.len() as f64,
        error: crossings.iter().map(|c| c.relative_residue).fold(0.0, f64::max),
    });
    bd.contours.extend([r2.spec, r1.spec, remain.spec1, remain.spec2]);
    if opts.cross_check {
        let direct = double_integral(&plan, f1, f2, trunc, start.0, start.1, opts.height_2d)?;
        bd.contours.extend([direct.spec1, direct.spec2]);
        let combined = direct.error() + bd.total_error();
        let discrepancy = (direct.value - bd.total).abs();
        let height_drift = if opts.height_drift {
            let h = 0.5 * opts.height_2d;
            let d2 = double_integral(&plan, f1, f2, trunc, start.0, start.1, h)?;
            let r2 = double_integral(&plan, f1, f2, trunc, n as f64 - eta1, n as f64 - eta2, h)?;
            Some((d2.value - direct.value).abs() + (r2.value - remain.value).abs())
        } else {
            None
        };
        bd.cross_check = Some(CrossCheck {
            direct: direct.value,
            direct_error: direct.error(),
            combined_error: combined,
            discrepancy,
            consistent: discrepancy <= 3.0 * combined,
            cancellation: direct.abs_integral / direct.value.abs(),
            height_drift,
        });
    }
    Ok(bd)
}

/// [`truncated_inner_product_report`] that fails with PipelineInconsistency
/// when the cross-check does.
#[allow(clippy::too_many_arguments)]
pub fn truncated_inner_product(
    n: usize,
    k1: usize,
    k2: usize,
    f1: &TestFunction,
    f2: &TestFunction,
    trunc: &TruncationParam,
    eta1: f64,
    eta2: f64,
    opts: &PipelineOptions,
) -> Result<FormulaBreakdown> {
    let bd = truncated_inner_product_report(n, k1, k2, f1, f2, trunc, eta1, eta2, opts)?;
    bd.verify()?;
    Ok(bd)
}

/// α = 2 + 0.501(η₁+η₂).
pub fn moment_alpha(eta1: f64, eta2: f64) -> f64 {
    2.0 + 0.501 * (eta1 + eta2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    pub main: f64,
    pub budget: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// δ·∫|Mβ_δ(n−η₂+it)|dt/(2π)
    pub half_constant: f64,
    /// δ^α·∏_i ∫|Mβ_δ(n−η_i+it)|(1+|t|)^{0.501η_i}dt/(2π)
    pub remain_constant: f64,
}

/// (main, budget) for the normalized second moment of H^C E_{f_{A,δ}}:
/// main = (Mf_{A,δ}(n)ξ(n,k))², budget = δ^{−1}Mh_A(n)Mh_A(n−η₂)T^{−η₂k(n−k)/2}·C₁
/// + δ^{−α}Mh_A(n−η₁)Mh_A(n−η₂)T^κ·C₂, where C₁, C₂ are the bump integrals
/// that produce the δ-scalings (computed, not assumed).
#[allow(clippy::too_many_arguments)]
pub fn second_moment_detail(
    n: usize,
    k: usize,
    window: &TestFunction,
    trunc: &TruncationParam,
    eta1: f64,
    eta2: f64,
    delta: f64,
) -> Result<SecondMoment> {
    check_eta(eta1, "eta1")?;
    check_eta(eta2, "eta2")?;
    let (n1, n2) = window
        .sharp_part()
        .ok_or_else(|| MsError::InvalidArgument("second moment needs a window (N1, N2]".into()))?;
    for c in [n as f64 - eta1, n as f64 - eta2] {
        if n1 > 0.0 && n2.powf(c) - n1.powf(c) > n1.powf(c) / 2.0 {
            return Err(MsError::WindowTooWide(format!("N2^c - N1^c > N1^c/2 at c = {c}")));
        }
    }
    let h = TestFunction::window(n1, n2)?;
    let f = TestFunction::smoothed(n1, n2, delta)?;
    let mh = |c: f64| -> Result<f64> { Ok(h.mellin(C64::new(c, 0.0))?.re) };
    let kappa = error_kappa(n, k, k, eta1, eta2)?;
    let decay = eta2 * (k * (n - k)) as f64 / 2.0;
    let lhs = mh(n as f64)? * trunc.t().powf(-decay);
    let rhs = mh(n as f64 - eta1)? * trunc.t().powf(kappa);
    if lhs <= rhs {
        return Err(MsError::ConditionUnsatisfied { lhs, rhs });
    }
    let alpha = moment_alpha(eta1, eta2);
    let beta = TestFunction::bump(delta)?;
    let bump_l1 = |c: f64, power: f64| -> Result<f64> {
        let g = |t: f64| C64::new(beta.mellin_majorant(C64::new(c, t)) * (1.0 + t).powf(power), 0.0);
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-4, initial_panels: 32, max_panels: 8192, roundoff_floor: 1e3 };
        let lam = 60.0 / delta;
        let r = adaptive(&g, 0.0, lam, &opts)?;
        let tail = tail_integral(&|t: f64| g(t).re, lam)?;
        Ok((r.value.re + r.error + tail) / PI)
    };
    let half_constant = delta * bump_l1(n as f64 - eta2, 0.0)?;
    let remain_constant = delta.powf(alpha)
        * bump_l1(n as f64 - eta1, 0.501 * eta1)?
        * bump_l1(n as f64 - eta2, 0.501 * eta2)?;
    let mf = f.mellin(C64::new(n as f64, 0.0))?.re;
    let main = (mf * xi_nk(n, k)?).powi(2);
    let budget = delta.powf(-1.0) * mh(n as f64)? * mh(n as f64 - eta2)? * trunc.t().powf(-decay) * half_constant
        + delta.powf(-alpha) * mh(n as f64 - eta1)? * mh(n as f64 - eta2)? * trunc.t().powf(kappa) * remain_constant;
    Ok(SecondMoment { main, budget, alpha, kappa, half_constant, remain_constant })
}

/// (main, error budget) of the normalized second moment.
pub fn second_moment(
    n: usize,
    k: usize,
    window: &TestFunction,
    trunc: &TruncationParam,
    eta1: f64,
    eta2: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    let d = second_moment_detail(n, k, window, trunc, eta1, eta2, delta)?;
    Ok((d.main, d.budget))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_examples() {
        assert!((error_kappa(4, 2, 2, 0.1, 0.9).unwrap() - 6.0).abs() < 1e-12);
        for n in 2..=6 {
            for k in 1..n {
                let want = (k * (n - k)) as f64 / 2.0 * (n as f64 - 0.3 - 0.6);
                assert!((error_kappa(n, k, k, 0.3, 0.6).unwrap() - want).abs() < 1e-12);
                for k2 in 1..n {
                    assert!(error_kappa(n, k, k2, 0.01, 0.99).unwrap() <= (n * (n * n - 1)) as f64 / 6.0);
                }
            }
        }
    }

    #[test]
    fn observed_kappa_attains_formula() {
        let plan = SumPlan::inner(4, 2, 2, &generic_direction(4)).unwrap();
        assert!((observed_kappa(&plan, 0.1, 0.9) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_line() {
        // (1/2πi)∫ e^{(s−1)²} ds on Re s = 1 is 1/(2√π)
        let f = |s: C64| ((s - 1.0) * (s - 1.0)).exp();
        let m = |t: f64| (-t * t).exp();
        let spec = ContourSpec::new(1.0, 12.0).unwrap();
        let r = vertical_integral(&f, Some(&m), &spec).unwrap();
        assert!((r.value.re - 0.5 / PI.sqrt()).abs() < 1e-12);
        assert!(r.tail_bound < 1e-50);
    }
}
