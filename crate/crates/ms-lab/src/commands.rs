use crate::output::{csv_table, num, Doc};
use crate::{Ctx, Failure};
use clap::{Args, ValueEnum};
use mslab::cancel::{cancellation_sum, pipeline_weights, scan_patterns, ProbeOptions, ORDER_SLACK, Z_GRID};
use mslab::contour::{second_moment_detail, truncated_inner_product_report, truncated_l1_report, FormulaBreakdown, PipelineOptions};
use mslab::lattice::{count_primitive, discrepancy_experiment, gcd_scan_count, EnumOptions, TwistedLattice, DEFAULT_BUDGET, DEFAULT_RADIUS_FACTOR};
use mslab::mellin::{saddle_row, TestFunction};
use mslab::msrel::{truncated_volume, SumMode, SumOptions, TruncationParam};
use mslab::numerics::fit::loglog_slope;
use mslab::xifunc::{total_volume, xi_nk};
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;

fn trunc(t: f64) -> Result<TruncationParam, Failure> {
    Ok(TruncationParam::new(t)?)
}

#[derive(Args, Debug, Serialize)]
pub struct VolumeArgs {
    #[arg(short = 'n')]
    pub n: usize,
    /// comma-separated truncation parameters
    #[arg(short = 'T', long = "t", value_delimiter = ',', default_value = "10,100,1000")]
    pub t: Vec<f64>,
    /// Richardson in ε from this start (halved twice) instead of the exact limit
    #[arg(long)]
    pub eps: Option<f64>,
}

pub fn volume(ctx: &Ctx, a: &VolumeArgs) -> Result<Doc, Failure> {
    let mut doc = Doc::new(ctx.manifest("volume", a), &["T", "vol_c", "uncertainty", "vol_minus_vol_c"]);
    let mode = match a.eps {
        Some(e) if e > 0.0 => SumMode::Richardson(vec![e, e / 2.0, e / 4.0]),
        Some(e) => return Err(Failure::Usage(format!("--eps {e} must be positive"))),
        None => SumMode::Limit,
    };
    let opts = SumOptions { mode, precision: ctx.precision };
    let total = total_volume(a.n)?;
    let mut deficits = Vec::new();
    for &t in &a.t {
        let v = truncated_volume(a.n, &trunc(t)?, &opts)?;
        deficits.push(total - v.value);
        doc.row(vec![num(t), num(v.value), num(v.uncertainty), num(total - v.value)]);
    }
    doc.set("vol", num(total));
    doc.set("expected_slope", num(-((a.n * (a.n - 1)) as f64) / 2.0));
    if a.t.len() >= 2 {
        doc.set("slope", num(loglog_slope(&a.t, &deficits)));
    }
    Ok(doc)
}

#[derive(Args, Debug, Serialize)]
pub struct PipelineFlags {
    /// height cut of the line integrals
    #[arg(long)]
    pub height: Option<f64>,
    /// height cut per variable of the double integrals
    #[arg(long)]
    pub height_2d: Option<f64>,
    /// skip the direct pre-shift quadrature
    #[arg(long)]
    pub no_cross_check: bool,
    /// repeat the double integrals at half height and report the change
    #[arg(long)]
    pub height_drift: bool,
}

impl PipelineFlags {
    fn options(&self, ctx: &Ctx) -> PipelineOptions {
        let d = PipelineOptions::default();
        PipelineOptions {
            height: self.height.unwrap_or(d.height),
            height_2d: self.height_2d.unwrap_or(d.height_2d),
            precision: ctx.precision,
            cross_check: !self.no_cross_check,
            height_drift: self.height_drift,
            ..d
        }
    }
}

fn breakdown_doc(doc: &mut Doc, bd: &FormulaBreakdown) {
    for (name, v, e) in [
        ("main", bd.main, bd.main_error),
        ("residue_extra", bd.residue_extra, bd.residue_extra_error),
        ("shifted_integral", bd.shifted_integral, bd.shifted_error),
        ("slack", bd.slack, 0.0),
        ("total", bd.total, bd.total_error()),
    ] {
        doc.row(vec![json!(name), num(v), num(e)]);
    }
    for it in bd.items.iter().filter(|it| it.name != "shifted_integral") {
        doc.row(vec![json!(it.name), num(it.value), num(it.error)]);
    }
    if let Some(cc) = &bd.cross_check {
        doc.row(vec![json!("direct"), num(cc.direct), num(cc.direct_error)]);
        doc.set("discrepancy", num(cc.discrepancy));
        doc.set("combined_error", num(cc.combined_error));
        if let Some(h) = cc.height_drift {
            doc.set("height_drift", num(h));
        }
        doc.check(
            "main + shifted = direct",
            cc.consistent,
            format!("|direct - total| = {:.3e}, 3 x combined error = {:.3e}", cc.discrepancy, 3.0 * cc.combined_error),
        );
    }
    if let Some(k) = bd.kappa {
        doc.set("kappa", num(k));
    }
    doc.breakdown = serde_json::to_value(bd).ok();
}

#[derive(Args, Debug, Serialize)]
pub struct L1Args {
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(short = 'k')]
    pub k: usize,
    /// cutoff N of the smoothed test function f_{N,δ}
    #[arg(short = 'H', default_value_t = 10.0)]
    pub h: f64,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(short = 'T', default_value_t = 100.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineFlags,
}

pub fn l1(ctx: &Ctx, a: &L1Args) -> Result<Doc, Failure> {
    let f = TestFunction::smoothed_upto(a.h, a.delta)?;
    let bd = truncated_l1_report(a.n, a.k, &f, &trunc(a.t)?, a.eta, &a.pipeline.options(ctx))?;
    let mut doc = Doc::new(ctx.manifest("l1", a), &["term", "value", "error"]);
    let mf = f.mellin(mslab::C64::new(a.n as f64, 0.0))?.re;
    let vol = truncated_volume(a.n, &trunc(a.t)?, &SumOptions { precision: ctx.precision, ..Default::default() })?;
    doc.set("mellin_at_n", num(mf));
    doc.set("xi_nk", num(xi_nk(a.n, a.k)?));
    doc.set("vol_c", num(vol.value));
    doc.set("expected_decay_exponent", num(-a.eta * (a.k * (a.n - a.k)) as f64 / 2.0));
    breakdown_doc(&mut doc, &bd);
    Ok(doc)
}

#[derive(Args, Debug, Serialize)]
pub struct InnerArgs {
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(long)]
    pub k1: usize,
    #[arg(long)]
    pub k2: usize,
    /// cutoff of f₁ = f_{N₁,δ}
    #[arg(long = "h1", default_value_t = 6.0)]
    pub h1: f64,
    /// cutoff of f₂ = f_{N₂,δ}
    #[arg(long = "h2", default_value_t = 5.0)]
    pub h2: f64,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(short = 'T', default_value_t = 10.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta1: f64,
    #[arg(long, default_value_t = 0.9)]
    pub eta2: f64,
    /// only report κ and the exponents, skip the pipeline
    #[arg(long)]
    pub kappa_only: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineFlags,
}

pub fn inner(ctx: &Ctx, a: &InnerArgs) -> Result<Doc, Failure> {
    let mut doc = Doc::new(ctx.manifest("inner", a), &["term", "value", "error"]);
    let kappa = mslab::contour::error_kappa(a.n, a.k1, a.k2, a.eta1, a.eta2)?;
    doc.set("kappa", num(kappa));
    doc.set("res_half_exponent", num(-a.eta2 * (a.k2 * (a.n - a.k2)) as f64 / 2.0));
    if a.kappa_only {
        return Ok(doc);
    }
    let f1 = TestFunction::smoothed_upto(a.h1, a.delta)?;
    let f2 = TestFunction::smoothed_upto(a.h2, a.delta)?;
    let bd = truncated_inner_product_report(a.n, a.k1, a.k2, &f1, &f2, &trunc(a.t)?, a.eta1, a.eta2, &a.pipeline.options(ctx))?;
    breakdown_doc(&mut doc, &bd);
    Ok(doc)
}

#[derive(Args, Debug, Serialize)]
pub struct SecondMomentArgs {
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(short = 'k')]
    pub k: usize,
    /// window (N₁, N₂]
    #[arg(long)]
    pub n1: f64,
    #[arg(long)]
    pub n2: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(short = 'T', default_value_t = 100.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta1: f64,
    #[arg(long, default_value_t = 0.9)]
    pub eta2: f64,
}

pub fn second_moment(ctx: &Ctx, a: &SecondMomentArgs) -> Result<Doc, Failure> {
    let w = TestFunction::window(a.n1, a.n2)?;
    let m = second_moment_detail(a.n, a.k, &w, &trunc(a.t)?, a.eta1, a.eta2, a.delta)?;
    let mut doc = Doc::new(ctx.manifest("second-moment", a), &["main", "budget", "alpha", "kappa", "half_constant", "remain_constant"]);
    doc.row(vec![num(m.main), num(m.budget), num(m.alpha), num(m.kappa), num(m.half_constant), num(m.remain_constant)]);
    doc.set("budget_over_main", num(m.budget / m.main));
    Ok(doc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Twist {
    Identity,
    Random,
}

#[derive(Args, Debug, Serialize)]
pub struct LatticeFlags {
    /// g = I or a seeded random g (uses --seed)
    #[arg(long, value_enum, default_value_t = Twist::Identity)]
    pub g: Twist,
    #[arg(long, default_value_t = DEFAULT_RADIUS_FACTOR)]
    pub radius_factor: f64,
    /// cap on visited candidate vectors
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
}

impl LatticeFlags {
    fn lattice(&self, n: usize, seed: u64) -> Result<TwistedLattice, Failure> {
        Ok(match self.g {
            Twist::Identity => TwistedLattice::identity(n)?,
            Twist::Random => TwistedLattice::random(n, seed)?,
        })
    }
    fn options(&self) -> Result<EnumOptions, Failure> {
        if !(self.radius_factor >= 1.0) {
            return Err(Failure::Usage(format!("--radius-factor {} must be >= 1", self.radius_factor)));
        }
        Ok(EnumOptions { radius_factor: self.radius_factor, budget: self.budget })
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CountArgs {
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(short = 'k')]
    pub k: usize,
    #[arg(short = 'p')]
    pub p: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub lattice: LatticeFlags,
}

pub fn count(ctx: &Ctx, a: &CountArgs) -> Result<Doc, Failure> {
    let lat = a.lattice.lattice(a.n, ctx.seed)?;
    let c = count_primitive(&lat, a.k, a.p, &a.lattice.options()?)?;
    let main = a.p.powi(a.n as i32) / a.n as f64 * xi_nk(a.n, a.k)?;
    let mut doc = Doc::new(ctx.manifest("count", a), &["p", "count", "main_term", "ratio"]);
    doc.row(vec![num(a.p), json!(c), num(main), num(c as f64 / main)]);
    if a.n == 2 && a.k == 1 && a.lattice.g == Twist::Identity {
        let scan = gcd_scan_count(a.p);
        doc.set("gcd_scan", json!(scan));
        doc.set("three_p2_over_pi", num(3.0 * a.p * a.p / PI));
        doc.check("count = gcd scan", scan == c, format!("{c} vs {scan}"));
    }
    Ok(doc)
}

/// `a:b` (step 1), `a:b:step`, or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let bad = |_| format!("bad number in grid {s:?}");
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(|x| x.trim().parse::<f64>().map_err(bad)).collect::<Result<_, _>>()?;
        let (lo, hi, step) = match parts[..] {
            [a, b] => (a, b, 1.0),
            [a, b, c] => (a, b, c),
            _ => return Err(format!("grid {s:?}: expected a:b or a:b:step")),
        };
        if !(step > 0.0 && lo > 0.0 && hi >= lo) || (hi - lo) / step > 1e5 {
            return Err(format!("grid {s:?}: need 0 < a <= b and a sensible step"));
        }
        let m = ((hi - lo) / step + 1e-9).floor() as usize;
        Ok((0..=m).map(|i| lo + step * i as f64).collect())
    } else {
        let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(bad)).collect::<Result<_, _>>()?;
        if v.iter().any(|&p| !(p > 0.0)) {
            return Err(format!("grid {s:?}: values must be positive"));
        }
        Ok(v)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct DiscrepancyArgs {
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(short = 'k')]
    pub k: usize,
    /// p values: a:b, a:b:step or a comma list
    #[arg(long, value_parser = parse_grid)]
    pub p_grid: ::std::vec::Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// also write the (log p, log |D(p)|) series here
    #[arg(long)]
    pub plot_csv: Option<std::path::PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub lattice: LatticeFlags,
}

pub fn discrepancy(ctx: &Ctx, a: &DiscrepancyArgs) -> Result<Doc, Failure> {
    let lat = a.lattice.lattice(a.n, ctx.seed)?;
    let tab = discrepancy_experiment(&lat, a.k, &a.p_grid, a.eps, &a.lattice.options()?)?;
    let manifest = ctx.manifest("discrepancy", a);
    let mut doc = Doc::new(manifest.clone(), &["p", "count", "main_term", "discrepancy", "normalized", "normalized_classical"]);
    for r in &tab.rows {
        doc.row(vec![num(r.p), json!(r.count), num(r.main_term), num(r.discrepancy), num(r.normalized), num(r.normalized_classical)]);
    }
    doc.set("exponent", num(tab.exponent));
    doc.set("classical_exponent", num(tab.classical_exponent));
    if let Some(path) = &a.plot_csv {
        let rows: Vec<Vec<Value>> = tab
            .rows
            .iter()
            .filter(|r| r.discrepancy != 0.0)
            .map(|r| vec![num(r.p.ln()), num(r.discrepancy.abs().ln())])
            .collect();
        let text = csv_table(&manifest, &["log_p".into(), "log_abs_d".into()], &rows);
        std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(doc)
}

#[derive(Args, Debug, Serialize)]
pub struct CancelArgs {
    #[arg(short = 'n')]
    pub n: usize,
    /// only patterns with this many zero indices
    #[arg(long)]
    pub r: Option<usize>,
    /// restrict to this k₁ (default: all)
    #[arg(long)]
    pub k1: Option<usize>,
    /// restrict to this k₂ (default: all)
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(short = 'T', default_value_t = 10.0)]
    pub t: f64,
}

pub fn cancel_check(ctx: &Ctx, a: &CancelArgs) -> Result<Doc, Failure> {
    if !(3..=8).contains(&a.n) {
        return Err(Failure::Usage(format!("cancel-check needs 3 <= n <= 8, got {}", a.n)));
    }
    let trunc = trunc(a.t)?;
    let mut doc = Doc::new(ctx.manifest("cancel-check", a), &["k1", "k2", "w1", "w2", "r", "shape", "order", "needed"]);
    let ks = |fixed: Option<usize>| -> Vec<usize> { fixed.map_or_else(|| (1..a.n).collect(), |k| vec![k]) };
    let mut worst = f64::INFINITY;
    let mut failed = 0;
    for k1 in ks(a.k1) {
        for k2 in ks(a.k2) {
            let (lam1, lam2) = pipeline_weights(a.n, k1, k2)?;
            for p in scan_patterns(a.n, k1, k2)? {
                if a.r.is_some_and(|r| p.pattern.r() != r) {
                    continue;
                }
                let rep = cancellation_sum(&p.pattern, &p.w1, &p.w2, &lam1, &lam2, &trunc, &Z_GRID, &ProbeOptions::for_n(a.n))?;
                let needed = rep.r as f64 - ORDER_SLACK;
                worst = worst.min(rep.order - needed);
                failed += usize::from(rep.order < needed);
                doc.row(vec![json!(k1), json!(k2), json!(p.w1.to_string()), json!(p.w2.to_string()), json!(rep.r), json!(rep.shape), num(rep.order), num(needed)]);
            }
        }
    }
    doc.set("patterns", json!(doc.rows.len()));
    if doc.rows.is_empty() {
        doc.set("note", json!("no pattern of the requested kind at this n"));
    } else {
        doc.check("order >= r - 0.1", failed == 0, format!("{failed} below; smallest margin {worst:.3}"));
    }
    Ok(doc)
}

#[derive(Args, Debug, Serialize)]
pub struct SaddleArgs {
    #[arg(long = "k", value_delimiter = ',', default_value = "100,400,1600")]
    pub k: Vec<f64>,
}

pub fn saddle_check(ctx: &Ctx, a: &SaddleArgs) -> Result<Doc, Failure> {
    let mut doc = Doc::new(
        ctx.manifest("saddle-check", a),
        &["k", "quadrature", "asymptotic", "rel_error", "profile", "profile_corrected", "saddle_rel_error"],
    );
    let mut rows = Vec::new();
    for &k in &a.k {
        let r = saddle_row(k)?;
        doc.row(vec![num(k), num(r.quadrature), num(r.asymptotic), num(r.rel_error), num(r.profile), num(r.profile_corrected), num(r.saddle_rel_error)]);
        rows.push(r);
    }
    if let Some(last) = rows.last() {
        doc.check("relative error <= 0.2 at the largest k", last.rel_error <= 0.2, format!("{:.4} at k = {}", last.rel_error, last.k));
    }
    if rows.len() >= 2 {
        let errs: Vec<f64> = rows.iter().map(|r| r.rel_error).collect();
        doc.check("relative error decreasing", errs.windows(2).all(|w| w[1] < w[0]), format!("{errs:.4?}"));
        let prof: Vec<f64> = rows.iter().map(|r| r.profile).collect();
        let spread = prof.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - prof.iter().cloned().fold(f64::INFINITY, f64::min);
        doc.check("profile spread <= 0.5", spread <= 0.5, format!("{spread:.4}"));
    }
    Ok(doc)
}
