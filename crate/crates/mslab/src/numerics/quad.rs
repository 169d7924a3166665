//! Gauss–Kronrod (10/21) quadrature: single panels, global adaptive bisection,
//! and fixed composite rules usable for tensor-product integration.

use crate::error::MsError;
use crate::exec;
use num_complex::Complex64;

/// Kronrod abscissae on [0,1); index 10 is the midpoint. Odd indices are Gauss nodes.
pub const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

pub const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_080,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
pub const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// The 21 nodes of one panel, mapped to [a,b], with Kronrod and Gauss weights.
pub fn panel_nodes(a: f64, b: f64) -> [(f64, f64, f64); 21] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0, 0.0); 21];
    for i in 0..10 {
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        out[2 * i] = (c - h * XGK[i], h * WGK[i], h * wg);
        out[2 * i + 1] = (c + h * XGK[i], h * WGK[i], h * wg);
    }
    out[20] = (c, h * WGK[10], 0.0);
    out
}

/// One GK21 panel: (Kronrod value, QUADPACK-style error estimate).
pub fn gk21<F: Fn(f64) -> Complex64 + ?Sized>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let (k, err, _) = gk21_abs(f, a, b);
    (k, err)
}

/// As [`gk21`], also returning the Kronrod estimate of ∫|f| over the panel.
pub fn gk21_abs<F: Fn(f64) -> Complex64 + ?Sized>(f: &F, a: f64, b: f64) -> (Complex64, f64, f64) {
    let nodes = panel_nodes(a, b);
    let vals: Vec<Complex64> = nodes.iter().map(|(x, _, _)| f(*x)).collect();
    panel_estimate(&nodes, &vals, b - a)
}

fn panel_estimate(nodes: &[(f64, f64, f64); 21], vals: &[Complex64], width: f64) -> (Complex64, f64, f64) {
    let mut k = Complex64::new(0.0, 0.0);
    let mut g = Complex64::new(0.0, 0.0);
    let mut resabs = 0.0;
    for ((_, wk, wg), v) in nodes.iter().zip(vals) {
        k += v * *wk;
        g += v * *wg;
        resabs += wk * v.norm();
    }
    let mean = k / width;
    let resasc: f64 = nodes.iter().zip(vals).map(|((_, wk, _), v)| wk * (v - mean).norm()).sum();
    let mut err = (k - g).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !k.re.is_finite() || !k.im.is_finite() {
        err = f64::INFINITY;
    }
    (k, err, resabs)
}

#[derive(Clone, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
    /// accept once the error is below this multiple of ε·∫|f| (0 disables);
    /// for integrals that cancel beyond what binary64 can resolve
    pub roundoff_floor: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, initial_panels: 8, max_panels: 20_000, roundoff_floor: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evals: usize,
    pub panels: usize,
    /// Kronrod estimate of ∫|f|
    pub abs_integral: f64,
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    val: Complex64,
    err: f64,
    abs: f64,
}

/// Global adaptive GK21 on [a,b]. Panels are refined in parallel batches; the
/// final sum runs over panels in left-to-right order, so results do not
/// depend on the worker count.
pub fn adaptive<F>(f: &F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult, MsError>
where
    F: Fn(f64) -> Complex64 + Sync + ?Sized,
{
    let m = opts.initial_panels.max(1);
    let h = (b - a) / m as f64;
    let bounds: Vec<(f64, f64)> =
        (0..m).map(|i| (a + h * i as f64, if i + 1 == m { b } else { a + h * (i + 1) as f64 })).collect();
    let mut panels: Vec<Panel> = exec::map(&bounds, |&(pa, pb)| {
        let (val, err, abs) = gk21_abs(f, pa, pb);
        Panel { a: pa, b: pb, val, err, abs }
    });
    let mut evals = 21 * m;
    loop {
        let total = sum_panels(&panels);
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let abs_integral: f64 = panels.iter().map(|p| p.abs).sum();
        let tol = opts
            .abs_tol
            .max(opts.rel_tol * total.norm())
            .max(opts.roundoff_floor * f64::EPSILON * abs_integral);
        if err <= tol {
            return Ok(QuadResult { value: total, error: err, evals, panels: panels.len(), abs_integral });
        }
        if !err.is_finite() && panels.iter().any(|p| !p.val.re.is_finite() || !p.val.im.is_finite()) {
            let worst = panels.iter().find(|p| !p.val.re.is_finite() || !p.val.im.is_finite()).unwrap();
            return Err(MsError::QuadratureFailure {
                worst: 0.5 * (worst.a + worst.b),
                detail: "non-finite integrand".into(),
            });
        }
        if panels.len() >= opts.max_panels {
            let worst = panels.iter().max_by(|x, y| x.err.total_cmp(&y.err)).unwrap();
            return Err(MsError::QuadratureFailure {
                worst: 0.5 * (worst.a + worst.b),
                detail: format!("panel budget {} exhausted, error {:.3e} > tol {:.3e}", opts.max_panels, err, tol),
            });
        }
        let threshold = tol / (2.0 * panels.len() as f64);
        let maxerr = panels.iter().map(|p| p.err).fold(0.0, f64::max);
        let split: Vec<bool> = panels.iter().map(|p| p.err > threshold.min(maxerr)).collect();
        let mut halves = Vec::new();
        for (p, s) in panels.iter().zip(&split) {
            if *s {
                let mid = 0.5 * (p.a + p.b);
                halves.push((p.a, mid));
                halves.push((mid, p.b));
            }
        }
        let fresh: Vec<Panel> = exec::map(&halves, |&(pa, pb)| {
            let (val, err, abs) = gk21_abs(f, pa, pb);
            Panel { a: pa, b: pb, val, err, abs }
        });
        evals += 21 * fresh.len();
        let mut next = Vec::with_capacity(panels.len() + fresh.len() / 2);
        let mut it = fresh.into_iter();
        for (p, s) in panels.iter().zip(&split) {
            if *s {
                next.push(it.next().unwrap());
                next.push(it.next().unwrap());
            } else {
                next.push(*p);
            }
        }
        panels = next;
    }
}

fn sum_panels(panels: &[Panel]) -> Complex64 {
    let mut acc = super::sum::ComplexAcc::new(super::sum::Precision::Double);
    for p in panels {
        acc.add(p.val);
    }
    acc.value()
}

/// Fixed composite GK21 rule on a list of breakpoints.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    /// Kronrod weights
    pub wk: Vec<f64>,
    /// Embedded Gauss weights (zero at Kronrod-only nodes)
    pub wg: Vec<f64>,
}

impl CompositeRule {
    pub fn from_breaks(breaks: &[f64]) -> Self {
        let mut nodes = Vec::with_capacity(21 * breaks.len());
        let mut wk = Vec::with_capacity(nodes.capacity());
        let mut wg = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            for (x, k, g) in panel_nodes(w[0], w[1]) {
                nodes.push(x);
                wk.push(k);
                wg.push(g);
            }
        }
        CompositeRule { nodes, wk, wg }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_length() {
        let sk: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let sg: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((sk - 2.0).abs() < 1e-15);
        assert!((sg - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_polynomials() {
        for deg in 0..=30 {
            let (v, _) = gk21(&|x: f64| Complex64::new(x.powi(deg), 0.0), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((v.re - exact).abs() < 1e-14, "deg {deg}");
        }
        // Gauss part integrates degree 19 exactly
        let nodes = panel_nodes(0.0, 1.0);
        let g: f64 = nodes.iter().map(|(x, _, wg)| wg * x.powi(19)).sum();
        assert!((g - 0.05).abs() < 1e-14);
    }

    #[test]
    fn adaptive_gaussian() {
        let f = |x: f64| Complex64::new((-x * x).exp(), 0.0);
        let r = adaptive(&f, -10.0, 10.0, &QuadOptions::default()).unwrap();
        assert!((r.value.re - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn adaptive_oscillatory_with_peak() {
        let f = |x: f64| Complex64::new(0.0, 30.0 * x).exp() / (1e-4 + x * x);
        let r = adaptive(&f, -1.0, 1.0, &QuadOptions { rel_tol: 1e-10, ..Default::default() }).unwrap();
        assert!(r.error < 1e-8 * r.value.norm());
        assert!(r.value.im.abs() < 1e-9 * r.value.norm());
    }

    #[test]
    fn reports_failure_location() {
        let f = |x: f64| Complex64::new(1.0 / (x - 0.3).abs().sqrt(), 0.0) * (100.0 * x).sin();
        let r = adaptive(&f, 0.0, 1.0, &QuadOptions { max_panels: 16, rel_tol: 1e-14, abs_tol: 0.0, ..Default::default() });
        assert!(matches!(r, Err(MsError::QuadratureFailure { .. })));
    }
}
