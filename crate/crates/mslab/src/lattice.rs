//! Primitive sublattices of gZⁿ: enumeration by twisted determinant, the
//! pseudo-Eisenstein series E_f(g), discrepancy tables, the dyadic schedule
//! used in the almost-everywhere argument, and a Monte Carlo integrator over
//! the truncated modular domain (n = 2).
//!
//! Lattice vectors are rows: x ∈ Zⁿ maps to x·g.

use crate::error::{MsError, Result};
use crate::mellin::TestFunction;
use crate::numerics::sum::Neumaier;
use crate::xifunc::xi_nk;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

pub const MAX_LATTICE_N: usize = 5;
/// Default cap on visited candidate vectors.
pub const DEFAULT_BUDGET: usize = 100_000_000;
/// Factor on the Hermite radii. The constants are exact up to rank 4, so 1 is
/// already complete; larger values only cross-check that.
pub const DEFAULT_RADIUS_FACTOR: f64 = 1.0;
const TIE_TOL: f64 = 1e-12;
const MERGE_BATCH: usize = 256;

/// √γ_r for r = 1..4 (Hermite constants γ₁ = 1, γ₂ = (4/3)^{1/2}, γ₃ = 2^{1/3}, γ₄ = 2^{1/2}).
fn sqrt_hermite(r: usize) -> f64 {
    match r {
        1 => 1.0,
        2 => (4.0f64 / 3.0).powf(0.25),
        3 => 2.0f64.powf(1.0 / 6.0),
        4 => 2.0f64.powf(0.25),
        _ => unreachable!("rank above 4"),
    }
}

/// gZⁿ with det g = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistedLattice {
    pub n: usize,
    pub g: Vec<Vec<f64>>,
}

impl TwistedLattice {
    pub fn new(g: Vec<Vec<f64>>) -> Result<Self> {
        let n = g.len();
        if !(2..=MAX_LATTICE_N).contains(&n) {
            return Err(MsError::InvalidDimension(n));
        }
        if g.iter().any(|r| r.len() != n) {
            return Err(MsError::InvalidArgument("g must be square".into()));
        }
        let d = det(&g);
        if (d - 1.0).abs() > 1e-10 {
            return Err(MsError::InvalidArgument(format!("det g = {d}, expected 1")));
        }
        Ok(TwistedLattice { n, g })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    }

    /// A seeded twist I + A with A uniform in [−½, ½], rescaled to det 1.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        if !(2..=MAX_LATTICE_N).contains(&n) {
            return Err(MsError::InvalidDimension(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let mut g: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } + rng.random_range(-0.5..0.5)).collect())
                .collect();
            let d = det(&g);
            if d.abs() < 0.2 {
                continue;
            }
            if d < 0.0 {
                g[0].iter_mut().for_each(|v| *v = -*v);
            }
            let s = d.abs().powf(-1.0 / n as f64);
            g.iter_mut().flatten().for_each(|v| *v *= s);
            // rescaling leaves a rounding residue of order 1e−16
            let d = det(&g);
            g[0].iter_mut().for_each(|v| *v /= d);
            return Self::new(g);
        }
    }

    /// The n=2 Iwasawa point [[y^{−1/2}, 0], [x y^{−1/2}, y^{1/2}]].
    pub fn iwasawa2(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) {
            return Err(MsError::InvalidArgument(format!("y={y} must be positive")));
        }
        let r = y.sqrt();
        Self::new(vec![vec![1.0 / r, 0.0], vec![x / r, r]])
    }

    /// g^{−T}, which carries rank-k sublattices to their rank-(n−k) annihilators.
    pub fn inverse_transpose(&self) -> Result<Self> {
        let inv = invert(&self.g)?;
        let n = self.n;
        Self::new((0..n).map(|i| (0..n).map(|j| inv[j][i]).collect()).collect())
    }

    /// g·Q for an orthogonal Q (right rotation); twisted determinants are unchanged.
    pub fn rotate(&self, q: &[Vec<f64>]) -> Result<Self> {
        Self::new(matmul(&self.g, q))
    }

    fn image(&self, x: &[i64]) -> Vec<f64> {
        (0..self.n).map(|j| x.iter().zip(&self.g).map(|(&a, row)| a as f64 * row[j]).sum()).collect()
    }

    /// √det(B g (B g)ᵀ) for integer rows B.
    pub fn twisted_det(&self, basis: &[Vec<i64>]) -> f64 {
        let imgs: Vec<Vec<f64>> = basis.iter().map(|b| self.image(b)).collect();
        let gram: Vec<Vec<f64>> = imgs.iter().map(|a| imgs.iter().map(|b| dot(a, b)).collect()).collect();
        det(&gram).max(0.0).sqrt()
    }
}

/// A primitive sublattice with its canonical basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublatticeRecord {
    /// row Hermite normal form of the saturated span
    pub basis: Vec<Vec<i64>>,
    pub det_twisted: f64,
}

// ---------------------------------------------------------------- integer linear algebra

fn echelon(m: &mut [Vec<i128>], ncols: usize, aux: &mut Option<&mut Vec<Vec<i128>>>) -> usize {
    // unimodular row reduction on the first `ncols` columns; `aux` follows the same row operations
    let rows = m.len();
    let mut pr = 0;
    for c in 0..ncols {
        if pr == rows {
            break;
        }
        loop {
            let piv = (pr..rows).filter(|&r| m[r][c] != 0).min_by_key(|&r| m[r][c].abs());
            let Some(piv) = piv else { break };
            m.swap(pr, piv);
            if let Some(a) = aux.as_deref_mut() {
                a.swap(pr, piv);
            }
            let mut done = true;
            for r in pr + 1..rows {
                if m[r][c] != 0 {
                    let q = m[r][c].div_euclid(m[pr][c]);
                    let (top, rest) = m.split_at_mut(r);
                    for (x, y) in rest[0].iter_mut().zip(&top[pr]) {
                        *x -= q * y;
                    }
                    if let Some(a) = aux.as_deref_mut() {
                        let (top, rest) = a.split_at_mut(r);
                        for (x, y) in rest[0].iter_mut().zip(&top[pr]) {
                            *x -= q * y;
                        }
                    }
                    if m[r][c] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if m[pr][c] != 0 {
            pr += 1;
        }
    }
    pr
}

fn to_i128(b: &[Vec<i64>]) -> Vec<Vec<i128>> {
    b.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect()
}

fn to_i64(b: &[Vec<i128>]) -> Result<Vec<Vec<i64>>> {
    b.iter()
        .map(|r| r.iter().map(|&v| i64::try_from(v).map_err(|_| MsError::InvalidArgument("integer overflow".into()))).collect())
        .collect()
}

/// Row Hermite normal form (positive pivots, entries above a pivot reduced into [0, pivot)); zero rows dropped.
pub fn hnf(b: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let Some(ncols) = b.first().map(|r| r.len()) else { return Ok(Vec::new()) };
    let mut m = to_i128(b);
    let rank = echelon(&mut m, ncols, &mut None);
    m.truncate(rank);
    let mut col = 0;
    for r in 0..rank {
        while m[r][col] == 0 {
            col += 1;
        }
        if m[r][col] < 0 {
            m[r].iter_mut().for_each(|v| *v = -*v);
        }
        let p = m[r][col];
        for above in 0..r {
            let q = m[above][col].div_euclid(p);
            if q != 0 {
                let (top, rest) = m.split_at_mut(r);
                for (x, y) in top[above].iter_mut().zip(&rest[0]) {
                    *x -= q * y;
                }
            }
        }
    }
    to_i64(&m)
}

/// Rank of an integer matrix.
pub fn rank(b: &[Vec<i64>]) -> usize {
    let Some(ncols) = b.first().map(|r| r.len()) else { return 0 };
    echelon(&mut to_i128(b), ncols, &mut None)
}

/// Basis (rows) of {x ∈ Zⁿ : B xᵀ = 0}.
pub fn integer_kernel(b: &[Vec<i64>], n: usize) -> Result<Vec<Vec<i64>>> {
    let r = b.len();
    let mut m: Vec<Vec<i128>> = (0..n).map(|i| b.iter().map(|row| row[i] as i128).collect()).collect();
    let mut aux: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect();
    let rk = echelon(&mut m, r, &mut Some(&mut aux));
    to_i64(&aux[rk..])
}

/// HNF basis of (row-span(B) ⊗ ℚ) ∩ Zⁿ.
pub fn saturate(b: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let n = b.first().map(|r| r.len()).ok_or_else(|| MsError::RankError("empty basis".into()))?;
    if rank(b) < b.len() {
        return Err(MsError::RankError(format!("{} rows of rank {}", b.len(), rank(b))));
    }
    let k = integer_kernel(b, n)?;
    hnf(&integer_kernel(&k, n)?)
}

/// k×k minors of a k×n integer matrix, columns in lexicographic order.
pub fn plucker(b: &[Vec<i64>]) -> Vec<i64> {
    let k = b.len();
    let n = b.first().map_or(0, |r| r.len());
    let mut out = Vec::new();
    let mut cols: Vec<usize> = (0..k).collect();
    loop {
        let sub: Vec<Vec<i128>> = b.iter().map(|r| cols.iter().map(|&c| r[c] as i128).collect()).collect();
        out.push(bareiss(sub) as i64);
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cols[i] < n - k + i {
                cols[i] += 1;
                for j in i + 1..k {
                    cols[j] = cols[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn bareiss(mut m: Vec<Vec<i128>>) -> i128 {
    let k = m.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for i in 0..k {
        if m[i][i] == 0 {
            match (i + 1..k).find(|&r| m[r][i] != 0) {
                Some(r) => {
                    m.swap(i, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for r in i + 1..k {
            for c in i + 1..k {
                m[r][c] = (m[r][c] * m[i][i] - m[r][i] * m[i][c]) / prev;
            }
        }
        prev = m[i][i];
    }
    sign * m[k - 1][k - 1]
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// [saturation : span(B)], the gcd of the Plücker coordinates.
pub fn saturation_index(b: &[Vec<i64>]) -> i64 {
    plucker(b).into_iter().fold(0, gcd)
}

// ---------------------------------------------------------------- real linear algebra

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, row)| x * row[j]).sum()).collect()).collect()
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
        }
    }
    d
}

fn invert(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.iter().enumerate().map(|(i, r)| r.iter().copied().chain((0..n).map(|j| (i == j) as u8 as f64)).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c].abs() < 1e-300 {
            return Err(MsError::InvalidArgument("singular matrix".into()));
        }
        a.swap(p, c);
        let piv = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        a[r][j] -= f * a[c][j];
                    }
                }
            }
        }
    }
    Ok(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// LLL (δ = 0.99) on the rows of g; returns (U, U·g) with U unimodular.
fn lll(g: &[Vec<f64>]) -> (Vec<Vec<i64>>, Vec<Vec<f64>>) {
    let n = g.len();
    let mut b = g.to_vec();
    let mut u: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i64).collect()).collect();
    let gso = |b: &[Vec<f64>]| {
        let mut bs: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut mu = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut v = b[i].clone();
            for j in 0..i {
                mu[i][j] = dot(&b[i], &bs[j]) / dot(&bs[j], &bs[j]);
                for t in 0..n {
                    v[t] -= mu[i][j] * bs[j][t];
                }
            }
            bs.push(v);
        }
        (bs, mu)
    };
    let mut k = 1;
    let mut guard = 0;
    while k < n && guard < 10_000 {
        guard += 1;
        let (_, mu) = gso(&b);
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                for t in 0..n {
                    b[k][t] -= q * b[j][t];
                    u[k][t] -= q as i64 * u[j][t];
                }
            }
        }
        let (bs, mu) = gso(&b);
        let lhs = dot(&bs[k], &bs[k]);
        let rhs = (0.99 - mu[k][k - 1] * mu[k][k - 1]) * dot(&bs[k - 1], &bs[k - 1]);
        if lhs >= rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            u.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    (u, b)
}

// ---------------------------------------------------------------- Fincke–Pohst

/// Calls `visit` for every y ∈ Zⁿ∖{0} with yAyᵀ ≤ bound, one of each ±y.
/// Returns false if `visit` asked to stop.
fn fincke_pohst(a: &[Vec<f64>], bound: f64, visit: &mut dyn FnMut(&[i64]) -> bool) -> bool {
    let n = a.len();
    // upper Cholesky A = RᵀR
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        let d = a[i][i] - (0..i).map(|k| r[k][i] * r[k][i]).sum::<f64>();
        if !(d > 0.0) {
            return true;
        }
        r[i][i] = d.sqrt();
        for j in i + 1..n {
            r[i][j] = (a[i][j] - (0..i).map(|k| r[k][i] * r[k][j]).sum::<f64>()) / r[i][i];
        }
    }
    let mut y = vec![0i64; n];
    fp_level(&r, n - 1, bound * (1.0 + 1e-9), true, &mut y, visit)
}

fn fp_level(r: &[Vec<f64>], i: usize, rem: f64, zero_above: bool, y: &mut [i64], visit: &mut dyn FnMut(&[i64]) -> bool) -> bool {
    let n = r.len();
    let center = -(i + 1..n).map(|j| r[i][j] * y[j] as f64).sum::<f64>() / r[i][i];
    let half = (rem.max(0.0)).sqrt() / r[i][i];
    let mut lo = (center - half).ceil() as i64;
    let hi = (center + half).floor() as i64;
    if zero_above {
        lo = lo.max(0);
    }
    for v in lo..=hi {
        let t = r[i][i] * (v as f64 - center);
        let left = rem - t * t;
        if left < 0.0 {
            continue;
        }
        y[i] = v;
        let still_zero = zero_above && v == 0;
        let go_on = if i == 0 {
            if still_zero {
                true
            } else {
                visit(y)
            }
        } else {
            fp_level(r, i - 1, left, still_zero, y, visit)
        };
        if !go_on {
            y[i] = 0;
            return false;
        }
    }
    y[i] = 0;
    true
}

// ---------------------------------------------------------------- enumeration

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumOptions {
    /// multiplies the Hermite radii (completeness is checked by doubling it)
    pub radius_factor: f64,
    /// cap on visited candidate vectors
    pub budget: usize,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { radius_factor: DEFAULT_RADIUS_FACTOR, budget: DEFAULT_BUDGET }
    }
}

/// Canonical key of a primitive sublattice: its Plücker vector, sign
/// normalized; packed into a u128 when the coordinates are small.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    Packed(u128),
    Wide(Vec<i64>),
}

fn key_of(pl: &[i64]) -> Key {
    let s = if pl.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) { -1 } else { 1 };
    if pl.len() <= 10 && pl.iter().all(|&v| v.abs() < 2048) {
        let mut k = 0u128;
        for &v in pl {
            k = (k << 12) | ((s * v + 2048) as u128);
        }
        Key::Packed(k)
    } else {
        Key::Wide(pl.iter().map(|&v| s * v).collect())
    }
}

struct Found {
    key: Key,
    det: f64,
    basis: Option<Vec<Vec<i64>>>,
    /// false when the search can only produce this lattice once
    maybe_repeated: bool,
}

struct Search<'a> {
    k: usize,
    p: f64,
    lim: f64,
    factor: f64,
    u: &'a [Vec<i64>],
    b: &'a [Vec<f64>],
    gram: Vec<Vec<f64>>,
    keep_basis: bool,
    visited: &'a AtomicUsize,
    budget: usize,
    abort: &'a AtomicBool,
}

struct Level {
    ys: Vec<Vec<i64>>,
    bstar: Vec<Vec<f64>>,
    bnorm2: Vec<f64>,
    prod: f64,
}

impl Search<'_> {
    fn w(&self, y: &[i64]) -> Vec<f64> {
        let n = y.len();
        (0..n).map(|j| y.iter().zip(self.b).map(|(&a, row)| a as f64 * row[j]).sum()).collect()
    }

    fn upper(&self, i: usize, prod: f64) -> f64 {
        let r = self.k - i;
        if r == 1 {
            self.lim / prod
        } else {
            self.factor * sqrt_hermite(r) * (self.lim / prod).powf(1.0 / r as f64)
        }
    }

    fn tick(&self) -> bool {
        if self.visited.fetch_add(1, Ordering::Relaxed) >= self.budget {
            self.abort.store(true, Ordering::Relaxed);
        }
        !self.abort.load(Ordering::Relaxed)
    }

    /// Extend the partial basis in `lv` by every admissible next vector.
    fn extend(&self, lv: &mut Level, out: &mut Vec<Found>) -> bool {
        let i = lv.ys.len();
        let n = self.b.len();
        let ub = self.upper(i, lv.prod);
        // the ellipsoid |π_i w|²/ub² + t(4/i)Σμ_j² ≤ 1 + t contains the admissible
        // cylinder; t = i/(n−i) minimizes its volume
        let t = i as f64 / (n - i) as f64;
        let cs: Vec<Vec<f64>> = lv.bstar.iter().map(|bs| self.b.iter().map(|row| dot(row, bs)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in 0..n {
                let mut v = self.gram[r][c] / (ub * ub);
                for (cj, &nj) in cs.iter().zip(&lv.bnorm2) {
                    v += cj[r] * cj[c] * (4.0 * t / (i as f64 * nj * nj) - 1.0 / (nj * ub * ub));
                }
                a[r][c] = v;
            }
        }
        let bound = 1.0 + t;
        let lower2 = lv.bnorm2.last().map_or(0.0, |&b| 0.75 * b * (1.0 - 1e-9));
        let mut ok = true;
        fincke_pohst(&a, bound, &mut |y: &[i64]| {
            if !self.tick() {
                ok = false;
                return false;
            }
            let w = self.w(y);
            let mut pi = w.clone();
            for (bs, &nb) in lv.bstar.iter().zip(&lv.bnorm2) {
                let mu = dot(&w, bs) / nb;
                if mu.abs() > 0.5 + 1e-9 {
                    return true;
                }
                pi.iter_mut().zip(bs).for_each(|(p, b)| *p -= mu * b);
            }
            let pn2 = dot(&pi, &pi);
            if pn2 < lower2 || pn2.sqrt() > ub * (1.0 + TIE_TOL) || pn2 < 1e-18 {
                return true;
            }
            let mut repeated = true;
            if self.k == 2 {
                // a Lagrange-reduced pair: |v₂| ≥ |v₁|, and unique up to sign unless a bound is tight
                let (w2, v2) = (dot(&w, &w), lv.bnorm2[0]);
                if w2 < v2 * (1.0 - 1e-9) {
                    return true;
                }
                let mu = dot(&w, &lv.bstar[0]) / v2;
                repeated = w2 <= v2 * (1.0 + 1e-9) || mu.abs() >= 0.5 - 1e-9;
            }
            let prod = lv.prod * pn2.sqrt();
            lv.ys.push(y.to_vec());
            if i + 1 == self.k {
                if prod <= self.p * (1.0 + TIE_TOL) {
                    self.accept(&lv.ys, prod, repeated, out);
                }
            } else {
                lv.bstar.push(pi);
                lv.bnorm2.push(pn2);
                let saved = lv.prod;
                lv.prod = prod;
                ok = self.extend(lv, out);
                lv.prod = saved;
                lv.bstar.pop();
                lv.bnorm2.pop();
            }
            lv.ys.pop();
            ok
        });
        ok
    }

    fn accept(&self, ys: &[Vec<i64>], det: f64, maybe_repeated: bool, out: &mut Vec<Found>) {
        let n = self.u.len();
        let xs: Vec<Vec<i64>> = ys.iter().map(|y| (0..n).map(|j| y.iter().zip(self.u).map(|(&a, row)| a * row[j]).sum()).collect()).collect();
        let pl = plucker(&xs);
        if pl.iter().copied().fold(0, gcd) != 1 {
            return;
        }
        out.push(Found { key: key_of(&pl), det, basis: self.keep_basis.then_some(xs), maybe_repeated });
    }
}

/// Determinants, plus bases when they were kept.
struct Hits {
    dets: Vec<f64>,
    bases: Vec<Vec<Vec<i64>>>,
}

fn enumerate_raw(lat: &TwistedLattice, k: usize, p: f64, opts: &EnumOptions, keep_basis: bool) -> Result<Hits> {
    let n = lat.n;
    if k == 0 || k >= n {
        return Err(MsError::InvalidParabolic { n, k });
    }
    if !(p > 0.0) {
        return Err(MsError::InvalidArgument(format!("p={p} must be positive")));
    }
    let (u, b) = lll(&lat.g);
    let gram: Vec<Vec<f64>> = b.iter().map(|r| b.iter().map(|s| dot(r, s)).collect()).collect();
    let visited = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let search = Search {
        k,
        p,
        lim: p * (1.0 + TIE_TOL),
        factor: opts.radius_factor,
        u: &u,
        b: &b,
        gram,
        keep_basis,
        visited: &visited,
        budget: opts.budget,
        abort: &abort,
    };
    // first vectors, then the deeper levels in parallel per first vector
    let r1 = search.upper(0, 1.0);
    let a: Vec<Vec<f64>> = search.gram.iter().map(|r| r.iter().map(|v| v / (r1 * r1)).collect()).collect();
    let mut firsts: Vec<Vec<i64>> = Vec::new();
    fincke_pohst(&a, 1.0, &mut |y: &[i64]| {
        firsts.push(y.to_vec());
        search.tick()
    });
    let budget_err = |done: usize, total: usize| {
        let frac = (done.max(1) as f64 / total.max(1) as f64).min(1.0);
        let est = visited.load(Ordering::Relaxed) as f64 / frac;
        MsError::BudgetError { suggested_p: p * (0.5 * opts.budget as f64 / est).powf(1.0 / n as f64) }
    };
    if abort.load(Ordering::Relaxed) {
        return Err(budget_err(0, 1));
    }
    let run = |y: &Vec<i64>| {
        let w = search.w(y);
        let nb = dot(&w, &w);
        let mut out = Vec::new();
        if k == 1 {
            if nb.sqrt() <= search.lim {
                search.accept(std::slice::from_ref(y), nb.sqrt(), false, &mut out);
            }
            return Some(out);
        }
        let mut lv = Level { ys: vec![y.clone()], bstar: vec![w], bnorm2: vec![nb], prod: nb.sqrt() };
        search.extend(&mut lv, &mut out).then_some(out)
    };
    // batches keep the not-yet-deduplicated hits small
    let mut seen: HashSet<Key> = HashSet::new();
    let mut all = Hits { dets: Vec::new(), bases: Vec::new() };
    for (bi, batch) in firsts.chunks(MERGE_BATCH).enumerate() {
        let parts = crate::exec::map(batch, run);
        if abort.load(Ordering::Relaxed) || parts.iter().any(|p| p.is_none()) {
            return Err(budget_err(bi * MERGE_BATCH, firsts.len()));
        }
        for f in parts.into_iter().flatten().flatten() {
            if !f.maybe_repeated || seen.insert(f.key.clone()) {
                all.dets.push(f.det);
                all.bases.extend(f.basis);
            }
        }
    }
    Ok(all)
}

/// Every primitive rank-k sublattice L of Zⁿ with det(Lg) ≤ p, once each,
/// sorted by determinant and then by basis.
pub fn enumerate_primitive(lat: &TwistedLattice, k: usize, p: f64, opts: &EnumOptions) -> Result<Vec<SublatticeRecord>> {
    let mut recs: Vec<SublatticeRecord> = enumerate_raw(lat, k, p, opts, true)?
        .bases
        .into_iter()
        .map(|b| {
            let basis = saturate(&b)?;
            Ok(SublatticeRecord { det_twisted: lat.twisted_det(&basis), basis })
        })
        .collect::<Result<_>>()?;
    recs.sort_by(|a, b| a.det_twisted.total_cmp(&b.det_twisted).then_with(|| a.basis.cmp(&b.basis)));
    Ok(recs)
}

/// Twisted determinants of all primitive rank-k sublattices with det ≤ p, ascending
/// (count-only mode: no HNF work).
pub fn primitive_dets(lat: &TwistedLattice, k: usize, p: f64, opts: &EnumOptions) -> Result<Vec<f64>> {
    let mut d: Vec<f64> = enumerate_raw(lat, k, p, opts, false)?.dets;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

pub fn count_primitive(lat: &TwistedLattice, k: usize, p: f64, opts: &EnumOptions) -> Result<usize> {
    Ok(enumerate_raw(lat, k, p, opts, false)?.dets.len())
}

/// Canonical keys of the enumerated set (for set comparisons).
pub fn primitive_keys(lat: &TwistedLattice, k: usize, p: f64, opts: &EnumOptions) -> Result<Vec<Vec<Vec<i64>>>> {
    let mut v: Vec<Vec<Vec<i64>>> = enumerate_primitive(lat, k, p, opts)?.into_iter().map(|r| r.basis).collect();
    v.sort();
    Ok(v)
}

/// E_f(g) = Σ_L f(det Lg) over primitive rank-k L.
pub fn e_f_eval(lat: &TwistedLattice, k: usize, f: &TestFunction, opts: &EnumOptions) -> Result<f64> {
    let dets = primitive_dets(lat, k, f.support_max(), opts)?;
    let mut acc = Neumaier::new();
    for d in dets {
        acc.add(f.eval(d));
    }
    Ok(acc.value())
}

/// E_f at the n=2 Iwasawa point (x, y) for k=1, by direct summation over
/// coprime (a, b) with b ≥ 0 (and a = 1 when b = 0).
pub fn e_f_n2(f: &TestFunction, x: f64, y: f64) -> f64 {
    let pm = f.support_max();
    let sy = y.sqrt();
    let bmax = (pm / sy).floor() as i64;
    let mut acc = Neumaier::new();
    acc.add(f.eval(1.0 / sy));
    for b in 1..=bmax {
        let rest = pm * pm - (b as f64 * sy).powi(2);
        if rest < 0.0 {
            break;
        }
        let half = rest.sqrt() * sy;
        let c = -(b as f64) * x;
        for a in (c - half).ceil() as i64..=(c + half).floor() as i64 {
            if gcd(a, b) == 1 {
                let v = (a as f64 + b as f64 * x) / sy;
                let nrm = (v * v + (b as f64 * sy).powi(2)).sqrt();
                acc.add(f.eval(nrm));
            }
        }
    }
    acc.value()
}

// ---------------------------------------------------------------- discrepancy

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub p: f64,
    pub count: usize,
    pub main_term: f64,
    pub discrepancy: f64,
    /// D(p)/p^{n−1/7+ε}
    pub normalized: f64,
    /// D(p)/p^{n−max(1/k,1/(n−k))}
    pub normalized_classical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyTable {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub exponent: f64,
    pub classical_exponent: f64,
    pub rows: Vec<DiscrepancyRow>,
}

/// Counts against Mh_p(n)ξ(n,k) = pⁿξ(n,k)/n over a p grid (one enumeration at the largest p).
pub fn discrepancy_experiment(lat: &TwistedLattice, k: usize, p_grid: &[f64], eps: f64, opts: &EnumOptions) -> Result<DiscrepancyTable> {
    let n = lat.n;
    let pmax = p_grid.iter().copied().fold(f64::NAN, f64::max);
    if p_grid.is_empty() || !(pmax > 0.0) {
        return Err(MsError::InvalidArgument("empty p grid".into()));
    }
    let dets = primitive_dets(lat, k, pmax, opts)?;
    let xi = xi_nk(n, k)?;
    let exponent = n as f64 - 1.0 / 7.0 + eps;
    let classical_exponent = n as f64 - (1.0 / k as f64).max(1.0 / (n - k) as f64);
    let rows = p_grid
        .iter()
        .map(|&p| {
            let count = dets.partition_point(|&d| d <= p * (1.0 + TIE_TOL));
            let main_term = p.powi(n as i32) / n as f64 * xi;
            let discrepancy = count as f64 - main_term;
            DiscrepancyRow {
                p,
                count,
                main_term,
                discrepancy,
                normalized: discrepancy / p.powf(exponent),
                normalized_classical: discrepancy / p.powf(classical_exponent),
            }
        })
        .collect();
    Ok(DiscrepancyTable { n, k, eps, exponent, classical_exponent, rows })
}

// ---------------------------------------------------------------- dyadic schedule

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// p_0, …, p_{2^S}
    pub p: Vec<f64>,
    /// pairs (j, k) with j = u·2^s, k − j = 2^s
    pub k_s: Vec<(usize, usize)>,
}

/// p₀ = 0, p₁ = 2H₀, p_{j+1}^{2n−η} = p_j^{2n−η} + H₀^{2n−η}, and the index set K_S.
pub fn schmidt_schedule(h0: f64, n: usize, eta: f64, s: u32) -> Result<Schedule> {
    if s > 20 {
        return Err(MsError::InvalidArgument(format!("S={s} exceeds 20")));
    }
    if !(h0 > 0.0) || !(0.0..1.0).contains(&eta) {
        return Err(MsError::InvalidArgument("need H0 > 0 and 0 <= eta < 1".into()));
    }
    let e = 2.0 * n as f64 - eta;
    let len = 1usize << s;
    let step = h0.powf(e);
    let base = (2.0 * h0).powf(e);
    let mut p = vec![0.0];
    p.extend((0..len).map(|j| (base + j as f64 * step).powf(1.0 / e)));
    let mut k_s = Vec::new();
    for lvl in 0..=s {
        let w = 1usize << lvl;
        for u in 0..(len >> lvl) {
            k_s.push((u * w, u * w + w));
        }
    }
    Ok(Schedule { p, k_s })
}

/// [0, N) as a union of at most S intervals from K_S (binary expansion of N).
pub fn dyadic_decomposition(big_n: usize, s: u32) -> Result<Vec<(usize, usize)>> {
    if big_n > 1 << s {
        return Err(MsError::InvalidArgument(format!("N={big_n} exceeds 2^{s}")));
    }
    let mut out = Vec::new();
    let mut start = 0;
    for lvl in (0..=s).rev() {
        let w = 1usize << lvl;
        if big_n - start >= w {
            out.push((start, start + w));
            start += w;
        }
    }
    Ok(out)
}

/// δ^{−α}H₁(S+1)2^S.
pub fn variance_budget(s: u32, delta: f64, h1: f64, alpha: f64) -> f64 {
    delta.powf(-alpha) * h1 * (s as f64 + 1.0) * (1u64 << s) as f64
}

// ---------------------------------------------------------------- Monte Carlo (n = 2)

/// Integrand factor for the Monte Carlo oracle: E_f or the constant 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum McFactor {
    One,
    Eisenstein(TestFunction),
}

impl McFactor {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            McFactor::One => 1.0,
            McFactor::Eisenstein(f) => e_f_n2(f, x, y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub effective_samples: f64,
}

/// Number of independent RNG streams; fixed so results do not depend on the worker count.
pub const MC_CHUNKS: usize = 64;

/// ∫_{y ≤ T} F₁F₂ ½dx dy/y² over the standard fundamental domain, sampling
/// x uniformly and y ∝ y^{−2} on [√(1−x²), T].
pub fn mc_truncated_integral_n2(f1: &McFactor, f2: &McFactor, t: f64, samples: usize, seed: u64) -> Result<McResult> {
    if !(t > 1.0) {
        return Err(MsError::InvalidArgument(format!("T={t} must exceed 1")));
    }
    if samples < 2 {
        return Err(MsError::McUnreliable(samples));
    }
    let chunk = |c: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let m = samples / MC_CHUNKS + usize::from(c < samples % MC_CHUNKS);
        let (mut s1, mut s2, mut sa) = (Neumaier::new(), Neumaier::new(), Neumaier::new());
        for _ in 0..m {
            let x: f64 = rng.random_range(-0.5..0.5);
            let a = (1.0 - x * x).sqrt();
            let z = 1.0 / a - 1.0 / t;
            let u: f64 = rng.random();
            let y = 1.0 / (1.0 / a - u * z);
            let v = 0.5 * z * f1.eval(x, y) * f2.eval(x, y);
            s1.add(v);
            s2.add(v * v);
            sa.add(v.abs());
        }
        (s1.value(), s2.value(), sa.value())
    };
    let parts = crate::exec::map_range(MC_CHUNKS, chunk);
    let (mut s1, mut s2, mut sa) = (Neumaier::new(), Neumaier::new(), Neumaier::new());
    for (a, b, c) in parts {
        s1.add(a);
        s2.add(b);
        sa.add(c);
    }
    let nf = samples as f64;
    let mean = s1.value() / nf;
    let var = ((s2.value() / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let ess = if s2.value() > 0.0 { sa.value().powi(2) / s2.value() } else { 0.0 };
    if ess < 100.0 {
        return Err(MsError::McUnreliable(ess as usize));
    }
    Ok(McResult { estimate: mean, std_error: (var / nf).sqrt(), samples, effective_samples: ess })
}

/// Per-key counts of primitive vectors (n = 2, k = 1, g = I) by a plain gcd scan.
pub fn gcd_scan_count(p: f64) -> usize {
    let r = p.floor() as i64;
    let mut c = 0;
    for a in -r..=r {
        for b in 0..=r {
            if (b > 0 || a > 0) && gcd(a, b) == 1 && ((a * a + b * b) as f64) <= p * p * (1.0 + TIE_TOL) {
                c += 1;
            }
        }
    }
    c
}

/// Histogram of twisted determinants, used by tests comparing two enumerations.
pub fn det_histogram(dets: &[f64], digits: i32) -> HashMap<i64, usize> {
    let scale = 10f64.powi(digits);
    let mut h = HashMap::new();
    for d in dets {
        *h.entry((d * scale).round() as i64).or_insert(0) += 1;
    }
    h
}
