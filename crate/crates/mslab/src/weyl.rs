//! Root data and Weyl group of SL(n).
//!
//! Conventions: a Weyl element is the one-line image (w(1), …, w(n)) with
//! values in 1..=n, acting on weights by (wλ)_{w(i)} = λ_i. Simple coroots
//! pair as ⟨α_j∨, λ⟩ = λ_j − λ_{j+1}; ρ∨ has entries (n−1)/2, (n−3)/2, ….
//!
//! Besides numeric weights this module carries symbolic weights whose
//! entries are affine forms in (s₁, s₂, ε); they let the intertwining and
//! Maass-Selberg code classify zeros and poles exactly.

use crate::error::{MsError, Result};
use num_complex::Complex64 as C64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const MAX_N: usize = 8;

fn check_n(n: usize) -> Result<()> {
    if (2..=MAX_N).contains(&n) {
        Ok(())
    } else {
        Err(MsError::InvalidDimension(n))
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    check_n(n)?;
    if k >= 1 && k < n {
        Ok(())
    } else {
        Err(MsError::InvalidParabolic { n, k })
    }
}

/// A point of 𝔞*_ℂ, stored raw; comparisons are modulo constant shifts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub entries: Vec<C64>,
}

impl WeightVector {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        check_n(entries.len())?;
        Ok(WeightVector { entries })
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    /// Representative with entries summing to zero.
    pub fn canonical(&self) -> WeightVector {
        let mean = self.entries.iter().sum::<C64>() / self.n() as f64;
        WeightVector { entries: self.entries.iter().map(|z| z - mean).collect() }
    }

    pub fn shifted(&self, c: C64) -> WeightVector {
        WeightVector { entries: self.entries.iter().map(|z| z + c).collect() }
    }

    /// Equality modulo constant shift, max-norm tolerance.
    pub fn approx_eq(&self, other: &WeightVector, tol: f64) -> bool {
        self.n() == other.n()
            && self
                .canonical()
                .entries
                .iter()
                .zip(other.canonical().entries.iter())
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    pub fn add(&self, other: &WeightVector) -> Result<WeightVector> {
        if self.n() != other.n() {
            return Err(MsError::DimensionMismatch(self.n(), other.n()));
        }
        Ok(WeightVector { entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect() })
    }

    pub fn scale(&self, c: C64) -> WeightVector {
        WeightVector { entries: self.entries.iter().map(|z| z * c).collect() }
    }
}

/// Exact rational coweight with entries summing to zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoweightVector {
    pub entries: Vec<Ratio<i64>>,
}

impl CoweightVector {
    pub fn new(entries: Vec<Ratio<i64>>) -> Result<Self> {
        check_n(entries.len())?;
        let total: Ratio<i64> = entries.iter().copied().sum();
        if total != Ratio::from_integer(0) {
            return Err(MsError::InvalidArgument(format!("coweight entries sum to {total}, not 0")));
        }
        Ok(CoweightVector { entries })
    }

    /// ρ∨ = ((n−1)/2, (n−3)/2, …, (1−n)/2).
    pub fn rho_vee(n: usize) -> Result<Self> {
        check_n(n)?;
        let e = (0..n).map(|i| Ratio::new(n as i64 - 1 - 2 * i as i64, 2)).collect();
        Self::new(e)
    }

    /// Simple coroot α_j∨ = e_j − e_{j+1} (1-based j).
    pub fn simple_coroot(n: usize, j: usize) -> Result<Self> {
        check_n(n)?;
        if j == 0 || j >= n {
            return Err(MsError::IndexOutOfRange { index: j, max: n - 1 });
        }
        let mut e = vec![Ratio::from_integer(0); n];
        e[j - 1] = Ratio::from_integer(1);
        e[j] = Ratio::from_integer(-1);
        Self::new(e)
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect()
    }

    pub fn pair(&self, lam: &WeightVector) -> Result<C64> {
        if self.n() != lam.n() {
            return Err(MsError::DimensionMismatch(self.n(), lam.n()));
        }
        Ok(self.as_f64().iter().zip(&lam.entries).map(|(a, z)| z * *a).sum())
    }
}

/// Permutation of {1..n} in one-line notation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WeylElement {
    image: Vec<usize>,
}

impl WeylElement {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        if n == 0 || n > MAX_N {
            return Err(MsError::InvalidDimension(n));
        }
        let mut seen = vec![false; n];
        for &v in &image {
            if v == 0 || v > n || seen[v - 1] {
                return Err(MsError::InvalidArgument(format!("{image:?} is not a permutation of 1..={n}")));
            }
            seen[v - 1] = true;
        }
        Ok(WeylElement { image })
    }

    pub fn identity(n: usize) -> Self {
        WeylElement { image: (1..=n).collect() }
    }

    /// Simple reflection (j j+1), 1-based.
    pub fn simple(n: usize, j: usize) -> Result<Self> {
        if j == 0 || j >= n {
            return Err(MsError::IndexOutOfRange { index: j, max: n.saturating_sub(1) });
        }
        let mut image: Vec<usize> = (1..=n).collect();
        image.swap(j - 1, j);
        Ok(WeylElement { image })
    }

    pub fn longest(n: usize) -> Self {
        WeylElement { image: (1..=n).rev().collect() }
    }

    pub fn n(&self) -> usize {
        self.image.len()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// w(i) for 1-based i.
    pub fn apply(&self, i: usize) -> usize {
        self.image[i - 1]
    }

    /// self ∘ other.
    pub fn compose(&self, other: &WeylElement) -> Result<WeylElement> {
        if self.n() != other.n() {
            return Err(MsError::DimensionMismatch(self.n(), other.n()));
        }
        Ok(WeylElement { image: other.image.iter().map(|&i| self.image[i - 1]).collect() })
    }

    pub fn inverse(&self) -> WeylElement {
        let mut inv = vec![0; self.n()];
        for (i, &v) in self.image.iter().enumerate() {
            inv[v - 1] = i + 1;
        }
        WeylElement { image: inv }
    }

    pub fn length(&self) -> usize {
        inversion_set(self).len()
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &v)| v == i + 1)
    }
}

impl fmt::Display for WeylElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.image.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// ρ = ((n−1)/2, …, (1−n)/2).
pub fn rho(n: usize) -> Result<WeightVector> {
    check_n(n)?;
    WeightVector::from_real(&(0..n).map(|i| (n as f64 - 1.0) / 2.0 - i as f64).collect::<Vec<_>>())
}

/// λ(s) = (−n, …, −k−1; −s−k, …, −s−1).
pub fn lambda_of_s(n: usize, k: usize, s: C64) -> Result<WeightVector> {
    check_k(n, k)?;
    WeightVector::new(SymWeight::lambda(n, k, SVar::S1)?.entries.iter().map(|a| a.eval(s, C64::new(0.0, 0.0), 0.0)).collect())
}

pub fn act(w: &WeylElement, lam: &WeightVector) -> Result<WeightVector> {
    if w.n() != lam.n() {
        return Err(MsError::DimensionMismatch(w.n(), lam.n()));
    }
    let mut out = vec![C64::new(0.0, 0.0); lam.n()];
    for (i, z) in lam.entries.iter().enumerate() {
        out[w.apply(i + 1) - 1] = *z;
    }
    Ok(WeightVector { entries: out })
}

/// ⟨α_j∨, λ⟩ = λ_j − λ_{j+1}.
pub fn coroot_pairing(j: usize, lam: &WeightVector) -> Result<C64> {
    if j == 0 || j >= lam.n() {
        return Err(MsError::IndexOutOfRange { index: j, max: lam.n() - 1 });
    }
    Ok(lam.entries[j - 1] - lam.entries[j])
}

/// ⟨ρ∨, λ⟩.
pub fn rho_covector_pairing(lam: &WeightVector) -> C64 {
    let n = lam.n();
    lam.entries.iter().enumerate().map(|(i, z)| z * ((n as f64 - 1.0) / 2.0 - i as f64)).sum()
}

/// {(i,j) : i<j, w(i)>w(j)}, 1-based.
pub fn inversion_set(w: &WeylElement) -> Vec<(usize, usize)> {
    let n = w.n();
    let mut out = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            if w.apply(i) > w.apply(j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// The block swap with w(n−k+1) < … < w(n) < w(1) < … < w(n−k).
pub fn w_star(n: usize, k: usize) -> Result<WeylElement> {
    check_k(n, k)?;
    let mut image = vec![0; n];
    for i in 0..n - k {
        image[i] = k + 1 + i;
    }
    for m in 0..k {
        image[n - k + m] = 1 + m;
    }
    WeylElement::new(image)
}

/// All n! permutations in lexicographic order of their images.
pub fn all_weyl(n: usize) -> Result<Vec<WeylElement>> {
    check_n(n)?;
    let mut cur: Vec<usize> = (1..=n).collect();
    let mut out = Vec::new();
    loop {
        out.push(WeylElement { image: cur.clone() });
        // next permutation
        let mut i = n - 1;
        while i > 0 && cur[i - 1] >= cur[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while cur[j] <= cur[i - 1] {
            j -= 1;
        }
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    Ok(out)
}

/// Which spectral variable a symbolic weight depends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SVar {
    S1,
    S2,
}

/// Affine form c + s1·s₁ + s2·s₂ + e·ε. All coefficients in this crate are
/// small dyadic rationals, so f64 arithmetic on them is exact and equality
/// tests are meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineForm {
    pub c: f64,
    pub s1: f64,
    pub s2: f64,
    pub e: f64,
}

impl AffineForm {
    pub const ZERO: AffineForm = AffineForm { c: 0.0, s1: 0.0, s2: 0.0, e: 0.0 };

    pub fn constant(c: f64) -> Self {
        AffineForm { c, ..Self::ZERO }
    }

    pub fn var(v: SVar) -> Self {
        match v {
            SVar::S1 => AffineForm { s1: 1.0, ..Self::ZERO },
            SVar::S2 => AffineForm { s2: 1.0, ..Self::ZERO },
        }
    }

    pub fn add(self, o: AffineForm) -> Self {
        AffineForm { c: self.c + o.c, s1: self.s1 + o.s1, s2: self.s2 + o.s2, e: self.e + o.e }
    }

    pub fn sub(self, o: AffineForm) -> Self {
        self.add(o.scale(-1.0))
    }

    pub fn scale(self, a: f64) -> Self {
        AffineForm { c: a * self.c, s1: a * self.s1, s2: a * self.s2, e: a * self.e }
    }

    pub fn plus_const(self, a: f64) -> Self {
        AffineForm { c: self.c + a, ..self }
    }

    pub fn is_s_free(&self) -> bool {
        self.s1 == 0.0 && self.s2 == 0.0
    }

    pub fn is_identically_zero(&self) -> bool {
        self.is_s_free() && self.c == 0.0 && self.e == 0.0
    }

    /// Value at ε = 0 (still symbolic in s).
    pub fn at_eps0(&self) -> AffineForm {
        AffineForm { e: 0.0, ..*self }
    }

    pub fn eval(&self, s1: C64, s2: C64, eps: f64) -> C64 {
        s1 * self.s1 + s2 * self.s2 + (self.c + self.e * eps)
    }
}

impl fmt::Display for AffineForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = vec![format!("{}", self.c)];
        if self.s1 != 0.0 {
            parts.push(format!("{}·s1", self.s1));
        }
        if self.s2 != 0.0 {
            parts.push(format!("{}·s2", self.s2));
        }
        if self.e != 0.0 {
            parts.push(format!("{}·ε", self.e));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// Weight whose entries are affine forms.
#[derive(Clone, Debug, PartialEq)]
pub struct SymWeight {
    pub entries: Vec<AffineForm>,
}

impl SymWeight {
    /// λ(s) in the chosen variable.
    pub fn lambda(n: usize, k: usize, var: SVar) -> Result<Self> {
        check_k(n, k)?;
        let mut entries = Vec::with_capacity(n);
        for i in 1..=n - k {
            entries.push(AffineForm::constant(-(n as f64) + i as f64 - 1.0));
        }
        for m in 1..=k {
            entries.push(AffineForm::var(var).scale(-1.0).plus_const(-(k as f64) + m as f64 - 1.0));
        }
        Ok(SymWeight { entries })
    }

    /// Constant weight.
    pub fn constant(values: &[f64]) -> Result<Self> {
        check_n(values.len())?;
        Ok(SymWeight { entries: values.iter().map(|&v| AffineForm::constant(v)).collect() })
    }

    pub fn rho(n: usize) -> Result<Self> {
        check_n(n)?;
        Self::constant(&(0..n).map(|i| (n as f64 - 1.0) / 2.0 - i as f64).collect::<Vec<_>>())
    }

    pub fn neg_rho(n: usize) -> Result<Self> {
        Ok(Self::rho(n)?.scaled(-1.0))
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn scaled(&self, a: f64) -> Self {
        SymWeight { entries: self.entries.iter().map(|x| x.scale(a)).collect() }
    }

    /// Adds ε·dir to the entries.
    pub fn perturbed(&self, dir: &[f64]) -> Result<Self> {
        if dir.len() != self.n() {
            return Err(MsError::DimensionMismatch(self.n(), dir.len()));
        }
        Ok(SymWeight {
            entries: self.entries.iter().zip(dir).map(|(a, d)| AffineForm { e: a.e + d, ..*a }).collect(),
        })
    }

    pub fn act(&self, w: &WeylElement) -> Result<Self> {
        if w.n() != self.n() {
            return Err(MsError::DimensionMismatch(w.n(), self.n()));
        }
        let mut out = vec![AffineForm::ZERO; self.n()];
        for (i, a) in self.entries.iter().enumerate() {
            out[w.apply(i + 1) - 1] = *a;
        }
        Ok(SymWeight { entries: out })
    }

    pub fn add(&self, o: &SymWeight) -> Result<Self> {
        if o.n() != self.n() {
            return Err(MsError::DimensionMismatch(self.n(), o.n()));
        }
        Ok(SymWeight { entries: self.entries.iter().zip(&o.entries).map(|(a, b)| a.add(*b)).collect() })
    }

    /// ⟨α_j∨, ·⟩, 1-based j.
    pub fn pairing(&self, j: usize) -> AffineForm {
        self.entries[j - 1].sub(self.entries[j])
    }

    /// ⟨ρ∨, ·⟩.
    pub fn rho_pairing(&self) -> AffineForm {
        let n = self.n();
        self.entries
            .iter()
            .enumerate()
            .fold(AffineForm::ZERO, |acc, (i, a)| acc.add(a.scale((n as f64 - 1.0) / 2.0 - i as f64)))
    }

    pub fn eval(&self, s1: C64, s2: C64, eps: f64) -> WeightVector {
        WeightVector { entries: self.entries.iter().map(|a| a.eval(s1, s2, eps)).collect() }
    }
}
