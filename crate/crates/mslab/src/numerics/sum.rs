//! Compensated accumulation in the two supported precision modes.

use super::dd::CDd;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Working precision for accumulations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// binary64 with Neumaier compensation
    #[default]
    Double,
    /// double-double accumulation
    Dd,
}

impl Precision {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "double" => Some(Precision::Double),
            "dd" | "double-double" => Some(Precision::Dd),
            _ => None,
        }
    }
}

/// Neumaier (improved Kahan) sum of real values.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Complex accumulator whose backend is chosen by [`Precision`].
#[derive(Clone, Copy, Debug)]
pub enum ComplexAcc {
    Double(Neumaier, Neumaier),
    Dd(CDd),
}

impl ComplexAcc {
    pub fn new(p: Precision) -> Self {
        match p {
            Precision::Double => ComplexAcc::Double(Neumaier::new(), Neumaier::new()),
            Precision::Dd => ComplexAcc::Dd(CDd::ZERO),
        }
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        match self {
            ComplexAcc::Double(re, im) => {
                re.add(z.re);
                im.add(z.im);
            }
            ComplexAcc::Dd(acc) => *acc = acc.add_c64(z),
        }
    }

    pub fn value(&self) -> Complex64 {
        match self {
            ComplexAcc::Double(re, im) => Complex64::new(re.value(), im.value()),
            ComplexAcc::Dd(acc) => acc.to_c64(),
        }
    }
}

/// Sum a slice in order with compensation.
pub fn csum(values: &[Complex64], p: Precision) -> Complex64 {
    let mut acc = ComplexAcc::new(p);
    for v in values {
        acc.add(*v);
    }
    acc.value()
}

pub fn rsum(values: &[f64]) -> f64 {
    let mut acc = Neumaier::new();
    for v in values {
        acc.add(*v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_beats_naive() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(rsum(&xs), 2.0);
    }

    #[test]
    fn dd_mode_keeps_tiny_terms() {
        let mut v = vec![Complex64::new(1e16, 0.0)];
        v.extend(std::iter::repeat_n(Complex64::new(1.0, 0.0), 10));
        v.push(Complex64::new(-1e16, 0.0));
        assert_eq!(csum(&v, Precision::Dd).re, 10.0);
        assert_eq!(csum(&v, Precision::Double).re, 10.0);
    }

    #[test]
    fn parse_precision() {
        assert_eq!(Precision::parse("DD"), Some(Precision::Dd));
        assert_eq!(Precision::parse("double"), Some(Precision::Double));
        assert_eq!(Precision::parse("quad"), None);
    }
}
