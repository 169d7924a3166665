//! Least-squares slopes and polynomial extrapolation to zero.

/// Ordinary least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need two points for a fit");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of log|y| against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Neville extrapolation of samples (h_i, v_i) to h = 0 with the full
/// interpolating polynomial. Returns the extrapolant and the estimate from
/// the table one order lower (used for convergence checks).
pub fn extrapolate_to_zero<T>(h: &[f64], v: &[T]) -> (T, T)
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    assert_eq!(h.len(), v.len());
    assert!(!h.is_empty());
    let m = h.len();
    let mut p: Vec<T> = v.to_vec();
    let mut lower = v[m - 1];
    for level in 1..m {
        for i in 0..m - level {
            let hi = h[i];
            let hj = h[i + level];
            // P(0) from P_i (without h_j) and P_{i+1} (without h_i)
            p[i] = p[i + 1] * (hi / (hi - hj)) + p[i] * (-hj / (hi - hj));
        }
        if level == m - 2 {
            lower = p[m - level - 1];
        }
    }
    if m == 1 {
        lower = p[0];
    }
    (p[0], lower)
}
