//! Central finite differences against analytic gradients.

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;
/// Absolute deviations at or below this count as exact.
pub const FD_FLOOR: f64 = 1e-8;

pub fn numeric_grad<F: FnMut(&[f64]) -> f64>(mut f: F, params: &[f64]) -> Vec<f64> {
    let mut x = params.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + FD_STEP;
            let fp = f(&x);
            x[i] = orig - FD_STEP;
            let fm = f(&x);
            x[i] = orig;
            (fp - fm) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|)`, or 0 when `|a - n| <= FD_FLOOR`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= FD_FLOOR {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

/// Worst relative deviation between `analytic` and central differences of `f`.
pub fn fd_check<F: FnMut(&[f64]) -> f64>(f: F, params: &[f64], analytic: &[f64]) -> f64 {
    assert_eq!(params.len(), analytic.len(), "fd_check: gradient length");
    numeric_grad(f, params)
        .iter()
        .zip(analytic)
        .map(|(&n, &a)| relative_error(a, n))
        .fold(0.0, f64::max)
}
