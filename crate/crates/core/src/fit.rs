//! Ordinary least-squares line fits used by every exponent estimator.

use crate::{Error, Result};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

/// Result of fitting `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact line or two points.
    pub slope_stderr: f64,
    /// Largest absolute deviation of the data from the fitted line.
    pub max_residual: f64,
    pub samples: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::DimensionMismatch { expected: n, got: ys.len() });
    }
    if n < 2 {
        return Err(Error::FitInsufficient(alloc::format!("{n} points")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::FitInsufficient("abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ssr = 0.0;
    let mut max_residual = 0.0_f64;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ssr += r * r;
        max_residual = max_residual.max(r.abs());
    }
    let slope_stderr = if n > 2 { (ssr / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit { slope, intercept, slope_stderr, max_residual, samples: n })
}

/// Fit `y ≈ C x^p` on log-log axes; inputs must be strictly positive.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::FitInsufficient("non-positive value in power-law fit".into()));
    }
    let lx: alloc::vec::Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: alloc::vec::Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-14);
    }

    #[test]
    fn stderr_matches_hand_computation() {
        // residuals (+1, -2, +1) around y = x: ssr = 6, sxx = 2
        let f = fit_line(&[-1.0, 0.0, 1.0], &[0.0, -2.0, 2.0]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14);
        assert!((f.slope_stderr - (6.0_f64 / 1.0 / 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 0.0]).is_err());
    }
}
