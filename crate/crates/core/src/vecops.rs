//! Dense slice kernels shared by the integrator and the analysis modules.

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow for huge states
    let m = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = a.iter().map(|x| (x / m) * (x / m)).sum();
    m * s.sqrt()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    let m = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| ((x - y) / m).powi(2)).sum();
    m * s.sqrt()
}
