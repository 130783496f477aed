use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use super::eigen_gap;
use crate::model::DampedSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityReport {
    pub tau: f64,
    pub beta: f64,
    pub c_tau: f64,
    pub gap: f64,
    /// Number of eigenvectors spanning the truncated space.
    pub n_used: usize,
    /// `tau > 2 pi / gap`.
    pub ingham: bool,
}

/// `G_jk = int_0^tau <B* e^{A t} e_j, B* e^{A t} e_k> dt` on the eigenbasis.
pub fn gramian(system: &DampedSystem, tau: f64) -> Result<DMatrix<Complex64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("tau = {tau} must be positive")));
    }
    let eig = system.eigen_data().ok_or(Error::MissingEigenData)?;
    let s = eig.frequencies();
    let n = s.len();
    let mut g = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        let bj = eig.input_value(j);
        for k in j..n {
            let bk = eig.input_value(k);
            let inner: Complex64 = bj.iter().zip(bk).map(|(a, b)| a.conj() * b).sum();
            let d = s[k] - s[j];
            // (e^{i d tau} - 1) / (i d), with the series for tiny d
            let integral = if (d * tau).abs() < 1e-8 {
                Complex64::new(tau, 0.5 * d * tau * tau)
            } else {
                let (sn, cs) = (d * tau).sin_cos();
                Complex64::new(sn / d, (1.0 - cs) / d)
            };
            let v = inner * integral;
            g[(j, k)] = v;
            g[(k, j)] = v.conj();
        }
        g[(j, j)] = Complex64::new(eig.input_value_norm(j).powi(2) * tau, 0.0);
    }
    Ok(g)
}

/// Smallest `c` with `c |(I - A)^-beta x|^2 <= int_0^tau |B* e^{At} x|^2 dt` on
/// the truncated space: the bottom of the pencil `(G, W)`,
/// `W = diag((1 + s_k^2)^-beta)`.
pub fn observability_constant(system: &DampedSystem, tau: f64, beta: f64) -> Result<ObservabilityReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("beta = {beta} must be positive")));
    }
    let mut h = gramian(system, tau)?;
    let s = system.eigen_data().ok_or(Error::MissingEigenData)?.frequencies();
    let scale: Vec<f64> = s.iter().map(|v| (1.0 + v * v).powf(0.5 * beta)).collect();
    let n = s.len();
    for j in 0..n {
        for k in 0..n {
            h[(j, k)] *= scale[j] * scale[k];
        }
    }
    let values = nalgebra::linalg::SymmetricEigen::try_new(h, 1e-15, 100_000)
        .ok_or(Error::EigenSolver("Hermitian pencil"))?
        .eigenvalues;
    let c_tau = values.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let gap = eigen_gap(system)?;
    Ok(ObservabilityReport { tau, beta, c_tau, gap, n_used: n, ingham: tau > 2.0 * core::f64::consts::PI / gap })
}
