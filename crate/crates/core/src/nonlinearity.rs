//! Damping maps `phi: U -> U` and numerical checks of their structural hypotheses.
//!
//! The checks here sample; a negative monotonicity margin or a vanishing
//! sector constant is a certificate of failure, while passing values are
//! evidence on the sampled set only.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::fit::fit_line;
use crate::vecops;
use crate::{Error, Result};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

/// Scalar profile `psi: [0, inf) -> [0, inf)` of a radial map.
#[derive(Clone)]
pub enum RadialProfile {
    Tanh,
    /// `min(r, level)`
    Saturation(f64),
    /// `r^p`
    Power(f64),
    /// `max(r - width, 0)`
    Deadzone(f64),
    /// `sum_i c_i r^(i + 1)`
    Polynomial(Vec<f64>),
    Custom {
        label: String,
        psi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl RadialProfile {
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Tanh => r.tanh(),
            RadialProfile::Saturation(level) => r.min(*level),
            RadialProfile::Power(p) => r.powf(*p),
            RadialProfile::Deadzone(w) => (r - w).max(0.0),
            RadialProfile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| (acc + ci) * r),
            RadialProfile::Custom { psi, .. } => psi(r),
        }
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialProfile::Tanh => f.write_str("tanh"),
            RadialProfile::Saturation(l) => write!(f, "saturation({l})"),
            RadialProfile::Power(p) => write!(f, "power({p})"),
            RadialProfile::Deadzone(w) => write!(f, "deadzone({w})"),
            RadialProfile::Polynomial(c) => write!(f, "polynomial({c:?})"),
            RadialProfile::Custom { label, .. } => f.write_str(label),
        }
    }
}

pub type VectorMap = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A damping map. Radial maps are `psi(|u|) u / |u|` with value 0 at `u = 0`.
#[derive(Clone)]
pub enum Nonlinearity {
    Identity,
    LinearGain(f64),
    Radial(RadialProfile),
    Custom { label: String, map: Arc<VectorMap> },
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Identity => f.write_str("identity"),
            Nonlinearity::LinearGain(k) => write!(f, "gain({k})"),
            Nonlinearity::Radial(p) => write!(f, "radial {p:?}"),
            Nonlinearity::Custom { label, .. } => f.write_str(label),
        }
    }
}

impl Nonlinearity {
    pub fn tanh() -> Self {
        Nonlinearity::Radial(RadialProfile::Tanh)
    }

    pub fn cubic() -> Self {
        Nonlinearity::Radial(RadialProfile::Power(3.0))
    }

    pub fn radial<F: Fn(f64) -> f64 + Send + Sync + 'static>(label: &str, psi: F) -> Self {
        Nonlinearity::Radial(RadialProfile::Custom { label: label.into(), psi: Arc::new(psi) })
    }

    /// Monotone maps shipped with the crate; used by the invariant suites.
    pub fn builtin_monotone() -> Vec<Nonlinearity> {
        alloc::vec![
            Nonlinearity::Identity,
            Nonlinearity::tanh(),
            Nonlinearity::Radial(RadialProfile::Saturation(1.0)),
            Nonlinearity::Radial(RadialProfile::Power(1.0)),
            Nonlinearity::Radial(RadialProfile::Power(2.0)),
            Nonlinearity::Radial(RadialProfile::Power(3.0)),
        ]
    }

    /// Radial profile view; identity and linear gains are radial too.
    fn profile_value(&self, r: f64) -> Option<f64> {
        match self {
            Nonlinearity::Identity => Some(r),
            Nonlinearity::LinearGain(k) => Some(k * r),
            Nonlinearity::Radial(p) => Some(p.value(r)),
            Nonlinearity::Custom { .. } => None,
        }
    }

    /// `out = phi(u)`; `u` and `out` have the input dimension.
    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != out.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: out.len() });
        }
        match self {
            Nonlinearity::Identity => out.copy_from_slice(u),
            Nonlinearity::LinearGain(k) => {
                for (o, v) in out.iter_mut().zip(u) {
                    *o = k * v;
                }
            }
            Nonlinearity::Radial(p) => {
                let r = vecops::norm(u);
                if r == 0.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    return Ok(());
                }
                let psi = p.value(r);
                if !(psi >= 0.0 && psi.is_finite()) {
                    return Err(Error::InvalidProfileValue { radius: r, value: psi });
                }
                let s = psi / r;
                for (o, v) in out.iter_mut().zip(u) {
                    *o = s * v;
                }
            }
            Nonlinearity::Custom { map, .. } => map(u, out),
        }
        Ok(())
    }

    pub fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = alloc::vec![0.0; u.len()];
        self.eval_into(u, &mut out)?;
        Ok(out)
    }

    /// `<phi(u), u>`
    pub fn pairing(&self, u: &[f64]) -> Result<f64> {
        let mut out = [0.0; 2];
        let d = u.len();
        self.eval_into(u, &mut out[..d])?;
        Ok(vecops::dot(&out[..d], u))
    }

    /// Forward-difference Jacobian, row-major `d x d`.
    pub(crate) fn jacobian_fd(&self, u: &[f64], phi_u: &[f64]) -> Result<[f64; 4]> {
        let d = u.len();
        let mut jac = [0.0; 4];
        let mut up = [0.0; 2];
        let mut fp = [0.0; 2];
        for c in 0..d {
            up[..d].copy_from_slice(u);
            let h = f64::EPSILON.sqrt() * u[c].abs().max(1.0);
            up[c] += h;
            let h = up[c] - u[c];
            self.eval_into(&up[..d], &mut fp[..d])?;
            for r in 0..d {
                jac[r * d + c] = (fp[r] - phi_u[r]) / h;
            }
        }
        Ok(jac)
    }
}

/// Empirical sector constants on a log-spaced radial grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorReport {
    pub delta: f64,
    /// inf of `<phi(u), u> / |u|^2` over `0 < |u| <= delta`
    pub c_small: f64,
    /// inf of `<phi(u), u>` over `delta <= |u| <= r_max`
    pub c_large: f64,
    /// sup of `|phi(u)| / |u|` over `0 < |u| <= delta`
    pub lipschitz_delta: f64,
    pub pass: bool,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| if i + 1 == n { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() })
}

/// Points of the Halton sequence in `[0, 1)`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while i > 0 {
        x += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    inv = x;
    inv
}

const HALTON_BASES: [u64; 4] = [2, 3, 5, 7];

fn direction(i: usize, d: usize) -> [f64; 2] {
    match d {
        1 => [if i.is_multiple_of(2) { 1.0 } else { -1.0 }, 0.0],
        _ => {
            let t = 2.0 * core::f64::consts::PI * radical_inverse(i as u64 + 1, 2);
            [t.cos(), t.sin()]
        }
    }
}

/// Sector constants for `phi` on `U = R^input_dim`.
pub fn verify_sector(
    phi: &Nonlinearity,
    input_dim: usize,
    delta: f64,
    r_max: f64,
    samples: usize,
) -> Result<SectorReport> {
    if !(delta > 0.0 && r_max > delta) {
        return Err(Error::InvalidConfig("need 0 < delta < r_max".into()));
    }
    if samples < 1000 {
        return Err(Error::InvalidConfig(alloc::format!("samples = {samples} < 1000")));
    }
    if !(1..=2).contains(&input_dim) {
        return Err(Error::InvalidConfig("input dimension must be 1 or 2".into()));
    }
    let half = samples / 2;
    let mut c_small = f64::INFINITY;
    let mut lip = 0.0_f64;
    let mut c_large = f64::INFINITY;
    let directions = if phi.profile_value(1.0).is_some() { 1 } else { 16 };
    for k in 0..directions {
        let dir = direction(k, input_dim);
        let mut u = [0.0; 2];
        let mut out = [0.0; 2];
        let mut probe = |r: f64| -> Result<(f64, f64)> {
            if let Some(psi) = phi.profile_value(r) {
                if !(psi >= 0.0 && psi.is_finite()) {
                    return Err(Error::InvalidProfileValue { radius: r, value: psi });
                }
                return Ok((psi * r, psi));
            }
            for c in 0..input_dim {
                u[c] = r * dir[c];
            }
            phi.eval_into(&u[..input_dim], &mut out[..input_dim])?;
            Ok((vecops::dot(&out[..input_dim], &u[..input_dim]), vecops::norm(&out[..input_dim])))
        };
        for r in log_grid(1e-6 * delta, delta, half) {
            let (ip, size) = probe(r)?;
            c_small = c_small.min(ip / (r * r));
            lip = lip.max(size / r);
        }
        for r in log_grid(delta, r_max, samples - half) {
            let (ip, _) = probe(r)?;
            c_large = c_large.min(ip);
        }
    }
    Ok(SectorReport { delta, c_small, c_large, lipschitz_delta: lip, pass: c_small > 0.0 && c_large > 0.0 })
}

/// Smallest sampled value of `<phi(u1) - phi(u2), u1 - u2>`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub min_pairing: f64,
    pub worst_pair: (Vec<f64>, Vec<f64>),
    pub pairs: usize,
    /// Some pair is negative beyond rounding (`1e-12 (|phi(u1)| + |phi(u2)|) |du|`), which
    /// certifies non-monotonicity; otherwise the result is evidence only.
    pub violated: bool,
}

/// Sample `pairs` Halton pairs in the ball of radius 10.
pub fn verify_monotone(phi: &Nonlinearity, input_dim: usize, pairs: usize) -> Result<MonotoneReport> {
    verify_monotone_within(phi, input_dim, pairs, 10.0)
}

pub fn verify_monotone_within(
    phi: &Nonlinearity,
    input_dim: usize,
    pairs: usize,
    radius: f64,
) -> Result<MonotoneReport> {
    if pairs < 10_000 {
        return Err(Error::InvalidConfig(alloc::format!("pairs = {pairs} < 10000")));
    }
    if !(1..=2).contains(&input_dim) {
        return Err(Error::InvalidConfig("input dimension must be 1 or 2".into()));
    }
    let point = |i: u64, b0: u64, b1: u64| -> [f64; 2] {
        let h0 = radical_inverse(i, b0);
        let h1 = radical_inverse(i, b1);
        if input_dim == 1 {
            [radius * (2.0 * h0 - 1.0), 0.0]
        } else {
            let r = radius * h0.sqrt();
            let t = 2.0 * core::f64::consts::PI * h1;
            [r * t.cos(), r * t.sin()]
        }
    };
    let d = input_dim;
    let mut best = f64::INFINITY;
    let mut worst = ([0.0; 2], [0.0; 2]);
    let mut violated = false;
    let (mut f1, mut f2) = ([0.0; 2], [0.0; 2]);
    for i in 1..=pairs as u64 {
        let u1 = point(i, HALTON_BASES[0], HALTON_BASES[1]);
        let u2 = point(i, HALTON_BASES[2], HALTON_BASES[3]);
        phi.eval_into(&u1[..d], &mut f1[..d])?;
        phi.eval_into(&u2[..d], &mut f2[..d])?;
        let v: f64 = (0..d).map(|c| (f1[c] - f2[c]) * (u1[c] - u2[c])).sum();
        let scale = (vecops::norm(&f1[..d]) + vecops::norm(&f2[..d])) * vecops::dist(&u1[..d], &u2[..d]);
        violated |= v < -1e-12 * scale;
        if v < best {
            best = v;
            worst = (u1, u2);
        }
    }
    Ok(MonotoneReport {
        min_pairing: best,
        worst_pair: (worst.0[..d].to_vec(), worst.1[..d].to_vec()),
        pairs,
        violated,
    })
}

/// Power-law fit of the remainder `|phi(u) - kappa u| ≈ C |u|^gamma` near zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationFit {
    pub kappa: f64,
    /// `INFINITY` when the remainder vanishes to rounding (phi is linear).
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Largest deviation of `ln |remainder|` from the fitted line.
    pub residual: f64,
}

const LINEARIZATION_RESIDUAL_MAX: f64 = 0.25;

pub fn fit_linearization(phi: &Nonlinearity, epsilon: f64) -> Result<LinearizationFit> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }
    let psi = |r: f64| phi.profile_value(r).ok_or(Error::Unsupported("linearization needs a radial or linear map"));
    // slope at a radius far below the fit range, so kappa error stays out of the remainder
    let r0 = 1e-6 * epsilon;
    let kappa = psi(r0)? / r0;
    let radii: Vec<f64> = log_grid(epsilon / 100.0, epsilon, 64).collect();
    let mut rem = Vec::with_capacity(radii.len());
    for r in &radii {
        rem.push((psi(*r)? - kappa * r).abs());
    }
    let max_rem = rem.iter().fold(0.0_f64, |m, v| m.max(*v));
    if max_rem <= 64.0 * f64::EPSILON * epsilon * kappa.abs().max(1.0) {
        return Ok(LinearizationFit { kappa, gamma: f64::INFINITY, c: max_rem, epsilon, residual: 0.0 });
    }
    if rem.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NoPowerLaw(f64::INFINITY));
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = rem.iter().map(|v| v.ln()).collect();
    let line = fit_line(&lx, &ly)?;
    if line.max_residual > LINEARIZATION_RESIDUAL_MAX {
        return Err(Error::NoPowerLaw(line.max_residual));
    }
    Ok(LinearizationFit { kappa, gamma: line.slope, c: line.intercept.exp(), epsilon, residual: line.max_residual })
}
