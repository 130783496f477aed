//! Frequency-domain and observability quantities of damped skew systems.

mod observability;
mod resolvent;

pub use observability::{gramian, observability_constant, ObservabilityReport};
pub use resolvent::{resolvent_norm, ResolventMethod, ResolventValue};

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use crate::fit::fit_power_law;
use crate::model::DampedSystem;
use crate::{Error, Result};

/// Minimum number of grid points between consecutive eigenfrequencies.
pub const MIN_GRID_DENSITY: usize = 20;
const MIN_PEAKS: usize = 5;

/// Resolvent norms along `s` plus the fitted growth of their envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventCurve {
    pub s_values: Vec<f64>,
    pub norms: Vec<f64>,
    /// Refined local maxima `(s, norm)` inside the fit range.
    pub peaks: Vec<(f64, f64)>,
    /// Fitted `alpha` in `norm ~ s^alpha` over the peaks.
    pub envelope_slope: f64,
    pub slope_stderr: f64,
    pub kappa: f64,
    pub fit_range: (f64, f64),
    /// Evaluations answered by the dense fallback.
    pub fallbacks: usize,
}

/// Evaluation grid: `grid_density` points in every interval between
/// consecutive positive eigenfrequencies (and in the end pieces), never on an
/// eigenfrequency. The second value is the upper end of the fit range,
/// `min(s_max, s_N / 2)`.
pub fn resolvent_grid(system: &DampedSystem, s_min: f64, s_max: f64, grid_density: usize) -> Result<(Vec<f64>, f64)> {
    if grid_density < MIN_GRID_DENSITY {
        return Err(Error::InvalidConfig(alloc::format!("grid_density = {grid_density} < {MIN_GRID_DENSITY}")));
    }
    if !(s_min >= 0.0 && s_max > s_min) {
        return Err(Error::InvalidConfig(alloc::format!("need 0 <= s_min < s_max (got {s_min}, {s_max})")));
    }
    let eig = system.eigen_data().ok_or(Error::MissingEigenData)?;
    let freqs = eig.block_frequencies();
    let top = freqs.last().copied().unwrap_or(0.0);
    let mut breaks: Vec<f64> = Vec::with_capacity(freqs.len() + 2);
    breaks.push(s_min);
    breaks.extend(freqs.iter().copied().filter(|w| *w > s_min && *w < s_max));
    breaks.push(s_max);
    let mut grid = Vec::with_capacity(breaks.len() * grid_density);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for i in 0..grid_density {
            grid.push(a + (b - a) * (i as f64 + 0.5) / grid_density as f64);
        }
    }
    Ok((grid, s_max.min(0.5 * top)))
}

fn golden_max<F: FnMut(f64) -> Result<f64>>(mut lo: f64, mut hi: f64, f: &mut F) -> Result<(f64, f64)> {
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Refine the grid's local maxima in `[fit_lo, fit_hi]` with golden-section
/// search and fit `log norm` against `log s` over the refined peaks.
///
/// `eval` is only called for refinement, so callers may compute `norms` in
/// parallel and keep this step sequential and deterministic.
pub fn fit_envelope<F: FnMut(f64) -> Result<f64>>(
    s_values: &[f64],
    norms: &[f64],
    kappa: f64,
    fit_range: (f64, f64),
    mut eval: F,
) -> Result<ResolventCurve> {
    if s_values.len() != norms.len() {
        return Err(Error::DimensionMismatch { expected: s_values.len(), got: norms.len() });
    }
    let (fit_lo, fit_hi) = fit_range;
    let mut peaks = Vec::new();
    for i in 1..s_values.len().saturating_sub(1) {
        let s = s_values[i];
        if s < fit_lo || s > fit_hi || s <= 0.0 {
            continue;
        }
        if norms[i] >= norms[i - 1] && norms[i] > norms[i + 1] {
            peaks.push(golden_max(s_values[i - 1], s_values[i + 1], &mut eval)?);
        }
    }
    if peaks.len() < MIN_PEAKS {
        return Err(Error::FitInsufficient(alloc::format!(
            "{} envelope maxima in [{fit_lo}, {fit_hi}], need {MIN_PEAKS}",
            peaks.len()
        )));
    }
    let xs: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = peaks.iter().map(|p| p.1).collect();
    let line = fit_power_law(&xs, &ys)?;
    Ok(ResolventCurve {
        s_values: s_values.to_vec(),
        norms: norms.to_vec(),
        peaks,
        envelope_slope: line.slope,
        slope_stderr: line.slope_stderr,
        kappa,
        fit_range,
        fallbacks: 0,
    })
}

/// Sequential resolvent sweep and envelope fit (Woodbury route).
pub fn resolvent_growth_fit(
    system: &DampedSystem,
    kappa: f64,
    s_min: f64,
    s_max: f64,
    grid_density: usize,
) -> Result<ResolventCurve> {
    let (grid, fit_hi) = resolvent_grid(system, s_min, s_max, grid_density)?;
    let mut fallbacks = 0;
    let mut eval = |s: f64| {
        let v = resolvent_norm(system, kappa, s, ResolventMethod::Woodbury)?;
        fallbacks += v.fell_back as usize;
        Ok(v.norm)
    };
    let norms = grid.iter().map(|s| eval(*s)).collect::<Result<Vec<f64>>>()?;
    let mut curve = fit_envelope(&grid, &norms, kappa, (s_min, fit_hi), &mut eval)?;
    curve.fallbacks = fallbacks;
    Ok(curve)
}

/// Largest real part of the spectrum of `A - kappa B B*` (dense eigensolver).
pub fn spectral_abscissa(system: &DampedSystem, kappa: f64) -> Result<f64> {
    let a = system.generator_matrix() - system.input_map() * system.input_map().transpose() * kappa;
    let n = a.nrows();
    let schur = nalgebra::linalg::Schur::try_new(a, 1e-15, 100_000).ok_or(Error::EigenSolver("real Schur"))?;
    let t = schur.unpack().1;
    // eigenvalue real parts are the diagonal of the quasi-triangular factor
    let mut best = f64::NEG_INFINITY;
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            best = best.max(0.5 * (t[(i, i)] + t[(i + 1, i + 1)]));
            i += 2;
        } else {
            best = best.max(t[(i, i)]);
            i += 1;
        }
    }
    Ok(best)
}

/// Smallest distance between distinct eigenfrequencies `s_k`.
pub fn eigen_gap(system: &DampedSystem) -> Result<f64> {
    let eig = system.eigen_data().ok_or(Error::MissingEigenData)?;
    let mut s = eig.frequencies();
    s.sort_by(f64::total_cmp);
    let mut gap = f64::INFINITY;
    for w in s.windows(2) {
        let g = w[1] - w[0];
        if g <= 1e-10 * w[1].abs().max(1.0) {
            return Err(Error::GapViolated(w[0], w[1]));
        }
        gap = gap.min(g);
    }
    Ok(gap)
}

/// `min_k (1 + |s_k|^beta) |B* e_k|`.
pub fn wavepacket_margin(system: &DampedSystem, beta: f64) -> Result<f64> {
    let eig = system.eigen_data().ok_or(Error::MissingEigenData)?;
    Ok(eig
        .frequencies()
        .iter()
        .enumerate()
        .map(|(k, s)| (1.0 + s.abs().powf(beta)) * eig.input_value_norm(k))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests;
