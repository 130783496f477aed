//! Decay exponents and trajectory invariants.
//!
//! Fits work on log-log axes after resampling the window log-uniformly, so
//! late times are not over-weighted by uniform sampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::fit::fit_line;
use crate::integrator::{Method, Schedule, Stepper, Trajectory};
use crate::model::DampedSystem;
use crate::nonlinearity::Nonlinearity;
use crate::{vecops, Error, Result};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

/// Raw samples a window must contain.
pub const MIN_FIT_SAMPLES: usize = 30;
/// Log-uniform resampling size.
pub const RESAMPLE_POINTS: usize = 64;
/// Norms at or below this are treated as underflowed.
pub const NORM_FLOOR: f64 = 1e-250;

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// `theta` in `|x(t)| ~ C t^-theta`.
    pub theta_hat: f64,
    pub stderr: f64,
    /// Window actually used, snapped to sample times.
    pub window: (f64, f64),
    pub samples: usize,
    pub predicted: Option<f64>,
    /// `sup t^predicted |x(t)|` over the window.
    pub sup_scaled: Option<f64>,
    /// Mean of `t^predicted |x(t)|` over the window's last decade.
    pub tail_scaled: Option<f64>,
    /// The window was cut short where the norm reached [`NORM_FLOOR`].
    pub underflow_truncated: bool,
    /// The window ends past [`truncation_horizon`]; set by the caller.
    pub past_horizon: bool,
}

impl DecayReport {
    /// Attach a predicted exponent and the scaled-norm sharpness numbers.
    pub fn with_prediction(mut self, times: &[f64], norms: &[f64], predicted: f64) -> Result<Self> {
        let (sup, tail) = sharpness_series(times, norms, self.window, predicted)?;
        self.predicted = Some(predicted);
        self.sup_scaled = Some(sup);
        self.tail_scaled = Some(tail);
        Ok(self)
    }
}

fn default_window(times: &[f64]) -> (f64, f64) {
    let t_end = times.last().copied().unwrap_or(0.0);
    (0.05 * t_end, t_end)
}

/// Indices `[lo, hi)` of samples inside `window`, after validating it.
fn window_range(times: &[f64], window: (f64, f64)) -> Result<(usize, usize)> {
    let (t_lo, t_hi) = window;
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(Error::InvalidConfig(alloc::format!("decay window ({t_lo}, {t_hi}) needs 0 < t_lo < t_hi")));
    }
    let (first, last) = match (times.first(), times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::FitInsufficient("empty trajectory".into())),
    };
    let slack = 1e-9 * last.abs();
    if t_lo < first - slack || t_hi > last + slack {
        return Err(Error::InvalidConfig(alloc::format!(
            "decay window ({t_lo}, {t_hi}) outside sampled range ({first}, {last})"
        )));
    }
    let lo = times.partition_point(|t| *t < t_lo - slack);
    let hi = times.partition_point(|t| *t <= t_hi + slack);
    Ok((lo, hi))
}

/// Least-squares `theta` of `log |x|` against `log t` on `window`
/// (default `(0.05 t_end, t_end)`).
pub fn fit_decay_series(times: &[f64], norms: &[f64], window: Option<(f64, f64)>) -> Result<DecayReport> {
    if times.len() != norms.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: norms.len() });
    }
    let (lo, mut hi) = window_range(times, window.unwrap_or_else(|| default_window(times)))?;
    let mut underflow_truncated = false;
    if let Some(k) = norms[lo..hi].iter().position(|n| !(*n > NORM_FLOOR)) {
        hi = lo + k;
        underflow_truncated = true;
    }
    let count = hi.saturating_sub(lo);
    if count < MIN_FIT_SAMPLES {
        return Err(Error::FitInsufficient(alloc::format!("{count} samples in decay window, need {MIN_FIT_SAMPLES}")));
    }
    let t = &times[lo..hi];
    // logs relative to the first norm, so power-of-two rescaling is exact
    let reference = norms[lo];
    let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ln: Vec<f64> = norms[lo..hi].iter().map(|v| (v / reference).ln()).collect();
    let (a, b) = (lt[0], lt[count - 1]);
    let mut xs = Vec::with_capacity(RESAMPLE_POINTS);
    let mut ys = Vec::with_capacity(RESAMPLE_POINTS);
    for j in 0..RESAMPLE_POINTS {
        let x = if j + 1 == RESAMPLE_POINTS { b } else { a + (b - a) * j as f64 / (RESAMPLE_POINTS - 1) as f64 };
        let i = lt.partition_point(|v| *v <= x).clamp(1, count - 1);
        let (x0, x1) = (lt[i - 1], lt[i]);
        let f = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        xs.push(x);
        ys.push(ln[i - 1] + f * (ln[i] - ln[i - 1]));
    }
    let line = fit_line(&xs, &ys)?;
    Ok(DecayReport {
        theta_hat: -line.slope,
        stderr: line.slope_stderr,
        window: (t[0], t[count - 1]),
        samples: count,
        predicted: None,
        sup_scaled: None,
        tail_scaled: None,
        underflow_truncated,
        past_horizon: false,
    })
}

pub fn fit_decay_exponent(trajectory: &Trajectory, window: Option<(f64, f64)>) -> Result<DecayReport> {
    fit_decay_series(&trajectory.times, &trajectory.norms, window)
}

/// `(sup, tail mean)` of `t^predicted |x(t)|`: the supremum over `window`
/// and the mean over its last decade `[t_hi / 10, t_hi]`.
pub fn sharpness_series(times: &[f64], norms: &[f64], window: (f64, f64), predicted: f64) -> Result<(f64, f64)> {
    if times.len() != norms.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: norms.len() });
    }
    let (lo, hi) = window_range(times, window)?;
    if hi <= lo {
        return Err(Error::FitInsufficient("no samples in window".into()));
    }
    let scaled = |i: usize| times[i].powf(predicted) * norms[i];
    let sup = (lo..hi).map(scaled).fold(0.0, f64::max);
    let decade = 0.1 * window.1;
    let tail: Vec<f64> = (lo..hi).filter(|i| times[*i] >= decade).map(scaled).collect();
    let tail_mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    Ok((sup, tail_mean))
}

pub fn sharpness_check(trajectory: &Trajectory, window: (f64, f64), predicted: f64) -> Result<(f64, f64)> {
    sharpness_series(&trajectory.times, &trajectory.norms, window, predicted)
}

/// Time after which `|B* x|` stays below `delta`; `None` if it never settles.
pub fn entry_time(trajectory: &Trajectory, delta: f64) -> Option<f64> {
    let n = trajectory.len();
    match (0..n).rev().find(|k| vecops::norm(trajectory.w(*k)) >= delta) {
        None => trajectory.times.first().copied(),
        Some(k) if k + 1 < n => Some(trajectory.times[k + 1]),
        Some(_) => None,
    }
}

/// `1 / (kappa min_k |B* e_k|^2)`: past this time the slowest damped mode of
/// the truncation has had its exponential decay kick in, and power-law fits
/// stop describing the untruncated system.
pub fn truncation_horizon(system: &DampedSystem, kappa: f64) -> Result<f64> {
    let eig = system.eigen_data().ok_or(Error::MissingEigenData)?;
    let weakest = (0..eig.len()).map(|k| eig.input_value_norm(k).powi(2)).fold(f64::INFINITY, f64::min);
    let rate = kappa * weakest;
    Ok(if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub initial_distance: f64,
    /// Largest sample-to-sample increase of `|x_b - x_a|`; 0 when monotone.
    pub max_increase: f64,
    pub final_distance: f64,
}

/// Run two initial states through identical schedules and track their distance.
pub fn contraction_check(
    system: &DampedSystem,
    phi: &Nonlinearity,
    x0_a: &[f64],
    x0_b: &[f64],
    schedule: &Schedule,
    method: Method,
) -> Result<ContractionReport> {
    let n = schedule.steps()?;
    let mut a = Stepper::new(system, phi, x0_a, schedule.dt, method, schedule.substep_tol)?;
    let mut b = Stepper::new(system, phi, x0_b, schedule.dt, method, schedule.substep_tol)?;
    let initial_distance = vecops::dist(a.modal_state(), b.modal_state());
    let mut last = initial_distance;
    let mut max_increase = 0.0_f64;
    for k in 1..=n {
        a.step()?;
        b.step()?;
        if k % schedule.sample_stride == 0 || k == n {
            let d = vecops::dist(a.modal_state(), b.modal_state());
            max_increase = max_increase.max(d - last);
            last = d;
        }
    }
    Ok(ContractionReport { initial_distance, max_increase, final_distance: last })
}

/// Largest sample-to-sample increase of the derivative norms; 0 when monotone.
pub fn derivative_monotonicity_check(trajectory: &Trajectory) -> f64 {
    trajectory.xdot_norms.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max)
}

/// `sup_t (1 + t)^{1/(2 beta)} |x(t)| / |x(0)|_graph` for one run.
pub fn profile_ratio(trajectory: &Trajectory, beta: f64) -> Result<f64> {
    let g = trajectory.initial_graph_seminorm;
    if !(g > 0.0) {
        return Err(Error::InvalidConfig("initial state has zero graph seminorm".into()));
    }
    let p = 0.5 / beta;
    Ok(trajectory.times.iter().zip(&trajectory.norms).map(|(t, n)| (1.0 + t).powf(p) * n).fold(0.0, f64::max) / g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformProfile {
    pub ratios: Vec<f64>,
    pub max: f64,
    pub min: f64,
}

impl UniformProfile {
    pub fn from_ratios(ratios: Vec<f64>) -> Self {
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        UniformProfile { ratios, max, min }
    }
}

/// Batch version of [`profile_ratio`]; sequential, the CLI runs members in parallel.
pub fn uniform_decay_profile(
    system: &DampedSystem,
    phi: &Nonlinearity,
    batch: &[Vec<f64>],
    schedule: &Schedule,
    beta: f64,
    method: Method,
) -> Result<UniformProfile> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty initial-state batch".into()));
    }
    let mut ratios = vec![0.0; batch.len()];
    for (r, x0) in ratios.iter_mut().zip(batch) {
        *r = profile_ratio(&crate::integrator::integrate(system, phi, x0, schedule, method)?, beta)?;
    }
    Ok(UniformProfile::from_ratios(ratios))
}
