//! Time stepping for `x' = A x - B phi(B* x)`.
//!
//! Both schemes run in the modal frame, where the conservative flow is a set of
//! exact 2x2 rotations. Strang splitting sandwiches the damping flow between two
//! half rotations; the damping flow only moves the state inside `range(B)` and
//! reduces to the `d`-dimensional ODE `w' = -(B*B) phi(w)` for `w = B* y`.
//! Implicit midpoint is kept as an independent reference.

mod reduced;

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{graph_seminorm, DampedSystem, Generator};
use crate::nonlinearity::Nonlinearity;
use crate::vecops;
use crate::{Error, Result};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;
use reduced::Reduced;

/// Tolerated per-step norm growth relative to `|x0|` before a run is rejected.
pub const NORM_INCREASE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Strang,
    ImplicitMidpoint,
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strang" => Ok(Method::Strang),
            "implicit_midpoint" | "implicit-midpoint" | "midpoint" => Ok(Method::ImplicitMidpoint),
            other => Err(Error::InvalidConfig(alloc::format!("unknown method `{other}`"))),
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Method::Strang => "strang",
            Method::ImplicitMidpoint => "implicit_midpoint",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub t_end: f64,
    /// Macro step.
    pub dt: f64,
    /// Record every `sample_stride` macro steps; the final step is always recorded.
    pub sample_stride: usize,
    /// Relative tolerance of the damping-substep and Newton solvers.
    pub substep_tol: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { t_end: 2000.0, dt: 1e-2, sample_stride: 100, substep_tol: 1e-8 }
    }
}

impl Schedule {
    pub fn new(t_end: f64, dt: f64, sample_stride: usize) -> Self {
        Schedule { t_end, dt, sample_stride, ..Schedule::default() }
    }

    /// Number of macro steps; `t_end` must be an integer multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "schedule needs 0 < dt <= t_end (dt = {}, t_end = {})",
                self.dt,
                self.t_end
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidConfig("sample_stride must be positive".into()));
        }
        if !(self.substep_tol > 0.0 && self.substep_tol < 1e-2) {
            return Err(Error::InvalidConfig(alloc::format!("substep_tol = {} out of range", self.substep_tol)));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::InvalidConfig(alloc::format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end,
                self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Sample stride giving about `samples` records.
    pub fn with_samples(mut self, samples: usize) -> Self {
        let n = (self.t_end / self.dt).round().max(1.0) as usize;
        self.sample_stride = (n / samples.max(1)).max(1);
        self
    }
}

/// Sampled output of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// `B* x(t)`, `input_dim` entries per sample.
    pub w_samples: Vec<f64>,
    pub input_dim: usize,
    /// Running `2 int_0^t <phi(w), w> ds`.
    pub dissipation: Vec<f64>,
    /// Increment quotients `|S(x) - x| / dt` of the one-step map `S`.
    pub xdot_norms: Vec<f64>,
    pub initial_graph_seminorm: f64,
    pub final_state: Vec<f64>,
    pub method: Method,
    pub dt: f64,
    /// Largest single-step norm increase observed (rounding level when healthy).
    pub max_norm_increase: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn w(&self, k: usize) -> &[f64] {
        &self.w_samples[k * self.input_dim..(k + 1) * self.input_dim]
    }
}

fn rotate(z: &mut [f64], cs: &[(f64, f64)]) {
    for (j, (c, s)) in cs.iter().enumerate() {
        let (p, q) = (z[2 * j], z[2 * j + 1]);
        z[2 * j] = c * p + s * q;
        z[2 * j + 1] = -s * p + c * q;
    }
}

fn block_frequencies(system: &DampedSystem) -> Result<&[f64]> {
    match system.generator() {
        Generator::Modal { frequencies } => Ok(frequencies),
        Generator::Dense(_) => Ok(system.eigen_data().ok_or(Error::MissingEigenData)?.block_frequencies()),
    }
}

/// Exact conservative flow `e^{A dt} x`.
pub fn linear_flow(system: &DampedSystem, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut z = system.to_modal(x)?;
    let cs: Vec<(f64, f64)> = block_frequencies(system)?.iter().map(|w| ((w * dt).cos(), (w * dt).sin())).collect();
    rotate(&mut z, &cs);
    system.from_modal(&z)
}

/// Output of [`damping_substep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubstepOutput {
    pub state: Vec<f64>,
    pub dissipation: f64,
}

/// Flow of `y' = -B phi(B* y)` over `dt`, through the reduced ODE for `w = B* y`.
pub fn damping_substep(
    system: &DampedSystem,
    phi: &Nonlinearity,
    x: &[f64],
    dt: f64,
    tol: f64,
) -> Result<SubstepOutput> {
    let w0v = system.observe(x)?;
    let d = system.input_dim();
    let g = system.input_gram();
    if g.iter().all(|v| *v == 0.0) {
        return Ok(SubstepOutput { state: x.to_vec(), dissipation: 0.0 });
    }
    let mut gram = [0.0; 4];
    for r in 0..d {
        for c in 0..d {
            gram[r * d + c] = g[(r, c)];
        }
    }
    let mut w0 = [0.0; 2];
    w0[..d].copy_from_slice(&w0v);
    let step = Reduced { phi, gram, d }.advance(w0, dt, tol)?;
    let g_inv = g.try_inverse().ok_or_else(|| Error::InvalidConfig("singular input Gram matrix".into()))?;
    let mut coeff = [0.0; 2];
    for r in 0..d {
        coeff[r] = (0..d).map(|c| g_inv[(r, c)] * (step.w[c] - w0[c])).sum();
    }
    let mut state = x.to_vec();
    system.add_input(&coeff[..d], 1.0, &mut state)?;
    Ok(SubstepOutput { state, dissipation: step.dissipation })
}

struct MidpointData {
    /// Per block `(1 / (1 + a^2), a)` with `a = dt w / 2`: the inverse of `I - dt A / 2`.
    blocks: Vec<(f64, f64)>,
    /// `M^-1 B` in the modal frame, row-major `dim x d`.
    minv_input: Vec<f64>,
    /// `B* M^-1 B`, row-major `d x d`.
    hm: [f64; 4],
}

/// One-step map in the modal frame.
pub struct Stepper<'a> {
    system: &'a DampedSystem,
    phi: &'a Nonlinearity,
    method: Method,
    dt: f64,
    tol: f64,
    d: usize,
    z: Vec<f64>,
    half_rotation: Vec<(f64, f64)>,
    /// `V^T B`, row-major.
    input: Vec<f64>,
    /// `V^T B (B* B)^-1`, row-major.
    lift: Vec<f64>,
    gram: [f64; 4],
    damped: bool,
    midpoint: Option<MidpointData>,
    steps_taken: usize,
}

fn apply_block_inverse(blocks: &[(f64, f64)], x: &[f64], out: &mut [f64]) {
    for (j, (s, a)) in blocks.iter().enumerate() {
        let (p, q) = (x[2 * j], x[2 * j + 1]);
        out[2 * j] = s * (p + a * q);
        out[2 * j + 1] = s * (q - a * p);
    }
}

fn solve2(m: &[f64; 4], rhs: &[f64; 2], d: usize) -> Option<[f64; 2]> {
    if d == 1 {
        return (m[0] != 0.0).then(|| [rhs[0] / m[0], 0.0]);
    }
    let det = m[0] * m[3] - m[1] * m[2];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([(m[3] * rhs[0] - m[1] * rhs[1]) / det, (m[0] * rhs[1] - m[2] * rhs[0]) / det])
}

impl<'a> Stepper<'a> {
    pub fn new(
        system: &'a DampedSystem,
        phi: &'a Nonlinearity,
        x0: &[f64],
        dt: f64,
        method: Method,
        tol: f64,
    ) -> Result<Self> {
        let frame = system.frame().ok_or(Error::MissingEigenData)?;
        let freqs = block_frequencies(system)?;
        let d = system.input_dim();
        let dim = system.dim();
        let z = system.to_modal(x0)?;
        let half_rotation = freqs.iter().map(|w| ((0.5 * w * dt).cos(), (0.5 * w * dt).sin())).collect();
        let mut lift = vec![0.0; dim * d];
        for r in 0..dim {
            for c in 0..d {
                lift[r * d + c] = (0..d).map(|k| frame.input[r * d + k] * frame.gram_inv[k * d + c]).sum();
            }
        }
        let midpoint = (method == Method::ImplicitMidpoint).then(|| {
            let blocks: Vec<(f64, f64)> = freqs
                .iter()
                .map(|w| {
                    let a = 0.5 * dt * w;
                    (1.0 / (1.0 + a * a), a)
                })
                .collect();
            let mut minv_input = vec![0.0; dim * d];
            let mut col = vec![0.0; dim];
            let mut out = vec![0.0; dim];
            for c in 0..d {
                for r in 0..dim {
                    col[r] = frame.input[r * d + c];
                }
                apply_block_inverse(&blocks, &col, &mut out);
                for r in 0..dim {
                    minv_input[r * d + c] = out[r];
                }
            }
            let mut hm = [0.0; 4];
            for r in 0..d {
                for c in 0..d {
                    hm[r * d + c] = (0..dim).map(|k| frame.input[k * d + r] * minv_input[k * d + c]).sum();
                }
            }
            MidpointData { blocks, minv_input, hm }
        });
        Ok(Stepper {
            system,
            phi,
            method,
            dt,
            tol,
            d,
            z,
            half_rotation,
            input: frame.input.clone(),
            lift,
            gram: frame.gram,
            damped: frame.damped,
            midpoint,
            steps_taken: 0,
        })
    }

    /// Current state in modal coordinates (same norm as the physical state).
    pub fn modal_state(&self) -> &[f64] {
        &self.z
    }

    pub fn state(&self) -> Result<Vec<f64>> {
        self.system.from_modal(&self.z)
    }

    pub fn norm(&self) -> f64 {
        vecops::norm(&self.z)
    }

    /// `w = B* x`.
    pub fn observe(&self) -> [f64; 2] {
        let mut w = [0.0; 2];
        if !self.damped {
            return w;
        }
        for (r, zr) in self.z.iter().enumerate() {
            for c in 0..self.d {
                w[c] += self.input[r * self.d + c] * zr;
            }
        }
        w
    }

    /// Advance one macro step; returns the dissipation increment.
    pub fn step(&mut self) -> Result<f64> {
        let diss = match self.method {
            Method::Strang => self.strang_step()?,
            Method::ImplicitMidpoint => self.midpoint_step()?,
        };
        self.steps_taken += 1;
        Ok(diss)
    }

    fn strang_step(&mut self) -> Result<f64> {
        rotate(&mut self.z, &self.half_rotation);
        let mut diss = 0.0;
        if self.damped {
            let w0 = self.observe();
            let step =
                Reduced { phi: self.phi, gram: self.gram, d: self.d }.advance(w0, self.dt, self.tol).map_err(|e| {
                    match e {
                        Error::SubstepUnderflow { last_good_time } => Error::SubstepUnderflow {
                            last_good_time: self.steps_taken as f64 * self.dt + 0.5 * self.dt + last_good_time,
                        },
                        other => other,
                    }
                })?;
            let dw = [step.w[0] - w0[0], step.w[1] - w0[1]];
            for (r, zr) in self.z.iter_mut().enumerate() {
                for c in 0..self.d {
                    *zr += self.lift[r * self.d + c] * dw[c];
                }
            }
            diss = step.dissipation;
        }
        rotate(&mut self.z, &self.half_rotation);
        Ok(diss)
    }

    fn midpoint_step(&mut self) -> Result<f64> {
        let md = self.midpoint.as_ref().expect("midpoint data built for implicit method");
        let d = self.d;
        let h = self.dt;
        let mut y = vec![0.0; self.z.len()];
        apply_block_inverse(&md.blocks, &self.z, &mut y);
        if !self.damped {
            for (zi, yi) in self.z.iter_mut().zip(&y) {
                *zi = 2.0 * yi - *zi;
            }
            return Ok(0.0);
        }
        // r = B* M^-1 z; solve g(w) = w - r + (h/2) Hm phi(w) = 0
        let mut r = [0.0; 2];
        for (k, yk) in y.iter().enumerate() {
            for c in 0..d {
                r[c] += self.input[k * d + c] * yk;
            }
        }
        let residual = |w: &[f64; 2], phi_w: &mut [f64; 2]| -> Result<[f64; 2]> {
            self.phi.eval_into(&w[..d], &mut phi_w[..d])?;
            let mut g = [0.0; 2];
            for i in 0..d {
                g[i] = w[i] - r[i] + 0.5 * h * (0..d).map(|c| md.hm[i * d + c] * phi_w[c]).sum::<f64>();
            }
            Ok(g)
        };
        let gnorm = |g: &[f64; 2]| g[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut w = r;
        let mut phi_w = [0.0; 2];
        let mut g = residual(&w, &mut phi_w)?;
        let scale = gnorm(&r).max(f64::MIN_POSITIVE);
        let target = self.tol.min(1e-12) * scale;
        for _ in 0..100 {
            let g0 = gnorm(&g);
            if g0 <= target {
                break;
            }
            let jphi = self.phi.jacobian_fd(&w[..d], &phi_w[..d])?;
            let mut jac = [0.0; 4];
            for i in 0..d {
                for j in 0..d {
                    let hj: f64 = (0..d).map(|c| md.hm[i * d + c] * jphi[c * d + j]).sum();
                    jac[i * d + j] = if i == j { 1.0 } else { 0.0 } + 0.5 * h * hj;
                }
            }
            let Some(delta) = solve2(&jac, &[-g[0], -g[1]], d) else { break };
            let mut lambda = 1.0;
            let mut improved = false;
            while lambda >= 1e-6 {
                let trial = [w[0] + lambda * delta[0], w[1] + lambda * delta[1]];
                let mut phi_t = [0.0; 2];
                let gt = residual(&trial, &mut phi_t)?;
                if gnorm(&gt) <= (1.0 - 1e-4 * lambda) * g0 {
                    (w, phi_w, g) = (trial, phi_t, gt);
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        // a stalled iteration at rounding level is as good as it gets
        let floor = 64.0 * f64::EPSILON * (scale + gnorm(&w));
        let converged = gnorm(&g) <= target.max(floor);
        if !converged {
            return Err(Error::NewtonFailure { step: self.steps_taken });
        }
        for (k, yk) in y.iter_mut().enumerate() {
            for c in 0..d {
                *yk -= 0.5 * h * md.minv_input[k * d + c] * phi_w[c];
            }
        }
        for (zi, yi) in self.z.iter_mut().zip(&y) {
            *zi = 2.0 * yi - *zi;
        }
        Ok(2.0 * h * (0..d).map(|c| phi_w[c] * w[c]).sum::<f64>())
    }
}

/// Run `x0` through `schedule` and sample.
pub fn integrate(
    system: &DampedSystem,
    phi: &Nonlinearity,
    x0: &[f64],
    schedule: &Schedule,
    method: Method,
) -> Result<Trajectory> {
    let n = schedule.steps()?;
    let mut stepper = Stepper::new(system, phi, x0, schedule.dt, method, schedule.substep_tol)?;
    let d = system.input_dim();
    let x0_norm = stepper.norm();
    let cap = n / schedule.sample_stride + 2;
    let mut traj = Trajectory {
        times: Vec::with_capacity(cap),
        norms: Vec::with_capacity(cap),
        w_samples: Vec::with_capacity(cap * d),
        input_dim: d,
        dissipation: Vec::with_capacity(cap),
        xdot_norms: Vec::with_capacity(cap),
        initial_graph_seminorm: graph_seminorm(system, x0)?,
        final_state: Vec::new(),
        method,
        dt: schedule.dt,
        max_norm_increase: 0.0,
    };
    let mut diss = 0.0;
    let mut norm = x0_norm;
    let mut pending: Option<Vec<f64>> = None;
    for k in 0..=n {
        let sample = k % schedule.sample_stride == 0 || k == n;
        if sample {
            traj.times.push(k as f64 * schedule.dt);
            traj.norms.push(norm);
            traj.w_samples.extend_from_slice(&stepper.observe()[..d]);
            traj.dissipation.push(diss);
            pending = Some(stepper.modal_state().to_vec());
        }
        if k == n {
            traj.final_state = stepper.state()?;
        }
        let inc = stepper.step()?;
        let new_norm = stepper.norm();
        if let Some(prev) = pending.take() {
            traj.xdot_norms.push(vecops::dist(stepper.modal_state(), &prev) / schedule.dt);
        }
        if k == n {
            break;
        }
        diss += inc;
        let increase = new_norm - norm;
        traj.max_norm_increase = traj.max_norm_increase.max(increase);
        if increase > NORM_INCREASE_TOL * x0_norm {
            return Err(Error::NormIncrease { step: k, increase });
        }
        norm = new_norm;
    }
    Ok(traj)
}

/// `|x(t)|^2 + dissipation(t) - |x(0)|^2` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBalance {
    pub series: Vec<f64>,
    pub max_abs: f64,
}

pub fn energy_balance_residual(trajectory: &Trajectory) -> EnergyBalance {
    let e0 = trajectory.norms.first().map_or(0.0, |n| n * n);
    let series: Vec<f64> = trajectory.norms.iter().zip(&trajectory.dissipation).map(|(n, q)| n * n + q - e0).collect();
    let max_abs = series.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    EnergyBalance { series, max_abs }
}

#[cfg(test)]
mod tests;
