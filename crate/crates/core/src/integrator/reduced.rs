//! Adaptive Dormand–Prince 5(4) for the collocated ODE `w' = -G phi(w)`, `d <= 2`.

use crate::nonlinearity::Nonlinearity;
use crate::{Error, Result};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

// the ODE is autonomous, so the stage nodes never enter
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth minus fourth order weights
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

// continuous extension: y(t + th h) = y + h sum_i k_i sum_j P[i][j] th^(j + 1)
const P: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

fn midpoint_weight(i: usize) -> f64 {
    P[i].iter().enumerate().map(|(j, p)| p * 0.5_f64.powi(j as i32 + 1)).sum()
}

type V2 = [f64; 2];

fn norm2(v: &V2, d: usize) -> f64 {
    v[..d].iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Result of advancing the reduced ODE over one macro substep.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ReducedStep {
    pub w: V2,
    /// Trapezoidal `2 int <phi(w), w>` on the accepted internal mesh, each
    /// accepted step split at its midpoint by the continuous extension.
    pub dissipation: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub substeps: usize,
}

pub(crate) struct Reduced<'a> {
    pub phi: &'a Nonlinearity,
    pub gram: [f64; 4],
    pub d: usize,
}

impl Reduced<'_> {
    fn rhs(&self, w: &V2, phi_out: &mut V2) -> Result<V2> {
        let d = self.d;
        self.phi.eval_into(&w[..d], &mut phi_out[..d])?;
        let mut f = [0.0; 2];
        for r in 0..d {
            f[r] = -(0..d).map(|c| self.gram[r * d + c] * phi_out[c]).sum::<f64>();
        }
        Ok(f)
    }

    fn pairing(&self, phi_w: &V2, w: &V2) -> f64 {
        (0..self.d).map(|c| phi_w[c] * w[c]).sum()
    }

    /// Stages 2..7 of one trial step; `k[0]` must hold `f(w)`. Returns the
    /// fifth-order point, with `phi` at that point in `phi_y`.
    fn stages(&self, w: &V2, h: f64, k: &mut [V2; 7], phi_y: &mut V2) -> Option<V2> {
        let d = self.d;
        let mut y = *w;
        for s in 0..6 {
            y = *w;
            for j in 0..=s {
                let a = A[s][j];
                if a != 0.0 {
                    for c in 0..d {
                        y[c] += h * a * k[j][c];
                    }
                }
            }
            if !y[..d].iter().all(|v| v.is_finite()) {
                return None;
            }
            // FSAL: the last stage point is the fifth-order solution
            k[s + 1] = self.rhs(&y, phi_y).ok()?;
        }
        Some(y)
    }

    /// Advance `w0` over `[0, h_total]`. The first trial step is the full interval.
    pub fn advance(&self, w0: V2, h_total: f64, tol: f64) -> Result<ReducedStep> {
        let d = self.d;
        if norm2(&w0, d) == 0.0 || h_total == 0.0 {
            return Ok(ReducedStep { w: w0, dissipation: 0.0, substeps: 0 });
        }
        let mut t = 0.0;
        let mut w = w0;
        let mut phi_w = [0.0; 2];
        let mut k1 = self.rhs(&w, &mut phi_w)?;
        let mut p_w = self.pairing(&phi_w, &w);
        let mut h = h_total;
        let mut diss = 0.0;
        let mut substeps = 0;
        let h_min = 1e-14 * h_total;
        while t < h_total {
            let last = h >= h_total - t;
            if last {
                h = h_total - t;
            }
            let mut k = [[0.0; 2]; 7];
            k[0] = k1;
            let mut phi_y = [0.0; 2];
            // a stage that leaves the domain of phi (overflow on a stiff trial step) is a rejection
            let trial = self.stages(&w, h, &mut k, &mut phi_y);
            let (y, err_n) = match trial {
                Some(y) => {
                    let mut err = [0.0; 2];
                    for (j, kj) in k.iter().enumerate() {
                        for c in 0..d {
                            err[c] += h * E[j] * kj[c];
                        }
                    }
                    (y, norm2(&err, d))
                }
                None => ([f64::NAN; 2], f64::INFINITY),
            };
            let scale = tol * norm2(&w, d).max(norm2(&y, d)) + f64::MIN_POSITIVE;
            let accepted = err_n <= scale;
            if accepted {
                let p_y = self.pairing(&phi_y, &y);
                let mut mid = w;
                for (i, ki) in k.iter().enumerate() {
                    let b = midpoint_weight(i);
                    for c in 0..d {
                        mid[c] += h * b * ki[c];
                    }
                }
                let mut phi_mid = [0.0; 2];
                self.phi.eval_into(&mid[..d], &mut phi_mid[..d])?;
                let p_mid = self.pairing(&phi_mid, &mid);
                // two trapezoid panels: 2 * (h / 4) (p_w + 2 p_mid + p_y)
                diss += 0.5 * h * (p_w + 2.0 * p_mid + p_y);
                t = if last { h_total } else { t + h };
                w = y;
                k1 = k[6];
                p_w = p_y;
                substeps += 1;
            }
            let factor = if err_n == 0.0 {
                5.0
            } else if err_n.is_finite() {
                (0.9 * (scale / err_n).powf(0.2)).clamp(0.2, 5.0)
            } else {
                0.2
            };
            h *= if accepted { factor } else { factor.min(1.0) };
            if t < h_total && h < h_min {
                return Err(Error::SubstepUnderflow { last_good_time: t });
            }
        }
        Ok(ReducedStep { w, dissipation: diss, substeps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuous_extension_midpoint_is_accurate() {
        // w' = -w: one step of size h, midpoint against exp(-h/2)
        let phi = Nonlinearity::Identity;
        let red = Reduced { phi: &phi, gram: [1.0, 0.0, 0.0, 0.0], d: 1 };
        for h in [0.1, 0.05] {
            let mut k = [[0.0; 2]; 7];
            k[0] = [-1.0, 0.0];
            let mut phi_y = [0.0; 2];
            let y = red.stages(&[1.0, 0.0], h, &mut k, &mut phi_y).unwrap();
            let mid: f64 = 1.0 + h * k.iter().enumerate().map(|(i, ki)| midpoint_weight(i) * ki[0]).sum::<f64>();
            assert!((mid - (-0.5 * h).exp()).abs() < 1e-8 * h.powi(5) / 1e-5);
            assert!((y[0] - (-h).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_dissipation_matches_closed_form() {
        let phi = Nonlinearity::Identity;
        let red = Reduced { phi: &phi, gram: [2.0, 0.0, 0.0, 0.0], d: 1 };
        // energy w^2 / g lost over [0, h]
        let h: f64 = 0.05;
        let exact = (1.0 - (-4.0 * h).exp()) / 2.0;
        let step = red.advance([1.0, 0.0], h, 1e-10).unwrap();
        assert!(step.substeps >= 1);
        assert!((step.w[0] - (-2.0 * h).exp()).abs() < 1e-10);
        assert!((step.dissipation - exact).abs() < 1e-3 * exact);
    }
}
