use super::{Profile, ScoleConfig};
use crate::{Error, Result};

/// Multiplier `zeta` and constants `a`, `b` for the beam decay inequalities.
#[derive(Debug, Clone)]
pub struct MultiplierConfig {
    pub zeta: Profile,
    pub a: f64,
    pub b: f64,
    pub grid_points: usize,
}

/// Pointwise maxima of the two multiplier expressions; each must stay negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierReport {
    /// `max_x 2(1 - a) rho - (rho zeta)' + b`
    pub mass_slack: f64,
    pub mass_argmax: f64,
    /// `max_x EI (1 - a - 2 zeta') + (EI zeta)' / 2 + b`
    pub stiffness_slack: f64,
    pub stiffness_argmax: f64,
    pub pass: bool,
}

fn derivative(f: &Profile, x: f64, h: f64, i: usize, last: usize) -> f64 {
    // second-order one-sided stencils at the ends keep evaluation inside [0, 1]
    if i == 0 {
        (-3.0 * f.eval(x) + 4.0 * f.eval(x + h) - f.eval(x + 2.0 * h)) / (2.0 * h)
    } else if i == last {
        (3.0 * f.eval(x) - 4.0 * f.eval(x - h) + f.eval(x - 2.0 * h)) / (2.0 * h)
    } else {
        (f.eval(x + h) - f.eval(x - h)) / (2.0 * h)
    }
}

pub fn check_multiplier_condition(scole: &ScoleConfig, mult: &MultiplierConfig) -> Result<MultiplierReport> {
    let z0 = mult.zeta.eval(0.0);
    if z0.abs() > 1e-12 {
        return Err(Error::InvalidConfig(alloc::format!("zeta(0) = {z0}, must vanish")));
    }
    if mult.grid_points < 101 {
        return Err(Error::InvalidConfig(alloc::format!("grid_points = {} < 101", mult.grid_points)));
    }
    if !(mult.a > 0.0 && mult.b > 0.0) {
        return Err(Error::InvalidConfig("a and b must be positive".into()));
    }
    let last = mult.grid_points - 1;
    let h = 1.0 / last as f64;
    let rho = &scole.rho;
    let ei = &scole.ei;
    let zeta = &mult.zeta;
    let rho_zeta = Profile::custom({
        let (r, z) = (rho.clone(), zeta.clone());
        move |x| r.eval(x) * z.eval(x)
    });
    let ei_zeta = Profile::custom({
        let (e, z) = (ei.clone(), zeta.clone());
        move |x| e.eval(x) * z.eval(x)
    });
    let mut report = MultiplierReport {
        mass_slack: f64::NEG_INFINITY,
        mass_argmax: 0.0,
        stiffness_slack: f64::NEG_INFINITY,
        stiffness_argmax: 0.0,
        pass: false,
    };
    for i in 0..=last {
        let x = i as f64 * h;
        let e1 = 2.0 * (1.0 - mult.a) * rho.eval(x) - derivative(&rho_zeta, x, h, i, last) + mult.b;
        let e2 = ei.eval(x) * (1.0 - mult.a - 2.0 * derivative(zeta, x, h, i, last))
            + 0.5 * derivative(&ei_zeta, x, h, i, last)
            + mult.b;
        if e1 > report.mass_slack || e1.is_nan() {
            report.mass_slack = e1;
            report.mass_argmax = x;
        }
        if e2 > report.stiffness_slack || e2.is_nan() {
            report.stiffness_slack = e2;
            report.stiffness_argmax = x;
        }
    }
    report.pass = report.mass_slack < 0.0 && report.stiffness_slack < 0.0;
    Ok(report)
}
