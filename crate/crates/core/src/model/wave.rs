use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use nalgebra::DMatrix;

use super::{DampedSystem, Profile};
use crate::quadrature;
use crate::{Error, Result};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

/// Weakly damped string `u_tt = u_xx - b(x) phi(<b, u_t>)` truncated to `modes` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveModelConfig {
    /// Decay exponent of the generated sine coefficients `b_n = n^-beta`.
    pub beta: f64,
    /// Explicit sine coefficients; overrides `beta` when present.
    pub coeffs: Option<Vec<f64>>,
    pub modes: usize,
}

impl WaveModelConfig {
    pub fn power_law(beta: f64, modes: usize) -> Self {
        WaveModelConfig { beta, coeffs: None, modes }
    }

    /// The coefficients `b_1 .. b_modes` this configuration describes.
    pub fn damping_coefficients(&self) -> Result<Vec<f64>> {
        if self.modes == 0 {
            return Err(Error::InvalidConfig("modes must be positive".into()));
        }
        let coeffs: Vec<f64> = match &self.coeffs {
            Some(c) => {
                if c.len() < self.modes {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "{} coefficients given for {} modes",
                        c.len(),
                        self.modes
                    )));
                }
                c[..self.modes].to_vec()
            }
            None => {
                // square-summable only for beta > 1/2
                if !(self.beta > 0.5) {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "beta = {} must exceed 1/2 for b_n = n^-beta",
                        self.beta
                    )));
                }
                (1..=self.modes).map(|n| (n as f64).powf(-self.beta)).collect()
            }
        };
        if coeffs.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidConfig("non-finite damping coefficient".into()));
        }
        Ok(coeffs)
    }
}

/// `b_n = ∫_0^1 b(x) sin(n π x) dx` for `n = 1..=count`.
pub fn sine_coefficients(profile: &Profile, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidConfig("count must be positive".into()));
    }
    (1..=count)
        .map(|n| {
            let k = n as f64 * PI;
            quadrature::integrate(|x| profile.eval(x) * (k * x).sin(), 0.0, 1.0, 1e-13).map(|q| q.value)
        })
        .collect()
}

/// Modal realization in coordinates `z_n = (w_n a_n, a_n')` for the orthonormal
/// basis `sqrt(2) sin(n π x)`, so `w_n = n π` and `B` has `sqrt(2) b_n` on the
/// velocity slots.
pub fn build_wave_modal(config: &WaveModelConfig) -> Result<DampedSystem> {
    let coeffs = config.damping_coefficients()?;
    let n = coeffs.len();
    let freqs: Vec<f64> = (1..=n).map(|k| k as f64 * PI).collect();
    let mut b = DMatrix::zeros(2 * n, 1);
    for (j, bj) in coeffs.iter().enumerate() {
        b[(2 * j + 1, 0)] = SQRT_2 * bj;
    }
    let label = match &config.coeffs {
        Some(_) => alloc::format!("wave, {n} modes, explicit b_n"),
        None => alloc::format!("wave, {n} modes, b_n = n^-{}", config.beta),
    };
    DampedSystem::modal(freqs, b, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{graph_seminorm, Generator};
    use proptest::prelude::*;

    #[test]
    fn sine_coefficients_of_first_mode() {
        let c = sine_coefficients(&Profile::custom(|x| (PI * x).sin()), 3).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12);
        assert!(c[1].abs() < 1e-12 && c[2].abs() < 1e-12);
    }

    #[test]
    fn sine_coefficients_of_constant() {
        // ∫ sin(nπx) dx = (1 - (-1)^n) / (nπ)
        let c = sine_coefficients(&Profile::Constant(1.0), 2).unwrap();
        assert!((c[0] - 2.0 / PI).abs() < 1e-12);
        assert!(c[1].abs() < 1e-12);
    }

    #[test]
    fn recovers_power_law_coefficients_from_series() {
        let terms = 24;
        let profile = Profile::custom(move |x| (1..=terms).map(|n| 2.0 / n as f64 * (n as f64 * PI * x).sin()).sum());
        let c = sine_coefficients(&profile, terms + 4).unwrap();
        for (i, v) in c.iter().enumerate() {
            let n = i + 1;
            let want = if n <= terms { 1.0 / n as f64 } else { 0.0 };
            assert!((v - want).abs() < 1e-8, "n = {n}: {v}");
        }
    }

    #[test]
    fn non_finite_profile_is_reported() {
        let p = Profile::custom(|x| if x > 0.7 { f64::INFINITY } else { 1.0 });
        assert!(matches!(sine_coefficients(&p, 1), Err(Error::NonFiniteProfile { .. })));
    }

    #[test]
    fn single_mode_matrices() {
        let sys = build_wave_modal(&WaveModelConfig { beta: 1.0, coeffs: Some(alloc::vec![1.0]), modes: 1 }).unwrap();
        let a = sys.generator_matrix();
        assert_eq!(a[(0, 1)], PI);
        assert_eq!(a[(1, 0)], -PI);
        assert_eq!(sys.input_map()[(0, 0)], 0.0);
        assert_eq!(sys.input_map()[(1, 0)], SQRT_2);
        assert_eq!(sys.eigen_data().unwrap().frequencies(), alloc::vec![PI, -PI]);
        assert!(matches!(sys.generator(), Generator::Modal { .. }));
    }

    #[test]
    fn linear_damping_eigenvalues_closed_form() {
        // A - B B^T = ((0, π), (-π, -2)): λ² + 2λ + π² = 0
        let sys = build_wave_modal(&WaveModelConfig { beta: 1.0, coeffs: Some(alloc::vec![1.0]), modes: 1 }).unwrap();
        let m = sys.generator_matrix() - sys.input_map() * sys.input_map().transpose();
        let ev = m.complex_eigenvalues();
        let im = (PI * PI - 1.0).sqrt();
        for l in ev.iter() {
            assert!((l.re + 1.0).abs() < 1e-12);
            assert!((l.im.abs() - im).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_data_matches_coefficients() {
        let cfg = WaveModelConfig::power_law(1.3, 40);
        let sys = build_wave_modal(&cfg).unwrap();
        let eig = sys.eigen_data().unwrap();
        let s = eig.frequencies();
        for k in 0..eig.len() {
            let n = k / 2 + 1;
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            assert_eq!(s[k], sign * n as f64 * PI);
            assert!((eig.input_value_norm(k) - (n as f64).powf(-1.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(build_wave_modal(&WaveModelConfig::power_law(0.5, 4)).is_err());
        assert!(build_wave_modal(&WaveModelConfig::power_law(1.0, 0)).is_err());
        let short = WaveModelConfig { beta: 1.0, coeffs: Some(alloc::vec![1.0]), modes: 3 };
        assert!(build_wave_modal(&short).is_err());
        let nan = WaveModelConfig { beta: 1.0, coeffs: Some(alloc::vec![f64::NAN]), modes: 1 };
        assert!(build_wave_modal(&nan).is_err());
    }

    proptest! {
        #[test]
        fn generator_is_skew(x in proptest::collection::vec(-10.0..10.0f64, 16)) {
            let sys = build_wave_modal(&WaveModelConfig::power_law(1.0, 8)).unwrap();
            let mut ax = alloc::vec![0.0; 16];
            sys.apply_generator(&x, &mut ax).unwrap();
            let ip: f64 = ax.iter().zip(&x).map(|(a, b)| a * b).sum();
            let scale = crate::vecops::norm(&ax) * crate::vecops::norm(&x);
            prop_assert!(ip.abs() <= 1e-12 * scale.max(1e-300));
            let g = graph_seminorm(&sys, &x).unwrap();
            prop_assert!(g >= crate::vecops::norm(&x));
        }

        #[test]
        fn sine_coefficients_are_linear(alpha in -3.0..3.0f64, c0 in -2.0..2.0f64, c1 in -2.0..2.0f64) {
            let f = Profile::custom(move |x| c0 + x * x);
            let g = Profile::custom(move |x| c1 * (3.0 * x).cos());
            let h = Profile::custom(move |x| alpha * (c0 + x * x) + c1 * (3.0 * x).cos());
            let (cf, cg, ch) = (
                sine_coefficients(&f, 6).unwrap(),
                sine_coefficients(&g, 6).unwrap(),
                sine_coefficients(&h, 6).unwrap(),
            );
            for i in 0..6 {
                prop_assert!((ch[i] - alpha * cf[i] - cg[i]).abs() < 1e-10);
            }
        }
    }
}
