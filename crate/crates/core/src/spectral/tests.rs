use super::*;
use crate::model::{build_scole_fem, build_wave_modal, ScoleConfig, WaveModelConfig};
use core::f64::consts::PI;
use nalgebra::DMatrix;

fn wave(beta: f64, n: usize) -> DampedSystem {
    build_wave_modal(&WaveModelConfig::power_law(beta, n)).unwrap()
}

fn wave_coeffs(c: &[f64]) -> DampedSystem {
    build_wave_modal(&WaveModelConfig { beta: 1.0, coeffs: Some(c.to_vec()), modes: c.len() }).unwrap()
}

#[test]
fn abscissa_single_mode_root() {
    // lambda^2 + 2 lambda + pi^2 = 0 when B B* puts 2 on the velocity slot
    let sys = wave_coeffs(&[1.0]);
    assert!((spectral_abscissa(&sys, 1.0).unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn abscissa_undamped_is_zero() {
    for sys in [wave(1.0, 16), build_scole_fem(&ScoleConfig { elements: 8, ..ScoleConfig::default() }).unwrap()] {
        assert!(spectral_abscissa(&sys, 0.0).unwrap().abs() < 1e-10);
    }
}

#[test]
fn abscissa_negative_and_shrinking_with_truncation() {
    let a: Vec<f64> = [32, 64, 128].iter().map(|n| spectral_abscissa(&wave(1.0, *n), 1.0).unwrap()).collect();
    assert!(a.iter().all(|v| *v < 0.0), "{a:?}");
    assert!(a[0].abs() > a[1].abs() && a[1].abs() > a[2].abs(), "{a:?}");
}

#[test]
fn wave_gaps() {
    assert!((eigen_gap(&wave(1.0, 9)).unwrap() - PI).abs() < 1e-12);
    assert!((eigen_gap(&wave(1.0, 1)).unwrap() - 2.0 * PI).abs() < 1e-12);
}

#[test]
fn repeated_frequency_is_rejected() {
    let b = DMatrix::from_element(4, 1, 0.5);
    let sys = DampedSystem::modal(alloc::vec![2.0, 2.0], b, "twin").unwrap();
    assert!(matches!(eigen_gap(&sys), Err(Error::GapViolated(..))));
}

#[test]
fn scole_low_gaps_increase() {
    let sys = build_scole_fem(&ScoleConfig { elements: 64, ..ScoleConfig::default() }).unwrap();
    let w = sys.eigen_data().unwrap().block_frequencies().to_vec();
    let gaps: Vec<f64> = w.windows(2).take(10).map(|p| p[1] - p[0]).collect();
    assert!(gaps.windows(2).all(|g| g[1] > g[0]), "{gaps:?}");
}

#[test]
fn wavepacket_margin_cases() {
    let m64 = wavepacket_margin(&wave(1.0, 64), 1.0).unwrap();
    let m256 = wavepacket_margin(&wave(1.0, 256), 1.0).unwrap();
    assert!(m64 > 0.0 && m256 >= 0.9 * m64);
    // direct evaluation: min_n (1 + n pi) / n
    let direct = (1..=64).map(|n| (1.0 + n as f64 * PI) / n as f64).fold(f64::INFINITY, f64::min);
    assert!((m64 - direct).abs() < 1e-12 * direct);
    assert_eq!(wavepacket_margin(&wave_coeffs(&[0.0, 1.0]), 1.0).unwrap(), 0.0);
    let slack32 = wavepacket_margin(&wave(1.0, 32), 2.0).unwrap();
    let slack128 = wavepacket_margin(&wave(1.0, 128), 2.0).unwrap();
    assert!(slack128 > slack32 || (slack128 - slack32).abs() < 1e-12);
}

#[test]
fn grid_avoids_eigenfrequencies() {
    let sys = wave(1.0, 8);
    let (grid, fit_hi) = resolvent_grid(&sys, 0.0, 30.0, 20).unwrap();
    assert!((fit_hi - 4.0 * PI).abs() < 1e-12);
    let mut edges: Vec<f64> = (0..=8).map(|n| n as f64 * PI).collect();
    edges.push(30.0);
    for e in edges.windows(2) {
        assert!(grid.iter().filter(|s| **s > e[0] && **s < e[1]).count() >= 20);
    }
    assert!(grid.iter().all(|s| (1..=8).all(|n| (s - n as f64 * PI).abs() > 1e-3)));
    assert!(resolvent_grid(&sys, 0.0, 30.0, 10).is_err());
}

#[test]
fn golden_refinement_finds_peak() {
    let f = |s: f64| -> Result<f64> { Ok(1.0 / (1.0 + (s - 2.345).powi(2))) };
    let (s, v) = golden_max(2.0, 3.0, &mut { f }).unwrap();
    assert!((s - 2.345).abs() < 1e-6 && (v - 1.0).abs() < 1e-12);
}

#[test]
fn envelope_fit_recovers_exact_power() {
    // peaks at n + 1/2 with heights n^3: slope 3 exactly
    let s: Vec<f64> = (0..400).map(|i| 1.0 + i as f64 * 0.025).collect();
    let f = |x: f64| -> Result<f64> {
        let c = (x - 0.5).round() + 0.5;
        Ok(c.powi(3) / (1.0 + 100.0 * (x - c).powi(2)))
    };
    let norms: Vec<f64> = s.iter().map(|x| f(*x).unwrap()).collect();
    let curve = fit_envelope(&s, &norms, 1.0, (1.0, 10.0), f).unwrap();
    assert!(curve.peaks.len() >= 5);
    assert!((curve.envelope_slope - 3.0).abs() < 1e-6, "{}", curve.envelope_slope);
    assert!(matches!(fit_envelope(&s, &norms, 1.0, (1.0, 2.0), f), Err(Error::FitInsufficient(_))));
}

#[test]
fn growth_fit_dense_oracle_small_wave() {
    // envelope maxima re-evaluated densely must match the Woodbury peaks
    let sys = wave(2.0, 24);
    let curve = resolvent_growth_fit(&sys, 1.0, 0.5, 80.0, 20).unwrap();
    for (s, v) in &curve.peaks {
        let d = resolvent_norm(&sys, 1.0, *s, ResolventMethod::Dense).unwrap().norm;
        assert!((d - v).abs() < 1e-8 * d);
    }
    assert!(curve.norms.iter().all(|v| v.is_finite() && *v > 0.0));
}
