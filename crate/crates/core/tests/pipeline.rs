use dampdecay_core::decay::{contraction_check, fit_decay_exponent};
use dampdecay_core::initial::{critical_data, smooth_data};
use dampdecay_core::integrator::{energy_balance_residual, integrate};
use dampdecay_core::model::{build_scole_fem, build_wave_modal, ScoleConfig, WaveModelConfig};
use dampdecay_core::spectral::{eigen_gap, resolvent_growth_fit, spectral_abscissa};
use dampdecay_core::{DampedSystem, Method, Nonlinearity, Schedule};
use proptest::prelude::*;

fn wave(beta: f64, n: usize) -> DampedSystem {
    build_wave_modal(&WaveModelConfig::power_law(beta, n)).unwrap()
}

fn phases(n: usize, seed: u64) -> Vec<f64> {
    // small LCG; any fixed phases will do here
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU
        })
        .collect()
}

#[test]
fn gap_and_resolvent_growth_predict_the_wave_rate() {
    let sys = wave(1.0, 64);
    assert!((eigen_gap(&sys).unwrap() - std::f64::consts::PI).abs() < 1e-9);
    let curve = resolvent_growth_fit(&sys, 1.0, 1.0, 100.0, 20).unwrap();
    // growth |s|^alpha gives decay t^{-1/alpha}
    assert!((1.0 / curve.envelope_slope - 0.5).abs() < 0.05, "slope {}", curve.envelope_slope);
    assert!(spectral_abscissa(&sys, 1.0).unwrap() < 0.0);
}

#[test]
fn beam_undamped_flow_conserves_energy() {
    let sys = build_scole_fem(&ScoleConfig { elements: 16, ..ScoleConfig::default() }).unwrap();
    assert!(sys.skewness_residual() <= 1e-10);
    let x0 = critical_data(&sys, &phases(sys.dim() / 2, 3)).unwrap();
    let n0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let traj = integrate(&sys.undamped(), &Nonlinearity::Identity, &x0, &Schedule::new(10.0, 1e-2, 10), Method::Strang)
        .unwrap();
    let drift = traj.norms.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-10 * n0, "drift {drift}");
}

#[test]
fn schemes_agree_as_the_step_shrinks() {
    let sys = wave(1.0, 12);
    let x0 = smooth_data(&sys, 2.0, &phases(12, 5)).unwrap();
    let phi = Nonlinearity::tanh();
    let run = |m, dt| integrate(&sys, &phi, &x0, &Schedule::new(4.0, dt, 1), m).unwrap().final_state;
    let gap = |dt| {
        let (a, b) = (run(Method::Strang, dt), run(Method::ImplicitMidpoint, dt));
        a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
    };
    let (coarse, fine) = (gap(4e-3), gap(2e-3));
    // both are second order, so their difference is too
    assert!(coarse / fine > 3.0, "{coarse} / {fine}");
}

#[test]
fn linear_damping_on_a_short_window_decays_near_the_predicted_rate() {
    let sys = wave(1.0, 48);
    let x0 = critical_data(&sys, &phases(48, 11)).unwrap();
    let traj = integrate(&sys, &Nonlinearity::Identity, &x0, &Schedule::new(400.0, 4e-3, 250), Method::Strang).unwrap();
    let fit = fit_decay_exponent(&traj, Some((40.0, 400.0))).unwrap();
    assert!((fit.theta_hat - 0.5).abs() < 0.15, "theta {}", fit.theta_hat);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn builtin_maps_dissipate_and_contract(beta in 0.6..2.0_f64, n in 4usize..16, which in 0usize..6, seed in any::<u64>()) {
        let sys = wave(beta, n);
        let phi = Nonlinearity::builtin_monotone().swap_remove(which);
        let xa = critical_data(&sys, &phases(n, seed)).unwrap();
        let xb = smooth_data(&sys, 1.5, &phases(n, seed ^ 1)).unwrap();
        let sched = Schedule::new(5.0, 1e-3, 50);
        let half = Schedule { dt: 5e-4, sample_stride: 100, ..sched };
        let traj = integrate(&sys, &phi, &xa, &sched, Method::Strang).unwrap();
        prop_assert!(traj.norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        // the balance error is a discretization error: it must shrink with the step
        let coarse = energy_balance_residual(&traj).max_abs;
        let fine = energy_balance_residual(&integrate(&sys, &phi, &xa, &half, Method::Strang).unwrap()).max_abs;
        prop_assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
        let pair = contraction_check(&sys, &phi, &xa, &xb, &sched, Method::Strang).unwrap();
        prop_assert!(pair.max_increase <= 1e-9 * pair.initial_distance);
        prop_assert!(pair.final_distance <= pair.initial_distance);
    }
}
