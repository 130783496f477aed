use super::*;
use crate::model::{build_scole_fem, build_wave_modal, ScoleConfig, WaveModelConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wave(modes: usize) -> DampedSystem {
    build_wave_modal(&WaveModelConfig::power_law(1.0, modes)).unwrap()
}

fn random_state(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Scaling and squaring with a Taylor core; oracle for linear flows.
fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut s = 0;
    let mut a = m.clone();
    while a.norm() > 0.25 {
        a /= 2.0;
        s += 1;
    }
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn linear_flow_full_period() {
    let sys = build_wave_modal(&WaveModelConfig { beta: 1.0, coeffs: Some(vec![1.0]), modes: 1 }).unwrap();
    let z = linear_flow(&sys, &[1.0, 0.0], 2.0).unwrap();
    assert!((z[0] - 1.0).abs() < 1e-14 && z[1].abs() < 1e-14);
    let x = [0.3, -0.8];
    assert_eq!(linear_flow(&sys, &x, 0.0).unwrap(), x.to_vec());
}

#[test]
fn linear_flow_matches_matrix_exponential() {
    let sys = build_scole_fem(&ScoleConfig { elements: 6, ..ScoleConfig::default() }).unwrap();
    let x = random_state(sys.dim(), 3);
    let dt = 0.013;
    let exact = expm(&(sys.generator_matrix() * dt)) * DVector::from_column_slice(&x);
    let got = linear_flow(&sys, &x, dt).unwrap();
    assert!(dist(&got, exact.as_slice()) < 1e-10 * norm(&x));
}

#[test]
fn linear_flow_preserves_norm_on_random_states() {
    let sys = wave(32);
    let scole = build_scole_fem(&ScoleConfig { elements: 16, ..ScoleConfig::default() }).unwrap();
    for seed in 0..100 {
        for s in [&sys, &scole] {
            let x = random_state(s.dim(), seed);
            let y = linear_flow(s, &x, 0.37).unwrap();
            assert!((norm(&y) - norm(&x)).abs() <= 1e-12 * norm(&x));
        }
    }
}

#[test]
fn linear_flow_requires_factorization() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let sys = DampedSystem::dense(a, b, "raw").unwrap();
    assert!(matches!(linear_flow(&sys, &[1.0, 0.0], 0.1), Err(Error::MissingEigenData)));
}

#[test]
fn identity_substep_is_exponential() {
    let sys = wave(16);
    let x = random_state(sys.dim(), 7);
    let dt = 0.05;
    let g = sys.input_gram()[(0, 0)];
    let out = damping_substep(&sys, &Nonlinearity::Identity, &x, dt, 1e-12).unwrap();
    let w0 = sys.observe(&x).unwrap()[0];
    let w1 = sys.observe(&out.state).unwrap()[0];
    assert!((w1 - w0 * (-g * dt).exp()).abs() < 1e-12 * w0.abs());
    // energy removed equals int 2 w^2 up to trapezoid error
    let exact = w0 * w0 * (1.0 - (-2.0 * g * dt).exp()) / g;
    assert!((out.dissipation - exact).abs() < 1e-2 * exact);
}

#[test]
fn substep_leaves_kernel_states_alone() {
    let sys = wave(8);
    // positions only: B* x = 0
    let mut x = vec![0.0; sys.dim()];
    for j in 0..8 {
        x[2 * j] = 1.0 / (j + 1) as f64;
    }
    let out = damping_substep(&sys, &Nonlinearity::tanh(), &x, 0.1, 1e-10).unwrap();
    assert_eq!(out.state, x);
    assert_eq!(out.dissipation, 0.0);
}

/// Classical RK4 on `w' = -g tanh(w)`.
fn rk4_tanh(w0: f64, g: f64, t: f64, steps: usize) -> f64 {
    let f = |w: f64| -g * w.tanh();
    let h = t / steps as f64;
    let mut w = w0;
    for _ in 0..steps {
        let k1 = f(w);
        let k2 = f(w + 0.5 * h * k1);
        let k3 = f(w + 0.5 * h * k2);
        let k4 = f(w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    w
}

#[test]
fn tanh_substep_matches_rk4_oracle() {
    let sys = wave(16);
    let g = sys.input_gram()[(0, 0)];
    for seed in 0..5 {
        let x: Vec<f64> = random_state(sys.dim(), seed).iter().map(|v| 3.0 * v).collect();
        let dt = 0.2;
        let out = damping_substep(&sys, &Nonlinearity::tanh(), &x, dt, 1e-12).unwrap();
        let w0 = sys.observe(&x).unwrap()[0];
        let w_oracle = rk4_tanh(w0, g, dt, 1000);
        let mut oracle = x.clone();
        sys.add_input(&[(w_oracle - w0) / g], 1.0, &mut oracle).unwrap();
        assert!(dist(&out.state, &oracle) < 1e-9, "{}", dist(&out.state, &oracle));
    }
}

#[test]
fn two_input_substep_reduces_correctly() {
    let sys = build_scole_fem(&ScoleConfig { elements: 8, ..ScoleConfig::default() }).unwrap();
    let x = random_state(sys.dim(), 11);
    let out = damping_substep(&sys, &Nonlinearity::Identity, &x, 0.1, 1e-12).unwrap();
    // oracle: exp(-B B^T dt) x
    let b = sys.input_map();
    let exact = expm(&(-(b * b.transpose()) * 0.1)) * DVector::from_column_slice(&x);
    assert!(dist(&out.state, exact.as_slice()) < 1e-10);
}

#[test]
fn undamped_norm_is_constant() {
    let sys = wave(32).undamped();
    let x = random_state(sys.dim(), 1);
    let traj = integrate(&sys, &Nonlinearity::tanh(), &x, &Schedule::new(100.0, 1e-2, 100), Method::Strang).unwrap();
    let n0 = traj.norms[0];
    assert!(traj.norms.iter().all(|n| (n - n0).abs() <= 1e-10 * n0));
    assert!(energy_balance_residual(&traj).max_abs <= 1e-10);
    let mid =
        integrate(&sys, &Nonlinearity::tanh(), &x, &Schedule::new(100.0, 1e-2, 100), Method::ImplicitMidpoint).unwrap();
    assert!(mid.norms.iter().all(|n| (n - n0).abs() <= 1e-10 * n0));
}

#[test]
fn strang_matches_exact_linear_flow_to_second_order() {
    let sys = wave(8);
    let x = random_state(sys.dim(), 5);
    let t = 2.0;
    let exact = expm(&((sys.generator_matrix() - sys.input_map() * sys.input_map().transpose()) * t))
        * DVector::from_column_slice(&x);
    let err = |dt: f64| {
        let traj = integrate(&sys, &Nonlinearity::Identity, &x, &Schedule::new(t, dt, 1000), Method::Strang).unwrap();
        dist(&traj.final_state, exact.as_slice())
    };
    let (e1, e2) = (err(1e-2), err(5e-3));
    assert!(e1 < 1e-2);
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn strang_and_midpoint_agree_to_second_order() {
    let sys = wave(64);
    let x = random_state(sys.dim(), 9);
    let gap = |dt: f64| {
        let s = Schedule::new(1.0, dt, 1000);
        let a = integrate(&sys, &Nonlinearity::Identity, &x, &s, Method::Strang).unwrap();
        let b = integrate(&sys, &Nonlinearity::Identity, &x, &s, Method::ImplicitMidpoint).unwrap();
        dist(&a.final_state, &b.final_state)
    };
    let ratio = gap(2e-3) / gap(1e-3);
    assert!((3.0..5.0).contains(&ratio), "{ratio}");
}

#[test]
fn midpoint_handles_nonlinear_two_input_damping() {
    let sys = build_scole_fem(&ScoleConfig { elements: 8, ..ScoleConfig::default() }).unwrap();
    // low modes only, so both schemes resolve the phases
    let mut z = vec![0.0; sys.dim()];
    z[..6].copy_from_slice(&[1.0, -0.5, 0.3, 0.8, -0.2, 0.1]);
    let x = sys.from_modal(&z).unwrap();
    let s = Schedule::new(5.0, 2.5e-4, 2000);
    let a = integrate(&sys, &Nonlinearity::tanh(), &x, &s, Method::Strang).unwrap();
    let b = integrate(&sys, &Nonlinearity::tanh(), &x, &s, Method::ImplicitMidpoint).unwrap();
    assert!(dist(&a.final_state, &b.final_state) < 1e-3 * norm(&x), "{}", dist(&a.final_state, &b.final_state));
    // midpoint bookkeeping is exact: residual is rounding only
    assert!(energy_balance_residual(&b).max_abs < 1e-11);
}

#[test]
fn tanh_norms_do_not_increase() {
    let sys = wave(32);
    for seed in 0..4 {
        let x: Vec<f64> = random_state(sys.dim(), seed).iter().map(|v| 5.0 * v).collect();
        let traj = integrate(&sys, &Nonlinearity::tanh(), &x, &Schedule::new(50.0, 1e-2, 10), Method::Strang).unwrap();
        for w in traj.norms.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * traj.norms[0]);
        }
        for w in traj.dissipation.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}

#[test]
fn energy_balance_converges_at_second_order() {
    let sys = wave(16);
    let x = random_state(sys.dim(), 4);
    let res = |dt: f64| {
        let t = integrate(&sys, &Nonlinearity::Identity, &x, &Schedule::new(20.0, dt, 10), Method::Strang).unwrap();
        energy_balance_residual(&t).max_abs
    };
    let ratio = res(1e-2) / res(5e-3);
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn tanh_energy_balance_is_tight() {
    let sys = wave(32);
    let x = random_state(sys.dim(), 8);
    let n0 = norm(&x);
    let traj = integrate(&sys, &Nonlinearity::tanh(), &x, &Schedule::new(100.0, 1e-3, 1000), Method::Strang).unwrap();
    assert!(
        energy_balance_residual(&traj).max_abs <= 1e-6 * n0 * n0,
        "{} {}",
        energy_balance_residual(&traj).max_abs,
        n0
    );
}

#[test]
fn sampling_layout() {
    let sys = wave(4);
    let x = random_state(sys.dim(), 0);
    let traj = integrate(&sys, &Nonlinearity::Identity, &x, &Schedule::new(1.0, 0.1, 3), Method::Strang).unwrap();
    let want = [0.0, 0.3, 0.6, 0.9, 1.0];
    assert_eq!(traj.len(), want.len());
    for (t, w) in traj.times.iter().zip(want) {
        assert!((t - w).abs() < 1e-12);
    }
    assert_eq!(traj.xdot_norms.len(), traj.len());
    assert_eq!(traj.w_samples.len(), traj.len());
    assert!(Schedule::new(1.0, 0.3, 1).steps().is_err());
    assert!(Schedule::new(1.0, 0.1, 0).steps().is_err());
}

#[test]
fn xdot_quotient_tracks_vector_field() {
    let sys = wave(8);
    let x = random_state(sys.dim(), 6);
    let traj = integrate(&sys, &Nonlinearity::Identity, &x, &Schedule::new(0.01, 1e-5, 1), Method::Strang).unwrap();
    let a = sys.generator_matrix() - sys.input_map() * sys.input_map().transpose();
    let f = a * DVector::from_column_slice(&x);
    assert!((traj.xdot_norms[0] - f.norm()).abs() < 1e-3 * f.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_flow_is_reversible(seed in 0u64..1000, dt in -3.0..3.0f64) {
        let sys = wave(16);
        let x = random_state(sys.dim(), seed);
        let back = linear_flow(&sys, &linear_flow(&sys, &x, dt).unwrap(), -dt).unwrap();
        prop_assert!(dist(&back, &x) <= 1e-12 * norm(&x));
    }

    #[test]
    fn substep_is_nonexpansive(seed in 0u64..1000, scale in 0.01..20.0f64, dt in 1e-3..0.5f64) {
        let sys = wave(8);
        let x: Vec<f64> = random_state(sys.dim(), seed).iter().map(|v| v * scale).collect();
        for phi in Nonlinearity::builtin_monotone() {
            let out = damping_substep(&sys, &phi, &x, dt, 1e-10).unwrap();
            prop_assert!(norm(&out.state) <= norm(&x) * (1.0 + 1e-12));
        }
    }
}
