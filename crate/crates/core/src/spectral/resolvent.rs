//! `|(is - A + kappa B B*)^-1|` on the imaginary axis.
//!
//! The Woodbury route works in the eigenbasis, where `is - A` is the diagonal
//! `D = i(s - s_k)` and the damping is the rank-`d` term `kappa C C*` with
//! `C = E* B`. The largest singular value comes from Lanczos on `R* R`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use crate::model::{DampedSystem, EigenData};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResolventMethod {
    #[default]
    Woodbury,
    Dense,
}

/// Norm plus how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventValue {
    pub norm: f64,
    /// The Woodbury route could not be used (no eigen data, `s` on an
    /// eigenvalue, or Lanczos stagnation) and the dense SVD answered instead.
    pub fell_back: bool,
}

const LANCZOS_TOL: f64 = 1e-13;
const LANCZOS_MAX: usize = 300;

struct Woodbury<'a> {
    eig: &'a EigenData,
    d: usize,
    kappa: f64,
    inv_d: Vec<Complex64>,
    /// `(I + kappa C* D^-1 C)^-1`, row-major `d x d`.
    cap_inv: [Complex64; 4],
}

fn inv2(m: [Complex64; 4], d: usize) -> Option<[Complex64; 4]> {
    let zero = Complex64::new(0.0, 0.0);
    if d == 1 {
        return (m[0].norm() > 0.0).then(|| [m[0].inv(), zero, zero, zero]);
    }
    let det = m[0] * m[3] - m[1] * m[2];
    if det.norm() == 0.0 || !det.is_finite() {
        return None;
    }
    let r = det.inv();
    Some([m[3] * r, -m[1] * r, -m[2] * r, m[0] * r])
}

impl<'a> Woodbury<'a> {
    fn new(eig: &'a EigenData, d: usize, kappa: f64, s: f64) -> Option<Self> {
        let freqs = eig.frequencies();
        let mut inv_d = Vec::with_capacity(freqs.len());
        for sk in &freqs {
            let dk = s - sk;
            // s - s_k is exact near s_k, so only an exact hit is unusable
            if dk == 0.0 {
                return None;
            }
            inv_d.push(Complex64::new(0.0, -1.0 / dk));
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut cap = [zero; 4];
        for (k, id) in inv_d.iter().enumerate() {
            let b = eig.input_value(k);
            for r in 0..d {
                for c in 0..d {
                    cap[r * d + c] += b[r] * id * b[c].conj();
                }
            }
        }
        for r in 0..d {
            for c in 0..d {
                cap[r * d + c] *= kappa;
            }
            cap[r * d + r] += 1.0;
        }
        let cap_inv = inv2(cap, d)?;
        Some(Woodbury { eig, d, kappa, inv_d, cap_inv })
    }

    /// `out = R v` or, with `adjoint`, `out = R* v`.
    fn apply(&self, v: &[Complex64], out: &mut [Complex64], adjoint: bool) {
        let d = self.d;
        let zero = Complex64::new(0.0, 0.0);
        let mut t = [zero; 2];
        for (k, (o, vk)) in out.iter_mut().zip(v).enumerate() {
            let id = if adjoint { self.inv_d[k].conj() } else { self.inv_d[k] };
            *o = vk * id;
            let b = self.eig.input_value(k);
            for c in 0..d {
                t[c] += b[c] * *o;
            }
        }
        let mut u = [zero; 2];
        for r in 0..d {
            for c in 0..d {
                let m = if adjoint { self.cap_inv[c * d + r].conj() } else { self.cap_inv[r * d + c] };
                u[r] += m * t[c];
            }
        }
        for (k, o) in out.iter_mut().enumerate() {
            let id = if adjoint { self.inv_d[k].conj() } else { self.inv_d[k] };
            let b = self.eig.input_value(k);
            let corr: Complex64 = (0..d).map(|c| b[c].conj() * u[c]).sum();
            *o -= id * corr * self.kappa;
        }
    }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest eigenvalue of the Hermitian PSD operator `op`, or `None` on stagnation.
fn lanczos_max<F: FnMut(&[Complex64], &mut [Complex64])>(n: usize, mut op: F) -> Option<f64> {
    let mut q0: Vec<Complex64> = (0..n)
        .map(|k| {
            let x = k as f64 + 1.0;
            Complex64::new(1.0 + 0.5 * (0.7 * x).sin(), 0.3 * (1.3 * x).cos())
        })
        .collect();
    let nq = cnorm(&q0);
    q0.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<Complex64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let steps = n.min(LANCZOS_MAX);
    for m in 0..steps {
        op(&basis[m], &mut w);
        let a = cdot(&basis[m], &w).re;
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for q in &basis {
                let c = cdot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = cnorm(&w);
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imax, theta) =
            eig.eigenvalues
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        let resid = b * eig.eigenvectors[(k - 1, imax)].abs();
        let invariant = b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE);
        if invariant || (k >= 2 && resid <= LANCZOS_TOL * theta) || k == n {
            return Some(theta);
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    None
}

fn dense_norm(system: &DampedSystem, kappa: f64, s: f64) -> Result<f64> {
    let n = system.dim();
    let a = system.generator_matrix();
    let b = system.input_map();
    let bb = b * b.transpose();
    let m = DMatrix::from_fn(n, n, |r, c| {
        let re = -a[(r, c)] + kappa * bb[(r, c)];
        Complex64::new(re, if r == c { s } else { 0.0 })
    });
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let svd = SVD::try_new(m, false, false, 1e-15, 10_000).ok_or(Error::EigenSolver("complex SVD"))?;
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin > 1e-14 * scale) {
        return Err(Error::SingularResolvent(s));
    }
    Ok(1.0 / smin)
}

/// `|(is - A_kappa)^-1|` with `A_kappa = A - kappa B B*`.
pub fn resolvent_norm(system: &DampedSystem, kappa: f64, s: f64, method: ResolventMethod) -> Result<ResolventValue> {
    if !(kappa >= 0.0 && kappa.is_finite() && s.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("kappa = {kappa}, s = {s}")));
    }
    let dense = |fell_back| dense_norm(system, kappa, s).map(|norm| ResolventValue { norm, fell_back });
    let eig = match (method, system.eigen_data()) {
        (ResolventMethod::Dense, _) => return dense(false),
        (ResolventMethod::Woodbury, None) => return dense(true),
        (ResolventMethod::Woodbury, Some(e)) => e,
    };
    let undamped = system.input_map().iter().all(|v| *v == 0.0);
    if kappa == 0.0 || undamped {
        // normal operator: the norm is the inverse distance to the spectrum
        let dist = eig.frequencies().iter().map(|sk| (s - sk).abs()).fold(f64::INFINITY, f64::min);
        if dist == 0.0 {
            return Err(Error::SingularResolvent(s));
        }
        return Ok(ResolventValue { norm: 1.0 / dist, fell_back: false });
    }
    let Some(wb) = Woodbury::new(eig, system.input_dim(), kappa, s) else {
        return dense(true);
    };
    let n = eig.len();
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let top = lanczos_max(n, |v, out| {
        wb.apply(v, &mut tmp, false);
        wb.apply(&tmp, out, true);
    });
    match top {
        Some(l) if l > 0.0 && l.is_finite() => Ok(ResolventValue { norm: l.sqrt(), fell_back: false }),
        _ => dense(true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_scole_fem, build_wave_modal, ScoleConfig, WaveModelConfig};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn wave(modes: usize) -> DampedSystem {
        build_wave_modal(&WaveModelConfig::power_law(1.0, modes)).unwrap()
    }

    #[test]
    fn undamped_distance_to_spectrum() {
        let r = resolvent_norm(&wave(2), 0.0, 0.0, ResolventMethod::Woodbury).unwrap();
        assert_eq!(r.norm, 1.0 / PI);
        assert!(!r.fell_back);
        let d = resolvent_norm(&wave(2), 0.0, 0.0, ResolventMethod::Dense).unwrap();
        assert!((d.norm - 1.0 / PI).abs() < 1e-14);
        assert!(matches!(
            resolvent_norm(&wave(2), 0.0, PI, ResolventMethod::Woodbury),
            Err(Error::SingularResolvent(_))
        ));
        assert!(matches!(resolvent_norm(&wave(2), 0.0, PI, ResolventMethod::Dense), Err(Error::SingularResolvent(_))));
    }

    #[test]
    fn woodbury_matches_dense_on_wave() {
        let sys = wave(64);
        let w = resolvent_norm(&sys, 1.0, 7.3, ResolventMethod::Woodbury).unwrap();
        let d = resolvent_norm(&sys, 1.0, 7.3, ResolventMethod::Dense).unwrap();
        assert!(!w.fell_back);
        assert!(((w.norm - d.norm) / d.norm).abs() < 1e-8, "{} vs {}", w.norm, d.norm);
    }

    #[test]
    fn eigenvalue_hit_falls_back() {
        let sys = wave(8);
        let r = resolvent_norm(&sys, 1.0, 2.0 * PI, ResolventMethod::Woodbury).unwrap();
        assert!(r.fell_back);
        let d = resolvent_norm(&sys, 1.0, 2.0 * PI, ResolventMethod::Dense).unwrap();
        assert_eq!(r.norm, d.norm);
    }

    #[test]
    fn single_mode_closed_form() {
        // (is - A + B B^T) for one mode: 2x2, norm = 1 / sigma_min by hand
        let sys = build_wave_modal(&WaveModelConfig { beta: 1.0, coeffs: Some(vec![1.0]), modes: 1 }).unwrap();
        let s: f64 = 1.7;
        let m = nalgebra::Matrix2::new(
            Complex64::new(0.0, s),
            Complex64::new(-PI, 0.0),
            Complex64::new(PI, 0.0),
            Complex64::new(2.0, s),
        );
        let h = m.adjoint() * m;
        let (a, b, c) = (h[(0, 0)].re, h[(0, 1)], h[(1, 1)].re);
        let lmin = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b.norm_sqr()).sqrt();
        let want = 1.0 / lmin.sqrt();
        let got = resolvent_norm(&sys, 1.0, s, ResolventMethod::Woodbury).unwrap().norm;
        assert!(((got - want) / want).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(25))]

        #[test]
        fn woodbury_agrees_with_dense(s in -60.0..60.0f64, kappa in 0.05..5.0f64) {
            let sys = wave(16);
            let w = resolvent_norm(&sys, kappa, s, ResolventMethod::Woodbury).unwrap().norm;
            let d = resolvent_norm(&sys, kappa, s, ResolventMethod::Dense).unwrap().norm;
            prop_assert!(((w - d) / d).abs() < 1e-8);
        }

        #[test]
        fn scole_woodbury_agrees_with_dense(s in -200.0..200.0f64, kappa in 0.05..5.0f64) {
            let sys = build_scole_fem(&ScoleConfig { elements: 8, ..ScoleConfig::default() }).unwrap();
            let w = resolvent_norm(&sys, kappa, s, ResolventMethod::Woodbury).unwrap().norm;
            let d = resolvent_norm(&sys, kappa, s, ResolventMethod::Dense).unwrap().norm;
            prop_assert!(((w - d) / d).abs() < 1e-8);
        }

        #[test]
        fn norm_is_even_in_s(s in 0.1..80.0f64) {
            let sys = wave(16);
            let a = resolvent_norm(&sys, 1.0, s, ResolventMethod::Woodbury).unwrap().norm;
            let b = resolvent_norm(&sys, 1.0, -s, ResolventMethod::Woodbury).unwrap().norm;
            prop_assert!(((a - b) / a).abs() < 1e-10);
        }
    }
}
