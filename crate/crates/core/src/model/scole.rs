//! Euler–Bernoulli beam clamped at `x = 0` with a rigid tip body at `x = 1`.
//!
//! Cubic Hermite elements carry deflection and slope at each node. The tip mass
//! and moment of inertia sit on the two degrees of freedom of the last node and
//! the damping acts through the tip velocities `(u_t(1), u_xt(1))`.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SVD};

use super::{DampedSystem, Profile};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ScoleConfig {
    /// Flexural rigidity `EI(x)`.
    pub ei: Profile,
    /// Mass density `rho(x)`.
    pub rho: Profile,
    pub tip_mass: f64,
    pub tip_inertia: f64,
    pub elements: usize,
}

impl Default for ScoleConfig {
    fn default() -> Self {
        ScoleConfig {
            ei: Profile::Constant(1.0),
            rho: Profile::Constant(1.0),
            tip_mass: 1.0,
            tip_inertia: 1.0,
            elements: 64,
        }
    }
}

// 5-point Gauss-Legendre on [0, 1]
const GL_X: [f64; 5] =
    [0.046_910_077_030_668, 0.230_765_344_947_158_5, 0.5, 0.769_234_655_052_841_5, 0.953_089_922_969_332];
const GL_W: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_2,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_2,
    0.118_463_442_528_094_5,
];

fn hermite(xi: f64, h: f64) -> ([f64; 4], [f64; 4]) {
    let (x2, x3) = (xi * xi, xi * xi * xi);
    let n = [1.0 - 3.0 * x2 + 2.0 * x3, h * (xi - 2.0 * x2 + x3), 3.0 * x2 - 2.0 * x3, h * (x3 - x2)];
    let h2 = h * h;
    let dd = [(-6.0 + 12.0 * xi) / h2, (-4.0 + 6.0 * xi) / h, (6.0 - 12.0 * xi) / h2, (-2.0 + 6.0 * xi) / h];
    (n, dd)
}

/// Clamped stiffness and mass matrices (tip body included) on the free DOFs.
pub(crate) fn assemble(config: &ScoleConfig) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let ne = config.elements;
    if ne < 4 {
        return Err(Error::InvalidConfig(alloc::format!("elements = {ne} < 4")));
    }
    if !(config.tip_mass > 0.0 && config.tip_inertia > 0.0) {
        return Err(Error::InvalidConfig("tip mass and inertia must be positive".into()));
    }
    let h = 1.0 / ne as f64;
    let nd = 2 * (ne + 1);
    let mut k = DMatrix::zeros(nd, nd);
    let mut m = DMatrix::zeros(nd, nd);
    for e in 0..ne {
        let x0 = e as f64 * h;
        let mut ke = [[0.0; 4]; 4];
        let mut me = [[0.0; 4]; 4];
        for (xi, w) in GL_X.iter().zip(GL_W) {
            let x = x0 + xi * h;
            let (ei, rho) = (config.ei.eval(x), config.rho.eval(x));
            if !(ei > 0.0 && ei.is_finite() && rho > 0.0 && rho.is_finite()) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "EI = {ei}, rho = {rho} at x = {x}: profiles must be positive"
                )));
            }
            let (n, dd) = hermite(*xi, h);
            for a in 0..4 {
                for b in 0..4 {
                    ke[a][b] += w * h * ei * dd[a] * dd[b];
                    me[a][b] += w * h * rho * n[a] * n[b];
                }
            }
        }
        let base = 2 * e;
        for a in 0..4 {
            for b in 0..4 {
                k[(base + a, base + b)] += ke[a][b];
                m[(base + a, base + b)] += me[a][b];
            }
        }
    }
    m[(nd - 2, nd - 2)] += config.tip_mass;
    m[(nd - 1, nd - 1)] += config.tip_inertia;
    // clamp u(0) = u'(0) = 0
    let k = k.view((2, 2), (nd - 2, nd - 2)).into_owned();
    let m = m.view((2, 2), (nd - 2, nd - 2)).into_owned();
    Ok((k, m))
}

/// Build the beam-with-tip-body model in Euclidean energy coordinates.
///
/// With `K = L_K L_K^T` and `M = L_M L_M^T` the state is
/// `x = (L_K^T u, L_M^T u_t)`, the generator is `((0, C), (-C^T, 0))` with
/// `C = L_K^T L_M^-T`, and `B = (0; L_M^-1 S)` where `S` selects the tip
/// deflection and slope, so `B* x = (u_t(1), u_xt(1))`. The modal basis comes
/// from the singular value decomposition of `C`.
pub fn build_scole_fem(config: &ScoleConfig) -> Result<DampedSystem> {
    let (k, m) = assemble(config)?;
    let n = k.nrows();
    let lk = nalgebra::Cholesky::new(k).ok_or(Error::SingularStiffness)?.unpack();
    let lm = nalgebra::Cholesky::new(m).ok_or(Error::NotPositiveDefinite("mass"))?.unpack();
    let ct = lm.solve_lower_triangular(&lk).ok_or(Error::NotPositiveDefinite("mass factor"))?;
    let c = ct.transpose();

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).copy_from(&c);
    a.view_mut((n, 0), (n, n)).copy_from(&(-&ct));

    let mut sel = DMatrix::zeros(n, 2);
    sel[(n - 2, 0)] = 1.0;
    sel[(n - 1, 1)] = 1.0;
    let lm_inv_sel = lm.solve_lower_triangular(&sel).ok_or(Error::NotPositiveDefinite("mass factor"))?;
    let mut b = DMatrix::zeros(2 * n, 2);
    b.view_mut((n, 0), (n, 2)).copy_from(&lm_inv_sel);

    // C w_j = s_j u_j, C^T u_j = s_j w_j: rotation plane spanned by (u_j, 0), (0, w_j)
    let svd = SVD::try_new(c, true, true, 1e-15, 100_000).ok_or(Error::EigenSolver("SVD of coupling"))?;
    let u = svd.u.ok_or(Error::EigenSolver("SVD left vectors"))?;
    let vt = svd.v_t.ok_or(Error::EigenSolver("SVD right vectors"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut basis = DMatrix::zeros(2 * n, 2 * n);
    let mut freqs = Vec::with_capacity(n);
    for (j, &idx) in order.iter().enumerate() {
        let s = svd.singular_values[idx];
        if !(s > 0.0) {
            return Err(Error::SingularStiffness);
        }
        freqs.push(s);
        for r in 0..n {
            basis[(r, 2 * j)] = u[(r, idx)];
            basis[(n + r, 2 * j + 1)] = vt[(idx, r)];
        }
    }
    let label = alloc::format!(
        "beam with tip body, {} elements, m = {}, J = {}",
        config.elements,
        config.tip_mass,
        config.tip_inertia
    );
    DampedSystem::dense_factorized(a, b, freqs, basis, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Generator;

    fn cfg(elements: usize) -> ScoleConfig {
        ScoleConfig { elements, ..ScoleConfig::default() }
    }

    #[test]
    fn constant_profiles_match_closed_form_element_matrices() {
        let (k, m) = assemble(&ScoleConfig { tip_mass: 1e-300, tip_inertia: 1e-300, ..cfg(4) }).unwrap();
        let h: f64 = 0.25;
        // interior node 1 (free DOF indices 0, 1) couples two elements
        assert!((k[(0, 0)] - 24.0 / h.powi(3)).abs() < 1e-9);
        assert!((k[(1, 1)] - 8.0 / h).abs() < 1e-9);
        assert!((m[(0, 0)] - 312.0 * h / 420.0).abs() < 1e-12);
        assert!((m[(1, 1)] - 8.0 * h.powi(3) / 420.0).abs() < 1e-12);
        assert!((m[(0, 2)] - 54.0 * h / 420.0).abs() < 1e-12);
    }

    #[test]
    fn exact_skewness_and_input_channel() {
        let sys = build_scole_fem(&cfg(16)).unwrap();
        assert!(sys.skewness_residual() <= 1e-10);
        let gram = sys.input_gram();
        let eig = nalgebra::SymmetricEigen::new(gram.clone()).eigenvalues;
        assert!(eig.iter().all(|e| *e > 0.0), "{eig}");
        assert!((gram[(0, 1)] - gram[(1, 0)]).abs() < 1e-14);
        assert!(matches!(sys.generator(), Generator::Dense(_)));
    }

    #[test]
    fn modal_basis_is_orthonormal_and_block_diagonalizes() {
        let sys = build_scole_fem(&cfg(12)).unwrap();
        let eig = sys.eigen_data().unwrap();
        let v = eig.basis().unwrap();
        let n = v.nrows();
        let vtv = v.transpose() * v;
        assert!((vtv - DMatrix::<f64>::identity(n, n)).amax() < 1e-10);
        let t = v.transpose() * sys.generator_matrix() * v;
        let scale = t.amax();
        for (j, w) in eig.block_frequencies().iter().enumerate() {
            assert!((t[(2 * j, 2 * j + 1)] - w).abs() < 1e-10 * scale);
            assert!((t[(2 * j + 1, 2 * j)] + w).abs() < 1e-10 * scale);
        }
        let mut off = t.clone();
        for j in 0..n / 2 {
            off[(2 * j, 2 * j + 1)] = 0.0;
            off[(2 * j + 1, 2 * j)] = 0.0;
        }
        assert!(off.amax() < 1e-10 * scale);
    }

    #[test]
    fn svd_and_schur_routes_agree() {
        let sys = build_scole_fem(&cfg(8)).unwrap();
        let (freqs, _) = crate::model::EigenData::from_skew_matrix(&sys.generator_matrix()).unwrap();
        for (a, b) in freqs.iter().zip(sys.eigen_data().unwrap().block_frequencies()).take(10) {
            assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn mesh_refinement_converges() {
        let coarse = build_scole_fem(&cfg(40)).unwrap();
        let fine = build_scole_fem(&cfg(80)).unwrap();
        let fc = coarse.eigen_data().unwrap().block_frequencies();
        let ff = fine.eigen_data().unwrap().block_frequencies();
        for i in 0..5 {
            assert!(((fc[i] - ff[i]) / ff[i]).abs() < 1e-4, "mode {i}: {} vs {}", fc[i], ff[i]);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(build_scole_fem(&cfg(3)).is_err());
        assert!(build_scole_fem(&ScoleConfig { ei: Profile::Constant(-1.0), ..cfg(8) }).is_err());
        assert!(build_scole_fem(&ScoleConfig { tip_mass: 0.0, ..cfg(8) }).is_err());
    }
}
