//! Energy-coordinate realizations of damped skew systems.
//!
//! A [`DampedSystem`] holds a real skew generator `A`, an input map `B` and,
//! when available, a real orthogonal basis in which `A` is a direct sum of
//! rotation blocks `((0, w), (-w, 0))`. That basis ("modal frame") is what the
//! integrator and the Woodbury resolvent run on.

mod multiplier;
mod profile;
mod scole;
mod wave;

pub use multiplier::{check_multiplier_condition, MultiplierConfig, MultiplierReport};
pub use profile::Profile;
pub use scole::{build_scole_fem, ScoleConfig};
pub use wave::{build_wave_modal, sine_coefficients, WaveModelConfig};

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::vecops;
use crate::{Error, Result};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

const SKEW_TOL: f64 = 1e-12;

/// Storage of the skew generator.
#[derive(Debug, Clone)]
pub enum Generator {
    /// Block-diagonal rotation form; block `j` acts on slots `(2j, 2j + 1)`.
    Modal {
        frequencies: Vec<f64>,
    },
    Dense(DMatrix<f64>),
}

/// Spectral factorization of a skew generator.
///
/// Eigenvalues are `i s_k` with `s_k` listed per block as `(+w_j, -w_j)`. The
/// eigenvector for `+w_j` is `(v_{2j} + i v_{2j+1}) / sqrt(2)` where `v` are the
/// columns of the real modal basis; the one for `-w_j` is its conjugate.
#[derive(Debug, Clone)]
pub struct EigenData {
    block_frequencies: Vec<f64>,
    /// `None` when the state coordinates already are modal.
    basis: Option<DMatrix<f64>>,
    /// `B* e_k`, `input_dim` entries per eigenvalue.
    input_values: Vec<Complex64>,
    input_dim: usize,
}

impl EigenData {
    /// Factorize a dense skew matrix through its real Schur form.
    ///
    /// Zero eigenvalues are rejected; every model here has a trivial kernel.
    pub fn from_skew_matrix(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let n = a.nrows();
        if !n.is_multiple_of(2) {
            return Err(Error::Unsupported("odd-dimensional skew generator has a zero eigenvalue"));
        }
        let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-15, 100_000)
            .ok_or(Error::EigenSolver("real Schur iteration did not converge"))?;
        let (mut q, t) = schur.unpack();
        let scale = a.norm().max(1e-300);
        let mut blocks = Vec::with_capacity(n / 2);
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)].abs() > 1e-13 * scale {
                let mut w = 0.5 * (t[(i, i + 1)] - t[(i + 1, i)]);
                if w < 0.0 {
                    w = -w;
                    for r in 0..n {
                        q[(r, i + 1)] = -q[(r, i + 1)];
                    }
                }
                blocks.push((w, i));
                i += 2;
            } else {
                return Err(Error::Unsupported("skew generator has a zero eigenvalue"));
            }
        }
        blocks.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut basis = DMatrix::zeros(n, n);
        let mut freqs = Vec::with_capacity(blocks.len());
        for (j, (w, col)) in blocks.iter().enumerate() {
            basis.set_column(2 * j, &q.column(*col));
            basis.set_column(2 * j + 1, &q.column(col + 1));
            freqs.push(*w);
        }
        Ok((freqs, basis))
    }

    pub fn block_frequencies(&self) -> &[f64] {
        &self.block_frequencies
    }

    /// Signed eigenfrequencies `s_k`, two per block.
    pub fn frequencies(&self) -> Vec<f64> {
        self.block_frequencies.iter().flat_map(|w| [*w, -*w]).collect()
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    pub fn len(&self) -> usize {
        2 * self.block_frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_frequencies.is_empty()
    }

    /// `B* e_k` for eigenvalue index `k`.
    pub fn input_value(&self, k: usize) -> &[Complex64] {
        &self.input_values[k * self.input_dim..(k + 1) * self.input_dim]
    }

    pub fn input_value_norm(&self, k: usize) -> f64 {
        self.input_value(k).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Complex unit eigenvector `e_k` in state coordinates.
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        let j = k / 2;
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let r = core::f64::consts::FRAC_1_SQRT_2;
        match &self.basis {
            Some(v) => {
                (0..v.nrows()).map(|row| Complex64::new(r * v[(row, 2 * j)], sign * r * v[(row, 2 * j + 1)])).collect()
            }
            None => {
                let mut e = alloc::vec![Complex64::new(0.0, 0.0); self.len()];
                e[2 * j] = Complex64::new(r, 0.0);
                e[2 * j + 1] = Complex64::new(0.0, sign * r);
                e
            }
        }
    }
}

/// Input map expressed in the modal frame plus its Gram matrix.
#[derive(Debug, Clone)]
pub(crate) struct ModalFrame {
    /// `V^T B`, row-major `dim x input_dim`.
    pub input: Vec<f64>,
    /// `B^T B`, row-major `input_dim x input_dim`.
    pub gram: [f64; 4],
    pub gram_inv: [f64; 4],
    pub damped: bool,
}

/// Finite-dimensional model `x' = A x - B phi(B* x)` in energy coordinates.
#[derive(Debug, Clone)]
pub struct DampedSystem {
    dim: usize,
    input_dim: usize,
    generator: Generator,
    input_map: DMatrix<f64>,
    eigen_data: Option<EigenData>,
    frame: Option<ModalFrame>,
    label: String,
}

impl DampedSystem {
    /// Modal system with rotation frequencies `frequencies` (one block each).
    pub fn modal(frequencies: Vec<f64>, input_map: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        let dim = 2 * frequencies.len();
        if frequencies.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidConfig("modal frequencies must be positive and finite".into()));
        }
        let eig = EigenData {
            block_frequencies: frequencies.clone(),
            basis: None,
            input_values: Vec::new(),
            input_dim: input_map.ncols(),
        };
        Self::assemble(dim, Generator::Modal { frequencies }, input_map, Some(eig), label.into())
    }

    /// Dense skew generator without a spectral factorization.
    pub fn dense(generator: DMatrix<f64>, input_map: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        let dim = generator.nrows();
        if generator.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: generator.ncols() });
        }
        Self::assemble(dim, Generator::Dense(generator), input_map, None, label.into())
    }

    /// Dense generator together with a real modal basis `V` satisfying
    /// `V^T A V = blockdiag((0, w_j), (-w_j, 0))`.
    pub fn dense_factorized(
        generator: DMatrix<f64>,
        input_map: DMatrix<f64>,
        block_frequencies: Vec<f64>,
        basis: DMatrix<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let sys = Self::dense(generator, input_map, label)?;
        sys.with_factorization(block_frequencies, basis)
    }

    /// Attach a factorization computed from the real Schur form of `A`.
    pub fn factorize(self) -> Result<Self> {
        let (freqs, basis) = EigenData::from_skew_matrix(&self.generator_matrix())?;
        self.with_factorization(freqs, basis)
    }

    fn with_factorization(self, block_frequencies: Vec<f64>, basis: DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != self.dim || basis.ncols() != self.dim || 2 * block_frequencies.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: basis.ncols() });
        }
        let eig =
            EigenData { block_frequencies, basis: Some(basis), input_values: Vec::new(), input_dim: self.input_dim };
        Self::assemble(self.dim, self.generator, self.input_map, Some(eig), self.label)
    }

    fn assemble(
        dim: usize,
        generator: Generator,
        input_map: DMatrix<f64>,
        eigen_data: Option<EigenData>,
        label: String,
    ) -> Result<Self> {
        let input_dim = input_map.ncols();
        if input_map.nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: input_map.nrows() });
        }
        if !(1..=2).contains(&input_dim) {
            return Err(Error::InvalidConfig(alloc::format!("input dimension {input_dim} not in {{1, 2}}")));
        }
        if input_map.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("input map has non-finite entries".into()));
        }
        if let Generator::Dense(a) = &generator {
            let asym = (a + a.transpose()).norm();
            let scale = a.norm();
            if asym > SKEW_TOL * scale.max(1e-300) {
                return Err(Error::NotSkew(alloc::format!("|A + A^T| / |A| = {:e}", asym / scale)));
            }
        }
        let gram_m = input_map.transpose() * &input_map;
        let damped = gram_m.iter().any(|v| *v != 0.0);
        let mut gram = [0.0; 4];
        let mut gram_inv = [0.0; 4];
        for r in 0..input_dim {
            for c in 0..input_dim {
                gram[r * input_dim + c] = gram_m[(r, c)];
            }
        }
        if damped {
            // columns must be independent so that B*B is SPD
            let chol = nalgebra::Cholesky::new(gram_m.clone())
                .ok_or_else(|| Error::InvalidConfig("input map columns are linearly dependent".into()))?;
            let inv = chol.inverse();
            let eigs = nalgebra::SymmetricEigen::new(gram_m).eigenvalues;
            let (lo, hi) = eigs.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), e| (l.min(*e), h.max(*e)));
            if lo <= 1e-14 * hi {
                return Err(Error::InvalidConfig("input map columns are linearly dependent".into()));
            }
            for r in 0..input_dim {
                for c in 0..input_dim {
                    gram_inv[r * input_dim + c] = inv[(r, c)];
                }
            }
        }

        let mut sys = DampedSystem { dim, input_dim, generator, input_map, eigen_data: None, frame: None, label };
        if let Some(mut eig) = eigen_data {
            let modal_input = match &eig.basis {
                Some(v) => v.transpose() * &sys.input_map,
                None => sys.input_map.clone(),
            };
            let r = core::f64::consts::FRAC_1_SQRT_2;
            let mut values = Vec::with_capacity(dim * input_dim);
            for j in 0..eig.block_frequencies.len() {
                for sign in [1.0, -1.0] {
                    for c in 0..input_dim {
                        values
                            .push(Complex64::new(r * modal_input[(2 * j, c)], sign * r * modal_input[(2 * j + 1, c)]));
                    }
                }
            }
            eig.input_values = values;
            let mut input = Vec::with_capacity(dim * input_dim);
            for row in 0..dim {
                for c in 0..input_dim {
                    input.push(modal_input[(row, c)]);
                }
            }
            sys.frame = Some(ModalFrame { input, gram, gram_inv, damped });
            sys.eigen_data = Some(eig);
        } else {
            sys.frame = None;
        }
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn input_map(&self) -> &DMatrix<f64> {
        &self.input_map
    }

    pub fn eigen_data(&self) -> Option<&EigenData> {
        self.eigen_data.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub(crate) fn frame(&self) -> Option<&ModalFrame> {
        self.frame.as_ref()
    }

    /// Same generator with `B = 0`.
    pub fn undamped(&self) -> Self {
        let mut s = self.clone();
        s.input_map.fill(0.0);
        if let Some(f) = s.frame.as_mut() {
            f.input.iter_mut().for_each(|v| *v = 0.0);
            f.gram = [0.0; 4];
            f.gram_inv = [0.0; 4];
            f.damped = false;
        }
        if let Some(e) = s.eigen_data.as_mut() {
            e.input_values.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        s.label = alloc::format!("{} (undamped)", s.label);
        s
    }

    /// `B* B` as a dense `d x d` matrix.
    pub fn input_gram(&self) -> DMatrix<f64> {
        self.input_map.transpose() * &self.input_map
    }

    /// Dense copy of `A`.
    pub fn generator_matrix(&self) -> DMatrix<f64> {
        match &self.generator {
            Generator::Dense(a) => a.clone(),
            Generator::Modal { frequencies } => {
                let mut a = DMatrix::zeros(self.dim, self.dim);
                for (j, w) in frequencies.iter().enumerate() {
                    a[(2 * j, 2 * j + 1)] = *w;
                    a[(2 * j + 1, 2 * j)] = -*w;
                }
                a
            }
        }
    }

    /// `out = A x`.
    pub fn apply_generator(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(x.len())?;
        self.check_dim(out.len())?;
        match &self.generator {
            Generator::Modal { frequencies } => {
                for (j, w) in frequencies.iter().enumerate() {
                    out[2 * j] = w * x[2 * j + 1];
                    out[2 * j + 1] = -w * x[2 * j];
                }
            }
            Generator::Dense(a) => {
                let y = a * DVector::from_column_slice(x);
                out.copy_from_slice(y.as_slice());
            }
        }
        Ok(())
    }

    /// `B* x`.
    pub fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok((0..self.input_dim).map(|c| self.input_map.column(c).iter().zip(x).map(|(b, v)| b * v).sum()).collect())
    }

    /// `x += scale * B u`.
    pub fn add_input(&self, u: &[f64], scale: f64, x: &mut [f64]) -> Result<()> {
        self.check_dim(x.len())?;
        if u.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: u.len() });
        }
        for (c, uc) in u.iter().enumerate() {
            for (xi, b) in x.iter_mut().zip(self.input_map.column(c).iter()) {
                *xi += scale * b * uc;
            }
        }
        Ok(())
    }

    /// `|A + A^T|_F / |A|_F`.
    pub fn skewness_residual(&self) -> f64 {
        match &self.generator {
            Generator::Modal { .. } => 0.0,
            Generator::Dense(a) => (a + a.transpose()).norm() / a.norm().max(1e-300),
        }
    }

    /// State coordinates → modal coordinates `V^T x`.
    pub fn to_modal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let eig = self.eigen_data.as_ref().ok_or(Error::MissingEigenData)?;
        Ok(match &eig.basis {
            None => x.to_vec(),
            Some(v) => (v.transpose() * DVector::from_column_slice(x)).as_slice().to_vec(),
        })
    }

    /// Modal coordinates → state coordinates `V z`.
    pub fn from_modal(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z.len())?;
        let eig = self.eigen_data.as_ref().ok_or(Error::MissingEigenData)?;
        Ok(match &eig.basis {
            None => z.to_vec(),
            Some(v) => (v * DVector::from_column_slice(z)).as_slice().to_vec(),
        })
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, got })
        }
    }
}

/// Graph seminorm `|x| + |A x|` in energy coordinates.
pub fn graph_seminorm(system: &DampedSystem, state: &[f64]) -> Result<f64> {
    let mut ax = alloc::vec![0.0; system.dim()];
    system.apply_generator(state, &mut ax)?;
    Ok(vecops::norm(state) + vecops::norm(&ax))
}
