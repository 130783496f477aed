//! Initial states built from modal amplitudes and caller-supplied phases.
//!
//! Phases come from the caller so this crate needs no random source; the CLI
//! draws them from a seeded ChaCha stream.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::DampedSystem;
use crate::vecops;
use crate::{Error, Result};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

/// Unit-norm state with amplitude `amplitudes[j]` and phase `phases[j]` in rotation block `j`.
pub fn modal_data(system: &DampedSystem, amplitudes: &[f64], phases: &[f64]) -> Result<Vec<f64>> {
    let blocks = system.dim() / 2;
    if amplitudes.len() != blocks {
        return Err(Error::DimensionMismatch { expected: blocks, got: amplitudes.len() });
    }
    if phases.len() != blocks {
        return Err(Error::DimensionMismatch { expected: blocks, got: phases.len() });
    }
    let mut z = vec![0.0; system.dim()];
    for (j, (a, p)) in amplitudes.iter().zip(phases).enumerate() {
        z[2 * j] = a * p.cos();
        z[2 * j + 1] = a * p.sin();
    }
    let n = vecops::norm(&z);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidConfig("initial amplitudes vanish".into()));
    }
    z.iter_mut().for_each(|v| *v /= n);
    system.from_modal(&z)
}

/// Amplitudes `(j + 1)^-exponent` by block index.
pub fn smooth_amplitudes(blocks: usize, exponent: f64) -> Vec<f64> {
    (1..=blocks).map(|n| (n as f64).powf(-exponent)).collect()
}

/// Amplitudes whose tail energy above block `j` is `w_j^-2`:
/// `c_j^2 = w_j^-2 - w_{j+1}^-2`, with the last block taking `w_N^-2`.
///
/// This is the borderline of the graph-norm domain: `sum c_j^2 w_j^2` grows
/// like a logarithm of the truncation, so the state sits in `D(A)` for every
/// finite truncation but its high-frequency content is as heavy as the domain
/// allows. Rate experiments need it; lighter tails let the fitted exponent
/// drift above the worst-case rate.
pub fn critical_amplitudes(block_frequencies: &[f64]) -> Vec<f64> {
    let n = block_frequencies.len();
    (0..n)
        .map(|j| {
            let a = block_frequencies[j].powi(-2);
            let b = if j + 1 < n { block_frequencies[j + 1].powi(-2) } else { 0.0 };
            (a - b).max(0.0).sqrt()
        })
        .collect()
}

pub fn critical_data(system: &DampedSystem, phases: &[f64]) -> Result<Vec<f64>> {
    let eig = system.eigen_data().ok_or(Error::MissingEigenData)?;
    modal_data(system, &critical_amplitudes(eig.block_frequencies()), phases)
}

pub fn smooth_data(system: &DampedSystem, exponent: f64, phases: &[f64]) -> Result<Vec<f64>> {
    modal_data(system, &smooth_amplitudes(system.dim() / 2, exponent), phases)
}
