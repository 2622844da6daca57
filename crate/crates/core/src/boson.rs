//! Truncated bosonic modes on a product basis with a global excitation cutoff.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PcrError, Result};
use crate::linalg::{self, c, CMat, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Qubit,
    Coupler,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: String,
    pub kind: ModeKind,
    /// Per-mode level cap; occupations run over `0..local_dim`.
    pub local_dim: usize,
}

impl ModeSpec {
    pub fn qubit(label: impl Into<String>, local_dim: usize) -> Self {
        ModeSpec {
            label: label.into(),
            kind: ModeKind::Qubit,
            local_dim,
        }
    }

    pub fn coupler(label: impl Into<String>, local_dim: usize) -> Self {
        ModeSpec {
            label: label.into(),
            kind: ModeKind::Coupler,
            local_dim,
        }
    }
}

pub type Occupation = Vec<u8>;

/// Admissible occupation tuples, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductBasis {
    modes: Vec<ModeSpec>,
    max_total_excitation: usize,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl ProductBasis {
    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn max_total_excitation(&self) -> usize {
        self.max_total_excitation
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    fn check_mode(&self, mode_index: usize) -> Result<()> {
        if mode_index >= self.modes.len() {
            return Err(PcrError::config(format!(
                "mode index {mode_index} out of range for {} modes",
                self.modes.len()
            )));
        }
        Ok(())
    }
}

pub fn build_basis(modes: Vec<ModeSpec>, max_total_excitation: usize) -> Result<ProductBasis> {
    if modes.is_empty() {
        return Err(PcrError::config("basis needs at least one mode"));
    }
    for m in &modes {
        let min = match m.kind {
            ModeKind::Qubit => 2,
            ModeKind::Coupler => 1,
        };
        if m.local_dim < min {
            return Err(PcrError::config(format!(
                "mode {} has local_dim {} (minimum {min})",
                m.label, m.local_dim
            )));
        }
        if m.local_dim > 256 {
            return Err(PcrError::config(format!("mode {} local_dim too large", m.label)));
        }
    }

    let mut states = Vec::new();
    let mut current = vec![0u8; modes.len()];
    enumerate(&modes, max_total_excitation, 0, 0, &mut current, &mut states);
    let index = states
        .iter()
        .enumerate()
        .map(|(k, s)| (s.clone(), k))
        .collect();
    Ok(ProductBasis {
        modes,
        max_total_excitation,
        states,
        index,
    })
}

// Depth-first in increasing occupation order yields lexicographic order.
fn enumerate(
    modes: &[ModeSpec],
    budget: usize,
    pos: usize,
    used: usize,
    current: &mut Occupation,
    out: &mut Vec<Occupation>,
) {
    if pos == modes.len() {
        out.push(current.clone());
        return;
    }
    let cap = (modes[pos].local_dim - 1).min(budget - used);
    for n in 0..=cap {
        current[pos] = n as u8;
        enumerate(modes, budget, pos + 1, used + n, current, out);
    }
    current[pos] = 0;
}

/// A dense operator on a [`ProductBasis`].
///
/// Hamiltonians are stored in rad/s; unitaries and projectors are dimensionless.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub basis: Arc<ProductBasis>,
    pub matrix: CMat,
}

impl OperatorMatrix {
    pub fn new(basis: Arc<ProductBasis>, matrix: CMat) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(PcrError::config(format!(
                "operator is {}x{}, basis dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(OperatorMatrix { basis, matrix })
    }

    pub fn zeros(basis: Arc<ProductBasis>) -> Self {
        let d = basis.dim();
        OperatorMatrix {
            basis,
            matrix: CMat::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        OperatorMatrix {
            basis: self.basis.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }
}

pub fn lowering(basis: &Arc<ProductBasis>, mode_index: usize) -> Result<OperatorMatrix> {
    basis.check_mode(mode_index)?;
    let d = basis.dim();
    let mut m = CMat::zeros(d, d);
    for (src, state) in basis.states().iter().enumerate() {
        let n = state[mode_index];
        if n == 0 {
            continue;
        }
        let mut lowered = state.clone();
        lowered[mode_index] -= 1;
        if let Some(dst) = basis.index_of(&lowered) {
            m[(dst, src)] = c((n as f64).sqrt());
        }
    }
    Ok(OperatorMatrix {
        basis: basis.clone(),
        matrix: m,
    })
}

/// Conjugate transpose of [`lowering`]; excitations leaving the basis are dropped.
pub fn raising(basis: &Arc<ProductBasis>, mode_index: usize) -> Result<OperatorMatrix> {
    Ok(lowering(basis, mode_index)?.dagger())
}

/// A single creation or annihilation operator acting on one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Raise(usize),
    Lower(usize),
}

/// Matrix of an ordered product of ladder operators, evaluated exactly on
/// each basis state before truncation. The rightmost factor acts first.
///
/// Multiplying truncated single-mode matrices is not equivalent: a global
/// excitation cutoff drops intermediate states that a product like
/// b_x b_y† passes through, which loses exchange matrix elements at the edge
/// of the basis.
pub fn ladder_product(basis: &Arc<ProductBasis>, factors: &[Ladder]) -> Result<OperatorMatrix> {
    for f in factors {
        let (Ladder::Raise(m) | Ladder::Lower(m)) = *f;
        basis.check_mode(m)?;
    }
    let d = basis.dim();
    let mut out = CMat::zeros(d, d);
    'states: for (src, state) in basis.states().iter().enumerate() {
        let mut occ: Vec<i64> = state.iter().map(|&n| n as i64).collect();
        let mut amp = 1.0;
        for f in factors.iter().rev() {
            match *f {
                Ladder::Lower(m) => {
                    if occ[m] == 0 {
                        continue 'states;
                    }
                    amp *= (occ[m] as f64).sqrt();
                    occ[m] -= 1;
                }
                Ladder::Raise(m) => {
                    occ[m] += 1;
                    amp *= (occ[m] as f64).sqrt();
                }
            }
        }
        if occ.iter().any(|&n| n > u8::MAX as i64) {
            continue;
        }
        let target: Occupation = occ.iter().map(|&n| n as u8).collect();
        if let Some(dst) = basis.index_of(&target) {
            out[(dst, src)] += c(amp);
        }
    }
    Ok(OperatorMatrix {
        basis: basis.clone(),
        matrix: out,
    })
}

pub fn number_op(basis: &Arc<ProductBasis>, mode_index: usize) -> Result<OperatorMatrix> {
    basis.check_mode(mode_index)?;
    let d = basis.dim();
    let mut m = CMat::zeros(d, d);
    for (k, state) in basis.states().iter().enumerate() {
        m[(k, k)] = c(state[mode_index] as f64);
    }
    Ok(OperatorMatrix {
        basis: basis.clone(),
        matrix: m,
    })
}

/// Total excitation number Σ_j n̂_j over all modes.
pub fn total_number(basis: &Arc<ProductBasis>) -> OperatorMatrix {
    let d = basis.dim();
    let mut m = CMat::zeros(d, d);
    for (k, state) in basis.states().iter().enumerate() {
        m[(k, k)] = c(state.iter().map(|&n| n as f64).sum());
    }
    OperatorMatrix {
        basis: basis.clone(),
        matrix: m,
    }
}

pub type Mat2 = Matrix2<Complex64>;

pub fn pauli_i() -> Mat2 {
    Mat2::identity()
}

pub fn pauli_x() -> Mat2 {
    Mat2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

pub fn pauli_y() -> Mat2 {
    Mat2::new(c(0.0), -I, I, c(0.0))
}

pub fn pauli_z() -> Mat2 {
    Mat2::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

/// Indices of the computational states: every qubit in {0,1}, every coupler empty.
pub fn computational_indices(basis: &ProductBasis) -> Vec<usize> {
    basis
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            s.iter().zip(basis.modes()).all(|(&n, m)| match m.kind {
                ModeKind::Qubit => n <= 1,
                ModeKind::Coupler => n == 0,
            })
        })
        .map(|(k, _)| k)
        .collect()
}

/// Embeds a product of 2x2 factors (one per listed qubit mode, identity on the
/// others) into the computational subspace; zero outside it.
pub fn embed_product(
    basis: &Arc<ProductBasis>,
    factors: &[(usize, Mat2)],
) -> Result<OperatorMatrix> {
    let mut per_mode: Vec<Option<Mat2>> = vec![None; basis.modes().len()];
    for (mode, f) in factors {
        basis.check_mode(*mode)?;
        if basis.modes()[*mode].kind != ModeKind::Qubit {
            return Err(PcrError::config(format!(
                "2x2 factor supplied for coupler mode {}",
                basis.modes()[*mode].label
            )));
        }
        per_mode[*mode] = Some(*f);
    }
    let comp = computational_indices(basis);
    let d = basis.dim();
    let mut m = CMat::zeros(d, d);
    for &row in &comp {
        for &col in &comp {
            let (sr, sc) = (&basis.states()[row], &basis.states()[col]);
            let mut amp = c(1.0);
            for (j, f) in per_mode.iter().enumerate() {
                let (a, b) = (sr[j] as usize, sc[j] as usize);
                amp *= match f {
                    Some(f) => f[(a, b)],
                    None if a == b => c(1.0),
                    None => c(0.0),
                };
                if amp == c(0.0) {
                    break;
                }
            }
            m[(row, col)] = amp;
        }
    }
    Ok(OperatorMatrix {
        basis: basis.clone(),
        matrix: m,
    })
}

/// exp(−iHt) through the Hermitian eigendecomposition of H.
pub fn matrix_exponential(h: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix {
        basis: h.basis.clone(),
        matrix: propagator(&h.matrix, t)?,
    })
}

/// exp(−iHt) for a bare Hermitian matrix.
pub fn propagator(h: &CMat, t: f64) -> Result<CMat> {
    linalg::ensure_hermitian(h, 1e-10, "propagator")?;
    Ok(linalg::hermitian_function(h, |lambda| {
        Complex64::from_polar(1.0, -lambda * t)
    }))
}
