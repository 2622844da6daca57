//! Nonperturbative effective Hamiltonian on the computational subspace.
//!
//! The rotating-frame Hamiltonian is diagonalized, eigenvectors are assigned
//! to the computational subspace by maximum overlap, and a symmetric (Löwdin)
//! orthonormalization gives the transformation closest to the identity.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boson::ProductBasis;
use crate::circuit::{cell_basis, numeric_dressed_transition, rotating_frame_rwa, CircuitSpec, DriveSpec};
use crate::error::{PcrError, Result};
use crate::linalg::{c, eigh, ensure_hermitian, inverse_sqrt, CMat};
use crate::pauli::{pauli_project, PauliCoefficients};

/// An assigned overlap below this makes the effective model invalid.
pub const HYBRIDIZATION_ERROR: f64 = 0.25;
/// An assigned overlap below this is reported as a warning.
pub const HYBRIDIZATION_WARNING: f64 = 0.5;

/// How the computational subspace is grouped before orthonormalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    /// One group per control state (n1, n3), each holding the two target
    /// levels. Off-resonant control flips are folded into the dressing, the
    /// resonant target dynamics stays in the effective Hamiltonian.
    #[default]
    ControlBlocks,
    /// All eight computational states as a single group, each assigned its
    /// own eigenvector.
    Computational,
}

/// Resulting eigenvector assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAssignment {
    /// Computational occupation (n1, n3, n2) in |Q1, Q3, Q2⟩ order for each of
    /// the eight slots, and the eigenvector index placed there.
    pub eigen_indices: Vec<([u8; 3], usize)>,
    /// Weight of the assigned eigenvector inside its group.
    pub overlaps: Vec<f64>,
    pub warnings: Vec<String>,
}

impl BlockAssignment {
    pub fn min_overlap(&self) -> f64 {
        self.overlaps.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Basis indices of |n1 n3 n2⟩ in the 8-dim computational order.
pub fn computational_states(basis: &ProductBasis) -> Result<[usize; 8]> {
    let mut out = [0; 8];
    for (k, slot) in out.iter_mut().enumerate() {
        let (n1, n3, n2) = ((k >> 2) & 1, (k >> 1) & 1, k & 1);
        let mut occ = vec![0u8; basis.modes().len()];
        occ[0] = n1 as u8;
        occ[1] = n2 as u8;
        occ[2] = n3 as u8;
        *slot = basis
            .index_of(&occ)
            .ok_or_else(|| PcrError::config("basis lacks a computational state"))?;
    }
    Ok(out)
}

fn occupation_label(k: usize) -> [u8; 3] {
    [((k >> 2) & 1) as u8, ((k >> 1) & 1) as u8, (k & 1) as u8]
}

/// Greedy, globally ordered assignment of eigenvectors to groups of
/// computational slots. Returns per group the eigen indices and weights.
fn assign(
    vectors: &CMat,
    comp: &[usize; 8],
    groups: &[Vec<usize>],
) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let n = vectors.ncols();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * groups.len());
    for (g, slots) in groups.iter().enumerate() {
        for k in 0..n {
            let w: f64 = slots.iter().map(|&s| vectors[(comp[s], k)].norm_sqr()).sum();
            candidates.push((w, k, g));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut used = vec![false; n];
    let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
    let mut weights: Vec<Vec<f64>> = vec![Vec::new(); groups.len()];
    let mut remaining: usize = groups.iter().map(Vec::len).sum();
    for (w, k, g) in candidates {
        if remaining == 0 {
            break;
        }
        if used[k] || chosen[g].len() == groups[g].len() {
            continue;
        }
        used[k] = true;
        chosen[g].push(k);
        weights[g].push(w);
        remaining -= 1;
    }
    // Within a two-slot group, pair each eigenvector with the slot it
    // overlaps most; the Löwdin transform itself does not depend on this.
    for g in 0..groups.len() {
        if groups[g].len() == 2 {
            let ov = |s: usize, k: usize| vectors[(comp[groups[g][s]], chosen[g][k])].norm_sqr();
            if ov(0, 1) + ov(1, 0) > ov(0, 0) + ov(1, 1) {
                chosen[g].swap(0, 1);
                weights[g].swap(0, 1);
            }
        }
    }
    (chosen, weights)
}

fn groups_for(partition: Partition) -> Vec<Vec<usize>> {
    match partition {
        Partition::ControlBlocks => (0..4).map(|b| vec![2 * b, 2 * b + 1]).collect(),
        Partition::Computational => (0..8).map(|s| vec![s]).collect(),
    }
}

/// Effective 8x8 Hamiltonian (rad/s, |Q1, Q3, Q2⟩ order) and the assignment.
pub fn block_diagonalize(
    h_rot: &CMat,
    basis: &Arc<ProductBasis>,
    partition: Partition,
) -> Result<(CMat, BlockAssignment)> {
    ensure_hermitian(h_rot, 1e-12, "rotating-frame Hamiltonian")?;
    if h_rot.nrows() != basis.dim() {
        return Err(PcrError::config("Hamiltonian and basis dimensions differ"));
    }
    let comp = computational_states(basis)?;
    let (values, vectors) = eigh(h_rot);

    let groups = groups_for(partition);
    let (chosen, weights) = assign(&vectors, &comp, &groups);

    let mut eigen_indices = Vec::with_capacity(8);
    let mut overlaps = Vec::with_capacity(8);
    let mut warnings = Vec::new();
    let mut h_eff = CMat::zeros(8, 8);

    // Löwdin runs jointly over all slots when each slot is its own group.
    let lowdin_sets: Vec<(Vec<usize>, Vec<usize>)> = match partition {
        Partition::ControlBlocks => groups.iter().cloned().zip(chosen.iter().cloned()).collect(),
        Partition::Computational => vec![((0..8).collect(), chosen.iter().flatten().copied().collect())],
    };

    for (g, slots) in groups.iter().enumerate() {
        for (i, &s) in slots.iter().enumerate() {
            let w = weights[g][i];
            let label = occupation_label(s);
            if w < HYBRIDIZATION_ERROR {
                return Err(PcrError::Hybridization {
                    state: format!("|{}{}{}⟩", label[0], label[1], label[2]),
                    overlap: w,
                    threshold: HYBRIDIZATION_ERROR,
                });
            }
            if w < HYBRIDIZATION_WARNING {
                warnings.push(format!(
                    "|{}{}{}⟩ assigned with overlap {w:.3}",
                    label[0], label[1], label[2]
                ));
            }
            eigen_indices.push((label, chosen[g][i]));
            overlaps.push(w);
        }
    }

    for (slots, eig) in lowdin_sets {
        let m = slots.len();
        let a = CMat::from_fn(m, m, |i, j| vectors[(comp[slots[i]], eig[j])]);
        let w = &a * inverse_sqrt(&(a.adjoint() * &a))?;
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(m, eig.iter().map(|&k| c(values[k]))));
        let block = &w * d * w.adjoint();
        for i in 0..m {
            for j in 0..m {
                h_eff[(slots[i], slots[j])] = block[(i, j)];
            }
        }
    }
    let h_eff = (&h_eff + h_eff.adjoint()).scale(0.5);

    Ok((
        h_eff,
        BlockAssignment {
            eigen_indices,
            overlaps,
            warnings,
        },
    ))
}

/// How the common drive frequency is chosen for a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "hz")]
pub enum DriveFrequency {
    /// Exact 0→1 transition of Q2 in the undriven spectrum.
    #[default]
    NumericDressed,
    /// Perturbative dressed transition ω̄_2(0).
    PerturbativeDressed,
    Fixed(f64),
}

impl DriveFrequency {
    pub fn resolve(self, spec: &CircuitSpec, basis: &Arc<ProductBasis>) -> Result<f64> {
        match self {
            DriveFrequency::NumericDressed => numeric_dressed_transition(spec, basis, 1),
            DriveFrequency::PerturbativeDressed => {
                Ok(crate::circuit::dressed_table(spec)?.transition(1, 0))
            }
            DriveFrequency::Fixed(hz) => Ok(hz),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOptions {
    pub cutoff: usize,
    pub partition: Partition,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            cutoff: 4,
            partition: Partition::ControlBlocks,
        }
    }
}

/// Full extraction result, kept for diagnostics and dumps.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub coefficients: PauliCoefficients,
    pub h_eff: CMat,
    pub assignment: BlockAssignment,
}

pub fn extract(spec: &CircuitSpec, drive: &DriveSpec, options: &ExtractionOptions) -> Result<Extraction> {
    let basis = cell_basis(options.cutoff)?;
    extract_in(spec, drive, &basis, options.partition)
}

pub fn extract_in(
    spec: &CircuitSpec,
    drive: &DriveSpec,
    basis: &Arc<ProductBasis>,
    partition: Partition,
) -> Result<Extraction> {
    let h_rot = rotating_frame_rwa(spec, drive, basis)?;
    let (h_eff, assignment) = block_diagonalize(&h_rot.matrix, basis, partition)?;
    let coefficients = pauli_project(&h_eff)?;
    Ok(Extraction {
        coefficients,
        h_eff,
        assignment,
    })
}

/// Pauli coefficients at the drive frequency carried by `drive`.
pub fn coefficients_for(spec: &CircuitSpec, drive: &DriveSpec, cutoff: usize) -> Result<PauliCoefficients> {
    Ok(extract(
        spec,
        drive,
        &ExtractionOptions {
            cutoff,
            ..Default::default()
        },
    )?
    .coefficients)
}

/// One row per word, for JSON/CSV dumps.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoefficientRow {
    pub word: String,
    pub mhz: f64,
    pub in_ansatz: bool,
}

pub fn coefficient_rows(coeffs: &PauliCoefficients) -> Vec<CoefficientRow> {
    coeffs
        .iter()
        .map(|(w, v)| CoefficientRow {
            word: w.to_string(),
            mhz: v * 1e-6,
            in_ansatz: w.in_ansatz(),
        })
        .collect()
}

/// Coefficient dump with the parameters that produced it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoefficientDump {
    pub spec: CircuitSpec,
    pub drive: DriveSpec,
    pub cutoff: usize,
    pub min_overlap: f64,
    pub warnings: Vec<String>,
    pub coefficients: BTreeMap<String, f64>,
}

impl CoefficientDump {
    pub fn new(spec: &CircuitSpec, drive: &DriveSpec, cutoff: usize, ex: &Extraction) -> Self {
        CoefficientDump {
            spec: spec.clone(),
            drive: drive.clone(),
            cutoff,
            min_overlap: ex.assignment.min_overlap(),
            warnings: ex.assignment.warnings.clone(),
            coefficients: ex.coefficients.to_mhz_map(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::cell_basis;
    use crate::linalg::frobenius;
    use crate::pauli::word;

    fn dispersive_spec() -> CircuitSpec {
        CircuitSpec::dispersive_test()
    }

    #[test]
    fn block_diagonal_input_is_returned_unchanged() {
        let basis = cell_basis(3).unwrap();
        let comp = computational_states(&basis).unwrap();
        let d = basis.dim();
        let mut h = CMat::zeros(d, d);
        for k in 0..d {
            h[(k, k)] = c(1e9 * (k as f64 + 20.0));
        }
        // computational block with a target-flip element inside each control block
        let mut block = CMat::zeros(8, 8);
        for k in 0..8 {
            block[(k, k)] = c(1e6 * k as f64);
        }
        block[(0, 1)] = c(2e5);
        block[(1, 0)] = c(2e5);
        for i in 0..8 {
            for j in 0..8 {
                h[(comp[i], comp[j])] = block[(i, j)];
            }
        }
        for p in [Partition::ControlBlocks, Partition::Computational] {
            let (h_eff, a) = block_diagonalize(&h, &basis, p).unwrap();
            assert!(frobenius(&(&h_eff - &block)) < 1e-6 * frobenius(&block), "{p:?}");
            assert!(a.warnings.is_empty());
        }
    }

    #[test]
    fn undriven_dispersive_zz_matches_eigenvalue_combination() {
        let spec = dispersive_spec();
        let basis = cell_basis(4).unwrap();
        let drive = DriveSpec::off(spec.qubit_freqs[1]);
        let h_rot = rotating_frame_rwa(&spec, &drive, &basis).unwrap();
        let (h_eff, assignment) = block_diagonalize(&h_rot.matrix, &basis, Partition::ControlBlocks).unwrap();
        let (values, _) = eigh(&h_rot.matrix);
        let energy = |k: usize| {
            let (_, e) = assignment.eigen_indices[k];
            values[e]
        };
        // slot order |n1 n3 n2⟩: 000 = 0, 100 = 4, 001 = 1, 101 = 5 → Q1–Q2 pair
        let zz_raw = energy(5) - energy(4) - energy(1) + energy(0);
        let zz_eff = h_eff[(5, 5)].re - h_eff[(4, 4)].re - h_eff[(1, 1)].re + h_eff[(0, 0)].re;
        assert!((zz_raw - zz_eff).abs() / std::f64::consts::TAU < 1.0, "{zz_raw} {zz_eff} {assignment:?}");
        let coeffs = pauli_project(&h_eff).unwrap();
        for (w, v) in coeffs.iter() {
            if w.is_drive_induced() || !w.in_ansatz() {
                assert!(v.abs() < 1.0, "{w} = {v}");
            }
        }
        assert!(coeffs.hz("ZIZ").abs() > 1e3);
    }

    #[test]
    fn spectrum_is_preserved() {
        let spec = dispersive_spec();
        let basis = cell_basis(3).unwrap();
        let mut drive = DriveSpec::new(20e6, [1.0, 0.05, -0.7], spec.qubit_freqs[1]);
        drive.phases = [0.0, std::f64::consts::PI, 0.0];
        let h_rot = rotating_frame_rwa(&spec, &drive, &basis).unwrap();
        let (values, _) = eigh(&h_rot.matrix);
        for p in [Partition::ControlBlocks, Partition::Computational] {
            let (h_eff, a) = block_diagonalize(&h_rot.matrix, &basis, p).unwrap();
            let (eff_values, _) = eigh(&h_eff);
            let mut assigned: Vec<f64> = a.eigen_indices.iter().map(|&(_, k)| values[k]).collect();
            assigned.sort_by(f64::total_cmp);
            for (x, y) in eff_values.iter().zip(&assigned) {
                assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn real_phases_give_no_y_terms() {
        let spec = dispersive_spec();
        let mut drive = DriveSpec::new(10e6, [1.0, 0.02, 0.8], spec.qubit_freqs[1]);
        drive.phases = [std::f64::consts::PI, 0.0, 0.0];
        let coeffs = coefficients_for(&spec, &drive, 3).unwrap();
        for (w, v) in coeffs.iter() {
            if w.is_y_type() {
                assert!(v.abs() < 1.0, "{w} = {v}");
            }
        }
        assert!(coeffs.hz("ZIX").abs() > 1e3);

        let off = DriveSpec::off(spec.qubit_freqs[1]);
        let coeffs = coefficients_for(&spec, &off, 3).unwrap();
        for (w, v) in coeffs.iter() {
            if w.is_drive_induced() {
                assert!(v.abs() < 1.0, "{w} = {v}");
            }
        }
        assert_eq!(coeffs.get(word("IIX")).abs() < 1.0, true);
    }

    #[test]
    fn spread_computational_state_is_a_hybridization_error() {
        // |000⟩ is spread evenly over five eigenvectors, best overlap 1/5.
        let basis = cell_basis(3).unwrap();
        let d = basis.dim();
        let comp = computational_states(&basis).unwrap();
        let mut h = CMat::zeros(d, d);
        for k in 0..d {
            h[(k, k)] = c(1e9 * (k as f64 + 1.0));
        }
        let others: Vec<usize> = (0..d).filter(|k| !comp.contains(k)).take(4).collect();
        let mut group = vec![comp[0]];
        group.extend(others);
        // Hermitian circulant with a complex hop: non-degenerate Fourier
        // eigenvectors of uniform weight.
        let hop = num_complex::Complex64::from_polar(1e7, 0.3);
        for a in 0..5 {
            h[(group[a], group[a])] = c(1e7);
            h[(group[a], group[(a + 1) % 5])] = hop;
            h[(group[(a + 1) % 5], group[a])] = hop.conj();
        }
        for p in [Partition::ControlBlocks, Partition::Computational] {
            let r = block_diagonalize(&h, &basis, p);
            assert!(matches!(r, Err(PcrError::Hybridization { .. })), "{p:?}");
        }
    }
}
