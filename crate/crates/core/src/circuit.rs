//! Circuit Hamiltonian of a three-transmon, two-coupler unit cell.
//!
//! Mode order is fixed: `(Q1, Q2, Q3, C12, C23)`. User-facing quantities are
//! in Hz; every matrix built here is in rad/s.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boson::{
    self, build_basis, ladder_product, lowering, number_op, Ladder, total_number, ModeKind, ModeSpec, OperatorMatrix,
    ProductBasis,
};
use crate::error::{PcrError, Result};
use crate::linalg::{c, CMat};
use num_complex::Complex64;

pub const QUBIT_MODES: [usize; 3] = [0, 1, 2];
pub const COUPLER_MODES: [usize; 2] = [3, 4];
pub const COUPLER_LABELS: [&str; 2] = ["C12", "C23"];

/// Smallest coupler or qubit detuning accepted in a perturbative denominator.
pub const MIN_DETUNING_HZ: f64 = 1e3;

/// Ratio g/|ω_C − ω_j| above which a dispersive-regime advisory is raised.
pub const DISPERSIVE_ADVISORY_RATIO: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    /// ω_j/2π for Q1, Q2, Q3 [Hz].
    pub qubit_freqs: [f64; 3],
    /// δ_j/2π [Hz], negative for transmons.
    pub anharmonicities: [f64; 3],
    /// ω_C/2π for C12, C23 [Hz].
    pub coupler_freqs: [f64; 2],
    /// g_{jC_r}/2π indexed `[coupler][qubit]` [Hz].
    pub qubit_coupler: [[f64; 3]; 2],
    /// g_ij/2π for the pairs (1,2), (2,3), (1,3) [Hz].
    pub direct: [f64; 3],
    pub t1: [f64; 3],
    pub t2: [f64; 3],
}

impl CircuitSpec {
    /// g_{jC_r} for qubit `j` (0-based) and coupler `r` (0 = C12, 1 = C23).
    pub fn g_qc(&self, qubit: usize, coupler: usize) -> f64 {
        self.qubit_coupler[coupler][qubit]
    }

    /// g_ij for a qubit pair (0-based, order irrelevant).
    pub fn g_qq(&self, a: usize, b: usize) -> f64 {
        match (a.min(b), a.max(b)) {
            (0, 1) => self.direct[0],
            (1, 2) => self.direct[1],
            (0, 2) => self.direct[2],
            _ => 0.0,
        }
    }

    /// Nearest-neighbour coupling pattern used throughout: each qubit couples
    /// to the couplers adjacent to it, distant pairs are zero.
    pub fn nearest_neighbour_couplings(g: f64) -> [[f64; 3]; 2] {
        [[g, g, 0.0], [0.0, g, g]]
    }

    /// Weakly coupled reference circuit (g/Δ ≤ 0.05) used for cross-checks
    /// between the closed-form and numerical coefficients.
    pub fn dispersive_test() -> Self {
        CircuitSpec {
            qubit_freqs: [4.80e9, 4.95e9, 5.16e9],
            anharmonicities: [-300e6; 3],
            coupler_freqs: [6.0e9, 6.0e9],
            qubit_coupler: CircuitSpec::nearest_neighbour_couplings(40e6),
            direct: [3e6, 3e6, 3e6],
            t1: [300e-6; 3],
            t2: [300e-6; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, f) in self.qubit_freqs.iter().chain(&self.coupler_freqs).enumerate() {
            if !(f.is_finite() && *f > 0.0) {
                return Err(PcrError::config(format!("frequency #{k} must be positive, got {f}")));
            }
        }
        for (j, d) in self.anharmonicities.iter().enumerate() {
            if !(d.is_finite() && d.abs() > 0.0) {
                return Err(PcrError::config(format!("anharmonicity of Q{} must be nonzero", j + 1)));
            }
        }
        Ok(())
    }

    /// Human-readable notes for qubit–coupler pairs outside the dispersive regime.
    pub fn dispersive_advisories(&self) -> Vec<String> {
        let mut notes = Vec::new();
        for r in 0..2 {
            for j in 0..3 {
                let g = self.g_qc(j, r);
                if g == 0.0 {
                    continue;
                }
                let ratio = g.abs() / (self.coupler_freqs[r] - self.qubit_freqs[j]).abs();
                if ratio > DISPERSIVE_ADVISORY_RATIO {
                    notes.push(format!(
                        "Q{}-{}: g/|Δ| = {ratio:.3} exceeds {DISPERSIVE_ADVISORY_RATIO}",
                        j + 1,
                        COUPLER_LABELS[r]
                    ));
                }
            }
        }
        notes
    }

    /// Couplers shared by two qubits.
    fn shared_couplers(&self, a: usize, b: usize) -> impl Iterator<Item = usize> + '_ {
        (0..2).filter(move |&r| self.g_qc(a, r) != 0.0 && self.g_qc(b, r) != 0.0)
    }

    /// Δ_{C_r j}(n) = ω_C − ω_j − n δ_j [Hz].
    pub fn coupler_detuning(&self, coupler: usize, qubit: usize, n: usize) -> f64 {
        self.coupler_freqs[coupler] - self.qubit_freqs[qubit] - n as f64 * self.anharmonicities[qubit]
    }
}

/// Drive on the three qubits, parametrized by a reference amplitude and
/// per-qubit scale factors (Ω_j = A_j Ω).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Ω/2π [Hz].
    pub reference_amplitude: f64,
    /// A_j, dimensionless.
    pub scale_factors: [f64; 3],
    /// φ_j [rad].
    pub phases: [f64; 3],
    /// ω_dr/2π [Hz].
    pub drive_freq: f64,
}

impl DriveSpec {
    pub fn new(reference_amplitude: f64, scale_factors: [f64; 3], drive_freq: f64) -> Self {
        DriveSpec {
            reference_amplitude,
            scale_factors,
            phases: [0.0; 3],
            drive_freq,
        }
    }

    pub fn off(drive_freq: f64) -> Self {
        DriveSpec::new(0.0, [0.0; 3], drive_freq)
    }

    /// Ω_j/2π [Hz].
    pub fn amplitudes(&self) -> [f64; 3] {
        self.scale_factors.map(|a| a * self.reference_amplitude)
    }
}

/// Basis with mode order (Q1, Q2, Q3, C12, C23) and a total-excitation cutoff.
pub fn cell_basis(max_total_excitation: usize) -> Result<Arc<ProductBasis>> {
    let dim = max_total_excitation + 1;
    let modes = vec![
        ModeSpec::qubit("Q1", dim.max(2)),
        ModeSpec::qubit("Q2", dim.max(2)),
        ModeSpec::qubit("Q3", dim.max(2)),
        ModeSpec::coupler("C12", dim),
        ModeSpec::coupler("C23", dim),
    ];
    Ok(Arc::new(build_basis(modes, max_total_excitation)?))
}

fn check_cell_basis(basis: &ProductBasis) -> Result<()> {
    let kinds: Vec<ModeKind> = basis.modes().iter().map(|m| m.kind).collect();
    let expected = [
        ModeKind::Qubit,
        ModeKind::Qubit,
        ModeKind::Qubit,
        ModeKind::Coupler,
        ModeKind::Coupler,
    ];
    if kinds != expected {
        return Err(PcrError::config(
            "basis must have modes ordered (Q1, Q2, Q3, C12, C23)",
        ));
    }
    Ok(())
}

struct Couplings<'a> {
    basis: &'a Arc<ProductBasis>,
}

impl Couplings<'_> {
    fn product(&self, factors: &[Ladder]) -> Result<CMat> {
        Ok(ladder_product(self.basis, factors)?.matrix)
    }

    /// (b_x − b_x†)(b_y − b_y†)
    fn minus_product(&self, x: usize, y: usize) -> Result<CMat> {
        use Ladder::{Lower as L, Raise as R};
        Ok(self.product(&[L(x), L(y)])? - self.product(&[L(x), R(y)])?
            - self.product(&[R(x), L(y)])?
            + self.product(&[R(x), R(y)])?)
    }

    /// b_x b_y† + b_x† b_y
    fn exchange(&self, x: usize, y: usize) -> Result<CMat> {
        use Ladder::{Lower as L, Raise as R};
        Ok(self.product(&[L(x), R(y)])? + self.product(&[R(x), L(y)])?)
    }
}

fn bare_diagonal(spec: &CircuitSpec, basis: &Arc<ProductBasis>, frame_hz: f64) -> Result<CMat> {
    let d = basis.dim();
    let mut h = CMat::zeros(d, d);
    for j in QUBIT_MODES {
        let n = number_op(basis, j)?.matrix;
        let w = TAU * (spec.qubit_freqs[j] - frame_hz);
        let delta = TAU * spec.anharmonicities[j];
        for k in 0..d {
            let nk = n[(k, k)].re;
            h[(k, k)] += c(w * nk + 0.5 * delta * nk * (nk - 1.0));
        }
    }
    for (r, mode) in COUPLER_MODES.into_iter().enumerate() {
        let n = number_op(basis, mode)?.matrix;
        let w = TAU * (spec.coupler_freqs[r] - frame_hz);
        for k in 0..d {
            h[(k, k)] += c(w * n[(k, k)].re);
        }
    }
    Ok(h)
}

/// Lab-frame circuit Hamiltonian with the full (counter-rotating) couplings.
///
/// Qubit–coupler terms are g_{jC}(b_j − b_j†)(a_r − a_r†). The direct
/// qubit–qubit term carries the opposite sign, −g_ij(b_i − b_i†)(b_j − b_j†),
/// so that its exchange part is +g_ij(b_i b_j† + h.c.) and the coupler-mediated
/// exchange partially cancels it, J = g_ij − g_iC g_jC/Δ. Each unordered pair
/// enters once.
pub fn build_system_hamiltonian(
    spec: &CircuitSpec,
    basis: &Arc<ProductBasis>,
) -> Result<OperatorMatrix> {
    spec.validate()?;
    check_cell_basis(basis)?;
    let lad = Couplings { basis };
    let mut h = bare_diagonal(spec, basis, 0.0)?;
    for r in 0..2 {
        for j in 0..3 {
            let g = spec.g_qc(j, r);
            if g != 0.0 {
                h += lad.minus_product(j, COUPLER_MODES[r])?.scale(TAU * g);
            }
        }
    }
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let g = spec.g_qq(a, b);
        if g != 0.0 {
            h -= lad.minus_product(a, b)?.scale(TAU * g);
        }
    }
    OperatorMatrix::new(basis.clone(), h)
}

/// Excitation-conserving part of [`build_system_hamiltonian`], written in a
/// frame rotating at `frame_hz` for every mode.
pub fn build_rwa_hamiltonian(
    spec: &CircuitSpec,
    basis: &Arc<ProductBasis>,
    frame_hz: f64,
) -> Result<OperatorMatrix> {
    spec.validate()?;
    check_cell_basis(basis)?;
    let lad = Couplings { basis };
    let mut h = bare_diagonal(spec, basis, frame_hz)?;
    for r in 0..2 {
        for j in 0..3 {
            let g = spec.g_qc(j, r);
            if g != 0.0 {
                // (b − b†)(a − a†) ⊃ −(b a† + b† a)
                h -= lad.exchange(j, COUPLER_MODES[r])?.scale(TAU * g);
            }
        }
    }
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let g = spec.g_qq(a, b);
        if g != 0.0 {
            h += lad.exchange(a, b)?.scale(TAU * g);
        }
    }
    OperatorMatrix::new(basis.clone(), h)
}

/// Lab-frame drive Σ_j Ω_j cos(ω_dr t + φ_j)(b_j + b_j†) at time `t` [s].
pub fn build_drive_hamiltonian(
    drive: &DriveSpec,
    basis: &Arc<ProductBasis>,
    t: f64,
) -> Result<OperatorMatrix> {
    check_cell_basis(basis)?;
    let d = basis.dim();
    let mut h = CMat::zeros(d, d);
    for (j, omega) in drive.amplitudes().into_iter().enumerate() {
        if omega == 0.0 {
            continue;
        }
        let b = lowering(basis, QUBIT_MODES[j])?.matrix;
        let x = &b + b.adjoint();
        let envelope = TAU * omega * (TAU * drive.drive_freq * t + drive.phases[j]).cos();
        h += x.scale(envelope);
    }
    OperatorMatrix::new(basis.clone(), h)
}

/// Time-independent Hamiltonian in the frame rotating at ω_dr (all modes),
/// with the rotating-wave approximation applied to couplings and drive.
pub fn rotating_frame_rwa(
    spec: &CircuitSpec,
    drive: &DriveSpec,
    basis: &Arc<ProductBasis>,
) -> Result<OperatorMatrix> {
    let mut h = build_rwa_hamiltonian(spec, basis, drive.drive_freq)?.matrix;
    for (j, omega) in drive.amplitudes().into_iter().enumerate() {
        if omega == 0.0 {
            continue;
        }
        let b = lowering(basis, QUBIT_MODES[j])?.matrix;
        let phase = Complex64::from_polar(1.0, drive.phases[j]);
        let term = b.map(|z| z * phase) + b.adjoint().map(|z| z * phase.conj());
        h += term.scale(0.5 * TAU * omega);
    }
    OperatorMatrix::new(basis.clone(), h)
}

/// Σ over all modes of n̂, the generator of the rotating frame.
pub fn frame_generator(basis: &Arc<ProductBasis>) -> OperatorMatrix {
    total_number(basis)
}

/// Perturbative dressed energies, detunings and effective couplings.
///
/// Qubit indices are 0-based (Q1 = 0). Excitation levels `n` in the
/// accessors correspond to the overline count in the usual notation
/// (0 = plain, 1 = single overline, 2 = double overline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedTable {
    /// Ē_j(n) for n = 0..=3 [Hz].
    pub energies: [[f64; 4]; 3],
    /// ω̄_j(n) = Ē_j(n+1) − Ē_j(n) for n = 0..=2 [Hz].
    pub transitions: [[f64; 3]; 3],
    /// Δ_{C_r j}(n) for n = 0..=2, indexed `[coupler][qubit][n]` [Hz].
    pub coupler_detunings: [[[f64; 3]; 3]; 2],
    /// J at (m_i, n_j) for each ordered pair, indexed `[i][j][m][n]` [Hz].
    couplings: [[[[f64; 3]; 3]; 3]; 3],
}

impl DressedTable {
    /// Effective exchange between qubit `i` at level `m` and qubit `j` at level `n`.
    pub fn coupling(&self, i: usize, m: usize, j: usize, n: usize) -> f64 {
        self.couplings[i][j][m][n]
    }

    /// Δ between dressed transitions ω̄_i(m) − ω̄_j(n) [Hz].
    pub fn detuning(&self, i: usize, m: usize, j: usize, n: usize) -> f64 {
        self.transitions[i][m] - self.transitions[j][n]
    }

    pub fn transition(&self, qubit: usize, n: usize) -> f64 {
        self.transitions[qubit][n]
    }
}

pub fn dressed_table(spec: &CircuitSpec) -> Result<DressedTable> {
    spec.validate()?;
    let mut coupler_detunings = [[[0.0; 3]; 3]; 2];
    for r in 0..2 {
        for j in 0..3 {
            if spec.g_qc(j, r) == 0.0 {
                continue;
            }
            for n in 0..3 {
                let d = spec.coupler_detuning(r, j, n);
                if d.abs() < MIN_DETUNING_HZ {
                    return Err(PcrError::Resonance(format!(
                        "Δ_{}{}({n}) = {d:.1} Hz",
                        COUPLER_LABELS[r],
                        j + 1
                    )));
                }
                coupler_detunings[r][j][n] = d;
            }
        }
    }

    let mut energies = [[0.0; 4]; 3];
    for j in 0..3 {
        for n in 0..4 {
            let nf = n as f64;
            let mut e = nf * spec.qubit_freqs[j] + 0.5 * nf * (nf - 1.0) * spec.anharmonicities[j];
            if n > 0 {
                for r in 0..2 {
                    let g = spec.g_qc(j, r);
                    if g != 0.0 {
                        e -= g * g * nf / coupler_detunings[r][j][n - 1];
                    }
                }
            }
            energies[j][n] = e;
        }
    }
    let mut transitions = [[0.0; 3]; 3];
    for j in 0..3 {
        for n in 0..3 {
            transitions[j][n] = energies[j][n + 1] - energies[j][n];
        }
    }

    let mut couplings = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            for m in 0..3 {
                for n in 0..3 {
                    let mut value = spec.g_qq(i, j);
                    for r in spec.shared_couplers(i, j) {
                        let (gi, gj) = (spec.g_qc(i, r), spec.g_qc(j, r));
                        value -= 0.5
                            * gi
                            * gj
                            * (1.0 / coupler_detunings[r][i][m] + 1.0 / coupler_detunings[r][j][n]);
                    }
                    couplings[i][j][m][n] = value;
                }
            }
        }
    }

    Ok(DressedTable {
        energies,
        transitions,
        coupler_detunings,
        couplings,
    })
}

/// Index of the eigenvector with the largest overlap onto `state`.
pub(crate) fn max_overlap_eigen(vectors: &CMat, state: usize) -> (usize, f64) {
    let mut best = (0, -1.0);
    for k in 0..vectors.ncols() {
        let w = vectors[(state, k)].norm_sqr();
        if w > best.1 {
            best = (k, w);
        }
    }
    best
}

/// Dressed 0→1 transition of `qubit` obtained from the exact spectrum of the
/// undriven excitation-conserving Hamiltonian (other qubits in |0⟩) [Hz].
pub fn numeric_dressed_transition(
    spec: &CircuitSpec,
    basis: &Arc<ProductBasis>,
    qubit: usize,
) -> Result<f64> {
    let h = build_rwa_hamiltonian(spec, basis, 0.0)?;
    let (values, vectors) = crate::linalg::eigh(&h.matrix);
    let ground = basis
        .index_of(&[0, 0, 0, 0, 0])
        .ok_or_else(|| PcrError::config("basis lacks the vacuum"))?;
    let mut occ = vec![0u8; 5];
    occ[qubit] = 1;
    let excited = basis
        .index_of(&occ)
        .ok_or_else(|| PcrError::config("basis lacks single excitations"))?;
    let (k0, _) = max_overlap_eigen(&vectors, ground);
    let (k1, _) = max_overlap_eigen(&vectors, excited);
    Ok((values[k1] - values[k0]) / TAU)
}

/// Used by tests and diagnostics: embeds (b + b†) for a qubit mode.
pub fn qubit_x_quadrature(basis: &Arc<ProductBasis>, qubit: usize) -> Result<CMat> {
    let b = boson::lowering(basis, QUBIT_MODES[qubit])?.matrix;
    Ok(&b + b.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, frobenius, hermiticity_defect};

    pub(crate) fn reference_cell() -> CircuitSpec {
        CircuitSpec {
            qubit_freqs: [4.80e9, 4.95e9, 4.87e9],
            anharmonicities: [-300e6; 3],
            coupler_freqs: [5.321e9, 5.725e9],
            qubit_coupler: CircuitSpec::nearest_neighbour_couplings(90e6),
            direct: [9e6; 3],
            t1: [300e-6; 3],
            t2: [300e-6; 3],
        }
    }

    fn uncoupled(spec: &CircuitSpec) -> CircuitSpec {
        CircuitSpec {
            qubit_coupler: [[0.0; 3]; 2],
            direct: [0.0; 3],
            ..spec.clone()
        }
    }

    #[test]
    fn decoupled_spectrum_is_exact() {
        let spec = uncoupled(&reference_cell());
        let basis = cell_basis(3).unwrap();
        let h = build_system_hamiltonian(&spec, &basis).unwrap();
        for (k, s) in basis.states().iter().enumerate() {
            let mut e = 0.0;
            for j in 0..3 {
                let n = s[j] as f64;
                e += n * spec.qubit_freqs[j] + 0.5 * n * (n - 1.0) * spec.anharmonicities[j];
            }
            e += s[3] as f64 * spec.coupler_freqs[0] + s[4] as f64 * spec.coupler_freqs[1];
            assert!((h.matrix[(k, k)].re - TAU * e).abs() < 1e-3);
        }
        assert!(frobenius(&(h.matrix.clone() - CMat::from_diagonal(&h.matrix.diagonal()))) == 0.0);
    }

    #[test]
    fn two_level_avoided_crossing_gap_is_twice_g() {
        // 2x2 oracle: degenerate qubits with exchange g split by 2g.
        let mut spec = uncoupled(&reference_cell());
        spec.direct = [9e6, 0.0, 0.0];
        spec.qubit_freqs = [4.9e9, 4.9e9, 4.5e9];
        let basis = cell_basis(1).unwrap();
        let h = build_system_hamiltonian(&spec, &basis).unwrap();
        let (vals, vecs) = eigh(&h.matrix);
        let e10 = basis.index_of(&[1, 0, 0, 0, 0]).unwrap();
        let e01 = basis.index_of(&[0, 1, 0, 0, 0]).unwrap();
        let mut pair: Vec<f64> = (0..vals.len())
            .filter(|&k| vecs[(e10, k)].norm_sqr() + vecs[(e01, k)].norm_sqr() > 0.5)
            .map(|k| vals[k] / TAU)
            .collect();
        pair.sort_by(f64::total_cmp);
        assert_eq!(pair.len(), 2);
        let gap = pair[1] - pair[0];
        assert!((gap - 18e6).abs() / 18e6 < 0.01, "gap {gap}");
    }

    #[test]
    fn hamiltonians_are_hermitian() {
        let spec = reference_cell();
        let basis = cell_basis(4).unwrap();
        assert_eq!(basis.dim(), 126);
        let drive = DriveSpec {
            reference_amplitude: 60e6,
            scale_factors: [0.3, -0.05, 1.2],
            phases: [0.3, 1.0, 2.0],
            drive_freq: 4.93e9,
        };
        for h in [
            build_system_hamiltonian(&spec, &basis).unwrap(),
            build_rwa_hamiltonian(&spec, &basis, 4.9e9).unwrap(),
            rotating_frame_rwa(&spec, &drive, &basis).unwrap(),
            build_drive_hamiltonian(&drive, &basis, 3.3e-9).unwrap(),
        ] {
            assert!(hermiticity_defect(&h.matrix) < 1e-12);
        }
    }

    #[test]
    fn rwa_conserves_excitation_number() {
        let spec = reference_cell();
        let basis = cell_basis(4).unwrap();
        let h = build_rwa_hamiltonian(&spec, &basis, 4.95e9).unwrap().matrix;
        let n = frame_generator(&basis).matrix;
        assert_eq!(frobenius(&(&h * &n - &n * &h)), 0.0);
    }

    #[test]
    fn drive_hamiltonian_examples() {
        let basis = cell_basis(2).unwrap();
        let off = DriveSpec::off(5e9);
        assert_eq!(frobenius(&build_drive_hamiltonian(&off, &basis, 1e-9).unwrap().matrix), 0.0);

        let drive = DriveSpec::new(50e6, [1.0, 0.5, 0.2], 5e9);
        let h0 = build_drive_hamiltonian(&drive, &basis, 0.0).unwrap().matrix;
        let mut expected = CMat::zeros(basis.dim(), basis.dim());
        for (j, a) in drive.amplitudes().into_iter().enumerate() {
            expected += qubit_x_quadrature(&basis, j).unwrap().scale(TAU * a);
        }
        assert!(frobenius(&(&h0 - &expected)) < 1e-6);

        let mut flipped = drive.clone();
        flipped.phases[0] = std::f64::consts::PI;
        let h1 = build_drive_hamiltonian(&flipped, &basis, 0.0).unwrap().matrix;
        let x1 = qubit_x_quadrature(&basis, 0).unwrap().scale(TAU * 50e6);
        assert!(frobenius(&(&h0 - &h1 - x1.scale(2.0))) < 1e-6);
    }

    #[test]
    fn rotating_frame_diagonal_without_drive_or_coupling() {
        let spec = uncoupled(&reference_cell());
        let basis = cell_basis(3).unwrap();
        let drive = DriveSpec::off(spec.qubit_freqs[1]);
        let h = rotating_frame_rwa(&spec, &drive, &basis).unwrap().matrix;
        let q2 = basis.index_of(&[0, 1, 0, 0, 0]).unwrap();
        assert!(h[(q2, q2)].norm() < 1e-6);
        for (k, s) in basis.states().iter().enumerate() {
            let mut e = 0.0;
            for j in 0..3 {
                let n = s[j] as f64;
                e += n * (spec.qubit_freqs[j] - drive.drive_freq)
                    + 0.5 * n * (n - 1.0) * spec.anharmonicities[j];
            }
            for r in 0..2 {
                e += s[3 + r] as f64 * (spec.coupler_freqs[r] - drive.drive_freq);
            }
            assert!((h[(k, k)].re - TAU * e).abs() < 1e-3);
        }
    }

    #[test]
    fn dressed_table_limits() {
        let bare = uncoupled(&reference_cell());
        let t = dressed_table(&bare).unwrap();
        for j in 0..3 {
            for n in 0..4 {
                let nf = n as f64;
                let exact = nf * bare.qubit_freqs[j] + 0.5 * nf * (nf - 1.0) * bare.anharmonicities[j];
                assert_eq!(t.energies[j][n], exact);
            }
        }

        let mut only_direct = reference_cell();
        only_direct.qubit_coupler = [[0.0; 3]; 2];
        let t = dressed_table(&only_direct).unwrap();
        assert_eq!(t.coupling(0, 0, 1, 0), 9e6);
        assert_eq!(t.coupling(0, 2, 1, 1), 9e6);

        // symmetric detunings reduce to g_ij − g²/Δ
        let mut sym = reference_cell();
        sym.qubit_freqs = [4.9e9, 4.9e9, 4.7e9];
        sym.anharmonicities = [-300e6; 3];
        let t = dressed_table(&sym).unwrap();
        let delta = sym.coupler_freqs[0] - 4.9e9;
        let expected = 9e6 - 90e6 * 90e6 / delta;
        assert!((t.coupling(0, 0, 1, 0) - expected).abs() < 1e-6);
        // Q1 and Q3 share no coupler
        assert_eq!(t.coupling(0, 1, 2, 2), 9e6);
    }

    #[test]
    fn resonant_coupler_is_rejected() {
        let mut spec = reference_cell();
        spec.coupler_freqs[0] = spec.qubit_freqs[0];
        assert!(matches!(dressed_table(&spec), Err(PcrError::Resonance(_))));
    }

    #[test]
    fn standard_couplings_outside_advisory_range() {
        let mut spec = reference_cell();
        spec.coupler_freqs = [5.45e9, 5.45e9];
        assert!(spec.dispersive_advisories().is_empty());
        spec.coupler_freqs = [5.1e9, 5.45e9];
        assert!(!spec.dispersive_advisories().is_empty());
    }
}
