//! Ideal gates and gate targets.
//!
//! Unitaries act on the logical ordering |q1 q2 q3⟩ (index 4·q1 + 2·q2 + q3).
//! Logical (q1, q2, q3) sit on physical (Q1, Q3, Q2), so a logical word
//! Z1 Z2 X3 is the physical word "ZZX" and the matrices coincide.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PcrError, Result};
use crate::linalg::{c, hermitian_function, CMat, CVec, I};
use crate::pauli::{word, Pauli, PauliWord};

pub fn hadamard() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)])
}

pub fn s_gate() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), I])
}

/// Embeds a single-qubit gate on logical qubit `q` (0-based) of `n` qubits.
pub fn on_qubit(gate: &CMat, q: usize, n: usize) -> CMat {
    let mut out = CMat::identity(1, 1);
    for k in 0..n {
        let f = if k == q { gate.clone() } else { CMat::identity(2, 2) };
        out = out.kronecker(&f);
    }
    out
}

/// exp(−i θ/2 · W) = cos(θ/2) I − i sin(θ/2) W for any Pauli string W.
pub fn pauli_rotation(w: &CMat, theta: f64) -> CMat {
    let n = w.nrows();
    CMat::identity(n, n).scale((theta / 2.0).cos()) - w.map(|z| z * I * (theta / 2.0).sin())
}

pub fn u_zzx(theta: f64) -> CMat {
    pauli_rotation(&word("ZZX").matrix(), theta)
}

pub fn u_izx(theta: f64) -> CMat {
    pauli_rotation(&word("IZX").matrix(), theta)
}

/// Two-qubit exp(−i θ/2 · Z1 X2).
pub fn u_z1x2(theta: f64) -> CMat {
    let zx = Pauli::Z.matrix().kronecker(&Pauli::X.matrix());
    pauli_rotation(&zx, theta)
}

/// S3 H2 H1 U_ZZX(π/2) H1 H2.
pub fn ghz_sequence() -> CMat {
    let h1 = on_qubit(&hadamard(), 0, 3);
    let h2 = on_qubit(&hadamard(), 1, 3);
    let s3 = on_qubit(&s_gate(), 2, 3);
    &s3 * &h2 * &h1 * u_zzx(FRAC_PI_2) * &h1 * &h2
}

/// S2 H1 U_Z1X2(π/2) H1.
pub fn bell_sequence() -> CMat {
    let h1 = on_qubit(&hadamard(), 0, 2);
    let s2 = on_qubit(&s_gate(), 1, 2);
    &s2 * &h1 * u_z1x2(FRAC_PI_2) * &h1
}

pub fn ghz_state() -> CVec {
    let mut v = CVec::zeros(8);
    v[0] = c(std::f64::consts::FRAC_1_SQRT_2);
    v[7] = c(std::f64::consts::FRAC_1_SQRT_2);
    v
}

pub fn basis_state(k: usize, dim: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[k] = c(1.0);
    v
}

fn pauli_sum(terms: &[(&str, f64)]) -> CMat {
    let mut h = CMat::zeros(8, 8);
    for (w, coeff) in terms {
        h += word(w).matrix().scale(*coeff);
    }
    h
}

/// (π/8)[(IZI + ZII + IIX) + ZZX − (ZZI + IZX + ZIX + III)].
pub fn ccnot_hamiltonian() -> CMat {
    let p = FRAC_PI_8;
    pauli_sum(&[
        ("IZI", p),
        ("ZII", p),
        ("IIX", p),
        ("ZZX", p),
        ("ZZI", -p),
        ("IZX", -p),
        ("ZIX", -p),
        ("III", -p),
    ])
}

/// −(π/8)(I − Z1)(I − Z2)(I − X3) built as a matrix product.
pub fn ccnot_projector_form() -> CMat {
    let id = CMat::identity(2, 2);
    let a = &id - Pauli::Z.matrix();
    let b = &id - Pauli::Z.matrix();
    let x = &id - Pauli::X.matrix();
    a.kronecker(&b).kronecker(&x).scale(-FRAC_PI_8)
}

/// (π/8)[(IIX + ZZX) − (IZX + ZIX)].
pub fn itoffoli_hamiltonian() -> CMat {
    let p = FRAC_PI_8;
    pauli_sum(&[("IIX", p), ("ZZX", p), ("IZX", -p), ("ZIX", -p)])
}

/// −(π/4)(IZZ − ZZZ).
pub fn czz_hamiltonian() -> CMat {
    pauli_sum(&[("IZZ", -FRAC_PI_4), ("ZZZ", FRAC_PI_4)])
}

/// exp(−i H) of a Hermitian generator.
pub fn unitary_of(h: &CMat) -> CMat {
    hermitian_function(h, |x| Complex64::from_polar(1.0, -x))
}

/// m = 1 + (−1)^{q1+q2} − (−1)^{q1} − (−1)^{q2}, evaluated literally.
pub fn m_coefficient(q1: u8, q2: u8) -> i32 {
    let s = |k: u8| if k % 2 == 0 { 1 } else { -1 };
    1 + s(q1 + q2) - s(q1) - s(q2)
}

/// Phase e^{i q1 (−1)^{q2+q3} π/2} picked up by |q1 q2 q3⟩ under the CZZ gate.
pub fn czz_phase(q1: u8, q2: u8, q3: u8) -> Complex64 {
    let parity = if (q2 + q3) % 2 == 0 { 1.0 } else { -1.0 };
    Complex64::from_polar(1.0, q1 as f64 * parity * FRAC_PI_2)
}

/// S1† H3 U_IZX(π/2) U_ZZX(−π/2) H3, composed exactly as written.
pub fn czz_decomposition() -> CMat {
    let h3 = on_qubit(&hadamard(), 2, 3);
    let s1_dag = on_qubit(&s_gate().adjoint(), 0, 3);
    &s1_dag * &h3 * u_izx(FRAC_PI_2) * u_zzx(-FRAC_PI_2) * &h3
}

/// Ideal GHZ state evolved for `tau_p` under the static diagonal Hamiltonian
/// α_ZZI·ZZI + α_ZIZ·ZIZ + α_IZZ·IZZ + α_ZZZ·ZZZ (coefficients in Hz),
/// together with the angle φ of the corrective rotation exp(iφ Z1).
pub fn static_ghz_drift(alpha_zzz: f64, alpha_twobody: [f64; 3], tau_p: f64) -> (CVec, f64) {
    let tau = std::f64::consts::TAU;
    let h = pauli_sum(&[
        ("ZZI", tau * alpha_twobody[0]),
        ("ZIZ", tau * alpha_twobody[1]),
        ("IZZ", tau * alpha_twobody[2]),
        ("ZZZ", tau * alpha_zzz),
    ]);
    let psi = ghz_state();
    let mut out = psi.clone();
    for k in 0..8 {
        out[k] = psi[k] * Complex64::from_polar(1.0, -h[(k, k)].re * tau_p);
    }
    (out, tau * alpha_zzz * tau_p)
}

/// exp(iφ Z) on logical qubit 1.
pub fn z_correction(phi: f64) -> CMat {
    let z = CMat::from_row_slice(
        2,
        2,
        &[Complex64::from_polar(1.0, phi), c(0.0), c(0.0), Complex64::from_polar(1.0, -phi)],
    );
    on_qubit(&z, 0, 3)
}

/// |⟨a|b⟩|² for normalized states.
pub fn state_fidelity(a: &CVec, b: &CVec) -> f64 {
    a.dotc(b).norm_sqr()
}

/// (|Tr U†V|² + d)/(d(d+1)).
pub fn average_gate_fidelity(u: &CMat, v: &CMat) -> f64 {
    let d = u.nrows() as f64;
    let tr = (u.adjoint() * v).trace();
    (tr.norm_sqr() + d) / (d * (d + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetKind {
    #[serde(rename = "GHZ")]
    Ghz,
    #[serde(rename = "iToffoli")]
    IToffoli,
    /// iToffoli with the alternative sign pattern IIX = IZX = ZIX = −ZZX.
    #[serde(rename = "iToffoli-alt")]
    IToffoliAlt,
    #[serde(rename = "CCNOT")]
    Ccnot,
    #[serde(rename = "CZZ")]
    Czz,
}

impl TargetKind {
    pub const MAIN: [TargetKind; 4] = [TargetKind::Ghz, TargetKind::IToffoli, TargetKind::Ccnot, TargetKind::Czz];

    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Ghz => "GHZ",
            TargetKind::IToffoli => "iToffoli",
            TargetKind::IToffoliAlt => "iToffoli-alt",
            TargetKind::Ccnot => "CCNOT",
            TargetKind::Czz => "CZZ",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetKind {
    type Err = PcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ghz" => Ok(TargetKind::Ghz),
            "itoffoli" => Ok(TargetKind::IToffoli),
            "itoffoli-alt" => Ok(TargetKind::IToffoliAlt),
            "ccnot" | "toffoli" => Ok(TargetKind::Ccnot),
            "czz" => Ok(TargetKind::Czz),
            _ => Err(PcrError::config(format!("unknown target {s:?}"))),
        }
    }
}

/// A residual that vanishes when the coefficients realize the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Relation {
    /// α_word = value [Hz].
    Equals { word: PauliWord, value: f64 },
    /// α_word = sign · α_pivot.
    Tied { word: PauliWord, sign: f64, pivot: PauliWord },
}

impl Relation {
    /// Residual in Hz.
    pub fn residual(&self, alpha: impl Fn(PauliWord) -> f64) -> f64 {
        match *self {
            Relation::Equals { word, value } => alpha(word) - value,
            Relation::Tied { word, sign, pivot } => alpha(word) - sign * alpha(pivot),
        }
    }

    pub fn words(&self) -> Vec<PauliWord> {
        match *self {
            Relation::Equals { word, .. } => vec![word],
            Relation::Tied { word, pivot, .. } => vec![word, pivot],
        }
    }
}

/// Control-qubit single-Z words: frame and Stark terms removed by frame
/// tracking, never costed.
pub fn frame_words() -> [PauliWord; 3] {
    [word("III"), word("ZII"), word("IZI")]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTarget {
    pub kind: TargetKind,
    /// α_opt [Hz].
    pub alpha_opt: f64,
    pub relations: Vec<Relation>,
    pub unwanted: Vec<PauliWord>,
    /// Physical mode of logical qubit k: q1 → Q1, q2 → Q3, q3 → Q2.
    pub logical_to_physical: [usize; 3],
}

/// Default target interaction strength α_opt [Hz].
pub const ALPHA_OPT_HZ: f64 = 0.5e6;

impl GateTarget {
    pub fn new(kind: TargetKind) -> Self {
        GateTarget::with_alpha(kind, ALPHA_OPT_HZ)
    }

    pub fn with_alpha(kind: TargetKind, alpha_opt: f64) -> Self {
        let zzx = word("ZZX");
        let tied = |w: &str, sign: f64| Relation::Tied {
            word: word(w),
            sign,
            pivot: zzx,
        };
        let pivot = Relation::Equals {
            word: zzx,
            value: zzx_sign_of(kind) * alpha_opt,
        };
        let relations = match kind {
            TargetKind::Ghz => vec![pivot],
            TargetKind::IToffoli => vec![pivot, tied("IIX", 1.0), tied("ZIX", -1.0), tied("IZX", -1.0)],
            TargetKind::IToffoliAlt => vec![pivot, tied("IIX", -1.0), tied("ZIX", -1.0), tied("IZX", -1.0)],
            TargetKind::Ccnot => vec![
                pivot,
                tied("IIX", 1.0),
                tied("ZIX", -1.0),
                tied("IZX", -1.0),
                tied("ZZI", -1.0),
            ],
            TargetKind::Czz => vec![tied("IZX", -1.0), pivot],
        };
        let mut wanted: Vec<PauliWord> = relations.iter().flat_map(|r| r.words()).collect();
        wanted.extend(frame_words());
        let unwanted = PauliWord::ansatz()
            .into_iter()
            .filter(|w| !wanted.contains(w))
            .collect();
        GateTarget {
            kind,
            alpha_opt,
            relations,
            unwanted,
            logical_to_physical: [0, 2, 1],
        }
    }

    pub fn wanted_words(&self) -> Vec<PauliWord> {
        let mut out: Vec<PauliWord> = self.relations.iter().flat_map(|r| r.words()).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Check that a ±1 assignment satisfies every relation at α_ZZX = α_opt.
    pub fn is_consistent(&self) -> bool {
        let mut value = std::collections::BTreeMap::new();
        value.insert(word("ZZX"), self.zzx_sign() * self.alpha_opt);
        for r in &self.relations {
            if let Relation::Tied { word, sign, pivot } = r {
                if let Some(&p) = value.get(pivot) {
                    value.insert(*word, sign * p);
                }
            }
        }
        self.relations
            .iter()
            .all(|r| r.residual(|w| value.get(&w).copied().unwrap_or(0.0)).abs() < 1e-9)
            && self.unwanted.iter().all(|w| !self.wanted_words().contains(w))
    }

    /// Ideal unitary the protocol is compared against (logical ordering).
    pub fn ideal_unitary(&self) -> CMat {
        match self.kind {
            TargetKind::Ghz => ghz_sequence(),
            TargetKind::IToffoli => unitary_of(&itoffoli_hamiltonian()),
            TargetKind::IToffoliAlt => unitary_of(&pauli_sum(&[
                ("ZZX", FRAC_PI_8),
                ("IIX", -FRAC_PI_8),
                ("ZIX", -FRAC_PI_8),
                ("IZX", -FRAC_PI_8),
            ])),
            TargetKind::Ccnot => unitary_of(&ccnot_hamiltonian()),
            TargetKind::Czz => czz_decomposition(),
        }
    }

    /// Rotation angle θ of the ZZX factor exp(−iθ/2·ZZX) the pulse realizes.
    pub fn zzx_angle(&self) -> f64 {
        match self.kind {
            TargetKind::Ghz | TargetKind::Czz => FRAC_PI_2,
            TargetKind::IToffoli | TargetKind::IToffoliAlt | TargetKind::Ccnot => FRAC_PI_4,
        }
    }

    /// Sign of the ZZX coefficient the target asks for.
    pub fn zzx_sign(&self) -> f64 {
        zzx_sign_of(self.kind)
    }
}

/// CZZ runs U_ZZX(−π/2), so its pivot is ZZX = −α_opt (IZX = +α_opt).
fn zzx_sign_of(kind: TargetKind) -> f64 {
    match kind {
        TargetKind::Czz => -1.0,
        _ => 1.0,
    }
}

/// Reported as a convenience for the CLI.
pub fn all_target_names() -> Vec<&'static str> {
    TargetKind::MAIN.iter().map(|k| k.name()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::linalg::{frobenius, phase_aligned_distance, unitarity_defect};

    #[test]
    fn u_zzx_pi_examples() {
        let u = u_zzx(PI);
        // |000⟩ → −i|001⟩, |010⟩ → +i|011⟩
        assert!((u[(1, 0)] - (-I)).norm() < 1e-12);
        assert!((u[(3, 2)] - I).norm() < 1e-12);
        assert!((u_zzx(2.0 * PI) + CMat::identity(8, 8)).norm() < 1e-12);
        assert!((u_zzx(-0.7) - u_zzx(0.7).adjoint()).norm() < 1e-12);
        let psi = &u_zzx(FRAC_PI_2) * basis_state(2, 8);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((psi[2] - c(s)).norm() < 1e-12);
        assert!((psi[3] - I * s).norm() < 1e-12);
    }

    #[test]
    fn group_property() {
        let a = u_zzx(0.3) * u_zzx(1.1);
        assert!(frobenius(&(a - u_zzx(1.4))) < 1e-12);
    }

    #[test]
    fn ghz_and_bell_sequences() {
        let psi = ghz_sequence() * basis_state(0, 8);
        assert!((state_fidelity(&ghz_state(), &psi) - 1.0).abs() < 1e-12);
        let u = ghz_sequence();
        let twice = &u * &u;
        assert!(twice[(0, 0)].norm() < 1.0);

        let bell = bell_sequence() * basis_state(0, 4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut expected = CVec::zeros(4);
        expected[0] = c(s);
        expected[3] = c(s);
        assert!((expected.dotc(&bell).norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ccnot_truth_table_and_projector_form() {
        assert!(frobenius(&(ccnot_hamiltonian() - ccnot_projector_form())) < 1e-12);
        let u = unitary_of(&ccnot_hamiltonian());
        for q1 in 0..2u8 {
            for q2 in 0..2u8 {
                assert_eq!(m_coefficient(q1, q2), 4 * (q1 * q2) as i32);
            }
        }
        let ideal = {
            let mut m = CMat::identity(8, 8);
            m[(6, 6)] = c(0.0);
            m[(7, 7)] = c(0.0);
            m[(6, 7)] = c(1.0);
            m[(7, 6)] = c(1.0);
            m
        };
        assert!(phase_aligned_distance(&u, &ideal) < 1e-12);
        let words = ["IZI", "ZII", "IIX", "ZZX", "ZZI", "IZX", "ZIX", "III"];
        for a in words {
            for b in words {
                assert!(word(a).commutes_with(word(b)));
            }
        }
    }

    #[test]
    fn itoffoli_truth_table() {
        let u = unitary_of(&itoffoli_hamiltonian());
        assert!((u[(6, 7)] - (-I)).norm() < 1e-12);
        assert!((u[(7, 6)] - (-I)).norm() < 1e-12);
        for k in 0..6 {
            assert!((u[(k, k)] - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn czz_unitary_follows_phase_formula() {
        let u = unitary_of(&czz_hamiltonian());
        for k in 0..8 {
            let (q1, q2, q3) = ((k >> 2) as u8 & 1, (k >> 1) as u8 & 1, k as u8 & 1);
            assert!((u[(k, k)] - czz_phase(q1, q2, q3)).norm() < 1e-12);
        }
    }

    #[test]
    fn czz_decomposition_as_written() {
        let d = czz_decomposition();
        assert!(unitarity_defect(&d) < 1e-12);
        // |000⟩ is untouched by a control in |0⟩
        assert!((d[(0, 0)] - c(1.0)).norm() < 1e-12);
        // composed sequence equals S1 · exp(−iH_CZZ) exactly
        let s1 = on_qubit(&s_gate(), 0, 3);
        let reference = s1 * unitary_of(&czz_hamiltonian());
        assert!(frobenius(&(d - reference)) < 1e-12);
    }

    #[test]
    fn ghz_drift_and_correction() {
        let (psi, phi) = static_ghz_drift(0.0, [0.3e6, -0.2e6, 0.1e6], 1e-6);
        assert!((state_fidelity(&ghz_state(), &psi) - 1.0).abs() < 1e-12);
        assert_eq!(phi, 0.0);

        let (psi, phi) = static_ghz_drift(0.1e6, [0.0; 3], 2.5e-6);
        assert!((phi - std::f64::consts::TAU * 0.25).abs() < 1e-12);
        let fixed = z_correction(phi) * &psi;
        assert!((state_fidelity(&ghz_state(), &fixed) - 1.0).abs() < 1e-12);

        let (psi, _) = static_ghz_drift(0.1e6, [0.1e6; 3], 0.0);
        assert!((psi - ghz_state()).norm() < 1e-15);
    }

    #[test]
    fn targets_are_consistent() {
        for k in [
            TargetKind::Ghz,
            TargetKind::IToffoli,
            TargetKind::IToffoliAlt,
            TargetKind::Ccnot,
            TargetKind::Czz,
        ] {
            let t = GateTarget::new(k);
            assert!(t.is_consistent(), "{k}");
            assert_eq!(t.unwanted.len() + t.wanted_words().len() + 3, 16, "{k}");
            assert!(unitarity_defect(&t.ideal_unitary()) < 1e-12);
            assert_eq!(k.name().parse::<TargetKind>().unwrap(), k);
        }
        assert_eq!(GateTarget::new(TargetKind::Ghz).unwanted.len(), 12);
    }
}
