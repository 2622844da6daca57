//! Three-qubit Pauli words on the computational space ordered |Q1, Q3, Q2⟩.
//!
//! Word letters follow the same order: in "ZIX" the Z acts on Q1, the I on Q3
//! and the X on the target Q2. Index of |n1 n3 n2⟩ is 4·n1 + 2·n3 + n2.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{PcrError, Result};
use crate::linalg::{c, ensure_hermitian, CMat, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMat {
        let (a, b, cc, d) = match self {
            Pauli::I => (c(1.0), c(0.0), c(0.0), c(1.0)),
            Pauli::X => (c(0.0), c(1.0), c(1.0), c(0.0)),
            Pauli::Y => (c(0.0), -I, I, c(0.0)),
            Pauli::Z => (c(1.0), c(0.0), c(0.0), c(-1.0)),
        };
        CMat::from_row_slice(2, 2, &[a, b, cc, d])
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_letter(ch: char) -> Option<Pauli> {
        match ch {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn is_diagonal(self) -> bool {
        matches!(self, Pauli::I | Pauli::Z)
    }
}

/// A⊗B⊗C acting on (Q1, Q3, Q2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliWord(pub [Pauli; 3]);

impl PauliWord {
    /// All 64 words, I < X < Y < Z lexicographically.
    pub fn all() -> Vec<PauliWord> {
        let mut out = Vec::with_capacity(64);
        for a in Pauli::ALL {
            for b in Pauli::ALL {
                for cc in Pauli::ALL {
                    out.push(PauliWord([a, b, cc]));
                }
            }
        }
        out
    }

    /// The 16 words of the model ansatz: controls in {I, Z}, target arbitrary.
    pub fn ansatz() -> Vec<PauliWord> {
        PauliWord::all().into_iter().filter(|w| w.in_ansatz()).collect()
    }

    pub fn index(self) -> usize {
        let k = |p: Pauli| p as usize;
        16 * k(self.0[0]) + 4 * k(self.0[1]) + k(self.0[2])
    }

    pub fn in_ansatz(self) -> bool {
        self.0[0].is_diagonal() && self.0[1].is_diagonal()
    }

    /// Target letter is X or Y: the term exists only while the drive is on.
    pub fn is_drive_induced(self) -> bool {
        matches!(self.0[2], Pauli::X | Pauli::Y)
    }

    pub fn is_y_type(self) -> bool {
        self.0[2] == Pauli::Y
    }

    pub fn is_identity(self) -> bool {
        self.0 == [Pauli::I; 3]
    }

    pub fn matrix(self) -> CMat {
        self.0[0]
            .matrix()
            .kronecker(&self.0[1].matrix())
            .kronecker(&self.0[2].matrix())
    }

    pub fn commutes_with(self, other: PauliWord) -> bool {
        let anti = self
            .0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| **a != Pauli::I && **b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.0 {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliWord {
    type Err = PcrError;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<Pauli> = s.chars().filter_map(Pauli::from_letter).collect();
        if letters.len() != 3 || s.chars().count() != 3 {
            return Err(PcrError::config(format!("not a three-letter Pauli word: {s:?}")));
        }
        Ok(PauliWord([letters[0], letters[1], letters[2]]))
    }
}

impl Serialize for PauliWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for building words in code, panics on a malformed literal.
pub fn word(s: &str) -> PauliWord {
    s.parse().expect("valid Pauli word literal")
}

/// Real weights of all 64 Pauli words [Hz].
#[derive(Debug, Clone, PartialEq)]
pub struct PauliCoefficients {
    values: [f64; 64],
}

/// Largest imaginary part tolerated in a projected coefficient [Hz].
pub const MAX_IMAGINARY_RESIDUE_HZ: f64 = 1.0;

impl PauliCoefficients {
    pub fn zero() -> Self {
        PauliCoefficients { values: [0.0; 64] }
    }

    pub fn get(&self, w: PauliWord) -> f64 {
        self.values[w.index()]
    }

    pub fn set(&mut self, w: PauliWord, hz: f64) {
        self.values[w.index()] = hz;
    }

    /// Coefficient by word literal [Hz].
    pub fn hz(&self, w: &str) -> f64 {
        self.get(word(w))
    }

    pub fn mhz(&self, w: &str) -> f64 {
        self.hz(w) * 1e-6
    }

    pub fn iter(&self) -> impl Iterator<Item = (PauliWord, f64)> + '_ {
        PauliWord::all().into_iter().map(move |w| (w, self.get(w)))
    }

    /// Words outside the ansatz (a control letter is X or Y).
    pub fn leakage(&self) -> impl Iterator<Item = (PauliWord, f64)> + '_ {
        self.iter().filter(|(w, _)| !w.in_ansatz())
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    /// Σ α·word, in rad/s.
    pub fn to_matrix(&self) -> CMat {
        let mut h = CMat::zeros(8, 8);
        for (w, v) in self.iter() {
            if v != 0.0 {
                h += w.matrix().scale(std::f64::consts::TAU * v);
            }
        }
        h
    }

    /// Multiplies every word selected by `pred` by `factor`.
    pub fn scaled_where(&self, factor: f64, pred: impl Fn(PauliWord) -> bool) -> Self {
        let mut out = self.clone();
        for w in PauliWord::all() {
            if pred(w) {
                out.values[w.index()] *= factor;
            }
        }
        out
    }

    pub fn to_mhz_map(&self) -> std::collections::BTreeMap<String, f64> {
        self.iter().map(|(w, v)| (w.to_string(), v * 1e-6)).collect()
    }

    pub fn from_mhz_map(map: &std::collections::BTreeMap<String, f64>) -> Result<Self> {
        let mut out = PauliCoefficients::zero();
        for (k, v) in map {
            out.set(k.parse()?, v * 1e6);
        }
        Ok(out)
    }
}

/// Serialized as a word → Hz map so that a round trip is lossless.
impl Serialize for PauliCoefficients {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: std::collections::BTreeMap<String, f64> =
            self.iter().map(|(w, v)| (w.to_string(), v)).collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PauliCoefficients {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = std::collections::BTreeMap::<String, f64>::deserialize(d)?;
        let mut out = PauliCoefficients::zero();
        for (k, v) in map {
            out.set(k.parse().map_err(serde::de::Error::custom)?, v);
        }
        Ok(out)
    }
}

/// α_w = Tr[w·H]/8 for every word, with H in rad/s and α in Hz.
pub fn pauli_project(h_eff: &CMat) -> Result<PauliCoefficients> {
    if h_eff.nrows() != 8 || h_eff.ncols() != 8 {
        return Err(PcrError::numeric("Pauli projection needs an 8x8 matrix"));
    }
    ensure_hermitian(h_eff, 1e-9, "effective Hamiltonian")?;
    let mut out = PauliCoefficients::zero();
    for w in PauliWord::all() {
        let m = w.matrix();
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..8 {
            for j in 0..8 {
                tr += m[(i, j)] * h_eff[(j, i)];
            }
        }
        let alpha = tr / (8.0 * std::f64::consts::TAU);
        if alpha.im.abs() >= MAX_IMAGINARY_RESIDUE_HZ {
            return Err(PcrError::numeric(format!(
                "coefficient {w} has imaginary residue {:.3e} Hz",
                alpha.im
            )));
        }
        out.set(w, alpha.re);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;

    #[test]
    fn word_parsing_and_order() {
        assert_eq!(word("ZZX").to_string(), "ZZX");
        assert!("ZZ".parse::<PauliWord>().is_err());
        assert!("ZZQ".parse::<PauliWord>().is_err());
        assert_eq!(PauliWord::all().len(), 64);
        assert_eq!(PauliWord::ansatz().len(), 16);
        for (k, w) in PauliWord::all().into_iter().enumerate() {
            assert_eq!(w.index(), k);
        }
    }

    #[test]
    fn single_word_projects_to_itself() {
        let h = word("ZZX").matrix().scale(std::f64::consts::TAU * 3e5);
        let p = pauli_project(&h).unwrap();
        for (w, v) in p.iter() {
            let expected = if w == word("ZZX") { 3e5 } else { 0.0 };
            assert!((v - expected).abs() < 1e-6, "{w}: {v}");
        }
        let id = CMat::identity(8, 8).scale(std::f64::consts::TAU);
        let p = pauli_project(&id).unwrap();
        assert!((p.hz("III") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordering_puts_target_last() {
        // Z on Q1 flips sign on |1xx⟩, which are indices 4..8.
        let z = word("ZII").matrix();
        for k in 0..8 {
            assert_eq!(z[(k, k)].re, if k >= 4 { -1.0 } else { 1.0 });
        }
        // X on the target couples |n1 n3 0⟩ with |n1 n3 1⟩.
        let x = word("IIX").matrix();
        assert_eq!(x[(0, 1)].re, 1.0);
        assert_eq!(x[(6, 7)].re, 1.0);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut h = CMat::zeros(8, 8);
        h[(0, 1)] = c(1.0);
        assert!(pauli_project(&h).is_err());
    }

    #[test]
    fn commutation_rule() {
        assert!(word("ZZX").commutes_with(word("IIX")));
        assert!(!word("ZZX").commutes_with(word("IIZ")));
        assert!(word("XXI").commutes_with(word("YYI")));
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let mut p = PauliCoefficients::zero();
        p.set(word("ZZX"), 0.5e6);
        p.set(word("IIX"), 1.0 / 3.0);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"ZZX\":500000.0"));
        let back: PauliCoefficients = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(frobenius(&(back.to_matrix() - p.to_matrix())) == 0.0);
    }
}
