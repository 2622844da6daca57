//! Closed-form first-order-in-Ω drive-induced coefficients and optimizer seeding.
//!
//! Notation: J_{a b} and Δ_{a b} refer to qubits a, b (1-based, Q1..Q3) in
//! their ground-to-first transition; an overline on a label moves that qubit
//! to its first-to-second transition. Δ_{a b} = ω̄_a − ω̄_b.

use serde::{Deserialize, Serialize};

use crate::circuit::{dressed_table, CircuitSpec, DressedTable, DriveSpec, MIN_DETUNING_HZ};
use crate::error::{PcrError, Result};
use crate::gates::{GateTarget, Relation, TargetKind};
use crate::optimizer::{CellParams, ParameterBounds};
use crate::pauli::{word, PauliCoefficients, PauliWord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Coupling,
    Detuning,
}

/// Every symbol used by the closed forms: (name, kind, qubit a, level a, qubit b, level b),
/// 0-based qubits and transition levels.
pub const SYMBOLS: [(&str, SymbolKind, usize, usize, usize, usize); 17] = [
    ("J12", SymbolKind::Coupling, 0, 0, 1, 0),
    ("J1b2", SymbolKind::Coupling, 0, 1, 1, 0),
    ("J12b", SymbolKind::Coupling, 0, 0, 1, 1),
    ("J13", SymbolKind::Coupling, 0, 0, 2, 0),
    ("J13b", SymbolKind::Coupling, 0, 0, 2, 1),
    ("J1b3", SymbolKind::Coupling, 0, 1, 2, 0),
    ("J1b3b", SymbolKind::Coupling, 0, 1, 2, 1),
    ("J32", SymbolKind::Coupling, 2, 0, 1, 0),
    ("J3b2", SymbolKind::Coupling, 2, 1, 1, 0),
    ("J32b", SymbolKind::Coupling, 2, 0, 1, 1),
    ("D12", SymbolKind::Detuning, 0, 0, 1, 0),
    ("D1b2", SymbolKind::Detuning, 0, 1, 1, 0),
    ("D12b", SymbolKind::Detuning, 0, 0, 1, 1),
    ("D13", SymbolKind::Detuning, 0, 0, 2, 0),
    ("D32", SymbolKind::Detuning, 2, 0, 1, 0),
    ("D3b2", SymbolKind::Detuning, 2, 1, 1, 0),
    ("D32b", SymbolKind::Detuning, 2, 0, 1, 1),
];

/// Dressed couplings and detunings read once from a [`DressedTable`] [Hz].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symbols {
    pub j12: f64,
    pub j1b2: f64,
    pub j12b: f64,
    pub j13: f64,
    pub j13b: f64,
    pub j1b3: f64,
    /// Also written J with a single overline spanning "13".
    pub j1b3b: f64,
    pub j32: f64,
    pub j3b2: f64,
    pub j32b: f64,
    pub d12: f64,
    pub d1b2: f64,
    pub d12b: f64,
    pub d13: f64,
    pub d32: f64,
    pub d3b2: f64,
    pub d32b: f64,
}

impl Symbols {
    pub fn from_table(t: &DressedTable) -> Result<Self> {
        let mut v = [0.0; 17];
        for (k, (name, kind, a, m, b, n)) in SYMBOLS.iter().enumerate() {
            v[k] = match kind {
                SymbolKind::Coupling => t.coupling(*a, *m, *b, *n),
                SymbolKind::Detuning => {
                    let d = t.detuning(*a, *m, *b, *n);
                    if d.abs() < MIN_DETUNING_HZ {
                        return Err(PcrError::Resonance(format!("{name} = {d:.1} Hz")));
                    }
                    d
                }
            };
        }
        Ok(Symbols {
            j12: v[0],
            j1b2: v[1],
            j12b: v[2],
            j13: v[3],
            j13b: v[4],
            j1b3: v[5],
            j1b3b: v[6],
            j32: v[7],
            j3b2: v[8],
            j32b: v[9],
            d12: v[10],
            d1b2: v[11],
            d12b: v[12],
            d13: v[13],
            d32: v[14],
            d3b2: v[15],
            d32b: v[16],
        })
    }

    /// Value by [`SYMBOLS`] name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "J12" => self.j12,
            "J1b2" => self.j1b2,
            "J12b" => self.j12b,
            "J13" => self.j13,
            "J13b" => self.j13b,
            "J1b3" => self.j1b3,
            "J1b3b" => self.j1b3b,
            "J32" => self.j32,
            "J3b2" => self.j3b2,
            "J32b" => self.j32b,
            "D12" => self.d12,
            "D1b2" => self.d1b2,
            "D12b" => self.d12b,
            "D13" => self.d13,
            "D32" => self.d32,
            "D3b2" => self.d3b2,
            "D32b" => self.d32b,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbativeInputs {
    pub symbols: Symbols,
    /// Ω_j/2π [Hz].
    pub amplitudes: [f64; 3],
    /// φ_j [rad].
    pub phases: [f64; 3],
}

impl PerturbativeInputs {
    pub fn new(spec: &CircuitSpec, drive: &DriveSpec) -> Result<Self> {
        let table = dressed_table(spec)?;
        Ok(PerturbativeInputs {
            symbols: Symbols::from_table(&table)?,
            amplitudes: drive.amplitudes(),
            phases: drive.phases,
        })
    }
}

/// The eight drive-induced words covered by the closed forms.
pub const DRIVE_INDUCED_WORDS: [&str; 8] = ["ZIX", "ZIY", "IZX", "IZY", "IIX", "IIY", "ZZX", "ZZY"];

/// Closed-form coefficients [Hz]. Other words are not provided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveInduced {
    pub zix: f64,
    pub ziy: f64,
    pub izx: f64,
    pub izy: f64,
    pub iix: f64,
    pub iiy: f64,
    pub zzx: f64,
    pub zzy: f64,
}

impl DriveInduced {
    pub fn get(&self, w: PauliWord) -> Option<f64> {
        Some(match w.to_string().as_str() {
            "ZIX" => self.zix,
            "ZIY" => self.ziy,
            "IZX" => self.izx,
            "IZY" => self.izy,
            "IIX" => self.iix,
            "IIY" => self.iiy,
            "ZZX" => self.zzx,
            "ZZY" => self.zzy,
            _ => return None,
        })
    }

    /// Coefficient set with only the eight closed-form words filled in.
    pub fn to_coefficients(&self) -> PauliCoefficients {
        let mut c = PauliCoefficients::zero();
        for w in DRIVE_INDUCED_WORDS {
            let w = word(w);
            c.set(w, self.get(w).unwrap_or(0.0));
        }
        c
    }
}

/// One quadrature of the closed forms, with `k[j]` = cos φ_j (X words) or sin φ_j (Y words).
fn quadrature(s: &Symbols, o: [f64; 3], k: [f64; 3]) -> [f64; 4] {
    let [o1, o2, o3] = o;
    let [c1, c2, c3] = k;

    let zi = 0.5
        * (o1 * c1
            * (s.j1b2 / s.d1b2 - s.j12 / s.d12 + s.j13b * s.j3b2 / (s.d13 * s.d3b2)
                - s.j1b3b * s.j3b2 / (s.d12b * s.d3b2))
            + o3 * c3 * (s.j13b * s.j12 / (s.d3b2 * s.d12) - s.j1b3b * s.j1b2 / (s.d3b2 * s.d1b2)))
        + (o2 / 4.0)
            * c2
            * ((s.j1b2 / s.d1b2).powi(2) + (s.j12b / s.d12b).powi(2)
                - 2.0 * s.j12 * s.j12b / (s.d12 * s.d12b));

    let iz = 0.5
        * (o3 * c3
            * (s.j3b2 / s.d3b2 - s.j32 / s.d32 + s.j13b * s.j1b2 / (s.d12b * s.d3b2)
                - s.j1b3b * s.j1b2 / (s.d1b2 * s.d3b2))
            + o1 * c1 * (s.j1b3 * s.j32 / (s.d1b2 * s.d32) - s.j1b3b * s.j3b2 / (s.d1b2 * s.d3b2)))
        + (o2 / 4.0)
            * c2
            * ((s.j3b2 / s.d3b2).powi(2) + (s.j32b / s.d32b).powi(2)
                - 2.0 * s.j32 * s.j32b / (s.d32 * s.d32b));

    let ii = 0.5
        * (o2 * c2
            - o1 * c1 * (s.j1b2 / s.d1b2 - s.j1b3b * s.j3b2 / (s.d1b2 * s.d3b2))
            - o3 * c3 * (s.j3b2 / s.d3b2 - s.j1b3b * s.j1b2 / (s.d1b2 * s.d3b2)));

    let zz = (o1 / 2.0)
        * c1
        * (s.j32 / s.d32 * s.j13 / s.d12 - s.j32 / s.d32 * s.j1b3 / s.d1b2 - s.j3b2 / s.d3b2 * s.j13b / s.d12
            + s.j3b2 / s.d3b2 * s.j1b3b / s.d1b2)
        + (o3 / 2.0)
            * c3
            * (s.j12 / s.d12 * s.j13 / s.d32 - s.j12 / s.d12 * s.j13b / s.d3b2 - s.j1b2 / s.d1b2 * s.j1b3 / s.d32b
                + s.j1b2 / s.d1b2 * s.j1b3b / s.d3b2);

    [zi, iz, ii, zz]
}

/// First-order-in-Ω closed forms for the eight drive-induced words [Hz].
pub fn perturbative_coefficients(input: &PerturbativeInputs) -> DriveInduced {
    let cos = input.phases.map(f64::cos);
    let sin = input.phases.map(f64::sin);
    let [zix, izx, iix, zzx] = quadrature(&input.symbols, input.amplitudes, cos);
    let [ziy, izy, iiy, zzy] = quadrature(&input.symbols, input.amplitudes, sin);
    DriveInduced {
        zix,
        ziy,
        izx,
        izy,
        iix,
        iiy,
        zzx,
        zzy,
    }
}

/// Curated starting point for one (target, cell) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedSeed {
    pub target: TargetKind,
    pub cell: usize,
    pub coupler_ghz: [f64; 2],
    pub scale_factors: [f64; 3],
}

impl CuratedSeed {
    pub fn params(&self) -> CellParams {
        CellParams([
            self.coupler_ghz[0],
            self.coupler_ghz[1],
            self.scale_factors[0],
            self.scale_factors[1],
            self.scale_factors[2],
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SeedTable {
    pub seeds: Vec<CuratedSeed>,
}

impl SeedTable {
    /// Curated starting points for unit cells 2 and 3.
    pub fn curated() -> Self {
        let s = |target, cell, c: [f64; 2], a: [f64; 3]| CuratedSeed {
            target,
            cell,
            coupler_ghz: c,
            scale_factors: a,
        };
        SeedTable {
            seeds: vec![
                s(TargetKind::Ghz, 2, [5.321, 5.725], [0.060, -0.007, 1.500]),
                s(TargetKind::IToffoli, 2, [5.301, 5.611], [-0.311, 0.015, -1.213]),
                s(TargetKind::Ccnot, 3, [5.301, 5.003], [0.174, 0.010, -0.016]),
                s(TargetKind::Czz, 2, [5.301, 5.649], [-0.061, 0.005, -1.500]),
            ],
        }
    }

    pub fn find(&self, target: TargetKind, cell: usize) -> Option<&CuratedSeed> {
        self.seeds.iter().find(|s| s.target == target && s.cell == cell)
    }
}

/// Required absolute sign of each closed-form word the target pins down.
fn sign_constraints(target: &GateTarget) -> Vec<(PauliWord, f64)> {
    let zzx = word("ZZX");
    let s = target.zzx_sign();
    let mut out = Vec::new();
    for rel in &target.relations {
        match *rel {
            Relation::Equals { word: w, value } if w == zzx => out.push((w, value.signum())),
            Relation::Tied { word: w, sign, pivot } if pivot == zzx => out.push((w, sign * s)),
            _ => {}
        }
    }
    out
}

/// Grid of drive scale factors tried for A1 and A3.
pub const SEED_SCALE_GRID: [f64; 8] = [-1.5, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 1.5];
/// Coupler frequency grid spacing [GHz].
pub const SEED_COUPLER_STEP_GHZ: f64 = 0.025;

/// Initial parameter vector for a cell. A curated seed is returned verbatim;
/// otherwise the coupler grid and scale-factor grid are scanned for the largest
/// closed-form |α_ZZX| that satisfies the target's sign pattern.
pub fn seed_parameters(
    target: &GateTarget,
    spec: &CircuitSpec,
    bounds: &ParameterBounds,
    cell: usize,
    curated: &SeedTable,
    reference_amplitude: f64,
) -> Result<CellParams> {
    bounds.validate()?;
    if let Some(seed) = curated.find(target.kind, cell) {
        let p = seed.params();
        if !bounds.contains(&p.0) {
            return Err(PcrError::Seeding(format!(
                "curated {} seed for cell {cell} lies outside the bounds: {:?}",
                target.kind.name(),
                p.0
            )));
        }
        return Ok(p);
    }

    let constraints = sign_constraints(target);
    let grid = |lo: f64, hi: f64| {
        let n = ((hi - lo) / SEED_COUPLER_STEP_GHZ + 1e-9).floor() as usize;
        (0..=n).map(move |k| lo + k as f64 * SEED_COUPLER_STEP_GHZ)
    };
    let scales: Vec<f64> = SEED_SCALE_GRID
        .iter()
        .copied()
        .filter(|a| *a >= bounds.lower[2] && *a <= bounds.upper[2])
        .collect();
    let scales3: Vec<f64> = SEED_SCALE_GRID
        .iter()
        .copied()
        .filter(|a| *a >= bounds.lower[4] && *a <= bounds.upper[4])
        .collect();

    let mut best: Option<(f64, CellParams)> = None;
    let (mut skipped_advisory, mut skipped_resonant, mut rejected) = (0usize, 0usize, 0usize);
    for c12 in grid(bounds.lower[0], bounds.upper[0]) {
        for c23 in grid(bounds.lower[1], bounds.upper[1]) {
            let mut s = spec.clone();
            s.coupler_freqs = [c12 * 1e9, c23 * 1e9];
            if !s.dispersive_advisories().is_empty() {
                skipped_advisory += 1;
                continue;
            }
            let symbols = match dressed_table(&s).and_then(|t| Symbols::from_table(&t)) {
                Ok(sym) => sym,
                Err(PcrError::Resonance(_)) => {
                    skipped_resonant += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            for &a1 in &scales {
                for &a3 in &scales3 {
                    let input = PerturbativeInputs {
                        symbols,
                        amplitudes: [a1 * reference_amplitude, 0.0, a3 * reference_amplitude],
                        phases: [0.0; 3],
                    };
                    let c = perturbative_coefficients(&input);
                    let zzx = c.zzx * target.zzx_sign();
                    let ok = zzx > 0.0
                        && constraints
                            .iter()
                            .all(|(w, sign)| c.get(*w).map_or(true, |v| v * sign > 0.0));
                    if !ok {
                        rejected += 1;
                        continue;
                    }
                    if best.as_ref().map_or(true, |(b, _)| zzx > *b) {
                        best = Some((zzx, CellParams([c12, c23, a1, 0.0, a3])));
                    }
                }
            }
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| {
        PcrError::Seeding(format!(
            "no feasible {} seed for cell {cell}: {skipped_advisory} coupler points outside the dispersive regime, \
             {skipped_resonant} resonant, {rejected} drive settings violating the sign pattern",
            target.kind.name()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::{extract, DriveFrequency, ExtractionOptions};
    use crate::circuit::cell_basis;

    fn inputs(spec: &CircuitSpec, amps: [f64; 3], phases: [f64; 3]) -> PerturbativeInputs {
        let mut drive = DriveSpec::new(1.0, amps, 0.0);
        drive.phases = phases;
        PerturbativeInputs::new(spec, &drive).unwrap()
    }

    #[test]
    fn symbol_audit() {
        let spec = CircuitSpec::dispersive_test();
        let table = dressed_table(&spec).unwrap();
        let sym = Symbols::from_table(&table).unwrap();
        let mut names: Vec<&str> = SYMBOLS.iter().map(|s| s.0).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), SYMBOLS.len());
        for (name, kind, a, m, b, n) in SYMBOLS {
            let expected = match kind {
                SymbolKind::Coupling => table.coupling(a, m, b, n),
                SymbolKind::Detuning => table.transition(a, m) - table.transition(b, n),
            };
            assert_eq!(sym.get(name), Some(expected), "{name}");
        }
        // no shared coupler between Q1 and Q3: every J13 variant is the direct coupling
        for name in ["J13", "J13b", "J1b3", "J1b3b"] {
            assert_eq!(sym.get(name), Some(spec.g_qq(0, 2)));
        }
    }

    #[test]
    fn zero_drive_gives_zero() {
        let c = perturbative_coefficients(&inputs(&CircuitSpec::dispersive_test(), [0.0; 3], [0.3, 1.0, 2.0]));
        for w in DRIVE_INDUCED_WORDS {
            assert_eq!(c.get(word(w)), Some(0.0));
        }
        assert_eq!(c.get(word("ZZI")), None);
    }

    #[test]
    fn zero_phase_has_no_y_terms() {
        let c = perturbative_coefficients(&inputs(&CircuitSpec::dispersive_test(), [2e6, 0.3e6, 1e6], [0.0; 3]));
        assert_eq!([c.ziy, c.izy, c.iiy, c.zzy], [0.0; 4]);
        assert!(c.zix != 0.0 && c.zzx != 0.0);
    }

    #[test]
    fn shifting_phi1_by_pi_flips_omega1_terms() {
        let spec = CircuitSpec::dispersive_test();
        let only1 = perturbative_coefficients(&inputs(&spec, [2e6, 0.0, 0.0], [0.0; 3]));
        let only3 = perturbative_coefficients(&inputs(&spec, [0.0, 0.0, 2e6], [0.0; 3]));
        let both = perturbative_coefficients(&inputs(&spec, [2e6, 0.0, 2e6], [std::f64::consts::PI, 0.0, 0.0]));
        for (b, (o1, o3)) in [
            (both.zix, (only1.zix, only3.zix)),
            (both.izx, (only1.izx, only3.izx)),
            (both.iix, (only1.iix, only3.iix)),
            (both.zzx, (only1.zzx, only3.zzx)),
        ] {
            assert!((b - (o3 - o1)).abs() <= 1e-9 * (o1.abs() + o3.abs()));
        }
    }

    #[test]
    fn zix_matches_numerical_extraction() {
        let spec = CircuitSpec::dispersive_test();
        let basis = cell_basis(4).unwrap();
        let f = DriveFrequency::NumericDressed.resolve(&spec, &basis).unwrap();
        let drive = DriveSpec::new(2e6, [1.0, 0.0, 0.0], f);
        let numeric = extract(&spec, &drive, &ExtractionOptions::default()).unwrap().coefficients;
        let closed = perturbative_coefficients(&PerturbativeInputs::new(&spec, &drive).unwrap());
        let n = numeric.get(word("ZIX"));
        assert!(((closed.zix - n) / n).abs() < 0.1, "closed {} numeric {n}", closed.zix);
    }

    #[test]
    fn curated_seeds_are_returned_verbatim() {
        let spec = CircuitSpec::dispersive_test();
        let table = SeedTable::curated();
        let b = ParameterBounds::default();
        let p = seed_parameters(&GateTarget::new(TargetKind::Ghz), &spec, &b, 2, &table, 60e6).unwrap();
        assert_eq!(p.0, [5.321, 5.725, 0.060, -0.007, 1.500]);
        let p = seed_parameters(&GateTarget::new(TargetKind::Czz), &spec, &b, 2, &table, 60e6).unwrap();
        assert_eq!(p.0, [5.301, 5.649, -0.061, 0.005, -1.500]);
        let p = seed_parameters(&GateTarget::new(TargetKind::Ccnot), &spec, &b, 3, &table, 60e6).unwrap();
        assert_eq!(p.0, [5.301, 5.003, 0.174, 0.010, -0.016]);
    }

    #[test]
    fn grid_seed_respects_sign_pattern() {
        let spec = CircuitSpec::dispersive_test();
        let b = ParameterBounds::default();
        let target = GateTarget::new(TargetKind::Czz);
        let p = seed_parameters(&target, &spec, &b, 17, &SeedTable::default(), 60e6).unwrap();
        assert!(b.contains(&p.0));
        let s = p.apply_to(&spec);
        let c = perturbative_coefficients(&PerturbativeInputs::new(&s, &p.drive(60e6, 0.0)).unwrap());
        assert!(c.zzx < 0.0 && c.izx > 0.0);
    }

    #[test]
    fn infeasible_grid_is_a_seeding_error() {
        let spec = CircuitSpec::dispersive_test();
        // a single coupler point inside the advisory window
        let b = ParameterBounds {
            lower: [4.9, 4.9, -1.5, -0.1, -1.5],
            upper: [4.91, 4.91, 1.5, 0.1, 1.5],
        };
        let err = seed_parameters(&GateTarget::new(TargetKind::Ghz), &spec, &b, 9, &SeedTable::default(), 60e6)
            .unwrap_err();
        assert!(matches!(err, PcrError::Seeding(_)), "{err}");
    }
}
