//! Pulse-level evolution of the 8-level effective model: schedules, a
//! Dormand–Prince integrator, Lindblad noise, protocols and sweeps.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitSpec;
use crate::error::{PcrError, Result};
use crate::gates::{
    average_gate_fidelity, basis_state, hadamard, on_qubit, pauli_rotation, s_gate, GateTarget, TargetKind,
};
use crate::linalg::{c, CMat, CVec, I};
use num_complex::Complex64;
use crate::optimizer::{evaluate_point, CellParams, OptimizeSettings};
use crate::effective::DriveFrequency;
use crate::circuit::cell_basis;
use crate::gates::frame_words;
use crate::pauli::{word, Pauli, PauliCoefficients};

/// Duration budgeted for each layer of single-qubit gates [s].
pub const SINGLE_QUBIT_GATE_TIME: f64 = 30e-9;
/// Rise and fall time of the cross-resonance pulse [s].
pub const EDGE_TIME: f64 = 10e-9;
/// Local error tolerance of the integrator.
pub const ODE_TOLERANCE: f64 = 1e-8;
/// Largest tolerated deviation of Tr ρ from 1.
pub const MAX_TRACE_LOSS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdgeShape {
    /// ½(1 − cos(π t / t_edge)).
    #[default]
    RaisedCosine,
    /// Gaussian with σ = t_edge/4, offset and rescaled to run from 0 to 1.
    Gaussian,
}

impl EdgeShape {
    /// Rising edge value at `t` ∈ [0, edge].
    fn rise(self, t: f64, edge: f64) -> f64 {
        let t = t.clamp(0.0, edge);
        match self {
            EdgeShape::RaisedCosine => 0.5 * (1.0 - (PI * t / edge).cos()),
            EdgeShape::Gaussian => {
                let sigma = edge / 4.0;
                let floor = (-edge * edge / (2.0 * sigma * sigma)).exp();
                let g = (-(t - edge).powi(2) / (2.0 * sigma * sigma)).exp();
                (g - floor) / (1.0 - floor)
            }
        }
    }

    /// ∫ of one edge [s].
    pub fn area(self, edge: f64) -> f64 {
        match self {
            EdgeShape::RaisedCosine => 0.5 * edge,
            EdgeShape::Gaussian => {
                // composite Simpson, the integrand is smooth
                let n = 2000;
                let h = edge / n as f64;
                let mut s = self.rise(0.0, edge) + self.rise(edge, edge);
                for k in 1..n {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * self.rise(k as f64 * h, edge);
                }
                s * h / 3.0
            }
        }
    }
}

/// Flat-top pulse: rise, plateau of length `flat_top`, fall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcrPulse {
    pub flat_top: f64,
    pub edge: f64,
    pub shape: EdgeShape,
}

impl PcrPulse {
    pub fn duration(&self) -> f64 {
        self.flat_top + 2.0 * self.edge
    }

    /// ∫ scale(t) dt [s].
    pub fn area(&self) -> f64 {
        self.flat_top + 2.0 * self.shape.area(self.edge)
    }

    /// Envelope at time `t` from the pulse start, in [0, 1].
    pub fn scale(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.duration() {
            0.0
        } else if t < self.edge {
            self.shape.rise(t, self.edge)
        } else if t <= self.edge + self.flat_top {
            1.0
        } else {
            self.shape.rise(self.duration() - t, self.edge)
        }
    }

    /// Plateau giving `area`; errors if the edges alone already exceed it.
    pub fn with_area(area: f64, edge: f64, shape: EdgeShape) -> Result<Self> {
        let flat_top = area - 2.0 * shape.area(edge);
        if !(flat_top >= 0.0) {
            return Err(PcrError::numeric(format!(
                "pulse area {:.3} ns is shorter than its edges",
                area * 1e9
            )));
        }
        Ok(PcrPulse { flat_top, edge, shape })
    }

    /// Rise, plateau and fall intervals, always three entries.
    fn pieces(&self) -> [(f64, f64); 3] {
        let a = self.edge;
        let b = self.edge + self.flat_top;
        [(0.0, a), (a, b), (b, self.duration())]
    }

    fn is_plateau(&self, piece: usize) -> bool {
        piece == 1
    }
}

#[derive(Debug, Clone)]
pub enum Segment {
    /// Ideal unitary applied instantly, followed by a noise-only idle.
    SingleQubitGate { label: String, unitary: CMat, duration: f64 },
    Pcr(PcrPulse),
    Idle { duration: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::SingleQubitGate { duration, .. } | Segment::Idle { duration } => *duration,
            Segment::Pcr(p) => p.duration(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PulseSchedule {
    pub segments: Vec<Segment>,
}

impl PulseSchedule {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn pulse(&self) -> Option<&PcrPulse> {
        self.segments.iter().find_map(|s| match s {
            Segment::Pcr(p) => Some(p),
            _ => None,
        })
    }

    fn gate(label: &str, unitary: CMat) -> Segment {
        Segment::SingleQubitGate {
            label: label.to_string(),
            unitary,
            duration: SINGLE_QUBIT_GATE_TIME,
        }
    }

    /// Gate layers around the pulse for each target.
    pub fn for_target(kind: TargetKind, pulse: PcrPulse) -> Self {
        let h = |q| on_qubit(&hadamard(), q, 3);
        let segments = match kind {
            TargetKind::Ghz => vec![
                Self::gate("H1 H2", h(1) * h(0)),
                Segment::Pcr(pulse),
                Self::gate("H1 H2 S3", on_qubit(&s_gate(), 2, 3) * h(1) * h(0)),
            ],
            TargetKind::IToffoli | TargetKind::IToffoliAlt => vec![Segment::Pcr(pulse)],
            TargetKind::Ccnot => {
                let z = |q| pauli_rotation(&on_qubit(&Pauli::Z.matrix(), q, 3), PI / 4.0);
                vec![Segment::Pcr(pulse), Self::gate("Rz1 Rz2", z(0) * z(1))]
            }
            TargetKind::Czz => vec![
                Self::gate("H3", h(2)),
                Segment::Pcr(pulse),
                Self::gate("H3 S1†", on_qubit(&s_gate().adjoint(), 0, 3) * h(2)),
            ],
        };
        PulseSchedule { segments }
    }
}

/// Per-qubit coherence times, indexed like the physical qubits (Q1, Q2, Q3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// [s]; infinity disables amplitude damping.
    pub t1: [f64; 3],
    /// [s]; infinity together with infinite T1 disables dephasing.
    pub t2: [f64; 3],
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            t1: [f64::INFINITY; 3],
            t2: [f64::INFINITY; 3],
        }
    }

    pub fn uniform(t1: f64, t2: f64) -> Self {
        NoiseModel { t1: [t1; 3], t2: [t2; 3] }
    }

    pub fn from_spec(spec: &CircuitSpec) -> Self {
        NoiseModel {
            t1: spec.t1,
            t2: spec.t2,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.t1.iter().chain(&self.t2).all(|t| t.is_infinite())
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..3 {
            let (t1, t2) = (self.t1[j], self.t2[j]);
            if !(t1 > 0.0 && t2 > 0.0) {
                return Err(PcrError::config(format!("Q{}: T1 and T2 must be positive", j + 1)));
            }
            if t2 > 2.0 * t1 * (1.0 + 1e-12) {
                return Err(PcrError::config(format!(
                    "Q{}: T2 = {t2:e} s exceeds 2·T1 = {:e} s",
                    j + 1,
                    2.0 * t1
                )));
            }
        }
        Ok(())
    }

    /// 1/Tφ = 1/T2 − 1/(2 T1) [1/s].
    pub fn dephasing_rate(&self, qubit: usize) -> f64 {
        (1.0 / self.t2[qubit] - 0.5 / self.t1[qubit]).max(0.0)
    }

    /// Collapse operators on the 8-level space. `logical_to_physical[k]` names
    /// the physical qubit carried by logical qubit k.
    pub fn collapse_operators(&self, logical_to_physical: [usize; 3]) -> Result<Vec<CMat>> {
        self.validate()?;
        let lower = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let number = CMat::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
        let mut ops = Vec::new();
        for (k, &p) in logical_to_physical.iter().enumerate() {
            let g1 = 1.0 / self.t1[p];
            if g1 > 0.0 {
                ops.push(on_qubit(&lower, k, 3).scale(g1.sqrt()));
            }
            let gphi = self.dephasing_rate(p);
            if gphi > 0.0 {
                ops.push(on_qubit(&number, k, 3).scale((2.0 * gphi).sqrt()));
            }
        }
        Ok(ops)
    }
}

/// Dormand–Prince 5(4) with standard step control on a matrix-valued state.
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: ODE_TOLERANCE,
            atol: ODE_TOLERANCE,
            max_steps: 1_000_000,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Dopri5 {
    /// Integrates y' = f(t, y) from `t0` to `t1`.
    pub fn integrate(&self, f: impl Fn(f64, &CMat) -> CMat, t0: f64, t1: f64, y0: &CMat) -> Result<CMat> {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(y0.clone());
        }
        let mut t = t0;
        let mut y = y0.clone();
        let mut h = span.min(1e-10);
        let mut k1 = f(t, &y);
        let mut steps = 0;
        while t < t1 {
            if steps >= self.max_steps {
                return Err(PcrError::numeric(format!(
                    "integrator exceeded {} steps at t = {t:e} s (step {h:e} s)",
                    self.max_steps
                )));
            }
            steps += 1;
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            let k2 = f(t + h / 5.0, &(&y + &k1 * c(h * A21)));
            let k3 = f(t + 3.0 * h / 10.0, &(&y + (&k1 * c(A31) + &k2 * c(A32)) * c(h)));
            let k4 = f(
                t + 4.0 * h / 5.0,
                &(&y + (&k1 * c(A41) + &k2 * c(A42) + &k3 * c(A43)) * c(h)),
            );
            let k5 = f(
                t + 8.0 * h / 9.0,
                &(&y + (&k1 * c(A51) + &k2 * c(A52) + &k3 * c(A53) + &k4 * c(A54)) * c(h)),
            );
            let k6 = f(
                t + h,
                &(&y + (&k1 * c(A61) + &k2 * c(A62) + &k3 * c(A63) + &k4 * c(A64) + &k5 * c(A65)) * c(h)),
            );
            let y_new = &y + (&k1 * c(B1) + &k3 * c(B3) + &k4 * c(B4) + &k5 * c(B5) + &k6 * c(B6)) * c(h);
            let k7 = f(t + h, &y_new);
            let err = (&k1 * c(E1) + &k3 * c(E3) + &k4 * c(E4) + &k5 * c(E5) + &k6 * c(E6) + &k7 * c(E7)) * c(h);

            let mut norm: f64 = 0.0;
            for ((e, a), b) in err.iter().zip(y.iter()).zip(y_new.iter()) {
                let sc = self.atol + self.rtol * a.norm().max(b.norm());
                norm = norm.max(e.norm() / sc);
            }
            if !norm.is_finite() {
                return Err(PcrError::numeric(format!("non-finite integrator error at t = {t:e} s")));
            }
            if norm <= 1.0 {
                t = if last { t1 } else { t + h };
                y = y_new;
                k1 = k7;
            }
            let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < 1e-22 * span.max(1.0) {
                return Err(PcrError::numeric(format!("step size underflow at t = {t:e} s")));
            }
        }
        Ok(y)
    }
}

/// Right-hand side −i[H, ρ] + Σ (L ρ L† − ½{L†L, ρ}).
fn lindblad_rhs(h: &CMat, ops: &[CMat], sum_ldl: &CMat, rho: &CMat) -> CMat {
    let mut out = (h * rho - rho * h) * (-I);
    for l in ops {
        out += l * rho * l.adjoint();
    }
    out -= (sum_ldl * rho + rho * sum_ldl) * c(0.5);
    out
}

/// Density-matrix trajectory on `t_grid` under H(t) [rad/s] and collapse operators.
pub fn evolve_lindblad(
    h_of_t: impl Fn(f64) -> CMat,
    collapse: &[CMat],
    rho0: &CMat,
    t_grid: &[f64],
) -> Result<Vec<CMat>> {
    let n = rho0.nrows();
    let mut sum_ldl = CMat::zeros(n, n);
    for l in collapse {
        sum_ldl += l.adjoint() * l;
    }
    let ode = Dopri5::default();
    let mut out = Vec::with_capacity(t_grid.len());
    let mut rho = rho0.clone();
    let mut t = t_grid.first().copied().unwrap_or(0.0);
    for &tn in t_grid {
        rho = ode.integrate(|s, r| lindblad_rhs(&h_of_t(s), collapse, &sum_ldl, r), t, tn, &rho)?;
        t = tn;
        out.push(rho.clone());
    }
    Ok(out)
}

/// Column-stacked Liouvillian of a constant H [rad/s] and collapse operators.
pub fn liouvillian(h: &CMat, collapse: &[CMat]) -> CMat {
    let n = h.nrows();
    let id = CMat::identity(n, n);
    let mut sum_ldl = CMat::zeros(n, n);
    // vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
    for op in collapse {
        l += op.conjugate().kronecker(op);
        sum_ldl += op.adjoint() * op;
    }
    l -= (id.kronecker(&sum_ldl) + sum_ldl.transpose().kronecker(&id)) * c(0.5);
    l
}

/// ρ after `t` under a constant generator, by exponentiating the Liouvillian.
pub fn evolve_constant(h: &CMat, collapse: &[CMat], rho: &CMat, t: f64) -> CMat {
    let n = rho.nrows();
    if t <= 0.0 {
        return rho.clone();
    }
    if collapse.is_empty() {
        let u = (h * c(-t) * I).exp();
        return &u * rho * u.adjoint();
    }
    let prop = (liouvillian(h, collapse) * c(t)).exp();
    let v = prop * CVec::from_column_slice(rho.as_slice());
    CMat::from_column_slice(n, n, v.as_slice())
}

/// Unitary propagator of H(t) [rad/s] over [t0, t1].
pub fn evolve_unitary(h_of_t: impl Fn(f64) -> CMat, t0: f64, t1: f64, n: usize) -> Result<CMat> {
    Dopri5::default().integrate(|s, u| (h_of_t(s) * u) * (-I), t0, t1, &CMat::identity(n, n))
}

/// Pulse Hamiltonian split into the envelope-scaled and constant parts [rad/s].
#[derive(Debug, Clone)]
pub struct PulseHamiltonian {
    pub static_part: CMat,
    pub drive_part: CMat,
}

impl PulseHamiltonian {
    /// Coefficients are taken at the optimization amplitude; drive-induced words
    /// are rescaled by `ratio`, frame words are dropped.
    pub fn new(coeffs: &PauliCoefficients, ratio: f64) -> Self {
        let mut stat = PauliCoefficients::zero();
        let mut drive = PauliCoefficients::zero();
        let frame = frame_words();
        for (w, v) in coeffs.iter() {
            if frame.contains(&w) {
                continue;
            }
            if w.is_drive_induced() {
                drive.set(w, v * ratio);
            } else {
                stat.set(w, v);
            }
        }
        PulseHamiltonian {
            static_part: stat.to_matrix(),
            drive_part: drive.to_matrix(),
        }
    }

    pub fn at(&self, scale: f64) -> CMat {
        &self.static_part + self.drive_part.scale(scale)
    }
}

/// How the plateau length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seconds")]
pub enum PulseTiming {
    /// From the ZZX rotation angle of the target.
    #[default]
    Calibrated,
    FlatTop(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub noise: NoiseModel,
    pub timing: PulseTiming,
    pub edge: EdgeShape,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            noise: NoiseModel::none(),
            timing: PulseTiming::Calibrated,
            edge: EdgeShape::RaisedCosine,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationResult {
    pub target: TargetKind,
    pub fidelity: f64,
    /// Total schedule duration [s].
    pub duration: f64,
    /// Plateau length of the pulse [s].
    pub flat_top: f64,
    /// Ω/2π at which the protocol ran [Hz].
    pub drive_amplitude: f64,
    /// Largest |Tr ρ − 1| seen.
    pub trace_error: f64,
    #[serde(skip)]
    pub final_state: Option<CMat>,
}

/// Plateau area for the target rotation: θ = ∫ 2π·2|α_ZZX|·scale dt, with
/// `alpha_zzx` already multiplied by the target's ZZX sign.
pub fn calibrated_area(target: &GateTarget, alpha_zzx: f64) -> Result<f64> {
    if !(alpha_zzx > 0.0) {
        return Err(PcrError::numeric(format!(
            "α_ZZX = {alpha_zzx:.1} Hz has the wrong sign for {}",
            target.kind.name()
        )));
    }
    Ok(target.zzx_angle() / (TAU * 2.0 * alpha_zzx))
}

/// Probe states for noisy gate fidelity: the 8 computational states plus, for
/// each qubit, |+⟩, |−⟩, |+i⟩, |−i⟩ on that qubit with (|0⟩ + e^{iπ/4}|1⟩)/√2 on
/// the other two. The spectator state is none of the four, so all 20 differ.
pub fn probe_states() -> Vec<CVec> {
    let mut out: Vec<CVec> = (0..8).map(|k| basis_state(k, 8)).collect();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let spectator = CVec::from_vec(vec![c(r), Complex64::from_polar(r, FRAC_PI_4)]);
    let singles = [
        CVec::from_vec(vec![c(r), c(r)]),
        CVec::from_vec(vec![c(r), c(-r)]),
        CVec::from_vec(vec![c(r), I * r]),
        CVec::from_vec(vec![c(r), -I * r]),
    ];
    for q in 0..3 {
        for s in &singles {
            let mut v = CVec::from_vec(vec![c(1.0)]);
            for k in 0..3 {
                let f = if k == q { s } else { &spectator };
                v = v.kronecker(f);
            }
            out.push(v);
        }
    }
    out
}

fn run_schedule(
    schedule: &PulseSchedule,
    ham: &PulseHamiltonian,
    collapse: &[CMat],
    rho0: &CMat,
) -> Result<(CMat, f64)> {
    let mut rho = rho0.clone();
    let zero = CMat::zeros(8, 8);
    let mut trace_error: f64 = 0.0;
    for seg in &schedule.segments {
        match seg {
            Segment::SingleQubitGate { unitary, duration, .. } => {
                rho = unitary * &rho * unitary.adjoint();
                rho = evolve_constant(&zero, collapse, &rho, *duration);
            }
            Segment::Idle { duration } => {
                rho = evolve_constant(&zero, collapse, &rho, *duration);
            }
            Segment::Pcr(p) => {
                for (k, (a, b)) in p.pieces().into_iter().enumerate() {
                    rho = if p.is_plateau(k) {
                        evolve_constant(&ham.at(1.0), collapse, &rho, b - a)
                    } else {
                        evolve_lindblad(|t| ham.at(p.scale(t)), collapse, &rho, &[a, b])?.pop().unwrap()
                    };
                }
            }
        }
        trace_error = trace_error.max((rho.trace().re - 1.0).abs());
    }
    if trace_error > MAX_TRACE_LOSS {
        return Err(PcrError::numeric(format!("trace drifted by {trace_error:e}")));
    }
    Ok((rho, trace_error))
}

fn schedule_unitary(schedule: &PulseSchedule, ham: &PulseHamiltonian) -> Result<CMat> {
    let mut u = CMat::identity(8, 8);
    for seg in &schedule.segments {
        match seg {
            Segment::SingleQubitGate { unitary, .. } => u = unitary * u,
            Segment::Idle { .. } => {}
            Segment::Pcr(p) => {
                for (k, (a, b)) in p.pieces().into_iter().enumerate() {
                    let step = if p.is_plateau(k) {
                        (ham.at(1.0) * c(-(b - a)) * I).exp()
                    } else {
                        evolve_unitary(|t| ham.at(p.scale(t)), a, b, 8)?
                    };
                    u = step * u;
                }
            }
        }
    }
    Ok(u)
}

/// Simulates one protocol with coefficients extracted at `reference_amplitude`
/// and rescaled to `drive_amplitude`.
pub fn run_protocol(
    target: &GateTarget,
    coeffs: &PauliCoefficients,
    reference_amplitude: f64,
    drive_amplitude: f64,
    options: &ProtocolOptions,
) -> Result<SimulationResult> {
    if !(reference_amplitude > 0.0) {
        return Err(PcrError::config("reference amplitude must be positive"));
    }
    let ratio = drive_amplitude / reference_amplitude;
    let pulse = match options.timing {
        PulseTiming::Calibrated => {
            let area = calibrated_area(target, target.zzx_sign() * ratio * coeffs.get(word("ZZX")))?;
            PcrPulse::with_area(area, EDGE_TIME, options.edge)?
        }
        PulseTiming::FlatTop(flat_top) => PcrPulse {
            flat_top,
            edge: EDGE_TIME,
            shape: options.edge,
        },
    };
    let schedule = PulseSchedule::for_target(target.kind, pulse);
    let ham = PulseHamiltonian::new(coeffs, ratio);
    let ideal = target.ideal_unitary();
    let collapse = options.noise.collapse_operators(target.logical_to_physical)?;

    let (fidelity, trace_error, final_state) = if target.kind == TargetKind::Ghz {
        let psi0 = basis_state(0, 8);
        let rho0 = &psi0 * psi0.adjoint();
        let (rho, err) = run_schedule(&schedule, &ham, &collapse, &rho0)?;
        let psi = &ideal * &psi0;
        let f = (psi.adjoint() * &rho * &psi)[(0, 0)].re;
        (f, err, Some(rho))
    } else if collapse.is_empty() {
        let u = schedule_unitary(&schedule, &ham)?;
        (average_gate_fidelity(&ideal, &u), 0.0, Some(u))
    } else {
        let probes = probe_states();
        let mut total = 0.0;
        let mut worst: f64 = 0.0;
        for psi0 in &probes {
            let rho0 = psi0 * psi0.adjoint();
            let (rho, err) = run_schedule(&schedule, &ham, &collapse, &rho0)?;
            let psi = &ideal * psi0;
            total += (psi.adjoint() * &rho * &psi)[(0, 0)].re;
            worst = worst.max(err);
        }
        (total / probes.len() as f64, worst, None)
    };

    Ok(SimulationResult {
        target: target.kind,
        fidelity,
        duration: schedule.duration(),
        flat_top: pulse.flat_top,
        drive_amplitude,
        trace_error,
        final_state,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmplitudePoint {
    pub amplitude: f64,
    pub fidelity: Option<f64>,
    pub duration: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmplitudeSweep {
    pub best: SimulationResult,
    pub curve: Vec<AmplitudePoint>,
}

/// Runs the protocol at every grid amplitude and keeps the best fidelity.
pub fn amplitude_sweep(
    target: &GateTarget,
    coeffs: &PauliCoefficients,
    reference_amplitude: f64,
    grid: &[f64],
    options: &ProtocolOptions,
) -> Result<AmplitudeSweep> {
    if grid.is_empty() {
        return Err(PcrError::config("amplitude grid is empty"));
    }
    let runs: Vec<Result<SimulationResult>> = grid
        .par_iter()
        .map(|&a| run_protocol(target, coeffs, reference_amplitude, a, options))
        .collect();
    let mut best: Option<SimulationResult> = None;
    let mut curve = Vec::with_capacity(grid.len());
    let mut errors = Vec::new();
    for (&a, r) in grid.iter().zip(runs) {
        match r {
            Ok(res) => {
                curve.push(AmplitudePoint {
                    amplitude: a,
                    fidelity: Some(res.fidelity),
                    duration: Some(res.duration),
                    error: None,
                });
                if best.as_ref().map_or(true, |b| res.fidelity > b.fidelity) {
                    best = Some(res);
                }
            }
            Err(e) => {
                errors.push(format!("{:.1} MHz: {e}", a * 1e-6));
                curve.push(AmplitudePoint {
                    amplitude: a,
                    fidelity: None,
                    duration: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    match best {
        Some(best) => Ok(AmplitudeSweep { best, curve }),
        None => Err(PcrError::numeric(format!(
            "every amplitude failed: {}",
            errors.join("; ")
        ))),
    }
}

/// Widths of the uniform perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationWidths {
    /// Relative half-width on each A_j.
    pub drive_relative: f64,
    /// Half-width on each coupler frequency [Hz].
    pub coupler_hz: f64,
}

impl Default for PerturbationWidths {
    fn default() -> Self {
        PerturbationWidths {
            drive_relative: 0.02,
            coupler_hz: 5e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub nominal: f64,
    /// Fidelity per sample, `None` where the sample failed.
    pub samples: Vec<Option<f64>>,
    pub failures: Vec<String>,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Perturbed parameter vector of one sample.
pub fn perturb(params: &CellParams, widths: &PerturbationWidths, seed: u64) -> CellParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.0;
    for k in 0..2 {
        let u: f64 = if widths.coupler_hz > 0.0 {
            rng.gen_range(-widths.coupler_hz..widths.coupler_hz)
        } else {
            0.0
        };
        p[k] += u * 1e-9;
    }
    for k in 2..5 {
        let u: f64 = if widths.drive_relative > 0.0 {
            rng.gen_range(-widths.drive_relative..widths.drive_relative)
        } else {
            0.0
        };
        p[k] *= 1.0 + u;
    }
    CellParams(p)
}

/// Inputs shared by every robustness sample.
#[derive(Debug, Clone)]
pub struct RobustnessSetup<'a> {
    pub target: &'a GateTarget,
    pub spec: &'a CircuitSpec,
    pub params: CellParams,
    pub settings: &'a OptimizeSettings,
    /// Amplitude the protocol runs at [Hz].
    pub drive_amplitude: f64,
    pub options: ProtocolOptions,
}

/// Re-extracts coefficients at perturbed parameters and reruns the protocol
/// with the nominal pulse timing and drive frequency. Sample `k` draws from
/// seed `base_seed + k`.
pub fn robustness_sweep(
    setup: &RobustnessSetup<'_>,
    n_samples: usize,
    widths: &PerturbationWidths,
    base_seed: u64,
) -> Result<RobustnessReport> {
    if n_samples < 8 {
        return Err(PcrError::config("robustness sweep needs at least 8 samples"));
    }
    let basis = cell_basis(setup.settings.cutoff)?;
    let nominal_point = evaluate_point(setup.spec, &setup.params, setup.settings, &basis)?;
    let nominal = run_protocol(
        setup.target,
        &nominal_point.coefficients,
        setup.settings.reference_amplitude,
        setup.drive_amplitude,
        &setup.options,
    )?;
    let fixed = OptimizeSettings {
        drive_frequency: DriveFrequency::Fixed(nominal_point.drive.drive_freq),
        ..setup.settings.clone()
    };
    let options = ProtocolOptions {
        timing: PulseTiming::FlatTop(nominal.flat_top),
        ..setup.options
    };

    let results: Vec<Result<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let p = perturb(&setup.params, widths, base_seed.wrapping_add(k as u64));
            let point = evaluate_point(setup.spec, &p, &fixed, &basis)?;
            let r = run_protocol(
                setup.target,
                &point.coefficients,
                fixed.reference_amplitude,
                setup.drive_amplitude,
                &options,
            )?;
            Ok(r.fidelity)
        })
        .collect();

    let mut samples = Vec::with_capacity(n_samples);
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(f) => {
                samples.push(Some(f));
                ok.push(f);
            }
            Err(e) => {
                samples.push(None);
                failures.push(format!("sample {k}: {e}"));
            }
        }
    }
    if ok.is_empty() {
        return Err(PcrError::numeric(format!("all {n_samples} robustness samples failed")));
    }
    ok.sort_by(|a, b| a.total_cmp(b));
    let median = if ok.len() % 2 == 1 {
        ok[ok.len() / 2]
    } else {
        0.5 * (ok[ok.len() / 2 - 1] + ok[ok.len() / 2])
    };
    Ok(RobustnessReport {
        nominal: nominal.fidelity,
        samples,
        failures,
        min: ok[0],
        median,
        max: *ok.last().unwrap(),
    })
}

/// Ideal coefficient pattern of a target at ZZX = α_opt, for tests and demos.
pub fn ideal_coefficients(target: &GateTarget) -> PauliCoefficients {
    let mut c = PauliCoefficients::zero();
    let a = target.zzx_sign() * target.alpha_opt;
    c.set(word("ZZX"), a);
    for rel in &target.relations {
        if let crate::gates::Relation::Tied { word: w, sign, .. } = rel {
            c.set(*w, sign * a);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boson::propagator;
    use crate::gates::{ghz_state, state_fidelity};

    fn rho_of(psi: &CVec) -> CMat {
        psi * psi.adjoint()
    }

    #[test]
    fn envelope_shape_and_area() {
        for shape in [EdgeShape::RaisedCosine, EdgeShape::Gaussian] {
            let p = PcrPulse::with_area(200e-9, EDGE_TIME, shape).unwrap();
            assert_eq!(p.scale(0.0), 0.0);
            assert_eq!(p.scale(p.duration()), 0.0);
            assert_eq!(p.scale(EDGE_TIME + 1e-9), 1.0);
            assert!(p.scale(1e-12) < 1e-6);
            // trapezoid check of the area
            let n = 200_000;
            let h = p.duration() / n as f64;
            let mut s = 0.0;
            for k in 0..n {
                s += 0.5 * (p.scale(k as f64 * h) + p.scale((k + 1) as f64 * h)) * h;
            }
            assert!((s - 200e-9).abs() < 1e-13, "{shape:?}: {s}");
        }
        let p = PcrPulse::with_area(250e-9, EDGE_TIME, EdgeShape::RaisedCosine).unwrap();
        assert!((p.flat_top - 240e-9).abs() < 1e-18);
        assert!(PcrPulse::with_area(5e-9, EDGE_TIME, EdgeShape::RaisedCosine).is_err());
    }

    #[test]
    fn calibrated_angle_is_exact() {
        let t = GateTarget::new(TargetKind::Ghz);
        let area = calibrated_area(&t, 0.5e6).unwrap();
        assert!((area - 250e-9).abs() < 1e-18);
        let p = PcrPulse::with_area(area, EDGE_TIME, EdgeShape::RaisedCosine).unwrap();
        let theta = TAU * 2.0 * 0.5e6 * p.area();
        assert!((theta - t.zzx_angle()).abs() < 1e-6);
        let it = GateTarget::new(TargetKind::IToffoli);
        assert!((calibrated_area(&it, 0.5e6).unwrap() - 125e-9).abs() < 1e-18);
        assert!(calibrated_area(&t, -0.5e6).is_err());
    }

    #[test]
    fn amplitude_damping() {
        let t1 = 20e-6;
        let noise = NoiseModel {
            t1: [t1, f64::INFINITY, f64::INFINITY],
            t2: [2.0 * t1, f64::INFINITY, f64::INFINITY],
        };
        let ops = noise.collapse_operators([0, 2, 1]).unwrap();
        assert_eq!(ops.len(), 1);
        let rho0 = rho_of(&basis_state(4, 8));
        let out = evolve_lindblad(|_| CMat::zeros(8, 8), &ops, &rho0, &[0.0, t1]).unwrap();
        let p = out[1][(4, 4)].re;
        assert!((p / (-1.0f64).exp() - 1.0).abs() < 1e-3, "{p}");
        assert!((out[1].trace().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pure_dephasing() {
        let t1 = f64::INFINITY;
        let t2 = 10e-6;
        let noise = NoiseModel {
            t1: [f64::INFINITY, f64::INFINITY, t1],
            t2: [f64::INFINITY, f64::INFINITY, t2],
        };
        let ops = noise.collapse_operators([0, 1, 2]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut psi = CVec::zeros(8);
        psi[0] = c(r);
        psi[1] = c(r);
        let t = 7e-6;
        let out = evolve_lindblad(|_| CMat::zeros(8, 8), &ops, &rho_of(&psi), &[0.0, t]).unwrap();
        let coherence = out[1][(0, 1)].norm();
        let expected = 0.5 * (-t / t2).exp();
        assert!((coherence / expected - 1.0).abs() < 1e-3);
    }

    #[test]
    fn invalid_coherence_times() {
        assert!(NoiseModel::uniform(100e-6, 250e-6).validate().is_err());
        assert!(NoiseModel::uniform(100e-6, 200e-6).validate().is_ok());
    }

    #[test]
    fn noiseless_matches_exponential() {
        let mut coeffs = PauliCoefficients::zero();
        coeffs.set(word("ZZX"), 0.7e6);
        coeffs.set(word("IZY"), -0.3e6);
        coeffs.set(word("ZIZ"), 0.2e6);
        let h = coeffs.to_matrix();
        let psi0 = probe_states()[9].clone();
        let t = 400e-9;
        let out = evolve_lindblad(|_| h.clone(), &[], &rho_of(&psi0), &[0.0, t]).unwrap();
        let psi = propagator(&h, t).unwrap() * &psi0;
        let f = (psi.adjoint() * &out[1] * &psi)[(0, 0)].re;
        assert!((1.0 - f).abs() < 1e-7);
        let u = evolve_unitary(|_| h.clone(), 0.0, t, 8).unwrap();
        assert!(state_fidelity(&(u * &psi0), &psi) > 1.0 - 1e-7);
        let exact = evolve_constant(&h, &[], &rho_of(&psi0), t);
        assert!((1.0 - (psi.adjoint() * exact * &psi)[(0, 0)].re).abs() < 1e-12);
    }

    #[test]
    fn ideal_patterns_reach_unit_fidelity() {
        for kind in [TargetKind::Ghz, TargetKind::IToffoli, TargetKind::Czz] {
            let t = GateTarget::new(kind);
            let r = run_protocol(&t, &ideal_coefficients(&t), 60e6, 60e6, &ProtocolOptions::default()).unwrap();
            assert!(1.0 - r.fidelity < 1e-9, "{kind:?}: {}", r.fidelity);
        }
        // the static ZZI term keeps acting at full strength during both edges
        let t = GateTarget::new(TargetKind::Ccnot);
        let r = run_protocol(&t, &ideal_coefficients(&t), 60e6, 60e6, &ProtocolOptions::default()).unwrap();
        let extra = TAU * t.alpha_opt * EDGE_TIME;
        let expected = (64.0 * extra.cos().powi(2) + 8.0) / 72.0;
        assert!((r.fidelity - expected).abs() < 1e-9, "{} vs {expected}", r.fidelity);
        let t = GateTarget::new(TargetKind::Ghz);
        let r = run_protocol(&t, &ideal_coefficients(&t), 60e6, 60e6, &ProtocolOptions::default()).unwrap();
        assert!((r.duration - 320e-9).abs() < 1e-15);
        let rho = r.final_state.unwrap();
        assert!((1.0 - (ghz_state().adjoint() * rho * ghz_state())[(0, 0)].re).abs() < 1e-9);
    }

    #[test]
    fn schedule_durations() {
        let p = PcrPulse::with_area(100e-9, EDGE_TIME, EdgeShape::RaisedCosine).unwrap();
        let tau = p.duration();
        for (kind, extra) in [
            (TargetKind::Ghz, 60e-9),
            (TargetKind::Czz, 60e-9),
            (TargetKind::Ccnot, 30e-9),
            (TargetKind::IToffoli, 0.0),
        ] {
            let d = PulseSchedule::for_target(kind, p).duration();
            assert!((d - tau - extra).abs() < 1e-18, "{kind:?}");
        }
    }

    #[test]
    fn noisy_ghz_in_range_and_monotone_in_t1() {
        let t = GateTarget::new(TargetKind::Ghz);
        let coeffs = ideal_coefficients(&t);
        let mut last = 1.0;
        for t1 in [300e-6, 100e-6, 30e-6] {
            let opts = ProtocolOptions {
                noise: NoiseModel::uniform(t1, t1),
                ..Default::default()
            };
            // pulse area 180 ns gives 250 ns in total
            let r = run_protocol(&t, &coeffs, 60e6, 60e6 * 250.0 / 180.0, &opts).unwrap();
            assert!(r.fidelity < last);
            if t1 == 300e-6 {
                assert!((r.duration - 250e-9).abs() < 1e-12);
                assert!(r.fidelity > 0.95 && r.fidelity < 1.0, "{}", r.fidelity);
            }
            last = r.fidelity;
        }
    }

    #[test]
    fn noisy_gate_fidelity_uses_probes() {
        let t = GateTarget::new(TargetKind::IToffoli);
        let opts = ProtocolOptions {
            noise: NoiseModel::uniform(300e-6, 300e-6),
            ..Default::default()
        };
        let r = run_protocol(&t, &ideal_coefficients(&t), 60e6, 60e6, &opts).unwrap();
        assert!(r.fidelity > 0.99 && r.fidelity < 1.0);
        assert_eq!(probe_states().len(), 20);
        for p in probe_states() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_picks_grid_argmax() {
        let t = GateTarget::new(TargetKind::Ghz);
        let mut coeffs = ideal_coefficients(&t);
        coeffs.set(word("IIX"), 0.05e6);
        let opts = ProtocolOptions {
            noise: NoiseModel::uniform(50e-6, 50e-6),
            ..Default::default()
        };
        let grid = [30e6, 60e6, 90e6, 120e6];
        let s = amplitude_sweep(&t, &coeffs, 60e6, &grid, &opts).unwrap();
        let best = s.curve.iter().filter_map(|p| p.fidelity).fold(0.0, f64::max);
        assert_eq!(s.best.fidelity, best);
        let single = amplitude_sweep(&t, &coeffs, 60e6, &[60e6], &opts).unwrap();
        assert_eq!(single.best.drive_amplitude, 60e6);
        assert!(amplitude_sweep(&t, &coeffs, 60e6, &[], &opts).is_err());
    }

    #[test]
    fn perturbation_is_seeded() {
        let p = CellParams([5.3, 5.7, 0.1, 0.01, 1.5]);
        let w = PerturbationWidths::default();
        assert_eq!(perturb(&p, &w, 7), perturb(&p, &w, 7));
        assert_ne!(perturb(&p, &w, 7), perturb(&p, &w, 8));
        let q = perturb(&p, &w, 3);
        assert!((q.0[0] - p.0[0]).abs() <= 0.005 && (q.0[4] / p.0[4] - 1.0).abs() <= 0.02);
        let zero = PerturbationWidths {
            drive_relative: 0.0,
            coupler_hz: 0.0,
        };
        assert_eq!(perturb(&p, &zero, 3), p);
    }
}
