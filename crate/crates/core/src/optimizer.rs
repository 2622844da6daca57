//! Powell conjugate-direction search over (ω_C12, ω_C23, A1, A2, A3).
//!
//! Parameter vectors use GHz for the two coupler frequencies and bare numbers
//! for the drive scale factors, which is also the unit of the bound penalty.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boson::ProductBasis;
use crate::circuit::{cell_basis, CircuitSpec, DriveSpec};
use crate::effective::{extract_in, DriveFrequency, Partition};
use crate::error::{PcrError, Result};
use crate::gates::GateTarget;
use crate::pauli::PauliCoefficients;

pub const N_PARAMS: usize = 5;
pub const PARAM_NAMES: [&str; N_PARAMS] = ["omega_c12_ghz", "omega_c23_ghz", "a1", "a2", "a3"];

/// Weight of the quadratic hinge penalty on out-of-bounds parameters.
pub const BOUND_PENALTY: f64 = 1e3;
/// Cost assigned to a point where the effective model is invalid.
pub const FAILURE_COST: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub lower: [f64; N_PARAMS],
    pub upper: [f64; N_PARAMS],
}

impl Default for ParameterBounds {
    fn default() -> Self {
        ParameterBounds {
            lower: [4.9, 4.9, -1.5, -0.1, -1.5],
            upper: [7.0, 7.0, 1.5, 0.1, 1.5],
        }
    }
}

impl ParameterBounds {
    pub fn validate(&self) -> Result<()> {
        for i in 0..N_PARAMS {
            if !(self.lower[i] < self.upper[i]) {
                return Err(PcrError::config(format!(
                    "bounds for {}: lower {} must be below upper {}",
                    PARAM_NAMES[i], self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| v.clamp(self.lower[i], self.upper[i]))
            .collect()
    }

    /// Σ 10³·excess² over all parameters.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let excess = (self.lower[i] - v).max(v - self.upper[i]).max(0.0);
                BOUND_PENALTY * excess * excess
            })
            .sum()
    }

    fn generic(lower: Vec<f64>, upper: Vec<f64>) -> GenericBounds {
        GenericBounds { lower, upper }
    }
}

/// Box bounds of arbitrary dimension for [`powell_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenericBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl GenericBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        ParameterBounds::generic(lower, upper)
    }

    pub fn symmetric(n: usize, half_width: f64) -> Self {
        GenericBounds::new(vec![-half_width; n], vec![half_width; n])
    }

    fn clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| v.clamp(self.lower[i], self.upper[i]))
            .collect()
    }

    /// Interval of α for which `x + α·u` stays in the box (x assumed inside).
    fn step_range(&self, x: &[f64], u: &[f64]) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..x.len() {
            if u[i] != 0.0 {
                let a = (self.lower[i] - x[i]) / u[i];
                let b = (self.upper[i] - x[i]) / u[i];
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
        }
        (lo.min(0.0), hi.max(0.0))
    }
}

impl From<&ParameterBounds> for GenericBounds {
    fn from(b: &ParameterBounds) -> Self {
        GenericBounds::new(b.lower.to_vec(), b.upper.to_vec())
    }
}

/// (ω_C12 [GHz], ω_C23 [GHz], A1, A2, A3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams(pub [f64; N_PARAMS]);

impl CellParams {
    pub fn from_slice(x: &[f64]) -> Self {
        let mut p = [0.0; N_PARAMS];
        p.copy_from_slice(&x[..N_PARAMS]);
        CellParams(p)
    }

    /// Circuit with the coupler frequencies replaced.
    pub fn apply_to(&self, spec: &CircuitSpec) -> CircuitSpec {
        let mut s = spec.clone();
        s.coupler_freqs = [self.0[0] * 1e9, self.0[1] * 1e9];
        s
    }

    /// Drive with signed scale factors and zero phases (a negative A_j is
    /// the φ_j = π calibration).
    pub fn drive(&self, reference_amplitude: f64, drive_freq: f64) -> DriveSpec {
        DriveSpec::new(reference_amplitude, [self.0[2], self.0[3], self.0[4]], drive_freq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub wanted: f64,
    pub unwanted: f64,
    pub constraint: f64,
    pub total: f64,
    /// Per-relation and per-word contributions, in evaluation order.
    pub terms: Vec<(String, f64)>,
    /// Set when the coefficients could not be evaluated.
    pub failure: Option<String>,
}

impl CostBreakdown {
    fn assemble(wanted: f64, unwanted: f64, constraint: f64, terms: Vec<(String, f64)>, failure: Option<String>) -> Self {
        CostBreakdown {
            wanted,
            unwanted,
            constraint,
            total: wanted + unwanted + constraint,
            terms,
            failure,
        }
    }

    pub fn failed(message: String, constraint: f64) -> Self {
        CostBreakdown::assemble(FAILURE_COST, 0.0, constraint, Vec::new(), Some(message))
    }
}

/// Normalized quadratic cost of a coefficient set against a target.
pub fn cost(target: &GateTarget, coeffs: &PauliCoefficients, params: &[f64], bounds: &ParameterBounds) -> CostBreakdown {
    let a = target.alpha_opt;
    let mut terms = Vec::new();
    let mut wanted = 0.0;
    for (k, rel) in target.relations.iter().enumerate() {
        let r = rel.residual(|w| coeffs.get(w)) / a;
        wanted += r * r;
        terms.push((format!("relation{k}"), r * r));
    }
    let mut unwanted = 0.0;
    for w in &target.unwanted {
        let r = coeffs.get(*w) / a;
        unwanted += r * r;
        terms.push((w.to_string(), r * r));
    }
    CostBreakdown::assemble(wanted, unwanted, bounds.penalty(params), terms, None)
}

/// Largest relation residual [Hz].
pub fn max_residual(target: &GateTarget, coeffs: &PauliCoefficients) -> f64 {
    target
        .relations
        .iter()
        .map(|r| r.residual(|w| coeffs.get(w)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowellOptions {
    /// Convergence threshold on ‖x_new − x_start‖ of a major iteration.
    pub eps: f64,
    pub max_iter: usize,
    /// Relative tolerance of the golden-section line search.
    pub line_tol: f64,
    /// Direction matrix condition number that triggers a reset.
    pub max_condition: f64,
}

impl Default for PowellOptions {
    fn default() -> Self {
        PowellOptions {
            eps: 1e-6,
            max_iter: 100,
            line_tol: 1e-4,
            max_condition: 1e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub params: Vec<f64>,
    pub cost: f64,
    pub breakdown: Option<CostBreakdown>,
    /// Cost relative to the starting point.
    pub seed_ratio: f64,
    pub directions: Vec<Vec<f64>>,
    pub direction_reset: bool,
    pub evaluations: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OptimizationTrace {
    pub initial_cost: f64,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub evaluations: usize,
}

impl OptimizationTrace {
    pub fn final_cost(&self) -> f64 {
        self.iterations.last().map(|r| r.cost).unwrap_or(self.initial_cost)
    }

    pub fn is_monotone(&self) -> bool {
        let mut prev = self.initial_cost;
        for r in &self.iterations {
            if r.cost > prev {
                return false;
            }
            prev = r.cost;
        }
        true
    }
}

struct Objective<'a, F: FnMut(&[f64]) -> f64> {
    f: F,
    bounds: &'a GenericBounds,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Objective<'_, F> {
    fn at(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    /// Value along `x + α·u` with the point clipped into the box.
    fn along(&mut self, x: &[f64], u: &[f64], alpha: f64) -> (Vec<f64>, f64) {
        let p: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + alpha * b).collect();
        let p = self.bounds.clip(&p);
        let v = self.at(&p);
        (p, v)
    }
}

const GOLDEN: f64 = 1.618_033_988_749_895;

/// Bracketing followed by golden-section search. Returns the best point seen
/// if it strictly improves on `f0`, otherwise the start point.
fn line_minimize<F: FnMut(&[f64]) -> f64>(
    obj: &mut Objective<'_, F>,
    x: &[f64],
    f0: f64,
    u: &[f64],
    step: f64,
    rel_tol: f64,
) -> (Vec<f64>, f64, f64) {
    let mut best = (x.to_vec(), f0, 0.0);
    // trial steps stay on the part of the line inside the box, otherwise the
    // clipped objective goes flat past a wall and the bracket collapses onto it
    let (amin, amax) = obj.bounds.step_range(x, u);
    let fit = |alpha: f64| alpha.clamp(amin, amax);
    let track = |p: Vec<f64>, v: f64, alpha: f64, best: &mut (Vec<f64>, f64, f64)| {
        if v < best.1 {
            *best = (p, v, alpha);
        }
    };

    // Find a downhill first step, shrinking if neither side improves.
    let mut h = step;
    let mut a = 0.0;
    let mut found = None;
    for _ in 0..8 {
        for trial in [fit(h), fit(-h)] {
            if trial == 0.0 {
                continue;
            }
            let (p, v) = obj.along(x, u, trial);
            track(p, v, trial, &mut best);
            if v < f0 {
                found = Some((trial, v));
                break;
            }
        }
        if found.is_some() {
            break;
        }
        h *= 0.1;
    }
    let Some((mut b, mut fb)) = found else {
        return best;
    };

    // Expand until the function rises.
    let mut c = fit(b + GOLDEN * (b - a));
    let (p, mut fc) = obj.along(x, u, c);
    track(p, fc, c, &mut best);
    let mut expansions = 0;
    while fc < fb && expansions < 50 && c != b {
        a = b;
        b = c;
        fb = fc;
        c = fit(b + GOLDEN * (b - a));
        if c == b {
            break;
        }
        let (p, v) = obj.along(x, u, c);
        track(p, v, c, &mut best);
        fc = v;
        expansions += 1;
    }

    // Golden section on [a, c] around b.
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let r = 1.0 / GOLDEN;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (p, mut f1) = obj.along(x, u, x1);
    track(p, f1, x1, &mut best);
    let (p, mut f2) = obj.along(x, u, x2);
    track(p, f2, x2, &mut best);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_tol * mid.abs() + 1e-15 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            let (p, v) = obj.along(x, u, x1);
            track(p, v, x1, &mut best);
            f1 = v;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            let (p, v) = obj.along(x, u, x2);
            track(p, v, x2, &mut best);
            f2 = v;
        }
    }
    best
}

fn condition_number(dirs: &[Vec<f64>]) -> f64 {
    let n = dirs.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| dirs[j][i]);
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn standard_directions(bounds: &GenericBounds) -> Vec<Vec<f64>> {
    let n = bounds.lower.len();
    (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            d
        })
        .collect()
}

/// Initial trial step per coordinate: 5% of the box width.
fn initial_steps(bounds: &GenericBounds) -> Vec<f64> {
    bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(l, u)| 0.05 * (u - l))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Powell's conjugate-direction method inside a box.
///
/// Each major iteration minimizes along every direction in turn, then along
/// the net displacement u, which replaces the direction that produced the
/// largest single decrease in step length. Stops when the displacement of a
/// major iteration is below `eps`. Points are clipped into the box before
/// every evaluation.
pub fn powell_minimize<F: FnMut(&[f64]) -> f64>(
    objective: F,
    x0: &[f64],
    bounds: &GenericBounds,
    options: &PowellOptions,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> (Vec<f64>, OptimizationTrace) {
    let n = x0.len();
    let start = Instant::now();
    let mut obj = Objective {
        f: objective,
        bounds,
        evaluations: 0,
    };
    let mut x = bounds.clip(x0);
    let mut fx = obj.at(&x);
    let mut trace = OptimizationTrace {
        initial_cost: fx,
        ..Default::default()
    };
    let steps = initial_steps(bounds);
    let mut dirs = standard_directions(bounds);
    let mut scale: Vec<f64> = steps.clone();

    for iteration in 1..=options.max_iter {
        let x_start = x.clone();
        let mut longest = (0usize, -1.0);
        for i in 0..n {
            let (p, v, alpha) = line_minimize(&mut obj, &x, fx, &dirs[i], scale[i], options.line_tol);
            let moved = norm(&p.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
            if alpha != 0.0 {
                scale[i] = alpha.abs().max(1e-12);
            }
            x = p;
            fx = v;
            if moved > longest.1 {
                longest = (i, moved);
            }
        }
        let u: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let displacement = norm(&u);
        let mut reset = false;
        if displacement >= options.eps {
            let (p, v, _) = line_minimize(&mut obj, &x, fx, &u, 1.0, options.line_tol);
            x = p;
            fx = v;
            dirs[longest.0] = u.clone();
            scale[longest.0] = 1.0;
            if condition_number(&dirs) > options.max_condition {
                dirs = standard_directions(bounds);
                scale = steps.clone();
                reset = true;
            }
        }
        let record = IterationRecord {
            iteration,
            params: x.clone(),
            cost: fx,
            breakdown: None,
            seed_ratio: if trace.initial_cost > 0.0 { fx / trace.initial_cost } else { 0.0 },
            directions: dirs.clone(),
            direction_reset: reset,
            evaluations: obj.evaluations,
            elapsed_s: start.elapsed().as_secs_f64(),
        };
        on_iteration(&record);
        trace.iterations.push(record);
        let total_move = norm(&x.iter().zip(&x_start).map(|(a, b)| a - b).collect::<Vec<_>>());
        if total_move < options.eps {
            trace.converged = true;
            break;
        }
    }
    trace.evaluations = obj.evaluations;
    (x, trace)
}

/// Settings of the end-to-end optimization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    /// Ω/2π [Hz].
    pub reference_amplitude: f64,
    pub cutoff: usize,
    pub partition: Partition,
    pub drive_frequency: DriveFrequency,
    pub powell: PowellOptions,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        OptimizeSettings {
            reference_amplitude: 60e6,
            cutoff: 4,
            partition: Partition::ControlBlocks,
            drive_frequency: DriveFrequency::NumericDressed,
            powell: PowellOptions {
                eps: 1e-5,
                max_iter: 40,
                ..Default::default()
            },
        }
    }
}

/// Coefficients at a parameter point together with the drive actually used.
pub struct PointEvaluation {
    pub spec: CircuitSpec,
    pub drive: DriveSpec,
    pub coefficients: PauliCoefficients,
    pub min_overlap: f64,
}

pub fn evaluate_point(
    spec: &CircuitSpec,
    params: &CellParams,
    settings: &OptimizeSettings,
    basis: &Arc<ProductBasis>,
) -> Result<PointEvaluation> {
    let s = params.apply_to(spec);
    let f = settings.drive_frequency.resolve(&s, basis)?;
    let drive = params.drive(settings.reference_amplitude, f);
    let ex = extract_in(&s, &drive, basis, settings.partition)?;
    Ok(PointEvaluation {
        spec: s,
        drive,
        coefficients: ex.coefficients,
        min_overlap: ex.assignment.min_overlap(),
    })
}

/// One JSON line per objective evaluation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvaluationRecord {
    pub run: String,
    pub evaluation: usize,
    pub params: Vec<f64>,
    pub cost: CostBreakdown,
}

/// Shared append-only sink for evaluation records; concurrent runs may share it.
#[derive(Clone)]
pub struct TraceSink {
    inner: Arc<Mutex<Box<dyn Write + Send>>>,
}

impl TraceSink {
    pub fn new(w: impl Write + Send + 'static) -> Self {
        TraceSink {
            inner: Arc::new(Mutex::new(Box::new(w))),
        }
    }

    pub fn to_file(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TraceSink::new(std::io::BufWriter::new(f)))
    }

    pub fn append(&self, record: &EvaluationRecord) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| PcrError::Io(e.to_string()))?;
        let mut w = self.inner.lock().map_err(|_| PcrError::Io("trace sink poisoned".into()))?;
        writeln!(w, "{line}")?;
        Ok(())
    }

    pub fn flush(&self) -> Result<()> {
        let mut w = self.inner.lock().map_err(|_| PcrError::Io("trace sink poisoned".into()))?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CellOptimization {
    pub params: CellParams,
    pub coefficients: PauliCoefficients,
    pub breakdown: CostBreakdown,
    pub trace: OptimizationTrace,
    pub drive: DriveSpec,
}

/// Runs the Powell loop with the nonperturbative pipeline as objective.
pub fn optimize_cell(
    spec: &CircuitSpec,
    target: &GateTarget,
    seed: &CellParams,
    bounds: &ParameterBounds,
    settings: &OptimizeSettings,
    sink: Option<(&TraceSink, &str)>,
) -> Result<CellOptimization> {
    bounds.validate()?;
    spec.validate()?;
    let basis = cell_basis(settings.cutoff)?;
    let generic = GenericBounds::from(bounds);
    let mut cache: HashMap<Vec<u64>, CostBreakdown> = HashMap::new();
    let mut counter = 0usize;
    let mut sink_error = None;

    let mut objective = |x: &[f64]| -> f64 {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(b) = cache.get(&key) {
            return b.total;
        }
        let params = CellParams::from_slice(x);
        let breakdown = match evaluate_point(spec, &params, settings, &basis) {
            Ok(ev) => cost(target, &ev.coefficients, x, bounds),
            Err(e) => CostBreakdown::failed(e.to_string(), bounds.penalty(x)),
        };
        counter += 1;
        if let Some((s, run)) = sink {
            let rec = EvaluationRecord {
                run: run.to_string(),
                evaluation: counter,
                params: x.to_vec(),
                cost: breakdown.clone(),
            };
            if let Err(e) = s.append(&rec) {
                sink_error = Some(e);
            }
        }
        let total = breakdown.total;
        cache.insert(key, breakdown);
        total
    };

    let (x, mut trace) = powell_minimize(&mut objective, &seed.0, &generic, &settings.powell, |_| {});
    if let Some(e) = sink_error {
        return Err(e);
    }
    if let Some((s, _)) = sink {
        s.flush()?;
    }
    for rec in &mut trace.iterations {
        let key: Vec<u64> = rec.params.iter().map(|v| v.to_bits()).collect();
        rec.breakdown = cache.get(&key).cloned();
    }
    let params = CellParams::from_slice(&x);
    let ev = evaluate_point(spec, &params, settings, &basis)?;
    let breakdown = cost(target, &ev.coefficients, &x, bounds);
    Ok(CellOptimization {
        params,
        coefficients: ev.coefficients,
        breakdown,
        trace,
        drive: ev.drive,
    })
}
