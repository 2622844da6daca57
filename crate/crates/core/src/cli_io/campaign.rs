//! Cell × target campaigns: seed, optimize, re-verify, simulate, perturb.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::device::{Device, UnitCell};
use crate::circuit::cell_basis;
use crate::dynamics::{
    amplitude_sweep, robustness_sweep, run_protocol, NoiseModel, PerturbationWidths, ProtocolOptions,
    RobustnessSetup,
};
use crate::error::{PcrError, Result};
use crate::gates::{GateTarget, TargetKind};
use crate::optimizer::{
    evaluate_point, max_residual, optimize_cell, CellParams, OptimizeSettings, ParameterBounds, TraceSink,
};
use crate::pauli::{PauliCoefficients, PauliWord};
use crate::perturbative::{seed_parameters, SeedTable};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const TRACE_FILE: &str = "evaluations.jsonl";

/// Default amplitude grid: Ω/2π from 20 to 250 MHz in 5 MHz steps [Hz].
pub fn default_amplitude_grid() -> Vec<f64> {
    (4..=50).map(|k| k as f64 * 5e6).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignOptions {
    pub targets: Vec<TargetKind>,
    /// 1-based cell indices.
    pub cells: Vec<usize>,
    pub settings: OptimizeSettings,
    /// Ω/2π values of the simulation sweep [Hz].
    pub amplitude_grid: Vec<f64>,
    /// 0 skips the robustness stage; otherwise at least 8.
    pub robust_samples: usize,
    pub widths: PerturbationWidths,
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    pub resume: bool,
    /// Also log every objective evaluation.
    pub trace_evaluations: bool,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        CampaignOptions {
            targets: TargetKind::MAIN.to_vec(),
            cells: Vec::new(),
            settings: OptimizeSettings::default(),
            amplitude_grid: default_amplitude_grid(),
            robust_samples: 0,
            widths: PerturbationWidths::default(),
            seed: 0,
            jobs: 0,
            resume: false,
            trace_evaluations: false,
        }
    }
}

/// One cell × target outcome. Optional fields are absent when the stage that
/// produces them did not run or failed; `error` then names the failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub cell: usize,
    pub qubits: [String; 3],
    pub target: TargetKind,
    pub seed_source: Option<String>,
    pub seed: Option<[f64; 5]>,
    pub params: Option<[f64; 5]>,
    pub initial_cost: Option<f64>,
    pub final_cost: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub evaluations: Option<usize>,
    /// Largest wanted-relation residual [MHz].
    pub max_residual_mhz: Option<f64>,
    /// Coefficients at the optimum [Hz].
    pub coefficients: Option<PauliCoefficients>,
    /// Re-evaluation at the optimum reproduced the optimizer's coefficients exactly.
    pub verified: Option<bool>,
    pub fidelity_noiseless: Option<f64>,
    /// Best Ω/2π of the noisy sweep [MHz].
    pub best_amplitude_mhz: Option<f64>,
    /// Fidelity with the cell's T1/T2 at the best amplitude.
    pub fidelity: Option<f64>,
    pub duration_ns: Option<f64>,
    pub flat_top_ns: Option<f64>,
    pub robust_min: Option<f64>,
    pub robust_median: Option<f64>,
    pub robust_max: Option<f64>,
    pub robust_failures: Option<usize>,
    pub error: Option<String>,
    /// Process exit code class of `error` (2 config, 3 numeric, 4 non-convergence).
    pub error_code: Option<i32>,
}

impl CampaignRow {
    fn empty(cell: &UnitCell, target: TargetKind) -> Self {
        CampaignRow {
            cell: cell.index,
            qubits: cell.qubits.clone(),
            target,
            seed_source: None,
            seed: None,
            params: None,
            initial_cost: None,
            final_cost: None,
            converged: None,
            iterations: None,
            evaluations: None,
            max_residual_mhz: None,
            coefficients: None,
            verified: None,
            fidelity_noiseless: None,
            best_amplitude_mhz: None,
            fidelity: None,
            duration_ns: None,
            flat_top_ns: None,
            robust_min: None,
            robust_median: None,
            robust_max: None,
            robust_failures: None,
            error: None,
            error_code: None,
        }
    }

    pub fn key(&self) -> (usize, TargetKind) {
        (self.cell, self.target)
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    fn csv_record(&self) -> Vec<String> {
        fn f(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let arr = |a: Option<[f64; 5]>, k: usize| f(a.map(|a| a[k]));
        let mut r = vec![
            self.cell.to_string(),
            self.qubits.join("-"),
            self.target.to_string(),
            self.seed_source.clone().unwrap_or_default(),
        ];
        r.extend((0..5).map(|k| arr(self.seed, k)));
        r.extend((0..5).map(|k| arr(self.params, k)));
        r.extend([
            f(self.initial_cost),
            f(self.final_cost),
            self.converged.map(|b| b.to_string()).unwrap_or_default(),
            self.iterations.map(|v| v.to_string()).unwrap_or_default(),
            self.evaluations.map(|v| v.to_string()).unwrap_or_default(),
            f(self.max_residual_mhz),
            f(self.coefficients.as_ref().map(|c| c.mhz("ZZX"))),
            self.verified.map(|b| b.to_string()).unwrap_or_default(),
            f(self.fidelity_noiseless),
            f(self.best_amplitude_mhz),
            f(self.fidelity),
            f(self.duration_ns),
            f(self.flat_top_ns),
            f(self.robust_min),
            f(self.robust_median),
            f(self.robust_max),
            self.robust_failures.map(|v| v.to_string()).unwrap_or_default(),
            self.error.clone().unwrap_or_default(),
        ]);
        r
    }
}

const CSV_HEADER: [&str; 32] = [
    "cell",
    "qubits",
    "target",
    "seed_source",
    "seed_C12_GHz",
    "seed_C23_GHz",
    "seed_A1",
    "seed_A2",
    "seed_A3",
    "C12_GHz",
    "C23_GHz",
    "A1",
    "A2",
    "A3",
    "initial_cost",
    "final_cost",
    "converged",
    "iterations",
    "evaluations",
    "max_residual_MHz",
    "ZZX_MHz",
    "verified",
    "fidelity_noiseless",
    "best_amplitude_MHz",
    "fidelity",
    "duration_ns",
    "flat_top_ns",
    "robust_min",
    "robust_median",
    "robust_max",
    "robust_failures",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub device: String,
    pub options: CampaignOptions,
    pub rows: Vec<CampaignRow>,
}

impl CampaignReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| PcrError::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.csv_record()).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| PcrError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| PcrError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| PcrError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| PcrError::Load {
            path: path.display().to_string(),
            field: "<report>".into(),
            message: e.to_string(),
        })
    }

    /// Writes report.json and report.csv under `dir`, each atomically.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(REPORT_JSON), self.to_json()?.as_bytes())?;
        write_atomic(&dir.join(REPORT_CSV), self.to_csv()?.as_bytes())
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Completed rows of a journal. A torn final line from an interrupted write is skipped.
pub fn read_journal(path: &Path) -> Result<Vec<CampaignRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut rows = Vec::new();
    for (k, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CampaignRow>(line) {
            Ok(r) => rows.push(r),
            Err(_) if k + 1 == lines.len() => {}
            Err(e) => {
                return Err(PcrError::Load {
                    path: path.display().to_string(),
                    field: format!("line {}", k + 1),
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    version: &'a str,
    device: &'a str,
    started_unix_s: f64,
    finished_unix_s: f64,
    resumed_rows: usize,
    computed_rows: usize,
}

fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn target_ordinal(t: TargetKind) -> u64 {
    match t {
        TargetKind::Ghz => 0,
        TargetKind::IToffoli => 1,
        TargetKind::IToffoliAlt => 2,
        TargetKind::Ccnot => 3,
        TargetKind::Czz => 4,
    }
}

/// Base RNG seed of one job's robustness samples.
pub fn job_seed(base: u64, cell: usize, target: TargetKind) -> u64 {
    base.wrapping_add(1_000_000 * cell as u64 + 100_000 * target_ordinal(target))
}

/// Optimizer box of a cell: its coupler tuning ranges plus the default drive limits.
pub fn cell_bounds(cell: &UnitCell) -> ParameterBounds {
    let mut b = ParameterBounds::default();
    for k in 0..2 {
        b.lower[k] = cell.coupler_ranges[k].0;
        b.upper[k] = cell.coupler_ranges[k].1;
    }
    b
}

fn run_job(
    cell: &UnitCell,
    kind: TargetKind,
    options: &CampaignOptions,
    seeds: &SeedTable,
    sink: Option<&TraceSink>,
) -> CampaignRow {
    let mut row = CampaignRow::empty(cell, kind);
    if let Err(e) = job_stages(cell, kind, options, seeds, sink, &mut row) {
        row.error_code = Some(e.exit_code());
        row.error = Some(e.to_string());
    }
    row
}

fn job_stages(
    cell: &UnitCell,
    kind: TargetKind,
    options: &CampaignOptions,
    seeds: &SeedTable,
    sink: Option<&TraceSink>,
    row: &mut CampaignRow,
) -> Result<()> {
    let target = GateTarget::new(kind);
    let bounds = cell_bounds(cell);
    let settings = &options.settings;

    let seed = seed_parameters(&target, &cell.spec, &bounds, cell.index, seeds, settings.reference_amplitude)?;
    row.seed_source = Some(if seeds.find(kind, cell.index).is_some() { "curated" } else { "scan" }.into());
    row.seed = Some(seed.0);

    let run_name = format!("cell{}-{}", cell.index, kind);
    let opt = optimize_cell(&cell.spec, &target, &seed, &bounds, settings, sink.map(|s| (s, run_name.as_str())))?;
    row.params = Some(opt.params.0);
    row.initial_cost = Some(opt.trace.initial_cost);
    row.final_cost = Some(opt.breakdown.total);
    row.converged = Some(opt.trace.converged);
    row.iterations = Some(opt.trace.iterations.len());
    row.evaluations = Some(opt.trace.evaluations);
    row.max_residual_mhz = Some(max_residual(&target, &opt.coefficients) * 1e-6);
    row.coefficients = Some(opt.coefficients.clone());

    let basis = cell_basis(settings.cutoff)?;
    let check = evaluate_point(&cell.spec, &opt.params, settings, &basis)?;
    row.verified = Some(check.coefficients == opt.coefficients);

    let noiseless = amplitude_sweep(
        &target,
        &opt.coefficients,
        settings.reference_amplitude,
        &options.amplitude_grid,
        &ProtocolOptions::default(),
    )?;
    row.fidelity_noiseless = Some(noiseless.best.fidelity);

    let noisy_options = ProtocolOptions {
        noise: NoiseModel::from_spec(&cell.spec),
        ..Default::default()
    };
    let noisy = amplitude_sweep(
        &target,
        &opt.coefficients,
        settings.reference_amplitude,
        &options.amplitude_grid,
        &noisy_options,
    )?;
    row.best_amplitude_mhz = Some(noisy.best.drive_amplitude * 1e-6);
    row.fidelity = Some(noisy.best.fidelity);
    row.duration_ns = Some(noisy.best.duration * 1e9);
    row.flat_top_ns = Some(noisy.best.flat_top * 1e9);

    if options.robust_samples > 0 {
        let setup = RobustnessSetup {
            target: &target,
            spec: &cell.spec,
            params: opt.params,
            settings,
            drive_amplitude: noisy.best.drive_amplitude,
            options: noisy_options,
        };
        let env = robustness_sweep(
            &setup,
            options.robust_samples,
            &options.widths,
            job_seed(options.seed, cell.index, kind),
        )?;
        row.robust_min = Some(env.min);
        row.robust_median = Some(env.median);
        row.robust_max = Some(env.max);
        row.robust_failures = Some(env.failures.len());
    }
    Ok(())
}

fn validate_options(options: &CampaignOptions) -> Result<()> {
    if options.robust_samples > 0 && options.robust_samples < 8 {
        return Err(PcrError::config("robust_samples must be 0 or at least 8"));
    }
    if !options.targets.is_empty() && !options.cells.is_empty() && options.amplitude_grid.is_empty() {
        return Err(PcrError::config("amplitude grid is empty"));
    }
    if options.amplitude_grid.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(PcrError::config("amplitudes must be finite and non-negative"));
    }
    Ok(())
}

/// Runs every requested cell × target job on a bounded pool, journaling each
/// finished row, then writes the report files into `out_dir`.
///
/// With `resume`, rows already in the journal are kept and their jobs skipped;
/// without it the journal starts empty. Job failures become rows with an
/// error string; only configuration and file errors abort the campaign.
pub fn run_campaign(
    device: &Device,
    options: &CampaignOptions,
    seeds: &SeedTable,
    out_dir: &Path,
) -> Result<CampaignReport> {
    validate_options(options)?;
    let started = unix_now();
    let cells: Vec<&UnitCell> = options.cells.iter().map(|&k| device.cell(k)).collect::<Result<_>>()?;
    fs::create_dir_all(out_dir)?;

    let journal_path = out_dir.join(JOURNAL_FILE);
    let wanted: HashSet<(usize, TargetKind)> = cells
        .iter()
        .flat_map(|c| options.targets.iter().map(move |&t| (c.index, t)))
        .collect();
    let mut done: BTreeMap<(usize, TargetKind), CampaignRow> = BTreeMap::new();
    if options.resume {
        for r in read_journal(&journal_path)? {
            if wanted.contains(&r.key()) {
                done.insert(r.key(), r);
            }
        }
        // rewrite without any torn tail so later appends start on a fresh line
        let mut text = String::new();
        for r in done.values() {
            text.push_str(&serde_json::to_string(r).map_err(|e| PcrError::Io(e.to_string()))?);
            text.push('\n');
        }
        write_atomic(&journal_path, text.as_bytes())?;
    } else {
        File::create(&journal_path)?;
    }
    let resumed = done.len();

    let journal = Mutex::new(OpenOptions::new().append(true).open(&journal_path)?);
    let sink = if options.trace_evaluations {
        Some(TraceSink::to_file(&out_dir.join(TRACE_FILE))?)
    } else {
        None
    };

    let jobs: Vec<(&UnitCell, TargetKind)> = cells
        .iter()
        .flat_map(|&c| options.targets.iter().map(move |&t| (c, t)))
        .filter(|(c, t)| !done.contains_key(&(c.index, *t)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| PcrError::config(format!("worker pool: {e}")))?;
    let computed: Vec<Result<CampaignRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, kind)| {
                let row = run_job(cell, kind, options, seeds, sink.as_ref());
                let line = serde_json::to_string(&row).map_err(|e| PcrError::Io(e.to_string()))?;
                let mut j = journal.lock().map_err(|_| PcrError::Io("journal lock poisoned".into()))?;
                writeln!(j, "{line}")?;
                j.flush()?;
                Ok(row)
            })
            .collect()
    });
    let n_computed = computed.len();
    for r in computed {
        let r = r?;
        done.insert(r.key(), r);
    }

    let mut rows = Vec::with_capacity(wanted.len());
    for c in &cells {
        for &t in &options.targets {
            if let Some(r) = done.remove(&(c.index, t)) {
                rows.push(r);
            }
        }
    }
    let report = CampaignReport {
        device: device.file.name.clone().unwrap_or_else(|| device.source().to_string()),
        options: options.clone(),
        rows,
    };
    report.write(out_dir)?;
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        device: device.source(),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        resumed_rows: resumed,
        computed_rows: n_computed,
    };
    let meta = serde_json::to_string_pretty(&meta).map_err(|e| PcrError::Io(e.to_string()))?;
    write_atomic(&out_dir.join(METADATA_FILE), meta.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    /// Ω/2π [MHz].
    pub amplitude_mhz: f64,
    /// Coefficients at this amplitude [Hz].
    pub coefficients: PauliCoefficients,
    pub fidelity: Option<f64>,
    pub duration_ns: Option<f64>,
    pub error: Option<String>,
    /// Row with the highest fidelity.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationTable {
    pub target: TargetKind,
    pub params: [f64; 5],
    pub rows: Vec<VerificationRow>,
}

impl VerificationTable {
    pub fn best(&self) -> Option<&VerificationRow> {
        self.rows.iter().find(|r| r.best)
    }

    /// (Ω, α_w) pairs in MHz.
    pub fn series(&self, w: PauliWord) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .map(|r| (r.amplitude_mhz, r.coefficients.get(w) * 1e-6))
            .unzip()
    }

    /// One row per amplitude, one column per ansatz word [MHz].
    pub fn to_csv(&self) -> Result<String> {
        let words = PauliWord::ansatz();
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| PcrError::Io(e.to_string());
        let mut header = vec!["amplitude_MHz".to_string()];
        header.extend(words.iter().map(|w| format!("{w}_MHz")));
        header.extend(["fidelity", "duration_ns", "best", "error"].map(String::from));
        w.write_record(&header).map_err(io)?;
        for r in &self.rows {
            let mut rec = vec![r.amplitude_mhz.to_string()];
            rec.extend(words.iter().map(|&wd| (r.coefficients.get(wd) * 1e-6).to_string()));
            rec.push(r.fidelity.map(|v| v.to_string()).unwrap_or_default());
            rec.push(r.duration_ns.map(|v| v.to_string()).unwrap_or_default());
            rec.push(if r.best { "*".into() } else { String::new() });
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| PcrError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| PcrError::Io(e.to_string()))
    }
}

/// Re-extracts every coefficient at each Ω of `grid` [Hz] with the optimized
/// parameters and runs the protocol there (drive scale 1 relative to that Ω).
/// Extraction errors propagate; protocol failures are kept on their row.
pub fn verify_coefficients(
    target: &GateTarget,
    spec: &crate::circuit::CircuitSpec,
    params: &CellParams,
    settings: &OptimizeSettings,
    grid: &[f64],
    options: &ProtocolOptions,
) -> Result<VerificationTable> {
    if grid.is_empty() {
        return Err(PcrError::config("amplitude grid is empty"));
    }
    let basis = cell_basis(settings.cutoff)?;
    let rows: Vec<Result<VerificationRow>> = grid
        .par_iter()
        .map(|&omega| {
            let s = OptimizeSettings {
                reference_amplitude: omega,
                ..settings.clone()
            };
            let ev = evaluate_point(spec, params, &s, &basis)?;
            let sim = run_protocol(target, &ev.coefficients, omega, omega, options);
            let (fidelity, duration_ns, error) = match sim {
                Ok(r) => (Some(r.fidelity), Some(r.duration * 1e9), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            Ok(VerificationRow {
                amplitude_mhz: omega * 1e-6,
                coefficients: ev.coefficients,
                fidelity,
                duration_ns,
                error,
                best: false,
            })
        })
        .collect();
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.fidelity.map(|f| (k, f)))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    if let Some((k, _)) = best {
        rows[k].best = true;
    }
    Ok(VerificationTable {
        target: target.kind,
        params: params.0,
        rows,
    })
}

/// Coefficient of determination of the least-squares line through (x, y).
pub fn linear_fit_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if syy == 0.0 {
        return 1.0;
    }
    if sxx == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_of_exact_line_is_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = x.map(|v| 3.0 * v - 1.0);
        assert!((linear_fit_r2(&x, &y) - 1.0).abs() < 1e-15);
        let noisy = [1.0, 3.0, 2.0, 4.0];
        assert!(linear_fit_r2(&x, &noisy) < 0.9);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert!(!dir.path().join("a.txt.tmp").exists());
    }

    #[test]
    fn torn_journal_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(JOURNAL_FILE);
        let d = super::super::device::synthetic_device().unwrap();
        let row = CampaignRow::empty(d.cell(1).unwrap(), TargetKind::Ghz);
        let line = serde_json::to_string(&row).unwrap();
        fs::write(&p, format!("{line}\n{}", &line[..line.len() / 2])).unwrap();
        assert_eq!(read_journal(&p).unwrap(), vec![row]);
    }

    #[test]
    fn empty_target_list_gives_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let d = super::super::device::synthetic_device().unwrap();
        let opts = CampaignOptions {
            targets: vec![],
            cells: vec![2],
            ..Default::default()
        };
        let r = run_campaign(&d, &opts, &SeedTable::curated(), dir.path()).unwrap();
        assert!(r.rows.is_empty());
        assert!(dir.path().join(REPORT_CSV).exists());
    }

    #[test]
    fn job_seeds_do_not_collide() {
        let mut seen = HashSet::new();
        for cell in 1..=69 {
            for t in TargetKind::MAIN {
                assert!(seen.insert(job_seed(7, cell, t)));
            }
        }
    }
}
