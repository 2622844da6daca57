use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pcr_core::cli_io::campaign::{
    cell_bounds, default_amplitude_grid, read_journal, CampaignOptions, CampaignReport, JOURNAL_FILE, REPORT_JSON,
};
use pcr_core::cli_io::device::build_synthetic_device;
use pcr_core::cli_io::{run_campaign, verify_coefficients, write_atomic, Device};
use pcr_core::dynamics::{amplitude_sweep, NoiseModel, ProtocolOptions};
use pcr_core::error::{PcrError, Result};
use pcr_core::gates::{GateTarget, TargetKind};
use pcr_core::optimizer::{max_residual, optimize_cell, CellParams, OptimizeSettings, OptimizationTrace};
use pcr_core::pauli::PauliCoefficients;
use pcr_core::perturbative::{seed_parameters, SeedTable};

#[derive(Parser)]
#[command(name = "pcr", version, about = "Parity cross-resonance gate synthesis on transmon/coupler unit cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Device file operations.
    Device {
        #[command(subcommand)]
        action: DeviceAction,
    },
    /// Unit cell operations.
    Cells {
        #[command(subcommand)]
        action: CellsAction,
    },
    /// Seed and optimize cell × target pairs.
    Optimize(OptimizeArgs),
    /// Coefficient-vs-amplitude table at given parameters.
    Verify(PointArgs),
    /// Protocol fidelity over an amplitude grid at given parameters.
    Simulate(SimulateArgs),
    /// Full pipeline over many cells and targets.
    Campaign(CampaignArgs),
    /// Summarize a campaign directory.
    Report {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum DeviceAction {
    Validate(DeviceArg),
    /// Write the built-in synthetic device description.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CellsAction {
    List(DeviceArg),
}

#[derive(Args)]
struct DeviceArg {
    /// Device JSON; the shipped synthetic device when omitted.
    #[arg(long)]
    device: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    device: DeviceArg,
    /// Ω/2π used for extraction [MHz].
    #[arg(long, default_value_t = 60.0)]
    omega_mhz: f64,
    /// Excitation cutoff of the circuit basis.
    #[arg(long, default_value_t = 4)]
    cutoff: usize,
    /// Curated seed table (JSON); the built-in table when omitted.
    #[arg(long)]
    seeds: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    /// Comma list of targets or "all".
    #[arg(long, default_value = "GHZ")]
    targets: String,
    /// Cell selection such as "2" or "1-3,9" or "all".
    #[arg(long, default_value = "2")]
    cells: String,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 2)]
    cell: usize,
    #[arg(long, default_value = "GHZ")]
    target: String,
    /// C12_GHz,C23_GHz,A1,A2,A3
    #[arg(long, conflicts_with = "from")]
    params: Option<String>,
    /// JSON file with a "params" array (optimize output or a report row).
    #[arg(long)]
    from: Option<PathBuf>,
    /// MHz values, as "a,b,c" or "start:stop:step".
    #[arg(long)]
    amp_grid: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Use the cell's T1/T2 instead of a noiseless run.
    #[arg(long)]
    noise: bool,
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "all")]
    targets: String,
    #[arg(long, default_value = "all")]
    cells: String,
    #[arg(long)]
    amp_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    robust_samples: usize,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    resume: bool,
    /// Log every objective evaluation to evaluations.jsonl.
    #[arg(long)]
    trace: bool,
}

fn load_device(arg: &DeviceArg) -> Result<Device> {
    match &arg.device {
        Some(p) => Device::load(p),
        None => pcr_core::cli_io::synthetic_device(),
    }
}

fn load_seeds(path: &Option<PathBuf>) -> Result<SeedTable> {
    match path {
        None => Ok(SeedTable::curated()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| PcrError::Load {
                path: p.display().to_string(),
                field: "<seeds>".into(),
                message: e.to_string(),
            })
        }
    }
}

fn settings(common: &Common) -> Result<OptimizeSettings> {
    if !(common.omega_mhz > 0.0) {
        return Err(PcrError::config("--omega-mhz must be positive"));
    }
    Ok(OptimizeSettings {
        reference_amplitude: common.omega_mhz * 1e6,
        cutoff: common.cutoff,
        ..Default::default()
    })
}

fn parse_targets(s: &str) -> Result<Vec<TargetKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(TargetKind::MAIN.to_vec());
    }
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
}

/// Amplitude grid in Hz from an MHz list or range.
fn parse_grid(s: &Option<String>) -> Result<Vec<f64>> {
    let Some(s) = s else {
        return Ok(default_amplitude_grid());
    };
    let bad = || PcrError::config(format!("bad amplitude grid '{s}'"));
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let mhz = match parts.len() {
        1 => s.split(',').map(num).collect::<Result<Vec<_>>>()?,
        3 => {
            let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| a + k as f64 * step).collect()
        }
        _ => return Err(bad()),
    };
    Ok(mhz.into_iter().map(|v| v * 1e6).collect())
}

fn parse_params(point: &PointArgs) -> Result<CellParams> {
    let values: Vec<f64> = match (&point.params, &point.from) {
        (Some(s), _) => s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| PcrError::config(format!("bad --params '{s}'"))))
            .collect::<Result<_>>()?,
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p)?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| PcrError::Load {
                path: p.display().to_string(),
                field: "<document>".into(),
                message: e.to_string(),
            })?;
            serde_json::from_value(v["params"].clone()).map_err(|e| PcrError::Load {
                path: p.display().to_string(),
                field: "params".into(),
                message: e.to_string(),
            })?
        }
        (None, None) => return Err(PcrError::config("give --params or --from")),
    };
    if values.len() != 5 {
        return Err(PcrError::config("parameters are C12_GHz,C23_GHz,A1,A2,A3"));
    }
    Ok(CellParams::from_slice(&values))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PcrError::Io(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

#[derive(Serialize)]
struct OptimizedCell {
    cell: usize,
    qubits: [String; 3],
    target: TargetKind,
    seed: [f64; 5],
    params: [f64; 5],
    max_residual_mhz: f64,
    coefficients: PauliCoefficients,
    trace: OptimizationTrace,
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<()> {
    let device = load_device(&args.common.device)?;
    let seeds = load_seeds(&args.common.seeds)?;
    let settings = settings(&args.common)?;
    let targets = parse_targets(&args.targets)?;
    let mut not_converged = 0;
    if let Some(d) = &args.out_dir {
        std::fs::create_dir_all(d)?;
    }
    for k in device.select_cells(&args.cells)? {
        let cell = device.cell(k)?;
        let bounds = cell_bounds(cell);
        for &kind in &targets {
            let target = GateTarget::new(kind);
            let seed = seed_parameters(&target, &cell.spec, &bounds, k, &seeds, settings.reference_amplitude)?;
            let opt = optimize_cell(&cell.spec, &target, &seed, &bounds, &settings, None)?;
            let res = max_residual(&target, &opt.coefficients) * 1e-6;
            println!(
                "cell {k} {kind}: L {:.4e} -> {:.4e} in {} iterations{}; residual {res:.4} MHz; ZZX {:+.4} MHz",
                opt.trace.initial_cost,
                opt.breakdown.total,
                opt.trace.iterations.len(),
                if opt.trace.converged { "" } else { " (not converged)" },
                opt.coefficients.mhz("ZZX"),
            );
            println!("  params {:?}", opt.params.0);
            if !opt.trace.converged {
                not_converged += 1;
            }
            if let Some(d) = &args.out_dir {
                let rec = OptimizedCell {
                    cell: k,
                    qubits: cell.qubits.clone(),
                    target: kind,
                    seed: seed.0,
                    params: opt.params.0,
                    max_residual_mhz: res,
                    coefficients: opt.coefficients.clone(),
                    trace: opt.trace.clone(),
                };
                write_json(&d.join(format!("optimized_cell{k}_{kind}.json")), &rec)?;
            }
        }
    }
    if not_converged > 0 {
        return Err(PcrError::NonConvergence {
            iterations: settings.powell.max_iter,
        });
    }
    Ok(())
}

fn cmd_verify(args: &PointArgs) -> Result<()> {
    let device = load_device(&args.common.device)?;
    let cell = device.cell(args.cell)?;
    let target = GateTarget::new(args.target.parse()?);
    let params = parse_params(args)?;
    let grid = parse_grid(&args.amp_grid)?;
    let table = verify_coefficients(
        &target,
        &cell.spec,
        &params,
        &settings(&args.common)?,
        &grid,
        &ProtocolOptions::default(),
    )?;
    let csv = table.to_csv()?;
    print!("{csv}");
    if let Some(d) = &args.out_dir {
        std::fs::create_dir_all(d)?;
        let stem = format!("verify_cell{}_{}", args.cell, target.kind);
        write_atomic(&d.join(format!("{stem}.csv")), csv.as_bytes())?;
        write_json(&d.join(format!("{stem}.json")), &table)?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let p = &args.point;
    let device = load_device(&p.common.device)?;
    let cell = device.cell(p.cell)?;
    let target = GateTarget::new(p.target.parse()?);
    let params = parse_params(p)?;
    let settings = settings(&p.common)?;
    let basis = pcr_core::circuit::cell_basis(settings.cutoff)?;
    let ev = pcr_core::optimizer::evaluate_point(&cell.spec, &params, &settings, &basis)?;
    let options = ProtocolOptions {
        noise: if args.noise { NoiseModel::from_spec(&cell.spec) } else { NoiseModel::none() },
        ..Default::default()
    };
    let sweep = amplitude_sweep(
        &target,
        &ev.coefficients,
        settings.reference_amplitude,
        &parse_grid(&p.amp_grid)?,
        &options,
    )?;
    println!("amplitude_MHz,fidelity,duration_ns,error");
    for pt in &sweep.curve {
        println!(
            "{},{},{},{}",
            pt.amplitude * 1e-6,
            pt.fidelity.map(|v| v.to_string()).unwrap_or_default(),
            pt.duration.map(|v| (v * 1e9).to_string()).unwrap_or_default(),
            pt.error.clone().unwrap_or_default()
        );
    }
    println!(
        "best: F = {:.6} at {:.1} MHz, total {:.1} ns (flat top {:.1} ns)",
        sweep.best.fidelity,
        sweep.best.drive_amplitude * 1e-6,
        sweep.best.duration * 1e9,
        sweep.best.flat_top * 1e9
    );
    if let Some(d) = &p.out_dir {
        std::fs::create_dir_all(d)?;
        write_json(&d.join(format!("simulate_cell{}_{}.json", p.cell, target.kind)), &sweep)?;
    }
    Ok(())
}

fn cmd_campaign(args: &CampaignArgs) -> Result<()> {
    let device = load_device(&args.common.device)?;
    let options = CampaignOptions {
        targets: parse_targets(&args.targets)?,
        cells: device.select_cells(&args.cells)?,
        settings: settings(&args.common)?,
        amplitude_grid: parse_grid(&args.amp_grid)?,
        robust_samples: args.robust_samples,
        seed: args.seed,
        jobs: args.jobs,
        resume: args.resume,
        trace_evaluations: args.trace,
        ..Default::default()
    };
    let report = run_campaign(&device, &options, &load_seeds(&args.common.seeds)?, &args.out_dir)?;
    print_summary(&report);
    Ok(())
}

fn print_summary(report: &CampaignReport) {
    println!("{:>4} {:<10} {:>9} {:>9} {:>9} {:>9} {:>8}  status", "cell", "target", "L_final", "res_MHz", "F_ideal", "F_noisy", "dur_ns");
    let opt = |v: Option<f64>, p: usize| v.map(|x| format!("{x:.p$}")).unwrap_or_else(|| "-".into());
    for r in &report.rows {
        let status = match (&r.error, r.converged) {
            (Some(e), _) => e.clone(),
            (None, Some(false)) => "not converged".into(),
            _ => "ok".into(),
        };
        println!(
            "{:>4} {:<10} {:>9} {:>9} {:>9} {:>9} {:>8}  {status}",
            r.cell,
            r.target.to_string(),
            r.final_cost.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into()),
            opt(r.max_residual_mhz, 4),
            opt(r.fidelity_noiseless, 5),
            opt(r.fidelity, 5),
            opt(r.duration_ns, 0),
        );
    }
}

fn cmd_report(out_dir: &Path) -> Result<()> {
    let path = out_dir.join(REPORT_JSON);
    if path.exists() {
        print_summary(&CampaignReport::load(&path)?);
        return Ok(());
    }
    let rows = read_journal(&out_dir.join(JOURNAL_FILE))?;
    if rows.is_empty() {
        return Err(PcrError::config(format!("no report or journal in {}", out_dir.display())));
    }
    println!("(partial campaign: {} journaled rows)", rows.len());
    print_summary(&CampaignReport {
        device: String::new(),
        options: CampaignOptions::default(),
        rows,
    });
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Device { action } => match action {
            DeviceAction::Validate(a) => {
                let d = load_device(&a)?;
                println!(
                    "{}: {} qubits, {} couplers, {} unit cells ({} with virtual g13)",
                    d.source(),
                    d.file.qubits.len(),
                    d.file.couplers.len(),
                    d.cells.len(),
                    d.cells.iter().filter(|c| c.virtual_g13).count()
                );
                Ok(())
            }
            DeviceAction::Synth { out } => write_json(&out, &build_synthetic_device()),
        },
        Command::Cells { action } => match action {
            CellsAction::List(a) => {
                let d = load_device(&a)?;
                println!("cell,Q1,Q2,Q3,C12,C23,f1_GHz,f2_GHz,f3_GHz");
                for c in &d.cells {
                    let f = c.spec.qubit_freqs.map(|v| v * 1e-9);
                    println!(
                        "{},{},{},{},{},{},{},{},{}",
                        c.index, c.qubits[0], c.qubits[1], c.qubits[2], c.couplers[0], c.couplers[1], f[0], f[1], f[2]
                    );
                }
                Ok(())
            }
        },
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Campaign(a) => cmd_campaign(&a),
        Command::Report { out_dir } => cmd_report(&out_dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
