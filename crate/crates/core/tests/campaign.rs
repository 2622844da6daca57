use std::fs;

use pcr_core::cli_io::campaign::{read_journal, CampaignOptions, CampaignReport, JOURNAL_FILE, REPORT_CSV, REPORT_JSON};
use pcr_core::cli_io::{run_campaign, synthetic_device, verify_coefficients};
use pcr_core::dynamics::ProtocolOptions;
use pcr_core::gates::{GateTarget, TargetKind};
use pcr_core::optimizer::{optimize_cell, OptimizeSettings};
use pcr_core::perturbative::SeedTable;
use pcr_core::cli_io::campaign::cell_bounds;

// small basis and few iterations: these tests check plumbing, not physics
fn quick_settings() -> OptimizeSettings {
    let mut s = OptimizeSettings {
        cutoff: 3,
        ..Default::default()
    };
    s.powell.max_iter = 2;
    s
}

fn quick_options() -> CampaignOptions {
    CampaignOptions {
        targets: vec![TargetKind::Ghz],
        cells: vec![2],
        settings: quick_settings(),
        amplitude_grid: vec![60e6, 120e6],
        robust_samples: 8,
        seed: 11,
        jobs: 1,
        ..Default::default()
    }
}

#[test]
fn single_cell_campaign_writes_consistent_outputs() {
    let device = synthetic_device().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_campaign(&device, &quick_options(), &SeedTable::curated(), dir.path()).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert!(row.error.is_none(), "{:?}", row.error);
    assert_eq!(row.seed_source.as_deref(), Some("curated"));
    assert_eq!(row.verified, Some(true));
    assert!(row.final_cost.unwrap() <= row.initial_cost.unwrap());
    assert!([60.0, 120.0].contains(&row.best_amplitude_mhz.unwrap()));
    let (lo, mid, hi) = (row.robust_min.unwrap(), row.robust_median.unwrap(), row.robust_max.unwrap());
    assert!(lo <= mid && mid <= hi);

    let loaded = CampaignReport::load(&dir.path().join(REPORT_JSON)).unwrap();
    assert_eq!(loaded.rows, report.rows);
    let csv = fs::read_to_string(dir.path().join(REPORT_CSV)).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let journal = read_journal(&dir.path().join(JOURNAL_FILE)).unwrap();
    assert_eq!(journal, report.rows);
    assert!(!dir.path().join(format!("{REPORT_JSON}.tmp")).exists());
}

#[test]
fn resume_reuses_journaled_rows() {
    let device = synthetic_device().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = run_campaign(&device, &quick_options(), &SeedTable::curated(), dir.path()).unwrap();
    let journal = dir.path().join(JOURNAL_FILE);
    let before = fs::read_to_string(&journal).unwrap();
    // a torn trailing record from an interrupted write is dropped on resume
    fs::write(&journal, format!("{before}{{\"cell\": 2, \"tar")).unwrap();

    let opts = CampaignOptions {
        resume: true,
        ..quick_options()
    };
    let t0 = std::time::Instant::now();
    let second = run_campaign(&device, &opts, &SeedTable::curated(), dir.path()).unwrap();
    assert_eq!(second.rows, first.rows);
    assert!(t0.elapsed().as_secs_f64() < 5.0, "resume recomputed the row");
    assert_eq!(fs::read_to_string(&journal).unwrap(), before);
}

#[test]
fn same_seed_gives_identical_reports() {
    let device = synthetic_device().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_campaign(&device, &quick_options(), &SeedTable::curated(), a.path()).unwrap();
    let rb = run_campaign(&device, &quick_options(), &SeedTable::curated(), b.path()).unwrap();
    assert_eq!(ra.to_json().unwrap(), rb.to_json().unwrap());
}

#[test]
fn single_point_verification_matches_optimizer() {
    let device = synthetic_device().unwrap();
    let cell = device.cell(2).unwrap();
    let target = GateTarget::new(TargetKind::Ghz);
    let settings = quick_settings();
    let seed = SeedTable::curated().find(TargetKind::Ghz, 2).unwrap().params();
    let opt = optimize_cell(&cell.spec, &target, &seed, &cell_bounds(cell), &settings, None).unwrap();
    let table = verify_coefficients(
        &target,
        &cell.spec,
        &opt.params,
        &settings,
        &[settings.reference_amplitude],
        &ProtocolOptions::default(),
    )
    .unwrap();
    assert_eq!(table.rows.len(), 1);
    let row = &table.rows[0];
    assert_eq!(row.coefficients.hz("ZZX"), opt.coefficients.hz("ZZX"));
    assert!(row.best);
}
