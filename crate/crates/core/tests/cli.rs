use std::process::{Command, Output};

fn pcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcr")).args(args).output().expect("pcr runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validates_shipped_device() {
    let o = pcr(&["device", "validate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("69 unit cells"), "{}", stdout(&o));
}

#[test]
fn synth_reproduces_shipped_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dev.json");
    let o = pcr(&["device", "synth", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let written = std::fs::read_to_string(&out).unwrap();
    let shipped = include_str!("../data/synthetic_device.json");
    let a: serde_json::Value = serde_json::from_str(&written).unwrap();
    let b: serde_json::Value = serde_json::from_str(shipped).unwrap();
    assert_eq!(a, b);
    let o = pcr(&["cells", "list", "--device", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 70);
    assert!(stdout(&o).lines().nth(2).unwrap().starts_with("2,Q1,Q2,Q3,"));
}

#[test]
fn config_errors_exit_with_code_2() {
    let o = pcr(&["device", "validate", "--device", "/nonexistent/dev.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/dev.json"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = include_str!("../data/synthetic_device.json").replacen("\"anharm_MHz\"", "\"anharmonicity\"", 1);
    std::fs::write(&bad, text).unwrap();
    let o = pcr(&["device", "validate", "--device", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("anharmonicity"), "{}", stderr(&o));

    let o = pcr(&["simulate", "--target", "SWAP", "--params", "5.3,5.7,0.1,0,1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pcr(&["simulate", "--params", "5.3,5.7,0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pcr(&["simulate", "--params", "5.3,5.7,0.1,0,1.5", "--amp-grid", "10:5:1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pcr(&["report", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_and_verify_print_tables() {
    let params = "5.336,5.691,-0.0415,-0.0006,1.1427";
    let o = pcr(&["simulate", "--cell", "2", "--params", params, "--amp-grid", "100,200", "--cutoff", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("amplitude_MHz,fidelity,duration_ns,error"));
    assert!(s.contains("best: F = "));

    let dir = tempfile::tempdir().unwrap();
    let o = pcr(&[
        "verify",
        "--params",
        params,
        "--amp-grid",
        "20:60:20",
        "--cutoff",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
    assert!(dir.path().join("verify_cell2_GHZ.csv").exists());
    assert!(dir.path().join("verify_cell2_GHZ.json").exists());
}

#[test]
fn campaign_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = pcr(&[
        "campaign", "--cells", "2", "--targets", "GHZ", "--cutoff", "3", "--amp-grid", "60,120", "--out-dir", d,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = pcr(&["report", "--out-dir", d]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.trim_start().starts_with("2 GHZ")), "{}", stdout(&o));
}
