//! Device description files and unit-cell resolution.
//!
//! A device lists qubits, couplers, the couplings between them and the
//! three-qubit unit cells. Within a cell `[a, b, c]` the middle qubit `b` is Q2,
//! `a` is Q1 and `c` is Q3.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitSpec;
use crate::error::{PcrError, Result};

/// Direct Q1–Q3 coupling assumed when a cell's outer qubits have none [Hz].
pub const VIRTUAL_G13_HZ: f64 = 9e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitEntry {
    pub label: String,
    #[serde(rename = "freq_GHz")]
    pub freq_ghz: f64,
    #[serde(rename = "anharm_MHz")]
    pub anharm_mhz: f64,
    #[serde(rename = "T1_us")]
    pub t1_us: f64,
    #[serde(rename = "T2_us")]
    pub t2_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerEntry {
    pub label: String,
    #[serde(rename = "freq_GHz")]
    pub freq_ghz: f64,
    #[serde(rename = "min_GHz")]
    pub min_ghz: f64,
    #[serde(rename = "max_GHz")]
    pub max_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub a: String,
    pub b: String,
    #[serde(rename = "g_MHz")]
    pub g_mhz: f64,
}

/// On-disk device description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub qubits: Vec<QubitEntry>,
    pub couplers: Vec<CouplerEntry>,
    pub couplings: Vec<CouplingEntry>,
    pub unit_cells: Vec<[String; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitCell {
    /// 1-based position in the device's cell list.
    pub index: usize,
    pub qubits: [String; 3],
    /// Couplers (C12, C23).
    pub couplers: [String; 2],
    pub spec: CircuitSpec,
    /// Coupler tuning ranges [GHz].
    pub coupler_ranges: [(f64, f64); 2],
    /// True when g13 was filled in with [`VIRTUAL_G13_HZ`].
    pub virtual_g13: bool,
}

#[derive(Debug, Clone)]
pub struct Device {
    pub file: DeviceFile,
    pub cells: Vec<UnitCell>,
    source: String,
}

fn load_err(path: &str, field: impl Into<String>, message: impl Into<String>) -> PcrError {
    PcrError::Load {
        path: path.to_string(),
        field: field.into(),
        message: message.into(),
    }
}

/// Pulls the field name out of a serde_json message such as "missing field `T1_us`".
fn serde_field(msg: &str) -> String {
    // serde names the offending field first: "unknown field `x`, expected one of ..."
    msg.split('`').nth(1).filter(|_| msg.matches('`').count() >= 2).unwrap_or("<document>").to_string()
}

impl Device {
    pub fn load(path: &Path) -> Result<Self> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| load_err(&p, "<file>", e.to_string()))?;
        Device::parse(&text, &p)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let file: DeviceFile = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            load_err(source, serde_field(&msg), msg)
        })?;
        Device::from_file(file, source)
    }

    pub fn from_file(file: DeviceFile, source: &str) -> Result<Self> {
        let mut qubits = BTreeMap::new();
        for (k, q) in file.qubits.iter().enumerate() {
            let field = |f: &str| format!("qubits[{k}].{f}");
            if qubits.insert(q.label.clone(), q).is_some() {
                return Err(load_err(source, field("label"), format!("duplicate label {}", q.label)));
            }
            if !(q.freq_ghz > 0.0) {
                return Err(load_err(source, field("freq_GHz"), "must be positive"));
            }
            if !(q.anharm_mhz.is_finite() && q.anharm_mhz != 0.0) {
                return Err(load_err(source, field("anharm_MHz"), "must be nonzero"));
            }
            if !(q.t1_us > 0.0) {
                return Err(load_err(source, field("T1_us"), "must be positive"));
            }
            if !(q.t2_us > 0.0 && q.t2_us <= 2.0 * q.t1_us) {
                return Err(load_err(source, field("T2_us"), "must be positive and at most 2·T1"));
            }
        }
        let mut couplers = BTreeMap::new();
        for (k, c) in file.couplers.iter().enumerate() {
            let field = |f: &str| format!("couplers[{k}].{f}");
            if qubits.contains_key(&c.label) || couplers.insert(c.label.clone(), c).is_some() {
                return Err(load_err(source, field("label"), format!("duplicate label {}", c.label)));
            }
            if !(c.min_ghz > 0.0 && c.min_ghz <= c.freq_ghz && c.freq_ghz <= c.max_ghz) {
                return Err(load_err(source, field("freq_GHz"), "need 0 < min_GHz ≤ freq_GHz ≤ max_GHz"));
            }
        }
        let mut g: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (k, e) in file.couplings.iter().enumerate() {
            let known = |l: &str| qubits.contains_key(l) || couplers.contains_key(l);
            for (f, l) in [("a", &e.a), ("b", &e.b)] {
                if !known(l) {
                    return Err(load_err(source, format!("couplings[{k}].{f}"), format!("unknown element {l}")));
                }
            }
            if e.a == e.b || (couplers.contains_key(&e.a) && couplers.contains_key(&e.b)) {
                return Err(load_err(
                    source,
                    format!("couplings[{k}]"),
                    "couplings join a qubit to a coupler or to another qubit",
                ));
            }
            if !e.g_mhz.is_finite() {
                return Err(load_err(source, format!("couplings[{k}].g_MHz"), "must be finite"));
            }
            let key = ordered(&e.a, &e.b);
            if g.insert(key, e.g_mhz * 1e6).is_some() {
                return Err(load_err(source, format!("couplings[{k}]"), "duplicate coupling"));
            }
        }
        let lookup = |a: &str, b: &str| g.get(&ordered(a, b)).copied();

        let mut cells = Vec::with_capacity(file.unit_cells.len());
        for (k, labels) in file.unit_cells.iter().enumerate() {
            let field = format!("unit_cells[{k}]");
            let distinct: BTreeSet<&String> = labels.iter().collect();
            if distinct.len() != 3 {
                return Err(load_err(source, field, "qubit labels must be distinct"));
            }
            let mut q = Vec::new();
            for l in labels {
                q.push(*qubits.get(l).ok_or_else(|| load_err(source, &field, format!("unknown qubit {l}")))?);
            }
            let shared = |a: &str, b: &str| -> Vec<&String> {
                couplers
                    .keys()
                    .filter(|c| lookup(a, c).is_some() && lookup(b, c).is_some())
                    .collect()
            };
            let mut pair_couplers = Vec::new();
            for (a, b) in [(0, 1), (1, 2)] {
                let s = shared(&labels[a], &labels[b]);
                if s.len() != 1 {
                    return Err(load_err(
                        source,
                        &field,
                        format!(
                            "{} and {} must share exactly one coupler (found {})",
                            labels[a],
                            labels[b],
                            s.len()
                        ),
                    ));
                }
                pair_couplers.push(s[0].clone());
            }
            let coupler_entries = [couplers[&pair_couplers[0]], couplers[&pair_couplers[1]]];
            let mut qubit_coupler = [[0.0; 3]; 2];
            for r in 0..2 {
                for j in 0..3 {
                    qubit_coupler[r][j] = lookup(&labels[j], &pair_couplers[r]).unwrap_or(0.0);
                }
            }
            let g13 = lookup(&labels[0], &labels[2]);
            let spec = CircuitSpec {
                qubit_freqs: [q[0].freq_ghz * 1e9, q[1].freq_ghz * 1e9, q[2].freq_ghz * 1e9],
                anharmonicities: [q[0].anharm_mhz * 1e6, q[1].anharm_mhz * 1e6, q[2].anharm_mhz * 1e6],
                coupler_freqs: [coupler_entries[0].freq_ghz * 1e9, coupler_entries[1].freq_ghz * 1e9],
                qubit_coupler,
                direct: [
                    lookup(&labels[0], &labels[1]).unwrap_or(0.0),
                    lookup(&labels[1], &labels[2]).unwrap_or(0.0),
                    g13.unwrap_or(VIRTUAL_G13_HZ),
                ],
                t1: [q[0].t1_us * 1e-6, q[1].t1_us * 1e-6, q[2].t1_us * 1e-6],
                t2: [q[0].t2_us * 1e-6, q[1].t2_us * 1e-6, q[2].t2_us * 1e-6],
            };
            spec.validate().map_err(|e| load_err(source, &field, e.to_string()))?;
            cells.push(UnitCell {
                index: k + 1,
                qubits: labels.clone(),
                couplers: [pair_couplers[0].clone(), pair_couplers[1].clone()],
                spec,
                coupler_ranges: [
                    (coupler_entries[0].min_ghz, coupler_entries[0].max_ghz),
                    (coupler_entries[1].min_ghz, coupler_entries[1].max_ghz),
                ],
                virtual_g13: g13.is_none(),
            });
        }
        Ok(Device {
            file,
            cells,
            source: source.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Cell by 1-based index.
    pub fn cell(&self, index: usize) -> Result<&UnitCell> {
        self.cells
            .iter()
            .find(|c| c.index == index)
            .ok_or_else(|| PcrError::config(format!("device has no unit cell {index} (1..={})", self.cells.len())))
    }

    /// Parses a selection such as "all", "2", "1-5,9".
    pub fn select_cells(&self, selection: &str) -> Result<Vec<usize>> {
        let s = selection.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(self.cells.iter().map(|c| c.index).collect());
        }
        let mut out = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || PcrError::config(format!("bad cell selection '{part}'"));
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
                None => {
                    let v: usize = part.parse().map_err(|_| bad())?;
                    (v, v)
                }
            };
            for k in lo..=hi {
                self.cell(k)?;
                out.insert(k);
            }
        }
        Ok(out.into_iter().collect())
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Shipped synthetic device (stand-in calibration data, not a real chip).
pub const SYNTHETIC_DEVICE_JSON: &str = include_str!("../../data/synthetic_device.json");

pub fn synthetic_device() -> Result<Device> {
    Device::parse(SYNTHETIC_DEVICE_JSON, "<synthetic device>")
}

/// Qubit frequencies of the synthetic chain, repeating with period three [GHz].
pub const SYNTHETIC_PATTERN_GHZ: [f64; 3] = [4.88, 4.76, 4.80];

/// Builds the synthetic 71-qubit chain: one coupler per neighbouring pair,
/// 90 MHz qubit–coupler and 9 MHz neighbour couplings, and every run of three
/// consecutive qubits as a unit cell.
pub fn build_synthetic_device() -> DeviceFile {
    let n = 71;
    let qubits: Vec<QubitEntry> = (0..n)
        .map(|k| {
            // small deterministic spread on top of the period-three pattern; cell 2
            // (Q1..Q3) is left exact so it sits at 4.76/4.80/4.88 GHz
            let jitter = [0.004, 0.0, 0.0, 0.0, -0.003][k % 5];
            let t1 = [280.0, 320.0, 250.0, 300.0][k % 4];
            QubitEntry {
                label: format!("Q{k}"),
                freq_ghz: round6(SYNTHETIC_PATTERN_GHZ[k % 3] + jitter),
                anharm_mhz: -300.0,
                t1_us: t1,
                t2_us: [0.8, 1.0, 0.6][k % 3] * t1,
            }
        })
        .collect();
    let couplers: Vec<CouplerEntry> = (0..n - 1)
        .map(|k| CouplerEntry {
            label: format!("C{k}_{}", k + 1),
            freq_ghz: 5.5,
            min_ghz: 4.9,
            max_ghz: 7.0,
        })
        .collect();
    let mut couplings = Vec::new();
    for k in 0..n - 1 {
        let c = format!("C{k}_{}", k + 1);
        couplings.push(CouplingEntry {
            a: format!("Q{k}"),
            b: c.clone(),
            g_mhz: 90.0,
        });
        couplings.push(CouplingEntry {
            a: format!("Q{}", k + 1),
            b: c,
            g_mhz: 90.0,
        });
        couplings.push(CouplingEntry {
            a: format!("Q{k}"),
            b: format!("Q{}", k + 1),
            g_mhz: 9.0,
        });
    }
    let unit_cells = (0..n - 2)
        .map(|k| [format!("Q{k}"), format!("Q{}", k + 1), format!("Q{}", k + 2)])
        .collect();
    DeviceFile {
        name: Some("synthetic-chain-71".into()),
        description: Some(
            "Synthetic stand-in device: a 71-qubit chain with representative transmon parameters. \
             Not calibration data of any physical chip."
                .into(),
        ),
        qubits,
        couplers,
        couplings,
        unit_cells,
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_device_matches_generator() {
        let shipped: DeviceFile = serde_json::from_str(SYNTHETIC_DEVICE_JSON).unwrap();
        assert_eq!(shipped, build_synthetic_device());
    }

    #[test]
    fn synthetic_device_has_69_cells() {
        let d = synthetic_device().unwrap();
        assert_eq!(d.cells.len(), 69);
        let c2 = d.cell(2).unwrap();
        assert_eq!(c2.qubits, ["Q1", "Q2", "Q3"]);
        assert_eq!(c2.couplers, ["C1_2", "C2_3"]);
        assert!(c2.virtual_g13);
        assert_eq!(c2.spec.direct, [9e6, 9e6, VIRTUAL_G13_HZ]);
        assert_eq!(c2.spec.qubit_coupler, CircuitSpec::nearest_neighbour_couplings(90e6));
    }

    #[test]
    fn missing_field_is_named() {
        let text = SYNTHETIC_DEVICE_JSON.replacen("\"T1_us\"", "\"T1_typo\"", 1);
        match Device::parse(&text, "dev.json").unwrap_err() {
            PcrError::Load { field, .. } => assert!(field == "T1_typo" || field == "T1_us", "{field}"),
            e => panic!("{e}"),
        }
        let mut f = build_synthetic_device();
        let mut v = serde_json::to_value(&f).unwrap();
        v["qubits"][0].as_object_mut().unwrap().remove("T1_us");
        match Device::parse(&v.to_string(), "dev.json").unwrap_err() {
            PcrError::Load { field, path, .. } => {
                assert_eq!(field, "T1_us");
                assert_eq!(path, "dev.json");
            }
            e => panic!("{e}"),
        }
        f.unit_cells[0] = ["Q0".into(), "Q1".into(), "Q5".into()];
        assert!(matches!(Device::from_file(f, "x").unwrap_err(), PcrError::Load { .. }));
    }

    #[test]
    fn cell_selection() {
        let d = synthetic_device().unwrap();
        assert_eq!(d.select_cells("2").unwrap(), vec![2]);
        assert_eq!(d.select_cells("1-3, 9").unwrap(), vec![1, 2, 3, 9]);
        assert_eq!(d.select_cells("all").unwrap().len(), 69);
        assert!(d.select_cells("70").is_err());
    }
}
