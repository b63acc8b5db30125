//! Network domain types, the per-unit base system and ingestion of the
//! bundled feeder dataset.
//!
//! The feeder ships as a JSON document with `buses`, `segments` (lengths in
//! feet) and `base` keys, plus an optional `links` key for ideal 1:1
//! transformer connections such as the one between busbars 709 and 775.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant [J/K].
pub const BOLTZMANN_K: f64 = 1.3806503e-23;
/// Electron charge [C].
pub const ELECTRON_CHARGE_Q: f64 = 1.60217646e-19;

pub const FEET_PER_MILE: f64 = 5280.0;

/// Series impedance modeling an ideal 1:1 transformer link [p.u.].
/// Small but nonzero so the admittance matrix stays regular.
pub const LINK_IMPEDANCE_PU: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants {
    pub boltzmann_k: f64,
    pub electron_charge_q: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            boltzmann_k: BOLTZMANN_K,
            electron_charge_q: ELECTRON_CHARGE_Q,
        }
    }
}

/// Three-phase line data for one configuration code: phase series impedance
/// [Ω/mile] and shunt susceptance [µS/mile].
#[derive(Debug, Clone)]
pub struct LineConfigMatrix {
    pub config_id: u32,
    pub z_phase: [[Complex64; 3]; 3],
    pub b_shunt: [[f64; 3]; 3],
}

impl LineConfigMatrix {
    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if self.z_phase[k][k].re <= 0.0 {
                return Err(Error::Validation(format!(
                    "config {}: nonpositive series resistance on diagonal",
                    self.config_id
                )));
            }
            if self.b_shunt[k][k] < 0.0 {
                return Err(Error::Validation(format!(
                    "config {}: negative shunt susceptance",
                    self.config_id
                )));
            }
        }
        Ok(())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn diag3(v: f64) -> [[f64; 3]; 3] {
    [[v, 0.0, 0.0], [0.0, v, 0.0], [0.0, 0.0, v]]
}

/// The four line configurations (codes 721-724) of the reduced feeder.
pub fn standard_line_configs() -> BTreeMap<u32, LineConfigMatrix> {
    let mut m = BTreeMap::new();
    m.insert(
        721,
        LineConfigMatrix {
            config_id: 721,
            z_phase: [
                [c(0.2926, 0.1973), c(0.0673, -0.0368), c(0.0337, -0.0417)],
                [c(0.0673, -0.0368), c(0.2646, 0.1900), c(0.0673, -0.0368)],
                [c(0.0337, -0.0417), c(0.0673, -0.0368), c(0.2926, 0.1973)],
            ],
            b_shunt: diag3(159.7919),
        },
    );
    m.insert(
        722,
        LineConfigMatrix {
            config_id: 722,
            z_phase: [
                [c(0.4751, 0.2973), c(0.1629, -0.0326), c(0.1234, -0.0607)],
                [c(0.1629, -0.0326), c(0.4488, 0.2678), c(0.1629, -0.0326)],
                [c(0.1234, -0.0607), c(0.1629, -0.0326), c(0.4751, 0.2973)],
            ],
            b_shunt: diag3(127.8306),
        },
    );
    m.insert(
        723,
        LineConfigMatrix {
            config_id: 723,
            z_phase: [
                [c(1.2936, 0.6713), c(0.4871, 0.2111), c(0.4585, 0.1521)],
                [c(0.4871, 0.2111), c(1.3022, 0.6326), c(0.4871, -0.2111)],
                [c(0.4585, 0.1521), c(0.4871, -0.2111), c(1.2936, 0.6713)],
            ],
            b_shunt: diag3(74.8405),
        },
    );
    m.insert(
        724,
        LineConfigMatrix {
            config_id: 724,
            z_phase: [
                [c(2.0952, 0.7758), c(0.5204, 0.2738), c(0.4926, 0.2123)],
                [c(0.5204, 0.2738), c(2.1068, 0.7398), c(0.5204, 0.2738)],
                [c(0.4926, 0.2123), c(0.5204, 0.2738), c(2.0952, 0.7758)],
            ],
            b_shunt: diag3(60.2483),
        },
    );
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Load,
}

#[derive(Debug, Clone, Copy)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub pv_array_count: u32,
}

impl Bus {
    pub fn has_pv(&self) -> bool {
        self.pv_array_count > 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub from_bus: u32,
    pub to_bus: u32,
    pub length_miles: f64,
    pub config_id: u32,
}

/// Ideal 1:1 transformer connection (modeled as a tiny series impedance).
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub from_bus: u32,
    pub to_bus: u32,
}

/// Voltage/power bases of the per-unit system.
#[derive(Debug, Clone, Copy)]
pub struct BaseSystem {
    pub v_base: f64,
    pub s_base: f64,
    pub z_base: f64,
    pub y_base: f64,
}

impl BaseSystem {
    pub fn new(v_base: f64, s_base: f64) -> Result<Self> {
        if v_base <= 0.0 || s_base <= 0.0 {
            return Err(Error::Domain(format!(
                "base quantities must be positive, got v_base={v_base}, s_base={s_base}"
            )));
        }
        let z_base = v_base * v_base / s_base;
        Ok(BaseSystem {
            v_base,
            s_base,
            z_base,
            y_base: 1.0 / z_base,
        })
    }
}

pub fn make_base(v_base: f64, s_base: f64) -> Result<BaseSystem> {
    BaseSystem::new(v_base, s_base)
}

/// Immutable network model: validated buses, segments, line configurations
/// and per-unit base.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub buses: Vec<Bus>,
    pub segments: Vec<Segment>,
    pub links: Vec<Link>,
    pub configs: BTreeMap<u32, LineConfigMatrix>,
    pub base: BaseSystem,
}

impl NetworkModel {
    pub fn slack_bus(&self) -> u32 {
        self.buses
            .iter()
            .find(|b| b.kind == BusKind::Slack)
            .map(|b| b.id)
            .expect("validated network has a slack bus")
    }

    pub fn bus(&self, id: u32) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let slack_count = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slack_count != 1 {
            return Err(Error::Validation(format!(
                "exactly one slack bus required, found {slack_count}"
            )));
        }
        let ids: BTreeSet<u32> = self.buses.iter().map(|b| b.id).collect();
        if ids.len() != self.buses.len() {
            return Err(Error::Validation("duplicate bus id".into()));
        }
        for s in &self.segments {
            if !ids.contains(&s.from_bus) || !ids.contains(&s.to_bus) {
                return Err(Error::Validation(format!(
                    "segment {}-{} references unknown bus",
                    s.from_bus, s.to_bus
                )));
            }
            if !self.configs.contains_key(&s.config_id) {
                return Err(Error::Validation(format!(
                    "unknown config {} on segment {}-{}",
                    s.config_id, s.from_bus, s.to_bus
                )));
            }
            if s.length_miles <= 0.0 {
                return Err(Error::Validation(format!(
                    "nonpositive length on segment {}-{}",
                    s.from_bus, s.to_bus
                )));
            }
        }
        for l in &self.links {
            if !ids.contains(&l.from_bus) || !ids.contains(&l.to_bus) {
                return Err(Error::Validation(format!(
                    "link {}-{} references unknown bus",
                    l.from_bus, l.to_bus
                )));
            }
        }
        // radial tree check: connected and acyclic over segments + links
        let n_edges = self.segments.len() + self.links.len();
        if n_edges != self.buses.len() - 1 {
            return Err(Error::Validation(format!(
                "not a radial tree: {} edges for {} buses",
                n_edges,
                self.buses.len()
            )));
        }
        let mut adj: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for s in &self.segments {
            adj.entry(s.from_bus).or_default().push(s.to_bus);
            adj.entry(s.to_bus).or_default().push(s.from_bus);
        }
        for l in &self.links {
            adj.entry(l.from_bus).or_default().push(l.to_bus);
            adj.entry(l.to_bus).or_default().push(l.from_bus);
        }
        let slack = self
            .buses
            .iter()
            .find(|b| b.kind == BusKind::Slack)
            .unwrap()
            .id;
        let mut seen = BTreeSet::new();
        let mut stack = vec![slack];
        seen.insert(slack);
        while let Some(b) = stack.pop() {
            for &nb in adj.get(&b).into_iter().flatten() {
                if seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        if seen.len() != self.buses.len() {
            let orphan = ids.difference(&seen).next().unwrap();
            return Err(Error::Validation(format!(
                "disconnected bus {orphan} (not reachable from slack {slack})"
            )));
        }
        for cfg in self.configs.values() {
            cfg.validate()?;
        }
        Ok(())
    }
}

// ---- file schema ----

#[derive(Serialize, Deserialize)]
struct FileBus {
    id: u32,
    kind: BusKind,
    #[serde(default)]
    pv_arrays: u32,
}

#[derive(Serialize, Deserialize)]
struct FileSegment {
    from: u32,
    to: u32,
    length_ft: f64,
    config: u32,
}

#[derive(Serialize, Deserialize)]
struct FileLink {
    from: u32,
    to: u32,
}

#[derive(Serialize, Deserialize)]
struct FileBase {
    v_base_v: f64,
    s_base_va: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    base: FileBase,
    buses: Vec<FileBus>,
    segments: Vec<FileSegment>,
    #[serde(default)]
    links: Vec<FileLink>,
}

/// Load and validate a network model from a JSON network file.
pub fn load_network(path: &Path) -> Result<NetworkModel> {
    let text = std::fs::read_to_string(path)?;
    let file: NetworkFile = serde_json::from_str(&text).map_err(|e| {
        Error::Parse(format!("{}:{}: {e}", path.display(), e.line()))
    })?;
    let base = BaseSystem::new(file.base.v_base_v, file.base.s_base_va)?;
    let net = NetworkModel {
        buses: file
            .buses
            .iter()
            .map(|b| Bus {
                id: b.id,
                kind: b.kind,
                pv_array_count: b.pv_arrays,
            })
            .collect(),
        segments: file
            .segments
            .iter()
            .map(|s| Segment {
                from_bus: s.from,
                to_bus: s.to,
                length_miles: s.length_ft / FEET_PER_MILE,
                config_id: s.config,
            })
            .collect(),
        links: file
            .links
            .iter()
            .map(|l| Link {
                from_bus: l.from,
                to_bus: l.to,
            })
            .collect(),
        configs: standard_line_configs(),
        base,
    };
    net.validate()?;
    Ok(net)
}

/// Write a network model back out in the network file format.
pub fn save_network(net: &NetworkModel, path: &Path) -> Result<()> {
    let file = NetworkFile {
        base: FileBase {
            v_base_v: net.base.v_base,
            s_base_va: net.base.s_base,
        },
        buses: net
            .buses
            .iter()
            .map(|b| FileBus {
                id: b.id,
                kind: b.kind,
                pv_arrays: b.pv_array_count,
            })
            .collect(),
        segments: net
            .segments
            .iter()
            .map(|s| FileSegment {
                from: s.from_bus,
                to: s.to_bus,
                length_ft: s.length_miles * FEET_PER_MILE,
                config: s.config_id,
            })
            .collect(),
        links: net
            .links
            .iter()
            .map(|l| FileLink {
                from: l.from_bus,
                to: l.to_bus,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_dir;

    #[test]
    fn base_system_arithmetic() {
        let b = make_base(4800.0, 2.5e6).unwrap();
        assert!((b.z_base - 9.216).abs() < 1e-12);
        assert!((b.y_base * b.z_base - 1.0).abs() < 1e-15);
        let b = make_base(2771.2812921102035, 2.5e6).unwrap();
        assert!((b.z_base - 3.072).abs() < 1e-9);
        let b = make_base(1.0, 1.0).unwrap();
        assert_eq!(b.z_base, 1.0);
    }

    #[test]
    fn base_system_rejects_nonpositive() {
        assert!(make_base(0.0, 1.0).is_err());
        assert!(make_base(1.0, -2.0).is_err());
    }

    #[test]
    fn bundled_feeder_loads_and_validates() {
        let net = load_network(&data_dir().join("ieee37.json")).unwrap();
        assert_eq!(net.buses.len(), 37);
        assert_eq!(net.slack_bus(), 799);
        assert!(net.bus(775).is_some());
        assert_eq!(net.segments.len() + net.links.len(), 36);
    }

    #[test]
    fn unknown_config_rejected() {
        let mut net = load_network(&data_dir().join("ieee37.json")).unwrap();
        net.segments[0].config_id = 999;
        let err = net.validate().unwrap_err();
        assert!(err.to_string().contains("unknown config"), "{err}");
    }

    #[test]
    fn two_slacks_rejected() {
        let mut net = load_network(&data_dir().join("ieee37.json")).unwrap();
        net.buses[0].kind = BusKind::Slack;
        let err = net.validate().unwrap_err();
        assert!(err.to_string().contains("exactly one slack"), "{err}");
    }

    #[test]
    fn save_load_round_trip() {
        let net = load_network(&data_dir().join("ieee37.json")).unwrap();
        let dir = std::env::temp_dir().join("gridsim_grid_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.json");
        save_network(&net, &path).unwrap();
        let back = load_network(&path).unwrap();
        assert_eq!(back.buses.len(), net.buses.len());
        assert_eq!(back.segments.len(), net.segments.len());
        for (a, b) in net.segments.iter().zip(&back.segments) {
            assert_eq!(a.from_bus, b.from_bus);
            assert_eq!(a.to_bus, b.to_bus);
            assert_eq!(a.config_id, b.config_id);
            assert!((a.length_miles - b.length_miles).abs() < 1e-15);
        }
    }
}
