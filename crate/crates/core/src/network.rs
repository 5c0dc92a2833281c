//! Network data model and case-file ingestion.
//!
//! Case files carry physical units (kW, kvar, Ω, kV, MVA). A [`Network`] keeps
//! the original values for output and a per-unit copy for computation. Bus ids
//! are arbitrary and remapped to dense indices in file order.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DnrError, Result};

pub type BusId = u32;
pub type LineId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Base {
    pub v_kv: f64,
    pub s_mva: f64,
}

impl Base {
    pub fn z_ohm(&self) -> f64 {
        self.v_kv * self.v_kv / self.s_mva
    }

    pub fn s_kva(&self) -> f64 {
        self.s_mva * 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: BusId,
    pub p_kw: f64,
    pub q_kvar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: LineId,
    pub from: BusId,
    pub to: BusId,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

/// On-disk representation of a network. Not validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub root: BusId,
    pub base: Base,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveBase,
    DuplicateBus(BusId),
    MissingRoot(BusId),
    RootDemand(BusId),
    NegativeDemand { bus: BusId, field: &'static str, value: f64 },
    NonFinite { entity: String },
    DuplicateLineId(LineId),
    SelfLoop(LineId),
    UnknownEndpoint { line: LineId, bus: BusId },
    NonPositiveResistance(LineId),
    NegativeReactance(LineId),
    ParallelLine { line: LineId, other: LineId },
    Disconnected { unreachable: Vec<BusId> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveBase => write!(f, "base: v_kv and s_mva must be positive"),
            Violation::DuplicateBus(b) => write!(f, "bus {b}: duplicate bus id"),
            Violation::MissingRoot(b) => write!(f, "root: bus {b} does not exist"),
            Violation::RootDemand(b) => write!(f, "bus {b}: root bus must have zero demand"),
            Violation::NegativeDemand { bus, field, value } => {
                write!(f, "bus {bus}: negative demand {field} = {value}")
            }
            Violation::NonFinite { entity } => write!(f, "{entity}: non-finite value"),
            Violation::DuplicateLineId(l) => write!(f, "line {l}: duplicate line id"),
            Violation::SelfLoop(l) => write!(f, "line {l}: endpoints must be distinct"),
            Violation::UnknownEndpoint { line, bus } => {
                write!(f, "line {line}: endpoint bus {bus} does not exist")
            }
            Violation::NonPositiveResistance(l) => write!(f, "line {l}: resistance must be > 0"),
            Violation::NegativeReactance(l) => write!(f, "line {l}: reactance must be >= 0"),
            Violation::ParallelLine { line, other } => {
                write!(f, "line {line}: duplicates the endpoints of line {other}")
            }
            Violation::Disconnected { unreachable } => {
                write!(f, "connectivity: buses {unreachable:?} unreachable from the root")
            }
        }
    }
}

/// Checks every network invariant on an unvalidated case. Empty means valid.
pub fn validate(case: &Case) -> Vec<Violation> {
    let mut out = Vec::new();
    let base = &case.base;
    if !(base.v_kv.is_finite() && base.s_mva.is_finite() && base.v_kv > 0.0 && base.s_mva > 0.0) {
        out.push(Violation::NonPositiveBase);
    }

    let mut bus_ids = HashSet::new();
    for bus in &case.buses {
        if !bus_ids.insert(bus.id) {
            out.push(Violation::DuplicateBus(bus.id));
        }
        if !(bus.p_kw.is_finite() && bus.q_kvar.is_finite()) {
            out.push(Violation::NonFinite { entity: format!("bus {}", bus.id) });
            continue;
        }
        if bus.id == case.root {
            if bus.p_kw != 0.0 || bus.q_kvar != 0.0 {
                out.push(Violation::RootDemand(bus.id));
            }
        } else {
            if bus.p_kw < 0.0 {
                out.push(Violation::NegativeDemand { bus: bus.id, field: "p_kw", value: bus.p_kw });
            }
            if bus.q_kvar < 0.0 {
                out.push(Violation::NegativeDemand {
                    bus: bus.id,
                    field: "q_kvar",
                    value: bus.q_kvar,
                });
            }
        }
    }
    let root_ok = bus_ids.contains(&case.root);
    if !root_ok {
        out.push(Violation::MissingRoot(case.root));
    }

    let mut line_ids = HashSet::new();
    let mut pairs: HashMap<(BusId, BusId), LineId> = HashMap::new();
    for line in &case.lines {
        if !line_ids.insert(line.id) {
            out.push(Violation::DuplicateLineId(line.id));
        }
        if line.from == line.to {
            out.push(Violation::SelfLoop(line.id));
        }
        for b in [line.from, line.to] {
            if !bus_ids.contains(&b) {
                out.push(Violation::UnknownEndpoint { line: line.id, bus: b });
            }
        }
        if !(line.r_ohm.is_finite() && line.x_ohm.is_finite()) {
            out.push(Violation::NonFinite { entity: format!("line {}", line.id) });
        } else {
            if line.r_ohm <= 0.0 {
                out.push(Violation::NonPositiveResistance(line.id));
            }
            if line.x_ohm < 0.0 {
                out.push(Violation::NegativeReactance(line.id));
            }
        }
        let key = (line.from.min(line.to), line.from.max(line.to));
        if line.from != line.to {
            if let Some(&other) = pairs.get(&key) {
                out.push(Violation::ParallelLine { line: line.id, other });
            } else {
                pairs.insert(key, line.id);
            }
        }
    }

    if root_ok {
        let mut adj: HashMap<BusId, Vec<BusId>> = HashMap::new();
        for line in &case.lines {
            adj.entry(line.from).or_default().push(line.to);
            adj.entry(line.to).or_default().push(line.from);
        }
        let mut seen = HashSet::from([case.root]);
        let mut queue = VecDeque::from([case.root]);
        while let Some(u) = queue.pop_front() {
            for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                if bus_ids.contains(&v) && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        let mut unreachable: Vec<BusId> =
            case.buses.iter().map(|b| b.id).filter(|id| !seen.contains(id)).collect();
        if !unreachable.is_empty() {
            unreachable.sort_unstable();
            unreachable.dedup();
            out.push(Violation::Disconnected { unreachable });
        }
    }
    out
}

/// A validated, immutable distribution network.
#[derive(Debug, Clone)]
pub struct Network {
    case: Case,
    root: usize,
    bus_index: HashMap<BusId, usize>,
    line_index: HashMap<LineId, usize>,
    ends: Vec<(usize, usize)>,
    r_pu: Vec<f64>,
    x_pu: Vec<f64>,
    p_pu: Vec<f64>,
    q_pu: Vec<f64>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Network {
    pub fn from_case(case: Case) -> Result<Self> {
        let violations = validate(&case);
        if !violations.is_empty() {
            return Err(DnrError::Invalid(violations));
        }
        let bus_index: HashMap<BusId, usize> =
            case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let line_index: HashMap<LineId, usize> =
            case.lines.iter().enumerate().map(|(i, l)| (l.id, i)).collect();
        let z = case.base.z_ohm();
        let s = case.base.s_kva();
        let ends: Vec<(usize, usize)> =
            case.lines.iter().map(|l| (bus_index[&l.from], bus_index[&l.to])).collect();
        let mut adjacency = vec![Vec::new(); case.buses.len()];
        for (k, &(a, b)) in ends.iter().enumerate() {
            adjacency[a].push((b, k));
            adjacency[b].push((a, k));
        }
        Ok(Network {
            root: bus_index[&case.root],
            r_pu: case.lines.iter().map(|l| l.r_ohm / z).collect(),
            x_pu: case.lines.iter().map(|l| l.x_ohm / z).collect(),
            p_pu: case.buses.iter().map(|b| b.p_kw / s).collect(),
            q_pu: case.buses.iter().map(|b| b.q_kvar / s).collect(),
            bus_index,
            line_index,
            ends,
            adjacency,
            case,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_case(parse_case(text)?)
    }

    pub fn name(&self) -> &str {
        &self.case.name
    }

    pub fn base(&self) -> Base {
        self.case.base
    }

    pub fn case(&self) -> &Case {
        &self.case
    }

    pub fn buses(&self) -> &[Bus] {
        &self.case.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.case.lines
    }

    pub fn n_buses(&self) -> usize {
        self.case.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.case.lines.len()
    }

    /// Dense index of the substation bus.
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_id(&self) -> BusId {
        self.case.root
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    pub fn line_index(&self, id: LineId) -> Option<usize> {
        self.line_index.get(&id).copied()
    }

    pub fn bus_id(&self, idx: usize) -> BusId {
        self.case.buses[idx].id
    }

    pub fn line_id(&self, idx: usize) -> LineId {
        self.case.lines[idx].id
    }

    /// Dense endpoint indices of a line, in file order.
    pub fn ends(&self, line: usize) -> (usize, usize) {
        self.ends[line]
    }

    pub fn r_pu(&self, line: usize) -> f64 {
        self.r_pu[line]
    }

    pub fn x_pu(&self, line: usize) -> f64 {
        self.x_pu[line]
    }

    pub fn p_pu(&self, bus: usize) -> f64 {
        self.p_pu[bus]
    }

    pub fn q_pu(&self, bus: usize) -> f64 {
        self.q_pu[bus]
    }

    /// `(neighbor, line)` pairs incident to a bus.
    pub fn adjacency(&self, bus: usize) -> &[(usize, usize)] {
        &self.adjacency[bus]
    }

    /// Multiplier from per-unit power to kW.
    pub fn kw_per_pu(&self) -> f64 {
        self.case.base.s_kva()
    }

    pub fn total_demand_kw(&self) -> f64 {
        self.case.buses.iter().map(|b| b.p_kw).sum()
    }

    /// Always empty for a constructed network; kept for symmetry with [`validate`].
    pub fn validate(&self) -> Vec<Violation> {
        validate(&self.case)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.case).expect("case serializes")
    }
}

pub fn parse_case(text: &str) -> Result<Case> {
    serde_json::from_str(text).map_err(|e| DnrError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn load_case(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| DnrError::Io { path: path.to_path_buf(), source })?;
    Network::from_json(&text)
}

pub fn save_case(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, net.to_json() + "\n")
        .map_err(|source| DnrError::Io { path: path.to_path_buf(), source })
}
