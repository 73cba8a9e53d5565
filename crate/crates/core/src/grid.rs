//! Radial distribution network, generators, PV units and the station-to-bus map.
//!
//! Line impedances are stored in per-unit on the network's own base; flows,
//! loads and generation are in kW / kvar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    /// Upstream bus.
    pub from: BusId,
    /// Downstream bus.
    pub to: BusId,
    pub r_pu: f64,
    pub x_pu: f64,
    pub p_max_kw: f64,
    pub q_max_kvar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
    pub q_min_kvar: f64,
    pub q_max_kvar: f64,
    /// Currency per kWh of active generation.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvUnit {
    pub bus: BusId,
    /// Rated output; scenario availability is the sampled reference profile
    /// scaled by `capacity_kw / panel_max_kw`.
    pub capacity_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionNetwork {
    #[serde(default)]
    pub name: String,
    pub base_kv: f64,
    pub base_kva: f64,
    /// Slack-bus voltage in per-unit.
    pub v_ref: f64,
    pub slack: BusId,
    pub buses: Vec<BusId>,
    pub lines: Vec<Line>,
    /// Nominal bus loads `(kW, kvar)`, aligned with `buses`.
    pub nominal_load: Vec<(f64, f64)>,
}

/// Transport station node to distribution bus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationPlacement {
    pub map: BTreeMap<NodeId, BusId>,
}

impl StationPlacement {
    pub fn bus_of(&self, node: NodeId) -> Option<BusId> {
        self.map.get(&node).copied()
    }
}

/// Everything on the electrical side of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub network: DistributionNetwork,
    pub generators: Vec<Generator>,
    pub pv_units: Vec<PvUnit>,
    pub stations: StationPlacement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RadialDiagnostic {
    UnknownBus(BusId),
    DuplicateBus(BusId),
    /// Bus cannot be reached from the slack bus along downstream lines.
    Unreachable(BusId),
    MultipleUpstream(BusId),
    SlackHasUpstream(BusId),
    /// Buses of a closed loop, in traversal order.
    Cycle(Vec<BusId>),
    BadImpedance(usize),
    BadLimit(usize),
}

impl fmt::Display for RadialDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialDiagnostic::UnknownBus(b) => write!(f, "line references unknown bus {b}"),
            RadialDiagnostic::DuplicateBus(b) => write!(f, "bus {b} declared twice"),
            RadialDiagnostic::Unreachable(b) => write!(f, "bus {b} unreachable"),
            RadialDiagnostic::MultipleUpstream(b) => write!(f, "bus {b} has several upstream lines"),
            RadialDiagnostic::SlackHasUpstream(b) => write!(f, "slack bus {b} has an upstream line"),
            RadialDiagnostic::Cycle(c) => {
                let names: Vec<String> = c.iter().map(|b| b.to_string()).collect();
                write!(f, "cycle through buses {}", names.join(" - "))
            }
            RadialDiagnostic::BadImpedance(l) => write!(f, "line {l} has negative r or x"),
            RadialDiagnostic::BadLimit(l) => write!(f, "line {l} has a non-positive flow limit"),
        }
    }
}

/// Tree structure of a validated radial feeder, indexed by bus position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadialTree {
    pub upstream: Vec<Option<usize>>,
    pub downstream: Vec<Vec<usize>>,
    /// Line endpoints as bus positions `(up, down)`.
    pub endpoints: Vec<(usize, usize)>,
}

impl DistributionNetwork {
    pub fn bus_position(&self, bus: BusId) -> Option<usize> {
        self.buses.iter().position(|&b| b == bus)
    }

    pub fn validate_radial(&self) -> Result<RadialTree, Vec<RadialDiagnostic>> {
        let mut diags = Vec::new();
        let mut pos = BTreeMap::new();
        for (i, &b) in self.buses.iter().enumerate() {
            if pos.insert(b, i).is_some() {
                diags.push(RadialDiagnostic::DuplicateBus(b));
            }
        }
        if !pos.contains_key(&self.slack) {
            diags.push(RadialDiagnostic::UnknownBus(self.slack));
        }
        let n = self.buses.len();
        let mut upstream: Vec<Option<usize>> = vec![None; n];
        let mut downstream = vec![Vec::new(); n];
        let mut endpoints = Vec::with_capacity(self.lines.len());
        // union-find over buses to spot closed loops irrespective of orientation
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (li, line) in self.lines.iter().enumerate() {
            let (Some(&u), Some(&d)) = (pos.get(&line.from), pos.get(&line.to)) else {
                for b in [line.from, line.to] {
                    if !pos.contains_key(&b) {
                        diags.push(RadialDiagnostic::UnknownBus(b));
                    }
                }
                endpoints.push((usize::MAX, usize::MAX));
                continue;
            };
            if line.r_pu < 0.0 || line.x_pu < 0.0 {
                diags.push(RadialDiagnostic::BadImpedance(li));
            }
            if !(line.p_max_kw > 0.0 && line.q_max_kvar > 0.0) {
                diags.push(RadialDiagnostic::BadLimit(li));
            }
            endpoints.push((u, d));
            let (ru, rd) = (root(&mut parent, u), root(&mut parent, d));
            if ru == rd {
                diags.push(RadialDiagnostic::Cycle(self.loop_path(&adj, u, d)));
            } else {
                parent[ru] = rd;
            }
            adj[u].push(d);
            adj[d].push(u);
            if self.buses[d] == self.slack {
                diags.push(RadialDiagnostic::SlackHasUpstream(self.slack));
            } else if upstream[d].is_some() {
                diags.push(RadialDiagnostic::MultipleUpstream(self.buses[d]));
            } else {
                upstream[d] = Some(li);
            }
            downstream[u].push(li);
        }
        if let Some(&s) = pos.get(&self.slack) {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(b) = stack.pop() {
                for &li in &downstream[b] {
                    let d = endpoints[li].1;
                    if !seen[d] {
                        seen[d] = true;
                        stack.push(d);
                    }
                }
            }
            for (i, ok) in seen.iter().enumerate() {
                if !ok {
                    diags.push(RadialDiagnostic::Unreachable(self.buses[i]));
                }
            }
        }
        if diags.is_empty() {
            Ok(RadialTree { upstream, downstream, endpoints })
        } else {
            Err(diags)
        }
    }

    /// Path `from .. to` over the undirected adjacency built so far; closing it
    /// with the new line gives the loop.
    fn loop_path(&self, adj: &[Vec<usize>], from: usize, to: usize) -> Vec<BusId> {
        let mut prev = vec![usize::MAX; adj.len()];
        let mut queue = std::collections::VecDeque::from([from]);
        prev[from] = from;
        while let Some(b) = queue.pop_front() {
            if b == to {
                break;
            }
            for &nb in &adj[b] {
                if prev[nb] == usize::MAX {
                    prev[nb] = b;
                    queue.push_back(nb);
                }
            }
        }
        let mut path = vec![self.buses[to]];
        let mut cur = to;
        while cur != from && prev[cur] != usize::MAX {
            cur = prev[cur];
            path.push(self.buses[cur]);
        }
        path.reverse();
        path
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("grid file: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
    #[error("network is not radial: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    NotRadial(Vec<RadialDiagnostic>),
}

#[derive(Debug, Deserialize)]
struct BusEntry {
    id: u32,
    #[serde(default)]
    p_kw: f64,
    #[serde(default)]
    q_kvar: f64,
}

#[derive(Debug, Deserialize)]
struct LineEntry {
    from: u32,
    to: u32,
    r_ohm: f64,
    x_ohm: f64,
    p_max_kw: Option<f64>,
    q_max_kvar: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct GenEntry {
    bus: u32,
    p_min_kw: f64,
    p_max_kw: f64,
    q_min_kvar: f64,
    q_max_kvar: f64,
    cost: f64,
}

#[derive(Debug, Deserialize)]
struct PvEntry {
    bus: u32,
    capacity_kw: f64,
}

#[derive(Debug, Deserialize)]
struct StationEntry {
    node: u32,
    bus: u32,
}

#[derive(Debug, Deserialize)]
struct GridFile {
    #[serde(default)]
    name: String,
    base_kv: f64,
    base_kva: f64,
    #[serde(default = "one")]
    v_ref: f64,
    slack: u32,
    default_p_max_kw: Option<f64>,
    default_q_max_kvar: Option<f64>,
    #[serde(rename = "bus")]
    buses: Vec<BusEntry>,
    #[serde(rename = "line", default)]
    lines: Vec<LineEntry>,
    #[serde(rename = "generator", default)]
    generators: Vec<GenEntry>,
    #[serde(rename = "pv", default)]
    pv: Vec<PvEntry>,
    #[serde(rename = "station", default)]
    stations: Vec<StationEntry>,
}

fn one() -> f64 {
    1.0
}

impl GridModel {
    /// Parses the TOML grid schema. Line impedances are given in ohms and
    /// converted with `Z_base = base_kv^2 * 1000 / base_kva`.
    ///
    /// ```toml
    /// base_kv = 12.66
    /// base_kva = 10000
    /// slack = 1
    /// default_p_max_kw = 5000
    /// default_q_max_kvar = 4000
    /// [[bus]]
    /// id = 1
    /// [[bus]]
    /// id = 2
    /// p_kw = 100
    /// q_kvar = 60
    /// [[line]]
    /// from = 1
    /// to = 2
    /// r_ohm = 0.0922
    /// x_ohm = 0.047
    /// [[generator]]
    /// bus = 1
    /// p_min_kw = 0
    /// p_max_kw = 10000
    /// q_min_kvar = -10000
    /// q_max_kvar = 10000
    /// cost = 0.1
    /// [[pv]]
    /// bus = 2
    /// capacity_kw = 300
    /// [[station]]
    /// node = 5
    /// bus = 2
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self, GridError> {
        let f: GridFile = toml::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        if !(f.base_kv > 0.0 && f.base_kva > 0.0 && f.v_ref > 0.0) {
            return Err(GridError::Invalid("base values must be positive".into()));
        }
        let z_base = f.base_kv * f.base_kv * 1000.0 / f.base_kva;
        let mut lines = Vec::with_capacity(f.lines.len());
        for (i, l) in f.lines.iter().enumerate() {
            let p_max = l.p_max_kw.or(f.default_p_max_kw);
            let q_max = l.q_max_kvar.or(f.default_q_max_kvar);
            let (Some(p_max_kw), Some(q_max_kvar)) = (p_max, q_max) else {
                return Err(GridError::Invalid(format!("line {i} has no flow limit")));
            };
            lines.push(Line {
                from: BusId(l.from),
                to: BusId(l.to),
                r_pu: l.r_ohm / z_base,
                x_pu: l.x_ohm / z_base,
                p_max_kw,
                q_max_kvar,
            });
        }
        let network = DistributionNetwork {
            name: f.name,
            base_kv: f.base_kv,
            base_kva: f.base_kva,
            v_ref: f.v_ref,
            slack: BusId(f.slack),
            buses: f.buses.iter().map(|b| BusId(b.id)).collect(),
            lines,
            nominal_load: f.buses.iter().map(|b| (b.p_kw, b.q_kvar)).collect(),
        };
        let grid = GridModel {
            network,
            generators: f
                .generators
                .iter()
                .map(|g| Generator {
                    bus: BusId(g.bus),
                    p_min_kw: g.p_min_kw,
                    p_max_kw: g.p_max_kw,
                    q_min_kvar: g.q_min_kvar,
                    q_max_kvar: g.q_max_kvar,
                    cost: g.cost,
                })
                .collect(),
            pv_units: f
                .pv
                .iter()
                .map(|p| PvUnit { bus: BusId(p.bus), capacity_kw: p.capacity_kw })
                .collect(),
            stations: StationPlacement {
                map: f.stations.iter().map(|s| (NodeId(s.node), BusId(s.bus))).collect(),
            },
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<RadialTree, GridError> {
        let tree = self.network.validate_radial().map_err(GridError::NotRadial)?;
        let buses: BTreeSet<BusId> = self.network.buses.iter().copied().collect();
        if self.network.nominal_load.len() != self.network.buses.len() {
            return Err(GridError::Invalid("nominal load list does not match buses".into()));
        }
        for (i, g) in self.generators.iter().enumerate() {
            if !buses.contains(&g.bus) {
                return Err(GridError::Invalid(format!("generator {i} on unknown bus {}", g.bus)));
            }
            if g.p_min_kw > g.p_max_kw || g.q_min_kvar > g.q_max_kvar {
                return Err(GridError::Invalid(format!("generator {i} has min > max")));
            }
            if g.cost < 0.0 {
                return Err(GridError::Invalid(format!("generator {i} has negative cost")));
            }
        }
        for (i, p) in self.pv_units.iter().enumerate() {
            if !buses.contains(&p.bus) {
                return Err(GridError::Invalid(format!("pv unit {i} on unknown bus {}", p.bus)));
            }
            if p.capacity_kw < 0.0 {
                return Err(GridError::Invalid(format!("pv unit {i} has negative capacity")));
            }
        }
        for (node, bus) in &self.stations.map {
            if !buses.contains(bus) {
                return Err(GridError::Invalid(format!("station {node} mapped to unknown bus {bus}")));
            }
        }
        Ok(tree)
    }
}
