use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::TopologyError;

/// Label of a physical transport node as it appears in network files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Directed road link with its free-flow travel time in timespans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalArc {
    pub source: NodeId,
    pub target: NodeId,
    pub duration: u32,
}

/// Node pools used by the job-schedule sampler.
///
/// Each EV draws a start/destination pair; when its start node is listed in
/// `pool_a_starts` the first shift is drawn from `pool_a` and the second from
/// `pool_b`, otherwise the pools are swapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleNodes {
    pub pairs: Vec<(NodeId, NodeId)>,
    pub pool_a: Vec<NodeId>,
    pub pool_b: Vec<NodeId>,
    /// Start nodes whose first shift comes from `pool_a`.
    pub pool_a_starts: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportNetwork {
    #[serde(default)]
    pub name: String,
    pub nodes: Vec<NodeId>,
    pub arcs: Vec<PhysicalArc>,
    /// Nodes hosting a charging station, in charging-index order.
    pub stations: Vec<NodeId>,
    #[serde(default)]
    pub schedule_nodes: Option<ScheduleNodes>,
}

#[derive(Debug, Deserialize)]
struct ArcEntry {
    source: u32,
    target: u32,
    duration: u32,
    #[serde(default)]
    bidirectional: bool,
}

#[derive(Debug, Deserialize)]
struct ScheduleEntry {
    pairs: Vec<(u32, u32)>,
    pool_a: Vec<u32>,
    pool_b: Vec<u32>,
    pool_a_starts: Vec<u32>,
}

#[derive(Debug, Deserialize)]
struct NetworkFile {
    #[serde(default)]
    name: String,
    nodes: Vec<u32>,
    #[serde(default)]
    stations: Vec<u32>,
    #[serde(default)]
    arcs: Vec<ArcEntry>,
    #[serde(default)]
    schedule: Option<ScheduleEntry>,
}

fn ids(raw: &[u32]) -> Vec<NodeId> {
    raw.iter().copied().map(NodeId).collect()
}

impl TransportNetwork {
    /// Parses the TOML network schema:
    ///
    /// ```toml
    /// name = "ring"
    /// nodes = [1, 2, 3]
    /// stations = [2]
    /// [[arcs]]
    /// source = 1
    /// target = 2
    /// duration = 1
    /// bidirectional = true   # optional, expands to both directions
    /// [schedule]             # optional
    /// pairs = [[1, 3]]
    /// pool_a = [2]
    /// pool_b = [3]
    /// pool_a_starts = [1]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self, TopologyError> {
        let file: NetworkFile =
            toml::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        let mut arcs = Vec::new();
        for a in &file.arcs {
            arcs.push(PhysicalArc {
                source: NodeId(a.source),
                target: NodeId(a.target),
                duration: a.duration,
            });
            if a.bidirectional {
                arcs.push(PhysicalArc {
                    source: NodeId(a.target),
                    target: NodeId(a.source),
                    duration: a.duration,
                });
            }
        }
        let schedule_nodes = file.schedule.map(|s| ScheduleNodes {
            pairs: s.pairs.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect(),
            pool_a: ids(&s.pool_a),
            pool_b: ids(&s.pool_b),
            pool_a_starts: ids(&s.pool_a_starts),
        });
        let tn = TransportNetwork {
            name: file.name,
            nodes: ids(&file.nodes),
            arcs,
            stations: ids(&file.stations),
            schedule_nodes,
        };
        tn.validate()?;
        Ok(tn)
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.nodes.is_empty() {
            return Err(TopologyError::EmptyNetwork);
        }
        let mut seen = BTreeSet::new();
        for &n in &self.nodes {
            if !seen.insert(n) {
                return Err(TopologyError::DuplicateNode(n));
            }
        }
        let mut pairs = BTreeSet::new();
        for a in &self.arcs {
            for end in [a.source, a.target] {
                if !seen.contains(&end) {
                    return Err(TopologyError::UnknownNode(end));
                }
            }
            if a.source == a.target {
                return Err(TopologyError::SelfLoop(a.source));
            }
            if a.duration == 0 {
                return Err(TopologyError::ZeroDuration(a.source, a.target));
            }
            if !pairs.insert((a.source, a.target)) {
                return Err(TopologyError::DuplicateArc(a.source, a.target));
            }
        }
        let mut st = BTreeSet::new();
        for &s in &self.stations {
            if !seen.contains(&s) {
                return Err(TopologyError::UnknownNode(s));
            }
            if !st.insert(s) {
                return Err(TopologyError::DuplicateNode(s));
            }
        }
        if let Some(sn) = &self.schedule_nodes {
            let all = sn
                .pairs
                .iter()
                .flat_map(|&(a, b)| [a, b])
                .chain(sn.pool_a.iter().copied())
                .chain(sn.pool_b.iter().copied())
                .chain(sn.pool_a_starts.iter().copied());
            for n in all {
                if !seen.contains(&n) {
                    return Err(TopologyError::UnknownNode(n));
                }
            }
        }
        Ok(())
    }

    pub fn node_position(&self, node: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }

    pub fn station_position(&self, node: NodeId) -> Option<usize> {
        self.stations.iter().position(|&n| n == node)
    }

    /// All-pairs shortest travel times in timespans, where every arc costs
    /// `duration + extra`. Unreachable pairs are `None`.
    pub fn travel_times(&self, extra: u32) -> Vec<Vec<Option<u32>>> {
        let n = self.nodes.len();
        let pos: HashMap<NodeId, usize> =
            self.nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut d = vec![vec![None; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = Some(0);
        }
        for a in &self.arcs {
            let (s, t) = (pos[&a.source], pos[&a.target]);
            let w = a.duration + extra;
            if d[s][t].is_none_or(|cur| w < cur) {
                d[s][t] = Some(w);
            }
        }
        for k in 0..n {
            for i in 0..n {
                let Some(ik) = d[i][k] else { continue };
                for j in 0..n {
                    if let Some(kj) = d[k][j] {
                        let via = ik + kj;
                        if d[i][j].is_none_or(|cur| via < cur) {
                            d[i][j] = Some(via);
                        }
                    }
                }
            }
        }
        d
    }
}
