use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{NodeId, TopologyError, TransportNetwork};

/// Index of a node in the augmented (time-space) node set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AugNodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugNodeKind {
    Physical(NodeId),
    /// Pass-through node on a multi-timespan trip; `position` counts from 1.
    Chain { physical_arc: usize, position: u32 },
    /// Virtual congestion node; position 1 is the node entered from the source.
    Congestion { physical_arc: usize, position: u32 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArcFlags {
    pub stationary: bool,
    pub non_stationary: bool,
    pub congested: bool,
    pub free_flow: bool,
    pub vcn_entry: bool,
    pub vcn_exit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TsnArc {
    pub id: usize,
    pub source: AugNodeId,
    pub target: AugNodeId,
    pub flags: ArcFlags,
    /// Physical arc this trip arc belongs to; `None` for stationary arcs.
    pub physical_arc: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TsnConfig {
    /// Extra timespans a congested trip takes over its free-flow duration.
    pub congestion_delay: u32,
}

impl Default for TsnConfig {
    fn default() -> Self {
        TsnConfig { congestion_delay: 1 }
    }
}

/// Arcs entering and leaving one augmented node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowPair {
    pub node: AugNodeId,
    pub into: Vec<usize>,
    pub out_of: Vec<usize>,
}

/// Congestion-aware time-space expansion of a [`TransportNetwork`].
///
/// For every physical arc `a -> b` of duration `d` the expansion holds a
/// free-flow chain of `d` arcs through `d - 1` chain nodes, and a congested
/// detour `a -> vcn -> ...` that joins the same chain after spending
/// `congestion_delay` extra timespans on virtual congestion nodes. Only the
/// first arc of each alternative is gated by the traffic state; every arc
/// leaving a virtual node stays available so a vehicle is never stranded
/// mid-trip when the state flips.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpaceNetwork {
    timesteps: usize,
    nodes: Vec<AugNodeKind>,
    arcs: Vec<TsnArc>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    physical: HashMap<NodeId, AugNodeId>,
    stationary: HashMap<NodeId, usize>,
}

impl TimeSpaceNetwork {
    pub fn build(tn: &TransportNetwork, timesteps: usize) -> Result<Self, TopologyError> {
        Self::build_with(tn, timesteps, &TsnConfig::default())
    }

    pub fn build_with(
        tn: &TransportNetwork,
        timesteps: usize,
        cfg: &TsnConfig,
    ) -> Result<Self, TopologyError> {
        if timesteps < 2 {
            return Err(TopologyError::TooFewTimesteps(timesteps));
        }
        if cfg.congestion_delay == 0 {
            return Err(TopologyError::ZeroCongestionDelay);
        }
        tn.validate()?;

        let order: HashMap<NodeId, usize> =
            tn.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut sorted_arcs: Vec<usize> = (0..tn.arcs.len()).collect();
        sorted_arcs.sort_by_key(|&i| (order[&tn.arcs[i].source], order[&tn.arcs[i].target]));

        let mut nodes: Vec<AugNodeKind> = tn.nodes.iter().map(|&n| AugNodeKind::Physical(n)).collect();
        let physical: HashMap<NodeId, AugNodeId> =
            tn.nodes.iter().enumerate().map(|(i, &n)| (n, AugNodeId(i))).collect();

        // Virtual nodes per physical arc: chain nodes first, then congestion nodes.
        let mut chain_nodes: HashMap<usize, Vec<AugNodeId>> = HashMap::new();
        let mut vcn_nodes: HashMap<usize, Vec<AugNodeId>> = HashMap::new();
        for &ai in &sorted_arcs {
            let d = tn.arcs[ai].duration;
            let chain = (1..d)
                .map(|position| {
                    nodes.push(AugNodeKind::Chain { physical_arc: ai, position });
                    AugNodeId(nodes.len() - 1)
                })
                .collect();
            let vcns = (1..=cfg.congestion_delay)
                .map(|position| {
                    nodes.push(AugNodeKind::Congestion { physical_arc: ai, position });
                    AugNodeId(nodes.len() - 1)
                })
                .collect();
            chain_nodes.insert(ai, chain);
            vcn_nodes.insert(ai, vcns);
        }

        let mut arcs: Vec<TsnArc> = Vec::new();
        let mut stationary = HashMap::new();
        let push = |arcs: &mut Vec<TsnArc>, source, target, flags, physical_arc| {
            let id = arcs.len();
            arcs.push(TsnArc { id, source, target, flags, physical_arc });
            id
        };
        let both = ArcFlags {
            non_stationary: true,
            congested: true,
            free_flow: true,
            ..ArcFlags::default()
        };

        let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); tn.nodes.len()];
        for &ai in &sorted_arcs {
            by_source[order[&tn.arcs[ai].source]].push(ai);
        }
        for (pi, &node) in tn.nodes.iter().enumerate() {
            let here = AugNodeId(pi);
            let id = push(
                &mut arcs,
                here,
                here,
                ArcFlags {
                    stationary: true,
                    congested: true,
                    free_flow: true,
                    ..ArcFlags::default()
                },
                None,
            );
            stationary.insert(node, id);

            for &ai in &by_source[pi] {
                let arc = tn.arcs[ai];
                let dest = physical[&arc.target];
                let chain = &chain_nodes[&ai];
                let mut path = vec![here];
                path.extend(chain.iter().copied());
                path.push(dest);
                for (pos, w) in path.windows(2).enumerate() {
                    let flags = if pos == 0 {
                        ArcFlags {
                            non_stationary: true,
                            free_flow: true,
                            ..ArcFlags::default()
                        }
                    } else {
                        both
                    };
                    push(&mut arcs, w[0], w[1], flags, Some(ai));
                }
                // Congested detour rejoins the chain at its first node after the source.
                let vcns = &vcn_nodes[&ai];
                push(
                    &mut arcs,
                    here,
                    vcns[0],
                    ArcFlags {
                        non_stationary: true,
                        congested: true,
                        vcn_entry: true,
                        ..ArcFlags::default()
                    },
                    Some(ai),
                );
                for (i, &v) in vcns.iter().enumerate() {
                    let next = vcns.get(i + 1).copied().unwrap_or(path[1]);
                    push(&mut arcs, v, next, ArcFlags { vcn_exit: true, ..both }, Some(ai));
                }
            }
        }

        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        for a in &arcs {
            outgoing[a.source.0].push(a.id);
            incoming[a.target.0].push(a.id);
        }

        Ok(TimeSpaceNetwork {
            timesteps,
            nodes,
            arcs,
            outgoing,
            incoming,
            physical,
            stationary,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn timespans(&self) -> usize {
        self.timesteps - 1
    }

    pub fn nodes(&self) -> &[AugNodeKind] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[TsnArc] {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Arcs usable during a timespan with the given traffic state.
    pub fn available_arcs(&self, congested: bool) -> Vec<usize> {
        self.arcs
            .iter()
            .filter(|a| if congested { a.flags.congested } else { a.flags.free_flow })
            .map(|a| a.id)
            .collect()
    }

    pub fn is_available(&self, arc: usize, congested: bool) -> bool {
        let f = self.arcs[arc].flags;
        if congested {
            f.congested
        } else {
            f.free_flow
        }
    }

    pub fn flow_pairs(&self) -> Vec<FlowPair> {
        (0..self.nodes.len())
            .map(|n| FlowPair {
                node: AugNodeId(n),
                into: self.incoming[n].clone(),
                out_of: self.outgoing[n].clone(),
            })
            .collect()
    }

    pub fn arcs_from(&self, node: AugNodeId) -> Result<&[usize], TopologyError> {
        self.outgoing
            .get(node.0)
            .map(Vec::as_slice)
            .ok_or(TopologyError::UnknownAugNode(node.0))
    }

    pub fn arcs_into(&self, node: AugNodeId) -> Result<&[usize], TopologyError> {
        self.incoming
            .get(node.0)
            .map(Vec::as_slice)
            .ok_or(TopologyError::UnknownAugNode(node.0))
    }

    pub fn physical_node(&self, node: NodeId) -> Option<AugNodeId> {
        self.physical.get(&node).copied()
    }

    pub fn stationary_arc(&self, node: NodeId) -> Option<usize> {
        self.stationary.get(&node).copied()
    }

    pub fn non_stationary_arcs(&self) -> impl Iterator<Item = usize> + '_ {
        self.arcs.iter().filter(|a| a.flags.non_stationary).map(|a| a.id)
    }

    pub fn node_label(&self, node: AugNodeId) -> NodeLabel<'_> {
        NodeLabel { tsn: self, node }
    }
}

pub struct NodeLabel<'a> {
    tsn: &'a TimeSpaceNetwork,
    node: AugNodeId,
}

impl fmt::Display for NodeLabel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tsn.nodes[self.node.0] {
            AugNodeKind::Physical(n) => write!(f, "{n}"),
            AugNodeKind::Chain { physical_arc, position } => {
                write!(f, "chain[a{physical_arc}]#{position}")
            }
            AugNodeKind::Congestion { physical_arc, position } => {
                write!(f, "vcn[a{physical_arc}]#{position}")
            }
        }
    }
}
