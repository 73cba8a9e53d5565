//! Small random instances for exhaustive and oracle testing.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    seeded_rng, CongestionProfile, CostParams, EvFleet, EvSpec, InstanceGenerator,
    InstanceGeneratorConfig, InstanceParts, JobSchedule, JobTriple, LoadProfiles,
    ProblemInstance, ScenarioError, ScenarioSet,
};
use crate::data;
use crate::topology::{
    AugNodeKind, NodeId, PhysicalArc, TimeSpaceNetwork, TransportNetwork, TsnConfig,
};

/// Upper bounds for [`random_micro_instance`]. Every drawn size is uniform in
/// `1..=max` (timesteps in `min_timesteps..=max_timesteps`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroParams {
    pub max_nodes: usize,
    pub max_evs: usize,
    pub min_timesteps: usize,
    pub max_timesteps: usize,
    pub max_scenarios: usize,
    pub congestion_probability: f64,
}

impl Default for MicroParams {
    fn default() -> Self {
        MicroParams {
            max_nodes: 4,
            max_evs: 2,
            min_timesteps: 3,
            max_timesteps: 8,
            max_scenarios: 2,
            congestion_probability: 0.3,
        }
    }
}

fn random_network(rng: &mut ChaCha8Rng, n: usize) -> TransportNetwork {
    let nodes: Vec<NodeId> = (1..=n as u32).map(NodeId).collect();
    let mut arcs = Vec::new();
    let mut link = |a: NodeId, b: NodeId, rng: &mut ChaCha8Rng| {
        let duration = if rng.gen_bool(0.8) { 1 } else { 2 };
        arcs.push(PhysicalArc { source: a, target: b, duration });
        arcs.push(PhysicalArc { source: b, target: a, duration });
    };
    for i in 1..n {
        link(nodes[i - 1], nodes[i], rng);
    }
    for i in 0..n {
        for j in i + 2..n {
            if rng.gen_bool(0.3) {
                link(nodes[i], nodes[j], rng);
            }
        }
    }
    let mut stations: Vec<NodeId> = nodes.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    if stations.is_empty() {
        stations.push(*nodes.choose(rng).expect("non-empty"));
    }
    TransportNetwork { name: "micro".into(), nodes, arcs, stations, schedule_nodes: None }
}

/// Walks the expansion at random and pins the EV to some of the physical nodes
/// it passes through, so the routing part is always satisfiable.
fn walk_schedule(
    rng: &mut ChaCha8Rng,
    tsn: &TimeSpaceNetwork,
    tn: &TransportNetwork,
    congestion: &CongestionProfile,
    ev: usize,
    out: &mut Vec<JobTriple>,
) {
    let mut at = tsn.physical_node(*tn.nodes.choose(rng).expect("non-empty")).expect("physical");
    for (s, &congested) in congestion.congested.iter().enumerate() {
        if let AugNodeKind::Physical(node) = tsn.nodes()[at.0] {
            if s == 0 || rng.gen_bool(0.3) {
                out.push(JobTriple { ev, node, timespan: s });
            }
        }
        let options: Vec<usize> = tsn
            .arcs_from(at)
            .expect("known node")
            .iter()
            .copied()
            .filter(|&a| tsn.is_available(a, congested))
            .collect();
        let arc = *options.choose(rng).expect("every node has an available exit");
        at = tsn.arcs()[arc].target;
    }
}

/// A random instance on the bundled three-bus feeder.
pub fn random_micro_instance(params: &MicroParams, seed: u64) -> Result<ProblemInstance, ScenarioError> {
    let mut rng = seeded_rng(seed, "micro", 0);
    let n = rng.gen_range(1..=params.max_nodes.clamp(1, 4));
    let transport = random_network(&mut rng, n);
    let t = rng.gen_range(params.min_timesteps.max(2)..=params.max_timesteps.max(2));
    let tsn_config = TsnConfig::default();
    let tsn = TimeSpaceNetwork::build_with(&transport, t, &tsn_config)?;
    let grid = data::micro_grid();

    let congestion = CongestionProfile {
        congested: (0..t - 1).map(|_| rng.gen_bool(params.congestion_probability)).collect(),
    };
    let ev_count = rng.gen_range(1..=params.max_evs.max(1));
    let mut triples = Vec::new();
    for ev in 0..ev_count {
        walk_schedule(&mut rng, &tsn, &transport, &congestion, ev, &mut triples);
    }

    let evs = (0..ev_count)
        .map(|_| {
            let e_min_kwh = rng.gen_range(0.0..5.0);
            let e_max_kwh = rng.gen_range(40.0..80.0);
            EvSpec {
                e_min_kwh,
                e_max_kwh,
                e_init_kwh: rng.gen_range(e_min_kwh + 10.0..e_max_kwh),
                p_max_kw: rng.gen_range(3.0..10.0),
            }
        })
        .collect();
    let fleet = EvFleet { evs, eta: rng.gen_range(0.0..0.1), p_move_kw: rng.gen_range(0.5..2.0) };
    let costs = CostParams {
        travel: rng.gen_range(0.0..0.5),
        charge: rng.gen_range(0.05..0.3),
        discharge: rng.gen_range(0.0..0.2),
    };

    let sc = rng.gen_range(1..=params.max_scenarios.max(1));
    let pv_available_kw = (0..sc)
        .map(|_| {
            grid.pv_units
                .iter()
                .map(|u| (0..t).map(|_| u.capacity_kw * rng.gen_range(0.0..1.0)).collect())
                .collect()
        })
        .collect();
    let mut probabilities: Vec<f64> = (0..sc).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = probabilities.iter().sum();
    probabilities.iter_mut().for_each(|p| *p /= total);
    // exact unit sum after normalisation rounding
    let rest: f64 = probabilities[1..].iter().sum();
    probabilities[0] = 1.0 - rest;

    let loads = LoadProfiles::base(&grid, t).sample_scaled((0.5, 1.5), rng.gen());
    ProblemInstance::assemble(InstanceParts {
        transport,
        tsn_config,
        grid,
        fleet,
        costs,
        scenarios: ScenarioSet { probabilities, pv_available_kw },
        loads,
        schedule: JobSchedule { triples },
        congestion,
        timesteps: t,
    })
}

/// Three-node line, one EV, eight timesteps, one scenario.
pub fn micro_instance() -> ProblemInstance {
    let cfg = InstanceGeneratorConfig { timesteps: 8, history_days: 60, ..Default::default() };
    InstanceGenerator::new(data::micro3(), data::micro_grid(), cfg, None, 1)
        .and_then(|g| g.deterministic(1, 1))
        .expect("bundled micro instance")
}
