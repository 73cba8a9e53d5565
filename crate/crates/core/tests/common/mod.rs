#![allow(dead_code)]

use evjrs::grid::GridModel;
use evjrs::scenariogen::{
    CongestionProfile, CostParams, EvFleet, EvSpec, InstanceParts, JobSchedule, JobTriple,
    LoadProfiles, ProblemInstance, ScenarioSet,
};
use evjrs::topology::{NodeId, PhysicalArc, TransportNetwork, TsnConfig};

pub fn network(nodes: &[u32], arcs: &[(u32, u32, u32)], stations: &[u32]) -> TransportNetwork {
    TransportNetwork {
        name: "test".into(),
        nodes: nodes.iter().map(|&n| NodeId(n)).collect(),
        arcs: arcs
            .iter()
            .map(|&(s, t, d)| PhysicalArc { source: NodeId(s), target: NodeId(t), duration: d })
            .collect(),
        stations: stations.iter().map(|&n| NodeId(n)).collect(),
        schedule_nodes: None,
    }
}

/// One slack bus carrying `load` kW / kvar, every listed node mapped to it.
pub fn single_bus_grid(load: (f64, f64), gen_cost: f64, nodes: &[u32]) -> GridModel {
    let mut text = format!(
        "base_kv = 12.66\nbase_kva = 10000\nslack = 1\n[[bus]]\nid = 1\np_kw = {}\nq_kvar = {}\n\
         [[generator]]\nbus = 1\np_min_kw = 0\np_max_kw = 1000\nq_min_kvar = -1000\nq_max_kvar = 1000\ncost = {gen_cost}\n",
        load.0, load.1
    );
    for n in nodes {
        text.push_str(&format!("[[station]]\nnode = {n}\nbus = 1\n"));
    }
    GridModel::from_toml_str(&text).unwrap()
}

/// Slack bus 1 feeding bus 2 over one line (`r`, `x` in ohms) with `load` at bus 2.
pub fn two_bus_grid(load: (f64, f64), r_ohm: f64, x_ohm: f64, nodes: &[u32]) -> GridModel {
    let mut text = format!(
        "base_kv = 12.66\nbase_kva = 10000\nslack = 1\ndefault_p_max_kw = 500\ndefault_q_max_kvar = 500\n\
         [[bus]]\nid = 1\n[[bus]]\nid = 2\np_kw = {}\nq_kvar = {}\n\
         [[line]]\nfrom = 1\nto = 2\nr_ohm = {r_ohm}\nx_ohm = {x_ohm}\n\
         [[generator]]\nbus = 1\np_min_kw = 0\np_max_kw = 1000\nq_min_kvar = -1000\nq_max_kvar = 1000\ncost = 0.1\n",
        load.0, load.1
    );
    for n in nodes {
        text.push_str(&format!("[[station]]\nnode = {n}\nbus = 2\n"));
    }
    GridModel::from_toml_str(&text).unwrap()
}

pub fn ev(e_min: f64, e_max: f64, e_init: f64, p_max: f64) -> EvSpec {
    EvSpec { e_min_kwh: e_min, e_max_kwh: e_max, e_init_kwh: e_init, p_max_kw: p_max }
}

/// Hand-assembled instance with constant nominal loads and given solar.
pub struct Custom {
    pub transport: TransportNetwork,
    pub grid: GridModel,
    pub timesteps: usize,
    pub congested: Vec<bool>,
    pub evs: Vec<EvSpec>,
    pub eta: f64,
    pub p_move: f64,
    pub costs: CostParams,
    pub jobs: Vec<(usize, u32, usize)>,
    /// `[sc][unit][t]`; defaults to zero availability in one scenario.
    pub pv: Option<Vec<Vec<Vec<f64>>>>,
    pub probabilities: Option<Vec<f64>>,
}

impl Custom {
    pub fn new(transport: TransportNetwork, grid: GridModel, timesteps: usize) -> Self {
        Custom {
            transport,
            grid,
            timesteps,
            congested: vec![false; timesteps - 1],
            evs: Vec::new(),
            eta: 0.0,
            p_move: 0.0,
            costs: CostParams { travel: 0.0, charge: 0.0, discharge: 0.0 },
            jobs: Vec::new(),
            pv: None,
            probabilities: None,
        }
    }

    pub fn build(self) -> ProblemInstance {
        let t = self.timesteps;
        let nominal = &self.grid.network.nominal_load;
        let loads = LoadProfiles {
            p_kw: nominal.iter().map(|l| vec![l.0; t]).collect(),
            q_kvar: nominal.iter().map(|l| vec![l.1; t]).collect(),
        };
        let pv = self
            .pv
            .unwrap_or_else(|| vec![vec![vec![0.0; t]; self.grid.pv_units.len()]]);
        let probabilities =
            self.probabilities.unwrap_or_else(|| vec![1.0 / pv.len() as f64; pv.len()]);
        ProblemInstance::assemble(InstanceParts {
            transport: self.transport,
            tsn_config: TsnConfig::default(),
            grid: self.grid,
            fleet: EvFleet { evs: self.evs, eta: self.eta, p_move_kw: self.p_move },
            costs: self.costs,
            scenarios: ScenarioSet { probabilities, pv_available_kw: pv },
            loads,
            schedule: JobSchedule {
                triples: self
                    .jobs
                    .iter()
                    .map(|&(ev, node, timespan)| JobTriple { ev, node: NodeId(node), timespan })
                    .collect(),
            },
            congestion: CongestionProfile { congested: self.congested },
            timesteps: t,
        })
        .unwrap()
    }
}

/// Every arc sequence (one arc per timespan) that respects arc availability,
/// continuity between consecutive timespans and the listed departure nodes.
/// Written against the expansion's arc list only, not the model rows.
pub fn enumerate_walks(
    inst: &ProblemInstance,
    ev: usize,
) -> Vec<Vec<usize>> {
    use evjrs::topology::AugNodeKind;
    let tsn = inst.tsn();
    let p = inst.parts();
    let spans = inst.timesteps() - 1;
    let jobs: Vec<_> = p.schedule.triples.iter().filter(|j| j.ev == ev).collect();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(walk) = stack.pop() {
        let s = walk.len();
        if s == spans {
            out.push(walk);
            continue;
        }
        let congested = p.congestion.congested[s];
        for a in tsn.arcs() {
            let open = if congested { a.flags.congested } else { a.flags.free_flow };
            if !open {
                continue;
            }
            if let Some(&prev) = walk.last() {
                if tsn.arcs()[prev].target != a.source {
                    continue;
                }
            }
            let ok = jobs.iter().filter(|j| j.timespan == s).all(|j| {
                matches!(tsn.nodes()[a.source.0], AugNodeKind::Physical(n) if n == j.node)
            });
            if ok {
                let mut w = walk.clone();
                w.push(a.id);
                stack.push(w);
            }
        }
    }
    out
}

/// Small labelled samples on a 3-bus, 6-step layout: loads and schedule
/// nodes vary with the seed, labels depend on the scheduled node.
pub fn synthetic_samples(n: usize, ev_count: usize, e_max: usize, seed: u64) -> Vec<evjrs::surrogate::Sample> {
    use evjrs::surrogate::{encode_features, LabelVector, Sample};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d_ev = 4;
    (0..n)
        .map(|_| {
            let t = 6;
            let loads = LoadProfiles {
                p_kw: (0..3).map(|_| (0..t).map(|_| rng.gen_range(0.0..5.0)).collect()).collect(),
                q_kvar: (0..3).map(|_| (0..t).map(|_| rng.gen_range(0.0..2.0)).collect()).collect(),
            };
            let solar: Vec<f64> = (0..t).map(|_| rng.gen_range(0.0..3.0)).collect();
            let mut bits = vec![0u8; e_max * d_ev];
            let mut triples = Vec::new();
            for ev in 0..ev_count {
                let node = rng.gen_range(1..=d_ev as u32);
                triples.push(JobTriple { ev, node: NodeId(node), timespan: rng.gen_range(0..t) });
                bits[ev * d_ev + node as usize - 1] = 1;
            }
            let features = encode_features(&solar, &loads, &JobSchedule { triples }, ev_count, e_max).unwrap();
            Sample { features, labels: LabelVector { bits, ev_count, e_max, d_ev } }
        })
        .collect()
}

/// Worst norm-relative gap between analytic and central-difference
/// gradients of a conv + dense network, over `samples` random inputs.
pub fn gradient_check(samples: usize, seed: u64) -> f64 {
    use evjrs::surrogate::net::{ClassWeights, Layer, Network};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let layers = vec![
        Layer::Conv { cin: 3, cout: 4, kernel: 3 },
        Layer::Relu,
        Layer::AvgPool { factor: 2 },
        Layer::Dense { inputs: 4 * 4, outputs: 5 },
    ];
    let mut net = Network::new((3, 8), layers, seed).unwrap();
    for p in net.params.iter_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    let w = ClassWeights { w0: 0.7, w1: 1.9 };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = Array2::from_shape_fn((3, 8), |_| rng.gen_range(-1.0..1.0));
        let labels: Vec<u8> = (0..5).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        let (_, grad) = net.loss_and_grad(x.view(), &labels, 5, w).unwrap();
        let mut numeric = vec![0.0; grad.len()];
        for i in 0..grad.len() {
            let orig = net.params[i];
            net.params[i] = orig + h;
            let up = net.loss(x.view(), &labels, 5, w).unwrap();
            net.params[i] = orig - h;
            let down = net.loss(x.view(), &labels, 5, w).unwrap();
            net.params[i] = orig;
            numeric[i] = (up - down) / (2.0 * h);
        }
        let diff = grad.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|b| b * b).sum::<f64>().sqrt());
        worst = worst.max(diff / norm.max(1e-12));
    }
    worst
}
