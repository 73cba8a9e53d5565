use super::index::{Dims, Var, VariableIndex};
use super::model::{Column, ConstraintFamily as F, MipModel};
use super::MipError;
use crate::scenariogen::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildMode {
    /// Only the named scenario, with weight one.
    Deterministic(usize),
    /// Every scenario, weighted by its probability.
    Stochastic,
}

/// Hours per timestep, the power-to-energy factor of the energy balance.
pub fn step_hours(timesteps: usize) -> f64 {
    24.0 / timesteps as f64
}

pub fn variable_index(inst: &ProblemInstance, mode: BuildMode) -> Result<VariableIndex, MipError> {
    let p = inst.parts();
    let (scenario_map, weights) = match mode {
        BuildMode::Deterministic(sc) => {
            if sc >= inst.scenario_count() {
                return Err(MipError::Scenario(sc));
            }
            (vec![sc], vec![1.0])
        }
        BuildMode::Stochastic => {
            ((0..inst.scenario_count()).collect(), p.scenarios.probabilities.clone())
        }
    };
    let dims = Dims {
        scenarios: scenario_map.len(),
        evs: inst.ev_count(),
        arcs: inst.tsn().arc_count(),
        stations: p.transport.stations.len(),
        timesteps: inst.timesteps(),
        generators: p.grid.generators.len(),
        pv_units: p.grid.pv_units.len(),
        lines: p.grid.network.lines.len(),
        buses: p.grid.network.buses.len(),
    };
    Ok(VariableIndex::new(dims, scenario_map, weights))
}

/// Assembles the full model: objective, variable bounds and every
/// constraint family.
pub fn build_model(
    inst: &ProblemInstance,
    mode: BuildMode,
) -> Result<(MipModel, VariableIndex), MipError> {
    let ix = variable_index(inst, mode)?;
    let mut model = MipModel::new(columns(inst, &ix));
    add_routing_constraints(&mut model, &ix, inst)?;
    add_ev_energy_constraints(&mut model, &ix, inst)?;
    add_generation_constraints(&mut model, &ix, inst)?;
    add_network_constraints(&mut model, &ix, inst)?;
    Ok((model, ix))
}

fn columns(inst: &ProblemInstance, ix: &VariableIndex) -> Vec<Column> {
    let p = inst.parts();
    let tsn = inst.tsn();
    let net = &p.grid.network;
    let (cost, fleet) = (&p.costs, &p.fleet);
    let slack = net.bus_position(net.slack);
    (0..ix.len())
        .map(|i| {
            let v = ix.decode(i).expect("dense layout");
            let w = ix.weights[v.scenario()];
            let free = |lower: f64, upper: f64| Column { lower, upper, cost: 0.0, integer: false };
            match v {
                Var::Route { arc, .. } => {
                    let travel = if tsn.arcs()[arc].flags.non_stationary { cost.travel } else { 0.0 };
                    Column { lower: 0.0, upper: 1.0, cost: w * travel, integer: true }
                }
                Var::Charge { .. } | Var::Discharge { .. } => {
                    Column { lower: 0.0, upper: 1.0, cost: 0.0, integer: true }
                }
                Var::GenP { gen, .. } => {
                    let g = &p.grid.generators[gen];
                    Column { lower: g.p_min_kw, upper: g.p_max_kw, cost: w * g.cost, integer: false }
                }
                Var::GenQ { gen, .. } => {
                    let g = &p.grid.generators[gen];
                    free(g.q_min_kvar, g.q_max_kvar)
                }
                Var::Pv { sc, unit, t } => {
                    free(0.0, p.scenarios.pv_available_kw[ix.scenario_map[sc]][unit][t])
                }
                Var::ChargeP { .. } => {
                    Column { lower: 0.0, upper: f64::INFINITY, cost: w * cost.charge, integer: false }
                }
                Var::DischargeP { .. } => Column {
                    lower: 0.0,
                    upper: f64::INFINITY,
                    cost: -w * cost.discharge,
                    integer: false,
                },
                Var::Move { .. } => free(0.0, f64::INFINITY),
                Var::Energy { ev, t, .. } => {
                    let e = &fleet.evs[ev];
                    if t == 0 {
                        free(e.e_init_kwh, e.e_init_kwh)
                    } else {
                        free(e.e_min_kwh, e.e_max_kwh)
                    }
                }
                Var::FlowP { line, .. } => {
                    let l = &net.lines[line];
                    free(-l.p_max_kw, l.p_max_kw)
                }
                Var::FlowQ { line, .. } => {
                    let l = &net.lines[line];
                    free(-l.q_max_kvar, l.q_max_kvar)
                }
                Var::Voltage { bus, .. } => {
                    if Some(bus) == slack {
                        free(net.v_ref, net.v_ref)
                    } else {
                        free(0.95 * net.v_ref, 1.05 * net.v_ref)
                    }
                }
            }
        })
        .collect()
}

/// One arc per timespan among the arcs open under the traffic state, none on
/// the closed ones, flow conservation between consecutive timespans, and the
/// scheduled departure nodes.
pub fn add_routing_constraints(
    model: &mut MipModel,
    ix: &VariableIndex,
    inst: &ProblemInstance,
) -> Result<(), MipError> {
    let tsn = inst.tsn();
    let d = ix.dims;
    let congestion = &inst.parts().congestion.congested;
    let open = [tsn.available_arcs(false), tsn.available_arcs(true)];
    let closed: Vec<Vec<usize>> = [false, true]
        .iter()
        .map(|&j| (0..d.arcs).filter(|&a| !tsn.is_available(a, j)).collect())
        .collect();
    let pairs = tsn.flow_pairs();
    let mut origins = Vec::new();
    for job in &inst.parts().schedule.triples {
        let node = tsn.physical_node(job.node).ok_or(MipError::Schedule(job.node))?;
        let out = tsn.arcs_from(node).map_err(|_| MipError::Schedule(job.node))?;
        if out.is_empty() {
            return Err(MipError::Schedule(job.node));
        }
        origins.push((job.ev, job.timespan, out.to_vec()));
    }

    for sc in 0..d.scenarios {
        for ev in 0..d.evs {
            let route = |arc: usize, span: usize| ix.index(Var::Route { sc, ev, arc, span });
            for span in 0..d.spans() {
                let j = usize::from(congestion[span]);
                let row = open[j].iter().map(|&a| (route(a, span), 1.0)).collect();
                model.add_row(F::ArcChoice, 1.0, 1.0, row);
                if !closed[j].is_empty() {
                    let row = closed[j].iter().map(|&a| (route(a, span), 1.0)).collect();
                    model.add_row(F::ArcAvailability, f64::NEG_INFINITY, 0.0, row);
                }
            }
            for span in 0..d.spans().saturating_sub(1) {
                for pair in &pairs {
                    let mut row: Vec<(usize, f64)> =
                        pair.out_of.iter().map(|&a| (route(a, span + 1), 1.0)).collect();
                    row.extend(pair.into.iter().map(|&a| (route(a, span), -1.0)));
                    model.add_row(F::FlowConservation, 0.0, 0.0, row);
                }
            }
            for (_, span, out) in origins.iter().filter(|o| o.0 == ev) {
                let row = out.iter().map(|&a| (route(a, *span), 1.0)).collect();
                model.add_row(F::ScheduleOrigin, 1.0, 1.0, row);
            }
        }
    }
    Ok(())
}

/// Charging only while parked at the station, travel draw, rate limits and
/// the energy balance.
pub fn add_ev_energy_constraints(
    model: &mut MipModel,
    ix: &VariableIndex,
    inst: &ProblemInstance,
) -> Result<(), MipError> {
    let p = inst.parts();
    let tsn = inst.tsn();
    let d = ix.dims;
    let station_arcs: Vec<usize> = p
        .transport
        .stations
        .iter()
        .map(|&n| tsn.stationary_arc(n).ok_or(MipError::Schedule(n)))
        .collect::<Result<_, _>>()?;
    let moving: Vec<usize> = tsn.non_stationary_arcs().collect();
    let h = step_hours(d.timesteps);
    let eta = p.fleet.eta;

    for sc in 0..d.scenarios {
        for ev in 0..d.evs {
            let p_max = p.fleet.evs[ev].p_max_kw;
            for span in 0..d.spans() {
                let t = span + 1;
                for (station, &ii) in station_arcs.iter().enumerate() {
                    model.add_row(
                        F::ChargeAtStation,
                        f64::NEG_INFINITY,
                        0.0,
                        vec![
                            (ix.index(Var::Charge { sc, ev, station, t }), 1.0),
                            (ix.index(Var::Discharge { sc, ev, station, t }), 1.0),
                            (ix.index(Var::Route { sc, ev, arc: ii, span }), -1.0),
                        ],
                    );
                }
                let mut row = vec![(ix.index(Var::Move { sc, ev, t }), 1.0)];
                row.extend(
                    moving
                        .iter()
                        .map(|&arc| (ix.index(Var::Route { sc, ev, arc, span }), -p.fleet.p_move_kw)),
                );
                model.add_row(F::MovementDraw, 0.0, 0.0, row);
            }
            for t in 1..d.timesteps {
                for station in 0..d.stations {
                    model.add_row(
                        F::ChargeRate,
                        f64::NEG_INFINITY,
                        0.0,
                        vec![
                            (ix.index(Var::ChargeP { sc, ev, station, t }), 1.0),
                            (ix.index(Var::Charge { sc, ev, station, t }), -p_max),
                        ],
                    );
                    model.add_row(
                        F::DischargeRate,
                        f64::NEG_INFINITY,
                        0.0,
                        vec![
                            (ix.index(Var::DischargeP { sc, ev, station, t }), 1.0),
                            (ix.index(Var::Discharge { sc, ev, station, t }), -p_max),
                        ],
                    );
                }
                let mut row = vec![
                    (ix.index(Var::Energy { sc, ev, t }), 1.0),
                    (ix.index(Var::Energy { sc, ev, t: t - 1 }), -1.0),
                    (ix.index(Var::Move { sc, ev, t }), h * (1.0 + eta)),
                ];
                for station in 0..d.stations {
                    row.push((ix.index(Var::ChargeP { sc, ev, station, t }), -h * (1.0 - eta)));
                    row.push((ix.index(Var::DischargeP { sc, ev, station, t }), h * (1.0 + eta)));
                }
                model.add_row(F::EnergyBalance, 0.0, 0.0, row);
            }
        }
    }
    Ok(())
}

/// Generator and PV limits are column bounds set at construction; this only
/// checks that the bounds are consistent.
pub fn add_generation_constraints(
    model: &mut MipModel,
    ix: &VariableIndex,
    inst: &ProblemInstance,
) -> Result<(), MipError> {
    let _ = inst;
    for i in 0..ix.len() {
        if let Some(v @ (Var::GenP { .. } | Var::GenQ { .. } | Var::Pv { .. })) = ix.decode(i) {
            let c = &model.columns[i];
            if !(c.lower <= c.upper) {
                return Err(MipError::Bounds(v.to_string()));
            }
        }
    }
    Ok(())
}

/// Bus power balances and the linearised voltage drop along each line.
pub fn add_network_constraints(
    model: &mut MipModel,
    ix: &VariableIndex,
    inst: &ProblemInstance,
) -> Result<(), MipError> {
    let p = inst.parts();
    let net = &p.grid.network;
    let tree = inst.radial_tree();
    let d = ix.dims;
    let bus_of = |b| net.bus_position(b).ok_or(MipError::Grid(format!("unknown bus {b}")));
    let gen_bus: Vec<usize> = p.grid.generators.iter().map(|g| bus_of(g.bus)).collect::<Result<_, _>>()?;
    let pv_bus: Vec<usize> = p.grid.pv_units.iter().map(|u| bus_of(u.bus)).collect::<Result<_, _>>()?;
    let station_bus: Vec<usize> = p
        .transport
        .stations
        .iter()
        .map(|&n| {
            p.grid.stations.bus_of(n).ok_or(MipError::Grid(format!("station {n} unmapped"))).and_then(bus_of)
        })
        .collect::<Result<_, _>>()?;
    let scale = 1.0 / (net.v_ref * net.base_kva);

    for sc in 0..d.scenarios {
        for t in 0..d.timesteps {
            for b in 0..d.buses {
                let mut prow = Vec::new();
                let mut qrow = Vec::new();
                for (gen, _) in gen_bus.iter().enumerate().filter(|g| *g.1 == b) {
                    prow.push((ix.index(Var::GenP { sc, gen, t }), 1.0));
                    qrow.push((ix.index(Var::GenQ { sc, gen, t }), 1.0));
                }
                for (unit, _) in pv_bus.iter().enumerate().filter(|u| *u.1 == b) {
                    prow.push((ix.index(Var::Pv { sc, unit, t }), 1.0));
                }
                if let Some(line) = tree.upstream[b] {
                    prow.push((ix.index(Var::FlowP { sc, line, t }), 1.0));
                    qrow.push((ix.index(Var::FlowQ { sc, line, t }), 1.0));
                }
                for &line in &tree.downstream[b] {
                    prow.push((ix.index(Var::FlowP { sc, line, t }), -1.0));
                    qrow.push((ix.index(Var::FlowQ { sc, line, t }), -1.0));
                }
                if t > 0 {
                    for (station, _) in station_bus.iter().enumerate().filter(|s| *s.1 == b) {
                        for ev in 0..d.evs {
                            prow.push((ix.index(Var::ChargeP { sc, ev, station, t }), -1.0));
                            prow.push((ix.index(Var::DischargeP { sc, ev, station, t }), 1.0));
                        }
                    }
                }
                let (pl, ql) = (p.loads.p_kw[b][t], p.loads.q_kvar[b][t]);
                model.add_row(F::ActiveBalance, pl, pl, prow);
                model.add_row(F::ReactiveBalance, ql, ql, qrow);
            }
            for (line, &(up, down)) in tree.endpoints.iter().enumerate() {
                let l = &net.lines[line];
                model.add_row(
                    F::VoltageDrop,
                    0.0,
                    0.0,
                    vec![
                        (ix.index(Var::Voltage { sc, bus: up, t }), 1.0),
                        (ix.index(Var::Voltage { sc, bus: down, t }), -1.0),
                        (ix.index(Var::FlowP { sc, line, t }), -l.r_pu * scale),
                        (ix.index(Var::FlowQ { sc, line, t }), -l.x_pu * scale),
                    ],
                );
            }
        }
    }
    Ok(())
}
