//! Solver-free evaluation of a candidate point against the instance.
//!
//! Everything here is recomputed from the instance data; the model rows built
//! in `build` are never consulted. The variable index is used for lookups only.

use std::collections::BTreeMap;

use super::index::{Var, VariableIndex};
use super::model::ConstraintFamily as F;
use super::MipError;
use crate::scenariogen::ProblemInstance;
use crate::topology::AugNodeKind;

/// Largest scaled violation seen in each constraint family.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub max_violation: BTreeMap<F, f64>,
    pub tol: f64,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.max_violation.values().all(|&v| v <= self.tol)
    }

    pub fn violated(&self) -> Vec<(F, f64)> {
        self.max_violation.iter().filter(|(_, &v)| v > self.tol).map(|(&f, &v)| (f, v)).collect()
    }

    pub fn worst(&self) -> Option<(F, f64)> {
        self.max_violation
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&f, &v)| (f, v))
    }
}

struct Tally(BTreeMap<F, f64>);

impl Tally {
    fn note(&mut self, family: F, violation: f64) {
        let e = self.0.entry(family).or_insert(0.0);
        if violation > *e || violation.is_nan() {
            *e = if violation.is_nan() { f64::INFINITY } else { violation };
        }
    }

    /// `lhs == rhs`, scaled by the magnitude of the terms involved.
    fn equal(&mut self, family: F, lhs: f64, rhs: f64, magnitude: f64) {
        self.note(family, (lhs - rhs).abs() / magnitude.abs().max(1.0));
    }

    /// `lo <= x <= hi`.
    fn within(&mut self, family: F, x: f64, lo: f64, hi: f64) {
        let excess = (lo - x).max(x - hi).max(0.0);
        let scale = lo.abs().max(hi.abs()).max(1.0);
        self.note(family, if scale.is_finite() { excess / scale } else { excess });
    }
}

/// Checks every constraint family at relative tolerance `tol`.
pub fn check_feasible(
    inst: &ProblemInstance,
    ix: &VariableIndex,
    values: &[f64],
    tol: f64,
) -> Result<FeasibilityReport, MipError> {
    if values.len() != ix.len() {
        return Err(MipError::MissingValue(values.len().min(ix.len())));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(MipError::MissingValue(i));
    }
    let x = |v: Var| values[ix.index(v)];
    let p = inst.parts();
    let tsn = inst.tsn();
    let net = &p.grid.network;
    let d = ix.dims;
    let spans = d.timesteps - 1;
    let h = 24.0 / d.timesteps as f64;
    let eta = p.fleet.eta;
    let mut tally = Tally(BTreeMap::new());

    for i in 0..ix.binary_count() {
        tally.note(F::Integrality, values[i].abs().min((1.0 - values[i]).abs()));
    }

    let station_stay: Vec<usize> = p
        .transport
        .stations
        .iter()
        .map(|&node| {
            tsn.arcs()
                .iter()
                .find(|a| {
                    a.flags.stationary
                        && matches!(tsn.nodes()[a.source.0], AugNodeKind::Physical(n) if n == node)
                })
                .map(|a| a.id)
                .ok_or(MipError::Schedule(node))
        })
        .collect::<Result<_, _>>()?;
    let bus_pos = |b| net.bus_position(b).ok_or(MipError::Grid(format!("unknown bus {b}")));
    let station_bus: Vec<usize> = p
        .transport
        .stations
        .iter()
        .map(|&n| p.grid.stations.bus_of(n).ok_or(MipError::Grid(format!("station {n}"))).and_then(bus_pos))
        .collect::<Result<_, _>>()?;

    for (sc, &isc) in ix.scenario_map.iter().enumerate() {
        for ev in 0..d.evs {
            let spec = &p.fleet.evs[ev];
            let route = |arc, span| x(Var::Route { sc, ev, arc, span });
            for span in 0..spans {
                let congested = p.congestion.congested[span];
                let mut chosen = 0.0;
                let mut moving = 0.0;
                for a in tsn.arcs() {
                    let v = route(a.id, span);
                    let open = if congested { a.flags.congested } else { a.flags.free_flow };
                    if open {
                        chosen += v;
                    } else {
                        tally.note(F::ArcAvailability, v.abs());
                    }
                    if a.source != a.target {
                        moving += v;
                    }
                }
                tally.equal(F::ArcChoice, chosen, 1.0, 1.0);
                let pm = x(Var::Move { sc, ev, t: span + 1 });
                tally.equal(F::MovementDraw, pm, p.fleet.p_move_kw * moving, pm);
                for (station, &stay) in station_stay.iter().enumerate() {
                    let t = span + 1;
                    let used = x(Var::Charge { sc, ev, station, t }) + x(Var::Discharge { sc, ev, station, t });
                    tally.note(F::ChargeAtStation, (used - route(stay, span)).max(0.0));
                }
            }
            for span in 0..spans.saturating_sub(1) {
                for n in 0..tsn.node_count() {
                    let inflow: f64 =
                        tsn.arcs().iter().filter(|a| a.target.0 == n).map(|a| route(a.id, span)).sum();
                    let outflow: f64 = tsn
                        .arcs()
                        .iter()
                        .filter(|a| a.source.0 == n)
                        .map(|a| route(a.id, span + 1))
                        .sum();
                    tally.equal(F::FlowConservation, outflow, inflow, 1.0);
                }
            }
            for job in p.schedule.triples.iter().filter(|j| j.ev == ev) {
                let depart: f64 = tsn
                    .arcs()
                    .iter()
                    .filter(|a| matches!(tsn.nodes()[a.source.0], AugNodeKind::Physical(n) if n == job.node))
                    .map(|a| route(a.id, job.timespan))
                    .sum();
                tally.equal(F::ScheduleOrigin, depart, 1.0, 1.0);
            }

            let e0 = x(Var::Energy { sc, ev, t: 0 });
            tally.equal(F::InitialEnergy, e0, spec.e_init_kwh, spec.e_init_kwh);
            for t in 0..d.timesteps {
                let e = x(Var::Energy { sc, ev, t });
                tally.within(F::EnergyBounds, e, spec.e_min_kwh, spec.e_max_kwh);
                if t == 0 {
                    continue;
                }
                let (mut pc, mut pd) = (0.0, 0.0);
                for station in 0..d.stations {
                    let c = x(Var::ChargeP { sc, ev, station, t });
                    let dch = x(Var::DischargeP { sc, ev, station, t });
                    let ic = x(Var::Charge { sc, ev, station, t });
                    let id = x(Var::Discharge { sc, ev, station, t });
                    tally.within(F::ChargeRate, c, 0.0, spec.p_max_kw * ic);
                    tally.within(F::DischargeRate, dch, 0.0, spec.p_max_kw * id);
                    pc += c;
                    pd += dch;
                }
                let pm = x(Var::Move { sc, ev, t });
                let prev = x(Var::Energy { sc, ev, t: t - 1 });
                let expected = prev + h * ((1.0 - eta) * pc - (1.0 + eta) * (pd + pm));
                tally.equal(F::EnergyBalance, e, expected, e.abs().max(prev.abs()));
            }
        }

        for t in 0..d.timesteps {
            for (u, g) in p.grid.generators.iter().enumerate() {
                tally.within(F::ActiveGeneration, x(Var::GenP { sc, gen: u, t }), g.p_min_kw, g.p_max_kw);
                tally.within(F::ReactiveGeneration, x(Var::GenQ { sc, gen: u, t }), g.q_min_kvar, g.q_max_kvar);
            }
            for unit in 0..d.pv_units {
                let avail = p.scenarios.pv_available_kw[isc][unit][t];
                tally.within(F::SolarCurtailment, x(Var::Pv { sc, unit, t }), 0.0, avail);
            }
            for (l, line) in net.lines.iter().enumerate() {
                tally.within(F::ActiveLineLimit, x(Var::FlowP { sc, line: l, t }), -line.p_max_kw, line.p_max_kw);
                tally.within(F::ReactiveLineLimit, x(Var::FlowQ { sc, line: l, t }), -line.q_max_kvar, line.q_max_kvar);
                let up = bus_pos(line.from)?;
                let down = bus_pos(line.to)?;
                let drop = (x(Var::FlowP { sc, line: l, t }) * line.r_pu
                    + x(Var::FlowQ { sc, line: l, t }) * line.x_pu)
                    / (net.v_ref * net.base_kva);
                let vu = x(Var::Voltage { sc, bus: up, t });
                let vd = x(Var::Voltage { sc, bus: down, t });
                tally.equal(F::VoltageDrop, vu - drop, vd, vu);
            }
            for (b, &bus) in net.buses.iter().enumerate() {
                let v = x(Var::Voltage { sc, bus: b, t });
                tally.within(F::VoltageBounds, v, 0.95 * net.v_ref, 1.05 * net.v_ref);
                if bus == net.slack {
                    tally.equal(F::VoltageBounds, v, net.v_ref, 1.0);
                }
                let mut supply_p = 0.0;
                let mut supply_q = 0.0;
                let mut magnitude: f64 = p.loads.p_kw[b][t].abs();
                for (u, _) in p.grid.generators.iter().enumerate().filter(|(_, g)| g.bus == bus) {
                    supply_p += x(Var::GenP { sc, gen: u, t });
                    supply_q += x(Var::GenQ { sc, gen: u, t });
                }
                for (unit, _) in p.grid.pv_units.iter().enumerate().filter(|(_, u)| u.bus == bus) {
                    supply_p += x(Var::Pv { sc, unit, t });
                }
                for (l, line) in net.lines.iter().enumerate() {
                    if line.to == bus {
                        supply_p += x(Var::FlowP { sc, line: l, t });
                        supply_q += x(Var::FlowQ { sc, line: l, t });
                    }
                    if line.from == bus {
                        supply_p -= x(Var::FlowP { sc, line: l, t });
                        supply_q -= x(Var::FlowQ { sc, line: l, t });
                    }
                }
                let mut ev_net = 0.0;
                if t > 0 {
                    for (station, _) in station_bus.iter().enumerate().filter(|(_, &sb)| sb == b) {
                        for ev in 0..d.evs {
                            ev_net += x(Var::ChargeP { sc, ev, station, t })
                                - x(Var::DischargeP { sc, ev, station, t });
                        }
                    }
                }
                magnitude = magnitude.max(supply_p.abs()).max(ev_net.abs());
                tally.equal(F::ActiveBalance, supply_p, p.loads.p_kw[b][t] + ev_net, magnitude);
                let q_load = p.loads.q_kvar[b][t];
                tally.equal(F::ReactiveBalance, supply_q, q_load, q_load.abs().max(supply_q.abs()));
            }
        }
    }
    Ok(FeasibilityReport { max_violation: tally.0, tol })
}

/// Probability-weighted generation, travel and net charging cost.
pub fn objective_value(inst: &ProblemInstance, ix: &VariableIndex, values: &[f64]) -> f64 {
    let x = |v: Var| values[ix.index(v)];
    let p = inst.parts();
    let tsn = inst.tsn();
    let d = ix.dims;
    let mut total = 0.0;
    for (sc, &w) in ix.weights.iter().enumerate() {
        let mut cost = 0.0;
        for t in 0..d.timesteps {
            for (u, g) in p.grid.generators.iter().enumerate() {
                cost += g.cost * x(Var::GenP { sc, gen: u, t });
            }
        }
        for ev in 0..d.evs {
            for span in 0..d.timesteps - 1 {
                for a in tsn.arcs().iter().filter(|a| a.source != a.target) {
                    cost += p.costs.travel * x(Var::Route { sc, ev, arc: a.id, span });
                }
            }
            for t in 1..d.timesteps {
                for station in 0..d.stations {
                    cost += p.costs.charge * x(Var::ChargeP { sc, ev, station, t })
                        - p.costs.discharge * x(Var::DischargeP { sc, ev, station, t });
                }
            }
        }
        total += w * cost;
    }
    total
}

/// Largest gap between each EV's net energy change over the day and the sum
/// of its per-step exchanges.
pub fn energy_telescoping_residual(inst: &ProblemInstance, ix: &VariableIndex, values: &[f64]) -> f64 {
    let x = |v: Var| values[ix.index(v)];
    let p = inst.parts();
    let d = ix.dims;
    let h = 24.0 / d.timesteps as f64;
    let eta = p.fleet.eta;
    let mut worst: f64 = 0.0;
    for sc in 0..d.scenarios {
        for ev in 0..d.evs {
            let mut sum = 0.0;
            for t in 1..d.timesteps {
                let pc: f64 = (0..d.stations).map(|station| x(Var::ChargeP { sc, ev, station, t })).sum();
                let pd: f64 = (0..d.stations).map(|station| x(Var::DischargeP { sc, ev, station, t })).sum();
                sum += h * ((1.0 - eta) * pc - (1.0 + eta) * (pd + x(Var::Move { sc, ev, t })));
            }
            let change = x(Var::Energy { sc, ev, t: d.timesteps - 1 }) - x(Var::Energy { sc, ev, t: 0 });
            worst = worst.max((change - sum).abs());
        }
    }
    worst
}
