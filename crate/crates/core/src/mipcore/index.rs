use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// One decision variable of the model. `sc` is the model's own scenario slot
/// (see [`VariableIndex::scenario_map`]); `t` is a 0-based timestep and
/// `span` a 0-based timespan running from `t = span` to `t = span + 1`.
///
/// Charging quantities and the travel draw exist for `t >= 1` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Route { sc: usize, ev: usize, arc: usize, span: usize },
    Charge { sc: usize, ev: usize, station: usize, t: usize },
    Discharge { sc: usize, ev: usize, station: usize, t: usize },
    GenP { sc: usize, gen: usize, t: usize },
    GenQ { sc: usize, gen: usize, t: usize },
    Pv { sc: usize, unit: usize, t: usize },
    ChargeP { sc: usize, ev: usize, station: usize, t: usize },
    DischargeP { sc: usize, ev: usize, station: usize, t: usize },
    Move { sc: usize, ev: usize, t: usize },
    Energy { sc: usize, ev: usize, t: usize },
    FlowP { sc: usize, line: usize, t: usize },
    FlowQ { sc: usize, line: usize, t: usize },
    Voltage { sc: usize, bus: usize, t: usize },
}

impl Var {
    pub fn is_binary(&self) -> bool {
        matches!(self, Var::Route { .. } | Var::Charge { .. } | Var::Discharge { .. })
    }

    pub fn scenario(&self) -> usize {
        match *self {
            Var::Route { sc, .. }
            | Var::Charge { sc, .. }
            | Var::Discharge { sc, .. }
            | Var::GenP { sc, .. }
            | Var::GenQ { sc, .. }
            | Var::Pv { sc, .. }
            | Var::ChargeP { sc, .. }
            | Var::DischargeP { sc, .. }
            | Var::Move { sc, .. }
            | Var::Energy { sc, .. }
            | Var::FlowP { sc, .. }
            | Var::FlowQ { sc, .. }
            | Var::Voltage { sc, .. } => sc,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::Route { sc, ev, arc, span } => write!(f, "I[{sc},{ev},{arc},{span}]"),
            Var::Charge { sc, ev, station, t } => write!(f, "Ic[{sc},{ev},{station},{t}]"),
            Var::Discharge { sc, ev, station, t } => write!(f, "Id[{sc},{ev},{station},{t}]"),
            Var::GenP { sc, gen, t } => write!(f, "Pg[{sc},{gen},{t}]"),
            Var::GenQ { sc, gen, t } => write!(f, "Qg[{sc},{gen},{t}]"),
            Var::Pv { sc, unit, t } => write!(f, "Pv[{sc},{unit},{t}]"),
            Var::ChargeP { sc, ev, station, t } => write!(f, "Pc[{sc},{ev},{station},{t}]"),
            Var::DischargeP { sc, ev, station, t } => write!(f, "Pd[{sc},{ev},{station},{t}]"),
            Var::Move { sc, ev, t } => write!(f, "Pm[{sc},{ev},{t}]"),
            Var::Energy { sc, ev, t } => write!(f, "E[{sc},{ev},{t}]"),
            Var::FlowP { sc, line, t } => write!(f, "Pf[{sc},{line},{t}]"),
            Var::FlowQ { sc, line, t } => write!(f, "Qf[{sc},{line},{t}]"),
            Var::Voltage { sc, bus, t } => write!(f, "V[{sc},{bus},{t}]"),
        }
    }
}

/// Sizes that determine the variable layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub scenarios: usize,
    pub evs: usize,
    pub arcs: usize,
    pub stations: usize,
    pub timesteps: usize,
    pub generators: usize,
    pub pv_units: usize,
    pub lines: usize,
    pub buses: usize,
}

impl Dims {
    pub fn spans(&self) -> usize {
        self.timesteps - 1
    }

    /// Binary stride of one EV in one scenario.
    pub fn d_ev(&self) -> usize {
        self.arcs * self.spans() + 2 * self.stations * (self.timesteps - 1)
    }
}

/// Flat layout of all variables.
///
/// All binaries come first, scenario-major then EV-major with stride
/// [`Dims::d_ev`]; inside an EV block the routing binaries are span-major
/// (`span * arcs + arc`), followed by the charge and then the discharge
/// binaries (`station * (T - 1) + t - 1`). The continuous variables follow,
/// again scenario-major, in the order of the [`Var`] variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableIndex {
    pub dims: Dims,
    /// Instance scenario used by each model scenario slot.
    pub scenario_map: Vec<usize>,
    /// Objective weight of each model scenario slot.
    pub weights: Vec<f64>,
}

const CONT_KINDS: usize = 10;

impl VariableIndex {
    pub fn new(dims: Dims, scenario_map: Vec<usize>, weights: Vec<f64>) -> Self {
        assert_eq!(scenario_map.len(), dims.scenarios);
        assert_eq!(weights.len(), dims.scenarios);
        assert!(dims.timesteps >= 2);
        VariableIndex { dims, scenario_map, weights }
    }

    pub fn d_ev(&self) -> usize {
        self.dims.d_ev()
    }

    pub fn binary_count(&self) -> usize {
        self.dims.scenarios * self.dims.evs * self.d_ev()
    }

    fn cont_sizes(&self) -> [usize; CONT_KINDS] {
        let d = &self.dims;
        let t = d.timesteps;
        let kc = d.evs * d.stations * (t - 1);
        [
            d.generators * t,
            d.generators * t,
            d.pv_units * t,
            kc,
            kc,
            d.evs * (t - 1),
            d.evs * t,
            d.lines * t,
            d.lines * t,
            d.buses * t,
        ]
    }

    pub fn continuous_per_scenario(&self) -> usize {
        self.cont_sizes().iter().sum()
    }

    pub fn len(&self) -> usize {
        self.binary_count() + self.dims.scenarios * self.continuous_per_scenario()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_binary(&self, index: usize) -> bool {
        index < self.binary_count()
    }

    /// Binary block of one EV in one model scenario.
    pub fn ev_block(&self, sc: usize, ev: usize) -> Range<usize> {
        let start = (sc * self.dims.evs + ev) * self.d_ev();
        start..start + self.d_ev()
    }

    fn cont_base(&self, sc: usize, kind: usize) -> usize {
        let sizes = self.cont_sizes();
        self.binary_count()
            + sc * self.continuous_per_scenario()
            + sizes[..kind].iter().sum::<usize>()
    }

    /// Flat index, or `None` when any component is out of range.
    pub fn try_index(&self, v: Var) -> Option<usize> {
        let d = &self.dims;
        let t_all = d.timesteps;
        let tm = t_all - 1;
        if v.scenario() >= d.scenarios {
            return None;
        }
        let idx = match v {
            Var::Route { sc, ev, arc, span } => {
                if ev >= d.evs || arc >= d.arcs || span >= d.spans() {
                    return None;
                }
                self.ev_block(sc, ev).start + span * d.arcs + arc
            }
            Var::Charge { sc, ev, station, t } | Var::Discharge { sc, ev, station, t } => {
                if ev >= d.evs || station >= d.stations || t == 0 || t >= t_all {
                    return None;
                }
                let shift = if matches!(v, Var::Discharge { .. }) { d.stations * tm } else { 0 };
                self.ev_block(sc, ev).start + d.arcs * d.spans() + shift + station * tm + t - 1
            }
            Var::GenP { sc, gen, t } | Var::GenQ { sc, gen, t } => {
                if gen >= d.generators || t >= t_all {
                    return None;
                }
                let kind = if matches!(v, Var::GenP { .. }) { 0 } else { 1 };
                self.cont_base(sc, kind) + gen * t_all + t
            }
            Var::Pv { sc, unit, t } => {
                if unit >= d.pv_units || t >= t_all {
                    return None;
                }
                self.cont_base(sc, 2) + unit * t_all + t
            }
            Var::ChargeP { sc, ev, station, t } | Var::DischargeP { sc, ev, station, t } => {
                if ev >= d.evs || station >= d.stations || t == 0 || t >= t_all {
                    return None;
                }
                let kind = if matches!(v, Var::ChargeP { .. }) { 3 } else { 4 };
                self.cont_base(sc, kind) + (ev * d.stations + station) * tm + t - 1
            }
            Var::Move { sc, ev, t } => {
                if ev >= d.evs || t == 0 || t >= t_all {
                    return None;
                }
                self.cont_base(sc, 5) + ev * tm + t - 1
            }
            Var::Energy { sc, ev, t } => {
                if ev >= d.evs || t >= t_all {
                    return None;
                }
                self.cont_base(sc, 6) + ev * t_all + t
            }
            Var::FlowP { sc, line, t } | Var::FlowQ { sc, line, t } => {
                if line >= d.lines || t >= t_all {
                    return None;
                }
                let kind = if matches!(v, Var::FlowP { .. }) { 7 } else { 8 };
                self.cont_base(sc, kind) + line * t_all + t
            }
            Var::Voltage { sc, bus, t } => {
                if bus >= d.buses || t >= t_all {
                    return None;
                }
                self.cont_base(sc, 9) + bus * t_all + t
            }
        };
        Some(idx)
    }

    /// Flat index of a variable known to exist in this layout.
    pub fn index(&self, v: Var) -> usize {
        self.try_index(v).unwrap_or_else(|| panic!("variable {v} outside the layout"))
    }

    pub fn decode(&self, index: usize) -> Option<Var> {
        let d = &self.dims;
        let t_all = d.timesteps;
        let tm = t_all - 1;
        if index < self.binary_count() {
            let block = index / self.d_ev();
            let (sc, ev) = (block / d.evs, block % d.evs);
            let r = index % self.d_ev();
            let routing = d.arcs * d.spans();
            if r < routing {
                return Some(Var::Route { sc, ev, arc: r % d.arcs, span: r / d.arcs });
            }
            let r = r - routing;
            let per = d.stations * tm;
            let (station, t) = ((r % per) / tm, (r % per) % tm + 1);
            return Some(if r < per {
                Var::Charge { sc, ev, station, t }
            } else {
                Var::Discharge { sc, ev, station, t }
            });
        }
        let per_sc = self.continuous_per_scenario();
        if per_sc == 0 {
            return None;
        }
        let rel = index - self.binary_count();
        let sc = rel / per_sc;
        if sc >= d.scenarios {
            return None;
        }
        let mut r = rel % per_sc;
        let sizes = self.cont_sizes();
        let mut kind = 0;
        while r >= sizes[kind] {
            r -= sizes[kind];
            kind += 1;
        }
        Some(match kind {
            0 => Var::GenP { sc, gen: r / t_all, t: r % t_all },
            1 => Var::GenQ { sc, gen: r / t_all, t: r % t_all },
            2 => Var::Pv { sc, unit: r / t_all, t: r % t_all },
            3 | 4 => {
                let (pair, t) = (r / tm, r % tm + 1);
                let (ev, station) = (pair / d.stations, pair % d.stations);
                if kind == 3 {
                    Var::ChargeP { sc, ev, station, t }
                } else {
                    Var::DischargeP { sc, ev, station, t }
                }
            }
            5 => Var::Move { sc, ev: r / tm, t: r % tm + 1 },
            6 => Var::Energy { sc, ev: r / t_all, t: r % t_all },
            7 => Var::FlowP { sc, line: r / t_all, t: r % t_all },
            8 => Var::FlowQ { sc, line: r / t_all, t: r % t_all },
            _ => Var::Voltage { sc, bus: r / t_all, t: r % t_all },
        })
    }

    pub fn name(&self, index: usize) -> Option<String> {
        self.decode(index).map(|v| v.to_string())
    }

    /// Inverse of [`Var`]'s `Display`.
    pub fn parse_name(&self, name: &str) -> Option<usize> {
        let (kind, rest) = name.split_once('[')?;
        let nums: Vec<usize> = rest
            .strip_suffix(']')?
            .split(',')
            .map(|s| s.parse().ok())
            .collect::<Option<_>>()?;
        let v = match (kind, nums.as_slice()) {
            ("I", &[sc, ev, arc, span]) => Var::Route { sc, ev, arc, span },
            ("Ic", &[sc, ev, station, t]) => Var::Charge { sc, ev, station, t },
            ("Id", &[sc, ev, station, t]) => Var::Discharge { sc, ev, station, t },
            ("Pg", &[sc, gen, t]) => Var::GenP { sc, gen, t },
            ("Qg", &[sc, gen, t]) => Var::GenQ { sc, gen, t },
            ("Pv", &[sc, unit, t]) => Var::Pv { sc, unit, t },
            ("Pc", &[sc, ev, station, t]) => Var::ChargeP { sc, ev, station, t },
            ("Pd", &[sc, ev, station, t]) => Var::DischargeP { sc, ev, station, t },
            ("Pm", &[sc, ev, t]) => Var::Move { sc, ev, t },
            ("E", &[sc, ev, t]) => Var::Energy { sc, ev, t },
            ("Pf", &[sc, line, t]) => Var::FlowP { sc, line, t },
            ("Qf", &[sc, line, t]) => Var::FlowQ { sc, line, t },
            ("V", &[sc, bus, t]) => Var::Voltage { sc, bus, t },
            _ => return None,
        };
        self.try_index(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> Dims {
        Dims {
            scenarios: 2,
            evs: 2,
            arcs: 8,
            stations: 1,
            timesteps: 6,
            generators: 2,
            pv_units: 1,
            lines: 2,
            buses: 3,
        }
    }

    #[test]
    fn binary_counts() {
        let ix = VariableIndex::new(dims(), vec![0, 1], vec![0.5, 0.5]);
        let routes = (0..ix.binary_count())
            .filter(|&i| matches!(ix.decode(i), Some(Var::Route { .. })))
            .count();
        assert_eq!(routes, 2 * 2 * 8 * 5);
        assert_eq!(ix.binary_count() - routes, 2 * 2 * 5 * 2);
    }

    #[test]
    fn bijection_and_names() {
        let ix = VariableIndex::new(dims(), vec![0, 1], vec![0.5, 0.5]);
        for i in 0..ix.len() {
            let v = ix.decode(i).unwrap();
            assert_eq!(ix.index(v), i, "{v}");
            assert_eq!(ix.parse_name(&v.to_string()), Some(i));
            assert_eq!(v.is_binary(), ix.is_binary(i));
        }
        assert!(ix.decode(ix.len()).is_none());
        assert!(ix.try_index(Var::Charge { sc: 0, ev: 0, station: 0, t: 0 }).is_none());
    }

    #[test]
    fn stride_is_constant() {
        let ix = VariableIndex::new(dims(), vec![0, 1], vec![0.5, 0.5]);
        let a = ix.index(Var::Discharge { sc: 1, ev: 0, station: 0, t: 3 });
        let b = ix.index(Var::Discharge { sc: 1, ev: 1, station: 0, t: 3 });
        assert_eq!(b - a, ix.d_ev());
        assert_eq!(ix.d_ev(), 8 * 5 + 2 * 5);
    }
}
