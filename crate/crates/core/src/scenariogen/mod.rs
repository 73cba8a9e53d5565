//! Synthesis of stochastic and scheduled inputs, and problem-instance assembly.
//!
//! Every sampler is a pure function of its inputs and a `u64` seed. Sub-streams
//! are derived with [`derive_seed`] so that independent draws (profile `i`,
//! EV `k`, ...) never share random state.

mod generator;
mod instance;
pub mod micro;
mod schedule;
mod solar;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use generator::{InstanceGenerator, InstanceGeneratorConfig};
pub use instance::{InstanceParts, ProblemInstance, INSTANCE_SCHEMA_VERSION};
pub use schedule::{sample_schedules, JobSchedule, JobTriple, ScheduleConfig};
pub use solar::{fit_solar_model, read_history_csv, SolarFamily, SolarModel, SyntheticSolar};

use crate::grid::GridModel;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("solar history needs at least two non-empty days")]
    EmptyHistory,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("horizon mismatch: {what} has length {got}, expected {expected}")]
    Horizon { what: String, got: usize, expected: usize },
    #[error("station node {0} has no bus mapping")]
    UnmappedStation(crate::topology::NodeId),
    #[error("invalid {0}")]
    Invalid(String),
    #[error("schedule window {0:?} h is shorter than one timespan")]
    EmptyWindow((f64, f64)),
    #[error("could not draw a reachable schedule for EV {0}")]
    Unreachable(usize),
    #[error(transparent)]
    Topology(#[from] crate::topology::TopologyError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

/// SplitMix64 finaliser over `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for b in tag.bytes().chain(index.to_le_bytes()) {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^ (h >> 31)
}

pub(crate) fn seeded_rng(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}

/// Per-bus active and reactive load, `[bus][timestep]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfiles {
    pub p_kw: Vec<Vec<f64>>,
    pub q_kvar: Vec<Vec<f64>>,
}

/// The bundled 24-point daily load coefficients.
pub fn daily_load_shape() -> Vec<f64> {
    include_str!("../../data/load_shape_24.csv")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse().expect("bundled load shape"))
        .collect()
}

/// Linear interpolation of an hourly (wrap-around) shape at `timesteps`
/// equally spaced points over the day.
pub fn resample_shape(shape: &[f64], timesteps: usize) -> Vec<f64> {
    let n = shape.len();
    (0..timesteps)
        .map(|t| {
            let x = t as f64 * n as f64 / timesteps as f64;
            let i = x.floor() as usize % n;
            let frac = x - x.floor();
            shape[i] * (1.0 - frac) + shape[(i + 1) % n] * frac
        })
        .collect()
}

impl LoadProfiles {
    /// Nominal bus loads scaled by the daily coefficient curve.
    pub fn base(grid: &GridModel, timesteps: usize) -> Self {
        let coeff = resample_shape(&daily_load_shape(), timesteps);
        let nominal = &grid.network.nominal_load;
        LoadProfiles {
            p_kw: nominal.iter().map(|&(p, _)| coeff.iter().map(|c| p * c).collect()).collect(),
            q_kvar: nominal.iter().map(|&(_, q)| coeff.iter().map(|c| q * c).collect()).collect(),
        }
    }

    pub fn timesteps(&self) -> usize {
        self.p_kw.first().map_or(0, Vec::len)
    }

    /// Scales each bus profile (P and Q together) by one coefficient drawn
    /// uniformly from `range`.
    pub fn sample_scaled(&self, range: (f64, f64), seed: u64) -> Self {
        let mut rng = seeded_rng(seed, "load", 0);
        let mut out = self.clone();
        for (p, q) in out.p_kw.iter_mut().zip(out.q_kvar.iter_mut()) {
            let c = if range.0 == range.1 { range.0 } else { rng.gen_range(range.0..=range.1) };
            p.iter_mut().for_each(|v| *v *= c);
            q.iter_mut().for_each(|v| *v *= c);
        }
        out
    }
}

/// Default load scaling interval.
pub const LOAD_SCALE_RANGE: (f64, f64) = (0.9, 1.1);

pub fn sample_load(base: &LoadProfiles, seed: u64) -> LoadProfiles {
    base.sample_scaled(LOAD_SCALE_RANGE, seed)
}

/// Solar availability per scenario and PV unit, `[sc][unit][timestep]` in kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub probabilities: Vec<f64>,
    pub pv_available_kw: Vec<Vec<Vec<f64>>>,
}

impl ScenarioSet {
    /// Equally likely scenarios from reference-panel profiles, scaled to each
    /// unit's capacity.
    pub fn equiprobable(profiles: &[Vec<f64>], panel_max_kw: f64, grid: &GridModel) -> Self {
        let n = profiles.len();
        ScenarioSet {
            probabilities: vec![1.0 / n as f64; n],
            pv_available_kw: profiles
                .iter()
                .map(|prof| {
                    grid.pv_units
                        .iter()
                        .map(|u| prof.iter().map(|v| v * u.capacity_kw / panel_max_kw).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Total availability over all PV units of one scenario.
    pub fn aggregate(&self, sc: usize) -> Vec<f64> {
        let units = &self.pv_available_kw[sc];
        let width = units.first().map_or(0, Vec::len);
        (0..width).map(|t| units.iter().map(|u| u[t]).sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvSpec {
    pub e_min_kwh: f64,
    pub e_max_kwh: f64,
    pub e_init_kwh: f64,
    pub p_max_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvFleet {
    pub evs: Vec<EvSpec>,
    /// Charging and discharging loss fraction.
    pub eta: f64,
    /// Power drawn while traversing a non-stationary arc, kW.
    pub p_move_kw: f64,
}

/// Default per-EV parameters; none of these are published case-study values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleetParams {
    pub e_min_kwh: f64,
    pub e_max_kwh: f64,
    pub e_init_kwh: f64,
    pub p_max_kw: f64,
    pub eta: f64,
    pub p_move_kw: f64,
}

impl Default for FleetParams {
    fn default() -> Self {
        FleetParams {
            e_min_kwh: 5.0,
            e_max_kwh: 60.0,
            e_init_kwh: 30.0,
            p_max_kw: 7.0,
            eta: 0.05,
            p_move_kw: 2.5,
        }
    }
}

impl EvFleet {
    pub fn uniform(count: usize, p: &FleetParams) -> Self {
        EvFleet {
            evs: vec![
                EvSpec {
                    e_min_kwh: p.e_min_kwh,
                    e_max_kwh: p.e_max_kwh,
                    e_init_kwh: p.e_init_kwh,
                    p_max_kw: p.p_max_kw,
                };
                count
            ],
            eta: p.eta,
            p_move_kw: p.p_move_kw,
        }
    }

    pub fn len(&self) -> usize {
        self.evs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evs.is_empty()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(0.0..1.0).contains(&self.eta) {
            return Err(ScenarioError::Invalid(format!("loss fraction {}", self.eta)));
        }
        if self.p_move_kw < 0.0 {
            return Err(ScenarioError::Invalid("negative travel draw".into()));
        }
        for (k, ev) in self.evs.iter().enumerate() {
            let ok = ev.e_min_kwh <= ev.e_init_kwh
                && ev.e_init_kwh <= ev.e_max_kwh
                && ev.p_max_kw > 0.0;
            if !ok {
                return Err(ScenarioError::Invalid(format!("EV {k} parameters {ev:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Per traversal of a non-stationary arc.
    pub travel: f64,
    /// Per kWh charged.
    pub charge: f64,
    /// Paid per kWh discharged.
    pub discharge: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams { travel: 0.05, charge: 0.15, discharge: 0.08 }
    }
}

/// Traffic state per timespan, `true` when congested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongestionProfile {
    pub congested: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum CongestionConfig {
    /// Congested during each `[start, end)` window, in hours of the day.
    Windows { windows: Vec<(f64, f64)> },
    /// Each timespan congested independently with probability `p`.
    Random { p: f64 },
}

impl Default for CongestionConfig {
    fn default() -> Self {
        CongestionConfig::Windows { windows: vec![(7.0, 9.0), (17.0, 19.0)] }
    }
}

/// Timespan `s` starts at hour `s * 24 / timesteps`.
pub fn span_start_hour(span: usize, timesteps: usize) -> f64 {
    span as f64 * 24.0 / timesteps as f64
}

pub fn build_congestion_profile(
    cfg: &CongestionConfig,
    timesteps: usize,
    seed: u64,
) -> CongestionProfile {
    let spans = timesteps.saturating_sub(1);
    let congested = match cfg {
        CongestionConfig::Windows { windows } => (0..spans)
            .map(|s| {
                let h = span_start_hour(s, timesteps);
                windows.iter().any(|&(a, b)| h >= a && h < b)
            })
            .collect(),
        CongestionConfig::Random { p } => {
            let mut rng = seeded_rng(seed, "congestion", 0);
            (0..spans).map(|_| rng.gen_bool(p.clamp(0.0, 1.0))).collect()
        }
    };
    CongestionProfile { congested }
}
