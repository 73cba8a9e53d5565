use serde::{Deserialize, Serialize};

use super::{
    build_congestion_profile, derive_seed, fit_solar_model, sample_schedules, CongestionConfig,
    CostParams, EvFleet, FleetParams, InstanceParts, LoadProfiles, ProblemInstance, ScenarioError,
    ScenarioSet, ScheduleConfig, SolarFamily, SolarModel, SyntheticSolar, LOAD_SCALE_RANGE,
};
use crate::grid::GridModel;
use crate::topology::{TransportNetwork, TsnConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceGeneratorConfig {
    pub timesteps: usize,
    pub tsn: TsnConfig,
    pub fleet: FleetParams,
    pub costs: CostParams,
    pub schedule: ScheduleConfig,
    pub congestion: CongestionConfig,
    pub solar_family: SolarFamily,
    pub synthetic_solar: SyntheticSolar,
    /// Days of synthetic history used when no history is supplied.
    pub history_days: usize,
    pub load_scale_range: (f64, f64),
}

impl Default for InstanceGeneratorConfig {
    fn default() -> Self {
        InstanceGeneratorConfig {
            timesteps: 24,
            tsn: TsnConfig::default(),
            fleet: FleetParams::default(),
            costs: CostParams::default(),
            schedule: ScheduleConfig::default(),
            congestion: CongestionConfig::default(),
            solar_family: SolarFamily::default(),
            synthetic_solar: SyntheticSolar::default(),
            history_days: 365,
            load_scale_range: LOAD_SCALE_RANGE,
        }
    }
}

/// Draws complete problem instances for one pair of networks.
#[derive(Debug, Clone)]
pub struct InstanceGenerator {
    transport: TransportNetwork,
    grid: GridModel,
    cfg: InstanceGeneratorConfig,
    solar: SolarModel,
    base_loads: LoadProfiles,
}

impl InstanceGenerator {
    /// Fits the solar model to `history`, or to a synthetic history drawn
    /// from `seed` when none is given.
    pub fn new(
        transport: TransportNetwork,
        grid: GridModel,
        cfg: InstanceGeneratorConfig,
        history: Option<&[Vec<f64>]>,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        transport.validate()?;
        grid.validate()?;
        let t = cfg.timesteps;
        let synthetic;
        let history = match history {
            Some(h) => h,
            None => {
                synthetic = cfg.synthetic_solar.history(cfg.history_days, t, seed);
                &synthetic
            }
        };
        let solar = fit_solar_model(history, cfg.synthetic_solar.panel_max_kw, cfg.solar_family)?;
        if solar.timesteps() != t {
            return Err(ScenarioError::Horizon {
                what: "solar history".into(),
                got: solar.timesteps(),
                expected: t,
            });
        }
        let base_loads = LoadProfiles::base(&grid, t);
        Ok(InstanceGenerator { transport, grid, cfg, solar, base_loads })
    }

    pub fn config(&self) -> &InstanceGeneratorConfig {
        &self.cfg
    }

    pub fn solar_model(&self) -> &SolarModel {
        &self.solar
    }

    pub fn transport(&self) -> &TransportNetwork {
        &self.transport
    }

    pub fn grid(&self) -> &GridModel {
        &self.grid
    }

    /// One instance with `scenarios` equiprobable solar scenarios.
    pub fn instance(
        &self,
        ev_count: usize,
        scenarios: usize,
        seed: u64,
    ) -> Result<ProblemInstance, ScenarioError> {
        if scenarios == 0 {
            return Err(ScenarioError::Invalid("scenario count must be >= 1".into()));
        }
        let t = self.cfg.timesteps;
        let profiles = self.solar.sample(scenarios, derive_seed(seed, "instance-solar", 0));
        let loads = self
            .base_loads
            .sample_scaled(self.cfg.load_scale_range, derive_seed(seed, "instance-load", 0));
        let schedule = sample_schedules(
            &self.transport,
            ev_count,
            t,
            &self.cfg.schedule,
            derive_seed(seed, "instance-schedule", 0),
        )?;
        let congestion =
            build_congestion_profile(&self.cfg.congestion, t, derive_seed(seed, "instance-congestion", 0));
        ProblemInstance::assemble(InstanceParts {
            transport: self.transport.clone(),
            tsn_config: self.cfg.tsn,
            grid: self.grid.clone(),
            fleet: EvFleet::uniform(ev_count, &self.cfg.fleet),
            costs: self.cfg.costs,
            scenarios: ScenarioSet::equiprobable(&profiles, self.solar.panel_max_kw, &self.grid),
            loads,
            schedule,
            congestion,
            timesteps: t,
        })
    }

    pub fn deterministic(&self, ev_count: usize, seed: u64) -> Result<ProblemInstance, ScenarioError> {
        self.instance(ev_count, 1, seed)
    }
}
