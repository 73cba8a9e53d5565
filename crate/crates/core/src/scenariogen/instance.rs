use serde::{Deserialize, Serialize};

use super::{
    CongestionProfile, CostParams, EvFleet, JobSchedule, LoadProfiles, ScenarioError, ScenarioSet,
};
use crate::grid::{GridModel, RadialTree};
use crate::topology::{TimeSpaceNetwork, TransportNetwork, TsnConfig};

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// Serializable inputs of one optimisation problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParts {
    pub transport: TransportNetwork,
    #[serde(default)]
    pub tsn_config: TsnConfig,
    pub grid: GridModel,
    pub fleet: EvFleet,
    pub costs: CostParams,
    pub scenarios: ScenarioSet,
    pub loads: LoadProfiles,
    pub schedule: JobSchedule,
    pub congestion: CongestionProfile,
    pub timesteps: usize,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema_version: u32,
    instance: InstanceParts,
}

/// A validated problem instance together with its derived structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct ProblemInstance {
    parts: InstanceParts,
    tsn: TimeSpaceNetwork,
    tree: RadialTree,
}

impl TryFrom<InstanceFile> for ProblemInstance {
    type Error = ScenarioError;

    fn try_from(f: InstanceFile) -> Result<Self, Self::Error> {
        if f.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(ScenarioError::Invalid(format!(
                "instance schema version {} (expected {INSTANCE_SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        ProblemInstance::assemble(f.instance)
    }
}

impl From<ProblemInstance> for InstanceFile {
    fn from(p: ProblemInstance) -> Self {
        InstanceFile { schema_version: INSTANCE_SCHEMA_VERSION, instance: p.parts }
    }
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<(), ScenarioError> {
    if got == expected {
        Ok(())
    } else {
        Err(ScenarioError::Horizon { what: what.to_string(), got, expected })
    }
}

impl ProblemInstance {
    /// Cross-checks every part and builds the time-space expansion.
    pub fn assemble(parts: InstanceParts) -> Result<Self, ScenarioError> {
        let t = parts.timesteps;
        let tsn = TimeSpaceNetwork::build_with(&parts.transport, t, &parts.tsn_config)?;
        let tree = parts.grid.validate()?;

        let buses = parts.grid.network.buses.len();
        check_len("active load bus list", parts.loads.p_kw.len(), buses)?;
        check_len("reactive load bus list", parts.loads.q_kvar.len(), buses)?;
        for (b, (p, q)) in parts.loads.p_kw.iter().zip(&parts.loads.q_kvar).enumerate() {
            check_len(&format!("active load of bus {b}"), p.len(), t)?;
            check_len(&format!("reactive load of bus {b}"), q.len(), t)?;
        }

        let sc = &parts.scenarios;
        if sc.is_empty() {
            return Err(ScenarioError::Invalid("no scenarios".into()));
        }
        check_len("scenario availability list", sc.pv_available_kw.len(), sc.len())?;
        if sc.probabilities.iter().any(|&p| !(p > 0.0)) {
            return Err(ScenarioError::Invalid("scenario probabilities must be > 0".into()));
        }
        let total: f64 = sc.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ScenarioError::Invalid(format!("scenario probabilities sum to {total}")));
        }
        for (s, units) in sc.pv_available_kw.iter().enumerate() {
            check_len(&format!("PV unit list of scenario {s}"), units.len(), parts.grid.pv_units.len())?;
            for (u, prof) in units.iter().enumerate() {
                check_len(&format!("solar profile sc{s} unit{u}"), prof.len(), t)?;
                if prof.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(ScenarioError::Invalid(format!("negative availability sc{s} unit{u}")));
                }
            }
        }

        check_len("congestion profile", parts.congestion.congested.len(), t - 1)?;
        parts.fleet.validate()?;
        parts.schedule.validate(parts.fleet.len(), &parts.transport, t - 1)?;
        let c = parts.costs;
        if c.travel < 0.0 || c.charge < 0.0 || c.discharge < 0.0 {
            return Err(ScenarioError::Invalid("costs must be >= 0".into()));
        }
        for &node in &parts.transport.stations {
            if parts.grid.stations.bus_of(node).is_none() {
                return Err(ScenarioError::UnmappedStation(node));
            }
        }
        Ok(ProblemInstance { parts, tsn, tree })
    }

    pub fn parts(&self) -> &InstanceParts {
        &self.parts
    }

    pub fn into_parts(self) -> InstanceParts {
        self.parts
    }

    pub fn tsn(&self) -> &TimeSpaceNetwork {
        &self.tsn
    }

    pub fn radial_tree(&self) -> &RadialTree {
        &self.tree
    }

    pub fn timesteps(&self) -> usize {
        self.parts.timesteps
    }

    pub fn ev_count(&self) -> usize {
        self.parts.fleet.len()
    }

    pub fn scenario_count(&self) -> usize {
        self.parts.scenarios.len()
    }

    /// Single-scenario copy with probability one.
    pub fn deterministic(&self, sc: usize) -> Result<Self, ScenarioError> {
        if sc >= self.scenario_count() {
            return Err(ScenarioError::Invalid(format!("scenario {sc} out of range")));
        }
        let mut parts = self.parts.clone();
        parts.scenarios = ScenarioSet {
            probabilities: vec![1.0],
            pv_available_kw: vec![self.parts.scenarios.pv_available_kw[sc].clone()],
        };
        Ok(ProblemInstance { parts, tsn: self.tsn.clone(), tree: self.tree.clone() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Invalid(format!("instance file: {e}")))
    }
}
