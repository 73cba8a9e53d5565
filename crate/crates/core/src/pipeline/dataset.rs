use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::mipcore::{build_model, BuildMode, MilpBackend, SolveStatus, SolverParams};
use crate::par::{self, Parallelism};
use crate::scenariogen::{derive_seed, InstanceGenerator, ProblemInstance};
use crate::surrogate::{encode_instance, extract_labels, Sample};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub ev_counts: Vec<usize>,
    pub samples_per_count: usize,
    pub e_max: usize,
    pub seed: u64,
    pub solver: SolverParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            ev_counts: vec![4, 8, 12],
            samples_per_count: 50,
            e_max: 12,
            seed: 0,
            solver: SolverParams::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if let Some(&k) = self.ev_counts.iter().find(|&&k| k > self.e_max) {
            return Err(PipelineError::Config(format!("EV count {k} exceeds e_max {}", self.e_max)));
        }
        self.solver.validate()?;
        Ok(())
    }

    /// `(ev_count, seed)` of every requested sample, in a fixed order.
    pub fn jobs(&self) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        for &k in &self.ev_counts {
            for i in 0..self.samples_per_count {
                out.push((k, derive_seed(self.seed, &format!("dataset-{k}"), i as u64)));
            }
        }
        out
    }
}

/// Labelling outcome of one requested sample, kept or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub ev_count: usize,
    pub seed: u64,
    pub status: SolveStatus,
    pub seconds: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_version: u32,
    pub e_max: usize,
    pub d_ev: usize,
    pub samples: Vec<Sample>,
    pub records: Vec<LabelRecord>,
}

impl Dataset {
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string(self).map_err(|e| PipelineError::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let ds: Dataset = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| PipelineError::Format(format!("{}: {e}", path.display())))?;
        if ds.schema_version != DATASET_SCHEMA_VERSION {
            return Err(PipelineError::Format(format!("dataset schema version {}", ds.schema_version)));
        }
        Ok(ds)
    }

    /// Mean labelling seconds per EV count over the kept samples.
    pub fn mean_seconds_by_count(&self) -> Vec<(usize, usize, f64)> {
        let mut counts: Vec<usize> = self.records.iter().map(|r| r.ev_count).collect();
        counts.sort_unstable();
        counts.dedup();
        counts
            .into_iter()
            .map(|k| {
                let secs: Vec<f64> =
                    self.records.iter().filter(|r| r.kept && r.ev_count == k).map(|r| r.seconds).collect();
                let mean = if secs.is_empty() { 0.0 } else { secs.iter().sum::<f64>() / secs.len() as f64 };
                (k, secs.len(), mean)
            })
            .collect()
    }
}

struct Labelled {
    d_ev: usize,
    sample: Option<Sample>,
    record: LabelRecord,
}

fn label_one(
    inst: &ProblemInstance,
    seed: u64,
    e_max: usize,
    solver: &SolverParams,
    backend: &dyn MilpBackend,
) -> Result<Labelled, PipelineError> {
    let k = inst.ev_count();
    let (model, ix) = build_model(inst, BuildMode::Deterministic(0))?;
    let start = Instant::now();
    let sol = backend.solve(&model, solver);
    let seconds = start.elapsed().as_secs_f64();
    let sample = if sol.is_feasible() {
        Some(Sample { features: encode_instance(inst, 0, e_max)?, labels: extract_labels(&sol, &ix, e_max)? })
    } else {
        log::warn!("dropping sample ({k} EVs, seed {seed}): {:?}", sol.status);
        None
    };
    let record = LabelRecord { ev_count: k, seed, status: sol.status, seconds, kept: sample.is_some() };
    Ok(Labelled { d_ev: ix.d_ev(), sample, record })
}

fn collect(e_max: usize, results: Vec<Result<Labelled, PipelineError>>) -> Result<Dataset, PipelineError> {
    let mut d_ev = None;
    let mut samples = Vec::new();
    let mut records = Vec::new();
    for r in results {
        let l = r?;
        if d_ev.is_some_and(|d| d != l.d_ev) {
            return Err(PipelineError::Config("instances disagree on the per-EV binary stride".into()));
        }
        d_ev = Some(l.d_ev);
        samples.extend(l.sample);
        records.push(l.record);
    }
    Ok(Dataset { schema_version: DATASET_SCHEMA_VERSION, e_max, d_ev: d_ev.unwrap_or(0), samples, records })
}

/// Draws, solves and labels deterministic instances. Samples whose solve
/// ends without a solution are dropped (and recorded as such).
pub fn generate_labelled_dataset(
    generator: &InstanceGenerator,
    cfg: &DatasetConfig,
    backend: &dyn MilpBackend,
    mode: Parallelism,
) -> Result<Dataset, PipelineError> {
    cfg.validate()?;
    let jobs = cfg.jobs();
    let results = par::map_slice(&jobs, mode, |&(k, seed)| {
        let inst = generator.deterministic(k, seed)?;
        label_one(&inst, seed, cfg.e_max, &cfg.solver, backend)
    });
    collect(cfg.e_max, results)
}

/// Labels given single-scenario instances; `seeds` are recorded only.
pub fn label_instances(
    instances: &[(ProblemInstance, u64)],
    e_max: usize,
    solver: &SolverParams,
    backend: &dyn MilpBackend,
    mode: Parallelism,
) -> Result<Dataset, PipelineError> {
    solver.validate()?;
    let results = par::map_slice(instances, mode, |(inst, seed)| {
        if inst.scenario_count() != 1 {
            return Err(PipelineError::Config(format!("labelling needs one scenario, got {}", inst.scenario_count())));
        }
        if inst.ev_count() > e_max {
            return Err(PipelineError::Config(format!("{} EVs exceed e_max {e_max}", inst.ev_count())));
        }
        label_one(inst, *seed, e_max, solver, backend)
    });
    collect(e_max, results)
}

/// Total labelling effort in hours from `(sample count, mean seconds)` per
/// configuration.
pub fn estimate_labelling_time(configs: &[(usize, f64)]) -> f64 {
    configs.iter().map(|&(n, secs)| n as f64 * secs).sum::<f64>() / 3600.0
}
