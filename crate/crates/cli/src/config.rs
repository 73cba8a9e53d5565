use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use evjrs::data;
use evjrs::grid::GridModel;
use evjrs::mipcore::SolverParams;
use evjrs::pipeline::{DatasetConfig, RetryConfig};
use evjrs::scenariogen::{derive_seed, read_history_csv, InstanceGenerator, InstanceGeneratorConfig};
use evjrs::surrogate::TrainConfig;
use evjrs::topology::TransportNetwork;
use serde::{Deserialize, Serialize};

/// Stochastic test instances written by `gen-data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSetConfig {
    pub scenarios: usize,
    pub ev_counts: Vec<usize>,
    pub samples_per_count: usize,
}

impl Default for TestSetConfig {
    fn default() -> Self {
        TestSetConfig { scenarios: 2, ev_counts: vec![6, 10], samples_per_count: 15 }
    }
}

/// Everything one run needs. Read from TOML, then overridden by `EVJRS_*`
/// environment variables, then by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled network name or path to a TOML file.
    pub transport: String,
    pub grid: String,
    /// Optional CSV of daily solar profiles; synthetic history otherwise.
    pub solar_history: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Root seed; every stage derives its own stream from it.
    pub seed: u64,
    pub workers: usize,
    pub generator: InstanceGeneratorConfig,
    pub test: TestSetConfig,
    pub dataset: DatasetConfig,
    pub training: TrainConfig,
    pub solver: SolverParams,
    pub retry: RetryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            transport: "desk6".into(),
            grid: "ieee33".into(),
            solar_history: None,
            out_dir: PathBuf::from("run"),
            seed: 0,
            workers: 1,
            generator: InstanceGeneratorConfig::default(),
            test: TestSetConfig::default(),
            dataset: DatasetConfig::default(),
            training: TrainConfig::default(),
            solver: SolverParams::default(),
            retry: RetryConfig::default(),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub gap: Option<f64>,
    pub timeout: Option<f64>,
}

fn env_parse<T: std::str::FromStr>(name: &str) -> Result<Option<T>> {
    match std::env::var(name) {
        Ok(v) => match v.parse() {
            Ok(x) => Ok(Some(x)),
            Err(_) => bail!("environment variable {name}={v:?} is not valid"),
        },
        Err(_) => Ok(None),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("config field `{}`: {}", e.path(), e.inner()))
    }

    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Ok(v) = std::env::var("EVJRS_TRANSPORT") {
            cfg.transport = v;
        }
        if let Ok(v) = std::env::var("EVJRS_GRID") {
            cfg.grid = v;
        }
        if let Ok(v) = std::env::var("EVJRS_SOLAR_HISTORY") {
            cfg.solar_history = Some(v.into());
        }
        if let Ok(v) = std::env::var("EVJRS_OUT") {
            cfg.out_dir = v.into();
        }
        if let Some(v) = env_parse("EVJRS_SEED")? {
            cfg.seed = v;
        }
        if let Some(v) = env_parse("EVJRS_WORKERS")? {
            cfg.workers = v;
        }
        if let Some(v) = flags.workers {
            cfg.workers = v;
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = &flags.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = flags.gap {
            cfg.solver.gap = v;
            cfg.dataset.solver.gap = v;
        }
        if let Some(v) = flags.timeout {
            cfg.solver.time_limit_s = v;
            cfg.dataset.solver.time_limit_s = v;
        }
        cfg.dataset.seed = derive_seed(cfg.seed, "cli-dataset", 0);
        cfg.training.seed = derive_seed(cfg.seed, "cli-training", 0);
        cfg.training.workers = cfg.workers;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.test.scenarios == 0 {
            bail!("config field `test.scenarios` must be at least 1");
        }
        if let Some(&k) = self.dataset.ev_counts.iter().find(|&&k| k > self.dataset.e_max) {
            bail!("config field `dataset.ev_counts` has {k} > `dataset.e_max` = {}", self.dataset.e_max);
        }
        if let Some(&k) = self.test.ev_counts.iter().find(|&&k| k > self.dataset.e_max) {
            bail!("config field `test.ev_counts` has {k} > `dataset.e_max` = {}", self.dataset.e_max);
        }
        self.solver.validate().context("config field `solver`")?;
        self.dataset.solver.validate().context("config field `dataset.solver`")?;
        if let Some(p) = &self.solar_history {
            if !p.exists() {
                bail!("config field `solar_history`: {} does not exist", p.display());
            }
        }
        self.transport_network().context("config field `transport`")?;
        self.grid_model().context("config field `grid`")?;
        Ok(())
    }

    pub fn transport_network(&self) -> Result<TransportNetwork> {
        if let Some(n) = data::transport_by_name(&self.transport) {
            return Ok(n);
        }
        let text = std::fs::read_to_string(&self.transport)
            .with_context(|| format!("{:?} is neither a bundled network nor a readable file", self.transport))?;
        Ok(TransportNetwork::from_toml_str(&text)?)
    }

    pub fn grid_model(&self) -> Result<GridModel> {
        if let Some(g) = data::grid_by_name(&self.grid) {
            return Ok(g);
        }
        let text = std::fs::read_to_string(&self.grid)
            .with_context(|| format!("{:?} is neither a bundled grid nor a readable file", self.grid))?;
        Ok(GridModel::from_toml_str(&text)?)
    }

    pub fn generator(&self) -> Result<InstanceGenerator> {
        let history = match &self.solar_history {
            Some(p) => Some(read_history_csv(&std::fs::read_to_string(p)?)?),
            None => None,
        };
        Ok(InstanceGenerator::new(
            self.transport_network()?,
            self.grid_model()?,
            self.generator.clone(),
            history.as_deref(),
            derive_seed(self.seed, "cli-solar", 0),
        )?)
    }

    /// Files the config itself points at, for the manifest.
    pub fn referenced_files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for p in [&self.transport, &self.grid] {
            if data::transport_by_name(p).is_none() && data::grid_by_name(p).is_none() {
                out.push(PathBuf::from(p));
            }
        }
        out.extend(self.solar_history.clone());
        out
    }
}
