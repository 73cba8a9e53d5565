//! Command-line driver: data generation, labelling, training, calibration,
//! plain and assisted solves, benchmarking and artifact inspection.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use evjrs::mipcore::{build_model, solution_to_named_json, BuildMode, HighsBackend, MilpBackend};
use evjrs::par::{self, Parallelism};
use evjrs::pipeline::{
    benchmark, estimate_labelling_time, evaluate_predictions, infer_and_solve, label_instances, Dataset,
};
use evjrs::scenariogen::micro::micro_instance;
use evjrs::scenariogen::{derive_seed, ProblemInstance};
use evjrs::surrogate::{calibrate_thresholds, train, Sample, SurrogateModel, Thresholds, TrainReport, MODEL_MAGIC};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "evjrs", version, about = "EV routing and charging MILP with learned variable fixing")]
struct Cli {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative MIP gap.
    #[arg(long, global = true)]
    gap: Option<f64>,
    /// Solver time limit in seconds.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write deterministic training and stochastic test instances.
    GenData,
    /// Solve the training instances and write the labelled dataset.
    Label,
    /// Train the classifier on the labelled dataset.
    Train,
    /// Fit fixing thresholds on the validation split.
    Calibrate,
    /// Solve one instance without assistance (the bundled micro instance by default).
    Solve {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Solve one instance with predicted fixings, retries and fallback.
    SolveAssisted {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Compare unassisted and assisted solves on the test instances.
    Benchmark,
    /// Summarise an instance, dataset, model, solution or report file.
    Inspect { path: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Label => "label",
            Command::Train => "train",
            Command::Calibrate => "calibrate",
            Command::Solve { .. } => "solve",
            Command::SolveAssisted { .. } => "solve-assisted",
            Command::Benchmark => "benchmark",
            Command::Inspect { .. } => "inspect",
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {} (run the earlier stage first?)", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

struct Run {
    cfg: RunConfig,
    inputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    config_sha256: String,
    seed: u64,
    inputs: BTreeMap<String, String>,
    config: &'a RunConfig,
}

impl Run {
    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out_dir.join(rel)
    }

    fn input(&mut self, p: PathBuf) -> Result<PathBuf> {
        if !p.exists() {
            bail!("missing input {} (run the earlier stage first?)", p.display());
        }
        self.inputs.push(p.clone());
        Ok(p)
    }

    /// Hashes of the resolved config and of every input read; no
    /// timestamps, so equal inputs give identical bytes.
    fn write_manifest(&self, command: &str) -> Result<()> {
        let config_json = serde_json::to_vec(&self.cfg)?;
        let mut inputs = BTreeMap::new();
        for p in self.inputs.iter().chain(&self.cfg.referenced_files()) {
            if p.is_file() {
                let key = p.strip_prefix(&self.cfg.out_dir).unwrap_or(p).display().to_string();
                inputs.insert(key, sha256_hex(&std::fs::read(p)?));
            } else if p.is_dir() {
                for entry in sorted_files(p)? {
                    let key = entry.strip_prefix(&self.cfg.out_dir).unwrap_or(&entry).display().to_string();
                    inputs.insert(key, sha256_hex(&std::fs::read(&entry)?));
                }
            }
        }
        let manifest = Manifest {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(&config_json),
            seed: self.cfg.seed,
            inputs,
            config: &self.cfg,
        };
        let dir = self.path("manifests");
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join(format!("{command}.json")), &manifest)
    }
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    out.sort();
    Ok(out)
}

fn load_instances(dir: &Path) -> Result<Vec<ProblemInstance>> {
    let files = sorted_files(dir)?;
    if files.is_empty() {
        bail!("no instances in {} (run gen-data first)", dir.display());
    }
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)?;
            ProblemInstance::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

fn gen_data(run: &mut Run) -> Result<()> {
    let cfg = &run.cfg;
    let generator = cfg.generator()?;
    let train_dir = run.path("instances/train");
    let test_dir = run.path("instances/test");
    for d in [&train_dir, &test_dir] {
        if d.exists() {
            std::fs::remove_dir_all(d)?;
        }
        std::fs::create_dir_all(d)?;
    }
    let mode = Parallelism::from_workers(cfg.workers);
    let train_jobs = cfg.dataset.jobs();
    let mut test_jobs = Vec::new();
    for &k in &cfg.test.ev_counts {
        for i in 0..cfg.test.samples_per_count {
            test_jobs.push((k, derive_seed(cfg.seed, &format!("test-{k}"), i as u64)));
        }
    }
    let write = |dir: &Path, jobs: &[(usize, u64)], scenarios: usize| -> Result<()> {
        let texts = par::map_slice(jobs, mode, |&(k, seed)| generator.instance(k, scenarios, seed).map(|i| i.to_json()));
        for (n, (text, &(k, seed))) in texts.into_iter().zip(jobs).enumerate() {
            std::fs::write(dir.join(format!("{n:04}-k{k}-s{seed:016x}.json")), text?)?;
        }
        Ok(())
    };
    write(&train_dir, &train_jobs, 1)?;
    write(&test_dir, &test_jobs, cfg.test.scenarios)?;
    println!("wrote {} training and {} test instances under {}", train_jobs.len(), test_jobs.len(), cfg.out_dir.display());
    Ok(())
}

fn label(run: &mut Run) -> Result<()> {
    let dir = run.input(run.path("instances/train"))?;
    let files = sorted_files(&dir)?;
    let instances = load_instances(&dir)?;
    // The seed is the last file-name component written by gen-data.
    let seeds: Vec<u64> = files
        .iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            stem.rsplit("-s").next().and_then(|h| u64::from_str_radix(h, 16).ok()).unwrap_or(0)
        })
        .collect();
    let pairs: Vec<_> = instances.into_iter().zip(seeds).collect();
    let cfg = &run.cfg;
    let backend = HighsBackend::default();
    let ds = par::with_workers(cfg.workers, || {
        label_instances(&pairs, cfg.dataset.e_max, &cfg.dataset.solver, &backend, Parallelism::from_workers(cfg.workers))
    })?;
    ds.save(&run.path("dataset.json"))?;
    let mut csv = String::from("ev_count,seed,status,seconds,kept\n");
    for r in &ds.records {
        let status = serde_json::to_value(r.status)?;
        let _ = writeln!(csv, "{},{},{},{},{}", r.ev_count, r.seed, status.as_str().unwrap_or_default(), r.seconds, r.kept);
    }
    std::fs::write(run.path("label_times.csv"), csv)?;
    let means = ds.mean_seconds_by_count();
    let per_count: Vec<(usize, f64)> = means.iter().map(|&(_, n, m)| (n, m)).collect();
    let total_hours = estimate_labelling_time(&per_count);
    write_json(
        &run.path("labelling_estimate.json"),
        &serde_json::json!({ "per_count": means, "total_hours": total_hours }),
    )?;
    println!(
        "labelled {} of {} instances (d_ev {}, e_max {}), {:.4} h of solver time",
        ds.samples.len(),
        ds.records.len(),
        ds.d_ev,
        ds.e_max,
        total_hours
    );
    if ds.samples.is_empty() {
        bail!("no instance was solved; dataset is empty");
    }
    Ok(())
}

fn train_cmd(run: &mut Run) -> Result<()> {
    let ds = Dataset::load(&run.input(run.path("dataset.json"))?)?;
    let (model, report) = train(&ds.samples, &run.cfg.training)?;
    model.save(&run.path("model.bin"))?;
    write_json(&run.path("train_report.json"), &report)?;
    let last = report.history.last();
    println!(
        "trained on {} samples ({} validation); final train loss {:?}, validation loss {:?}",
        report.train_indices.len(),
        report.validation_indices.len(),
        last.map(|e| e.train_loss),
        last.and_then(|e| e.validation_loss)
    );
    Ok(())
}

fn calibrate(run: &mut Run) -> Result<()> {
    let ds = Dataset::load(&run.input(run.path("dataset.json"))?)?;
    let report: TrainReport = read_json(&run.input(run.path("train_report.json"))?)?;
    let model_path = run.input(run.path("model.bin"))?;
    let mut model = SurrogateModel::load(&model_path)?;
    let mut idx = report.validation_indices.clone();
    if idx.is_empty() {
        log::warn!("no validation split; calibrating on the training samples");
        idx = report.train_indices.clone();
    }
    let set: Vec<Sample> = idx.iter().filter_map(|&i| ds.samples.get(i).cloned()).collect();
    let th = calibrate_thresholds(&model, &set)?;
    let metrics = evaluate_predictions(&model, &set)?;
    model.thresholds = Some(th);
    model.save(&model_path)?;
    write_json(&run.path("thresholds.json"), &th)?;
    write_json(&run.path("metrics.json"), &metrics)?;
    println!(
        "thresholds p0 {:.4} p1 {:.4}; Acc0 {:.2}% Acc1 {:.2}% mAP {:.2}%",
        th.p0, th.p1, metrics.acc0, metrics.acc1, metrics.map
    );
    Ok(())
}

fn instance_arg(run: &mut Run, path: &Option<PathBuf>) -> Result<ProblemInstance> {
    match path {
        Some(p) => {
            let p = run.input(p.clone())?;
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ProblemInstance::from_json(&text)?)
        }
        None => Ok(micro_instance()),
    }
}

fn solve(run: &mut Run, path: &Option<PathBuf>) -> Result<()> {
    let inst = instance_arg(run, path)?;
    let (model, ix) = build_model(&inst, BuildMode::Stochastic)?;
    let sol = HighsBackend::default().solve(&model, &run.cfg.solver);
    std::fs::write(run.path("solution.json"), solution_to_named_json(&sol, &ix))?;
    let status = serde_json::to_value(sol.status)?;
    println!("status {} objective {:?} ({:.3} s)", status.as_str().unwrap_or_default(), sol.objective, sol.seconds);
    if !sol.is_feasible() {
        bail!("no solution: {}", status.as_str().unwrap_or_default());
    }
    Ok(())
}

fn model_and_thresholds(run: &mut Run) -> Result<(SurrogateModel, Thresholds)> {
    let model = SurrogateModel::load(&run.input(run.path("model.bin"))?)?;
    let th = model.thresholds.context("model has no thresholds (run calibrate first)")?;
    Ok((model, th))
}

fn solve_assisted(run: &mut Run, path: &Option<PathBuf>) -> Result<()> {
    let inst = instance_arg(run, path)?;
    let (model, th) = model_and_thresholds(run)?;
    let out = infer_and_solve(&inst, &model, th, &HighsBackend::default(), &run.cfg.solver, &run.cfg.retry)?;
    std::fs::write(run.path("solution_assisted.json"), solution_to_named_json(&out.solution, &out.index))?;
    for (k, a) in out.attempts.iter().enumerate() {
        println!("attempt {k}: p1 {:.4}, {} fixed ({} to one), {:?}, {:.3} s", a.p1, a.fixed, a.fixed_ones, a.status, a.seconds);
    }
    if let Some(f) = out.fallback {
        println!("fallback: {:?}, {:.3} s", f.status, f.seconds);
    }
    println!("assisted feasible {}; objective {:?}", out.assisted_feasible, out.solution.objective);
    if !out.solution.is_feasible() {
        bail!("no solution");
    }
    Ok(())
}

fn benchmark_cmd(run: &mut Run) -> Result<()> {
    let instances = load_instances(&run.input(run.path("instances/test"))?)?;
    let (model, th) = model_and_thresholds(run)?;
    let metrics_path = run.path("metrics.json");
    let mut report = benchmark(&instances, &model, th, &HighsBackend::default(), &run.cfg.solver, &run.cfg.retry)?;
    if metrics_path.exists() {
        report.summary.metrics = Some(read_json(&run.input(metrics_path)?)?);
    }
    std::fs::write(run.path("benchmark.csv"), report.to_csv())?;
    std::fs::write(run.path("benchmark_summary.json"), report.summary_json())?;
    let s = &report.summary;
    println!(
        "{} samples: feas {:.1}%, r_bar {:.2}%, median reduction {:.2}%, l_bar {:.4}%",
        s.samples, s.feas, s.r_bar, s.median_reduction, s.l_bar
    );
    Ok(())
}

fn inspect(path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(MODEL_MAGIC) {
        let m = SurrogateModel::read_from(bytes.as_slice())?;
        println!("model: e_max {}, d_ev {}, buses {}, timesteps {}", m.e_max(), m.d_ev, m.layout.buses, m.layout.timesteps);
        println!("layers: {}, parameters: {}", m.network.layers.len(), m.network.params.len());
        match m.thresholds {
            Some(t) => println!("thresholds: p0 {:.4}, p1 {:.4}", t.p0, t.p1),
            None => println!("thresholds: not calibrated"),
        }
        return Ok(());
    }
    let value: serde_json::Value = serde_json::from_slice(&bytes).context("not a model file or JSON artifact")?;
    if value.get("samples").is_some() && value.get("d_ev").is_some() {
        let ds: Dataset = serde_json::from_value(value)?;
        let (ones, total) =
            ds.samples.iter().fold((0, 0), |(o, t), s| (o + s.labels.ones(), t + s.labels.real_len()));
        println!("dataset: {} samples ({} attempted), e_max {}, d_ev {}", ds.samples.len(), ds.records.len(), ds.e_max, ds.d_ev);
        let share = if total > 0 { 100.0 * ones as f64 / total as f64 } else { 0.0 };
        println!("class balance: {ones} ones / {total} labelled bits ({share:.3}% ones)");
    } else if value.get("instance").is_some() {
        let inst = ProblemInstance::from_json(std::str::from_utf8(&bytes)?)?;
        let p = inst.parts();
        println!(
            "instance: {} EVs, {} scenarios, {} timesteps, transport {} ({} nodes, {} TSN arcs), grid {} ({} buses)",
            inst.ev_count(),
            inst.scenario_count(),
            inst.timesteps(),
            p.transport.name,
            p.transport.nodes.len(),
            inst.tsn().arc_count(),
            p.grid.network.name,
            p.grid.network.buses.len()
        );
    } else if value.get("r_bar").is_some() {
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else if let (Some(status), Some(values)) = (value.get("status"), value.get("values")) {
        let n = values.as_object().map_or(0, |m| m.len());
        println!("solution: status {status}, objective {}, {n} values", value["objective"]);
    } else {
        bail!("{}: unrecognised artifact", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Command::Inspect { path } = &cli.command {
        return inspect(path);
    }
    let flags = Overrides { workers: cli.workers, seed: cli.seed, out: cli.out, gap: cli.gap, timeout: cli.timeout };
    let cfg = RunConfig::load(cli.config.as_deref(), &flags)?;
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let mut run = Run { cfg, inputs: Vec::new() };
    if let Some(c) = &cli.config {
        run.input(c.clone())?;
    }
    let workers = run.cfg.workers;
    par::with_workers(workers, || match &cli.command {
        Command::GenData => gen_data(&mut run),
        Command::Label => label(&mut run),
        Command::Train => train_cmd(&mut run),
        Command::Calibrate => calibrate(&mut run),
        Command::Solve { instance } => solve(&mut run, instance),
        Command::SolveAssisted { instance } => solve_assisted(&mut run, instance),
        Command::Benchmark => benchmark_cmd(&mut run),
        Command::Inspect { .. } => unreachable!("handled above"),
    })?;
    run.write_manifest(cli.command.name())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
