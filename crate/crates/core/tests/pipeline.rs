mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use common::*;
use evjrs::data;
use evjrs::mipcore::{build_model, check_feasible, BuildMode, HighsBackend, MilpBackend, SolverParams, Var};
use evjrs::par::Parallelism;
use evjrs::pipeline::{
    estimate_labelling_time, generate_labelled_dataset, infer_and_solve, label_instances, predict_binaries, Dataset,
    DatasetConfig, RetryConfig,
};
use evjrs::scenariogen::micro::micro_instance;
use evjrs::scenariogen::{InstanceGenerator, InstanceGeneratorConfig, ProblemInstance};
use evjrs::surrogate::{
    encode_instance, extract_labels, max_attempts, BinaryPredictor, FeatureLayout, FeatureMap, SurrogateError,
    Thresholds,
};
use evjrs::topology::NodeId;

fn exact() -> SolverParams {
    SolverParams { gap: 1e-9, time_limit_s: 60.0, ..SolverParams::default() }
}

fn micro_generator() -> InstanceGenerator {
    let cfg = InstanceGeneratorConfig { timesteps: 8, history_days: 60, ..Default::default() };
    InstanceGenerator::new(data::micro3(), data::micro_grid(), cfg, None, 5).unwrap()
}

/// Replays fixed per-scenario probability blocks, one per call.
struct Replay {
    layout: FeatureLayout,
    d_ev: usize,
    blocks: Vec<Vec<f64>>,
    calls: AtomicUsize,
}

impl Replay {
    fn new(inst: &ProblemInstance, e_max: usize, blocks: Vec<Vec<f64>>) -> Self {
        let (_, ix) = build_model(inst, BuildMode::Deterministic(0)).unwrap();
        let layout = encode_instance(inst, 0, e_max).unwrap().layout;
        Replay { layout, d_ev: ix.d_ev(), blocks, calls: AtomicUsize::new(0) }
    }
}

impl BinaryPredictor for Replay {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }
    fn d_ev(&self) -> usize {
        self.d_ev
    }
    fn predict(&self, features: &FeatureMap) -> Result<Vec<f64>, SurrogateError> {
        assert_eq!(features.layout, self.layout);
        let k = self.calls.fetch_add(1, Ordering::SeqCst);
        let mut out = self.blocks[k % self.blocks.len()].clone();
        // Padding gets junk that must never be used.
        out.resize(self.layout.e_max * self.d_ev, 0.5);
        Ok(out)
    }
}

#[test]
fn oracle_predictions_reproduce_the_baseline() {
    let inst = micro_generator().instance(2, 3, 11).unwrap();
    let (model, ix) = build_model(&inst, BuildMode::Stochastic).unwrap();
    let base = HighsBackend::default().solve(&model, &exact());
    assert!(base.is_feasible());
    let bits = base.binaries(&ix);
    let block = inst.ev_count() * ix.d_ev();
    let blocks = bits.chunks(block).map(|c| c.iter().map(|&b| f64::from(b)).collect()).collect();
    let oracle = Replay::new(&inst, 3, blocks);
    let th = Thresholds::new(1.0, 1.0).unwrap();
    let out = infer_and_solve(&inst, &oracle, th, &HighsBackend::default(), &exact(), &RetryConfig::default()).unwrap();
    assert!(out.assisted_feasible);
    assert_eq!(out.attempts.len(), 1);
    assert_eq!(out.attempts[0].fixed, ix.binary_count());
    assert_eq!(out.predict_calls, 3);
    let (a, b) = (out.solution.objective.unwrap(), base.objective.unwrap());
    assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
    let report = check_feasible(&inst, &out.index, &out.solution.values, 1e-6).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn saturated_wrong_predictions_exhaust_retries_then_fall_back() {
    let inst = micro_instance();
    let (model, ix) = build_model(&inst, BuildMode::Stochastic).unwrap();
    let base = HighsBackend::default().solve(&model, &exact());
    // Every binary at probability one: every attempt fixes all routes to one.
    let all_ones = vec![vec![1.0; ix.binary_count()]];
    let bad = Replay::new(&inst, 1, all_ones.clone());
    let th = Thresholds::new(1.0, 0.5).unwrap();
    let out = infer_and_solve(&inst, &bad, th, &HighsBackend::default(), &exact(), &RetryConfig::default()).unwrap();
    assert!(!out.assisted_feasible);
    assert_eq!(out.attempts.len(), max_attempts(0.5));
    assert_eq!(out.attempts.len(), 6);
    assert!(out.attempts.windows(2).all(|w| w[1].p1 > w[0].p1));
    assert_eq!(out.attempts.last().unwrap().p1, 1.0);
    let fb = out.fallback.unwrap();
    assert!(fb.status.has_solution());
    let (a, b) = (out.solution.objective.unwrap(), base.objective.unwrap());
    assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));

    let capped = RetryConfig { max_attempts: Some(2), fallback: false };
    let bad = Replay::new(&inst, 1, all_ones);
    let out = infer_and_solve(&inst, &bad, th, &HighsBackend::default(), &exact(), &capped).unwrap();
    assert_eq!(out.attempts.len(), 2);
    assert!(out.fallback.is_none());
    assert!(!out.solution.is_feasible());
}

#[test]
fn one_prediction_per_scenario() {
    let inst = micro_generator().instance(1, 5, 2).unwrap();
    let (_, ix) = build_model(&inst, BuildMode::Deterministic(0)).unwrap();
    let replay = Replay::new(&inst, 2, vec![vec![0.25; ix.d_ev()]]);
    let (probs, calls) = predict_binaries(&inst, &replay).unwrap();
    assert_eq!(calls, 5);
    assert_eq!(replay.calls.load(Ordering::SeqCst), 5);
    // Padding stripped: one EV's worth per scenario.
    assert_eq!(probs.len(), 5 * ix.d_ev());
    assert!(probs.iter().all(|&p| p == 0.25));
}

#[test]
fn model_capacity_is_enforced() {
    let inst = micro_generator().instance(2, 1, 2).unwrap();
    let small = micro_generator().instance(1, 1, 2).unwrap();
    let replay = Replay::new(&small, 1, vec![vec![0.5]]);
    assert!(predict_binaries(&inst, &replay).is_err());
}

#[test]
fn idle_ev_labels_are_its_stationary_arcs() {
    let tn = network(&[1], &[], &[1]);
    let mut c = Custom::new(tn, single_bus_grid((1.0, 0.0), 0.1, &[1]), 4);
    c.evs = vec![ev(0.0, 50.0, 20.0, 5.0)];
    c.jobs = vec![(0, 1, 0)];
    c.costs.charge = 0.01;
    let inst = c.build();
    let (model, ix) = build_model(&inst, BuildMode::Deterministic(0)).unwrap();
    let sol = HighsBackend::default().solve(&model, &exact());
    let labels = extract_labels(&sol, &ix, 3).unwrap();
    assert_eq!(labels.bits.len(), 3 * ix.d_ev());
    assert_eq!(labels.real_len(), ix.d_ev());
    assert!(labels.bits[ix.d_ev()..].iter().all(|&b| b == 0));
    let stay = inst.tsn().stationary_arc(NodeId(1)).unwrap();
    // Indicator bits at zero power are free; only the routing block is pinned.
    let routes = ix.dims.arcs * ix.dims.spans();
    let ones: Vec<usize> = (0..routes).filter(|&i| labels.bits[i] == 1).collect();
    let expected: Vec<usize> = (0..3).map(|span| ix.index(Var::Route { sc: 0, ev: 0, arc: stay, span })).collect();
    assert_eq!(ones, expected);

    assert!(matches!(extract_labels(&sol, &ix, 0), Err(SurrogateError::TooManyEvs { .. })));
    let two = micro_generator().instance(1, 2, 3).unwrap();
    let (m2, ix2) = build_model(&two, BuildMode::Stochastic).unwrap();
    let s2 = HighsBackend::default().solve(&m2, &exact());
    assert!(matches!(extract_labels(&s2, &ix2, 2), Err(SurrogateError::NotDeterministic(2))));
}

#[test]
fn small_dataset_labels_and_round_trips() {
    let generator = micro_generator();
    let cfg = DatasetConfig { ev_counts: vec![1, 2], samples_per_count: 2, e_max: 2, seed: 4, solver: exact() };
    let ds = generate_labelled_dataset(&generator, &cfg, &HighsBackend::default(), Parallelism::Sequential).unwrap();
    assert_eq!(ds.records.len(), 4);
    assert_eq!(ds.samples.len(), ds.records.iter().filter(|r| r.kept).count());
    for s in &ds.samples {
        assert_eq!(s.labels.bits.len(), 2 * ds.d_ev);
        assert_eq!(s.features.layout.e_max, 2);
        assert!(s.labels.ones() > 0);
    }
    let means = ds.mean_seconds_by_count();
    assert_eq!(means.iter().map(|m| m.0).collect::<Vec<_>>(), vec![1, 2]);

    // Same instances through the file-based entry point.
    let pairs: Vec<_> = cfg.jobs().into_iter().map(|(k, s)| (generator.deterministic(k, s).unwrap(), s)).collect();
    let again = label_instances(&pairs, 2, &exact(), &HighsBackend::default(), Parallelism::Sequential).unwrap();
    assert_eq!(again.samples, ds.samples);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.json");
    ds.save(&path).unwrap();
    assert_eq!(Dataset::load(&path).unwrap(), ds);

    let stochastic = vec![(generator.instance(1, 2, 1).unwrap(), 1)];
    assert!(label_instances(&stochastic, 2, &exact(), &HighsBackend::default(), Parallelism::Sequential).is_err());
}

#[test]
fn labelling_time_accounting() {
    let hour = 3600.0;
    let per_count = estimate_labelling_time(&vec![(400, hour); 81]);
    let padded = estimate_labelling_time(&[(800, hour)]);
    assert_eq!(per_count, 32_400.0);
    assert_eq!(padded, 800.0);
    assert_eq!(per_count / padded, 40.5);
    assert_eq!(estimate_labelling_time(&[]), 0.0);
}
