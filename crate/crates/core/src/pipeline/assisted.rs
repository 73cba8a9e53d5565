use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::mipcore::{build_model, BuildMode, MilpBackend, MipModel, Solution, SolveStatus, SolverParams, VariableIndex};
use crate::scenariogen::ProblemInstance;
use crate::surrogate::{bump_threshold, encode_instance, filter_predictions, max_attempts, BinaryPredictor, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryConfig {
    /// Cap on assisted attempts; `None` bumps until `p1` reaches 1.
    pub max_attempts: Option<usize>,
    /// Solve without fixings when every assisted attempt fails.
    pub fallback: bool,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig { max_attempts: None, fallback: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptStats {
    pub p1: f64,
    pub fixed: usize,
    pub fixed_ones: usize,
    pub status: SolveStatus,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssistedOutcome {
    /// The successful assisted solution, else the fallback's, else the last
    /// failed attempt's.
    pub solution: Solution,
    pub index: VariableIndex,
    /// An assisted attempt (before any fallback) found a solution.
    pub assisted_feasible: bool,
    pub attempts: Vec<AttemptStats>,
    pub fallback: Option<FallbackStats>,
    pub predict_calls: usize,
    pub predict_seconds: f64,
    /// Prediction plus every assisted attempt, up to and including the
    /// successful one.
    pub assisted_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallbackStats {
    pub status: SolveStatus,
    pub seconds: f64,
}

impl AssistedOutcome {
    pub fn retries(&self) -> usize {
        self.attempts.len().saturating_sub(1)
    }
}

/// Per-scenario predictions with padding removed, concatenated in the
/// stochastic model's binary order.
pub fn predict_binaries(
    inst: &ProblemInstance,
    predictor: &dyn BinaryPredictor,
) -> Result<(Vec<f64>, usize), PipelineError> {
    let layout = predictor.layout();
    if inst.ev_count() > layout.e_max {
        return Err(PipelineError::Config(format!(
            "{} EVs exceed the model's capacity {}",
            inst.ev_count(),
            layout.e_max
        )));
    }
    let keep = inst.ev_count() * predictor.d_ev();
    let mut out = Vec::with_capacity(keep * inst.scenario_count());
    for sc in 0..inst.scenario_count() {
        let features = encode_instance(inst, sc, layout.e_max)?;
        let probs = predictor.predict(&features)?;
        out.extend_from_slice(&probs[..keep]);
    }
    Ok((out, inst.scenario_count()))
}

fn attempt(
    model: &mut MipModel,
    probs: &[f64],
    th: Thresholds,
    backend: &dyn MilpBackend,
    params: &SolverParams,
) -> Result<(Solution, AttemptStats), PipelineError> {
    let fixing = filter_predictions(probs, th);
    model.fix_binaries(&fixing)?;
    let start = Instant::now();
    let sol = backend.solve(model, params);
    let seconds = start.elapsed().as_secs_f64();
    model.unfix();
    if sol.status == SolveStatus::BackendError {
        return Err(PipelineError::Backend(sol.message.unwrap_or_default()));
    }
    let stats = AttemptStats { p1: th.p1, fixed: fixing.len(), fixed_ones: fixing.ones(), status: sol.status, seconds };
    Ok((sol, stats))
}

/// Predict, fix, solve; on failure raise `p1` and try again, then optionally
/// fall back to the unassisted model.
pub fn infer_and_solve(
    inst: &ProblemInstance,
    predictor: &dyn BinaryPredictor,
    thresholds: Thresholds,
    backend: &dyn MilpBackend,
    params: &SolverParams,
    retry: &RetryConfig,
) -> Result<AssistedOutcome, PipelineError> {
    let total = Instant::now();
    let (mut model, index) = build_model(inst, BuildMode::Stochastic)?;
    let start = Instant::now();
    let (probs, predict_calls) = predict_binaries(inst, predictor)?;
    if probs.len() != index.binary_count() {
        return Err(PipelineError::Config(format!(
            "{} predictions for {} binaries",
            probs.len(),
            index.binary_count()
        )));
    }
    let predict_seconds = start.elapsed().as_secs_f64();
    let limit = retry.max_attempts.unwrap_or(usize::MAX).min(max_attempts(thresholds.p1)).max(1);

    let mut th = thresholds;
    let mut attempts = Vec::new();
    let mut last = None;
    for k in 0..limit {
        if k > 0 {
            th = bump_threshold(th);
        }
        let (sol, stats) = attempt(&mut model, &probs, th, backend, params)?;
        attempts.push(stats);
        if sol.is_feasible() {
            let assisted_seconds = predict_seconds + attempts.iter().map(|a| a.seconds).sum::<f64>();
            return Ok(AssistedOutcome {
                solution: sol,
                index,
                assisted_feasible: true,
                attempts,
                fallback: None,
                predict_calls,
                predict_seconds,
                assisted_seconds,
                total_seconds: total.elapsed().as_secs_f64(),
            });
        }
        last = Some(sol);
    }
    let assisted_seconds = predict_seconds + attempts.iter().map(|a| a.seconds).sum::<f64>();
    let mut fallback = None;
    let mut solution = last.expect("at least one attempt");
    if retry.fallback {
        let start = Instant::now();
        let sol = backend.solve(&model, params);
        let seconds = start.elapsed().as_secs_f64();
        if sol.status == SolveStatus::BackendError {
            return Err(PipelineError::Backend(sol.message.unwrap_or_default()));
        }
        fallback = Some(FallbackStats { status: sol.status, seconds });
        solution = sol;
    }
    Ok(AssistedOutcome {
        solution,
        index,
        assisted_feasible: false,
        attempts,
        fallback,
        predict_calls,
        predict_seconds,
        assisted_seconds,
        total_seconds: total.elapsed().as_secs_f64(),
    })
}
