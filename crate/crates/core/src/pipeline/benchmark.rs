use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::assisted::{infer_and_solve, RetryConfig};
use super::metrics::PredictionMetrics;
use super::PipelineError;
use crate::mipcore::{build_model, check_feasible, BuildMode, MilpBackend, SolveStatus, SolverParams};
use crate::scenariogen::ProblemInstance;
use crate::surrogate::{BinaryPredictor, Thresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub sample: usize,
    pub ev_count: usize,
    pub scenarios: usize,
    pub baseline_status: SolveStatus,
    pub baseline_seconds: f64,
    pub baseline_objective: Option<f64>,
    /// Prediction plus assisted attempts, successful or not.
    pub assisted_seconds: f64,
    pub assisted_objective: Option<f64>,
    /// The assisted path found a solution before any fallback.
    pub feasible: bool,
    pub retries: usize,
    pub fixed: usize,
    pub fallback_seconds: Option<f64>,
    /// Worst scaled constraint violation of the returned solution.
    pub max_violation: Option<f64>,
}

impl BenchmarkRow {
    /// Percentage time reduction, counting infeasible samples as no change.
    pub fn reduction(&self) -> f64 {
        if !self.feasible || self.baseline_seconds <= 0.0 {
            return 0.0;
        }
        100.0 * (self.baseline_seconds - self.assisted_seconds) / self.baseline_seconds
    }

    /// Percentage time reduction charging infeasible samples with their
    /// failed attempts plus the fallback solve.
    pub fn reduction_with_overhead(&self) -> f64 {
        if self.baseline_seconds <= 0.0 {
            return 0.0;
        }
        let spent = self.assisted_seconds + self.fallback_seconds.unwrap_or(0.0);
        100.0 * (self.baseline_seconds - spent) / self.baseline_seconds
    }

    /// Percentage objective change of a feasible assisted solution.
    pub fn loss(&self) -> Option<f64> {
        match (self.feasible, self.baseline_objective, self.assisted_objective) {
            (true, Some(b), Some(a)) if b != 0.0 => Some(100.0 * (a - b) / b.abs()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub samples: usize,
    /// Mean time reduction, percent.
    pub r_bar: f64,
    pub r_bar_with_overhead: f64,
    pub median_reduction: f64,
    /// Mean objective loss over feasible samples, percent.
    pub l_bar: f64,
    /// Share of samples solved on the assisted path, percent.
    pub feas: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PredictionMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub summary: BenchmarkSummary,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl BenchmarkReport {
    /// Aggregates recomputed from rows.
    pub fn from_rows(rows: Vec<BenchmarkRow>, thresholds: Option<Thresholds>, metrics: Option<PredictionMetrics>) -> Self {
        let red: Vec<f64> = rows.iter().map(BenchmarkRow::reduction).collect();
        let over: Vec<f64> = rows.iter().map(BenchmarkRow::reduction_with_overhead).collect();
        let loss: Vec<f64> = rows.iter().filter_map(BenchmarkRow::loss).collect();
        let feasible = rows.iter().filter(|r| r.feasible).count();
        let summary = BenchmarkSummary {
            samples: rows.len(),
            r_bar: mean(&red),
            r_bar_with_overhead: mean(&over),
            median_reduction: median(&red),
            l_bar: mean(&loss),
            feas: if rows.is_empty() { 0.0 } else { 100.0 * feasible as f64 / rows.len() as f64 },
            metrics,
            thresholds,
        };
        BenchmarkReport { rows, summary }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "sample,ev_count,scenarios,baseline_status,baseline_seconds,baseline_objective,assisted_seconds,\
             assisted_objective,feasible,retries,fixed,fallback_seconds,max_violation\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let status = serde_json::to_value(r.baseline_status).expect("status serializes");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.sample,
                r.ev_count,
                r.scenarios,
                status.as_str().unwrap_or_default(),
                r.baseline_seconds,
                opt(r.baseline_objective),
                r.assisted_seconds,
                opt(r.assisted_objective),
                r.feasible,
                r.retries,
                r.fixed,
                opt(r.fallback_seconds),
                opt(r.max_violation),
            );
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// Solves every instance unassisted and assisted with the same solver
/// parameters, one instance at a time so timings do not compete.
pub fn benchmark(
    instances: &[ProblemInstance],
    predictor: &dyn BinaryPredictor,
    thresholds: Thresholds,
    backend: &dyn MilpBackend,
    params: &SolverParams,
    retry: &RetryConfig,
) -> Result<BenchmarkReport, PipelineError> {
    let mut rows = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let (model, _) = build_model(inst, BuildMode::Stochastic)?;
        let start = Instant::now();
        let base = backend.solve(&model, params);
        let baseline_seconds = start.elapsed().as_secs_f64();
        if base.status == SolveStatus::BackendError {
            return Err(PipelineError::Backend(base.message.unwrap_or_default()));
        }
        let out = infer_and_solve(inst, predictor, thresholds, backend, params, retry)?;
        let max_violation = if out.solution.is_feasible() {
            let report = check_feasible(inst, &out.index, &out.solution.values, 1e-6)?;
            Some(report.worst().map_or(0.0, |w| w.1))
        } else {
            None
        };
        let row = BenchmarkRow {
            sample: i,
            ev_count: inst.ev_count(),
            scenarios: inst.scenario_count(),
            baseline_status: base.status,
            baseline_seconds,
            baseline_objective: base.objective,
            assisted_seconds: out.assisted_seconds,
            assisted_objective: out.solution.objective,
            feasible: out.assisted_feasible,
            retries: out.retries(),
            fixed: out.attempts.last().map_or(0, |a| a.fixed),
            fallback_seconds: out.fallback.map(|f| f.seconds),
            max_violation,
        };
        log::info!(
            "sample {i}: baseline {:.3}s assisted {:.3}s feasible {} retries {}",
            row.baseline_seconds,
            row.assisted_seconds,
            row.feasible,
            row.retries
        );
        rows.push(row);
    }
    Ok(BenchmarkReport::from_rows(rows, Some(thresholds), None))
}
