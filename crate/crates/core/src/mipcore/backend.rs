use std::collections::BTreeMap;
use std::time::Instant;

use highs::{ColProblem, HighsModelStatus, HighsSolutionStatus, Row as HRow, Sense};
use serde::{Deserialize, Serialize};

use super::index::VariableIndex;
use super::model::MipModel;
use super::MipError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Relative MIP gap, as a fraction.
    pub gap: f64,
    pub time_limit_s: f64,
    pub threads: u32,
    pub seed: u32,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { gap: 0.001, time_limit_s: 7200.0, threads: 1, seed: 0 }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), MipError> {
        if !(self.gap >= 0.0) || !(self.time_limit_s > 0.0) || self.threads == 0 {
            return Err(MipError::Params(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped at the requested relative gap.
    GapFeasible,
    TimeLimitFeasible,
    Infeasible,
    TimeoutNoSolution,
    BackendError,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapFeasible | SolveStatus::TimeLimitFeasible)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Empty unless `status.has_solution()`.
    pub values: Vec<f64>,
    pub objective: Option<f64>,
    pub mip_gap: Option<f64>,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Solution {
    pub fn failed(status: SolveStatus, seconds: f64, message: Option<String>) -> Self {
        Solution { status, values: Vec::new(), objective: None, mip_gap: None, seconds, message }
    }

    pub fn is_feasible(&self) -> bool {
        self.status.has_solution()
    }

    /// Binary values rounded to 0/1.
    pub fn binaries(&self, ix: &VariableIndex) -> Vec<u8> {
        self.values[..ix.binary_count()].iter().map(|&v| u8::from(v > 0.5)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct NamedSolution {
    status: SolveStatus,
    objective: Option<f64>,
    mip_gap: Option<f64>,
    seconds: f64,
    values: BTreeMap<String, f64>,
}

/// Audit form keyed by variable names such as `E[0,1,5]`.
pub fn solution_to_named_json(sol: &Solution, ix: &VariableIndex) -> String {
    let values = sol
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| (ix.name(i).expect("index in layout"), v))
        .collect();
    let named = NamedSolution {
        status: sol.status,
        objective: sol.objective,
        mip_gap: sol.mip_gap,
        seconds: sol.seconds,
        values,
    };
    serde_json::to_string_pretty(&named).expect("solution serializes")
}

pub fn solution_from_named_json(text: &str, ix: &VariableIndex) -> Result<Solution, MipError> {
    let named: NamedSolution =
        serde_json::from_str(text).map_err(|e| MipError::Format(e.to_string()))?;
    let mut values = Vec::new();
    if !named.values.is_empty() {
        values = vec![f64::NAN; ix.len()];
        for (name, v) in &named.values {
            let i = ix.parse_name(name).ok_or_else(|| MipError::Format(format!("unknown variable {name}")))?;
            values[i] = *v;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(MipError::MissingValue(i));
        }
    }
    Ok(Solution {
        status: named.status,
        values,
        objective: named.objective,
        mip_gap: named.mip_gap,
        seconds: named.seconds,
        message: None,
    })
}

/// An exact MILP engine. Implementations must not share mutable solver state
/// between calls, so one value may serve concurrent solves.
pub trait MilpBackend: Sync {
    fn solve(&self, model: &MipModel, params: &SolverParams) -> Solution;
}

/// HiGHS through its C API; a fresh solver instance per call.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend {
    /// Tighter primal feasibility tolerance than the HiGHS default.
    pub feasibility_tol: Option<f64>,
}

impl MilpBackend for HighsBackend {
    fn solve(&self, model: &MipModel, params: &SolverParams) -> Solution {
        let start = Instant::now();
        if let Err(e) = params.validate() {
            return Solution::failed(SolveStatus::BackendError, 0.0, Some(e.to_string()));
        }
        let mut pb = ColProblem::default();
        let rows: Vec<HRow> = model.rows.iter().map(|r| pb.add_row(r.lower..=r.upper)).collect();
        let mut by_col: Vec<Vec<(HRow, f64)>> = vec![Vec::new(); model.columns.len()];
        for (r, row) in model.rows.iter().enumerate() {
            for &(c, a) in &row.coeffs {
                by_col[c].push((rows[r], a));
            }
        }
        for (col, entries) in model.columns.iter().zip(by_col) {
            pb.add_column_with_integrality(col.cost, col.lower..=col.upper, entries, col.integer);
        }
        let mut m = pb.optimise(Sense::Minimise);
        m.make_quiet();
        m.set_option("mip_rel_gap", params.gap);
        m.set_option("time_limit", params.time_limit_s);
        m.set_option("threads", params.threads as i32);
        m.set_option("random_seed", params.seed as i32);
        if let Some(tol) = self.feasibility_tol {
            m.set_option("primal_feasibility_tolerance", tol);
            m.set_option("mip_feasibility_tolerance", tol);
        }
        let solved = match m.try_solve() {
            Ok(s) => s,
            Err(e) => {
                let secs = start.elapsed().as_secs_f64();
                return Solution::failed(SolveStatus::BackendError, secs, Some(format!("{e:?}")));
            }
        };
        let seconds = start.elapsed().as_secs_f64();
        let has_primal = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let integer = model.columns.iter().any(|c| c.integer);
        let gap = if integer { solved.mip_gap() } else { 0.0 };
        let status = match solved.status() {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => {
                if gap.is_finite() && gap > 1e-9 {
                    SolveStatus::GapFeasible
                } else {
                    SolveStatus::Optimal
                }
            }
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => {
                if has_primal {
                    SolveStatus::TimeLimitFeasible
                } else {
                    SolveStatus::TimeoutNoSolution
                }
            }
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
                SolveStatus::Infeasible
            }
            other => {
                return Solution::failed(SolveStatus::BackendError, seconds, Some(format!("{other:?}")));
            }
        };
        if !status.has_solution() {
            return Solution::failed(status, seconds, None);
        }
        let values = if model.columns.is_empty() { Vec::new() } else { solved.get_solution().columns().to_vec() };
        let objective = model.objective_at(&values);
        Solution {
            status,
            values,
            objective: Some(objective),
            mip_gap: integer.then_some(gap),
            seconds,
            message: None,
        }
    }
}

/// Solves `model` and records the wall-clock time.
pub fn solve(model: &MipModel, backend: &dyn MilpBackend, params: &SolverParams) -> Solution {
    backend.solve(model, params)
}
