//! The mixed-integer model: variable layout, constraint assembly, solver
//! backend and an independent feasibility / objective oracle.

mod backend;
mod build;
mod index;
mod model;
mod oracle;

pub use backend::{
    solution_from_named_json, solution_to_named_json, solve, HighsBackend, MilpBackend, Solution,
    SolveStatus, SolverParams,
};
pub use build::{
    add_ev_energy_constraints, add_generation_constraints, add_network_constraints,
    add_routing_constraints, build_model, step_hours, variable_index, BuildMode,
};
pub use index::{Dims, Var, VariableIndex};
pub use model::{Column, ConstraintFamily, MipModel, PartialAssignment, Row};
pub use oracle::{check_feasible, energy_telescoping_residual, objective_value, FeasibilityReport};

use crate::topology::NodeId;

#[derive(Debug, thiserror::Error)]
pub enum MipError {
    #[error("column {0} is not a binary variable")]
    NotBinary(usize),
    #[error("scenario {0} does not exist")]
    Scenario(usize),
    #[error("node {0} has no departing arcs in the expansion")]
    Schedule(NodeId),
    #[error("inconsistent bounds on {0}")]
    Bounds(String),
    #[error("grid: {0}")]
    Grid(String),
    #[error("no value for variable {0}")]
    MissingValue(usize),
    #[error("invalid solver parameters {0}")]
    Params(String),
    #[error("solution file: {0}")]
    Format(String),
}
