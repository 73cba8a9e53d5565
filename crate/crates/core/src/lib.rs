//! Day-ahead joint routing and charging of an electric-vehicle fleet over a
//! coupled transport / distribution network, solved as a scenario-based MILP,
//! with a convolutional classifier that predicts and fixes binary variables
//! before the exact solve.

pub mod data;
pub mod grid;
pub mod mipcore;
pub mod par;
pub mod pipeline;
pub mod scenariogen;
pub mod surrogate;
pub mod topology;
