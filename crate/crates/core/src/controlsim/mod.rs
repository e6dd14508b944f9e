//! Closed-loop flight simulation: nominal dynamics, the tracking NMPC, the
//! moving-horizon disturbance estimator, the true plant and the mission
//! executor.

mod mission;
mod model;
mod nmhe;
mod nmpc;
mod plant;

#[cfg(test)]
mod tests;

pub use mission::{run_mission, transit, EstimatorMode, Executor, MissionConfig, MissionTrace, TraceSample};
pub use model::{
    dynamics, hover_input, jacobians, position, state_at_rest, step_euler, step_rk4, Disturbance, Input, ModelParams,
    State, G,
};
pub use nmhe::{nmhe_solve, NmheConfig, NmheSolution};
pub use nmpc::{nmpc_solve, project, NmpcConfig, NmpcSolution, Problem};
pub use plant::{GroundEffect, Plant, PlantSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} horizon references, got {got}")]
    HorizonMismatch { expected: usize, got: usize },
    #[error("estimation window needs N+1 states for N >= 2 inputs (got {states} states, {inputs} inputs)")]
    InvalidWindow { states: usize, inputs: usize },
    #[error("non-finite state")]
    NonFinite,
    #[error("position error {error:.3} m at t = {t:.2} s exceeds the safety limit")]
    DivergedState { t: f64, error: f64 },
    #[error("no reference stream for chunk {0}")]
    MissingStream(usize),
}

pub type Result<T> = std::result::Result<T, ControlError>;
