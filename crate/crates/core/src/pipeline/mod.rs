//! End-to-end orchestration: stage functions, their on-disk artifacts and
//! the run configuration.

mod artifacts;
mod config;
mod stages;


pub use artifacts::{ChunkRecord, CutRecord, Dispersion, InterlockRecord, Manifest, PairRecord, SliceRecord, Summary};
pub use config::{MeshSource, PipelineConfig};
pub use stages::{
    cmd_chunk, cmd_evaluate, cmd_interlock, cmd_pipeline, cmd_plan, cmd_simulate, cmd_slice, evaluate_run,
    reference_streams, replay_chunks, run_pipeline, slice_all, ChunkCoverage, Evaluation, PipelineRun,
};

use std::path::Path;

use thiserror::Error;

use crate::chunker::ChunkerError;
use crate::controlsim::ControlError;
use crate::depgraph::DepgraphError;
use crate::evaluate::EvaluateError;
use crate::interlock::InterlockError;
use crate::pathgen::PathgenError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("artifacts: {0}")]
    Artifact(String),
    #[error("chunk: {0}")]
    Chunk(#[from] ChunkerError),
    #[error("plan: {0}")]
    Plan(#[from] DepgraphError),
    #[error("interlock: {0}")]
    Interlock(#[from] InterlockError),
    #[error("slice: {0}")]
    Slice(#[from] PathgenError),
    #[error("simulate: {0}")]
    Simulate(#[from] ControlError),
    #[error("evaluate: {0}")]
    Evaluate(#[from] EvaluateError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> PipelineError {
        PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    /// Process exit code: 2 bad input or I/O, 3 infeasible build, 4 solver
    /// failure.
    pub fn exit_code(&self) -> i32 {
        use PipelineError::*;
        match self {
            Io { .. } | Config(_) | Input(_) | Artifact(_) => 2,
            Chunk(ChunkerError::NoTerminalTree(_)) => 3,
            Chunk(_) => 2,
            Plan(_) | Interlock(_) => 3,
            Slice(PathgenError::InvalidConfig(_) | PathgenError::Parse(_)) => 2,
            Slice(_) => 3,
            Simulate(ControlError::InvalidConfig(_) | ControlError::MissingStream(_)) => 2,
            Simulate(_) => 4,
            Evaluate(EvaluateError::InvalidGrid(_)) => 2,
            Evaluate(_) => 4,
        }
    }
}
