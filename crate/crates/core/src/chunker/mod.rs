//! Mesh decomposition by beam search over binary space partitions.

mod bsp;
mod heuristics;
mod sampler;
mod search;

pub use bsp::{BspNode, BspTree, Chunk};
pub use heuristics::{
    critical_score, cut_face_sides, ground_score, seed_score, tree_heuristic, volume_dispersion, HeuristicWeights,
    ScoreBreakdown,
};
pub use sampler::{phi_max_collision, plane_family, sample_normals, snap_to_layers, SamplerConfig};
pub use search::{beam_search, is_terminal, ChunkerConfig, FleetSpec, SearchOutcome};

use thiserror::Error;

use crate::geometry::{GeometryError, PlaneId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChunkerError {
    #[error("extruder dimensions must be positive")]
    NonPositiveDimension,
    #[error("empty volume list")]
    EmptyList,
    #[error("face references unknown cut plane {0:?}")]
    MissingProvenance(PlaneId),
    #[error("no terminal tree after {0} iterations")]
    NoTerminalTree(usize),
    #[error("invalid chunker config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, ChunkerError>;
