use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{MeshSource, PipelineError, Result};
use crate::chunker::{BspTree, SearchOutcome};
use crate::evaluate::{Comparison, TrackingStats};
use crate::geometry::{CutPlane, PlaneId, Side};

pub const MANIFEST: &str = "manifest.json";
pub const PLAN: &str = "plan.json";
pub const INTERLOCK: &str = "interlock.json";
pub const SLICE: &str = "slice.json";
pub const TRACE_CSV: &str = "trace.csv";
pub const TRACE_JSON: &str = "trace.json";
pub const MISSION: &str = "mission.json";
pub const EVALUATION: &str = "evaluation.json";
pub const STATS: &str = "tracking_stats.json";
pub const ERRORS: &str = "errors.csv";
pub const REFERENCE_GRID: &str = "reference.rle";
pub const MEASURED_GRID: &str = "measured.rle";
pub const SUMMARY: &str = "summary.json";

pub fn chunk_stl(id: usize) -> String {
    format!("chunks/chunk_{id:02}.stl")
}

pub fn interlocked_stl(id: usize) -> String {
    format!("interlocked/chunk_{id:02}.stl")
}

pub fn path_text(id: usize) -> String {
    format!("paths/chunk_{id:02}.txt")
}

pub fn refs_csv(id: usize) -> String {
    format!("paths/chunk_{id:02}_refs.csv")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    pub std: f64,
    pub cv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub id: u32,
    pub normal: [f64; 3],
    pub origin: [f64; 3],
}

impl From<&CutPlane> for CutRecord {
    fn from(p: &CutPlane) -> Self {
        CutRecord { id: p.id.0, normal: p.normal.into(), origin: p.origin.into() }
    }
}

impl CutRecord {
    pub fn plane(&self) -> CutPlane {
        CutPlane { id: PlaneId(self.id), normal: self.normal.into(), origin: self.origin.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub id: usize,
    pub file: String,
    /// Liters.
    pub volume: f64,
    pub min_extent: f64,
    /// Generating cuts from the root, with the side taken.
    pub cuts: Vec<(u32, Side)>,
}

/// Decomposition result: cuts in application order and the leaf chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: MeshSource,
    pub input_volume: f64,
    pub score: f64,
    pub iterations: usize,
    pub dispersion: Dispersion,
    pub cuts: Vec<CutRecord>,
    pub chunks: Vec<ChunkRecord>,
}

impl Manifest {
    pub fn new(source: MeshSource, outcome: &SearchOutcome, dispersion: Dispersion) -> Manifest {
        let tree: &BspTree = &outcome.tree;
        Manifest {
            source,
            input_volume: tree.root_mesh().signed_volume() * crate::geometry::M3_TO_L,
            score: outcome.score,
            iterations: outcome.iterations,
            dispersion,
            cuts: tree.planes.iter().map(CutRecord::from).collect(),
            chunks: tree
                .chunks()
                .iter()
                .map(|c| ChunkRecord {
                    id: c.id,
                    file: chunk_stl(c.id),
                    volume: c.volume,
                    min_extent: c.min_extent,
                    cuts: c.generating_cuts.iter().map(|(p, s)| (p.id.0, *s)).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub bottom: usize,
    pub top: usize,
    pub plane: u32,
    pub inclined_area: f64,
    pub stepped_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterlockRecord {
    pub processed: Vec<PairRecord>,
    /// `(bottom, top)` pairs left unstepped.
    pub skipped: Vec<(usize, usize)>,
    /// Chunk volumes after interlocking, liters.
    pub volumes: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub chunk: usize,
    pub layers: usize,
    pub loops: usize,
    pub path_length: f64,
    /// Seconds of reference stream.
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionRecord {
    pub duration: f64,
    pub samples: usize,
    pub extruding_samples: usize,
    pub unconverged_solves: usize,
    pub canister_swaps: usize,
}

/// The end-of-run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub input_volume: f64,
    pub chunk_volumes: Vec<f64>,
    pub dispersion: Dispersion,
    pub sequence: Vec<usize>,
    pub layers: Vec<Vec<usize>>,
    pub interlocked_pairs: usize,
    pub interlocked_volumes: Vec<f64>,
    pub mission: MissionRecord,
    pub tracking: TrackingStats,
    pub deposition: Comparison,
    pub chunk_coverage: Vec<super::ChunkCoverage>,
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: &Path) -> OutDir {
        OutDir { root: root.to_path_buf() }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        fs::write(&p, bytes).map_err(|e| PipelineError::io(&p, e))
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        text.push('\n');
        self.write(rel, text)
    }

    pub fn read_string(&self, rel: &str) -> Result<String> {
        let p = self.path(rel);
        fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T> {
        let text = self.read_string(rel)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Artifact(format!("{rel}: {e}")))
    }
}
