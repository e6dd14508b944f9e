//! Chunk dependencies, layered printing order and canister assignment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{Chunk, FleetSpec};
use crate::geometry::{face_polygon_overlap, plane_distance, CutPlane, FaceTag, PlanarFace, PlaneId, Side, COPLANAR_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepgraphError {
    #[error("face references unknown cut plane {0:?}")]
    MissingProvenance(PlaneId),
    #[error("dependency graph has a cycle through chunk {0}")]
    CycleDetected(usize),
    #[error("no chunk available with {0} chunks left")]
    Deadlock(usize),
    #[error("{unassigned} chunks left without a canister")]
    InsufficientMaterial { unassigned: usize },
}

pub type Result<T> = std::result::Result<T, DepgraphError>;

/// Shared planes steeper than this (from horizontal) never create a dependency.
pub const MAX_DEPENDENCY_TILT_DEG: f64 = 89.0;
const MIN_CONTACT_AREA: f64 = 1e-9;

/// Faces of a chunk generated by one cut.
#[derive(Debug, Clone)]
pub struct CutFace {
    pub plane: CutPlane,
    pub side: Side,
    pub face: PlanarFace,
}

pub fn cut_faces(chunk: &Chunk) -> Result<Vec<CutFace>> {
    let mut groups: BTreeMap<PlaneId, (Side, Vec<[crate::geometry::Vec3; 3]>)> = BTreeMap::new();
    for (f, tag) in chunk.mesh.tags.iter().enumerate() {
        if let FaceTag::Cut { plane, side } = tag {
            groups.entry(*plane).or_insert((*side, Vec::new())).1.push(chunk.mesh.triangle(f));
        }
    }
    groups
        .into_iter()
        .map(|(id, (side, triangles))| {
            let plane = *chunk.plane(id).ok_or(DepgraphError::MissingProvenance(id))?;
            let normal = if side == Side::Negative { plane.normal } else { -plane.normal };
            Ok(CutFace { plane, side, face: PlanarFace { normal, origin: plane.origin, triangles } })
        })
        .collect()
}

fn faces_support(upper: &[CutFace], lower: &[CutFace], eps: f64) -> bool {
    let min_nz = MAX_DEPENDENCY_TILT_DEG.to_radians().cos();
    for u in upper.iter().filter(|f| f.side == Side::Positive && f.plane.normal.z > min_nz) {
        for l in lower.iter().filter(|f| f.side == Side::Negative) {
            match plane_distance(&u.plane, &l.plane) {
                Ok(d) if d <= eps => {}
                _ => continue,
            }
            // The upper face points down, the lower one up; overlap is
            // measured on the lower face's plane.
            let mut shifted = u.face.clone();
            shifted.origin = l.face.origin;
            if face_polygon_overlap(&l.face, &shifted).unwrap_or(0.0) > MIN_CONTACT_AREA {
                return true;
            }
        }
    }
    false
}

/// `upper` rests on `lower` through a shared, non-vertical cut face.
pub fn is_dependent(upper: &Chunk, lower: &Chunk, eps: f64) -> Result<bool> {
    Ok(faces_support(&cut_faces(upper)?, &cut_faces(lower)?, eps))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub n: usize,
    /// `(i, j)`: chunk `i` depends on chunk `j`.
    pub edges: Vec<(usize, usize)>,
    pub manufactured: Vec<bool>,
}

impl DependencyGraph {
    pub fn new(n: usize, mut edges: Vec<(usize, usize)>) -> Result<DependencyGraph> {
        edges.sort_unstable();
        edges.dedup();
        let g = DependencyGraph { n, edges, manufactured: vec![false; n] };
        g.check_acyclic()?;
        Ok(g)
    }

    pub fn prerequisites(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == i).map(|e| e.1)
    }

    pub fn dependents(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == j).map(|e| e.0)
    }

    /// Sequencing priority: number of chunks directly resting on `k`.
    pub fn score(&self, k: usize) -> usize {
        self.dependents(k).count()
    }

    pub fn mark_manufactured(&mut self, k: usize) {
        self.manufactured[k] = true;
    }

    fn check_acyclic(&self) -> Result<()> {
        // 0 = unvisited, 1 = on stack, 2 = done.
        let mut state = vec![0u8; self.n];
        fn visit(g: &DependencyGraph, k: usize, state: &mut [u8]) -> Result<()> {
            state[k] = 1;
            for p in g.prerequisites(k) {
                match state[p] {
                    1 => return Err(DepgraphError::CycleDetected(p)),
                    0 => visit(g, p, state)?,
                    _ => {}
                }
            }
            state[k] = 2;
            Ok(())
        }
        for k in 0..self.n {
            if state[k] == 0 {
                visit(self, k, &mut state)?;
            }
        }
        Ok(())
    }
}

pub fn build_graph(chunks: &[Chunk], eps: f64) -> Result<DependencyGraph> {
    let faces: Vec<Vec<CutFace>> = chunks.iter().map(cut_faces).collect::<Result<_>>()?;
    let mut edges = Vec::new();
    for i in 0..chunks.len() {
        for j in 0..chunks.len() {
            if i != j && faces_support(&faces[i], &faces[j], eps) {
                edges.push((i, j));
            }
        }
    }
    DependencyGraph::new(chunks.len(), edges)
}

pub fn build_graph_default(chunks: &[Chunk]) -> Result<DependencyGraph> {
    build_graph(chunks, COPLANAR_EPS)
}

/// Chunks not yet manufactured whose prerequisites all are.
pub fn available_set(graph: &DependencyGraph) -> Vec<usize> {
    (0..graph.n)
        .filter(|&k| !graph.manufactured[k] && graph.prerequisites(k).all(|p| graph.manufactured[p]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundLayers {
    /// Ground-cut heights, ascending, m.
    pub heights: Vec<f64>,
    /// Zero-based layer of each chunk.
    pub layer_of: Vec<usize>,
}

impl GroundLayers {
    /// Layers bounded by the ground cuts among the chunks' generating cuts;
    /// a chunk belongs to the layer containing its centroid.
    pub fn from_chunks(chunks: &[Chunk]) -> GroundLayers {
        let mut heights: Vec<f64> = chunks
            .iter()
            .flat_map(|c| c.generating_cuts.iter())
            .filter(|(p, _)| p.is_ground())
            .map(|(p, _)| p.offset() / p.normal.z)
            .collect();
        heights.sort_by(f64::total_cmp);
        heights.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let layer_of = chunks
            .iter()
            .map(|c| {
                let z = c.mesh.centroid().z;
                heights.iter().take_while(|&&h| h <= z).count()
            })
            .collect();
        GroundLayers { heights, layer_of }
    }

    pub fn n_layers(&self) -> usize {
        self.heights.len() + 1
    }
}

/// Layer-by-layer greedy order: within the current layer, the available
/// chunk with the most dependents goes first (lowest id on ties).
pub fn printing_sequence(graph: &DependencyGraph, layers: &GroundLayers) -> Result<Vec<usize>> {
    let mut g = graph.clone();
    g.manufactured = vec![false; g.n];
    let mut seq = Vec::with_capacity(g.n);
    let mut layer = 0usize;
    while seq.len() < g.n {
        let pick = available_set(&g)
            .into_iter()
            .filter(|&k| layers.layer_of[k] == layer)
            .max_by(|&a, &b| g.score(a).cmp(&g.score(b)).then(b.cmp(&a)));
        match pick {
            Some(k) => {
                g.mark_manufactured(k);
                seq.push(k);
            }
            None => {
                layer += 1;
                if layer >= layers.n_layers() {
                    return Err(DepgraphError::Deadlock(g.n - seq.len()));
                }
            }
        }
    }
    Ok(seq)
}

/// Canister slot used by a chunk; slot `s` is canister `s % m` of refill
/// round `s / m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub chunk: usize,
    pub slot: usize,
    pub canister: usize,
}

/// Sequential fill: stay on a canister while the next chunk fits, otherwise
/// move to the next one. Returns the slot for each volume.
pub fn assign_canisters(volumes: &[f64], canisters: &[f64], resupply: bool) -> Result<Vec<usize>> {
    let m = canisters.len();
    let largest = canisters.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-9;
    let mut slots = Vec::with_capacity(volumes.len());
    let mut slot = 0usize;
    let mut left = canisters.first().copied().unwrap_or(0.0);
    for (j, &v) in volumes.iter().enumerate() {
        if resupply && v > largest + tol {
            return Err(DepgraphError::InsufficientMaterial { unassigned: volumes.len() - j });
        }
        while v > left + tol {
            slot += 1;
            if !resupply && slot >= m {
                return Err(DepgraphError::InsufficientMaterial { unassigned: volumes.len() - j });
            }
            left = canisters[slot % m];
        }
        left -= v;
        slots.push(slot);
    }
    Ok(slots)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildPlan {
    pub sequence: Vec<usize>,
    pub assignments: Vec<Assignment>,
    pub graph: DependencyGraph,
    pub layers: GroundLayers,
    /// Chunk volumes by id, liters.
    pub volumes: Vec<f64>,
}

impl BuildPlan {
    pub fn position(&self, chunk: usize) -> Option<usize> {
        self.sequence.iter().position(|&c| c == chunk)
    }
}

/// Graph, layers, sequence and canister assignment for a decomposition.
pub fn plan(chunks: &[Chunk], fleet: &FleetSpec, eps: f64) -> Result<BuildPlan> {
    let graph = build_graph(chunks, eps)?;
    let layers = GroundLayers::from_chunks(chunks);
    let sequence = printing_sequence(&graph, &layers)?;
    let volumes: Vec<f64> = chunks.iter().map(|c| c.volume).collect();
    let seq_vols: Vec<f64> = sequence.iter().map(|&k| volumes[k]).collect();
    let slots = assign_canisters(&seq_vols, &fleet.canisters, fleet.resupply)?;
    let m = fleet.canisters.len();
    let assignments = sequence
        .iter()
        .zip(slots)
        .map(|(&chunk, slot)| Assignment { chunk, slot, canister: slot % m })
        .collect();
    Ok(BuildPlan { sequence, assignments, graph, layers, volumes })
}
