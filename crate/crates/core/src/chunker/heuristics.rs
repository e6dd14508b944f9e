use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BspTree, Chunk, ChunkerError, Result};
use crate::geometry::{CutPlane, FaceTag, PlaneId, Side};

/// Heuristic gains. Rewards are non-positive and penalties positive; lower
/// tree scores are better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeuristicWeights {
    pub w_d: f64,
    pub w_s: f64,
    pub w_f: f64,
    pub w_g: f64,
    pub w_cr: f64,
}

impl Default for HeuristicWeights {
    fn default() -> Self {
        HeuristicWeights { w_d: 10.0, w_s: -5.0, w_f: -1.0, w_g: -3.0, w_cr: 1000.0 }
    }
}

impl HeuristicWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w_d > 0.0
            && self.w_s <= 0.0
            && self.w_f <= 0.0
            && self.w_g <= 0.0
            && self.w_cr > 0.0
            && self.w_cr.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ChunkerError::InvalidConfig(format!("weight signs violated: {self:?}")))
        }
    }
}

/// Population mean, standard deviation and coefficient of variation.
pub fn volume_dispersion(volumes: &[f64]) -> Result<(f64, f64, f64)> {
    if volumes.is_empty() {
        return Err(ChunkerError::EmptyList);
    }
    let n = volumes.len() as f64;
    let mu = volumes.iter().sum::<f64>() / n;
    let var = volumes.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    Ok((mu, sigma, sigma / mu))
}

/// Per-plane side of the chunk's cut faces, as recorded in face tags.
pub fn cut_face_sides(chunk: &Chunk) -> Result<BTreeMap<PlaneId, Side>> {
    let mut sides = BTreeMap::new();
    for tag in &chunk.mesh.tags {
        if let FaceTag::Cut { plane, side } = tag {
            if chunk.plane(*plane).is_none() {
                return Err(ChunkerError::MissingProvenance(*plane));
            }
            sides.insert(*plane, *side);
        }
    }
    Ok(sides)
}

/// Seed term: `w_s * s_k + w_f * (number of positive cut faces)`. A face is
/// positive when the chunk lies on the negative side of its cut; ground cuts
/// are ignored.
pub fn seed_score(chunk: &Chunk, w: &HeuristicWeights) -> Result<f64> {
    let mut positive = 0usize;
    let mut all_positive = true;
    for (id, side) in cut_face_sides(chunk)? {
        if chunk.plane(id).is_some_and(|p| p.is_ground()) {
            continue;
        }
        if side == Side::Negative {
            positive += 1;
        } else {
            all_positive = false;
        }
    }
    let s = if all_positive { 1.0 } else { 0.0 };
    Ok(w.w_s * s + w.w_f * positive as f64)
}

pub fn ground_score(cuts: &[CutPlane], w: &HeuristicWeights) -> f64 {
    w.w_g * cuts.iter().filter(|c| c.is_ground()).count() as f64
}

/// Penalty for chunks under `v_cr` liters or thinner than `l_w` meters.
pub fn critical_score(chunks: &[Chunk], v_cr: f64, l_w: f64, w: &HeuristicWeights) -> f64 {
    chunks
        .iter()
        .map(|c| {
            let small = if c.volume < v_cr { c.volume } else { 0.0 };
            let thin = if c.min_extent < l_w { 1.0 } else { 0.0 };
            w.w_cr * (small + thin)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub dispersion: f64,
    pub seed: f64,
    pub ground: f64,
    pub critical: f64,
}

impl ScoreBreakdown {
    pub fn total(&self) -> f64 {
        self.dispersion + self.seed + self.ground + self.critical
    }
}

/// Scores a tree; `v_cr` in liters, `l_w` in meters.
pub fn tree_heuristic(tree: &BspTree, w: &HeuristicWeights, v_cr: f64, l_w: f64) -> Result<ScoreBreakdown> {
    let chunks = tree.chunks();
    let vols: Vec<f64> = chunks.iter().map(|c| c.volume).collect();
    let dispersion = if tree.n_cuts() == 0 { 0.0 } else { w.w_d * volume_dispersion(&vols)?.2 };
    let seed = chunks.iter().map(|c| seed_score(c, w)).sum::<Result<f64>>()?;
    Ok(ScoreBreakdown {
        dispersion,
        seed,
        ground: ground_score(&tree.planes, w),
        critical: critical_score(&chunks, v_cr, l_w, w),
    })
}
