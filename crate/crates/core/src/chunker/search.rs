use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{plane_family, sample_normals, snap_to_layers, tree_heuristic, BspTree, ChunkerError, HeuristicWeights, Result, SamplerConfig};
use crate::depgraph::assign_canisters;
use crate::geometry::{CutPlane, PlaneId, TriangleMesh, Vec3, M3_TO_L};

/// Available material canisters, liters, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetSpec {
    pub canisters: Vec<f64>,
    /// Refill from the same set once every canister is used.
    pub resupply: bool,
}

impl Default for FleetSpec {
    fn default() -> Self {
        FleetSpec { canisters: vec![4.0; 4], resupply: true }
    }
}

impl FleetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.canisters.is_empty() || self.canisters.iter().any(|&c| !(c > 0.0)) {
            return Err(ChunkerError::InvalidConfig("canister volumes must be positive".into()));
        }
        if self.canisters.windows(2).any(|w| w[0] < w[1]) {
            return Err(ChunkerError::InvalidConfig("canisters must be sorted descending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChunkerConfig {
    pub sampler: SamplerConfig,
    pub weights: HeuristicWeights,
    pub w_inner: usize,
    pub w_outer: usize,
    pub max_iterations: usize,
    /// Critical volume as a fraction of the input volume.
    pub v_cr_fraction: f64,
    /// Printing line width, m.
    pub line_width: f64,
}

impl Default for ChunkerConfig {
    fn default() -> Self {
        ChunkerConfig {
            sampler: SamplerConfig::default(),
            weights: HeuristicWeights::default(),
            w_inner: 10,
            w_outer: 10,
            max_iterations: 20,
            v_cr_fraction: 0.05,
            line_width: 0.03,
        }
    }
}

impl ChunkerConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.weights.validate()?;
        if self.w_inner == 0 || self.w_outer == 0 {
            return Err(ChunkerError::InvalidConfig("beam widths must be >= 1".into()));
        }
        if !(self.v_cr_fraction >= 0.0 && self.line_width > 0.0) {
            return Err(ChunkerError::InvalidConfig("v_cr_fraction >= 0 and line_width > 0 required".into()));
        }
        Ok(())
    }
}

/// Every chunk (largest first) finds a canister under sequential assignment.
pub fn is_terminal(tree: &BspTree, fleet: &FleetSpec) -> bool {
    let mut vols = tree.leaf_volumes();
    vols.sort_by(|a, b| b.total_cmp(a));
    assign_canisters(&vols, &fleet.canisters, fleet.resupply).is_ok()
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub tree: BspTree,
    pub score: f64,
    pub iterations: usize,
}

struct Scored {
    tree: BspTree,
    score: f64,
    order: usize,
}

fn mix(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9) ^ c.wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rank(pool: &mut Vec<Scored>, keep: usize) {
    pool.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.tree.n_cuts().cmp(&b.tree.n_cuts()))
            .then(a.order.cmp(&b.order))
    });
    let mut seen = HashSet::new();
    pool.retain(|s| seen.insert(s.tree.signature()));
    pool.truncate(keep);
}

/// Beam search over cut sequences; returns the best terminal tree found.
pub fn beam_search(mesh: &TriangleMesh, cfg: &ChunkerConfig, fleet: &FleetSpec, seed: u64) -> Result<SearchOutcome> {
    cfg.validate()?;
    fleet.validate()?;
    let root = BspTree::new(mesh.clone())?;
    let v_cr = cfg.v_cr_fraction * root.root_mesh().signed_volume() * M3_TO_L;
    let score = |t: &BspTree| -> Result<f64> { Ok(tree_heuristic(t, &cfg.weights, v_cr, cfg.line_width)?.total()) };

    let mut beam = vec![Scored { score: score(&root)?, tree: root, order: 0 }];
    let mut best: Option<(f64, usize, BspTree)> = None;
    let mut next_plane = 1u32;
    for iter in 0..cfg.max_iterations {
        for s in &beam {
            if is_terminal(&s.tree, fleet) && best.as_ref().is_none_or(|(b, n, _)| (s.score, s.tree.n_cuts()) < (*b, *n)) {
                best = Some((s.score, s.tree.n_cuts(), s.tree.clone()));
            }
        }
        if beam.iter().all(|s| is_terminal(&s.tree, fleet)) {
            let (score, _, tree) = best.expect("terminal beam has an incumbent");
            return Ok(SearchOutcome { tree, score, iterations: iter });
        }

        let mut jobs: Vec<(usize, CutPlane)> = Vec::new();
        for (ti, s) in beam.iter().enumerate() {
            for (li, leaf) in s.tree.leaf_nodes().into_iter().enumerate() {
                let chunk = s.tree.leaf_chunk(leaf);
                let mut normals = vec![Vec3::z()];
                normals.extend(sample_normals(&cfg.sampler, mix(seed, iter as u64, ti as u64, li as u64)));
                for n in normals {
                    let mut family = plane_family(&n, &chunk.mesh, cfg.sampler.planes_per_family)?;
                    if let Some(l_h) = cfg.sampler.layer_height {
                        family = snap_to_layers(family, &chunk.mesh, l_h);
                    }
                    for p in family {
                        jobs.push((ti, p.with_id(PlaneId(next_plane))));
                        next_plane += 1;
                    }
                }
            }
        }
        let results: Vec<Option<(usize, BspTree, f64)>> = jobs
            .par_iter()
            .map(|(ti, p)| -> Result<Option<(usize, BspTree, f64)>> {
                match beam[*ti].tree.apply_cut(p)? {
                    Some(t) => {
                        let sc = score(&t)?;
                        Ok(Some((*ti, t, sc)))
                    }
                    None => Ok(None),
                }
            })
            .collect::<Result<_>>()?;

        let mut pool: Vec<Scored> = Vec::new();
        let mut order = 0usize;
        let mut per_tree: Vec<Vec<Scored>> = (0..beam.len()).map(|_| Vec::new()).collect();
        for (ti, tree, sc) in results.into_iter().flatten() {
            per_tree[ti].push(Scored { tree, score: sc, order });
            order += 1;
        }
        for (ti, mut ext) in per_tree.into_iter().enumerate() {
            rank(&mut ext, cfg.w_inner);
            let parent = &beam[ti];
            if is_terminal(&parent.tree, fleet) {
                pool.push(Scored { tree: parent.tree.clone(), score: parent.score, order: ti });
            }
            for mut e in ext {
                e.order += beam.len();
                pool.push(e);
            }
        }
        rank(&mut pool, cfg.w_outer);
        if pool.is_empty() {
            break;
        }
        beam = pool;
    }
    for s in &beam {
        if is_terminal(&s.tree, fleet) && best.as_ref().is_none_or(|(b, n, _)| (s.score, s.tree.n_cuts()) < (*b, *n)) {
            best = Some((s.score, s.tree.n_cuts(), s.tree.clone()));
        }
    }
    match best {
        Some((score, _, tree)) => Ok(SearchOutcome { tree, score, iterations: cfg.max_iterations }),
        None => Err(ChunkerError::NoTerminalTree(cfg.max_iterations)),
    }
}
