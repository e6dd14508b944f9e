use std::sync::Arc;

use super::Result;
use crate::geometry::{
    compute_obb, split_mesh, CutPlane, GeometryError, Side, TriangleMesh, M3_TO_L,
};

/// A leaf of the decomposition.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub id: usize,
    pub mesh: Arc<TriangleMesh>,
    /// Cuts on the path from the root, with the side this chunk lies on.
    pub generating_cuts: Vec<(CutPlane, Side)>,
    /// Volume in liters.
    pub volume: f64,
    /// Smallest full edge length of the oriented bounding box, m.
    pub min_extent: f64,
    /// Planes introduced after decomposition (interlocking steps).
    pub auxiliary_planes: Vec<CutPlane>,
}

impl Chunk {
    pub fn new(id: usize, mesh: Arc<TriangleMesh>, generating_cuts: Vec<(CutPlane, Side)>) -> Result<Chunk> {
        let volume = mesh.signed_volume() * M3_TO_L;
        let min_extent = compute_obb(&mesh)?.min_extent();
        Ok(Chunk { id, mesh, generating_cuts, volume, min_extent, auxiliary_planes: Vec::new() })
    }

    pub fn plane(&self, id: crate::geometry::PlaneId) -> Option<&CutPlane> {
        self.generating_cuts
            .iter()
            .map(|(p, _)| p)
            .chain(self.auxiliary_planes.iter())
            .find(|p| p.id == id)
    }

    /// Same chunk with a new mesh; cached volume and extent are refreshed.
    pub fn with_mesh(&self, mesh: TriangleMesh) -> Result<Chunk> {
        let mut c = Chunk::new(self.id, Arc::new(mesh), self.generating_cuts.clone())?;
        c.auxiliary_planes = self.auxiliary_planes.clone();
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub enum BspNode {
    Internal { plane: CutPlane, mesh: Arc<TriangleMesh>, negative: usize, positive: usize },
    Leaf(Arc<Chunk>),
}

/// Binary partition of a mesh; the negative child of every cut is listed first.
#[derive(Debug, Clone)]
pub struct BspTree {
    pub nodes: Vec<BspNode>,
    pub root: usize,
    /// Distinct cut planes in the order they were applied.
    pub planes: Vec<CutPlane>,
}

/// Margin below which a plane is treated as missing a leaf.
const TOUCH_EPS: f64 = 1e-9;

impl BspTree {
    pub fn new(mesh: TriangleMesh) -> Result<BspTree> {
        mesh.ensure_closed()?;
        if mesh.is_empty() {
            return Err(GeometryError::EmptyMesh.into());
        }
        let chunk = Chunk::new(0, Arc::new(mesh), Vec::new())?;
        Ok(BspTree { nodes: vec![BspNode::Leaf(Arc::new(chunk))], root: 0, planes: Vec::new() })
    }

    /// Leaf node indices, negative side first.
    pub fn leaf_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            match &self.nodes[i] {
                BspNode::Leaf(_) => out.push(i),
                BspNode::Internal { negative, positive, .. } => {
                    stack.push(*positive);
                    stack.push(*negative);
                }
            }
        }
        out
    }

    /// The chunk stored at leaf node `i`.
    pub fn leaf_chunk(&self, i: usize) -> &Chunk {
        self.leaf(i)
    }

    fn leaf(&self, i: usize) -> &Arc<Chunk> {
        match &self.nodes[i] {
            BspNode::Leaf(c) => c,
            BspNode::Internal { .. } => unreachable!("not a leaf"),
        }
    }

    /// Chunks numbered in leaf order.
    pub fn chunks(&self) -> Vec<Chunk> {
        self.leaf_nodes()
            .into_iter()
            .enumerate()
            .map(|(id, i)| Chunk { id, ..(**self.leaf(i)).clone() })
            .collect()
    }

    pub fn leaf_volumes(&self) -> Vec<f64> {
        self.leaf_nodes().into_iter().map(|i| self.leaf(i).volume).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes().len()
    }

    pub fn n_cuts(&self) -> usize {
        self.planes.len()
    }

    pub fn root_mesh(&self) -> &TriangleMesh {
        match &self.nodes[self.root] {
            BspNode::Leaf(c) => &c.mesh,
            BspNode::Internal { mesh, .. } => mesh,
        }
    }

    /// Applies `plane` to every leaf it properly splits. Returns `None` when
    /// no leaf changes.
    pub fn apply_cut(&self, plane: &CutPlane) -> Result<Option<BspTree>> {
        let mut next = self.clone();
        let mut changed = false;
        for i in self.leaf_nodes() {
            let chunk = self.leaf(i).clone();
            let Some((lo, hi)) = chunk.mesh.support_interval(&plane.normal) else { continue };
            let d = plane.offset();
            if d <= lo + TOUCH_EPS || d >= hi - TOUCH_EPS {
                continue;
            }
            let (neg, pos) = match split_mesh(&chunk.mesh, plane) {
                Ok(parts) => parts,
                Err(GeometryError::DegenerateCut(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            if neg.is_empty() || pos.is_empty() {
                continue;
            }
            let mk = |mesh: TriangleMesh, side: Side| -> Result<Arc<Chunk>> {
                let mut cuts = chunk.generating_cuts.clone();
                cuts.push((*plane, side));
                Ok(Arc::new(Chunk::new(0, Arc::new(mesh), cuts)?))
            };
            let n_idx = next.nodes.len();
            next.nodes.push(BspNode::Leaf(mk(neg, Side::Negative)?));
            next.nodes.push(BspNode::Leaf(mk(pos, Side::Positive)?));
            next.nodes[i] = BspNode::Internal {
                plane: *plane,
                mesh: chunk.mesh.clone(),
                negative: n_idx,
                positive: n_idx + 1,
            };
            changed = true;
        }
        if !changed {
            return Ok(None);
        }
        next.planes.push(*plane);
        Ok(Some(next))
    }

    /// Order-independent fingerprint used to merge equivalent trees.
    pub fn signature(&self) -> (usize, Vec<i64>) {
        let mut v: Vec<i64> = self.leaf_volumes().iter().map(|x| (x * 1e6).round() as i64).collect();
        v.sort_unstable();
        (self.n_cuts(), v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PlaneId, Vec3};

    #[test]
    fn cube_cut_produces_ordered_leaves() {
        let cube = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let t = BspTree::new(cube).unwrap();
        assert_eq!(t.n_leaves(), 1);
        let t = t.apply_cut(&CutPlane::horizontal(PlaneId(1), 0.25)).unwrap().unwrap();
        let vols = t.leaf_volumes();
        assert!((vols[0] - 250.0).abs() < 1e-9 && (vols[1] - 750.0).abs() < 1e-9);
        let chunks = t.chunks();
        assert_eq!(chunks[0].generating_cuts[0].1, Side::Negative);
        assert_eq!(chunks[1].id, 1);
    }

    #[test]
    fn missing_plane_is_no_extension() {
        let cube = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let t = BspTree::new(cube).unwrap();
        assert!(t.apply_cut(&CutPlane::horizontal(PlaneId(1), 1.0)).unwrap().is_none());
    }

    #[test]
    fn cut_crosses_several_leaves() {
        let cube = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let t = BspTree::new(cube).unwrap();
        let t = t.apply_cut(&CutPlane::horizontal(PlaneId(1), 0.5)).unwrap().unwrap();
        let t = t
            .apply_cut(&CutPlane::new(PlaneId(2), Vec3::x(), Vec3::new(0.5, 0.0, 0.0)))
            .unwrap()
            .unwrap();
        assert_eq!(t.n_leaves(), 4);
        assert_eq!(t.n_cuts(), 2);
        let total: f64 = t.leaf_volumes().iter().sum();
        assert!((total - 1000.0).abs() < 1e-9);
    }
}
