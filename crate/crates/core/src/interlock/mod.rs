//! Staircase interlocking of chunks that meet on an inclined cut.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{Chunk, ChunkerError};
use crate::depgraph::{cut_faces, DependencyGraph, DepgraphError, MAX_DEPENDENCY_TILT_DEG};
use crate::geometry::{
    face_polygon_overlap, fuse, plane_distance, split_mesh, CutPlane, FaceTag, GeometryError, PlaneId, Side,
    TriangleMesh, Vec3, COPLANAR_EPS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterlockError {
    #[error("interface of chunks {top} on {bottom} spans less than one layer")]
    DegenerateInterface { bottom: usize, top: usize },
    #[error("stepping chunks {top} on {bottom} leaves a non-manifold solid")]
    NonManifoldResult { bottom: usize, top: usize },
    #[error("layer height must be positive")]
    InvalidLayerHeight,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Depgraph(#[from] DepgraphError),
    #[error(transparent)]
    Chunker(#[from] ChunkerError),
}

pub type Result<T> = std::result::Result<T, InterlockError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    pub bottom: usize,
    pub top: usize,
    pub plane: CutPlane,
}

fn is_inclined(p: &CutPlane) -> bool {
    !p.is_ground() && p.normal.z > MAX_DEPENDENCY_TILT_DEG.to_radians().cos()
}

/// Dependency edges whose shared cut is inclined.
pub fn contact_pairs(chunks: &[Chunk], graph: &DependencyGraph) -> Result<Vec<ContactPair>> {
    let mut out = Vec::new();
    for &(top, bottom) in &graph.edges {
        let ft = cut_faces(&chunks[top])?;
        let fb = cut_faces(&chunks[bottom])?;
        let shared = ft.iter().filter(|f| f.side == Side::Positive && is_inclined(&f.plane)).find_map(|u| {
            fb.iter()
                .filter(|l| l.side == Side::Negative && l.plane.id == u.plane.id)
                .find(|l| {
                    let mut s = u.face.clone();
                    s.origin = l.face.origin;
                    face_polygon_overlap(&l.face, &s).unwrap_or(0.0) > 1e-9
                })
                .map(|_| u.plane)
        });
        if let Some(plane) = shared {
            out.push(ContactPair { bottom, top, plane });
        }
    }
    out.sort_by_key(|p| (p.bottom, p.top));
    Ok(out)
}

/// Source of fresh plane identities.
#[derive(Debug, Clone)]
pub struct PlaneIds(u32);

impl PlaneIds {
    pub fn after(chunks: &[Chunk]) -> PlaneIds {
        let max = chunks
            .iter()
            .flat_map(|c| c.generating_cuts.iter().map(|(p, _)| p.id.0).chain(c.auxiliary_planes.iter().map(|p| p.id.0)))
            .max()
            .unwrap_or(0);
        PlaneIds(max + 1)
    }

    pub fn next(&mut self) -> PlaneId {
        self.0 += 1;
        PlaneId(self.0 - 1)
    }
}

fn face_z_range(mesh: &TriangleMesh, plane: PlaneId, side: Side) -> Option<(f64, f64)> {
    let mut range: Option<(f64, f64)> = None;
    for (f, tag) in mesh.tags.iter().enumerate() {
        if *tag == (FaceTag::Cut { plane, side }) {
            for v in mesh.triangle(f) {
                range = Some(range.map_or((v.z, v.z), |(lo, hi)| (lo.min(v.z), hi.max(v.z))));
            }
        }
    }
    range
}

/// Result of stepping one interface.
#[derive(Debug, Clone)]
pub struct SteppedPair {
    pub bottom: Chunk,
    pub top: Chunk,
    /// Area of the inclined face on the top chunk before stepping, m^2.
    pub inclined_area: f64,
    /// Treads plus risers of the staircase that replaced it, m^2.
    pub stepped_area: f64,
}

fn tagged_area(mesh: &TriangleMesh, tag: FaceTag) -> f64 {
    (0..mesh.faces.len()).filter(|&f| mesh.tags[f] == tag).map(|f| mesh.face_area(f)).sum()
}

/// Upward faces lying on the mesh's highest plane.
fn top_area(mesh: &TriangleMesh) -> f64 {
    let Some((_, hi)) = mesh.bounds() else { return 0.0 };
    (0..mesh.faces.len())
        .filter(|&f| {
            let n = mesh.face_cross(f);
            n.z > 0.0 && n.z >= (1.0 - 1e-9) * n.norm() && mesh.triangle(f).iter().all(|v| (v.z - hi.z).abs() < 1e-9)
        })
        .map(|f| mesh.face_area(f))
        .sum()
}

/// Replaces the inclined interface between `bottom` and `top` by steps on
/// the layer grid `k * l_h`: per layer, the part of `top` between the
/// inclined face and a vertical plane through the face's lowest point in
/// that layer moves to `bottom`.
pub fn interlock_pair(
    bottom: &Chunk,
    top: &Chunk,
    plane: &CutPlane,
    l_h: f64,
    ids: &mut PlaneIds,
) -> Result<SteppedPair> {
    if !(l_h > 0.0) {
        return Err(InterlockError::InvalidLayerHeight);
    }
    let inclined_area = tagged_area(&top.mesh, FaceTag::Cut { plane: plane.id, side: Side::Positive });
    if !is_inclined(plane) {
        return Ok(SteppedPair { bottom: bottom.clone(), top: top.clone(), inclined_area, stepped_area: inclined_area });
    }
    let degenerate = InterlockError::DegenerateInterface { bottom: bottom.id, top: top.id };
    let broken = InterlockError::NonManifoldResult { bottom: bottom.id, top: top.id };
    let (zlo, zhi) = face_z_range(&top.mesh, plane.id, Side::Positive).ok_or(degenerate.clone())?;
    let eps = 1e-9;
    let boundaries: Vec<f64> = ((zlo / l_h).floor() as i64 + 1..)
        .map(|k| k as f64 * l_h)
        .take_while(|&z| z < zhi - eps)
        .filter(|&z| z > zlo + eps)
        .collect();
    if zhi - zlo < 1e-6 {
        return Err(degenerate);
    }
    // Material above the layer that holds the interface's top stays put.
    let cap = ((zhi - eps) / l_h).ceil() * l_h;

    let n = plane.normal;
    let horiz = Vec3::new(n.x, n.y, 0.0);
    let n_h = horiz.norm();
    let h = horiz / n_h;
    let c = plane.offset();
    // Horizontal position of the interface at height z, along h.
    let s_at = |z: f64| (c - n.z * z) / n_h;

    let mut aux = Vec::new();
    let mut slabs: Vec<(TriangleMesh, f64)> = Vec::new();
    let mut rest = (*top.mesh).clone();
    let mut lower_edge = zlo;
    for &z in &boundaries {
        let zp = CutPlane::horizontal(ids.next(), z);
        aux.push(zp);
        let (below, above) = split_mesh(&rest, &zp)?;
        if !below.is_empty() {
            slabs.push((below, lower_edge));
        }
        rest = above;
        lower_edge = z;
    }
    let mut untouched = None;
    if top.mesh.bounds().is_some_and(|(_, hi)| cap < hi.z - eps) {
        let zp = CutPlane::horizontal(ids.next(), cap);
        aux.push(zp);
        let (below, above) = split_mesh(&rest, &zp)?;
        rest = below;
        untouched = Some(above).filter(|m| !m.is_empty());
    }
    if !rest.is_empty() {
        slabs.push((rest, lower_edge));
    }

    let mut new_bottom = (*bottom.mesh).clone();
    let mut new_top: Option<TriangleMesh> = None;
    let mut stepped_area = 0.0;
    for (slab, z0) in slabs {
        let s = s_at(z0);
        let vp = CutPlane::new(ids.next(), h, h * s);
        aux.push(vp);
        let (wedge, keep) = split_mesh(&slab, &vp)?;
        if !wedge.is_empty() {
            stepped_area += tagged_area(&wedge, FaceTag::Cut { plane: vp.id, side: Side::Negative }) + top_area(&wedge);
            new_bottom = fuse(&new_bottom, &wedge).map_err(|_| broken.clone())?;
        }
        if !keep.is_empty() {
            new_top = Some(match new_top {
                None => keep,
                Some(t) => fuse(&t, &keep).map_err(|_| broken.clone())?,
            });
        }
    }
    if let Some(above) = untouched {
        new_top = Some(match new_top {
            None => above,
            Some(t) => fuse(&t, &above).map_err(|_| broken.clone())?,
        });
    }
    let new_top = new_top.ok_or(degenerate)?;
    if !new_bottom.is_closed() || !new_top.is_closed() {
        return Err(broken);
    }

    let mut b = bottom.with_mesh(new_bottom)?;
    let mut t = top.with_mesh(new_top)?;
    b.auxiliary_planes.extend(aux.iter().copied());
    t.auxiliary_planes.extend(aux.iter().copied());
    Ok(SteppedPair { bottom: b, top: t, inclined_area, stepped_area })
}

/// Area over which `a` and `b` touch through opposite coplanar cut faces.
pub fn contact_area(a: &Chunk, b: &Chunk) -> Result<f64> {
    let fa = cut_faces(a)?;
    let fb = cut_faces(b)?;
    let mut area = 0.0;
    for x in &fa {
        for y in fb.iter().filter(|y| y.side != x.side) {
            if !matches!(plane_distance(&x.plane, &y.plane), Ok(d) if d <= COPLANAR_EPS) {
                continue;
            }
            let mut s = y.face.clone();
            s.origin = x.face.origin;
            area += face_polygon_overlap(&x.face, &s).unwrap_or(0.0);
        }
    }
    Ok(area)
}

#[derive(Debug, Clone)]
pub struct InterlockReport {
    pub chunks: Vec<Chunk>,
    pub processed: Vec<ContactPair>,
    /// `(inclined, stepped)` interface areas of each processed pair.
    pub areas: Vec<(f64, f64)>,
    /// Pairs left unchanged: no interface height, or stepping would make
    /// chunks touch along a bare edge.
    pub skipped: Vec<ContactPair>,
}

/// Interlocks every inclined contact, in (bottom, top) order.
pub fn interlock_all(chunks: &[Chunk], graph: &DependencyGraph, l_h: f64) -> Result<InterlockReport> {
    let pairs = contact_pairs(chunks, graph)?;
    let mut out = chunks.to_vec();
    let mut ids = PlaneIds::after(chunks);
    let mut processed = Vec::new();
    let mut areas = Vec::new();
    let mut skipped = Vec::new();
    for p in pairs {
        match interlock_pair(&out[p.bottom], &out[p.top], &p.plane, l_h, &mut ids) {
            Ok(r) => {
                areas.push((r.inclined_area, r.stepped_area));
                out[p.bottom] = r.bottom;
                out[p.top] = r.top;
                processed.push(p);
            }
            Err(InterlockError::DegenerateInterface { .. } | InterlockError::NonManifoldResult { .. }) => {
                skipped.push(p)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(InterlockReport { chunks: out, processed, areas, skipped })
}
