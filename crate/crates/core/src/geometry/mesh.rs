use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::polygon::triangulate_with_holes;
use super::{GeometryError, PlaneId, Result, Side, Vec3, M3_TO_L};

/// Where a face came from: the original surface or the cap of a planar cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceTag {
    Surface,
    /// Cap generated by `plane`; `side` is the half-space the owning solid lies in.
    Cut { plane: PlaneId, side: Side },
}

impl FaceTag {
    pub fn cut_plane(&self) -> Option<(PlaneId, Side)> {
        match *self {
            FaceTag::Cut { plane, side } => Some((plane, side)),
            FaceTag::Surface => None,
        }
    }
}

/// Indexed triangle mesh with per-face provenance. Faces are wound
/// counter-clockwise when seen from outside.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub tags: Vec<FaceTag>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<TriangleMesh> {
        let tags = vec![FaceTag::Surface; faces.len()];
        TriangleMesh::with_tags(vertices, faces, tags)
    }

    pub fn with_tags(
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        tags: Vec<FaceTag>,
    ) -> Result<TriangleMesh> {
        assert_eq!(faces.len(), tags.len(), "one tag per face");
        let n = vertices.len() as u32;
        if let Some(bad) = faces.iter().flatten().find(|&&i| i >= n) {
            return Err(GeometryError::InvalidIndex(*bad));
        }
        Ok(TriangleMesh { vertices, faces, tags })
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Non-normalized face normal (twice the area vector).
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Number of directed edges without an opposite partner.
    pub fn unmatched_edges(&self) -> usize {
        let mut count: HashMap<(u32, u32), i32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a < b {
                    *count.entry((a, b)).or_default() += 1;
                } else {
                    *count.entry((b, a)).or_default() -= 1;
                }
            }
        }
        count.values().map(|c| c.unsigned_abs() as usize).sum()
    }

    /// Every edge is shared by exactly one face in each direction.
    pub fn is_closed(&self) -> bool {
        let mut count: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                *count.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
            }
        }
        count
            .iter()
            .all(|(&(a, b), &c)| c == 1 && count.get(&(b, a)) == Some(&1))
    }

    pub fn ensure_closed(&self) -> Result<()> {
        if self.is_empty() || self.is_closed() {
            Ok(())
        } else {
            Err(GeometryError::NonManifoldInput(self.unmatched_edges().max(1)))
        }
    }

    /// Divergence-theorem volume in m^3; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        // Shift to a local origin for accuracy on meshes far from zero.
        let o = self.vertices.first().copied().unwrap_or_else(Vec3::zeros);
        self.faces
            .iter()
            .map(|f| {
                let a = self.vertices[f[0] as usize] - o;
                let b = self.vertices[f[1] as usize] - o;
                let c = self.vertices[f[2] as usize] - o;
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Volume of a closed mesh in m^3.
    pub fn volume(&self) -> Result<f64> {
        self.ensure_closed()?;
        Ok(self.signed_volume())
    }

    pub fn volume_liters(&self) -> Result<f64> {
        Ok(self.volume()? * M3_TO_L)
    }

    /// Volume centroid; falls back to the vertex mean for flat meshes.
    pub fn centroid(&self) -> Vec3 {
        let o = self.vertices.first().copied().unwrap_or_else(Vec3::zeros);
        let mut acc = Vec3::zeros();
        let mut vol = 0.0;
        for f in &self.faces {
            let a = self.vertices[f[0] as usize] - o;
            let b = self.vertices[f[1] as usize] - o;
            let c = self.vertices[f[2] as usize] - o;
            let v = a.dot(&b.cross(&c)) / 6.0;
            vol += v;
            acc += v * (a + b + c) / 4.0;
        }
        if vol.abs() > 1e-15 {
            o + acc / vol
        } else if self.vertices.is_empty() {
            Vec3::zeros()
        } else {
            self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
        }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Range of `n . v` over the vertices that are referenced by faces.
    pub fn support_interval(&self, n: &Vec3) -> Option<(f64, f64)> {
        let mut it = self.faces.iter().flatten().map(|&i| n.dot(&self.vertices[i as usize]));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    pub fn translated(&self, t: Vec3) -> TriangleMesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v += t;
        }
        m
    }

    /// Disjoint union of two meshes (no welding).
    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        self.tags.extend_from_slice(&other.tags);
    }

    /// Drops vertices not referenced by any face.
    pub fn compact(&mut self) {
        let mut map = vec![u32::MAX; self.vertices.len()];
        let mut verts = Vec::new();
        for f in &mut self.faces {
            for i in f.iter_mut() {
                let slot = &mut map[*i as usize];
                if *slot == u32::MAX {
                    *slot = verts.len() as u32;
                    verts.push(self.vertices[*i as usize]);
                }
                *i = *slot;
            }
        }
        self.vertices = verts;
    }

    /// Merges vertices closer than `tol` and drops faces that collapse.
    pub fn weld(&mut self, tol: f64) {
        let cell = tol.max(1e-12) * 4.0;
        let key = |p: &Vec3| {
            (
                (p.x / cell).floor() as i64,
                (p.y / cell).floor() as i64,
                (p.z / cell).floor() as i64,
            )
        };
        let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        let mut map = Vec::with_capacity(self.vertices.len());
        let mut verts: Vec<Vec3> = Vec::new();
        for p in &self.vertices {
            let (kx, ky, kz) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                            for &j in list {
                                if (verts[j as usize] - p).norm() <= tol {
                                    found = Some(j);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            let idx = found.unwrap_or_else(|| {
                let j = verts.len() as u32;
                verts.push(*p);
                grid.entry((kx, ky, kz)).or_default().push(j);
                j
            });
            map.push(idx);
        }
        self.vertices = verts;
        let mut faces = Vec::with_capacity(self.faces.len());
        let mut tags = Vec::with_capacity(self.faces.len());
        for (f, t) in self.faces.iter().zip(&self.tags) {
            let g = [map[f[0] as usize], map[f[1] as usize], map[f[2] as usize]];
            if g[0] != g[1] && g[1] != g[2] && g[0] != g[2] {
                faces.push(g);
                tags.push(*t);
            }
        }
        self.faces = faces;
        self.tags = tags;
        self.compact();
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn cuboid(lo: Vec3, hi: Vec3) -> TriangleMesh {
        let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let vertices = vec![
            v(lo.x, lo.y, lo.z),
            v(hi.x, lo.y, lo.z),
            v(hi.x, hi.y, lo.z),
            v(lo.x, hi.y, lo.z),
            v(lo.x, lo.y, hi.z),
            v(hi.x, lo.y, hi.z),
            v(hi.x, hi.y, hi.z),
            v(lo.x, hi.y, hi.z),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriangleMesh::new(vertices, faces).expect("valid cuboid")
    }

    /// Prism obtained by extruding a planar region (outer ring plus holes,
    /// any winding) from `z0` to `z1`.
    pub fn extrude(outer: &[[f64; 2]], holes: &[Vec<[f64; 2]>], z0: f64, z1: f64) -> TriangleMesh {
        let ccw = |ring: &[[f64; 2]], want_ccw: bool| -> Vec<[f64; 2]> {
            let mut r = ring.to_vec();
            if (ring_area(&r) > 0.0) != want_ccw {
                r.reverse();
            }
            r
        };
        let mut rings = vec![ccw(outer, true)];
        rings.extend(holes.iter().map(|h| ccw(h, false)));

        let mut pts2: Vec<[f64; 2]> = Vec::new();
        let mut ring_idx: Vec<Vec<usize>> = Vec::new();
        for r in &rings {
            let start = pts2.len();
            pts2.extend_from_slice(r);
            ring_idx.push((start..start + r.len()).collect());
        }
        let n = pts2.len() as u32;
        let mut vertices: Vec<Vec3> = pts2.iter().map(|p| Vec3::new(p[0], p[1], z0)).collect();
        vertices.extend(pts2.iter().map(|p| Vec3::new(p[0], p[1], z1)));

        let tris = triangulate_with_holes(&pts2, &ring_idx[0], &ring_idx[1..]);
        let mut faces = Vec::new();
        for t in &tris {
            let (a, b, c) = (t[0] as u32, t[1] as u32, t[2] as u32);
            faces.push([a + n, b + n, c + n]);
            faces.push([a, c, b]);
        }
        for ring in &ring_idx {
            for k in 0..ring.len() {
                let a = ring[k] as u32;
                let b = ring[(k + 1) % ring.len()] as u32;
                faces.push([a, b, b + n]);
                faces.push([a, b + n, a + n]);
            }
        }
        TriangleMesh::new(vertices, faces).expect("valid extrusion")
    }
}

/// Shoelace signed area of a closed 2D ring.
pub(crate) fn ring_area(r: &[[f64; 2]]) -> f64 {
    let n = r.len();
    (0..n)
        .map(|i| {
            let (p, q) = (r[i], r[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}
