use std::collections::HashMap;

use super::polygon::{polygon_area, triangulate_with_holes, PlaneFrame};
use super::{CutPlane, FaceTag, GeometryError, Result, Side, TriangleMesh, Vec3};

/// Relative volume below which a non-empty split half counts as a sliver.
const SLIVER_REL: f64 = 1e-9;

/// Polygonal cross-section of a mesh: outer rings are counter-clockwise and
/// holes clockwise in `frame`.
#[derive(Debug, Clone)]
pub struct Section {
    pub frame: PlaneFrame,
    pub regions: Vec<SectionRegion>,
}

#[derive(Debug, Clone, Default)]
pub struct SectionRegion {
    pub outer: Vec<[f64; 2]>,
    pub holes: Vec<Vec<[f64; 2]>>,
}

impl Section {
    pub fn area(&self) -> f64 {
        self.regions
            .iter()
            .map(|r| polygon_area(&r.outer) + r.holes.iter().map(|h| polygon_area(h)).sum::<f64>())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

struct SplitFaces {
    vertices: Vec<Vec3>,
    neg: (Vec<[u32; 3]>, Vec<FaceTag>),
    pos: (Vec<[u32; 3]>, Vec<FaceTag>),
}

fn snap_tol(mesh: &TriangleMesh) -> f64 {
    let diag = mesh.bounds().map_or(1.0, |(lo, hi)| (hi - lo).norm());
    1e-10 * diag.max(1.0)
}

fn sign_of(d: f64) -> i8 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

fn split_faces(mesh: &TriangleMesh, normal: &Vec3, origin: &Vec3) -> SplitFaces {
    let tol = snap_tol(mesh);
    let dist: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|v| {
            let d = normal.dot(&(v - origin));
            if d.abs() <= tol {
                0.0
            } else {
                d
            }
        })
        .collect();
    let mut vertices = mesh.vertices.clone();
    let mut edge_cache: HashMap<(u32, u32), u32> = HashMap::new();
    let mut neg = (Vec::new(), Vec::new());
    let mut pos = (Vec::new(), Vec::new());

    for (f, tag) in mesh.faces.iter().zip(&mesh.tags) {
        let s = [
            sign_of(dist[f[0] as usize]),
            sign_of(dist[f[1] as usize]),
            sign_of(dist[f[2] as usize]),
        ];
        let has_neg = s.contains(&-1);
        let has_pos = s.contains(&1);
        if !has_neg && !has_pos {
            // Face lies in the plane: it bounds whichever side it faces away from.
            let [a, b, c] = [
                mesh.vertices[f[0] as usize],
                mesh.vertices[f[1] as usize],
                mesh.vertices[f[2] as usize],
            ];
            if (b - a).cross(&(c - a)).dot(normal) > 0.0 {
                neg.0.push(*f);
                neg.1.push(*tag);
            } else {
                pos.0.push(*f);
                pos.1.push(*tag);
            }
            continue;
        }
        if !has_pos {
            neg.0.push(*f);
            neg.1.push(*tag);
            continue;
        }
        if !has_neg {
            pos.0.push(*f);
            pos.1.push(*tag);
            continue;
        }
        let mut pn: Vec<u32> = Vec::with_capacity(4);
        let mut pp: Vec<u32> = Vec::with_capacity(4);
        for k in 0..3 {
            let (i, j) = (f[k], f[(k + 1) % 3]);
            let (si, sj) = (s[k], s[(k + 1) % 3]);
            if si <= 0 {
                pn.push(i);
            }
            if si >= 0 {
                pp.push(i);
            }
            if si * sj < 0 {
                let key = (i.min(j), i.max(j));
                let idx = *edge_cache.entry(key).or_insert_with(|| {
                    let (lo, hi) = (key.0 as usize, key.1 as usize);
                    let t = dist[lo] / (dist[lo] - dist[hi]);
                    let p = mesh.vertices[lo] + (mesh.vertices[hi] - mesh.vertices[lo]) * t;
                    vertices.push(p);
                    (vertices.len() - 1) as u32
                });
                pn.push(idx);
                pp.push(idx);
            }
        }
        for (poly, out) in [(&pn, &mut neg), (&pp, &mut pos)] {
            for k in 1..poly.len().saturating_sub(1) {
                out.0.push([poly[0], poly[k], poly[k + 1]]);
                out.1.push(*tag);
            }
        }
    }
    SplitFaces { vertices, neg, pos }
}

/// Closed loops of the directed edges that close the open boundary of
/// `faces` (each boundary edge reversed).
pub(crate) fn cap_loops(faces: &[[u32; 3]]) -> Vec<Vec<u32>> {
    let mut count: HashMap<(u32, u32), i32> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *count.entry((a, b)).or_default() += 1;
            *count.entry((b, a)).or_default() -= 1;
        }
    }
    // Remaining positive entries (a, b) are unmatched boundary edges; the cap
    // needs (b, a).
    let mut next: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut edges: Vec<(u32, u32)> = count
        .iter()
        .filter(|(_, &c)| c > 0)
        .flat_map(|(&(a, b), &c)| std::iter::repeat((b, a)).take(c as usize))
        .collect();
    edges.sort_unstable();
    for &(a, b) in &edges {
        next.entry(a).or_default().push(b);
    }
    for v in next.values_mut() {
        v.reverse();
    }
    let mut loops = Vec::new();
    for &(start, _) in &edges {
        while next.get(&start).is_some_and(|v| !v.is_empty()) {
            let mut ring = vec![start];
            let mut cur = next.get_mut(&start).unwrap().pop().unwrap();
            let mut guard = 0;
            while cur != start && guard <= edges.len() {
                ring.push(cur);
                match next.get_mut(&cur).and_then(|v| v.pop()) {
                    Some(n) => cur = n,
                    None => break,
                }
                guard += 1;
            }
            if cur == start && ring.len() >= 3 {
                loops.push(ring);
            }
        }
    }
    loops
}

fn point_in_ring(p: [f64; 2], ring: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Groups loops into outer rings (positive area) with their holes.
pub(crate) fn group_loops(pts: &[[f64; 2]], loops: &[Vec<usize>]) -> Vec<(usize, Vec<usize>)> {
    let areas: Vec<f64> = loops
        .iter()
        .map(|l| polygon_area(&l.iter().map(|&i| pts[i]).collect::<Vec<_>>()))
        .collect();
    let mut groups: Vec<(usize, Vec<usize>)> = (0..loops.len())
        .filter(|&i| areas[i] > 0.0)
        .map(|i| (i, Vec::new()))
        .collect();
    for h in (0..loops.len()).filter(|&i| areas[i] < 0.0) {
        let ring = |i: usize| loops[i].iter().map(|&k| pts[k]).collect::<Vec<_>>();
        // Probe slightly inside the hole edge so shared vertices do not confuse the test.
        let a = pts[loops[h][0]];
        let b = pts[loops[h][1]];
        let mid = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
        let owner = groups
            .iter()
            .enumerate()
            .filter(|(_, (o, _))| point_in_ring(mid, &ring(*o)))
            .min_by(|x, y| areas[x.1 .0].total_cmp(&areas[y.1 .0]))
            .map(|(gi, _)| gi);
        if let Some(gi) = owner {
            groups[gi].1.push(h);
        }
    }
    groups
}

/// Triangulates cap loops whose outward normal is `normal`.
fn triangulate_cap(vertices: &[Vec3], loops: &[Vec<u32>], normal: &Vec3) -> Vec<[u32; 3]> {
    if loops.is_empty() {
        return Vec::new();
    }
    let frame = PlaneFrame::new(vertices[loops[0][0] as usize], *normal);
    let mut pts = Vec::new();
    let mut global = Vec::new();
    let mut local_loops = Vec::new();
    for l in loops {
        let start = pts.len();
        for &v in l {
            pts.push(frame.project(&vertices[v as usize]));
            global.push(v);
        }
        local_loops.push((start..pts.len()).collect::<Vec<usize>>());
    }
    let mut tris = Vec::new();
    for (outer, holes) in group_loops(&pts, &local_loops) {
        let hole_rings: Vec<Vec<usize>> = holes.iter().map(|&h| local_loops[h].clone()).collect();
        for t in triangulate_with_holes(&pts, &local_loops[outer], &hole_rings) {
            tris.push([global[t[0]] as u32, global[t[1]] as u32, global[t[2]] as u32]);
        }
    }
    tris
}

fn assemble(
    vertices: &[Vec3],
    mut faces: Vec<[u32; 3]>,
    mut tags: Vec<FaceTag>,
    cap_normal: Vec3,
    cap_tag: FaceTag,
) -> TriangleMesh {
    if faces.is_empty() {
        return TriangleMesh::default();
    }
    let loops = cap_loops(&faces);
    let cap = triangulate_cap(vertices, &loops, &cap_normal);
    tags.extend(std::iter::repeat(cap_tag).take(cap.len()));
    faces.extend(cap);
    let mut m = TriangleMesh { vertices: vertices.to_vec(), faces, tags };
    m.compact();
    m
}

/// Splits a closed mesh by `plane` into its negative and positive parts.
/// Cross-sections are capped and tagged with the plane identity and side.
pub fn split_mesh(mesh: &TriangleMesh, plane: &CutPlane) -> Result<(TriangleMesh, TriangleMesh)> {
    mesh.ensure_closed()?;
    let parts = split_faces(mesh, &plane.normal, &plane.origin);
    let neg = assemble(
        &parts.vertices,
        parts.neg.0,
        parts.neg.1,
        plane.normal,
        FaceTag::Cut { plane: plane.id, side: Side::Negative },
    );
    let pos = assemble(
        &parts.vertices,
        parts.pos.0,
        parts.pos.1,
        -plane.normal,
        FaceTag::Cut { plane: plane.id, side: Side::Positive },
    );
    let total = mesh.signed_volume().abs();
    for half in [&neg, &pos] {
        if !half.is_empty() {
            let v = half.signed_volume();
            if v <= SLIVER_REL * total.max(1e-30) {
                return Err(GeometryError::DegenerateCut(v));
            }
        }
    }
    Ok((neg, pos))
}

/// Cross-section of a closed mesh by the plane of `frame`.
pub fn cross_section(mesh: &TriangleMesh, frame: PlaneFrame) -> Section {
    let parts = split_faces(mesh, &frame.normal, &frame.origin);
    let loops = cap_loops(&parts.neg.0);
    let mut pts = Vec::new();
    let mut local_loops = Vec::new();
    for l in &loops {
        let start = pts.len();
        pts.extend(l.iter().map(|&v| frame.project(&parts.vertices[v as usize])));
        local_loops.push((start..pts.len()).collect::<Vec<usize>>());
    }
    let regions = group_loops(&pts, &local_loops)
        .into_iter()
        .map(|(o, hs)| SectionRegion {
            outer: local_loops[o].iter().map(|&i| pts[i]).collect(),
            holes: hs
                .iter()
                .map(|&h| local_loops[h].iter().map(|&i| pts[i]).collect())
                .collect(),
        })
        .collect();
    Section { frame, regions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlaneId;

    fn cube() -> TriangleMesh {
        TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn cube_split_in_half() {
        let p = CutPlane::horizontal(PlaneId(1), 0.5);
        let (neg, pos) = split_mesh(&cube(), &p).unwrap();
        assert!(neg.is_closed() && pos.is_closed());
        assert!((neg.volume().unwrap() - 0.5).abs() < 1e-12);
        assert!((pos.volume().unwrap() - 0.5).abs() < 1e-12);
        assert!(pos.tags.contains(&FaceTag::Cut { plane: PlaneId(1), side: Side::Positive }));
        assert!(neg.tags.contains(&FaceTag::Cut { plane: PlaneId(1), side: Side::Negative }));
    }

    #[test]
    fn missing_plane_leaves_one_side_empty() {
        let p = CutPlane::horizontal(PlaneId(1), 2.0);
        let (neg, pos) = split_mesh(&cube(), &p).unwrap();
        assert!(pos.is_empty());
        assert!((neg.volume().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plane_through_face_is_not_a_split() {
        let p = CutPlane::horizontal(PlaneId(1), 0.0);
        let (neg, pos) = split_mesh(&cube(), &p).unwrap();
        assert!(neg.is_empty());
        assert!((pos.volume().unwrap() - 1.0).abs() < 1e-12);
        let p = CutPlane::horizontal(PlaneId(1), 1.0);
        let (neg, pos) = split_mesh(&cube(), &p).unwrap();
        assert!(pos.is_empty());
        assert!((neg.volume().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oblique_cut_through_ring_caps_both_loops() {
        let outer = [[0.0, 0.0], [0.55, 0.0], [0.55, 0.55], [0.0, 0.55]];
        let hole = vec![[0.175, 0.175], [0.375, 0.175], [0.375, 0.375], [0.175, 0.375]];
        let m = TriangleMesh::extrude(&outer, &[hole], 0.0, 0.08);
        let p = CutPlane::new(PlaneId(3), Vec3::new(0.3, 0.2, 1.0), Vec3::new(0.27, 0.3, 0.04));
        let (neg, pos) = split_mesh(&m, &p).unwrap();
        assert!(neg.is_closed(), "neg unmatched {}", neg.unmatched_edges());
        assert!(pos.is_closed(), "pos unmatched {}", pos.unmatched_edges());
        let total = m.volume().unwrap();
        let sum = neg.volume().unwrap() + pos.volume().unwrap();
        assert!((sum - total).abs() <= 1e-9 * total);
    }

    #[test]
    fn ring_sliced_horizontally_has_hole() {
        let outer = [[0.0, 0.0], [0.55, 0.0], [0.55, 0.55], [0.0, 0.55]];
        let hole = vec![[0.175, 0.175], [0.375, 0.175], [0.375, 0.375], [0.175, 0.375]];
        let m = TriangleMesh::extrude(&outer, &[hole], 0.0, 0.08);
        let s = cross_section(&m, PlaneFrame::horizontal(0.04));
        assert_eq!(s.regions.len(), 1);
        assert_eq!(s.regions[0].holes.len(), 1);
        assert!((s.area() - (0.55 * 0.55 - 0.04)).abs() < 1e-12);
    }

    #[test]
    fn resplit_is_idempotent() {
        let p = CutPlane::new(PlaneId(1), Vec3::new(0.2, 0.1, 1.0), Vec3::new(0.5, 0.5, 0.5));
        let (_, pos) = split_mesh(&cube(), &p).unwrap();
        let (n2, p2) = split_mesh(&pos, &p).unwrap();
        assert!(n2.is_empty());
        assert!((p2.volume().unwrap() - pos.volume().unwrap()).abs() < 1e-12);
    }
}
