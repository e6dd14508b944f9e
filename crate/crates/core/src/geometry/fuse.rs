use std::collections::HashMap;

use geo::orient::{Direction, Orient};
use geo::{Area, BooleanOps, Coord, LineString, MultiPolygon, Polygon};

use super::polygon::{triangulate_with_holes, PlaneFrame};
use super::split::{cap_loops, group_loops};
use super::{FaceTag, GeometryError, Result, TriangleMesh, Vec3};

const PLANE_TOL: f64 = 1e-7;
const WELD: f64 = 1e-7;
const MIN_AREA: f64 = 1e-12;

struct Group {
    normal: Vec3,
    offset: f64,
    tag: FaceTag,
    faces: Vec<usize>,
}

fn planar_groups(mesh: &TriangleMesh) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    for f in 0..mesh.faces.len() {
        let Some(n) = mesh.face_cross(f).try_normalize(1e-300) else { continue };
        let d = n.dot(&mesh.vertices[mesh.faces[f][0] as usize]);
        let tag = mesh.tags[f];
        match groups.iter_mut().find(|g| {
            g.tag == tag && g.normal.dot(&n) > 1.0 - 1e-9 && (g.offset - d).abs() < PLANE_TOL
        }) {
            Some(g) => g.faces.push(f),
            None => groups.push(Group { normal: n, offset: d, tag, faces: vec![f] }),
        }
    }
    groups
}

fn group_region(mesh: &TriangleMesh, g: &Group, frame: &PlaneFrame) -> MultiPolygon<f64> {
    let faces: Vec<[u32; 3]> = g.faces.iter().map(|&f| mesh.faces[f]).collect();
    let facing = g.normal.dot(&frame.normal) > 0.0;
    let loops: Vec<Vec<u32>> = cap_loops(&faces)
        .into_iter()
        .map(|mut l| {
            if facing {
                l.reverse();
            }
            l
        })
        .collect();
    let mut pts = Vec::new();
    let mut local = Vec::new();
    for l in &loops {
        let s = pts.len();
        pts.extend(l.iter().map(|&v| frame.project(&mesh.vertices[v as usize])));
        local.push((s..pts.len()).collect::<Vec<usize>>());
    }
    let ring = |idx: &[usize]| -> LineString<f64> {
        idx.iter().map(|&i| Coord { x: pts[i][0], y: pts[i][1] }).collect()
    };
    MultiPolygon(
        group_loops(&pts, &local)
            .into_iter()
            .map(|(o, hs)| Polygon::new(ring(&local[o]), hs.iter().map(|&h| ring(&local[h])).collect()))
            .collect(),
    )
}

fn triangulate_region(
    region: &MultiPolygon<f64>,
    frame: &PlaneFrame,
    flip: bool,
    tag: FaceTag,
    out: &mut TriangleMesh,
) {
    for poly in region.orient(Direction::Default).0 {
        if poly.unsigned_area() < MIN_AREA {
            continue;
        }
        let mut pts: Vec<[f64; 2]> = Vec::new();
        let mut push_ring = |ls: &LineString<f64>| -> Vec<usize> {
            let mut c: Vec<Coord<f64>> = ls.0.clone();
            if c.len() > 1 && c.first() == c.last() {
                c.pop();
            }
            let s = pts.len();
            pts.extend(c.iter().map(|p| [p.x, p.y]));
            (s..pts.len()).collect()
        };
        let outer = push_ring(poly.exterior());
        let holes: Vec<Vec<usize>> = poly.interiors().iter().map(&mut push_ring).collect();
        let base = out.vertices.len() as u32;
        out.vertices.extend(pts.iter().map(|&q| frame.lift(q)));
        for t in triangulate_with_holes(&pts, &outer, &holes) {
            let (i, j, k) = (base + t[0] as u32, base + t[1] as u32, base + t[2] as u32);
            out.faces.push(if flip { [i, k, j] } else { [i, j, k] });
            out.tags.push(tag);
        }
    }
}

/// Union of two closed meshes that touch along coplanar faces of opposite
/// orientation. Shared face regions are removed and the remainder
/// re-triangulated.
pub fn fuse(a: &TriangleMesh, b: &TriangleMesh) -> Result<TriangleMesh> {
    if a.is_empty() {
        return Ok(b.clone());
    }
    if b.is_empty() {
        return Ok(a.clone());
    }
    let ga = planar_groups(a);
    let gb = planar_groups(b);
    let mut drop_a = vec![false; ga.len()];
    let mut drop_b = vec![false; gb.len()];
    let mut regions_a: HashMap<usize, (PlaneFrame, MultiPolygon<f64>)> = HashMap::new();
    let mut regions_b: HashMap<usize, (PlaneFrame, MultiPolygon<f64>)> = HashMap::new();
    for (i, g) in ga.iter().enumerate() {
        for (j, h) in gb.iter().enumerate() {
            if g.normal.dot(&h.normal) > -1.0 + 1e-9 || (g.offset + h.offset).abs() > PLANE_TOL {
                continue;
            }
            let ra = regions_a
                .entry(i)
                .or_insert_with(|| {
                    let frame = PlaneFrame::new(g.normal * g.offset, g.normal);
                    (frame, group_region(a, g, &frame))
                })
                .1
                .clone();
            // B's faces point the other way; its region is expressed in the
            // frame facing A's side so both share coordinates.
            let rb = regions_b
                .entry(j)
                .or_insert_with(|| {
                    let frame = PlaneFrame::new(h.normal * h.offset, -h.normal);
                    (frame, group_region(b, h, &frame))
                })
                .1
                .clone();
            let overlap = ra.intersection(&rb);
            if overlap.unsigned_area() < MIN_AREA {
                continue;
            }
            drop_a[i] = true;
            drop_b[j] = true;
            regions_a.get_mut(&i).unwrap().1 = ra.difference(&overlap);
            regions_b.get_mut(&j).unwrap().1 = rb.difference(&overlap);
        }
    }

    let mut out = TriangleMesh::default();
    for (m, groups, dropped) in [(a, &ga, &drop_a), (b, &gb, &drop_b)] {
        let base = out.vertices.len() as u32;
        out.vertices.extend_from_slice(&m.vertices);
        for (g, &d) in groups.iter().zip(dropped.iter()) {
            if d {
                continue;
            }
            for &f in &g.faces {
                let [x, y, z] = m.faces[f];
                out.faces.push([x + base, y + base, z + base]);
                out.tags.push(m.tags[f]);
            }
        }
    }
    for (groups, dropped, regions) in [(&ga, &drop_a, &regions_a), (&gb, &drop_b, &regions_b)] {
        for (k, g) in groups.iter().enumerate() {
            if dropped[k] {
                let (frame, r) = &regions[&k];
                triangulate_region(r, frame, g.normal.dot(&frame.normal) < 0.0, g.tag, &mut out);
            }
        }
    }
    out.weld(WELD);
    drop_degenerate(&mut out);
    repair_t_junctions(&mut out);
    drop_collapsed(&mut out);
    cancel_opposite(&mut out);
    out.compact();
    let open = out.unmatched_edges();
    if open > 0 {
        return Err(GeometryError::NonManifoldInput(open));
    }
    Ok(out)
}

fn drop_degenerate(m: &mut TriangleMesh) {
    let keep: Vec<bool> = (0..m.faces.len())
        .map(|f| {
            let [a, b, c] = m.triangle(f);
            let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            m.face_cross(f).norm() > 1e-9 * longest * longest
        })
        .collect();
    let mut k = keep.iter();
    m.faces.retain(|_| *k.next().unwrap());
    let mut k = keep.iter();
    m.tags.retain(|_| *k.next().unwrap());
}

/// Removes faces with a repeated vertex.
fn drop_collapsed(m: &mut TriangleMesh) {
    let keep: Vec<bool> = m.faces.iter().map(|[a, b, c]| a != b && b != c && c != a).collect();
    let mut k = keep.iter();
    m.faces.retain(|_| *k.next().unwrap());
    let mut k = keep.iter();
    m.tags.retain(|_| *k.next().unwrap());
}

/// Removes coincident face pairs of opposite winding.
fn cancel_opposite(m: &mut TriangleMesh) {
    let key = |f: &[u32; 3]| {
        let mut k = *f;
        k.sort_unstable();
        k
    };
    let mut by_key: HashMap<[u32; 3], Vec<usize>> = HashMap::new();
    for (i, f) in m.faces.iter().enumerate() {
        by_key.entry(key(f)).or_default().push(i);
    }
    let same_winding = |f: &[u32; 3], g: &[u32; 3]| (0..3).any(|r| [g[r], g[(r + 1) % 3], g[(r + 2) % 3]] == *f);
    let mut keep = vec![true; m.faces.len()];
    for list in by_key.values().filter(|l| l.len() > 1) {
        for (x, &i) in list.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            if let Some(&j) = list[x + 1..].iter().find(|&&j| keep[j] && !same_winding(&m.faces[i], &m.faces[j])) {
                keep[i] = false;
                keep[j] = false;
            }
        }
    }
    let mut k = keep.iter();
    m.faces.retain(|_| *k.next().unwrap());
    let mut k = keep.iter();
    m.tags.retain(|_| *k.next().unwrap());
}

/// Splits faces whose unmatched edges pass through other vertices until
/// every edge has a partner or no further split applies.
fn repair_t_junctions(m: &mut TriangleMesh) {
    for _ in 0..1000 {
        let mut count: HashMap<(u32, u32), i32> = HashMap::new();
        for f in &m.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a, b)).or_default() += 1;
                *count.entry((b, a)).or_default() -= 1;
            }
        }
        let mut changed = false;
        let faces = std::mem::take(&mut m.faces);
        let tags = std::mem::take(&mut m.tags);
        let mut used: Vec<bool> = vec![false; faces.len()];
        let mut new_faces = Vec::with_capacity(faces.len());
        let mut new_tags = Vec::with_capacity(faces.len());
        for (fi, (f, t)) in faces.iter().zip(&tags).enumerate() {
            let mut split = None;
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if count.get(&(a, b)).copied().unwrap_or(0) <= 0 {
                    continue;
                }
                if let Some(v) = vertex_on_segment(m, a, b) {
                    split = Some((k, v));
                    break;
                }
            }
            match split {
                Some((k, v)) if !used[fi] => {
                    let (a, b, c) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                    new_faces.push([a, v, c]);
                    new_faces.push([v, b, c]);
                    new_tags.push(*t);
                    new_tags.push(*t);
                    used[fi] = true;
                    changed = true;
                }
                _ => {
                    new_faces.push(*f);
                    new_tags.push(*t);
                }
            }
        }
        m.faces = new_faces;
        m.tags = new_tags;
        if !changed {
            break;
        }
    }
}

/// Vertex strictly inside segment `a b` nearest to `a`.
fn vertex_on_segment(m: &TriangleMesh, a: u32, b: u32) -> Option<u32> {
    let pa = m.vertices[a as usize];
    let d = m.vertices[b as usize] - pa;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return None;
    }
    let len = len2.sqrt();
    let mut best: Option<(f64, u32)> = None;
    for (i, p) in m.vertices.iter().enumerate() {
        let i = i as u32;
        if i == a || i == b {
            continue;
        }
        let t = (p - pa).dot(&d) / len2;
        if t * len <= WELD || (1.0 - t) * len <= WELD {
            continue;
        }
        if (p - (pa + d * t)).norm() <= WELD * 10.0 && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, i));
        }
    }
    best.map(|(_, i)| i)
}
