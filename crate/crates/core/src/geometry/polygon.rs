use super::plane::line_angle;
use super::{orthonormal_frame, GeometryError, Result, Vec3, COPLANAR_EPS, PARALLEL_TOL};

/// Ordered 2D points in the local frame of a plane.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polygon2D {
    pub points: Vec<[f64; 2]>,
}

impl Polygon2D {
    pub fn new(points: Vec<[f64; 2]>) -> Polygon2D {
        Polygon2D { points }
    }

    /// Unsigned area.
    pub fn area(&self) -> f64 {
        polygon_area(&self.points).abs()
    }
}

/// Signed shoelace area (positive for counter-clockwise).
pub fn polygon_area(pts: &[[f64; 2]]) -> f64 {
    super::mesh::ring_area(pts)
}

/// Orthonormal 2D frame on a plane.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFrame {
    pub origin: Vec3,
    pub normal: Vec3,
    pub u: Vec3,
    pub v: Vec3,
}

impl PlaneFrame {
    pub fn new(origin: Vec3, normal: Vec3) -> PlaneFrame {
        let n = normal.normalize();
        let (u, v) = orthonormal_frame(&n);
        PlaneFrame { origin, normal: n, u, v }
    }

    /// Horizontal plane at height `z` with `u = x` and `v = y`.
    pub fn horizontal(z: f64) -> PlaneFrame {
        PlaneFrame { origin: Vec3::new(0.0, 0.0, z), normal: Vec3::z(), u: Vec3::x(), v: Vec3::y() }
    }

    pub fn project(&self, p: &Vec3) -> [f64; 2] {
        let d = p - self.origin;
        [d.dot(&self.u), d.dot(&self.v)]
    }

    pub fn lift(&self, q: [f64; 2]) -> Vec3 {
        self.origin + self.u * q[0] + self.v * q[1]
    }
}

/// Clips `subject` against a convex counter-clockwise `clip` polygon.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let p = input[j];
            let q = input[(j + 1) % input.len()];
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

/// Intersection area of two convex polygons (any winding).
pub fn convex_overlap_area(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut clip = b.to_vec();
    if polygon_area(&clip) < 0.0 {
        clip.reverse();
    }
    polygon_area(&clip_convex(a, &clip)).abs()
}

/// A planar region of a mesh, stored as its triangles.
#[derive(Debug, Clone)]
pub struct PlanarFace {
    /// Outward unit normal of the region.
    pub normal: Vec3,
    /// A point on the supporting plane.
    pub origin: Vec3,
    pub triangles: Vec<[Vec3; 3]>,
}

impl PlanarFace {
    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm())
            .sum()
    }

    /// Checks parallelism and a plane distance at most `eps`.
    pub fn coplanar_with(&self, other: &PlanarFace, eps: f64) -> Result<()> {
        let angle = line_angle(&self.normal, &other.normal);
        if angle > PARALLEL_TOL {
            return Err(GeometryError::NotCoplanar(f64::INFINITY));
        }
        let dist = (self.origin - other.origin).dot(&self.normal).abs();
        if dist > eps {
            return Err(GeometryError::NotCoplanar(dist));
        }
        Ok(())
    }
}

/// Area of the intersection of the two faces projected onto the plane of
/// `face_a`. Both faces must be coplanar within [`COPLANAR_EPS`].
pub fn face_polygon_overlap(face_a: &PlanarFace, face_b: &PlanarFace) -> Result<f64> {
    face_a.coplanar_with(face_b, COPLANAR_EPS)?;
    let frame = PlaneFrame::new(face_a.origin, face_a.normal);
    let proj = |f: &PlanarFace| -> Vec<([[f64; 2]; 3], [f64; 4])> {
        f.triangles
            .iter()
            .map(|t| {
                let p = [frame.project(&t[0]), frame.project(&t[1]), frame.project(&t[2])];
                let bb = [
                    p[0][0].min(p[1][0]).min(p[2][0]),
                    p[0][1].min(p[1][1]).min(p[2][1]),
                    p[0][0].max(p[1][0]).max(p[2][0]),
                    p[0][1].max(p[1][1]).max(p[2][1]),
                ];
                (p, bb)
            })
            .collect()
    };
    let ta = proj(face_a);
    let tb = proj(face_b);
    let mut area = 0.0;
    for (pa, ba) in &ta {
        for (pb, bb) in &tb {
            if ba[2] < bb[0] || bb[2] < ba[0] || ba[3] < bb[1] || bb[3] < ba[1] {
                continue;
            }
            area += convex_overlap_area(pa, pb);
        }
    }
    Ok(area)
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Triangulates a polygon with holes by ear clipping. `outer` must be
/// counter-clockwise and `holes` clockwise, as index lists into `pts`.
/// Every input vertex, collinear ones included, appears in the output, so
/// the result shares edges exactly with neighbouring faces.
pub fn triangulate_with_holes(
    pts: &[[f64; 2]],
    outer: &[usize],
    holes: &[Vec<usize>],
) -> Vec<[usize; 3]> {
    let mut ring: Vec<usize> = outer.to_vec();
    let mut holes: Vec<&Vec<usize>> = holes.iter().filter(|h| h.len() >= 3).collect();
    holes.sort_by(|a, b| {
        let mx = |h: &Vec<usize>| h.iter().map(|&i| pts[i][0]).fold(f64::MIN, f64::max);
        mx(b).total_cmp(&mx(a))
    });
    for h in holes {
        bridge_hole(pts, &mut ring, h);
    }
    ear_clip(pts, ring)
}

/// Splices `hole` into `ring` through a mutually visible vertex pair.
fn bridge_hole(pts: &[[f64; 2]], ring: &mut Vec<usize>, hole: &[usize]) {
    let (hpos, &m) = hole
        .iter()
        .enumerate()
        .max_by(|a, b| pts[*a.1][0].total_cmp(&pts[*b.1][0]).then(pts[*b.1][1].total_cmp(&pts[*a.1][1])))
        .unwrap();
    let mp = pts[m];
    // Nearest ring edge hit by the ray from m towards +x.
    let mut best: Option<(f64, usize)> = None;
    let n = ring.len();
    for k in 0..n {
        let a = pts[ring[k]];
        let b = pts[ring[(k + 1) % n]];
        let (ay, by) = (a[1] - mp[1], b[1] - mp[1]);
        if (ay > 0.0 && by > 0.0) || (ay < 0.0 && by < 0.0) {
            continue;
        }
        let x = if ay == by {
            if a[0].max(b[0]) < mp[0] {
                continue;
            }
            a[0].min(b[0]).max(mp[0])
        } else {
            a[0] + ay / (ay - by) * (b[0] - a[0])
        };
        if x < mp[0] {
            continue;
        }
        if best.map_or(true, |(bx, _)| x < bx) {
            best = Some((x, k));
        }
    }
    let Some((hit_x, k)) = best else {
        // Hole outside the ring; append as a separate bridge to vertex 0.
        splice(ring, 0, hole, hpos);
        return;
    };
    let a = ring[k];
    let b = ring[(k + 1) % n];
    let mut cand = if pts[a][0] > pts[b][0] { k } else { (k + 1) % n };
    let ip = [hit_x, mp[1]];
    let pp = pts[ring[cand]];
    if (pp[0] - ip[0]).abs() > 0.0 || (pp[1] - ip[1]).abs() > 0.0 {
        // Reflex vertices inside triangle (m, i, p) may block visibility.
        let tri = if cross2(mp, ip, pp) >= 0.0 { [mp, ip, pp] } else { [mp, pp, ip] };
        let mut best_angle = f64::INFINITY;
        let mut best_dist = f64::INFINITY;
        for j in 0..n {
            let q = pts[ring[j]];
            if ring[j] == ring[cand] {
                continue;
            }
            let prev = pts[ring[(j + n - 1) % n]];
            let next = pts[ring[(j + 1) % n]];
            let reflex = cross2(prev, q, next) <= 0.0;
            if !reflex || !point_in_triangle(q, tri[0], tri[1], tri[2]) {
                continue;
            }
            let dx = q[0] - mp[0];
            let dy = q[1] - mp[1];
            let ang = dy.abs().atan2(dx);
            let dist = dx * dx + dy * dy;
            if ang < best_angle - 1e-12 || ((ang - best_angle).abs() <= 1e-12 && dist < best_dist) {
                best_angle = ang;
                best_dist = dist;
                cand = j;
            }
        }
    }
    splice(ring, cand, hole, hpos);
}

fn splice(ring: &mut Vec<usize>, at: usize, hole: &[usize], hpos: usize) {
    let p = ring[at];
    let mut ins = Vec::with_capacity(hole.len() + 2);
    for k in 0..=hole.len() {
        ins.push(hole[(hpos + k) % hole.len()]);
    }
    ins.push(p);
    ring.splice(at + 1..at + 1, ins);
}

fn point_in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let scale = ((b[0] - a[0]).abs() + (b[1] - a[1]).abs() + (c[0] - a[0]).abs() + (c[1] - a[1]).abs())
        .max(1e-300);
    let eps = -1e-12 * scale * scale;
    cross2(a, b, p) >= eps && cross2(b, c, p) >= eps && cross2(c, a, p) >= eps
}

fn ear_clip(pts: &[[f64; 2]], mut ring: Vec<usize>) -> Vec<[usize; 3]> {
    let mut tris = Vec::with_capacity(ring.len().saturating_sub(2));
    let mut guard = 0usize;
    while ring.len() > 3 {
        let n = ring.len();
        let mut chosen = None;
        let mut fallback: Option<(f64, usize)> = None;
        for i in 0..n {
            let (ip, ii, inx) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            let (a, b, c) = (pts[ip], pts[ii], pts[inx]);
            let cr = cross2(a, b, c);
            let scale = (c[0] - a[0]).abs() + (c[1] - a[1]).abs() + (b[0] - a[0]).abs() + (b[1] - a[1]).abs();
            if cr <= 1e-14 * scale * scale {
                continue;
            }
            if fallback.map_or(true, |(best, _)| cr > best) {
                fallback = Some((cr, i));
            }
            let blocked = ring.iter().any(|&j| {
                let q = pts[j];
                q != a && q != b && q != c && point_in_triangle(q, a, b, c)
            });
            if !blocked {
                chosen = Some(i);
                break;
            }
        }
        let i = match chosen.or(fallback.map(|f| f.1)) {
            Some(i) => i,
            None => {
                // Only collinear vertices remain.
                guard += 1;
                if guard > 1 {
                    break;
                }
                let i = (0..n)
                    .find(|&i| {
                        let (a, b, c) = (pts[ring[(i + n - 1) % n]], pts[ring[i]], pts[ring[(i + 1) % n]]);
                        cross2(a, b, c) > 0.0
                    })
                    .unwrap_or(0);
                i
            }
        };
        tris.push([ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]]);
        ring.remove(i);
    }
    if ring.len() == 3 {
        let (a, b, c) = (pts[ring[0]], pts[ring[1]], pts[ring[2]]);
        if cross2(a, b, c) > 0.0 {
            tris.push([ring[0], ring[1], ring[2]]);
        }
    }
    tris
}
