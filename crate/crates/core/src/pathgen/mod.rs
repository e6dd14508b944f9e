//! Layer slicing into concentric extrusion loops, elevation to the body
//! frame and timed reference interpolation.

use std::fmt::Write as _;

use geo::algorithm::buffer::{BufferStyle, LineJoin};
use geo::{Area, Buffer, Euclidean, Length, LineString, MultiPolygon, Orient, Polygon};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::Chunk;
use crate::geometry::{cross_section, GeometryError, PlaneFrame, TriangleMesh, Vec3};


/// Height of the staging point above the first and last layer, m.
pub const STAGING_HEIGHT: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathgenError {
    #[error("layer {layer} has a feature narrower than the line width")]
    Unsliceable { layer: i64 },
    #[error("chunk lies below the build plate (min z {0:.4} m)")]
    BelowPlate(f64),
    #[error("path is empty")]
    EmptyPath,
    #[error("malformed path data: {0}")]
    Parse(String),
    #[error("invalid slice config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, PathgenError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceConfig {
    pub layer_height: f64,
    pub line_width: f64,
    pub deposition_speed: f64,
    pub extruder_offset: f64,
    pub sample_period: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig {
            layer_height: 0.025,
            line_width: 0.03,
            deposition_speed: 0.10,
            extruder_offset: 0.30,
            sample_period: 0.05,
        }
    }
}

impl SliceConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("layer_height", self.layer_height),
            ("line_width", self.line_width),
            ("deposition_speed", self.deposition_speed),
            ("sample_period", self.sample_period),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PathgenError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.extruder_offset >= 0.0 && self.extruder_offset.is_finite()) {
            return Err(PathgenError::InvalidConfig("extruder_offset must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Extruder,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Vec3,
    pub end: Vec3,
    pub extrude: bool,
    pub layer: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturingPath {
    pub frame: Frame,
    pub segments: Vec<Segment>,
}

impl ManufacturingPath {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn n_layers(&self) -> usize {
        self.segments.iter().map(|s| s.layer + 1).max().unwrap_or(0)
    }

    pub fn extruding(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.extrude)
    }

    /// Number of closed extrusion loops.
    pub fn n_loops(&self) -> usize {
        self.segments
            .iter()
            .enumerate()
            .filter(|(i, s)| s.extrude && (*i == 0 || !self.segments[i - 1].extrude))
            .count()
    }

    /// One record per line: `layer x0 y0 z0 x1 y1 z1 extrude`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            let _ = writeln!(
                out,
                "{} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {}",
                s.layer, s.start.x, s.start.y, s.start.z, s.end.x, s.end.y, s.end.z, s.extrude as u8
            );
        }
        out
    }

    /// Parses the format written by [`ManufacturingPath::to_text`].
    pub fn from_text(frame: Frame, text: &str) -> Result<ManufacturingPath> {
        let mut segments = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || PathgenError::Parse(format!("line {}: {line}", n + 1));
            if f.len() != 8 {
                return Err(bad());
            }
            let v = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
            segments.push(Segment {
                start: Vec3::new(v(1)?, v(2)?, v(3)?),
                end: Vec3::new(v(4)?, v(5)?, v(6)?),
                extrude: f[7] == "1",
                layer: f[0].parse().map_err(|_| bad())?,
            });
        }
        Ok(ManufacturingPath { frame, segments })
    }
}

/// One timed position setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub t: f64,
    pub position: Vec3,
    pub extrude: bool,
}

pub fn references_to_csv(refs: &[Reference]) -> String {
    let mut out = String::from("t,x,y,z,extrude\n");
    for r in refs {
        let p = r.position;
        let _ = writeln!(out, "{:.4},{:.6},{:.6},{:.6},{}", r.t, p.x, p.y, p.z, r.extrude as u8);
    }
    out
}

/// Parses the format written by [`references_to_csv`].
pub fn references_from_csv(text: &str) -> Result<Vec<Reference>> {
    let mut lines = text.lines();
    if lines.next() != Some("t,x,y,z,extrude") {
        return Err(PathgenError::Parse("missing reference header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let bad = || PathgenError::Parse(line.to_string());
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let v = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
            Ok(Reference { t: v(0)?, position: Vec3::new(v(1)?, v(2)?, v(3)?), extrude: f[4] == "1" })
        })
        .collect()
}

fn to_geo(ring: &[[f64; 2]]) -> LineString<f64> {
    LineString::from(ring.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())
}

fn erode(p: &Polygon<f64>, d: f64) -> MultiPolygon<f64> {
    let style = BufferStyle::new(-d).line_join(LineJoin::Miter(0.1));
    let mp = p.buffer_with_style(style);
    MultiPolygon(mp.0.into_iter().filter(|q| q.unsigned_area() > 1e-12).collect())
}

fn ring_points(ls: &LineString<f64>) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = ls.0.iter().map(|c| [c.x, c.y]).collect();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    pts
}

fn push_rings(mp: &MultiPolygon<f64>, out: &mut Vec<Vec<[f64; 2]>>) {
    for q in &mp.0 {
        let q = q.orient(geo::orient::Direction::Default);
        out.push(ring_points(q.exterior()));
        out.extend(q.interiors().iter().map(ring_points));
    }
}

/// Concentric loops for one planar region, outermost first.
///
/// Ring `k` runs at inward offset `l_w/2 + k l_w`. What is left after the
/// last ring gets one centerline pass when it is at least `l_w/2` wide.
pub fn concentric_loops(region: &Polygon<f64>, l_w: f64) -> Vec<Vec<[f64; 2]>> {
    let mut loops = Vec::new();
    let mut k = 0usize;
    loop {
        let e = erode(region, l_w / 2.0 + k as f64 * l_w);
        if e.0.is_empty() {
            break;
        }
        push_rings(&e, &mut loops);
        k += 1;
    }
    let center = erode(region, (k as f64 + 0.25) * l_w - 1e-3 * l_w);
    for q in &center.0 {
        let q = q.orient(geo::orient::Direction::Default);
        let width = q.unsigned_area() / Euclidean.length(q.exterior()).max(1e-12);
        loops.push(ring_points(q.exterior()));
        if width > l_w / 4.0 {
            loops.extend(q.interiors().iter().map(ring_points));
        }
    }
    loops
}

fn layer_polygons(mesh: &TriangleMesh, z: f64) -> Vec<Polygon<f64>> {
    cross_section(mesh, PlaneFrame::horizontal(z))
        .regions
        .iter()
        .map(|r| Polygon::new(to_geo(&r.outer), r.holes.iter().map(|h| to_geo(h)).collect()))
        .collect()
}

fn nearest_rotation(ring: &[[f64; 2]], from: Option<Vec3>) -> usize {
    let Some(p) = from else { return 0 };
    ring.iter()
        .enumerate()
        .map(|(i, q)| (i, (q[0] - p.x).powi(2) + (q[1] - p.y).powi(2)))
        .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
        .0
}

struct PathBuilder {
    segments: Vec<Segment>,
    pos: Option<Vec3>,
}

impl PathBuilder {
    fn move_to(&mut self, p: Vec3, extrude: bool, layer: usize) {
        if let Some(q) = self.pos {
            self.segments.push(Segment { start: q, end: p, extrude, layer });
        }
        self.pos = Some(p);
    }
}

/// Slices a chunk into an extruder-frame path. Layers are taken on the
/// global grid: layer `i` is sectioned at `(i + 0.5) l_h` and deposited with
/// the nozzle at its top, `(i + 1) l_h`.
pub fn slice_chunk(chunk: &Chunk, cfg: &SliceConfig) -> Result<ManufacturingPath> {
    slice_mesh(&chunk.mesh, cfg)
}

pub fn slice_mesh(mesh: &TriangleMesh, cfg: &SliceConfig) -> Result<ManufacturingPath> {
    cfg.validate()?;
    mesh.ensure_closed()?;
    let (lo, hi) = mesh.bounds().ok_or(GeometryError::EmptyMesh)?;
    if lo.z < -1e-9 {
        return Err(PathgenError::BelowPlate(lo.z));
    }
    let l_h = cfg.layer_height;
    let l_w = cfg.line_width;
    let first = (lo.z / l_h - 0.5).ceil() as i64;
    let mut b = PathBuilder { segments: Vec::new(), pos: None };
    let mut printed_layer = 0usize;
    let mut i = first;
    while (i as f64 + 0.5) * l_h < hi.z {
        let z_mid = (i as f64 + 0.5) * l_h;
        if z_mid <= lo.z {
            i += 1;
            continue;
        }
        let polys = layer_polygons(mesh, z_mid);
        let z = (i as f64 + 1.0) * l_h;
        let mut any = false;
        for poly in &polys {
            if erode(poly, 0.5 * l_w * (1.0 - 1e-3)).0.len() < 1 {
                return Err(PathgenError::Unsliceable { layer: i });
            }
            for ring in concentric_loops(poly, l_w) {
                if ring.len() < 3 {
                    continue;
                }
                let r0 = nearest_rotation(&ring, b.pos);
                let at = |j: usize| {
                    let q = ring[(r0 + j) % ring.len()];
                    Vec3::new(q[0], q[1], z)
                };
                let start = at(0);
                if b.pos.is_none() {
                    b.pos = Some(start + Vec3::new(0.0, 0.0, STAGING_HEIGHT));
                }
                b.move_to(start, false, printed_layer);
                for j in 1..=ring.len() {
                    b.move_to(at(j), true, printed_layer);
                }
                any = true;
            }
        }
        if any {
            printed_layer += 1;
        }
        i += 1;
    }
    let Some(end) = b.pos else { return Err(PathgenError::EmptyPath) };
    b.move_to(end + Vec3::new(0.0, 0.0, STAGING_HEIGHT), false, printed_layer.saturating_sub(1));
    Ok(ManufacturingPath { frame: Frame::Extruder, segments: b.segments })
}

/// Translates an extruder-frame path up by `l_ex` into the body frame.
pub fn elevate_path(path: &ManufacturingPath, l_ex: f64) -> ManufacturingPath {
    let dz = Vec3::new(0.0, 0.0, l_ex);
    ManufacturingPath {
        frame: Frame::Body,
        segments: path
            .segments
            .iter()
            .map(|s| Segment { start: s.start + dz, end: s.end + dz, ..*s })
            .collect(),
    }
}

/// Samples the path every `v_dep * dt` meters, clamping the last step of
/// each segment to its end vertex. Timestamps follow arc length at `v_dep`.
/// The extrude flag is held on from the first printing segment to the last.
pub fn interpolate_references(path: &ManufacturingPath, v_dep: f64, dt: f64) -> Result<Vec<Reference>> {
    if !(v_dep > 0.0 && dt > 0.0) {
        return Err(PathgenError::InvalidConfig("speed and sample period must be positive".into()));
    }
    if path.segments.is_empty() {
        return Err(PathgenError::EmptyPath);
    }
    let first = path.segments.iter().position(|s| s.extrude);
    let last = path.segments.iter().rposition(|s| s.extrude);
    let step = v_dep * dt;
    let mut out = Vec::new();
    let mut s_acc = 0.0;
    for (k, seg) in path.segments.iter().enumerate() {
        let on = matches!((first, last), (Some(a), Some(b)) if k >= a && k <= b);
        let len = seg.length();
        let n = ((len / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        for j in 1..=n {
            let s = (j as f64 * step).min(len);
            let p = if len > 0.0 { seg.start + (seg.end - seg.start) * (s / len) } else { seg.end };
            out.push(Reference { t: (s_acc + s) / v_dep, position: p, extrude: on });
        }
        s_acc += len;
    }
    Ok(out)
}

/// Position setpoint at time `t`, linearly interpolated.
pub fn reference_at(refs: &[Reference], t: f64) -> Reference {
    let i = refs.partition_point(|r| r.t <= t);
    if i == 0 {
        return refs[0];
    }
    if i == refs.len() {
        return refs[refs.len() - 1];
    }
    let (a, b) = (refs[i - 1], refs[i]);
    let w = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 1.0 };
    Reference { t, position: a.position + (b.position - a.position) * w, extrude: a.extrude }
}
