//! Voxel occupancy grids for deposited material and tracking-error
//! statistics of a flown mission.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controlsim::{position, MissionTrace, State};
use crate::geometry::{cross_section, PlaneFrame, TriangleMesh, Vec3};
use crate::pathgen::ManufacturingPath;

#[cfg(test)]
mod tests;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error("sample ({0:.3}, {1:.3}, {2:.3}) lies outside the grid")]
    OutOfBounds(f64, f64, f64),
    #[error("grids differ in origin, voxel size or dimensions")]
    GridMismatch,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, EvaluateError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub voxel: f64,
    /// Lateral margin around the build's bounding box, m.
    pub margin: f64,
    /// Grid height above the plate, m.
    pub height: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { voxel: 0.01, margin: 0.1, height: 0.5 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel > 0.0 && self.margin >= 0.0 && self.height > 0.0) {
            return Err(EvaluateError::InvalidGrid("voxel and height must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Vec3,
    pub voxel: f64,
    pub dims: [usize; 3],
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(origin: Vec3, voxel: f64, dims: [usize; 3]) -> Result<OccupancyGrid> {
        if !(voxel > 0.0) || dims.iter().any(|&d| d == 0) {
            return Err(EvaluateError::InvalidGrid("voxel size and dimensions must be positive".into()));
        }
        Ok(OccupancyGrid { origin, voxel, dims, cells: vec![false; dims[0] * dims[1] * dims[2]] })
    }

    /// Grid over the xy box `[lo, hi]` plus margin, from z = 0 up to the
    /// configured height.
    pub fn for_bounds(lo: Vec3, hi: Vec3, cfg: &GridConfig) -> Result<OccupancyGrid> {
        cfg.validate()?;
        let origin = Vec3::new(lo.x - cfg.margin, lo.y - cfg.margin, 0.0);
        let n = |span: f64| ((span / cfg.voxel) - 1e-9).ceil().max(1.0) as usize;
        let dims = [n(hi.x - lo.x + 2.0 * cfg.margin), n(hi.y - lo.y + 2.0 * cfg.margin), n(cfg.height)];
        OccupancyGrid::new(origin, cfg.voxel, dims)
    }

    /// An empty grid with the same geometry.
    pub fn empty_like(&self) -> OccupancyGrid {
        OccupancyGrid { cells: vec![false; self.cells.len()], ..self.clone() }
    }

    pub fn same_geometry(&self, other: &OccupancyGrid) -> bool {
        self.origin == other.origin && self.voxel == other.voxel && self.dims == other.dims
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize) {
        let idx = self.index(i, j, k);
        self.cells[idx] = true;
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Occupied volume, liters.
    pub fn volume_liters(&self) -> f64 {
        self.count() as f64 * self.voxel.powi(3) * 1000.0
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] <= self.origin[a] + self.dims[a] as f64 * self.voxel)
    }

    /// Index range of voxels whose centers lie in `[a, b]` along `axis`.
    fn range(&self, axis: usize, a: f64, b: f64) -> std::ops::Range<usize> {
        let v = self.voxel;
        let o = self.origin[axis];
        let lo = (((a - o) / v - 0.5) - 1e-9).ceil().max(0.0) as usize;
        let hi = (((b - o) / v - 0.5) + 1e-9).floor();
        if hi < 0.0 {
            return 0..0;
        }
        lo..(hi as usize + 1).min(self.dims[axis])
    }

    fn mark_box(&mut self, lo: Vec3, hi: Vec3) {
        let (ri, rj, rk) = (self.range(0, lo.x, hi.x), self.range(1, lo.y, hi.y), self.range(2, lo.z, hi.z));
        for k in rk {
            for j in rj.clone() {
                for i in ri.clone() {
                    self.set(i, j, k);
                }
            }
        }
    }

    /// Union with every voxel's 26-neighborhood.
    pub fn dilate(&self) -> OccupancyGrid {
        let mut out = self.empty_like();
        let [nx, ny, nz] = self.dims;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if !self.get(i, j, k) {
                        continue;
                    }
                    for kk in k.saturating_sub(1)..(k + 2).min(nz) {
                        for jj in j.saturating_sub(1)..(j + 2).min(ny) {
                            for ii in i.saturating_sub(1)..(i + 2).min(nx) {
                                out.set(ii, jj, kk);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Voxels of `self` that are not in `other`.
    pub fn difference_count(&self, other: &OccupancyGrid) -> Result<usize> {
        if !self.same_geometry(other) {
            return Err(EvaluateError::GridMismatch);
        }
        Ok(self.cells.iter().zip(&other.cells).filter(|(a, b)| **a && !**b).count())
    }

    pub fn union_with(&mut self, other: &OccupancyGrid) -> Result<()> {
        if !self.same_geometry(other) {
            return Err(EvaluateError::GridMismatch);
        }
        self.cells.iter_mut().zip(&other.cells).for_each(|(a, b)| *a |= *b);
        Ok(())
    }

    /// Header line, then `value count` runs over x-fastest order.
    pub fn to_rle(&self) -> String {
        let mut out = String::new();
        let o = self.origin;
        let _ = writeln!(
            out,
            "origin {:.6} {:.6} {:.6} voxel {:.6} dims {} {} {}",
            o.x, o.y, o.z, self.voxel, self.dims[0], self.dims[1], self.dims[2]
        );
        let mut iter = self.cells.iter().peekable();
        while let Some(&v) = iter.next() {
            let mut run = 1usize;
            while iter.peek() == Some(&&v) {
                iter.next();
                run += 1;
            }
            let _ = writeln!(out, "{} {}", v as u8, run);
        }
        out
    }

    pub fn from_rle(text: &str) -> Result<OccupancyGrid> {
        let bad = || EvaluateError::InvalidGrid("malformed run-length text".into());
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next().ok_or_else(bad)?.split_whitespace().collect();
        if head.len() != 10 || head[0] != "origin" || head[4] != "voxel" || head[6] != "dims" {
            return Err(bad());
        }
        let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let u = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let mut g = OccupancyGrid::new(
            Vec3::new(f(head[1])?, f(head[2])?, f(head[3])?),
            f(head[5])?,
            [u(head[7])?, u(head[8])?, u(head[9])?],
        )?;
        let mut at = 0usize;
        for line in lines {
            let mut parts = line.split_whitespace();
            let v = parts.next().ok_or_else(bad)? == "1";
            let run = u(parts.next().ok_or_else(bad)?)?;
            if at + run > g.cells.len() {
                return Err(bad());
            }
            g.cells[at..at + run].iter_mut().for_each(|c| *c = v);
            at += run;
        }
        if at != g.cells.len() {
            return Err(bad());
        }
        Ok(g)
    }
}

/// Marks, for each sample, the voxels whose centers fall in the
/// `l_w x l_w` box around it between `z - l_h` and `z`.
pub fn rasterize_deposition(samples: &[Vec3], l_w: f64, l_h: f64, grid: &OccupancyGrid) -> Result<OccupancyGrid> {
    let mut out = grid.empty_like();
    let half = Vec3::new(l_w / 2.0, l_w / 2.0, 0.0);
    for p in samples {
        if !grid.contains_point(p) {
            return Err(EvaluateError::OutOfBounds(p.x, p.y, p.z));
        }
        out.mark_box(p - half - Vec3::new(0.0, 0.0, l_h), p + half);
    }
    Ok(out)
}

/// Extruding segments of a path, sampled at a quarter voxel.
pub fn path_samples(path: &ManufacturingPath, spacing: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for s in path.extruding() {
        let n = ((s.length() / spacing).ceil() as usize).max(1);
        out.extend((0..=n).map(|i| s.start + (s.end - s.start) * (i as f64 / n as f64)));
    }
    out
}

pub fn rasterize_path(path: &ManufacturingPath, l_w: f64, l_h: f64, grid: &OccupancyGrid) -> Result<OccupancyGrid> {
    rasterize_deposition(&path_samples(path, grid.voxel / 4.0), l_w, l_h, grid)
}

/// Voxels whose centers lie inside a closed mesh.
pub fn voxelize_mesh(mesh: &TriangleMesh, grid: &OccupancyGrid) -> OccupancyGrid {
    let mut out = grid.empty_like();
    let [nx, ny, nz] = grid.dims;
    // Offsets keep sample planes and scanlines off exact faces and vertices.
    const JITTER: f64 = 1e-7;
    let Some((lo, hi)) = mesh.bounds() else { return out };
    for k in 0..nz {
        let z = grid.center(0, 0, k).z + JITTER;
        if z <= lo.z || z >= hi.z {
            continue;
        }
        let section = cross_section(mesh, PlaneFrame::horizontal(z));
        let rings: Vec<&Vec<[f64; 2]>> =
            section.regions.iter().flat_map(|r| std::iter::once(&r.outer).chain(r.holes.iter())).collect();
        for j in 0..ny {
            let y = grid.center(0, j, k).y + JITTER;
            let mut xs = Vec::new();
            for ring in &rings {
                for e in 0..ring.len() {
                    let (a, b) = (ring[e], ring[(e + 1) % ring.len()]);
                    if (a[1] > y) != (b[1] > y) {
                        xs.push(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let c0 = grid.origin.x + 0.5 * grid.voxel;
                let i0 = ((pair[0] - c0) / grid.voxel).ceil().max(0.0) as usize;
                let i1 = ((pair[1] - c0) / grid.voxel).floor();
                if i1 < 0.0 {
                    continue;
                }
                for i in i0..=(i1 as usize).min(nx - 1) {
                    out.set(i, j, k);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub iou: f64,
    pub coverage: f64,
    pub excess: f64,
    pub reference_voxels: usize,
    pub measured_voxels: usize,
    pub intersection_voxels: usize,
}

/// IoU, coverage of the reference and excess relative to it.
pub fn compare_grids(reference: &OccupancyGrid, measured: &OccupancyGrid) -> Result<Comparison> {
    if !reference.same_geometry(measured) {
        return Err(EvaluateError::GridMismatch);
    }
    let (mut both, mut either, mut r, mut m) = (0usize, 0usize, 0usize, 0usize);
    for (&a, &b) in reference.cells.iter().zip(&measured.cells) {
        both += (a && b) as usize;
        either += (a || b) as usize;
        r += a as usize;
        m += b as usize;
    }
    let ratio = |n: usize, d: usize| if d == 0 { if n == 0 { 1.0 } else { 0.0 } } else { n as f64 / d as f64 };
    Ok(Comparison {
        iou: ratio(both, either),
        coverage: ratio(both, r),
        excess: if r == 0 { 0.0 } else { (m - both) as f64 / r as f64 },
        reference_voxels: r,
        measured_voxels: m,
        intersection_voxels: both,
    })
}

/// Extruder tip below the body: `p + Ry(theta) Rx(phi) (0, 0, -l_ex)`.
pub fn extruder_tip(x: &State, l_ex: f64) -> Vector3<f64> {
    let r = Rotation3::from_axis_angle(&Vector3::y_axis(), x[7]) * Rotation3::from_axis_angle(&Vector3::x_axis(), x[6]);
    position(x) + r * Vector3::new(0.0, 0.0, -l_ex)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean_3d: f64,
    pub max_3d: f64,
    pub mean_planar: f64,
    pub max_planar: f64,
}

impl ErrorStats {
    fn from_errors(e: &[Vector3<f64>]) -> ErrorStats {
        let n = e.len().max(1) as f64;
        let d3: Vec<f64> = e.iter().map(|v| v.norm()).collect();
        let d2: Vec<f64> = e.iter().map(|v| v.xy().norm()).collect();
        ErrorStats {
            mean_3d: d3.iter().sum::<f64>() / n,
            max_3d: d3.iter().cloned().fold(0.0, f64::max),
            mean_planar: d2.iter().sum::<f64>() / n,
            max_planar: d2.iter().cloned().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkStats {
    pub chunk: usize,
    pub samples: usize,
    pub uav: ErrorStats,
    pub tip: ErrorStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingStats {
    pub chunks: Vec<ChunkStats>,
}

/// Per-chunk error statistics over extruding ticks, for the body reference
/// point and for the extruder tip `l_ex` below it.
pub fn tracking_stats(trace: &MissionTrace, l_ex: f64) -> Result<TrackingStats> {
    if trace.samples.is_empty() {
        return Err(EvaluateError::EmptyTrace);
    }
    let mut groups: BTreeMap<usize, (Vec<Vector3<f64>>, Vec<Vector3<f64>>)> = BTreeMap::new();
    let down = Vector3::new(0.0, 0.0, -l_ex);
    for s in trace.samples.iter().filter(|s| s.extrude) {
        let Some(c) = s.chunk else { continue };
        let g = groups.entry(c).or_default();
        g.0.push(position(&s.state) - s.reference);
        g.1.push(extruder_tip(&s.state, l_ex) - (s.reference + down));
    }
    Ok(TrackingStats {
        chunks: groups
            .into_iter()
            .map(|(chunk, (u, t))| ChunkStats {
                chunk,
                samples: u.len(),
                uav: ErrorStats::from_errors(&u),
                tip: ErrorStats::from_errors(&t),
            })
            .collect(),
    })
}

/// `t,chunk,uav_error,tip_error` per extruding tick.
pub fn error_series_csv(trace: &MissionTrace, l_ex: f64) -> String {
    let mut out = String::from("t,chunk,uav_error,tip_error\n");
    let down = Vector3::new(0.0, 0.0, -l_ex);
    for s in trace.samples.iter().filter(|s| s.extrude) {
        let Some(c) = s.chunk else { continue };
        let e = (position(&s.state) - s.reference).norm();
        let et = (extruder_tip(&s.state, l_ex) - (s.reference + down)).norm();
        let _ = writeln!(out, "{:.4},{},{:.6},{:.6}", s.t, c, e, et);
    }
    out
}

/// Extruder-tip positions of every extruding tick.
pub fn deposited_tip_positions(trace: &MissionTrace, l_ex: f64) -> Vec<Vec3> {
    trace.samples.iter().filter(|s| s.extrude).map(|s| extruder_tip(&s.state, l_ex)).collect()
}

/// Extruder-tip references of every extruding tick.
pub fn reference_tip_positions(trace: &MissionTrace, l_ex: f64) -> Vec<Vec3> {
    let down = Vector3::new(0.0, 0.0, -l_ex);
    trace.samples.iter().filter(|s| s.extrude).map(|s| s.reference + down).collect()
}
