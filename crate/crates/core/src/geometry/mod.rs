//! Computational-geometry kernel: triangle meshes, planar splits, polygon
//! overlap, oriented bounding boxes and STL I/O.

mod fuse;
mod mesh;
mod obb;
mod plane;
mod polygon;
mod split;
pub mod stl;

pub use fuse::fuse;
pub use mesh::{FaceTag, TriangleMesh};
pub use obb::{compute_obb, OrientedBoundingBox};
pub use plane::{plane_distance, CutPlane, PlaneId, Side};
pub use polygon::{
    clip_convex, convex_overlap_area, face_polygon_overlap, polygon_area, triangulate_with_holes,
    PlanarFace, Polygon2D, PlaneFrame,
};
pub use split::{cross_section, split_mesh, Section};

use thiserror::Error;

/// 3D vector / point in meters (or unitless for directions).
pub type Vec3 = nalgebra::Vector3<f64>;

/// Distance under which two faces count as coplanar, in meters.
pub const COPLANAR_EPS: f64 = 1e-4;
/// Maximum angle between normals that still counts as parallel, in radians.
pub const PARALLEL_TOL: f64 = 1e-3;

/// Cubic meters to liters.
pub const M3_TO_L: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("mesh is not closed: {0} unmatched edges")]
    NonManifoldInput(usize),
    #[error("cut produces a sliver of volume {0:e} m^3")]
    DegenerateCut(f64),
    #[error("planes are not parallel (angle {0:.4} rad)")]
    NotParallel(f64),
    #[error("faces are not coplanar (distance {0:e} m)")]
    NotCoplanar(f64),
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("invalid face index {0}")]
    InvalidIndex(u32),
    #[error("stl: {0}")]
    Stl(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Returns an orthonormal pair `(u, v)` with `u x v = n`.
pub(crate) fn orthonormal_frame(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = helper.cross(n).normalize();
    let v = n.cross(&u);
    (u, v)
}
