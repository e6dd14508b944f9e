use serde::{Deserialize, Serialize};

use super::{GeometryError, Result, Vec3, PARALLEL_TOL};

/// Identity of a cut plane within one decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlaneId(pub u32);

/// Which half-space of a cut a piece of geometry lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Negative,
    Positive,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Negative => Side::Positive,
            Side::Positive => Side::Negative,
        }
    }
}

/// A planar cut. The positive half-space lies along `normal`, whose z
/// component is kept non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutPlane {
    pub id: PlaneId,
    pub normal: Vec3,
    pub origin: Vec3,
}

impl CutPlane {
    /// Builds a plane, normalizing `normal` and flipping it upward if needed.
    pub fn new(id: PlaneId, normal: Vec3, origin: Vec3) -> CutPlane {
        let mut n = normal.normalize();
        if n.z < 0.0 {
            n = -n;
        }
        CutPlane { id, normal: n, origin }
    }

    pub fn horizontal(id: PlaneId, z: f64) -> CutPlane {
        CutPlane::new(id, Vec3::z(), Vec3::new(0.0, 0.0, z))
    }

    /// Signed distance of `p` along the normal.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(&(p - self.origin))
    }

    /// Plane offset `d` in `n . x = d`.
    pub fn offset(&self) -> f64 {
        self.normal.dot(&self.origin)
    }

    /// A cut whose normal is parallel to the world vertical.
    pub fn is_ground(&self) -> bool {
        is_vertical_direction(&self.normal)
    }

    pub fn with_id(mut self, id: PlaneId) -> CutPlane {
        self.id = id;
        self
    }
}

/// True when `n` is parallel to (0, 0, 1) within [`PARALLEL_TOL`].
pub(crate) fn is_vertical_direction(n: &Vec3) -> bool {
    n.normalize().cross(&Vec3::z()).norm() <= PARALLEL_TOL.sin() && n.z > 0.0
}

/// Angle between two directions treated as unoriented lines.
pub(crate) fn line_angle(a: &Vec3, b: &Vec3) -> f64 {
    let c = a.normalize().dot(&b.normalize()).abs().min(1.0);
    let s = a.normalize().cross(&b.normalize()).norm();
    s.atan2(c)
}

/// Distance between two parallel planes, `|(o_a - o_b) . n_a|`.
pub fn plane_distance(a: &CutPlane, b: &CutPlane) -> Result<f64> {
    let angle = line_angle(&a.normal, &b.normal);
    if angle > PARALLEL_TOL {
        return Err(GeometryError::NotParallel(angle));
    }
    Ok((a.origin - b.origin).dot(&a.normal).abs())
}
