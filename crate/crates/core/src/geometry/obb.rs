use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Result, TriangleMesh, Vec3};

/// Oriented box: `center + sum_i axes[i] * t_i` with `|t_i| <= half_extents[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBoundingBox {
    pub center: Vec3,
    pub axes: [Vec3; 3],
    pub half_extents: Vec3,
}

impl OrientedBoundingBox {
    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    /// Full edge lengths sorted ascending.
    pub fn sorted_extents(&self) -> [f64; 3] {
        let mut e = [
            2.0 * self.half_extents.x,
            2.0 * self.half_extents.y,
            2.0 * self.half_extents.z,
        ];
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn min_extent(&self) -> f64 {
        self.sorted_extents()[0]
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        let d = p - self.center;
        (0..3).all(|i| d.dot(&self.axes[i]).abs() <= self.half_extents[i] + tol)
    }
}

fn fit(points: &[Vec3], axes: [Vec3; 3]) -> OrientedBoundingBox {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        for i in 0..3 {
            let t = p.dot(&axes[i]);
            lo[i] = lo[i].min(t);
            hi[i] = hi[i].max(t);
        }
    }
    let mid = (lo + hi) * 0.5;
    OrientedBoundingBox {
        center: axes[0] * mid.x + axes[1] * mid.y + axes[2] * mid.z,
        axes,
        half_extents: (hi - lo) * 0.5,
    }
}

/// Principal-axis box of the surface, or the axis-aligned box when that is
/// tighter.
pub fn compute_obb(mesh: &TriangleMesh) -> Result<OrientedBoundingBox> {
    if mesh.faces.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let mut total = 0.0;
    let mut mean = Vec3::zeros();
    let mut second = Matrix3::zeros();
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        let area = mesh.face_area(f);
        let cen = (a + b + c) / 3.0;
        total += area;
        mean += cen * area;
        // Exact second moment of a triangle about the origin.
        let s = a * a.transpose() + b * b.transpose() + c * c.transpose();
        second += (s + 9.0 * cen * cen.transpose()) * (area / 12.0);
    }
    let mut axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    if total > 0.0 {
        mean /= total;
        let cov = second / total - mean * mean.transpose();
        let eig = SymmetricEigen::new(cov);
        let e0 = eig.eigenvectors.column(0).normalize();
        let e1 = eig.eigenvectors.column(1).normalize();
        let e1 = (e1 - e0 * e0.dot(&e1)).normalize();
        if e0.iter().chain(e1.iter()).all(|x| x.is_finite()) {
            axes = [e0, e1, e0.cross(&e1)];
        }
    }
    let pca = fit(&mesh.vertices, axes);
    let aabb = fit(&mesh.vertices, [Vec3::x(), Vec3::y(), Vec3::z()]);
    Ok(if pca.volume() < aabb.volume() { pca } else { aabb })
}
