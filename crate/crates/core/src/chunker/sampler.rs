use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChunkerError, Result};
use crate::geometry::{CutPlane, GeometryError, PlaneId, TriangleMesh, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Maximum polar angle of sampled normals, rad.
    pub phi_max: f64,
    pub n_normals: usize,
    pub planes_per_family: usize,
    /// Extruder reach and height, m.
    pub extruder_l: f64,
    pub extruder_h: f64,
    pub phi_ar_max: f64,
    /// When set, horizontal cuts snap to multiples of this height, m.
    pub layer_height: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            phi_max: PI / 4.0,
            n_normals: 8,
            planes_per_family: 5,
            extruder_l: 0.1,
            extruder_h: 0.1,
            phi_ar_max: PI / 4.0,
            layer_height: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi_max >= 0.0 && self.phi_max <= PI / 2.0) {
            return Err(ChunkerError::InvalidConfig(format!("phi_max {} outside [0, pi/2]", self.phi_max)));
        }
        if self.planes_per_family == 0 {
            return Err(ChunkerError::InvalidConfig("planes_per_family must be >= 1".into()));
        }
        if self.layer_height.is_some_and(|h| !(h > 0.0)) {
            return Err(ChunkerError::InvalidConfig("layer_height must be positive".into()));
        }
        phi_max_collision(self.extruder_l, self.extruder_h)?;
        Ok(())
    }

    /// Combined polar bound from the aspect-ratio and collision limits.
    pub fn combined_phi_max(&self) -> Result<f64> {
        Ok(self.phi_ar_max.max(phi_max_collision(self.extruder_l, self.extruder_h)?))
    }
}

/// Steepest cut normal that keeps the extruder clear of printed material.
pub fn phi_max_collision(l: f64, h: f64) -> Result<f64> {
    if !(l > 0.0 && h > 0.0) {
        return Err(ChunkerError::NonPositiveDimension);
    }
    Ok((h / l).atan())
}

/// Normals uniform over the spherical cap of polar angle `cfg.phi_max`.
pub fn sample_normals(cfg: &SamplerConfig, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zmin = cfg.phi_max.cos();
    (0..cfg.n_normals)
        .map(|_| {
            let z: f64 = if zmin >= 1.0 { 1.0 } else { rng.gen_range(zmin..=1.0) };
            let theta: f64 = rng.gen_range(-PI..=PI);
            let r = (1.0 - z * z).max(0.0).sqrt();
            Vec3::new(r * theta.cos(), r * theta.sin(), z)
        })
        .collect()
}

/// `k` planes with `normal`, at fractions `i / (k + 1)` of the mesh's extent
/// along it.
pub fn plane_family(normal: &Vec3, mesh: &TriangleMesh, k: usize) -> Result<Vec<CutPlane>> {
    let n = normal.normalize();
    let (lo, hi) = mesh.support_interval(&n).ok_or(GeometryError::EmptyMesh)?;
    Ok((1..=k)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (k + 1) as f64;
            CutPlane::new(PlaneId(0), n, n * t)
        })
        .collect())
}

/// Moves horizontal planes onto the nearest multiple of `l_h`, dropping
/// those that leave the mesh's open z-range and duplicates.
pub fn snap_to_layers(planes: Vec<CutPlane>, mesh: &TriangleMesh, l_h: f64) -> Vec<CutPlane> {
    let Some((lo, hi)) = mesh.support_interval(&Vec3::z()) else { return planes };
    let mut out: Vec<CutPlane> = Vec::with_capacity(planes.len());
    for p in planes {
        if !p.is_ground() {
            out.push(p);
            continue;
        }
        let z = (p.offset() / l_h).round() * l_h;
        let dup = out.iter().any(|q| q.is_ground() && (q.offset() - z).abs() < 1e-12);
        if z > lo + 1e-9 && z < hi - 1e-9 && !dup {
            out.push(CutPlane::horizontal(p.id, z));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_bound() {
        assert!((phi_max_collision(1.0, 1.0).unwrap() - PI / 4.0).abs() < 1e-12);
        let l = 0.03 * 3f64.sqrt();
        assert!((phi_max_collision(l, 0.03).unwrap() - PI / 6.0).abs() < 1e-12);
        assert_eq!(phi_max_collision(0.0, 1.0), Err(ChunkerError::NonPositiveDimension));
    }

    #[test]
    fn combined_bound_takes_the_larger() {
        let cfg = SamplerConfig { phi_ar_max: PI / 6.0, extruder_l: 1.0, extruder_h: 1.0, ..Default::default() };
        assert!((cfg.combined_phi_max().unwrap() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cap_gives_pole() {
        let cfg = SamplerConfig { phi_max: 0.0, ..Default::default() };
        for n in sample_normals(&cfg, 3) {
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn samples_stay_in_cap_and_are_deterministic() {
        let cfg = SamplerConfig { n_normals: 500, ..Default::default() };
        let a = sample_normals(&cfg, 11);
        assert_eq!(a, sample_normals(&cfg, 11));
        for n in &a {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.z.acos() <= PI / 4.0 + 1e-9);
        }
    }

    #[test]
    fn cap_samples_pass_chi_square() {
        // Equal-area bins: 4 bands in cos(phi) times 4 azimuth sectors.
        let cfg = SamplerConfig { n_normals: 8000, ..Default::default() };
        let zmin = cfg.phi_max.cos();
        let mut bins = [0usize; 16];
        for n in sample_normals(&cfg, 5) {
            let band = (((n.z - zmin) / (1.0 - zmin)) * 4.0).floor().clamp(0.0, 3.0) as usize;
            let sector = (((n.y.atan2(n.x) + PI) / (2.0 * PI)) * 4.0).floor().clamp(0.0, 3.0) as usize;
            bins[band * 4 + sector] += 1;
        }
        let expected = 8000.0 / 16.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 15 degrees of freedom, p = 0.01 critical value.
        assert!(chi2 < 30.58, "chi2 = {chi2}");
    }

    #[test]
    fn family_spacing() {
        let cube = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let one = plane_family(&Vec3::z(), &cube, 1).unwrap();
        assert!((one[0].origin.z - 0.5).abs() < 1e-12);
        let five = plane_family(&Vec3::z(), &cube, 5).unwrap();
        for (i, p) in five.iter().enumerate() {
            assert!((p.offset() - (i + 1) as f64 / 6.0).abs() < 1e-12);
        }
        let wide = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0));
        let xs: Vec<f64> = plane_family(&Vec3::x(), &wide, 3).unwrap().iter().map(|p| p.offset()).collect();
        for (x, want) in xs.iter().zip([0.5, 1.0, 1.5]) {
            assert!((x - want).abs() < 1e-12);
        }
        assert!(plane_family(&Vec3::z(), &TriangleMesh::default(), 2).is_err());
    }

    #[test]
    fn horizontal_cuts_snap_to_layers() {
        let plate = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.08));
        let snapped = snap_to_layers(plane_family(&Vec3::z(), &plate, 5).unwrap(), &plate, 0.025);
        let zs: Vec<f64> = snapped.iter().map(|p| p.offset()).collect();
        assert_eq!(zs.len(), 3);
        for (z, want) in zs.iter().zip([0.025, 0.05, 0.075]) {
            assert!((z - want).abs() < 1e-12);
        }
        let tilted = plane_family(&Vec3::new(0.3, 0.0, 1.0), &plate, 2).unwrap();
        assert_eq!(snap_to_layers(tilted.clone(), &plate, 0.025), tilted);
    }
}
