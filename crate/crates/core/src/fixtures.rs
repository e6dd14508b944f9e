//! Bundled test shapes, in meters with the base on z = 0.

use crate::geometry::TriangleMesh;

/// 0.55 x 0.55 x 0.08 m plate with a centered 0.20 x 0.20 m through-hole (21.0 L).
pub fn rectangle() -> TriangleMesh {
    let outer = [[0.0, 0.0], [0.55, 0.0], [0.55, 0.55], [0.0, 0.55]];
    let hole = vec![[0.175, 0.175], [0.375, 0.175], [0.375, 0.375], [0.175, 0.375]];
    TriangleMesh::extrude(&outer, &[hole], 0.0, 0.08)
}

pub const HEX_MID_SIDE: f64 = 0.3155;
pub const HEX_WALL: f64 = 0.10;
pub const HEX_HEIGHT: f64 = 0.10;

/// Regular hexagonal ring with mitred corners, centered on the z axis
/// (18.93 L).
pub fn hexagon() -> TriangleMesh {
    hexagon_ring(HEX_MID_SIDE, HEX_WALL, HEX_HEIGHT)
}

/// Hexagonal ring by mid-wall side length, wall thickness and height.
pub fn hexagon_ring(mid_side: f64, wall: f64, height: f64) -> TriangleMesh {
    let apothem = mid_side * (std::f64::consts::PI / 6.0).cos();
    let ring = |a: f64| -> Vec<[f64; 2]> {
        let r = a / (std::f64::consts::PI / 6.0).cos();
        (0..6)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 3.0;
                [r * t.cos(), r * t.sin()]
            })
            .collect()
    };
    let outer = ring(apothem + wall / 2.0);
    let inner = ring(apothem - wall / 2.0);
    TriangleMesh::extrude(&outer, &[inner], 0.0, height)
}
