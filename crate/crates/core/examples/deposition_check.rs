//! Compare what a path would deposit against the part it was sliced from.

use aeroprint::evaluate::{compare_grids, rasterize_path, voxelize_mesh, GridConfig, OccupancyGrid};
use aeroprint::geometry::{TriangleMesh, Vec3};
use aeroprint::pathgen::{slice_mesh, SliceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SliceConfig::default();
    let part = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(0.4, 0.3, 0.1));
    let (lo, hi) = part.bounds().ok_or("empty mesh")?;
    let grid = OccupancyGrid::for_bounds(lo, hi, &GridConfig::default())?;

    let target = voxelize_mesh(&part, &grid);
    let path = slice_mesh(&part, &cfg)?;
    let printed = rasterize_path(&path, cfg.line_width, cfg.layer_height, &grid)?;
    let c = compare_grids(&target, &printed)?;
    println!("target {:.2} L, printed {:.2} L", target.volume_liters(), printed.volume_liters());
    println!("coverage {:.3}, IoU {:.3}, excess {:.3}", c.coverage, c.iou, c.excess);

    let outside = printed.difference_count(&target.dilate())?;
    println!("voxels beyond one-voxel tolerance: {outside}");
    Ok(())
}
