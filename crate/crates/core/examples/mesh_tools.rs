//! Load a part, cut it, fit bounding boxes and write the pieces back out.

use aeroprint::geometry::{compute_obb, split_mesh, stl, CutPlane, PlaneId, TriangleMesh, Vec3, M3_TO_L};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let part = match std::env::args().nth(1) {
        Some(path) => stl::read(path.as_ref(), 1.0)?,
        None => TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(0.3, 0.2, 0.1)),
    };
    let obb = compute_obb(&part)?;
    println!(
        "part: {} faces, {:.3} L, extents {:?}",
        part.faces.len(),
        part.volume()? * M3_TO_L,
        obb.sorted_extents()
    );

    let (lo, hi) = part.bounds().ok_or("empty mesh")?;
    let center = (lo + hi) / 2.0;
    let cut = CutPlane::new(PlaneId(0), Vec3::new(0.5, 0.0, 1.0), center);
    let (below, above) = split_mesh(&part, &cut)?;
    for (name, piece) in [("below", &below), ("above", &above)] {
        let box_ = compute_obb(piece)?;
        println!(
            "{name}: {:.3} L, min extent {:.3} m, closed {}",
            piece.volume()? * M3_TO_L,
            box_.min_extent(),
            piece.is_closed()
        );
    }

    let dir = std::env::temp_dir().join("aeroprint-mesh-tools");
    std::fs::create_dir_all(&dir)?;
    stl::write(&dir.join("below.stl"), &below)?;
    stl::write(&dir.join("above.stl"), &above)?;
    let back = stl::read(&dir.join("above.stl"), 1.0)?;
    println!("round trip: {:.6} L in {}", back.volume()? * M3_TO_L, dir.display());
    Ok(())
}
