//! Slice one chunk into concentric loops and time it as a reference stream.

use aeroprint::fixtures;
use aeroprint::geometry::{split_mesh, CutPlane, PlaneId, Vec3};
use aeroprint::pathgen::{elevate_path, interpolate_references, references_to_csv, slice_mesh, SliceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SliceConfig::default();
    let plate = fixtures::rectangle();
    let (lo, hi) = plate.bounds().ok_or("empty mesh")?;
    let cut = CutPlane::new(PlaneId(0), Vec3::x(), Vec3::new((lo.x + hi.x) / 2.0, 0.0, 0.0));
    let (half, _) = split_mesh(&plate, &cut)?;

    let path = slice_mesh(&half, &cfg)?;
    println!(
        "{} layers, {} loops, {:.2} m of path ({:.2} m extruding)",
        path.n_layers(),
        path.n_loops(),
        path.length(),
        path.extruding().map(|s| s.length()).sum::<f64>()
    );
    let body = elevate_path(&path, cfg.extruder_offset);
    let refs = interpolate_references(&body, cfg.deposition_speed, cfg.sample_period)?;
    let last = refs.last().ok_or("empty stream")?;
    println!("{} setpoints over {:.0} s", refs.len(), last.t);
    let csv = references_to_csv(&refs);
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
