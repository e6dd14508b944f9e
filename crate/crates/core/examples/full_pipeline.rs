//! Run the whole build for a preset and write every artifact.
//!
//! `cargo run --release --example full_pipeline -- hexagon /tmp/hex`

use std::path::PathBuf;

use aeroprint::pipeline::{cmd_pipeline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next().as_deref() {
        Some("hexagon") => PipelineConfig::hexagon(),
        _ => PipelineConfig::rectangle(),
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("aeroprint-run"));
    let run = cmd_pipeline(&cfg, &out)?;
    let s = &run.summary;

    println!("{} chunks, c_v {:.3}, order {:?}", s.chunk_volumes.len(), s.dispersion.cv, s.sequence);
    println!(
        "mission {:.0} s, {} swaps, {} capped solves",
        s.mission.duration, s.mission.canister_swaps, s.mission.unconverged_solves
    );
    for (c, cov) in s.tracking.chunks.iter().zip(&s.chunk_coverage) {
        println!(
            "  chunk {}: uav {:.1} mm, tip {:.1} mm, coverage {:.3}",
            c.chunk,
            c.uav.mean_3d * 1e3,
            c.tip.mean_3d * 1e3,
            cov.coverage
        );
    }
    println!("deposition IoU {:.3}, coverage {:.3}", s.deposition.iou, s.deposition.coverage);
    println!("artifacts in {}", out.display());
    Ok(())
}
