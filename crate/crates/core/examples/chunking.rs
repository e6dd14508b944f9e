//! Decompose the bundled plate into canister-sized chunks.

use std::time::Instant;

use aeroprint::chunker::{beam_search, volume_dispersion, ChunkerConfig, FleetSpec};
use aeroprint::fixtures;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = fixtures::rectangle();
    let cfg = ChunkerConfig::default();
    let fleet = FleetSpec { canisters: vec![4.0; 4], resupply: true };
    let start = Instant::now();
    let out = beam_search(&mesh, &cfg, &fleet, 42)?;
    let vols = out.tree.leaf_volumes();
    let (mu, sigma, cv) = volume_dispersion(&vols)?;
    println!("{} chunks after {} iterations ({:.1?})", vols.len(), out.iterations, start.elapsed());
    for (i, v) in vols.iter().enumerate() {
        println!("  chunk {i}: {v:.3} L");
    }
    println!("mean {mu:.3} L, std {sigma:.3} L, c_v {cv:.3}, score {:.3}", out.score);
    Ok(())
}
