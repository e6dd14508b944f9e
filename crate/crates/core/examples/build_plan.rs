//! Chunk the hexagonal ring, then order the chunks and assign canisters.

use aeroprint::chunker::beam_search;
use aeroprint::depgraph::plan;
use aeroprint::fixtures;
use aeroprint::geometry::COPLANAR_EPS;
use aeroprint::pipeline::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PipelineConfig::hexagon();
    let mesh = fixtures::hexagon();
    let out = beam_search(&mesh, &cfg.chunker_config(), &cfg.fleet, cfg.seed)?;
    let chunks = out.tree.chunks();
    let p = plan(&chunks, &cfg.fleet, COPLANAR_EPS)?;

    println!("{} chunks in {} ground layers", chunks.len(), p.layers.n_layers());
    for (i, j) in &p.graph.edges {
        println!("  chunk {i} rests on chunk {j}");
    }
    for a in &p.assignments {
        println!(
            "  step {}: chunk {} ({:.2} L, layer {}) on canister {} flight {}",
            p.position(a.chunk).unwrap(),
            a.chunk,
            p.volumes[a.chunk],
            p.layers.layer_of[a.chunk],
            a.canister,
            a.slot
        );
    }
    Ok(())
}
