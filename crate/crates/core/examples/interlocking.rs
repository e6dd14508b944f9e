//! Replace inclined chunk interfaces with layer-aligned steps.

use aeroprint::chunker::beam_search;
use aeroprint::depgraph::build_graph_default;
use aeroprint::fixtures;
use aeroprint::interlock::interlock_all;
use aeroprint::pipeline::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PipelineConfig::rectangle();
    let out = beam_search(&fixtures::rectangle(), &cfg.chunker_config(), &cfg.fleet, cfg.seed)?;
    let chunks = out.tree.chunks();
    let graph = build_graph_default(&chunks)?;
    let report = interlock_all(&chunks, &graph, cfg.slice.layer_height)?;

    for (p, (inclined, stepped)) in report.processed.iter().zip(&report.areas) {
        println!(
            "chunk {} on {}: inclined {:.4} m^2 -> stepped {:.4} m^2 (x{:.2})",
            p.top,
            p.bottom,
            inclined,
            stepped,
            stepped / inclined
        );
    }
    for p in &report.skipped {
        println!("chunk {} on {}: left as is", p.top, p.bottom);
    }
    let before: f64 = chunks.iter().map(|c| c.volume).sum();
    let after: f64 = report.chunks.iter().map(|c| c.volume).sum();
    println!("total volume {before:.4} L -> {after:.4} L");
    for (a, b) in chunks.iter().zip(&report.chunks) {
        println!("  chunk {}: {:.3} L -> {:.3} L", a.id, a.volume, b.volume);
    }
    Ok(())
}
