use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use aeroprint::pipeline::{self, MeshSource, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "aeroprint", version, about = "Chunked aerial 3D printing: decompose, plan, slice, fly, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults to the chosen preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory holding all stage artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Built-in settings used when no config file is given.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Rectangle)]
    preset: Preset,
    /// STL to decompose instead of the configured input.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Factor from STL units to meters.
    #[arg(long, global = true, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Rectangle,
    Hexagon,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Decompose the mesh into chunks.
    Chunk,
    /// Order the chunks and assign canisters.
    Plan,
    /// Step inclined chunk interfaces.
    Interlock,
    /// Generate extrusion paths and reference streams.
    Slice,
    /// Fly the build in closed loop.
    Simulate,
    /// Score deposition and tracking.
    Evaluate,
    /// Run every stage and write a summary.
    Pipeline,
}

fn config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => match cli.preset {
            Preset::Rectangle => PipelineConfig::rectangle(),
            Preset::Hexagon => PipelineConfig::hexagon(),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(path) = &cli.input {
        cfg.input = MeshSource::Stl { path: path.clone(), scale: cli.scale };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = config(cli)?;
    let out = &cli.out;
    match cli.command {
        Command::Chunk => pipeline::cmd_chunk(&cfg, out),
        Command::Plan => pipeline::cmd_plan(&cfg, out),
        Command::Interlock => pipeline::cmd_interlock(&cfg, out),
        Command::Slice => pipeline::cmd_slice(&cfg, out),
        Command::Simulate => pipeline::cmd_simulate(&cfg, out),
        Command::Evaluate => pipeline::cmd_evaluate(&cfg, out),
        Command::Pipeline => {
            let run = pipeline::cmd_pipeline(&cfg, out)?;
            let s = &run.summary;
            println!(
                "{} chunks, c_v {:.3}, {} swaps, deposition IoU {:.3}, coverage {:.3}",
                s.chunk_volumes.len(),
                s.dispersion.cv,
                s.mission.canister_swaps,
                s.deposition.iou,
                s.deposition.coverage
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
