use std::path::Path;

use serde::{Deserialize, Serialize};

use super::artifacts::{self as art, MissionRecord, OutDir};
use super::{
    Dispersion, InterlockRecord, Manifest, MeshSource, PairRecord, PipelineConfig, PipelineError, Result, SliceRecord,
    Summary,
};
use crate::chunker::{beam_search, volume_dispersion, BspTree, Chunk};
use crate::controlsim::{run_mission, MissionTrace};
use crate::depgraph::{plan, BuildPlan};
use crate::evaluate::{
    compare_grids, deposited_tip_positions, error_series_csv, rasterize_deposition, rasterize_path, tracking_stats,
    voxelize_mesh, Comparison, OccupancyGrid, TrackingStats,
};
use crate::geometry::{stl, TriangleMesh};
use crate::interlock::interlock_all;
use crate::pathgen::{
    elevate_path, interpolate_references, references_from_csv, references_to_csv, slice_mesh, Frame,
    ManufacturingPath, Reference, SliceConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkCoverage {
    pub chunk: usize,
    /// Fraction of the chunk's voxels reached by its padded path.
    pub coverage: f64,
    /// Path voxels outside the chunk dilated by one voxel.
    pub outside_dilated: usize,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub reference: OccupancyGrid,
    pub measured: OccupancyGrid,
    pub deposition: Comparison,
    pub chunk_coverage: Vec<ChunkCoverage>,
    pub tracking: TrackingStats,
    pub errors_csv: String,
}

#[derive(Debug, Clone, Serialize)]
struct EvaluationRecord<'a> {
    origin: [f64; 3],
    voxel: f64,
    dims: [usize; 3],
    deposition: &'a Comparison,
    chunk_coverage: &'a [ChunkCoverage],
}

/// Everything a full run produces, in memory.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub manifest: Manifest,
    pub chunks: Vec<Chunk>,
    pub plan: BuildPlan,
    pub interlock: InterlockRecord,
    pub interlocked: Vec<Chunk>,
    pub paths: Vec<ManufacturingPath>,
    pub streams: Vec<Vec<Reference>>,
    pub trace: MissionTrace,
    pub evaluation: Evaluation,
    pub summary: Summary,
}

fn decompose(mesh: &TriangleMesh, source: &MeshSource, cfg: &PipelineConfig) -> Result<(Manifest, Vec<Chunk>)> {
    let outcome = beam_search(mesh, &cfg.chunker_config(), &cfg.fleet, cfg.seed)?;
    let (mean, std, cv) = volume_dispersion(&outcome.tree.leaf_volumes())?;
    let manifest = Manifest::new(source.clone(), &outcome, Dispersion { mean, std, cv });
    Ok((manifest, outcome.tree.chunks()))
}

/// Rebuilds the tagged chunks of a manifest by re-applying its cuts.
pub fn replay_chunks(mesh: &TriangleMesh, manifest: &Manifest) -> Result<Vec<Chunk>> {
    let mut tree = BspTree::new(mesh.clone()).map_err(PipelineError::Chunk)?;
    for c in &manifest.cuts {
        tree = tree
            .apply_cut(&c.plane())?
            .ok_or_else(|| PipelineError::Artifact(format!("cut {} does not split the mesh", c.id)))?;
    }
    let chunks = tree.chunks();
    let agrees = chunks.len() == manifest.chunks.len()
        && chunks
            .iter()
            .zip(&manifest.chunks)
            .all(|(a, b)| (a.volume - b.volume).abs() <= 1e-9 * (1.0 + b.volume.abs()));
    if !agrees {
        return Err(PipelineError::Artifact("manifest does not match its source mesh".into()));
    }
    Ok(chunks)
}

fn interlock_stage(chunks: &[Chunk], plan: &BuildPlan, l_h: f64) -> Result<(InterlockRecord, Vec<Chunk>)> {
    let rep = interlock_all(chunks, &plan.graph, l_h)?;
    let record = InterlockRecord {
        processed: rep
            .processed
            .iter()
            .zip(&rep.areas)
            .map(|(p, &(inclined_area, stepped_area))| PairRecord {
                bottom: p.bottom,
                top: p.top,
                plane: p.plane.id.0,
                inclined_area,
                stepped_area,
            })
            .collect(),
        skipped: rep.skipped.iter().map(|p| (p.bottom, p.top)).collect(),
        volumes: rep.chunks.iter().map(|c| c.volume).collect(),
    };
    Ok((record, rep.chunks))
}

/// Extruder-frame paths of every chunk, by id.
pub fn slice_all(meshes: &[&TriangleMesh], cfg: &SliceConfig) -> Result<Vec<ManufacturingPath>> {
    meshes.iter().map(|m| Ok(slice_mesh(m, cfg)?)).collect()
}

/// Timed body-frame reference streams for the given extruder paths.
pub fn reference_streams(paths: &[ManufacturingPath], cfg: &SliceConfig) -> Result<Vec<Vec<Reference>>> {
    paths
        .iter()
        .map(|p| Ok(interpolate_references(&elevate_path(p, cfg.extruder_offset), cfg.deposition_speed, cfg.sample_period)?))
        .collect()
}

fn slice_records(paths: &[ManufacturingPath], streams: &[Vec<Reference>]) -> Vec<SliceRecord> {
    paths
        .iter()
        .zip(streams)
        .enumerate()
        .map(|(chunk, (p, s))| SliceRecord {
            chunk,
            layers: p.n_layers(),
            loops: p.n_loops(),
            path_length: p.length(),
            duration: s.last().map_or(0.0, |r| r.t),
        })
        .collect()
}

/// Reference and measured deposition grids, per-chunk path coverage and
/// tracking statistics.
pub fn evaluate_run(
    target: &TriangleMesh,
    chunks: &[&TriangleMesh],
    paths: &[ManufacturingPath],
    trace: &MissionTrace,
    cfg: &PipelineConfig,
) -> Result<Evaluation> {
    let (lo, hi) = target.bounds().ok_or_else(|| PipelineError::Input("empty target mesh".into()))?;
    let grid = OccupancyGrid::for_bounds(lo, hi, &cfg.grid)?;
    let (l_w, l_h, l_ex) = (cfg.slice.line_width, cfg.slice.layer_height, cfg.slice.extruder_offset);
    let mut reference = grid.empty_like();
    let mut chunk_coverage = Vec::with_capacity(chunks.len());
    for (chunk, (mesh, path)) in chunks.iter().zip(paths).enumerate() {
        let dep = rasterize_path(path, l_w, l_h, &grid)?;
        let solid = voxelize_mesh(mesh, &grid);
        chunk_coverage.push(ChunkCoverage {
            chunk,
            coverage: compare_grids(&solid, &dep)?.coverage,
            outside_dilated: dep.difference_count(&solid.dilate())?,
        });
        reference.union_with(&dep)?;
    }
    let measured = rasterize_deposition(&deposited_tip_positions(trace, l_ex), l_w, l_h, &grid)?;
    Ok(Evaluation {
        deposition: compare_grids(&reference, &measured)?,
        reference,
        measured,
        chunk_coverage,
        tracking: tracking_stats(trace, l_ex)?,
        errors_csv: error_series_csv(trace, l_ex),
    })
}

fn mission_record(trace: &MissionTrace) -> MissionRecord {
    MissionRecord {
        duration: trace.samples.last().map_or(0.0, |s| s.t),
        samples: trace.samples.len(),
        extruding_samples: trace.samples.iter().filter(|s| s.extrude).count(),
        unconverged_solves: trace.unconverged_solves,
        canister_swaps: trace.canister_swaps,
    }
}

/// Runs every stage in memory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let mesh = cfg.input.load()?;
    run_pipeline_on(&mesh, cfg)
}

fn run_pipeline_on(mesh: &TriangleMesh, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let (manifest, chunks) = decompose(mesh, &cfg.input, cfg)?;
    let plan = plan(&chunks, &cfg.fleet, cfg.dependency_eps)?;
    let (interlock, interlocked) = interlock_stage(&chunks, &plan, cfg.slice.layer_height)?;
    let meshes: Vec<&TriangleMesh> = interlocked.iter().map(|c| c.mesh.as_ref()).collect();
    let (paths, streams) = as_written(slice_all(&meshes, &cfg.slice)?, &cfg.slice)?;
    let trace = run_mission(&plan, &streams, &cfg.fleet, &cfg.plant, &cfg.mission, cfg.plant_seed())?;
    let evaluation = evaluate_run(mesh, &meshes, &paths, &trace, cfg)?;
    let layers = (0..plan.layers.n_layers())
        .map(|l| plan.sequence.iter().copied().filter(|&c| plan.layers.layer_of[c] == l).collect())
        .collect();
    let summary = Summary {
        seed: cfg.seed,
        input_volume: manifest.input_volume,
        chunk_volumes: manifest.chunks.iter().map(|c| c.volume).collect(),
        dispersion: manifest.dispersion,
        sequence: plan.sequence.clone(),
        layers,
        interlocked_pairs: interlock.processed.len(),
        interlocked_volumes: interlock.volumes.clone(),
        mission: mission_record(&trace),
        tracking: evaluation.tracking.clone(),
        deposition: evaluation.deposition,
        chunk_coverage: evaluation.chunk_coverage.clone(),
    };
    Ok(PipelineRun { manifest, chunks, plan, interlock, interlocked, paths, streams, trace, evaluation, summary })
}

fn write_chunks(out: &OutDir, manifest: &Manifest, chunks: &[Chunk]) -> Result<()> {
    for c in chunks {
        out.write(&art::chunk_stl(c.id), stl::to_binary(&c.mesh))?;
    }
    out.write_json(art::MANIFEST, manifest)
}

fn write_interlock(out: &OutDir, record: &InterlockRecord, chunks: &[Chunk]) -> Result<()> {
    for c in chunks {
        out.write(&art::interlocked_stl(c.id), stl::to_binary(&c.mesh))?;
    }
    out.write_json(art::INTERLOCK, record)
}

fn write_paths(out: &OutDir, paths: &[ManufacturingPath], streams: &[Vec<Reference>]) -> Result<()> {
    for (i, (p, s)) in paths.iter().zip(streams).enumerate() {
        out.write(&art::path_text(i), p.to_text())?;
        out.write(&art::refs_csv(i), references_to_csv(s))?;
    }
    out.write_json(art::SLICE, &slice_records(paths, streams))
}

fn write_trace(out: &OutDir, trace: &MissionTrace) -> Result<()> {
    out.write(art::TRACE_CSV, trace.to_csv())?;
    let json = serde_json::to_string(trace).map_err(|e| PipelineError::Artifact(e.to_string()))?;
    out.write(art::TRACE_JSON, json)?;
    out.write_json(art::MISSION, &mission_record(trace))
}

fn write_evaluation(out: &OutDir, ev: &Evaluation) -> Result<()> {
    let g = &ev.reference;
    out.write_json(
        art::EVALUATION,
        &EvaluationRecord {
            origin: g.origin.into(),
            voxel: g.voxel,
            dims: g.dims,
            deposition: &ev.deposition,
            chunk_coverage: &ev.chunk_coverage,
        },
    )?;
    out.write(art::REFERENCE_GRID, ev.reference.to_rle())?;
    out.write(art::MEASURED_GRID, ev.measured.to_rle())?;
    out.write_json(art::STATS, &ev.tracking)?;
    out.write(art::ERRORS, &ev.errors_csv)
}

/// Paths and streams at the precision of their text artifacts, so a run
/// from files and an in-memory run see the same numbers.
fn as_written(paths: Vec<ManufacturingPath>, cfg: &SliceConfig) -> Result<(Vec<ManufacturingPath>, Vec<Vec<Reference>>)> {
    let streams = reference_streams(&paths, cfg)?
        .iter()
        .map(|s| Ok(references_from_csv(&references_to_csv(s))?))
        .collect::<Result<Vec<_>>>()?;
    let paths = paths
        .iter()
        .map(|p| Ok(ManufacturingPath::from_text(p.frame, &p.to_text())?))
        .collect::<Result<Vec<_>>>()?;
    Ok((paths, streams))
}

/// Interlocked chunks rebuilt from the manifest and plan, checked against
/// `interlock.json`.
fn read_interlocked(out: &OutDir, cfg: &PipelineConfig) -> Result<Vec<Chunk>> {
    let manifest: Manifest = out.read_json(art::MANIFEST)?;
    let plan: BuildPlan = out.read_json(art::PLAN)?;
    let record: InterlockRecord = out.read_json(art::INTERLOCK)?;
    let chunks = replay_chunks(&manifest.source.load()?, &manifest)?;
    let (_, interlocked) = interlock_stage(&chunks, &plan, cfg.slice.layer_height)?;
    let agrees = interlocked.len() == record.volumes.len()
        && interlocked.iter().zip(&record.volumes).all(|(c, v)| (c.volume - v).abs() <= 1e-9 * (1.0 + v.abs()));
    if !agrees {
        return Err(PipelineError::Artifact("interlock.json does not match the manifest and plan".into()));
    }
    Ok(interlocked)
}

/// Decomposes the input mesh: chunk STLs plus `manifest.json`.
pub fn cmd_chunk(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let mesh = cfg.input.load()?;
    let (manifest, chunks) = decompose(&mesh, &cfg.input, cfg)?;
    write_chunks(&OutDir::new(out), &manifest, &chunks)
}

/// Dependency graph, layers, sequence and canisters: `plan.json`.
pub fn cmd_plan(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let dir = OutDir::new(out);
    let manifest: Manifest = dir.read_json(art::MANIFEST)?;
    let chunks = replay_chunks(&manifest.source.load()?, &manifest)?;
    let plan = plan(&chunks, &cfg.fleet, cfg.dependency_eps)?;
    dir.write_json(art::PLAN, &plan)
}

/// Staircase interlocking of inclined contacts: `interlocked/` and
/// `interlock.json`.
pub fn cmd_interlock(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let dir = OutDir::new(out);
    let manifest: Manifest = dir.read_json(art::MANIFEST)?;
    let plan: BuildPlan = dir.read_json(art::PLAN)?;
    let chunks = replay_chunks(&manifest.source.load()?, &manifest)?;
    let (record, interlocked) = interlock_stage(&chunks, &plan, cfg.slice.layer_height)?;
    write_interlock(&dir, &record, &interlocked)
}

/// Paths and reference streams for every interlocked chunk.
pub fn cmd_slice(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let dir = OutDir::new(out);
    let chunks = read_interlocked(&dir, cfg)?;
    let meshes: Vec<&TriangleMesh> = chunks.iter().map(|c| c.mesh.as_ref()).collect();
    let (paths, streams) = as_written(slice_all(&meshes, &cfg.slice)?, &cfg.slice)?;
    write_paths(&dir, &paths, &streams)
}

/// Flies the plan: `trace.csv`, `trace.json` and `mission.json`.
pub fn cmd_simulate(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let dir = OutDir::new(out);
    let plan: BuildPlan = dir.read_json(art::PLAN)?;
    let slices: Vec<SliceRecord> = dir.read_json(art::SLICE)?;
    let streams = slices
        .iter()
        .map(|s| Ok(references_from_csv(&dir.read_string(&art::refs_csv(s.chunk))?)?))
        .collect::<Result<Vec<_>>>()?;
    let trace = run_mission(&plan, &streams, &cfg.fleet, &cfg.plant, &cfg.mission, cfg.plant_seed())?;
    write_trace(&dir, &trace)
}

/// Deposition grids, coverage and tracking statistics of a simulated run.
pub fn cmd_evaluate(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let dir = OutDir::new(out);
    let manifest: Manifest = dir.read_json(art::MANIFEST)?;
    let slices: Vec<SliceRecord> = dir.read_json(art::SLICE)?;
    let trace: MissionTrace = dir.read_json(art::TRACE_JSON)?;
    let chunks = read_interlocked(&dir, cfg)?;
    if chunks.len() != slices.len() {
        return Err(PipelineError::Artifact("slice.json does not match interlock.json".into()));
    }
    let meshes: Vec<&TriangleMesh> = chunks.iter().map(|c| c.mesh.as_ref()).collect();
    let paths = slices
        .iter()
        .map(|s| Ok(ManufacturingPath::from_text(Frame::Extruder, &dir.read_string(&art::path_text(s.chunk))?)?))
        .collect::<Result<Vec<_>>>()?;
    let target = manifest.source.load()?;
    let ev = evaluate_run(&target, &meshes, &paths, &trace, cfg)?;
    write_evaluation(&dir, &ev)
}

/// All stages, every artifact, and `summary.json`.
pub fn cmd_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<PipelineRun> {
    let run = run_pipeline(cfg)?;
    let dir = OutDir::new(out);
    dir.write("config.json", cfg.to_json() + "\n")?;
    write_chunks(&dir, &run.manifest, &run.chunks)?;
    dir.write_json(art::PLAN, &run.plan)?;
    write_interlock(&dir, &run.interlock, &run.interlocked)?;
    write_paths(&dir, &run.paths, &run.streams)?;
    write_trace(&dir, &run.trace)?;
    write_evaluation(&dir, &run.evaluation)?;
    dir.write_json(art::SUMMARY, &run.summary)?;
    Ok(run)
}
