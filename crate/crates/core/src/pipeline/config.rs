use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::chunker::{ChunkerConfig, FleetSpec};
use crate::controlsim::{MissionConfig, PlantSpec};
use crate::evaluate::GridConfig;
use crate::fixtures;
use crate::geometry::{stl, TriangleMesh, COPLANAR_EPS};
use crate::pathgen::SliceConfig;

/// Where the target mesh comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    Rectangle,
    Hexagon,
    /// Binary or ASCII STL; `scale` converts file units to meters.
    Stl { path: PathBuf, #[serde(default = "unit_scale")] scale: f64 },
}

fn unit_scale() -> f64 {
    1.0
}

impl MeshSource {
    pub fn load(&self) -> Result<TriangleMesh> {
        match self {
            MeshSource::Rectangle => Ok(fixtures::rectangle()),
            MeshSource::Hexagon => Ok(fixtures::hexagon()),
            MeshSource::Stl { path, scale } => {
                let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
                stl::parse(&bytes, *scale).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
            }
        }
    }
}

/// Every stage's settings plus the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub input: MeshSource,
    pub seed: u64,
    pub chunker: ChunkerConfig,
    pub fleet: FleetSpec,
    /// Round horizontal cuts to the slicer's layer grid.
    pub snap_ground_cuts: bool,
    /// Coplanarity tolerance for dependency detection, m.
    pub dependency_eps: f64,
    pub slice: SliceConfig,
    pub mission: MissionConfig,
    pub plant: PlantSpec,
    pub grid: GridConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::rectangle()
    }
}

impl PipelineConfig {
    /// The plate build: 4 L canisters, 2.5 cm layers, 3 cm lines.
    pub fn rectangle() -> PipelineConfig {
        PipelineConfig {
            input: MeshSource::Rectangle,
            seed: 0,
            chunker: ChunkerConfig::default(),
            fleet: FleetSpec { canisters: vec![4.0; 4], resupply: true },
            snap_ground_cuts: true,
            dependency_eps: COPLANAR_EPS,
            slice: SliceConfig::default(),
            mission: MissionConfig::default(),
            plant: PlantSpec::default(),
            grid: GridConfig::default(),
        }
    }

    /// The hexagonal ring: 6 L canisters, 4.5 cm layers, 4 cm lines.
    pub fn hexagon() -> PipelineConfig {
        let mut c = PipelineConfig::rectangle();
        c.input = MeshSource::Hexagon;
        c.fleet.canisters = vec![6.0; 4];
        c.slice.layer_height = 0.045;
        c.slice.line_width = 0.04;
        c.chunker.line_width = 0.04;
        c
    }

    pub fn from_json(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        PipelineConfig::from_json(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {}", path.display(), e.to_string())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: String| PipelineError::Config(e);
        self.chunker.validate().map_err(|e| cfg(e.to_string()))?;
        self.fleet.validate().map_err(|e| cfg(e.to_string()))?;
        self.slice.validate().map_err(|e| cfg(e.to_string()))?;
        self.mission.validate().map_err(|e| cfg(e.to_string()))?;
        self.grid.validate().map_err(|e| cfg(e.to_string()))?;
        if (self.slice.sample_period - self.mission.nmpc.model.dt).abs() > 1e-12 {
            return Err(cfg("slice.sample_period must equal the controller step".into()));
        }
        if self.plant.substeps == 0 {
            return Err(cfg("plant.substeps must be >= 1".into()));
        }
        if !(self.dependency_eps > 0.0) {
            return Err(cfg("dependency_eps must be positive".into()));
        }
        Ok(())
    }

    /// Chunker settings with layer snapping applied.
    pub fn chunker_config(&self) -> ChunkerConfig {
        let mut c = self.chunker.clone();
        if self.snap_ground_cuts && c.sampler.layer_height.is_none() {
            c.sampler.layer_height = Some(self.slice.layer_height);
        }
        c
    }

    /// Seed of the plant's measurement noise.
    pub fn plant_seed(&self) -> u64 {
        self.seed.wrapping_add(0x5EED)
    }
}
