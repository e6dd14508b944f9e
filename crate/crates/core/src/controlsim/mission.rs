use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::model::{hover_input, position, state_at_rest, Disturbance, Input, State};
use super::nmhe::{nmhe_solve, NmheConfig};
use super::nmpc::{nmpc_solve, NmpcConfig};
use super::plant::{Plant, PlantSpec};
use super::{ControlError, Result};
use crate::chunker::FleetSpec;
use crate::depgraph::BuildPlan;
use crate::pathgen::{reference_at, Reference};

/// When the disturbance estimate feeds the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    Off,
    On,
    /// Enabled from the given mission time, s.
    After(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    pub nmpc: NmpcConfig,
    pub nmhe: NmheConfig,
    pub estimator: EstimatorMode,
    /// Time spent on the ground for a canister swap, s.
    pub swap_dwell: f64,
    /// Speed of transit moves between chunks, m/s.
    pub transit_speed: f64,
    /// Position error that aborts the mission, m.
    pub divergence_limit: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig {
            nmpc: NmpcConfig::default(),
            nmhe: NmheConfig::default(),
            estimator: EstimatorMode::On,
            swap_dwell: 30.0,
            transit_speed: 0.10,
            divergence_limit: 5.0,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        self.nmpc.validate()?;
        self.nmhe.validate()?;
        if !(self.transit_speed > 0.0 && self.swap_dwell >= 0.0 && self.divergence_limit > 0.0) {
            return Err(ControlError::InvalidConfig("transit speed, dwell and divergence limit".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub chunk: Option<usize>,
    pub reference: Vector3<f64>,
    pub state: State,
    pub input: Input,
    pub w_hat: Disturbance,
    pub w_true: Disturbance,
    pub extrude: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionTrace {
    pub samples: Vec<TraceSample>,
    /// Ticks where the controller hit its iteration cap.
    pub unconverged_solves: usize,
    pub canister_swaps: usize,
}

impl MissionTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,x_ref,y_ref,z_ref,x,y,z,vx,vy,vz,phi,theta,T,phi_ref,theta_ref,\
             wx_hat,wy_hat,wz_hat,wx_true,wy_true,wz_true,extrude\n",
        );
        for s in &self.samples {
            let _ = write!(out, "{:.4}", s.t);
            for v in s.reference.iter().chain(s.state.iter()).chain(s.input.iter()) {
                let _ = write!(out, ",{v:.6}");
            }
            for v in s.w_hat.rows(3, 3).iter().chain(s.w_true.rows(3, 3).iter()) {
                let _ = write!(out, ",{v:.6}");
            }
            let _ = writeln!(out, ",{}", s.extrude as u8);
        }
        out
    }
}

/// Closed-loop executor: sense, estimate, control, actuate once per tick.
pub struct Executor {
    pub plant: Plant,
    pub cfg: MissionConfig,
    pub t: f64,
    w_hat: Disturbance,
    u_prev: Input,
    warm: Option<Vec<Input>>,
    ys: VecDeque<State>,
    us: VecDeque<Input>,
    trace: MissionTrace,
}

impl Executor {
    pub fn new(plant: PlantSpec, start: Vector3<f64>, cfg: MissionConfig, seed: u64) -> Result<Executor> {
        cfg.validate()?;
        Ok(Executor {
            plant: Plant::new(plant, state_at_rest(start), seed),
            cfg,
            t: 0.0,
            w_hat: Disturbance::zeros(),
            u_prev: hover_input(),
            warm: None,
            ys: VecDeque::new(),
            us: VecDeque::new(),
            trace: MissionTrace::default(),
        })
    }

    /// Puts the vehicle at rest at `p` after `dwell` seconds off the loop.
    pub fn teleport(&mut self, p: Vector3<f64>, dwell: f64) {
        self.plant.state = state_at_rest(p);
        self.t += dwell;
        self.u_prev = hover_input();
        self.warm = None;
        self.ys.clear();
        self.us.clear();
    }

    fn estimator_on(&self) -> bool {
        match self.cfg.estimator {
            EstimatorMode::Off => false,
            EstimatorMode::On => true,
            EstimatorMode::After(t0) => self.t >= t0,
        }
    }

    fn horizon(&self, refs: &[Reference], t_local: f64) -> Vec<State> {
        let dt = self.cfg.nmpc.model.dt;
        (1..=self.cfg.nmpc.horizon)
            .map(|j| {
                let p = reference_at(refs, t_local + j as f64 * dt).position;
                let q = reference_at(refs, t_local + (j + 1) as f64 * dt).position;
                let v = (q - p) / dt;
                State::from([p.x, p.y, p.z, v.x, v.y, v.z, 0.0, 0.0])
            })
            .collect()
    }

    /// Tracks a timed reference stream to its end. While extruding, the
    /// canister depletes at `depletion_rate` (fraction per second), starting
    /// from `*depleted`.
    pub fn track(&mut self, refs: &[Reference], chunk: Option<usize>, depletion_rate: f64, depleted: &mut f64) -> Result<()> {
        if refs.is_empty() {
            return Ok(());
        }
        let dt = self.cfg.nmpc.model.dt;
        let n_e = self.cfg.nmhe.window;
        let t_end = refs[refs.len() - 1].t;
        let n_ticks = (t_end / dt).ceil() as usize + 1;
        for k in 0..n_ticks {
            let t_local = k as f64 * dt;
            let y = self.plant.measure();
            if !self.ys.is_empty() {
                self.us.push_back(self.u_prev);
            }
            self.ys.push_back(y);
            while self.ys.len() > n_e + 1 {
                self.ys.pop_front();
                self.us.pop_front();
            }
            if self.estimator_on() {
                if self.ys.len() == n_e + 1 {
                    let (ys, us) = (self.ys.make_contiguous().to_vec(), self.us.make_contiguous().to_vec());
                    self.w_hat = nmhe_solve(&ys, &us, &self.w_hat, &self.cfg.nmhe, &self.cfg.nmpc.model)?.w;
                }
            } else {
                self.w_hat = Disturbance::zeros();
            }
            let horizon = self.horizon(refs, t_local);
            let sol = nmpc_solve(&y, &horizon, &self.u_prev, &self.w_hat, &self.cfg.nmpc, self.warm.as_deref())?;
            if !sol.converged {
                self.trace.unconverged_solves += 1;
            }
            let u = sol.first();
            let mut next = sol.inputs[1..].to_vec();
            next.push(sol.inputs[sol.inputs.len() - 1]);
            self.warm = Some(next);
            let r = reference_at(refs, t_local);
            let x = self.plant.state;
            let err = (position(&x) - r.position).norm();
            if !err.is_finite() || err > self.cfg.divergence_limit {
                return Err(ControlError::DivergedState { t: self.t, error: err });
            }
            self.trace.samples.push(TraceSample {
                t: self.t,
                chunk,
                reference: r.position,
                state: x,
                input: u,
                w_hat: self.w_hat,
                w_true: self.plant.spec.disturbance(&x, *depleted),
                extrude: r.extrude,
            });
            self.plant.step(&u, *depleted, dt);
            if r.extrude {
                *depleted += depletion_rate * dt;
            }
            self.u_prev = u;
            self.t += dt;
        }
        Ok(())
    }

    pub fn position(&self) -> Vector3<f64> {
        position(&self.plant.state)
    }

    pub fn finish(self) -> MissionTrace {
        self.trace
    }
}

/// Straight-line references from `a` to `b` at `speed`.
pub fn transit(a: Vector3<f64>, b: Vector3<f64>, speed: f64, dt: f64) -> Vec<Reference> {
    let len = (b - a).norm();
    let n = ((len / (speed * dt)).ceil() as usize).max(1);
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            Reference { t: s * len / speed, position: a + (b - a) * s, extrude: false }
        })
        .collect()
}

/// Flies the whole build: each chunk's body-frame reference stream in plan
/// order, transits between chunks sharing a canister, and a swap (reset to
/// the next chunk's start after a dwell) whenever the flight slot changes.
pub fn run_mission(
    plan: &BuildPlan,
    streams: &[Vec<Reference>],
    fleet: &FleetSpec,
    plant: &PlantSpec,
    cfg: &MissionConfig,
    seed: u64,
) -> Result<MissionTrace> {
    cfg.validate()?;
    let Some(&first) = plan.sequence.first() else {
        return Ok(MissionTrace::default());
    };
    let stream = |c: usize| streams.get(c).filter(|s| !s.is_empty()).ok_or(ControlError::MissingStream(c));
    let start = stream(first)?[0].position;
    let mut ex = Executor::new(plant.clone(), start, cfg.clone(), seed)?;
    let mut slot = None;
    let mut depleted = 0.0;
    for &c in &plan.sequence {
        let refs = stream(c)?;
        let a = plan.assignments.iter().find(|a| a.chunk == c).ok_or(ControlError::MissingStream(c))?;
        if slot.is_some_and(|s| s != a.slot) {
            ex.teleport(refs[0].position, cfg.swap_dwell);
            ex.trace.canister_swaps += 1;
            depleted = 0.0;
        } else if slot.is_some() {
            let hop = transit(ex.position(), refs[0].position, cfg.transit_speed, cfg.nmpc.model.dt);
            ex.track(&hop, None, 0.0, &mut depleted)?;
        }
        slot = Some(a.slot);
        let capacity = fleet.canisters.get(a.canister).copied().unwrap_or(1.0);
        let extruding = refs.iter().filter(|r| r.extrude).count() as f64;
        let duration = (refs[refs.len() - 1].t * extruding / refs.len() as f64).max(cfg.nmpc.model.dt);
        let volume = plan.volumes.get(c).copied().unwrap_or(0.0);
        ex.track(refs, Some(c), volume / capacity / duration, &mut depleted)?;
    }
    Ok(ex.finish())
}
