use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{step_rk4, Disturbance, Input, ModelParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundEffect {
    /// Upward acceleration at zero altitude, m/s^2.
    pub c_g: f64,
    /// Altitude at which the effect vanishes, m.
    pub z_ge: f64,
}

impl Default for GroundEffect {
    fn default() -> Self {
        GroundEffect { c_g: 0.5, z_ge: 0.5 }
    }
}

/// The simulated vehicle: true parameters and disturbance profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSpec {
    pub model: ModelParams,
    pub constant: [f64; 8],
    pub ground_effect: Option<GroundEffect>,
    /// Upward acceleration once a full canister has been extruded, m/s^2.
    pub mass_depletion_peak: f64,
    pub measurement_noise: [f64; 8],
    /// RK4 substeps per control tick.
    pub substeps: usize,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec {
            model: ModelParams::default(),
            constant: [0.0; 8],
            ground_effect: Some(GroundEffect::default()),
            mass_depletion_peak: 0.3,
            measurement_noise: [0.0; 8],
            substeps: 10,
        }
    }
}

impl PlantSpec {
    /// Plant identical to the nominal model, without disturbances.
    pub fn ideal() -> PlantSpec {
        PlantSpec { ground_effect: None, mass_depletion_peak: 0.0, ..PlantSpec::default() }
    }

    pub fn with_constant(mut self, w: Disturbance) -> PlantSpec {
        self.constant = w.into();
        self
    }

    /// True disturbance at state `x` after extruding `depleted` of the
    /// current canister.
    pub fn disturbance(&self, x: &State, depleted: f64) -> Disturbance {
        let mut w = Disturbance::from(self.constant);
        if let Some(g) = self.ground_effect {
            w[5] += g.c_g * (1.0 - x[2] / g.z_ge).max(0.0);
        }
        w[5] += self.mass_depletion_peak * depleted.clamp(0.0, 1.0);
        w
    }
}

pub struct Plant {
    pub spec: PlantSpec,
    pub state: State,
    rng: ChaCha8Rng,
}

impl Plant {
    pub fn new(spec: PlantSpec, state: State, seed: u64) -> Plant {
        Plant { spec, state, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn measure(&mut self) -> State {
        let mut y = self.state;
        for i in 0..8 {
            let s = self.spec.measurement_noise[i];
            if s > 0.0 {
                y[i] += Normal::new(0.0, s).map(|n| n.sample(&mut self.rng)).unwrap_or(0.0);
            }
        }
        y
    }

    /// Advances by `dt` holding `u`, re-evaluating the disturbance per substep.
    pub fn step(&mut self, u: &Input, depleted: f64, dt: f64) {
        let n = self.spec.substeps.max(1);
        let h = dt / n as f64;
        for _ in 0..n {
            let w = self.spec.disturbance(&self.state, depleted);
            self.state = step_rk4(&self.state, u, &w, &self.spec.model, h);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controlsim::model::{hover_input, state_at_rest};
    use nalgebra::Vector3;

    #[test]
    fn ground_effect_fades_with_altitude() {
        let p = PlantSpec::default();
        let low = p.disturbance(&state_at_rest(Vector3::new(0.0, 0.0, 0.25)), 0.0);
        let high = p.disturbance(&state_at_rest(Vector3::new(0.0, 0.0, 0.8)), 0.0);
        assert!((low[5] - 0.25).abs() < 1e-12);
        assert_eq!(high[5], 0.0);
    }

    #[test]
    fn depletion_ramps_to_peak() {
        let p = PlantSpec { ground_effect: None, ..PlantSpec::default() };
        let x = state_at_rest(Vector3::new(0.0, 0.0, 1.0));
        assert!((p.disturbance(&x, 0.5)[5] - 0.15).abs() < 1e-12);
        assert!((p.disturbance(&x, 2.0)[5] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ideal_plant_holds_hover() {
        let x = state_at_rest(Vector3::new(0.0, 0.0, 1.0));
        let mut plant = Plant::new(PlantSpec::ideal(), x, 0);
        for _ in 0..100 {
            plant.step(&hover_input(), 0.0, 0.05);
        }
        assert_eq!(plant.state, x);
    }

    #[test]
    fn noise_is_seeded() {
        let spec = PlantSpec { measurement_noise: [0.01; 8], ..PlantSpec::ideal() };
        let mut a = Plant::new(spec.clone(), State::zeros(), 5);
        let mut b = Plant::new(spec, State::zeros(), 5);
        assert_eq!(a.measure(), b.measure());
        assert_ne!(a.measure(), State::zeros());
    }
}
