use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::model::{dynamics, jacobians, Disturbance, Input, ModelParams, State};
use super::{ControlError, Result};

type M8 = SMatrix<f64, 8, 8>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmheConfig {
    pub window: usize,
    pub q_e: [f64; 8],
    pub q_ch: [f64; 8],
    pub r_e: [f64; 8],
    pub w_min: [f64; 8],
    pub w_max: [f64; 8],
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NmheConfig {
    fn default() -> Self {
        let b = [0.05, 0.05, 0.05, 0.6, 0.6, 0.6, 0.05, 0.05];
        NmheConfig {
            window: 40,
            q_e: [1e5; 8],
            q_ch: [10.0; 8],
            r_e: [500.0, 500.0, 500.0, 1.0, 1.0, 1.0, 200.0, 200.0],
            w_min: b.map(|v| -v),
            w_max: b,
            max_iterations: 10,
            tolerance: 1e-10,
        }
    }
}

impl NmheConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ControlError::InvalidConfig(m.to_string()));
        if self.window < 2 {
            return bad("estimation window must be at least 2");
        }
        if (0..8).any(|i| !(self.w_min[i] < self.w_max[i])) {
            return bad("w_min must be below w_max");
        }
        if self.q_e.iter().chain(&self.q_ch).chain(&self.r_e).any(|&q| !(q >= 0.0)) {
            return bad("weights must be non-negative");
        }
        Ok(())
    }

    pub fn clamp(&self, w: &Disturbance) -> Disturbance {
        Disturbance::from_fn(|i, _| w[i].clamp(self.w_min[i], self.w_max[i]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmheSolution {
    pub w: Disturbance,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Rolls the model over the window from the oldest measurement, returning
/// the estimates and their sensitivities to `w`.
fn rollout(y0: &State, u: &[Input], w: &Disturbance, m: &ModelParams) -> Vec<(State, M8)> {
    let dt = m.dt;
    let mut out = Vec::with_capacity(u.len() + 1);
    out.push((*y0, M8::zeros()));
    for uj in u {
        let (x, s) = out[out.len() - 1];
        let (a, _) = jacobians(&x, uj, m);
        let xn = x + (dynamics(&x, uj, &Disturbance::zeros(), m) + w) * dt;
        let sn = (M8::identity() + a * dt) * s + M8::identity() * dt;
        out.push((xn, sn));
    }
    out
}

fn cost(y: &[State], roll: &[(State, M8)], w: &Disturbance, w_prev: &Disturbance, cfg: &NmheConfig) -> f64 {
    let dev: f64 = roll
        .iter()
        .zip(y)
        .map(|((x, _), yi)| (0..8).map(|i| cfg.q_e[i] * (x[i] - yi[i]).powi(2)).sum::<f64>())
        .sum();
    let reg: f64 = (0..8).map(|i| cfg.q_ch[i] * (w[i] - w_prev[i]).powi(2) + cfg.r_e[i] * w[i] * w[i]).sum();
    dev + reg * y.len() as f64
}

/// Minimizes `0.5 d'Hd + g'd` over `lo <= d <= hi` by a primal active-set
/// method. Exact for the small dense problems used here.
pub(crate) fn box_qp(h: &M8, g: &SVector<f64, 8>, lo: &SVector<f64, 8>, hi: &SVector<f64, 8>) -> SVector<f64, 8> {
    // 0 free, -1 at lower, +1 at upper.
    let mut state = [0i8; 8];
    let mut d = SVector::<f64, 8>::zeros();
    for _ in 0..64 {
        let free: Vec<usize> = (0..8).filter(|&i| state[i] == 0).collect();
        for i in 0..8 {
            d[i] = match state[i] {
                -1 => lo[i],
                1 => hi[i],
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let k = free.len();
            let hff = nalgebra::DMatrix::from_fn(k, k, |a, b| h[(free[a], free[b])]);
            let rhs = nalgebra::DVector::from_fn(k, |a, _| {
                -(g[free[a]] + (0..8).filter(|&j| state[j] != 0).map(|j| h[(free[a], j)] * d[j]).sum::<f64>())
            });
            let sol = match hff.clone().cholesky() {
                Some(c) => c.solve(&rhs),
                None => hff.lu().solve(&rhs).unwrap_or_else(|| nalgebra::DVector::zeros(k)),
            };
            for (a, &i) in free.iter().enumerate() {
                d[i] = sol[a];
            }
        }
        let mut violated = false;
        for i in 0..8 {
            if state[i] == 0 && d[i] < lo[i] {
                state[i] = -1;
                violated = true;
            } else if state[i] == 0 && d[i] > hi[i] {
                state[i] = 1;
                violated = true;
            }
        }
        if violated {
            continue;
        }
        let grad = h * d + g;
        let worst = (0..8)
            .filter(|&i| (state[i] == -1 && grad[i] < -1e-12) || (state[i] == 1 && grad[i] > 1e-12))
            .max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs()));
        match worst {
            Some(i) => state[i] = 0,
            None => return d,
        }
    }
    SVector::from_fn(|i, _| d[i].clamp(lo[i], hi[i]))
}

/// Fits one static disturbance over the window by Gauss-Newton with box
/// bounds. `y` holds the `N_e + 1` latest measurements, oldest first, and
/// `u` the `N_e` inputs applied between them.
pub fn nmhe_solve(
    y: &[State],
    u: &[Input],
    w_prev: &Disturbance,
    cfg: &NmheConfig,
    model: &ModelParams,
) -> Result<NmheSolution> {
    if y.len() != u.len() + 1 || u.len() < 2 {
        return Err(ControlError::InvalidWindow { states: y.len(), inputs: u.len() });
    }
    let n_terms = y.len() as f64;
    let qe = M8::from_diagonal(&SVector::from(cfg.q_e));
    let reg = M8::from_diagonal(&SVector::from_fn(|i, _| cfg.q_ch[i] + cfg.r_e[i])) * n_terms;
    let lo = SVector::from(cfg.w_min);
    let hi = SVector::from(cfg.w_max);
    let mut w = cfg.clamp(w_prev);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let roll = rollout(&y[0], u, &w, model);
        let mut h = reg;
        let mut g = SVector::<f64, 8>::from_fn(|i, _| {
            n_terms * (cfg.q_ch[i] * (w[i] - w_prev[i]) + cfg.r_e[i] * w[i])
        });
        for ((x, s), yi) in roll.iter().zip(y) {
            let st_q = s.transpose() * qe;
            h += st_q * s;
            g += st_q * (x - yi);
        }
        let d = box_qp(&h, &g, &(lo - w), &(hi - w));
        w = cfg.clamp(&(w + d));
        if d.norm() <= cfg.tolerance * (1.0 + w.norm()) {
            converged = true;
            break;
        }
    }
    let roll = rollout(&y[0], u, &w, model);
    Ok(NmheSolution { cost: cost(y, &roll, &w, w_prev, cfg), w, iterations, converged })
}
