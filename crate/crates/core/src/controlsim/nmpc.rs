use serde::{Deserialize, Serialize};

use super::model::{dynamics, hover_input, jacobians, Disturbance, Input, ModelParams, State, StateJacobian};
use super::{ControlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmpcConfig {
    pub model: ModelParams,
    pub horizon: usize,
    pub q_x: [f64; 8],
    pub q_u: [f64; 3],
    pub q_du: [f64; 3],
    pub u_min: [f64; 3],
    pub u_max: [f64; 3],
    /// Per-step bound on the change of `phi_ref` and `theta_ref`, rad.
    pub rate_max: [f64; 2],
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NmpcConfig {
    fn default() -> Self {
        NmpcConfig {
            model: ModelParams::default(),
            horizon: 40,
            q_x: [100.0, 100.0, 50.0, 4.0, 4.0, 4.0, 30.0, 30.0],
            q_u: [3.0, 250.0, 250.0],
            q_du: [3.0, 100.0, 100.0],
            u_min: [3.0, -0.3, -0.3],
            u_max: [15.5, 0.3, 0.3],
            rate_max: [0.04, 0.04],
            max_iterations: 200,
            tolerance: 1e-4,
        }
    }
}

impl NmpcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ControlError::InvalidConfig(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if !(self.model.dt > 0.0 && self.model.tau_phi > 0.0 && self.model.tau_theta > 0.0) {
            return bad("dt and attitude time constants must be positive");
        }
        if self.q_x.iter().chain(&self.q_u).chain(&self.q_du).any(|&q| !(q >= 0.0)) {
            return bad("weights must be non-negative");
        }
        if (0..3).any(|i| !(self.u_min[i] < self.u_max[i])) {
            return bad("u_min must be below u_max");
        }
        if self.rate_max.iter().any(|&r| !(r > 0.0)) {
            return bad("rate bounds must be positive");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        Ok(())
    }

    /// True when `u` satisfies the box bounds and, against `prev`, the rate
    /// bounds, up to `tol`.
    pub fn is_feasible(&self, u: &Input, prev: &Input, tol: f64) -> bool {
        (0..3).all(|i| u[i] >= self.u_min[i] - tol && u[i] <= self.u_max[i] + tol)
            && (0..2).all(|c| (u[c + 1] - prev[c + 1]).abs() <= self.rate_max[c] + tol)
    }
}

/// One finite-horizon tracking problem, parameterized by its input sequence.
pub struct Problem<'a> {
    pub x0: State,
    /// References for `x_1 .. x_N`.
    pub refs: &'a [State],
    pub u_prev: Input,
    pub w_hat: Disturbance,
    pub cfg: &'a NmpcConfig,
}

fn wdot3(q: &[f64; 3], a: &Input) -> f64 {
    q[0] * a[0] * a[0] + q[1] * a[1] * a[1] + q[2] * a[2] * a[2]
}

fn wmul3(q: &[f64; 3], a: &Input) -> Input {
    Input::new(q[0] * a[0], q[1] * a[1], q[2] * a[2])
}

impl Problem<'_> {
    fn rollout(&self, u: &[Input]) -> Vec<State> {
        let dt = self.cfg.model.dt;
        let mut xs = Vec::with_capacity(u.len() + 1);
        xs.push(self.x0);
        for uj in u {
            let x = xs[xs.len() - 1];
            xs.push(x + dynamics(&x, uj, &self.w_hat, &self.cfg.model) * dt);
        }
        xs
    }

    fn input_cost(&self, u: &[Input]) -> f64 {
        let nom = hover_input();
        let mut j = 0.0;
        let mut prev = self.u_prev;
        for uj in u {
            j += wdot3(&self.cfg.q_u, &(uj - nom)) + wdot3(&self.cfg.q_du, &(uj - prev));
            prev = *uj;
        }
        j
    }

    fn state_cost(&self, xs: &[State]) -> f64 {
        let q = &self.cfg.q_x;
        xs[1..]
            .iter()
            .zip(self.refs)
            .map(|(x, r)| (0..8).map(|i| q[i] * (x[i] - r[i]).powi(2)).sum::<f64>())
            .sum()
    }

    pub fn cost(&self, u: &[Input]) -> f64 {
        self.state_cost(&self.rollout(u)) + self.input_cost(u)
    }

    /// Cost and its gradient by reverse accumulation through the rollout.
    pub fn cost_grad(&self, u: &[Input]) -> (f64, Vec<Input>) {
        let n = u.len();
        let dt = self.cfg.model.dt;
        let q = &self.cfg.q_x;
        let xs = self.rollout(u);
        let cost = self.state_cost(&xs) + self.input_cost(u);
        let nom = hover_input();
        let mut grad = vec![Input::zeros(); n];
        let mut lam = State::zeros();
        for j in (0..n).rev() {
            let e = xs[j + 1] - self.refs[j];
            lam += State::from_fn(|i, _| 2.0 * q[i] * e[i]);
            let (a, b) = jacobians(&xs[j], &u[j], &self.cfg.model);
            let prev = if j == 0 { self.u_prev } else { u[j - 1] };
            let mut g = (b.transpose() * lam) * dt
                + wmul3(&self.cfg.q_u, &(u[j] - nom)) * 2.0
                + wmul3(&self.cfg.q_du, &(u[j] - prev)) * 2.0;
            if j + 1 < n {
                g -= wmul3(&self.cfg.q_du, &(u[j + 1] - u[j])) * 2.0;
            }
            grad[j] = g;
            lam = (StateJacobian::identity() + a * dt).transpose() * lam;
        }
        (cost, grad)
    }
}

fn project_pairs(x: &mut [f64], r: f64, anchor: Option<f64>, start: usize) {
    if let Some(a) = anchor {
        x[0] = x[0].clamp(a - r, a + r);
    }
    let mut j = start;
    while j < x.len() {
        let (p, c) = (x[j - 1], x[j]);
        if (c - p).abs() > r {
            let m = 0.5 * (p + c);
            let s = (c - p).signum();
            x[j - 1] = m - s * r / 2.0;
            x[j] = m + s * r / 2.0;
        }
        j += 2;
    }
}

fn chain_feasible(x: &[f64], lo: f64, hi: f64, r: f64, anchor: f64) -> bool {
    let mut prev = anchor;
    x.iter().all(|&v| {
        let ok = v >= lo && v <= hi && (v - prev).abs() <= r;
        prev = v;
        ok
    })
}

/// Euclidean projection onto `{lo <= x_j <= hi, |x_j - x_{j-1}| <= r}` with
/// `x_{-1} = anchor`, by Dykstra's method over the box and the two
/// interleaved families of disjoint pair constraints. A final forward clamp
/// makes the result feasible to machine precision.
fn project_chain(x: &mut [f64], lo: f64, hi: f64, r: f64, anchor: f64) {
    if chain_feasible(x, lo, hi, r, anchor) {
        return;
    }
    let n = x.len();
    let mut incr = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut y = x.to_vec();
    for _ in 0..500 {
        let before = y.clone();
        for (set, p) in incr.iter_mut().enumerate() {
            let mut z: Vec<f64> = y.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
            match set {
                0 => z.iter_mut().for_each(|v| *v = v.clamp(lo, hi)),
                1 => project_pairs(&mut z, r, Some(anchor), 2),
                _ => project_pairs(&mut z, r, None, 1),
            }
            for i in 0..n {
                p[i] = y[i] + p[i] - z[i];
            }
            y = z;
        }
        let change = y.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < 1e-14 {
            break;
        }
    }
    let mut prev = anchor;
    for (xi, yi) in x.iter_mut().zip(y) {
        *xi = yi.clamp(lo.max(prev - r), hi.min(prev + r));
        prev = *xi;
    }
}

/// Projects an input sequence onto the box and rate constraints.
pub fn project(u: &mut [Input], u_prev: &Input, cfg: &NmpcConfig) {
    for v in u.iter_mut() {
        v[0] = v[0].clamp(cfg.u_min[0], cfg.u_max[0]);
    }
    for c in 1..3 {
        let mut x: Vec<f64> = u.iter().map(|v| v[c]).collect();
        project_chain(&mut x, cfg.u_min[c], cfg.u_max[c], cfg.rate_max[c - 1], u_prev[c]);
        for (v, xi) in u.iter_mut().zip(x) {
            v[c] = xi;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmpcSolution {
    pub inputs: Vec<Input>,
    pub cost: f64,
    pub iterations: usize,
    /// Norm of the projected gradient step at the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

impl NmpcSolution {
    pub fn first(&self) -> Input {
        self.inputs[0]
    }
}

fn dot(a: &[Input], b: &[Input]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn projected_step(u: &[Input], g: &[Input], alpha: f64, u_prev: &Input, cfg: &NmpcConfig) -> Vec<Input> {
    let mut t: Vec<Input> = u.iter().zip(g).map(|(a, b)| a - b * alpha).collect();
    project(&mut t, u_prev, cfg);
    t.iter().zip(u).map(|(a, b)| a - b).collect()
}

/// Solves the tracking problem by spectral projected gradient with a
/// non-monotone line search. Returns the best iterate; `converged` is false
/// when the iteration cap is reached first.
pub fn nmpc_solve(
    x0: &State,
    refs: &[State],
    u_prev: &Input,
    w_hat: &Disturbance,
    cfg: &NmpcConfig,
    warm: Option<&[Input]>,
) -> Result<NmpcSolution> {
    if refs.len() != cfg.horizon {
        return Err(ControlError::HorizonMismatch { expected: cfg.horizon, got: refs.len() });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(ControlError::NonFinite);
    }
    let problem = Problem { x0: *x0, refs, u_prev: *u_prev, w_hat: *w_hat, cfg };
    let mut u: Vec<Input> = match warm {
        Some(w) if w.len() == cfg.horizon => w.to_vec(),
        _ => vec![*u_prev; cfg.horizon],
    };
    project(&mut u, u_prev, cfg);
    let (mut f, mut g) = problem.cost_grad(&u);
    const MEMORY: usize = 10;
    const A_MIN: f64 = 1e-12;
    const A_MAX: f64 = 1e6;
    let mut history = vec![f];
    let d1 = projected_step(&u, &g, 1.0, u_prev, cfg);
    let mut residual = dot(&d1, &d1).sqrt();
    let mut alpha = (1.0 / d1.iter().map(|v| v.amax()).fold(0.0, f64::max).max(1e-12)).clamp(A_MIN, A_MAX);
    let mut iterations = 0;
    while residual > cfg.tolerance && iterations < cfg.max_iterations {
        iterations += 1;
        let d = projected_step(&u, &g, alpha, u_prev, cfg);
        let gd = dot(&g, &d);
        let f_ref = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let (mut u_new, mut f_new);
        loop {
            u_new = u.iter().zip(&d).map(|(a, b)| a + b * lambda).collect::<Vec<_>>();
            f_new = problem.cost(&u_new);
            if f_new <= f_ref + 1e-4 * lambda * gd || lambda < 1e-10 {
                break;
            }
            let lt = -0.5 * lambda * lambda * gd / (f_new - f - lambda * gd);
            lambda = if lt >= 0.1 * lambda && lt <= 0.5 * lambda { lt } else { lambda / 2.0 };
        }
        if f_new > f_ref {
            break;
        }
        let (f2, g2) = problem.cost_grad(&u_new);
        let s: Vec<Input> = u_new.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<Input> = g2.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy <= 0.0 { A_MAX } else { (dot(&s, &s) / sy).clamp(A_MIN, A_MAX) };
        u = u_new;
        f = f2;
        g = g2;
        history.push(f);
        if history.len() > MEMORY {
            history.remove(0);
        }
        let d1 = projected_step(&u, &g, 1.0, u_prev, cfg);
        residual = dot(&d1, &d1).sqrt();
    }
    Ok(NmpcSolution { inputs: u, cost: f, iterations, residual, converged: residual <= cfg.tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controlsim::model::{state_at_rest, G};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hold(p: Vector3<f64>, n: usize) -> Vec<State> {
        vec![state_at_rest(p); n]
    }

    #[test]
    fn equilibrium_gives_nominal_input() {
        let cfg = NmpcConfig::default();
        let x0 = state_at_rest(Vector3::new(0.0, 0.0, 1.0));
        let s = nmpc_solve(&x0, &hold(Vector3::new(0.0, 0.0, 1.0), 40), &hover_input(), &Disturbance::zeros(), &cfg, None)
            .unwrap();
        assert!((s.first() - hover_input()).norm() < 1e-3);
        assert!(s.converged);
    }

    #[test]
    fn climbing_reference_raises_thrust() {
        let cfg = NmpcConfig::default();
        let x0 = state_at_rest(Vector3::zeros());
        let s = nmpc_solve(&x0, &hold(Vector3::new(0.0, 0.0, 1.0), 40), &hover_input(), &Disturbance::zeros(), &cfg, None)
            .unwrap();
        assert!(s.first()[0] > G);
    }

    #[test]
    fn solution_is_feasible() {
        let cfg = NmpcConfig::default();
        let x0 = state_at_rest(Vector3::zeros());
        let prev = Input::new(9.81, 0.1, -0.1);
        let s = nmpc_solve(&x0, &hold(Vector3::new(2.0, -2.0, 0.5), 40), &prev, &Disturbance::zeros(), &cfg, None)
            .unwrap();
        let mut p = prev;
        for u in &s.inputs {
            assert!(cfg.is_feasible(u, &p, 1e-12), "{u:?} after {p:?}");
            p = *u;
        }
    }

    fn dist_(x: &[Input], y: &[Input]) -> f64 {
        x.iter().zip(y).map(|(p, q)| (p - q).norm_squared()).sum::<f64>().sqrt()
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        let cfg = NmpcConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let prev = Input::new(9.81, rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
            let mk = |rng: &mut ChaCha8Rng| -> Vec<Input> {
                (0..40).map(|_| Input::new(rng.gen_range(0.0..20.0), rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6))).collect()
            };
            let (a0, b0) = (mk(&mut rng), mk(&mut rng));
            let (mut a, mut b) = (a0.clone(), b0.clone());
            project(&mut a, &prev, &cfg);
            project(&mut b, &prev, &cfg);
            let mut a2 = a.clone();
            project(&mut a2, &prev, &cfg);
            assert!(dist_(&a, &a2) < 1e-12);
            let dist = |x: &[Input], y: &[Input]| x.iter().zip(y).map(|(p, q)| (p - q).norm_squared()).sum::<f64>().sqrt();
            assert!(dist(&a, &b) <= dist(&a0, &b0) + 1e-9);
            // Optimality: no feasible point nearby is closer to the input.
            let t: Vec<Input> = a.iter().zip(&b).map(|(p, q)| p * 0.99 + q * 0.01).collect();
            assert!(dist(&a, &a0) <= dist(&t, &a0) + 1e-7);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = NmpcConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x0 = State::from_fn(|_, _| rng.gen_range(-0.2..0.2));
            let refs: Vec<State> = (0..40).map(|_| State::from_fn(|_, _| rng.gen_range(-0.5..0.5))).collect();
            let u: Vec<Input> = (0..40).map(|_| Input::new(rng.gen_range(8.0..12.0), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))).collect();
            let w = Disturbance::from_fn(|_, _| rng.gen_range(-0.1..0.1));
            let p = Problem { x0, refs: &refs, u_prev: hover_input(), w_hat: w, cfg: &cfg };
            let (_, g) = p.cost_grad(&u);
            for _ in 0..5 {
                let (j, c) = (rng.gen_range(0..40), rng.gen_range(0..3));
                let h = 1e-6;
                let (mut up, mut um) = (u.clone(), u.clone());
                up[j][c] += h;
                um[j][c] -= h;
                let fd = (p.cost(&up) - p.cost(&um)) / (2.0 * h);
                assert!((fd - g[j][c]).abs() <= 1e-5 * fd.abs().max(1.0), "{fd} vs {}", g[j][c]);
            }
        }
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let cfg = NmpcConfig::default();
        let r = nmpc_solve(&State::zeros(), &hold(Vector3::zeros(), 3), &hover_input(), &Disturbance::zeros(), &cfg, None);
        assert!(matches!(r, Err(ControlError::HorizonMismatch { .. })));
    }
}
