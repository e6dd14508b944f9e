use nalgebra::{SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

pub const G: f64 = 9.81;

/// `[p_x, p_y, p_z, v_x, v_y, v_z, phi, theta]`.
pub type State = SVector<f64, 8>;
/// `[T, phi_ref, theta_ref]`, thrust as mass-normalized acceleration.
pub type Input = Vector3<f64>;
/// `[w_p (3), w_v (3), w_phi, w_theta]`, additive on the state derivative.
pub type Disturbance = SVector<f64, 8>;

pub type StateJacobian = SMatrix<f64, 8, 8>;
pub type InputJacobian = SMatrix<f64, 8, 3>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub drag: [f64; 3],
    pub tau_phi: f64,
    pub tau_theta: f64,
    pub k_phi: f64,
    pub k_theta: f64,
    pub dt: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { drag: [0.1, 0.1, 0.2], tau_phi: 0.2, tau_theta: 0.2, k_phi: 1.0, k_theta: 1.0, dt: 0.05 }
    }
}

pub fn hover_input() -> Input {
    Input::new(G, 0.0, 0.0)
}

pub fn position(x: &State) -> Vector3<f64> {
    Vector3::new(x[0], x[1], x[2])
}

pub fn state_at_rest(p: Vector3<f64>) -> State {
    let mut x = State::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&p);
    x
}

/// Continuous-time state derivative.
pub fn dynamics(x: &State, u: &Input, w: &Disturbance, m: &ModelParams) -> State {
    let (phi, theta) = (x[6], x[7]);
    let t = u[0];
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    State::from([
        x[3] + w[0],
        x[4] + w[1],
        x[5] + w[2],
        t * cp * st - m.drag[0] * x[3] + w[3],
        -t * sp - m.drag[1] * x[4] + w[4],
        t * cp * ct - G - m.drag[2] * x[5] + w[5],
        (m.k_phi * u[1] - phi) / m.tau_phi + w[6],
        (m.k_theta * u[2] - theta) / m.tau_theta + w[7],
    ])
}

/// Partial derivatives of [`dynamics`] with respect to the state and input.
pub fn jacobians(x: &State, u: &Input, m: &ModelParams) -> (StateJacobian, InputJacobian) {
    let (phi, theta) = (x[6], x[7]);
    let t = u[0];
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let mut a = StateJacobian::zeros();
    a[(0, 3)] = 1.0;
    a[(1, 4)] = 1.0;
    a[(2, 5)] = 1.0;
    a[(3, 3)] = -m.drag[0];
    a[(3, 6)] = -t * sp * st;
    a[(3, 7)] = t * cp * ct;
    a[(4, 4)] = -m.drag[1];
    a[(4, 6)] = -t * cp;
    a[(5, 5)] = -m.drag[2];
    a[(5, 6)] = -t * sp * ct;
    a[(5, 7)] = -t * cp * st;
    a[(6, 6)] = -1.0 / m.tau_phi;
    a[(7, 7)] = -1.0 / m.tau_theta;
    let mut b = InputJacobian::zeros();
    b[(3, 0)] = cp * st;
    b[(4, 0)] = -sp;
    b[(5, 0)] = cp * ct;
    b[(6, 1)] = m.k_phi / m.tau_phi;
    b[(7, 2)] = m.k_theta / m.tau_theta;
    (a, b)
}

pub fn step_euler(x: &State, u: &Input, w: &Disturbance, m: &ModelParams, dt: f64) -> State {
    x + dynamics(x, u, w, m) * dt
}

/// Classic fourth-order Runge-Kutta step with the input and disturbance held.
pub fn step_rk4(x: &State, u: &Input, w: &Disturbance, m: &ModelParams, dt: f64) -> State {
    let k1 = dynamics(x, u, w, m);
    let k2 = dynamics(&(x + k1 * (dt / 2.0)), u, w, m);
    let k3 = dynamics(&(x + k2 * (dt / 2.0)), u, w, m);
    let k4 = dynamics(&(x + k3 * dt), u, w, m);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn hover_is_an_exact_equilibrium() {
        let x = state_at_rest(Vector3::new(0.3, -1.0, 0.7));
        let d = dynamics(&x, &hover_input(), &Disturbance::zeros(), &m());
        assert_eq!(d, State::zeros());
    }

    #[test]
    fn disturbance_is_additive() {
        let x = State::zeros();
        let mut w = Disturbance::zeros();
        w[3] = 0.3;
        let d = dynamics(&x, &hover_input(), &w, &m());
        assert_eq!(d.fixed_rows::<3>(3).into_owned(), Vector3::new(0.3, 0.0, 0.0));
    }

    #[test]
    fn pitch_tilts_thrust_forward() {
        let mut x = State::zeros();
        x[7] = 0.1;
        let d = dynamics(&x, &Input::new(10.0, 0.0, 0.1), &Disturbance::zeros(), &m());
        assert!((d[3] - 10.0 * 0.1f64.sin()).abs() < 1e-12);
        assert!((d[3] - 0.998).abs() < 1e-3);
    }

    #[test]
    fn positive_roll_pushes_negative_y() {
        let mut x = State::zeros();
        x[6] = 0.1;
        let d = dynamics(&x, &hover_input(), &Disturbance::zeros(), &m());
        assert!(d[4] < 0.0);
    }

    #[test]
    fn euler_arithmetic() {
        let x = State::zeros();
        let mut w = Disturbance::zeros();
        w[3] = 1.0;
        let mut p = ModelParams::default();
        p.drag = [0.0; 3];
        let xs = (0..20).fold(x, |x, _| step_euler(&x, &hover_input(), &w, &p, 0.05));
        assert!((xs[3] - 1.0).abs() < 1e-12);
        assert_eq!(step_euler(&state_at_rest(Vector3::x()), &hover_input(), &Disturbance::zeros(), &p, 0.05), state_at_rest(Vector3::x()));
    }

    #[test]
    fn euler_tracks_rk4_to_first_order() {
        let u = Input::new(10.5, 0.1, -0.05);
        let w = Disturbance::zeros();
        let fine = (0..1000).fold(State::zeros(), |x, _| step_rk4(&x, &u, &w, &m(), 0.001));
        let err = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let e = (0..n).fold(State::zeros(), |x, _| step_euler(&x, &u, &w, &m(), dt));
            (e - fine).norm()
        };
        let (e1, e2) = (err(0.05), err(0.025));
        assert!(e1 < 0.1, "{e1}");
        // Halving the step roughly halves the error.
        assert!((e1 / e2 - 2.0).abs() < 0.3, "{}", e1 / e2);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let x = State::from([0.1, 0.2, 0.3, 0.4, -0.2, 0.1, 0.15, -0.12]);
        let u = Input::new(10.2, 0.05, -0.08);
        let w = Disturbance::zeros();
        let (a, b) = jacobians(&x, &u, &m());
        let h = 1e-6;
        for i in 0..8 {
            let mut e = State::zeros();
            e[i] = h;
            let fd = (dynamics(&(x + e), &u, &w, &m()) - dynamics(&(x - e), &u, &w, &m())) / (2.0 * h);
            assert!((fd - a.column(i)).norm() < 1e-7);
        }
        for i in 0..3 {
            let mut e = Input::zeros();
            e[i] = h;
            let fd = (dynamics(&x, &(u + e), &w, &m()) - dynamics(&x, &(u - e), &w, &m())) / (2.0 * h);
            assert!((fd - b.column(i)).norm() < 1e-7);
        }
    }

    #[test]
    fn attitude_time_constant_under_rk4() {
        let u = Input::new(G, 0.2, 0.0);
        let w = Disturbance::zeros();
        let x = (0..200).fold(State::zeros(), |x, _| step_rk4(&x, &u, &w, &m(), 0.001));
        assert!((x[6] / 0.2 - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
    }
}
