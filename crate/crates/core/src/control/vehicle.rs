//! Three-degree-of-freedom vehicle model with path-error states.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::wrap_angle;

pub const STATE_DIM: usize = 10;
pub const INPUT_DIM: usize = 2;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type InputVector = SVector<f64, INPUT_DIM>;
pub type StateJacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputJacobian = SMatrix<f64, STATE_DIM, INPUT_DIM>;

/// Index of each component in [`StateVector`].
pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const PSI: usize = 2;
    pub const U: usize = 3;
    pub const V: usize = 4;
    pub const R: usize = 5;
    pub const DELTA: usize = 6;
    pub const AX: usize = 7;
    pub const EY: usize = 8;
    pub const EPSI: usize = 9;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    /// Longitudinal speed (m/s), never negative.
    pub u: f64,
    /// Lateral speed (m/s), positive to the left.
    pub v: f64,
    pub r: f64,
    pub delta: f64,
    pub ax: f64,
    /// Lateral offset from the reference path, positive to the left.
    pub ey: f64,
    pub epsi: f64,
}

impl VehicleState {
    pub fn to_vector(&self) -> StateVector {
        StateVector::from([self.x, self.y, self.psi, self.u, self.v, self.r, self.delta, self.ax, self.ey, self.epsi])
    }

    pub fn from_vector(v: &StateVector) -> Self {
        Self {
            x: v[0],
            y: v[1],
            psi: v[2],
            u: v[3],
            v: v[4],
            r: v[5],
            delta: v[6],
            ax: v[7],
            ey: v[8],
            epsi: v[9],
        }
    }

    /// Wrap angles and clamp the speed at zero.
    pub fn normalized(mut self) -> Self {
        self.psi = wrap_angle(self.psi);
        self.epsi = wrap_angle(self.epsi);
        if self.u < 0.0 {
            self.u = 0.0;
        }
        self
    }

    /// Sideslip angle `atan(V / U)`.
    pub fn sideslip(&self) -> f64 {
        if self.u.abs() < 1e-9 {
            0.0
        } else {
            (self.v / self.u).atan()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub mass: f64,
    pub izz: f64,
    pub lf: f64,
    pub lr: f64,
    /// Front and rear cornering stiffness (N/rad).
    pub c_af: f64,
    pub c_ar: f64,
    pub delta_max: f64,
    pub zeta_max: f64,
    pub a_max: f64,
    pub jerk_max: f64,
    /// Below this speed the kinematic model replaces the tyre model.
    pub u_min: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 300.0,
            izz: 150.0,
            lf: 0.8,
            lr: 0.8,
            c_af: 30_000.0,
            c_ar: 30_000.0,
            delta_max: 0.4,
            zeta_max: 1.5,
            a_max: 4.0,
            jerk_max: 20.0,
            u_min: 0.5,
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mass,
            self.izz,
            self.lf,
            self.lr,
            self.c_af,
            self.c_ar,
            self.delta_max,
            self.zeta_max,
            self.a_max,
            self.jerk_max,
            self.u_min,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("vehicle parameters must all be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Steering rate (rad/s).
    pub zeta: f64,
    /// Longitudinal jerk (m/s^3).
    pub jerk: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { zeta: 0.0, jerk: 0.0 };

    pub fn new(zeta: f64, jerk: f64) -> Self {
        Self { zeta, jerk }
    }

    pub fn clamped(&self, p: &VehicleParams) -> Self {
        Self { zeta: self.zeta.clamp(-p.zeta_max, p.zeta_max), jerk: self.jerk.clamp(-p.jerk_max, p.jerk_max) }
    }

    pub fn to_vector(&self) -> InputVector {
        InputVector::new(self.zeta, self.jerk)
    }
}

/// Linear tyre forces `(F_yf, F_yr)`; fails below the low-speed threshold.
pub fn tire_forces(s: &VehicleState, p: &VehicleParams) -> Result<(f64, f64)> {
    if s.u <= p.u_min {
        return Err(Error::LowSpeed(s.u));
    }
    let alpha_f = (s.v + p.lf * s.r) / s.u - s.delta;
    let alpha_r = (s.v - p.lr * s.r) / s.u;
    Ok((-p.c_af * alpha_f, -p.c_ar * alpha_r))
}

fn longitudinal_rate(s: &VehicleState) -> f64 {
    // standstill: no reverse
    if s.u <= 0.0 && s.ax < 0.0 {
        0.0
    } else {
        s.ax
    }
}

/// Dynamic-model state derivative.
pub fn dynamics(s: &VehicleState, u: &ControlInput, kappa_ref: f64, p: &VehicleParams) -> Result<StateVector> {
    let (fyf, fyr) = tire_forces(s, p)?;
    let (sin, cos) = s.psi.sin_cos();
    Ok(StateVector::from([
        s.u * cos - s.v * sin,
        s.u * sin + s.v * cos,
        s.r,
        longitudinal_rate(s),
        (fyf + fyr) / p.mass - s.u * s.r,
        (fyf * p.lf - fyr * p.lr) / p.izz,
        u.zeta,
        u.jerk,
        s.u * s.epsi + s.v,
        s.r - s.u * kappa_ref,
    ]))
}

/// Kinematic-bicycle derivative: lateral speed and yaw rate follow the
/// no-slip constraint `V = U lr tan(delta) / L`, `r = U tan(delta) / L`.
pub fn kinematic_dynamics(s: &VehicleState, u: &ControlInput, kappa_ref: f64, p: &VehicleParams) -> StateVector {
    let l = p.wheelbase();
    let (sin, cos) = s.psi.sin_cos();
    let tan = s.delta.tan();
    let sec2 = 1.0 + tan * tan;
    let udot = longitudinal_rate(s);
    let growth = udot * tan + s.u * sec2 * u.zeta;
    StateVector::from([
        s.u * cos - s.v * sin,
        s.u * sin + s.v * cos,
        s.r,
        udot,
        p.lr / l * growth,
        growth / l,
        u.zeta,
        u.jerk,
        s.u * s.epsi + s.v,
        s.r - s.u * kappa_ref,
    ])
}

/// Derivative with the kinematic fallback at low speed.
pub fn model_derivative(s: &VehicleState, u: &ControlInput, kappa_ref: f64, p: &VehicleParams) -> StateVector {
    match dynamics(s, u, kappa_ref, p) {
        Ok(d) => d,
        Err(_) => kinematic_dynamics(s, u, kappa_ref, p),
    }
}

/// Jacobians of [`model_derivative`] with respect to state, input and the
/// reference curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub a: StateJacobian,
    pub b: InputJacobian,
    pub e: StateVector,
}

pub fn linearize(s: &VehicleState, u: &ControlInput, kappa_ref: f64, p: &VehicleParams) -> Linearization {
    use idx::*;
    let mut a = StateJacobian::zeros();
    let mut b = InputJacobian::zeros();
    let mut e = StateVector::zeros();
    let (sin, cos) = s.psi.sin_cos();

    a[(X, PSI)] = -s.u * sin - s.v * cos;
    a[(X, U)] = cos;
    a[(X, V)] = -sin;
    a[(Y, PSI)] = s.u * cos - s.v * sin;
    a[(Y, U)] = sin;
    a[(Y, V)] = cos;
    a[(PSI, R)] = 1.0;
    if !(s.u <= 0.0 && s.ax < 0.0) {
        a[(U, AX)] = 1.0;
    }
    b[(DELTA, 0)] = 1.0;
    b[(AX, 1)] = 1.0;
    a[(EY, U)] = s.epsi;
    a[(EY, EPSI)] = s.u;
    a[(EY, V)] = 1.0;
    a[(EPSI, R)] = 1.0;
    a[(EPSI, U)] = -kappa_ref;
    e[EPSI] = -s.u;

    if s.u > p.u_min {
        let (cf, cr, lf, lr, m, iz) = (p.c_af, p.c_ar, p.lf, p.lr, p.mass, p.izz);
        let uu = s.u;
        // partials of F_yf and F_yr in order (V, r, delta, U)
        let dff = [-cf / uu, -cf * lf / uu, cf, cf * (s.v + lf * s.r) / (uu * uu)];
        let dfr = [-cr / uu, cr * lr / uu, 0.0, cr * (s.v - lr * s.r) / (uu * uu)];
        let cols = [V, R, DELTA, U];
        for k in 0..4 {
            a[(V, cols[k])] = (dff[k] + dfr[k]) / m;
            a[(R, cols[k])] = (lf * dff[k] - lr * dfr[k]) / iz;
        }
        a[(V, R)] -= uu;
        a[(V, U)] -= s.r;
    } else {
        let l = p.wheelbase();
        let tan = s.delta.tan();
        let sec2 = 1.0 + tan * tan;
        let standstill = s.u <= 0.0 && s.ax < 0.0;
        let udot = if standstill { 0.0 } else { s.ax };
        // growth = udot * tan + U * sec2 * zeta
        let d_ax = if standstill { 0.0 } else { tan };
        let d_delta = udot * sec2 + s.u * u.zeta * 2.0 * sec2 * tan;
        let d_u = sec2 * u.zeta;
        let d_zeta = s.u * sec2;
        for (row, scale) in [(V, p.lr / l), (R, 1.0 / l)] {
            a[(row, AX)] = scale * d_ax;
            a[(row, DELTA)] = scale * d_delta;
            a[(row, U)] = scale * d_u;
            b[(row, 0)] = scale * d_zeta;
        }
    }
    Linearization { a, b, e }
}

/// One classical Runge-Kutta step of [`model_derivative`] with the input held.
pub fn rk4_step(s: &VehicleState, u: &ControlInput, kappa_ref: f64, p: &VehicleParams, dt: f64) -> VehicleState {
    let x0 = s.to_vector();
    let f = |x: &StateVector| model_derivative(&VehicleState::from_vector(x), u, kappa_ref, p);
    let k1 = f(&x0);
    let k2 = f(&(x0 + k1 * (0.5 * dt)));
    let k3 = f(&(x0 + k2 * (0.5 * dt)));
    let k4 = f(&(x0 + k3 * dt));
    VehicleState::from_vector(&(x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))).normalized()
}

/// Lateral acceleration `V' + U r` at the current state and input.
pub fn lateral_acceleration(s: &VehicleState, u: &ControlInput, p: &VehicleParams) -> f64 {
    let d = model_derivative(s, u, 0.0, p);
    d[idx::V] + s.u * s.r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn zero_slip_gives_zero_forces() {
        let s = VehicleState { u: 5.0, ..Default::default() };
        assert_eq!(tire_forces(&s, &VehicleParams::default()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn positive_steer_pushes_front_left() {
        let p = VehicleParams::default();
        let s = VehicleState { u: 5.0, delta: 0.05, ..Default::default() };
        let (f, r) = tire_forces(&s, &p).unwrap();
        assert_abs_diff_eq!(f, p.c_af * 0.05, epsilon = 1e-9);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn low_speed_is_signalled() {
        let s = VehicleState { u: 0.3, ..Default::default() };
        assert!(matches!(tire_forces(&s, &VehicleParams::default()), Err(Error::LowSpeed(_))));
        assert!(dynamics(&s, &ControlInput::ZERO, 0.0, &VehicleParams::default()).is_err());
    }

    #[test]
    fn steady_turn_forces_balance_centripetal_load() {
        // understeering configuration so the steady state is not trivial
        let p = VehicleParams { c_af: 25_000.0, lf: 0.7, lr: 0.9, ..Default::default() };
        let (u, delta) = (6.0, 0.05);
        // solve V' = 0, r' = 0 for (V, r) with Cramer's rule
        let (cf, cr, lf, lr, m) = (p.c_af, p.c_ar, p.lf, p.lr, p.mass);
        let a11 = -(cf + cr) / (m * u);
        let a12 = (-cf * lf + cr * lr) / (m * u) - u;
        let a21 = (-lf * cf + lr * cr) / (p.izz * u);
        let a22 = -(lf * lf * cf + lr * lr * cr) / (p.izz * u);
        let (b1, b2) = (-cf * delta / m, -lf * cf * delta / p.izz);
        let det = a11 * a22 - a12 * a21;
        let v = (b1 * a22 - a12 * b2) / det;
        let r = (a11 * b2 - b1 * a21) / det;
        let s = VehicleState { u, v, r, delta, ..Default::default() };
        let (fyf, fyr) = tire_forces(&s, &p).unwrap();
        assert_abs_diff_eq!(fyf + fyr, m * u * r, epsilon = 1e-6);
        let d = dynamics(&s, &ControlInput::ZERO, 0.0, &p).unwrap();
        assert_abs_diff_eq!(d[idx::V], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d[idx::R], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn straight_motion_derivative() {
        let s = VehicleState { u: 4.0, ..Default::default() };
        let d = dynamics(&s, &ControlInput::ZERO, 0.0, &VehicleParams::default()).unwrap();
        assert_eq!(d[idx::X], 4.0);
        for i in [idx::Y, idx::PSI, idx::V, idx::R, idx::EY, idx::EPSI] {
            assert_eq!(d[i], 0.0);
        }
    }

    #[test]
    fn heading_north_moves_along_y() {
        let s = VehicleState { u: 4.0, psi: std::f64::consts::FRAC_PI_2, ..Default::default() };
        let d = dynamics(&s, &ControlInput::ZERO, 0.0, &VehicleParams::default()).unwrap();
        assert_abs_diff_eq!(d[idx::X], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[idx::Y], 4.0, epsilon = 1e-12);
        // lateral speed adds along +x when facing north: U sin + V cos
        let s = VehicleState { v: 1.0, psi: 0.0, ..s };
        let d = dynamics(&s, &ControlInput::ZERO, 0.0, &VehicleParams::default()).unwrap();
        assert_abs_diff_eq!(d[idx::Y], 1.0, epsilon = 1e-12);
    }

    fn random_state(rng: &mut impl Rng, u_lo: f64, u_hi: f64) -> VehicleState {
        VehicleState {
            x: rng.random_range(-50.0..50.0),
            y: rng.random_range(-50.0..50.0),
            psi: rng.random_range(-3.0..3.0),
            u: rng.random_range(u_lo..u_hi),
            v: rng.random_range(-0.5..0.5),
            r: rng.random_range(-0.8..0.8),
            delta: rng.random_range(-0.35..0.35),
            ax: rng.random_range(-3.0..3.0),
            ey: rng.random_range(-1.0..1.0),
            epsi: rng.random_range(-0.3..0.3),
        }
    }

    fn check_jacobians(s: &VehicleState, u: &ControlInput, kappa: f64, p: &VehicleParams) {
        let lin = linearize(s, u, kappa, p);
        let f = |x: &StateVector, w: &InputVector, k: f64| {
            model_derivative(&VehicleState::from_vector(x), &ControlInput::new(w[0], w[1]), k, p)
        };
        let x0 = s.to_vector();
        let w0 = u.to_vector();
        let h = 1e-6;
        let close = |an: f64, fd: f64| (an - fd).abs() <= 1e-5 * an.abs().max(1.0);
        for j in 0..STATE_DIM {
            let mut e = StateVector::zeros();
            e[j] = h;
            let col = (f(&(x0 + e), &w0, kappa) - f(&(x0 - e), &w0, kappa)) / (2.0 * h);
            for i in 0..STATE_DIM {
                assert!(close(lin.a[(i, j)], col[i]), "A[{i},{j}] {} vs {}", lin.a[(i, j)], col[i]);
            }
        }
        for j in 0..INPUT_DIM {
            let mut e = InputVector::zeros();
            e[j] = h;
            let col = (f(&x0, &(w0 + e), kappa) - f(&x0, &(w0 - e), kappa)) / (2.0 * h);
            for i in 0..STATE_DIM {
                assert!(close(lin.b[(i, j)], col[i]), "B[{i},{j}]");
            }
        }
        let col = (f(&x0, &w0, kappa + h) - f(&x0, &w0, kappa - h)) / (2.0 * h);
        for i in 0..STATE_DIM {
            assert!(close(lin.e[i], col[i]), "E[{i}]");
        }
    }

    #[test]
    fn jacobians_match_central_differences() {
        let p = VehicleParams { lf: 0.75, lr: 0.85, c_af: 28_000.0, ..Default::default() };
        let mut rng = crate::rng::stream(11, 0, 0);
        for _ in 0..100 {
            let s = random_state(&mut rng, 1.0, 12.0);
            let u = ControlInput::new(rng.random_range(-1.0..1.0), rng.random_range(-5.0..5.0));
            check_jacobians(&s, &u, rng.random_range(-0.1..0.1), &p);
        }
        for _ in 0..20 {
            let s = random_state(&mut rng, 0.05, 0.45);
            let u = ControlInput::new(rng.random_range(-1.0..1.0), rng.random_range(-5.0..5.0));
            check_jacobians(&s, &u, rng.random_range(-0.1..0.1), &p);
        }
    }

    #[test]
    fn rk4_coast_matches_fine_integration() {
        let p = VehicleParams::default();
        let s0 = VehicleState { u: 5.0, v: 0.02, r: 0.5, delta: 0.08, ..Default::default() };
        let mut coarse = s0;
        for _ in 0..100 {
            coarse = rk4_step(&coarse, &ControlInput::ZERO, 0.0, &p, 0.01);
        }
        // independent oracle: midpoint rule at a much finer step
        let mut x = s0.to_vector();
        let h = 1e-5;
        for _ in 0..100_000 {
            let f = |x: &StateVector| model_derivative(&VehicleState::from_vector(x), &ControlInput::ZERO, 0.0, &p);
            let mid = x + f(&x) * (0.5 * h);
            x += f(&mid) * h;
        }
        let fine = VehicleState::from_vector(&x).normalized();
        assert!((coarse.to_vector() - fine.to_vector()).amax() < 1e-6);
    }
}
