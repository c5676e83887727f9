use rand_distr::{Distribution, Normal};

use crate::control::{idx, model_derivative, rk4_step, tire_forces, ControlInput, StateVector, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    /// RK4 steps per call.
    pub substeps: usize,
    /// Friction coefficient bounding each axle's lateral force, if any.
    pub friction_limit: Option<f64>,
    /// Standard deviation of a yaw-rate disturbance added per call.
    pub yaw_noise: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { substeps: 20, friction_limit: None, yaw_noise: 0.0 }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 || self.friction_limit.is_some_and(|m| !(m > 0.0)) || !(self.yaw_noise >= 0.0) {
            return Err(Error::InvalidConfig("plant needs substeps >= 1, positive friction and nonnegative noise".into()));
        }
        Ok(())
    }
}

fn saturated_derivative(s: &VehicleState, u: &ControlInput, p: &VehicleParams, mu: f64) -> StateVector {
    let mut d = model_derivative(s, u, 0.0, p);
    if let Ok((fyf, fyr)) = tire_forces(s, p) {
        let l = p.wheelbase();
        let limf = mu * p.mass * GRAVITY * p.lr / l;
        let limr = mu * p.mass * GRAVITY * p.lf / l;
        let (ff, fr) = (fyf.clamp(-limf, limf), fyr.clamp(-limr, limr));
        d[idx::V] = (ff + fr) / p.mass - s.u * s.r;
        d[idx::R] = (ff * p.lf - fr * p.lr) / p.izz;
    }
    d
}

/// Advance the true vehicle by `dt`. Error states are integrated against a
/// straight reference; callers that track a path recompute them.
pub fn step_plant(
    state: &VehicleState,
    input: &ControlInput,
    dt: f64,
    params: &VehicleParams,
    cfg: &PlantConfig,
    seed: u64,
) -> VehicleState {
    let h = dt / cfg.substeps as f64;
    let mut s = *state;
    for _ in 0..cfg.substeps {
        s = match cfg.friction_limit {
            None => rk4_step(&s, input, 0.0, params, h),
            Some(mu) => {
                let x0 = s.to_vector();
                let f = |x: &StateVector| saturated_derivative(&VehicleState::from_vector(x), input, params, mu);
                let k1 = f(&x0);
                let k2 = f(&(x0 + k1 * (0.5 * h)));
                let k3 = f(&(x0 + k2 * (0.5 * h)));
                let k4 = f(&(x0 + k3 * h));
                VehicleState::from_vector(&(x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))).normalized()
            }
        };
    }
    if cfg.yaw_noise > 0.0 {
        let mut rng = stream(seed, tag::PLANT, 0);
        s.r += Normal::new(0.0, cfg.yaw_noise).expect("finite sigma").sample(&mut rng) * dt.sqrt();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn straight_coast() {
        let p = VehicleParams::default();
        let mut s = VehicleState { u: 5.0, ..VehicleState::default() };
        for _ in 0..20 {
            s = step_plant(&s, &ControlInput::ZERO, 0.05, &p, &PlantConfig::default(), 0);
        }
        assert_abs_diff_eq!(s.x, 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unsaturated_plant_matches_the_model() {
        let p = VehicleParams::default();
        let cfg = PlantConfig::default();
        let mut a = VehicleState { u: 4.0, delta: 0.05, ..VehicleState::default() };
        let mut b = a;
        let input = ControlInput::new(0.3, 1.0);
        for _ in 0..40 {
            a = step_plant(&a, &input, 0.05, &p, &cfg, 0);
            for _ in 0..cfg.substeps {
                b = rk4_step(&b, &input, 0.0, &p, 0.05 / cfg.substeps as f64);
            }
        }
        assert!((a.to_vector() - b.to_vector()).amax() < 1e-9);
    }

    #[test]
    fn step_steer_reaches_linear_yaw_gain() {
        // unequal stiffness so the understeer gradient is nonzero
        let p = VehicleParams { c_af: 30000.0, c_ar: 42000.0, ..VehicleParams::default() };
        let (u, delta) = (8.0, 0.03);
        let l = p.wheelbase();
        let k_us = p.mass / l * (p.lr / p.c_af - p.lf / p.c_ar);
        let expected = u * delta / (l + k_us * u * u);
        let mut s = VehicleState { u, delta, ..VehicleState::default() };
        for _ in 0..100 {
            s = step_plant(&s, &ControlInput::ZERO, 0.05, &p, &PlantConfig::default(), 0);
        }
        assert!((s.r - expected).abs() < 0.01 * expected.abs(), "r {} vs {}", s.r, expected);
    }

    #[test]
    fn saturation_caps_lateral_acceleration() {
        let p = VehicleParams::default();
        let cfg = PlantConfig { friction_limit: Some(0.5), ..PlantConfig::default() };
        let mut s = VehicleState { u: 10.0, delta: 0.3, ..VehicleState::default() };
        for _ in 0..60 {
            s = step_plant(&s, &ControlInput::ZERO, 0.05, &p, &cfg, 0);
        }
        let d = saturated_derivative(&s, &ControlInput::ZERO, &p, 0.5);
        let ay = d[idx::V] + s.u * s.r;
        assert!(ay.abs() <= 0.5 * GRAVITY + 1e-6, "ay {ay}");
    }

    #[test]
    fn yaw_noise_is_seeded() {
        let p = VehicleParams::default();
        let cfg = PlantConfig { yaw_noise: 0.01, ..PlantConfig::default() };
        let s = VehicleState { u: 3.0, ..VehicleState::default() };
        let a = step_plant(&s, &ControlInput::ZERO, 0.05, &p, &cfg, 11);
        assert_eq!(a, step_plant(&s, &ControlInput::ZERO, 0.05, &p, &cfg, 11));
        assert_ne!(a, step_plant(&s, &ControlInput::ZERO, 0.05, &p, &cfg, 12));
    }
}
