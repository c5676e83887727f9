//! Geometric pure-pursuit steering.

use super::path::WaypointPath;
use super::vehicle::{VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::planning::Waypoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurePursuitConfig {
    pub lookahead: f64,
    /// Time constant turning the steering-angle target into a rate.
    pub steer_time_constant: f64,
}

impl Default for PurePursuitConfig {
    fn default() -> Self {
        Self { lookahead: 3.0, steer_time_constant: 0.1 }
    }
}

/// Steering angle chasing the point `lookahead` metres of arc ahead of the
/// nearest path point.
pub fn pure_pursuit_step(
    state: &VehicleState,
    waypoints: &[Waypoint],
    closed: bool,
    lookahead: f64,
    params: &VehicleParams,
) -> Result<f64> {
    if waypoints.is_empty() {
        return Err(Error::InvalidInput("pure pursuit needs a nonempty path".into()));
    }
    if waypoints.len() == 1 {
        return steer_towards(state, &waypoints[0].position, lookahead, params);
    }
    let path = WaypointPath::new(waypoints.to_vec(), closed)?;
    pure_pursuit_on(state, &path, lookahead, params, None)
}

/// As [`pure_pursuit_step`] on a prepared path with an optional search hint.
pub fn pure_pursuit_on(
    state: &VehicleState,
    path: &WaypointPath,
    lookahead: f64,
    params: &VehicleParams,
    hint: Option<usize>,
) -> Result<f64> {
    let here = Point2::new(state.x, state.y);
    let proj = path.project(&here, hint, 25);
    let (goal, _, _) = path.at(proj.s + lookahead);
    steer_towards(state, &goal, lookahead, params)
}

fn steer_towards(state: &VehicleState, goal: &Point2, lookahead: f64, params: &VehicleParams) -> Result<f64> {
    if !(lookahead > 0.0) {
        return Err(Error::InvalidInput("lookahead must be positive".into()));
    }
    let rel = goal - Point2::new(state.x, state.y);
    if rel.norm() < 1e-9 {
        return Ok(0.0);
    }
    let alpha = rel.y.atan2(rel.x) - state.psi;
    let delta = (2.0 * params.wheelbase() * alpha.sin() / lookahead).atan();
    Ok(delta.clamp(-params.delta_max, params.delta_max))
}
