//! Vehicle model, MPC and pure-pursuit path tracking.

mod mpc;
mod path;
mod pursuit;
mod vehicle;

pub use mpc::{limit_command, mpc_step, safe_stop, MpcConfig, MpcController, MpcProblem, MpcSolution, ReferenceHorizon};
pub use path::{PathProjection, WaypointPath};
pub use pursuit::{pure_pursuit_on, pure_pursuit_step, PurePursuitConfig};
pub use vehicle::{
    dynamics, idx, kinematic_dynamics, lateral_acceleration, linearize, model_derivative, rk4_step, tire_forces,
    ControlInput, InputJacobian, InputVector, Linearization, StateJacobian, StateVector, VehicleParams, VehicleState,
    INPUT_DIM, STATE_DIM,
};
