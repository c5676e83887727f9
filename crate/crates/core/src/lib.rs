//! Cone-track autonomy stack: perception, odometry, mapping, planning and
//! control, closed around a seeded simulator.
//!
//! ```
//! use conetrack::mission::{transition, AsState, MissionEvent};
//!
//! assert_eq!(transition(AsState::Ready, MissionEvent::GoSignal), AsState::Driving);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod ground;
pub mod harness;
pub mod mission;
pub mod odometry;
pub mod planning;
pub mod rng;
pub mod sim;
pub mod spatial;
pub mod track_map;
pub mod vision;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/frames.md")]
    mod frames {}
    #[doc = include_str!("../../../book/src/ground.md")]
    mod ground {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/mapping.md")]
    mod mapping {}
    #[doc = include_str!("../../../book/src/state-machine.md")]
    mod state_machine {}
    #[doc = include_str!("../../../book/src/missions.md")]
    mod missions {}
}
