//! Synthetic world: track generation, vehicle plant and sensor models.

mod camera;
mod gps;
mod lidar;
mod plant;
mod track;

pub use camera::{patch_dataset, render_patch, simulate_camera_patch, CameraConfig, PatchSubject};
pub use gps::{simulate_gps_ins, GpsConfig};
pub use lidar::{simulate_lidar, LidarConfig};
pub use plant::{step_plant, PlantConfig};
pub use track::{
    generate_track, truth_track_map, Barrier, BarrierConfig, Obstacle, ObstacleKind, SceneryConfig, TrackSpec,
    WorldCone, WorldGroundTruth,
};

/// Sensor suite configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorConfig {
    pub lidar: LidarConfig,
    pub gps: GpsConfig,
    pub camera: CameraConfig,
}

impl SensorConfig {
    pub fn validate(&self) -> crate::Result<()> {
        self.lidar.validate()?;
        self.gps.validate()?;
        self.camera.validate()
    }
}
