use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::control::VehicleState;
use crate::error::{Error, Result};
use crate::geometry::PoseTransform;
use crate::rng::{stream, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsConfig {
    pub position_sigma: f64,
    pub heading_sigma: f64,
    pub dropout: f64,
    pub rate_hz: f64,
}

impl Default for GpsConfig {
    fn default() -> Self {
        Self { position_sigma: 0.05, heading_sigma: 0.005, dropout: 0.0, rate_hz: 100.0 }
    }
}

impl GpsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.position_sigma >= 0.0) || !(self.heading_sigma >= 0.0) || !(self.rate_hz > 0.0) || !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("gps noise must be nonnegative, rate positive, dropout in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Noisy pose fix at the sensor mount height, or `None` during a dropout.
pub fn simulate_gps_ins(truth: &VehicleState, cfg: &GpsConfig, mount_height: f64, seed: u64) -> Option<PoseTransform> {
    let mut rng = stream(seed, tag::GPS, 0);
    if cfg.dropout > 0.0 && rng.random::<f64>() < cfg.dropout {
        return None;
    }
    let mut gauss = |sigma: f64| if sigma > 0.0 { Normal::new(0.0, sigma).expect("finite sigma").sample(&mut rng) } else { 0.0 };
    let dx = gauss(cfg.position_sigma);
    let dy = gauss(cfg.position_sigma);
    let dpsi = gauss(cfg.heading_sigma);
    Some(PoseTransform::from_planar(truth.x + dx, truth.y + dy, truth.psi + dpsi, mount_height))
}
