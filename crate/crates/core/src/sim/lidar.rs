use rand_distr::{Distribution, Normal};

use super::track::WorldGroundTruth;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2, Point3, PoseTransform};
use crate::odometry::LaserScan;
use crate::rng::{stream, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct LidarConfig {
    pub layers: usize,
    /// Half of the vertical field of view, degrees.
    pub vertical_half_fov: f64,
    /// Azimuth step, degrees.
    pub azimuth_step: f64,
    pub max_range: f64,
    pub range_sigma: f64,
    pub rate_hz: f64,
    /// Mount height above the ground.
    pub mount_height: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            layers: 16,
            vertical_half_fov: 15.0,
            azimuth_step: 0.4,
            max_range: 60.0,
            range_sigma: 0.01,
            rate_hz: 10.0,
            mount_height: 0.5,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 || !(self.vertical_half_fov > 0.0) || !(self.azimuth_step > 0.0) {
            return Err(Error::InvalidConfig("lidar needs two or more layers and positive angular steps".into()));
        }
        if !(self.max_range > 0.0) || !(self.rate_hz > 0.0) || !(self.range_sigma >= 0.0) || !(self.mount_height > 0.0) {
            return Err(Error::InvalidConfig("lidar range, rate and mount height must be positive".into()));
        }
        Ok(())
    }

    pub fn elevations(&self) -> Vec<f64> {
        let n = self.layers;
        (0..n)
            .map(|i| (-self.vertical_half_fov + 2.0 * self.vertical_half_fov * i as f64 / (n - 1) as f64).to_radians())
            .collect()
    }

    pub fn azimuth_count(&self) -> usize {
        (360.0 / self.azimuth_step).round() as usize
    }

    /// Azimuth of column `j`, radians, positive toward the sensor's right.
    pub fn azimuth(&self, j: usize) -> f64 {
        (-180.0 + j as f64 * self.azimuth_step).to_radians()
    }
}

enum Surface {
    Cylinder { c: Point2, r: f64, h: f64 },
    Wall { a: Point2, b: Point2, h: f64 },
}

/// Ray in planar world coordinates: origin `o` at height `oh`, horizontal
/// direction `d` (scaled by cos(elevation)) and vertical rate `dh`.
fn hit(surface: &Surface, o: &Point2, oh: f64, d: &Point2, dh: f64) -> Option<f64> {
    match *surface {
        Surface::Cylinder { c, r, h } => {
            let m = o - c;
            let a = d.norm_squared();
            let b = m.dot(d);
            let cc = m.norm_squared() - r * r;
            let mut best = None;
            let disc = b * b - a * cc;
            if disc >= 0.0 && a > 0.0 {
                let t = (-b - disc.sqrt()) / a;
                let y = oh + t * dh;
                if t > 0.0 && (0.0..=h).contains(&y) {
                    best = Some(t);
                }
            }
            if dh < 0.0 && oh > h {
                let t = (h - oh) / dh;
                if (o + d * t - c).norm_squared() <= r * r && best.is_none_or(|b| t < b) {
                    best = Some(t);
                }
            }
            best
        }
        Surface::Wall { a, b, h } => {
            let e = b - a;
            let den = d.perp(&e);
            if den.abs() < 1e-12 {
                return None;
            }
            let w = a - o;
            let t = w.perp(&e) / den;
            let u = w.perp(d) / den;
            let y = oh + t * dh;
            (t > 0.0 && (0.0..=1.0).contains(&u) && (0.0..=h).contains(&y)).then_some(t)
        }
    }
}

/// Ray-cast one sweep from the given sensor pose (sensor frame: x forward,
/// y up, z right). The sensor is assumed level; the ground is the plane
/// `y = 0` in the world. Points come out layer by layer in azimuth order.
pub fn simulate_lidar(pose: &PoseTransform, world: &WorldGroundTruth, cfg: &LidarConfig, seed: u64) -> LaserScan {
    let (px, py, psi) = pose.planar();
    let origin = Point2::new(px, py);
    let oh = pose.translation.y;
    let mut surfaces = Vec::new();
    for c in &world.cones {
        surfaces.push(Surface::Cylinder { c: c.position, r: world.cone_radius, h: world.cone_height });
    }
    for o in &world.obstacles {
        surfaces.push(Surface::Cylinder { c: o.position, r: o.radius, h: o.height });
    }
    for b in &world.barriers {
        let c = b.corners();
        for k in 0..4 {
            surfaces.push(Surface::Wall { a: c[k], b: c[(k + 1) % 4], h: b.height });
        }
    }
    // azimuth culling: each surface lists itself in the columns it spans
    let cols = cfg.azimuth_count();
    let step = cfg.azimuth_step.to_radians();
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); cols];
    let column_of = |bearing: f64| {
        let az = wrap_angle(psi - bearing);
        ((az + std::f64::consts::PI) / step).floor() as i64
    };
    for (k, s) in surfaces.iter().enumerate() {
        let (lo, hi) = match *s {
            Surface::Cylinder { c, r, .. } => {
                let rel = c - origin;
                let dist = rel.norm();
                if dist - r > cfg.max_range {
                    continue;
                }
                if dist <= r {
                    (0, cols as i64 - 1)
                } else {
                    let centre = column_of(rel.y.atan2(rel.x));
                    let half = ((r / dist).asin() / step).ceil() as i64 + 1;
                    (centre - half, centre + half)
                }
            }
            Surface::Wall { a, b, .. } => {
                let (ra, rb) = (a - origin, b - origin);
                if super::track::segment_distance(&origin, &a, &b) > cfg.max_range {
                    continue;
                }
                let (ca, cb) = (column_of(ra.y.atan2(ra.x)), column_of(rb.y.atan2(rb.x)));
                let (lo, hi) = (ca.min(cb), ca.max(cb));
                // the short way round may cross the seam at the back
                if hi - lo > cols as i64 / 2 {
                    (hi - 1, lo + cols as i64 + 1)
                } else {
                    (lo - 1, hi + 1)
                }
            }
        };
        for j in lo..=hi {
            columns[j.rem_euclid(cols as i64) as usize].push(k);
        }
    }
    let mut rng = stream(seed, tag::LIDAR, 0);
    let noise = Normal::new(0.0, cfg.range_sigma.max(1e-300)).expect("finite sigma");
    let elevations = cfg.elevations();
    let mut layers = Vec::with_capacity(elevations.len());
    for &theta in &elevations {
        let (st, ct) = theta.sin_cos();
        let mut layer = Vec::new();
        for (j, col) in columns.iter().enumerate() {
            let phi = cfg.azimuth(j);
            let bearing = psi - phi;
            let d = Point2::new(bearing.cos(), bearing.sin()) * ct;
            let mut t = if st < 0.0 { -oh / st } else { f64::INFINITY };
            for &k in col {
                if let Some(tk) = hit(&surfaces[k], &origin, oh, &d, st) {
                    t = t.min(tk);
                }
            }
            if t > cfg.max_range {
                continue;
            }
            let range = if cfg.range_sigma > 0.0 { t + noise.sample(&mut rng) } else { t };
            layer.push(Point3::new(ct * phi.cos(), st, ct * phi.sin()) * range);
        }
        layers.push(layer);
    }
    LaserScan::new(layers, 0.0)
}
