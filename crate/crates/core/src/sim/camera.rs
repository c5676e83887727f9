use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2};
use crate::rng::{stream, tag};
use crate::vision::{hsv_to_rgb, ConeColor, Hsv, ImagePatch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraConfig {
    /// Half of the horizontal field of view, degrees.
    pub half_fov: f64,
    pub min_range: f64,
    pub max_range: f64,
    /// Per-channel RGB noise standard deviation.
    pub noise: f64,
    pub size: usize,
    /// Metric width of the ground window a patch covers.
    pub window: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { half_fov: 50.0, min_range: 0.5, max_range: 25.0, noise: 0.02, size: 64, window: 0.5 }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_fov > 0.0 && self.half_fov < 90.0) || !(self.max_range > self.min_range) || !(self.noise >= 0.0) {
            return Err(Error::InvalidConfig("camera needs 0 < fov < 90, min < max range, nonnegative noise".into()));
        }
        if self.size < 16 || !self.size.is_multiple_of(8) || !(self.window > 0.0) {
            return Err(Error::InvalidConfig("camera patch size must be a multiple of 8, at least 16".into()));
        }
        Ok(())
    }
}

/// What a rendered patch shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchSubject {
    Cone(ConeColor),
    LooseTyre,
    TyreStack,
    Barrier,
    Ground,
}

impl PatchSubject {
    pub fn is_cone(&self) -> bool {
        matches!(self, PatchSubject::Cone(_))
    }
}

/// Smooth value noise on a coarse lattice, bilinearly interpolated.
struct Texture {
    n: usize,
    grid: Vec<f64>,
}

impl Texture {
    fn new(rng: &mut ChaCha8Rng, n: usize) -> Self {
        Self { n, grid: (0..(n + 1) * (n + 1)).map(|_| rng.random_range(-1.0..1.0)).collect() }
    }

    fn at(&self, u: f64, v: f64) -> f64 {
        let (x, y) = (u * self.n as f64, v * self.n as f64);
        let (i, j) = ((x.floor() as usize).min(self.n - 1), (y.floor() as usize).min(self.n - 1));
        let (fx, fy) = (x - i as f64, y - j as f64);
        let g = |a: usize, b: usize| self.grid[b * (self.n + 1) + a];
        (g(i, j) * (1.0 - fx) + g(i + 1, j) * fx) * (1.0 - fy) + (g(i, j + 1) * (1.0 - fx) + g(i + 1, j + 1) * fx) * fy
    }
}

/// Render a patch of `subject` with seeded shape, shading and pixel noise.
pub fn render_patch(subject: PatchSubject, cfg: &CameraConfig, brightness: f64, rng: &mut ChaCha8Rng) -> ImagePatch {
    let n = cfg.size;
    let ppm = n as f64 / cfg.window;
    let texture = Texture::new(rng, 6);
    let ground_hue = rng.random_range(90.0..120.0);
    let ground_sat = rng.random_range(0.3..0.5);
    let ground_val = rng.random_range(0.4..0.6);
    let scale = rng.random_range(0.9..1.1);
    let cx = n as f64 / 2.0 + rng.random_range(-3.0..3.0);
    let base = n as f64 - 6.0 + rng.random_range(-2.0..2.0);
    let jitter_hue = rng.random_range(-8.0..8.0);
    let body_sat = rng.random_range(0.75..0.95);
    let body_val = rng.random_range(0.7..0.95);
    let shade = rng.random_range(-0.1..0.1);
    let mut rgb = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let (x, y) = (col as f64 + 0.5, row as f64 + 0.5);
            let t = texture.at(x / n as f64, y / n as f64);
            let mut px = Hsv {
                h: (ground_hue + 8.0 * t).rem_euclid(360.0),
                s: (ground_sat + 0.05 * t).clamp(0.0, 1.0),
                v: (ground_val + 0.08 * t).clamp(0.0, 1.0),
            };
            let lateral = (x - cx) / (n as f64 / 2.0);
            match subject {
                PatchSubject::Cone(color) => {
                    let height = 0.3 * ppm * scale;
                    let up = base - y;
                    if (0.0..=height).contains(&up) {
                        let f = up / height;
                        let half = (0.12 * ppm * scale) * (1.0 - f) + 2.5 * f;
                        if (x - cx).abs() <= half {
                            px = if (0.45..0.62).contains(&f) {
                                Hsv { h: 0.0, s: 0.03, v: 0.95 }
                            } else {
                                let h = color.hue().unwrap_or(30.0) + jitter_hue;
                                Hsv { h: h.rem_euclid(360.0), s: body_sat, v: (body_val + shade * lateral).clamp(0.0, 1.0) }
                            };
                        }
                    }
                }
                PatchSubject::LooseTyre => {
                    let (half, height) = (0.22 * ppm * scale, 0.2 * ppm * scale);
                    let up = base - y;
                    if (0.0..=height).contains(&up) && (x - cx).abs() <= half {
                        let tread = if ((x - cx) / 3.0).floor() as i64 % 2 == 0 { 0.04 } else { 0.0 };
                        let rim = if (up - height / 2.0).abs() < height * 0.15 { 0.1 } else { 0.0 };
                        px = Hsv { h: 30.0, s: 0.12, v: 0.1 + tread + rim };
                    }
                }
                PatchSubject::TyreStack => {
                    let band = ((y + rng.random_range(0.0..0.01)) / (0.2 * ppm * scale)).floor() as i64;
                    px = Hsv { h: 30.0, s: 0.1, v: if band % 2 == 0 { 0.12 } else { 0.2 } };
                }
                PatchSubject::Barrier => {
                    let up = base - y;
                    if up >= 0.0 {
                        let stripe = ((x + up) / 12.0).floor() as i64 % 2 == 0;
                        px = Hsv { h: 0.0, s: if stripe { 0.05 } else { 0.08 }, v: if stripe { 0.9 } else { 0.6 } };
                    }
                }
                PatchSubject::Ground => {}
            }
            px.v = (px.v * brightness).clamp(0.0, 1.0);
            rgb.push(hsv_to_rgb(px));
        }
    }
    if cfg.noise > 0.0 {
        let noise = Normal::new(0.0, cfg.noise).expect("finite sigma");
        for c in rgb.iter_mut().flat_map(|p| p.iter_mut()) {
            *c = (*c + noise.sample(rng)).clamp(0.0, 1.0);
        }
    }
    ImagePatch::from_rgb(n, n, &rgb).expect("square patch")
}

/// Patch of the object at `position` as seen from the planar vehicle pose
/// `(x, y, psi)`. Objects outside the field of view or range are an error.
pub fn simulate_camera_patch(
    position: &Point2,
    subject: PatchSubject,
    vehicle: (f64, f64, f64),
    cfg: &CameraConfig,
    seed: u64,
) -> Result<ImagePatch> {
    let rel = position - Point2::new(vehicle.0, vehicle.1);
    let range = rel.norm();
    let bearing = wrap_angle(rel.y.atan2(rel.x) - vehicle.2);
    if range < cfg.min_range || range > cfg.max_range || bearing.abs() > cfg.half_fov.to_radians() {
        return Err(Error::OutOfRange(format!("object at {range:.1} m, bearing {:.0} deg", bearing.to_degrees())));
    }
    let mut rng = stream(seed, tag::CAMERA, 0);
    let brightness = 1.05 - 0.01 * range;
    Ok(render_patch(subject, cfg, brightness, &mut rng))
}

/// Labelled training set: alternating cones (random colours) and negatives
/// (ground, tyres, tyre stacks, barriers).
pub fn patch_dataset(count: usize, cfg: &CameraConfig, seed: u64) -> Vec<(ImagePatch, PatchSubject)> {
    const NEGATIVES: [PatchSubject; 4] =
        [PatchSubject::Ground, PatchSubject::LooseTyre, PatchSubject::TyreStack, PatchSubject::Barrier];
    const COLORS: [ConeColor; 3] = [ConeColor::Red, ConeColor::Blue, ConeColor::Yellow];
    (0..count)
        .map(|k| {
            let mut rng = stream(seed, tag::DATASET, k as u64);
            let subject = if k % 2 == 0 {
                PatchSubject::Cone(COLORS[rng.random_range(0..3)])
            } else {
                NEGATIVES[rng.random_range(0..4)]
            };
            let brightness = rng.random_range(0.8..1.05);
            (render_patch(subject, cfg, brightness, &mut rng), subject)
        })
        .collect()
}
