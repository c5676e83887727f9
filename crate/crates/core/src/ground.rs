//! RANSAC ground-plane segmentation.
//!
//! The ground is modeled as `y = a*x + b*z + h` in the sensor frame (y up).
//! Hypotheses are planes through three distinct region-of-interest points;
//! the one with the most inliers wins and is re-estimated by least squares
//! over its inliers.

use nalgebra::{Matrix3, Vector3};
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    pub a: f64,
    pub b: f64,
    pub h: f64,
}

impl PlaneModel {
    pub fn new(a: f64, b: f64, h: f64) -> Self {
        Self { a, b, h }
    }

    /// Height of the plane at `(x, z)`.
    pub fn height_at(&self, x: f64, z: f64) -> f64 {
        self.a * x + self.b * z + self.h
    }
}

/// How [`plane_error`] normalizes the vertical residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    /// True point-to-plane distance, denominator `sqrt(1 + a^2 + b^2)`.
    #[default]
    Geometric,
    /// Denominator `sqrt(1 + a^2 + b^2 + h^2)`.
    OffsetNormalized,
}

/// Forward box in the sensor frame: `x` ahead, `z` lateral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiBox {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for RoiBox {
    fn default() -> Self {
        Self { x_min: 0.0, x_max: 20.0, z_min: -6.0, z_max: 6.0 }
    }
}

impl RoiBox {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64) -> Result<Self> {
        if !(x_min < x_max && z_min < z_max) {
            return Err(Error::InvalidInput("ROI bounds must satisfy min < max".into()));
        }
        Ok(Self { x_min, x_max, z_min, z_max })
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.z >= self.z_min && p.z <= self.z_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacConfig {
    pub roi: RoiBox,
    pub tau: f64,
    pub max_iter: usize,
    /// Hypotheses with `|a|` or `|b|` at or above this are discarded.
    pub slope_limit: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub mode: ErrorMode,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            roi: RoiBox::default(),
            tau: 0.05,
            max_iter: 100,
            slope_limit: 1.0,
            h_min: -3.0,
            h_max: 3.0,
            mode: ErrorMode::Geometric,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub ground_indices: Vec<usize>,
    pub obstacle_indices: Vec<usize>,
    pub model: PlaneModel,
    /// Every accepted hypothesis with its inlier count, in sampling order.
    pub hypotheses: Vec<(PlaneModel, usize)>,
}

impl SegmentationResult {
    pub fn inlier_count(&self) -> usize {
        self.ground_indices.len()
    }
}

/// Signed point-to-plane error in geometric mode.
pub fn plane_error(p: &Point3, m: &PlaneModel) -> f64 {
    plane_error_with(p, m, ErrorMode::Geometric)
}

pub fn plane_error_with(p: &Point3, m: &PlaneModel, mode: ErrorMode) -> f64 {
    let num = p.y - m.a * p.x - m.b * p.z - m.h;
    let den = match mode {
        ErrorMode::Geometric => (1.0 + m.a * m.a + m.b * m.b).sqrt(),
        ErrorMode::OffsetNormalized => (1.0 + m.a * m.a + m.b * m.b + m.h * m.h).sqrt(),
    };
    num / den
}

/// Strict inlier test: `|error| < tau`.
pub fn classify_inlier(p: &Point3, m: &PlaneModel, tau: f64) -> bool {
    plane_error(p, m).abs() < tau
}

fn plane_through(p: &Point3, q: &Point3, r: &Point3) -> Option<PlaneModel> {
    let m = Matrix3::new(p.x, p.z, 1.0, q.x, q.z, 1.0, r.x, r.z, 1.0);
    // reject collinear or near-vertical triples
    let scale = 1.0 + (q - p).norm() * (r - p).norm();
    if m.determinant().abs() < 1e-9 * scale {
        return None;
    }
    let sol = m.lu().solve(&Vector3::new(p.y, q.y, r.y))?;
    Some(PlaneModel::new(sol[0], sol[1], sol[2]))
}

fn least_squares(cloud: &[Point3], idx: &[usize]) -> Option<PlaneModel> {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &i in idx {
        let p = &cloud[i];
        let row = Vector3::new(p.x, p.z, 1.0);
        ata += row * row.transpose();
        atb += row * p.y;
    }
    let sol = ata.lu().solve(&atb)?;
    Some(PlaneModel::new(sol[0], sol[1], sol[2]))
}

/// RANSAC fit with default bounds and the geometric error.
pub fn ransac_fit(cloud: &[Point3], roi: &RoiBox, tau: f64, max_iter: usize, seed: u64) -> Result<SegmentationResult> {
    let cfg = RansacConfig { roi: *roi, tau, max_iter, ..RansacConfig::default() };
    ransac_fit_with(cloud, &cfg, seed)
}

pub fn ransac_fit_with(cloud: &[Point3], cfg: &RansacConfig, seed: u64) -> Result<SegmentationResult> {
    if !(cfg.tau > 0.0) {
        return Err(Error::InvalidInput("tau must be positive".into()));
    }
    if cfg.max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    let roi_idx: Vec<usize> = (0..cloud.len()).filter(|&i| cfg.roi.contains(&cloud[i])).collect();
    if roi_idx.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points inside the ROI, need 3", roi_idx.len())));
    }
    let mut rng = crate::rng::stream(seed, 0x7261_6e73_6163, 0);
    let count = |m: &PlaneModel| {
        roi_idx.iter().filter(|&&i| plane_error_with(&cloud[i], m, cfg.mode).abs() < cfg.tau).count()
    };
    let admissible = |m: &PlaneModel| {
        m.a.abs() < cfg.slope_limit && m.b.abs() < cfg.slope_limit && m.h >= cfg.h_min && m.h <= cfg.h_max
    };

    let mut hypotheses = Vec::with_capacity(cfg.max_iter);
    let mut best: Option<(PlaneModel, usize)> = None;
    for _ in 0..cfg.max_iter {
        let pick = sample(&mut rng, roi_idx.len(), 3);
        let (i, j, k) = (roi_idx[pick.index(0)], roi_idx[pick.index(1)], roi_idx[pick.index(2)]);
        let Some(m) = plane_through(&cloud[i], &cloud[j], &cloud[k]) else { continue };
        if !admissible(&m) {
            continue;
        }
        let n = count(&m);
        hypotheses.push((m, n));
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((m, n));
        }
    }
    let Some((mut model, _)) = best else {
        return Err(Error::InsufficientData("no admissible plane hypothesis".into()));
    };

    let inliers = |m: &PlaneModel| -> Vec<usize> {
        roi_idx.iter().copied().filter(|&i| plane_error_with(&cloud[i], m, cfg.mode).abs() < cfg.tau).collect()
    };
    if let Some(refined) = least_squares(cloud, &inliers(&model)) {
        if admissible(&refined) {
            model = refined;
        }
    }
    let ground = inliers(&model);
    let mut is_ground = vec![false; cloud.len()];
    for &i in &ground {
        is_ground[i] = true;
    }
    let obstacles = roi_idx.iter().copied().filter(|&i| !is_ground[i]).collect();
    Ok(SegmentationResult { ground_indices: ground, obstacle_indices: obstacles, model, hypotheses })
}
