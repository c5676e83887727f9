//! Cone colour from a two-cluster k-means on hue.

use rand::Rng;

use super::patch::{Hsv, ImagePatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConeColor {
    Red,
    Blue,
    Yellow,
    Unknown,
}

impl ConeColor {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConeColor::Red => "red",
            ConeColor::Blue => "blue",
            ConeColor::Yellow => "yellow",
            ConeColor::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "red" => Some(ConeColor::Red),
            "blue" => Some(ConeColor::Blue),
            "yellow" => Some(ConeColor::Yellow),
            "unknown" => Some(ConeColor::Unknown),
            _ => None,
        }
    }

    /// Reference hue in degrees.
    pub fn hue(&self) -> Option<f64> {
        match self {
            ConeColor::Red => Some(0.0),
            ConeColor::Yellow => Some(60.0),
            ConeColor::Blue => Some(240.0),
            ConeColor::Unknown => None,
        }
    }
}

/// Angular distance between two hues in degrees.
pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn signed_offset(h: f64, reference: f64) -> f64 {
    let d = (h - reference).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Weighted circular mean in degrees; `None` when the weights cancel.
pub fn circular_mean(hues: &[f64], weights: &[f64]) -> Option<f64> {
    let (mut s, mut c) = (0.0, 0.0);
    for (h, w) in hues.iter().zip(weights) {
        let r = h.to_radians();
        s += w * r.sin();
        c += w * r.cos();
    }
    if s.hypot(c) < 1e-12 {
        return None;
    }
    Some(s.atan2(c).to_degrees().rem_euclid(360.0))
}

/// Point minimising the summed squared arc distance near the circular mean.
fn arc_mean(hues: &[f64]) -> Option<f64> {
    let reference = circular_mean(hues, &vec![1.0; hues.len()]).or_else(|| hues.first().copied())?;
    let offset = hues.iter().map(|h| signed_offset(*h, reference)).sum::<f64>() / hues.len() as f64;
    Some((reference + offset).rem_euclid(360.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HueClusters {
    pub centers: [f64; 2],
    pub labels: Vec<usize>,
    pub iterations: usize,
}

impl HueClusters {
    /// Sum of squared arc distances to the assigned centres.
    pub fn cost(&self, hues: &[f64]) -> f64 {
        hues.iter().zip(&self.labels).map(|(h, l)| hue_distance(*h, self.centers[*l]).powi(2)).sum()
    }
}

pub const KMEANS_MAX_ITER: usize = 50;

/// Two-cluster k-means on the hue circle. Initial centres: the hue
/// farthest from a seeded sample, then the hue farthest from that one.
pub fn kmeans_hue(hues: &[f64], seed: u64) -> HueClusters {
    if hues.is_empty() {
        return HueClusters { centers: [0.0, 0.0], labels: Vec::new(), iterations: 0 };
    }
    let mut rng = crate::rng::stream(seed, crate::rng::tag::CAMERA, 0x6b6d);
    let start = hues[rng.random_range(0..hues.len())];
    let farthest = |from: f64| {
        hues.iter().copied().fold((from, -1.0), |best, h| {
            let d = hue_distance(h, from);
            if d > best.1 {
                (h, d)
            } else {
                best
            }
        })
    };
    let c0 = farthest(start).0;
    let c1 = farthest(c0).0;
    let mut centers = [c0, c1];
    let mut labels = vec![usize::MAX; hues.len()];
    let mut iterations = 0;
    for it in 0..KMEANS_MAX_ITER {
        iterations = it + 1;
        let mut changed = false;
        for (l, h) in labels.iter_mut().zip(hues) {
            let new = usize::from(hue_distance(*h, centers[1]) < hue_distance(*h, centers[0]));
            if *l != new {
                *l = new;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (k, c) in centers.iter_mut().enumerate() {
            let members: Vec<f64> = hues.iter().zip(&labels).filter(|(_, l)| **l == k).map(|(h, _)| *h).collect();
            if let Some(m) = arc_mean(&members) {
                *c = m;
            }
        }
    }
    HueClusters { centers, labels, iterations }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorConfig {
    pub tolerance: f64,
    /// Minimum mean saturation of the chromatic cluster.
    pub min_saturation: f64,
}

impl Default for ColorConfig {
    fn default() -> Self {
        Self { tolerance: 40.0, min_saturation: 0.25 }
    }
}

/// Colour of the more saturated of the two hue clusters.
pub fn classify_color(patch: &ImagePatch, seed: u64) -> ConeColor {
    classify_color_with(patch, seed, &ColorConfig::default())
}

pub fn classify_color_with(patch: &ImagePatch, seed: u64, cfg: &ColorConfig) -> ConeColor {
    let Some(px) = patch.hsv_pixels() else { return ConeColor::Unknown };
    // achromatic pixels carry no usable hue
    let px: Vec<Hsv> = px.iter().copied().filter(|p| p.s >= cfg.min_saturation).collect();
    if px.is_empty() {
        return ConeColor::Unknown;
    }
    let hues: Vec<f64> = px.iter().map(|p| p.h).collect();
    let clusters = kmeans_hue(&hues, seed);
    let mut sat = [(0.0, 0usize); 2];
    for (p, l) in px.iter().zip(&clusters.labels) {
        sat[*l].0 += p.s;
        sat[*l].1 += 1;
    }
    let mean = |k: usize| if sat[k].1 == 0 { -1.0 } else { sat[k].0 / sat[k].1 as f64 };
    let cone = if mean(1) > mean(0) { 1 } else { 0 };
    if mean(cone) < cfg.min_saturation {
        return ConeColor::Unknown;
    }
    let (h, w): (Vec<f64>, Vec<f64>) =
        px.iter().zip(&clusters.labels).filter(|(_, l)| **l == cone).map(|(p, _)| (p.h, p.s)).unzip();
    let Some(hue) = circular_mean(&h, &w) else { return ConeColor::Unknown };
    [ConeColor::Red, ConeColor::Yellow, ConeColor::Blue]
        .into_iter()
        .map(|c| (c, hue_distance(hue, c.hue().expect("reference colour"))))
        .filter(|(_, d)| *d <= cfg.tolerance)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(ConeColor::Unknown, |(c, _)| c)
}
