//! Histogram-of-oriented-gradients descriptor.

use super::patch::ImagePatch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HogConfig {
    pub cell: usize,
    pub bins: usize,
    /// Block side in cells; blocks step one cell at a time.
    pub block: usize,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self { cell: 8, bins: 9, block: 2 }
    }
}

impl HogConfig {
    /// Descriptor length for a patch of the given size.
    pub fn descriptor_len(&self, width: usize, height: usize) -> usize {
        let (cx, cy) = (width / self.cell, height / self.cell);
        if cx < self.block || cy < self.block {
            return 0;
        }
        (cx - self.block + 1) * (cy - self.block + 1) * self.block * self.block * self.bins
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor(pub Vec<f64>);

impl HogDescriptor {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Descriptor with the default geometry (8x8 cells, 9 bins, 2x2 blocks).
pub fn hog_features(patch: &ImagePatch) -> Result<HogDescriptor> {
    hog_features_with(patch, &HogConfig::default())
}

/// Unsigned gradients from central differences (replicated borders), cell
/// histograms with linear interpolation between bin centres at
/// `k * 180 / bins` degrees, L2-normalised overlapping blocks.
pub fn hog_features_with(patch: &ImagePatch, cfg: &HogConfig) -> Result<HogDescriptor> {
    let (w, h) = (patch.width(), patch.height());
    if cfg.cell == 0 || cfg.bins == 0 || cfg.block == 0 {
        return Err(Error::InvalidInput("hog geometry must be positive".into()));
    }
    if w % cfg.cell != 0 || h % cfg.cell != 0 {
        return Err(Error::InvalidInput(format!("{w}x{h} patch is not a multiple of the {} pixel cell", cfg.cell)));
    }
    let (cx, cy) = (w / cfg.cell, h / cfg.cell);
    if cx < cfg.block || cy < cfg.block {
        return Err(Error::InvalidInput("patch smaller than one block".into()));
    }
    let gray = patch.to_gray();
    let px = |x: usize, y: usize| gray.intensity(x, y);
    let bin_width = 180.0 / cfg.bins as f64;
    let mut cells = vec![0.0; cx * cy * cfg.bins];
    for y in 0..h {
        for x in 0..w {
            let gx = px((x + 1).min(w - 1), y) - px(x.saturating_sub(1), y);
            let gy = px(x, (y + 1).min(h - 1)) - px(x, y.saturating_sub(1));
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = (lo as usize) % cfg.bins;
            let b1 = (b0 + 1) % cfg.bins;
            let base = ((y / cfg.cell) * cx + x / cfg.cell) * cfg.bins;
            cells[base + b0] += mag * (1.0 - frac);
            cells[base + b1] += mag * frac;
        }
    }
    let mut out = Vec::with_capacity(cfg.descriptor_len(w, h));
    let eps2 = 1e-6;
    for by in 0..=(cy - cfg.block) {
        for bx in 0..=(cx - cfg.block) {
            let start = out.len();
            for dy in 0..cfg.block {
                for dx in 0..cfg.block {
                    let base = ((by + dy) * cx + bx + dx) * cfg.bins;
                    out.extend_from_slice(&cells[base..base + cfg.bins]);
                }
            }
            let norm = (out[start..].iter().map(|v| v * v).sum::<f64>() + eps2).sqrt();
            for v in &mut out[start..] {
                *v /= norm;
            }
        }
    }
    Ok(HogDescriptor(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(f: impl Fn(usize, usize) -> f64) -> ImagePatch {
        ImagePatch::gray(64, 64, (0..64 * 64).map(|i| f(i % 64, i / 64)).collect()).unwrap()
    }

    #[test]
    fn length_and_constant_patch() {
        let d = hog_features(&gray(|_, _| 0.4)).unwrap();
        assert_eq!(d.len(), 1764);
        assert!(d.0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn vertical_step_fills_horizontal_bin() {
        let d = hog_features(&gray(|x, _| if x < 28 { 0.0 } else { 1.0 })).unwrap();
        // gradient points along +x at columns 27 and 28, both in cell column 3
        let cfg = HogConfig::default();
        let mut cell_hist = [0.0; 9];
        // block (0, 2) holds cells (2,0) (3,0) (2,1) (3,1); take cell (3,0)
        let block = 2;
        let start = block * 36 + 9;
        cell_hist.copy_from_slice(&d.0[start..start + 9]);
        assert!(cell_hist[0] > 0.5);
        assert!(cell_hist[1..].iter().all(|v| *v == 0.0));
        // cells away from the edge are empty
        assert!(d.0[0..9].iter().all(|v| *v == 0.0));
        assert_eq!(cfg.bins, 9);
    }

    #[test]
    fn brightness_offset_invariance_and_determinism() {
        let f = |x: usize, y: usize| ((x * 7 + y * 13) % 17) as f64 / 40.0;
        let a = hog_features(&gray(f)).unwrap();
        let b = hog_features(&gray(|x, y| f(x, y) + 0.3)).unwrap();
        assert_eq!(a, hog_features(&gray(f)).unwrap());
        for (u, v) in a.0.iter().zip(&b.0) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(a.0.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let p = ImagePatch::gray(60, 64, vec![0.0; 60 * 64]).unwrap();
        assert!(matches!(hog_features(&p), Err(Error::InvalidInput(_))));
        let p = ImagePatch::gray(8, 8, vec![0.0; 64]).unwrap();
        assert!(hog_features(&p).is_err());
    }
}
