//! Small image patches in grayscale or HSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Convert linear RGB in `[0, 1]` (clamped) to HSV.
pub fn rgb_to_hsv(rgb: [f64; 3]) -> Hsv {
    let [r, g, b] = rgb.map(|c| c.clamp(0.0, 1.0));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max > 0.0 { d / max } else { 0.0 };
    Hsv { h: if h >= 360.0 { h - 360.0 } else { h }, s, v: max }
}

pub fn hsv_to_rgb(c: Hsv) -> [f64; 3] {
    let chroma = c.v * c.s;
    let hp = c.h.rem_euclid(360.0) / 60.0;
    let x = chroma * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let m = c.v - chroma;
    [r + m, g + m, b + m]
}

/// Luma of an RGB triple.
pub fn luma(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pixels {
    Gray(Vec<f64>),
    Hsv(Vec<Hsv>),
}

/// Row-major pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    width: usize,
    height: usize,
    pixels: Pixels,
}

impl ImagePatch {
    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::check(width, height, data.len())?;
        Ok(Self { width, height, pixels: Pixels::Gray(data) })
    }

    pub fn hsv(width: usize, height: usize, data: Vec<Hsv>) -> Result<Self> {
        Self::check(width, height, data.len())?;
        for p in &data {
            if !(0.0..360.0).contains(&p.h) || !(0.0..=1.0).contains(&p.s) || !(0.0..=1.0).contains(&p.v) {
                return Err(Error::InvalidInput(format!("hsv pixel out of range: {p:?}")));
            }
        }
        Ok(Self { width, height, pixels: Pixels::Hsv(data) })
    }

    pub fn from_rgb(width: usize, height: usize, rgb: &[[f64; 3]]) -> Result<Self> {
        Self::check(width, height, rgb.len())?;
        Ok(Self { width, height, pixels: Pixels::Hsv(rgb.iter().map(|c| rgb_to_hsv(*c)).collect()) })
    }

    fn check(width: usize, height: usize, len: usize) -> Result<()> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("patch dimensions must be positive".into()));
        }
        if len != width * height {
            return Err(Error::InvalidInput(format!("expected {} pixels, got {len}", width * height)));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &Pixels {
        &self.pixels
    }

    pub fn is_hsv(&self) -> bool {
        matches!(self.pixels, Pixels::Hsv(_))
    }

    /// HSV pixels, if the patch is in HSV mode.
    pub fn hsv_pixels(&self) -> Option<&[Hsv]> {
        match &self.pixels {
            Pixels::Hsv(p) => Some(p),
            Pixels::Gray(_) => None,
        }
    }

    /// Grayscale copy; HSV pixels go through RGB luma.
    pub fn to_gray(&self) -> ImagePatch {
        let data = match &self.pixels {
            Pixels::Gray(g) => g.clone(),
            Pixels::Hsv(p) => p.iter().map(|c| luma(hsv_to_rgb(*c))).collect(),
        };
        ImagePatch { width: self.width, height: self.height, pixels: Pixels::Gray(data) }
    }

    /// Grayscale intensity at `(x, y)`.
    pub fn intensity(&self, x: usize, y: usize) -> f64 {
        let i = y * self.width + x;
        match &self.pixels {
            Pixels::Gray(g) => g[i],
            Pixels::Hsv(p) => luma(hsv_to_rgb(p[i])),
        }
    }
}

pub const PATCH_HEADER: &str = "# conetrack-patch v1";

/// Text format: version line, `gray <w> <h>` or `hsv <w> <h>`, then one
/// row of the image per line (HSV pixels as `h,s,v`).
pub fn patch_to_string(p: &ImagePatch) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PATCH_HEADER}");
    let mode = if p.is_hsv() { "hsv" } else { "gray" };
    let _ = writeln!(out, "{mode} {} {}", p.width, p.height);
    for y in 0..p.height {
        let row: Vec<String> = (0..p.width)
            .map(|x| {
                let i = y * p.width + x;
                match &p.pixels {
                    Pixels::Gray(g) => format!("{:?}", g[i]),
                    Pixels::Hsv(h) => format!("{:?},{:?},{:?}", h[i].h, h[i].s, h[i].v),
                }
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_patch(text: &str) -> Result<ImagePatch> {
    let bad = |m: &str| Error::Format(format!("patch: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(PATCH_HEADER) {
        return Err(bad("missing or unsupported version header"));
    }
    let head: Vec<&str> = lines.next().ok_or_else(|| bad("truncated"))?.split_whitespace().collect();
    if head.len() != 3 {
        return Err(bad("bad dimension line"));
    }
    let w: usize = head[1].parse().map_err(|_| bad("width"))?;
    let h: usize = head[2].parse().map_err(|_| bad("height"))?;
    let tokens: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad("pixel value"));
    match head[0] {
        "gray" => ImagePatch::gray(w, h, tokens.iter().map(|t| num(t)).collect::<Result<_>>()?),
        "hsv" => {
            let px = tokens
                .iter()
                .map(|t| {
                    let v: Vec<&str> = t.split(',').collect();
                    if v.len() != 3 {
                        return Err(bad("hsv pixel"));
                    }
                    Ok(Hsv { h: num(v[0])?, s: num(v[1])?, v: num(v[2])? })
                })
                .collect::<Result<_>>()?;
            ImagePatch::hsv(w, h, px)
        }
        _ => Err(bad("unknown mode")),
    }
}

pub fn write_patch(path: &Path, p: &ImagePatch) -> Result<()> {
    std::fs::write(path, patch_to_string(p))?;
    Ok(())
}

pub fn read_patch(path: &Path) -> Result<ImagePatch> {
    parse_patch(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primary_colours_convert() {
        assert_eq!(rgb_to_hsv([1.0, 0.0, 0.0]), Hsv { h: 0.0, s: 1.0, v: 1.0 });
        assert_eq!(rgb_to_hsv([1.0, 1.0, 0.0]).h, 60.0);
        assert_eq!(rgb_to_hsv([0.0, 0.0, 1.0]).h, 240.0);
        assert_eq!(rgb_to_hsv([0.5, 0.5, 0.5]).s, 0.0);
    }

    #[test]
    fn hsv_rgb_round_trip() {
        for k in 0..72 {
            let c = Hsv { h: k as f64 * 5.0, s: 0.7, v: 0.6 };
            let back = rgb_to_hsv(hsv_to_rgb(c));
            assert!((back.h - c.h).abs() < 1e-9 && (back.s - c.s).abs() < 1e-12 && (back.v - c.v).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        assert!(ImagePatch::gray(0, 3, vec![]).is_err());
        assert!(ImagePatch::gray(2, 2, vec![0.0; 3]).is_err());
        assert!(ImagePatch::hsv(1, 1, vec![Hsv { h: 360.0, s: 0.0, v: 0.0 }]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = ImagePatch::from_rgb(2, 2, &[[1.0, 0.0, 0.0], [0.1, 0.2, 0.3], [0.0, 0.0, 0.0], [0.9, 0.9, 0.2]]).unwrap();
        assert_eq!(parse_patch(&patch_to_string(&p)).unwrap(), p);
        let g = p.to_gray();
        assert_eq!(parse_patch(&patch_to_string(&g)).unwrap(), g);
        assert!(parse_patch("P3\n").is_err());
    }
}
