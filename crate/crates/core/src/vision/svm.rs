//! Linear SVM trained by seeded subgradient descent.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use super::hog::{HogConfig, HogDescriptor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Descriptor geometry the model was trained on.
    pub hog: HogConfig,
    pub patch_size: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub accuracy: f64,
    /// Regularised hinge loss after each accepted epoch.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmTrainConfig {
    pub epochs: usize,
    pub rate: f64,
    pub regularization: f64,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        Self { epochs: 60, rate: 0.1, regularization: 1e-4, seed: 1 }
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn objective(w: &[f64], b: f64, data: &[(&[f64], f64)], lambda: f64) -> f64 {
    let hinge: f64 = data.iter().map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0)).sum();
    0.5 * lambda * dot(w, w) + hinge / data.len() as f64
}

/// Minimise `lambda/2 |w|^2 + mean(max(0, 1 - y (w.x + b)))` with shuffled
/// single-sample subgradient steps. An epoch that raises the full objective
/// is discarded and retried at half the rate, so the recorded losses never
/// increase.
pub fn svm_train(
    positives: &[HogDescriptor],
    negatives: &[HogDescriptor],
    epochs: usize,
    rate: f64,
    regularization: f64,
    seed: u64,
) -> Result<(LinearSvmModel, TrainingReport)> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InvalidDataset("both classes need at least one sample".into()));
    }
    let dim = positives[0].len();
    if dim == 0 || positives.iter().chain(negatives).any(|d| d.len() != dim) {
        return Err(Error::InvalidDataset("descriptor lengths differ".into()));
    }
    if !(rate > 0.0) || !(regularization >= 0.0) {
        return Err(Error::InvalidInput("rate must be positive and regularization nonnegative".into()));
    }
    let data: Vec<(&[f64], f64)> = positives
        .iter()
        .map(|d| (d.0.as_slice(), 1.0))
        .chain(negatives.iter().map(|d| (d.0.as_slice(), -1.0)))
        .collect();
    let mut rng = crate::rng::stream(seed, crate::rng::tag::DATASET, 0);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut loss = objective(&w, b, &data, regularization);
    let mut losses = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = rate;
    let mut epoch = 0;
    let mut retries = 0;
    while epoch < epochs {
        order.shuffle(&mut rng);
        let mut cw = w.clone();
        let mut cb = b;
        let eta = step / (1.0 + 0.05 * epoch as f64);
        for &i in &order {
            let (x, y) = data[i];
            let active = y * (dot(&cw, x) + cb) < 1.0;
            for (wk, xk) in cw.iter_mut().zip(x) {
                *wk -= eta * (regularization * *wk - if active { y * xk } else { 0.0 });
            }
            if active {
                cb += eta * y;
            }
        }
        let cl = objective(&cw, cb, &data, regularization);
        if cl <= loss {
            w = cw;
            b = cb;
            loss = cl;
            losses.push(loss);
            epoch += 1;
            retries = 0;
        } else {
            step *= 0.5;
            retries += 1;
            if retries > 20 {
                break;
            }
        }
    }
    let correct = data.iter().filter(|(x, y)| (dot(&w, x) + b > 0.0) == (*y > 0.0)).count();
    let hog = HogConfig::default();
    // square patch whose default descriptor has this length, if any
    let side = (1..=64).map(|k| k * hog.cell).find(|&s| hog.descriptor_len(s, s) == dim).unwrap_or(0);
    let model = LinearSvmModel { weights: w, bias: b, hog, patch_size: (side, side) };
    Ok((model, TrainingReport { accuracy: correct as f64 / data.len() as f64, losses }))
}

/// Class decision and raw margin `w.x + b`; a zero margin is negative.
pub fn svm_predict(model: &LinearSvmModel, descriptor: &HogDescriptor) -> Result<(bool, f64)> {
    if descriptor.len() != model.weights.len() {
        return Err(Error::InvalidInput(format!(
            "descriptor length {} does not match model length {}",
            descriptor.len(),
            model.weights.len()
        )));
    }
    let margin = dot(&model.weights, &descriptor.0) + model.bias;
    Ok((margin > 0.0, margin))
}

pub const MODEL_HEADER: &str = "# conetrack-svm v1";

/// Text format: version line, `hog <cell> <bins> <block> <width> <height>`,
/// `length <n>`, `bias <b>`, then one weight per line.
pub fn model_to_string(m: &LinearSvmModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_HEADER}");
    let _ = writeln!(out, "hog {} {} {} {} {}", m.hog.cell, m.hog.bins, m.hog.block, m.patch_size.0, m.patch_size.1);
    let _ = writeln!(out, "length {}", m.weights.len());
    let _ = writeln!(out, "bias {:?}", m.bias);
    for w in &m.weights {
        let _ = writeln!(out, "{w:?}");
    }
    out
}

pub fn parse_model(text: &str) -> Result<LinearSvmModel> {
    let bad = |m: &str| Error::Format(format!("svm model: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MODEL_HEADER) {
        return Err(bad("missing or unsupported version header"));
    }
    let mut keyed = |key: &str| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| bad("truncated"))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(&format!("expected `{key}`")));
        }
        Ok(it.map(String::from).collect())
    };
    let g: Vec<usize> = keyed("hog")?.iter().map(|s| s.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad("hog"))?;
    if g.len() != 5 {
        return Err(bad("hog line needs five fields"));
    }
    let n: usize = keyed("length")?.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad("length"))?;
    let bias: f64 = keyed("bias")?.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bias"))?;
    let weights: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("weight"))?;
    if weights.len() != n || !weights.iter().all(|w| w.is_finite()) {
        return Err(bad("weight count or value"));
    }
    Ok(LinearSvmModel { weights, bias, hog: HogConfig { cell: g[0], bins: g[1], block: g[2] }, patch_size: (g[3], g[4]) })
}

pub fn write_model(path: &Path, m: &LinearSvmModel) -> Result<()> {
    std::fs::write(path, model_to_string(m))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<LinearSvmModel> {
    parse_model(&std::fs::read_to_string(path)?)
}
