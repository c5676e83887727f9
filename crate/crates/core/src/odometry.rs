//! Scan-matching LIDAR odometry, multi-frame accumulation and pose fusion.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{compose, transfer_point, Point3, PoseTransform, Quaternion};
use crate::spatial::SpatialHash;

/// One sweep of a multi-layer LIDAR in the sensor frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LaserScan {
    /// Returns per layer, ordered by azimuth.
    pub layers: Vec<Vec<Point3>>,
    pub timestamp: f64,
}

impl LaserScan {
    pub fn new(layers: Vec<Vec<Point3>>, timestamp: f64) -> Self {
        Self { layers, timestamp }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn point_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.point_count() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = &Point3> {
        self.layers.iter().flatten()
    }

    pub fn to_points(&self) -> Vec<Point3> {
        self.points().copied().collect()
    }

    /// Apply a rigid transform to every return.
    pub fn transformed(&self, t: &PoseTransform) -> LaserScan {
        LaserScan {
            layers: self.layers.iter().map(|l| l.iter().map(|p| t.apply(p)).collect()).collect(),
            timestamp: self.timestamp,
        }
    }
}

pub const SCAN_HEADER: &str = "# conetrack-scan v1";

/// Serialise a scan as text: a version line, `timestamp`, `layers`, then
/// for each layer a `layer <i> <count>` line followed by `x y z` rows.
pub fn scan_to_string(scan: &LaserScan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SCAN_HEADER}");
    let _ = writeln!(out, "timestamp {:?}", scan.timestamp);
    let _ = writeln!(out, "layers {}", scan.layers.len());
    for (i, layer) in scan.layers.iter().enumerate() {
        let _ = writeln!(out, "layer {i} {}", layer.len());
        for p in layer {
            let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
        }
    }
    out
}

pub fn parse_scan(text: &str) -> Result<LaserScan> {
    let bad = |m: &str| Error::Format(format!("scan: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(SCAN_HEADER) {
        return Err(bad("missing or unsupported version header"));
    }
    let field = |lines: &mut dyn Iterator<Item = &str>, name: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad("truncated"))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(name) {
            return Err(bad(&format!("expected `{name}`")));
        }
        Ok(it.collect::<Vec<_>>().join(" "))
    };
    let timestamp: f64 = field(&mut lines, "timestamp")?.parse().map_err(|_| bad("timestamp"))?;
    let n: usize = field(&mut lines, "layers")?.parse().map_err(|_| bad("layer count"))?;
    let mut layers = Vec::with_capacity(n);
    for i in 0..n {
        let head = field(&mut lines, "layer")?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        if parts.len() != 2 || parts[0].parse::<usize>().ok() != Some(i) {
            return Err(bad("layer header"));
        }
        let count: usize = parts[1].parse().map_err(|_| bad("point count"))?;
        let mut pts = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| bad("truncated layer"))?;
            let v: Vec<f64> = line.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("point"))?;
            if v.len() != 3 {
                return Err(bad("point needs three coordinates"));
            }
            pts.push(Point3::new(v[0], v[1], v[2]));
        }
        layers.push(pts);
    }
    Ok(LaserScan { layers, timestamp })
}

pub fn write_scan(path: &Path, scan: &LaserScan) -> Result<()> {
    std::fs::write(path, scan_to_string(scan))?;
    Ok(())
}

pub fn read_scan(path: &Path) -> Result<LaserScan> {
    parse_scan(&std::fs::read_to_string(path)?)
}

/// Local smoothness of return `i` on `layer` over `half_window` neighbours
/// each side: the norm of the summed differences to the neighbours divided
/// by the neighbour count and the range of the centre point.
pub fn smoothness(scan: &LaserScan, layer: usize, i: usize, half_window: usize) -> Result<f64> {
    let pts = scan
        .layers
        .get(layer)
        .ok_or_else(|| Error::InvalidIndex(format!("layer {layer} of {}", scan.layers.len())))?;
    if half_window == 0 || i < half_window || i + half_window >= pts.len() {
        return Err(Error::InvalidIndex(format!("window {half_window} around {i} exceeds layer of {}", pts.len())));
    }
    let x = pts[i];
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::InvalidInput("smoothness of a zero-range point".into()));
    }
    let mut sum = Vector3::zeros();
    for j in (i - half_window)..=(i + half_window) {
        if j != i {
            sum += x - pts[j];
        }
    }
    Ok(sum.norm() / ((2 * half_window) as f64 * norm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub point: Point3,
    pub layer: usize,
    pub index: usize,
    pub smoothness: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub edges: Vec<Feature>,
    pub planars: Vec<Feature>,
}

impl FeatureSet {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.planars.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub half_window: usize,
    pub edge_thresh: f64,
    pub plane_thresh: f64,
    pub sectors: usize,
    pub max_edges_per_sector: usize,
    pub max_planars_per_sector: usize,
    /// Consecutive returns further apart than `max(gap, gap_ratio * range)`
    /// break the window (occlusion boundaries and dropouts).
    pub gap: f64,
    pub gap_ratio: f64,
    pub min_range: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            half_window: 5,
            edge_thresh: 0.02,
            plane_thresh: 0.004,
            sectors: 6,
            max_edges_per_sector: 2,
            max_planars_per_sector: 4,
            gap: 0.4,
            gap_ratio: 0.03,
            min_range: 1.0,
        }
    }
}

/// Edge and planar features with default window, sector count and gap
/// handling.
pub fn extract_features(scan: &LaserScan, edge_thresh: f64, plane_thresh: f64, max_per_sector: usize) -> Result<FeatureSet> {
    let cfg = FeatureConfig {
        edge_thresh,
        plane_thresh,
        max_edges_per_sector: max_per_sector,
        max_planars_per_sector: max_per_sector,
        ..Default::default()
    };
    extract_features_with(scan, &cfg)
}

pub fn extract_features_with(scan: &LaserScan, cfg: &FeatureConfig) -> Result<FeatureSet> {
    if !(cfg.plane_thresh < cfg.edge_thresh) {
        return Err(Error::InvalidInput("plane threshold must be below edge threshold".into()));
    }
    if cfg.sectors == 0 {
        return Err(Error::InvalidInput("sector count must be positive".into()));
    }
    let hw = cfg.half_window;
    let mut out = FeatureSet::default();
    for (li, pts) in scan.layers.iter().enumerate() {
        let n = pts.len();
        if n < 2 * hw + 1 {
            continue;
        }
        // Breaks between consecutive returns: a depth jump hides the far
        // side (occluded, unusable) while the near side stays a valid edge;
        // a sideways gap of similar range (dropout) breaks windows on both.
        let mut lateral_break = vec![false; n];
        let mut occluded = vec![false; n];
        for j in 0..n - 1 {
            let (ra, rb) = (pts[j].norm(), pts[j + 1].norm());
            if (pts[j + 1] - pts[j]).norm() <= cfg.gap.max(cfg.gap_ratio * ra.min(rb)) {
                continue;
            }
            if (ra - rb).abs() > cfg.gap.max(cfg.gap_ratio * ra.min(rb)) {
                let far: Vec<usize> = if ra > rb { (j.saturating_sub(hw)..=j).collect() } else { (j + 1..=(j + 1 + hw).min(n - 1)).collect() };
                for k in far {
                    occluded[k] = true;
                }
            } else {
                lateral_break[j] = true;
            }
        }
        let mut cands: Vec<Vec<(f64, usize)>> = vec![Vec::new(); cfg.sectors];
        for i in hw..n - hw {
            if pts[i].norm() < cfg.min_range || occluded[i] || lateral_break[i - hw..i + hw].iter().any(|&b| b) {
                continue;
            }
            let c = smoothness(scan, li, i, hw)?;
            let az = pts[i].z.atan2(pts[i].x);
            let sector = (((az + std::f64::consts::PI) / std::f64::consts::TAU * cfg.sectors as f64) as usize)
                .min(cfg.sectors - 1);
            cands[sector].push((c, i));
        }
        for sector in cands.iter_mut() {
            let mut taken = vec![false; n];
            // sharpest first for edges
            sector.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut count = 0;
            for &(c, i) in sector.iter() {
                if count >= cfg.max_edges_per_sector || c <= cfg.edge_thresh {
                    break;
                }
                if taken[i] {
                    continue;
                }
                out.edges.push(Feature { point: pts[i], layer: li, index: i, smoothness: c });
                count += 1;
                for t in taken.iter_mut().take((i + hw + 1).min(n)).skip(i.saturating_sub(hw)) {
                    *t = true;
                }
            }
            let mut count = 0;
            for &(c, i) in sector.iter().rev() {
                if count >= cfg.max_planars_per_sector || c >= cfg.plane_thresh {
                    break;
                }
                if taken[i] {
                    continue;
                }
                out.planars.push(Feature { point: pts[i], layer: li, index: i, smoothness: c });
                count += 1;
                for t in taken.iter_mut().take((i + hw / 2 + 1).min(n)).skip(i.saturating_sub(hw / 2)) {
                    *t = true;
                }
            }
        }
    }
    out.edges.sort_by_key(|f| (f.layer, f.index));
    out.planars.sort_by_key(|f| (f.layer, f.index));
    Ok(out)
}

/// Pose of the current scan frame in some reference frame, with the RMS
/// matching residual as a quality proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryEstimate {
    pub pose: PoseTransform,
    pub residual: f64,
    pub correspondences: usize,
    /// False when the iteration cap was hit before convergence.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub features: FeatureConfig,
    pub max_lm_iter: usize,
    pub lambda0: f64,
    /// Association rounds with their correspondence gates.
    pub gates: [f64; 4],
    pub neighbour_radius: f64,
    /// Smallest accepted eigenvalue ratio of the Gauss-Newton matrix.
    pub degeneracy_ratio: f64,
    /// Smallest accepted eigenvalue of its translation block; each unit
    /// normal contributes at most one unit along its direction.
    pub min_information: f64,
    /// Cauchy scale of the final reweighting rounds, metres; zero disables.
    pub robust_scale: f64,
    pub robust_rounds: usize,
    /// Final solve on planar correspondences when they are well conditioned.
    pub plane_refinement: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            max_lm_iter: 20,
            lambda0: 1e-3,
            gates: [1.0, 0.5, 0.3, 0.2],
            neighbour_radius: 3.0,
            degeneracy_ratio: 1e-6,
            min_information: 2.0,
            robust_scale: 0.02,
            robust_rounds: 3,
            plane_refinement: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Correspondence {
    Line { p: Point3, a: Point3, n1: Point3, n2: Point3, w: f64 },
    Plane { p: Point3, q: Point3, n: Point3, w: f64 },
}

impl Correspondence {
    fn set_weight(&mut self, weight: f64) {
        match self {
            Correspondence::Line { w, .. } | Correspondence::Plane { w, .. } => *w = weight,
        }
    }

    fn rows(&self) -> usize {
        match self {
            Correspondence::Line { .. } => 2,
            Correspondence::Plane { .. } => 1,
        }
    }
}

fn params_to_pose(x: &Vector6<f64>) -> PoseTransform {
    PoseTransform::from_rotation_vector(Vector3::new(x[0], x[1], x[2]), Vector3::new(x[3], x[4], x[5]))
}

fn pose_to_params(t: &PoseTransform) -> Vector6<f64> {
    let w = t.rotation().to_rotation_vector();
    Vector6::new(w.x, w.y, w.z, t.translation.x, t.translation.y, t.translation.z)
}

fn residuals(corrs: &[Correspondence], x: &Vector6<f64>, out: &mut Vec<f64>) {
    let pose = params_to_pose(x);
    let r = pose.rotation_matrix();
    out.clear();
    for c in corrs {
        match c {
            Correspondence::Line { p, a, n1, n2, w } => {
                let q = r.apply(p) + pose.translation - a;
                out.push(w * n1.dot(&q));
                out.push(w * n2.dot(&q));
            }
            Correspondence::Plane { p, q, n, w } => {
                out.push(w * n.dot(&(r.apply(p) + pose.translation - q)));
            }
        }
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|r| r * r).sum()
}

struct Reference<'a> {
    set: &'a FeatureSet,
    edge_pts: Vec<Point3>,
    plane_pts: Vec<Point3>,
    edge_hash: SpatialHash,
    plane_hash: SpatialHash,
}

impl<'a> Reference<'a> {
    fn new(set: &'a FeatureSet) -> Self {
        let edge_pts: Vec<Point3> = set.edges.iter().map(|f| f.point).collect();
        let plane_pts: Vec<Point3> = set.planars.iter().map(|f| f.point).collect();
        let edge_hash = SpatialHash::new(&edge_pts, REFERENCE_CELL);
        let plane_hash = SpatialHash::new(&plane_pts, REFERENCE_CELL);
        Self { set, edge_pts, plane_pts, edge_hash, plane_hash }
    }

    fn associate(&self, curr: &FeatureSet, pose: &PoseTransform, gate: f64, radius: f64) -> Vec<Correspondence> {
        let mut out = Vec::new();
        for f in &curr.edges {
            let p = pose.apply(&f.point);
            let near = self.edge_hash.nearest(&self.edge_pts, &p, 12, radius);
            let Some(&(j, _)) = near.first() else { continue };
            let lj = self.set.edges[j].layer;
            let Some(&(l, _)) = near.iter().find(|(k, _)| self.set.edges[*k].layer != lj) else { continue };
            let a = self.edge_pts[j];
            let dir = self.edge_pts[l] - a;
            let len = dir.norm();
            if len < 1e-6 {
                continue;
            }
            let dir = dir / len;
            let helper = if dir.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let n1 = dir.cross(&helper).normalize();
            let n2 = dir.cross(&n1);
            let q = p - a;
            if (n1.dot(&q).powi(2) + n2.dot(&q).powi(2)).sqrt() > gate {
                continue;
            }
            out.push(Correspondence::Line { p: f.point, a, n1, n2, w: 1.0 });
        }
        for f in &curr.planars {
            let p = pose.apply(&f.point);
            let near = self.plane_hash.nearest(&self.plane_pts, &p, 24, radius);
            let Some(&(j, _)) = near.first() else { continue };
            let lj = self.set.planars[j].layer;
            // a patch along the nearest return's layer plus a few returns
            // from other layers, so the fit spans two directions
            let same: Vec<usize> =
                near.iter().filter(|(k, _)| self.set.planars[*k].layer == lj).take(PLANE_SAME_LAYER).map(|x| x.0).collect();
            let other: Vec<usize> =
                near.iter().filter(|(k, _)| self.set.planars[*k].layer != lj).take(PLANE_OTHER_LAYERS).map(|x| x.0).collect();
            if same.len() < 2 || other.is_empty() {
                continue;
            }
            let patch: Vec<Point3> = same.iter().chain(&other).map(|&k| self.plane_pts[k]).collect();
            let Some((q, n)) = fit_plane(&patch) else { continue };
            if n.dot(&(p - q)).abs() > gate {
                continue;
            }
            out.push(Correspondence::Plane { p: f.point, q, n, w: 1.0 });
        }
        out
    }
}

const REFERENCE_CELL: f64 = 3.0;
const PLANE_SAME_LAYER: usize = 5;
const PLANE_OTHER_LAYERS: usize = 3;

/// Least-squares plane through `pts`: centroid and unit normal, or `None`
/// when the points are not planar or do not span two directions.
fn fit_plane(pts: &[Point3]) -> Option<(Point3, Point3)> {
    let c = pts.iter().sum::<Point3>() / pts.len() as f64;
    let mut cov = nalgebra::Matrix3::zeros();
    for p in pts {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= pts.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid) = (eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]]);
    if mid.sqrt() < PLANE_MIN_SPREAD || lo.sqrt() > PLANE_MAX_RMS {
        return None;
    }
    let n: Point3 = eig.eigenvectors.column(order[0]).into_owned();
    Some((c, n.normalize()))
}

const PLANE_MIN_SPREAD: f64 = 0.05;
const PLANE_MAX_RMS: f64 = 0.02;

/// Right Jacobian of the rotation-vector parametrisation.
fn right_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let th2 = w.norm_squared();
    let k = w.cross_matrix();
    if th2 < 1e-12 {
        return Matrix3::identity() - 0.5 * k + k * k / 6.0;
    }
    let th = th2.sqrt();
    Matrix3::identity() - (1.0 - th.cos()) / th2 * k + (th - th.sin()) / (th2 * th) * k * k
}

fn jacobian(corrs: &[Correspondence], x: &Vector6<f64>, _rows: usize) -> (Matrix6<f64>, Vector6<f64>, f64) {
    let pose = params_to_pose(x);
    let r = pose.rotation_matrix();
    let rm: Matrix3<f64> = *r.matrix();
    let jr = right_jacobian(&Vector3::new(x[0], x[1], x[2]));
    let mut jtj = Matrix6::zeros();
    let mut jtd = Vector6::zeros();
    let mut cost = 0.0;
    let mut row = |w: f64, n: &Point3, p: &Point3, d: f64| {
        // d/dw (n . R p) = -(R^T n x p)^T Jr
        let m = rm.transpose() * n;
        let gw = -(jr.transpose() * m.cross(p)) * w;
        let g = Vector6::new(gw.x, gw.y, gw.z, w * n.x, w * n.y, w * n.z);
        jtj += g * g.transpose();
        jtd += g * d;
        cost += d * d;
    };
    for c in corrs {
        match c {
            Correspondence::Line { p, a, n1, n2, w } => {
                let q = r.apply(p) + pose.translation - a;
                row(*w, n1, p, w * n1.dot(&q));
                row(*w, n2, p, w * n2.dot(&q));
            }
            Correspondence::Plane { p, q, n, w } => {
                row(*w, n, p, w * n.dot(&(r.apply(p) + pose.translation - q)));
            }
        }
    }
    (jtj, jtd, cost)
}

/// Levenberg-Marquardt on fixed correspondences. Returns the best point and
/// whether the step size collapsed before the iteration cap.
fn levenberg_marquardt(corrs: &[Correspondence], x0: Vector6<f64>, max_iter: usize, lambda0: f64) -> (Vector6<f64>, f64, bool) {
    let rows: usize = corrs.iter().map(Correspondence::rows).sum();
    let mut x = x0;
    let mut lambda = lambda0;
    let (mut jtj, mut jtd, mut cost) = jacobian(corrs, &x, rows);
    let mut buf = Vec::with_capacity(rows);
    let mut converged = false;
    for _ in 0..max_iter {
        let mut a = jtj;
        for i in 0..6 {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let Some(step) = a.cholesky().map(|c| c.solve(&jtd)) else {
            lambda *= 10.0;
            continue;
        };
        let cand = x - step;
        residuals(corrs, &cand, &mut buf);
        let c = sum_sq(&buf);
        if c < cost {
            x = cand;
            lambda /= 10.0;
            let small = step.amax() < 1e-10;
            (jtj, jtd, cost) = jacobian(corrs, &x, rows);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    (x, cost, converged)
}

/// Register `curr` against `prev` with default settings.
pub fn match_and_solve(
    prev: &FeatureSet,
    curr: &LaserScan,
    t_init: &PoseTransform,
    max_lm_iter: usize,
    lambda0: f64,
) -> Result<OdometryEstimate> {
    let cfg = MatchConfig { max_lm_iter, lambda0, ..Default::default() };
    let feats = extract_features_with(curr, &cfg.features)?;
    match_features(prev, &feats, t_init, &cfg)
}

/// Estimate the transform mapping the current scan frame into the frame of
/// `prev`.
pub fn match_features(prev: &FeatureSet, curr: &FeatureSet, t_init: &PoseTransform, cfg: &MatchConfig) -> Result<OdometryEstimate> {
    if prev.is_empty() {
        return Err(Error::DegenerateRegistration("reference feature set is empty".into()));
    }
    let reference = Reference::new(prev);
    let x_init = pose_to_params(t_init);
    let mut x = x_init;
    let mut converged = true;
    for &gate in &cfg.gates {
        let corrs = reference.associate(curr, &params_to_pose(&x), gate, cfg.neighbour_radius);
        if corrs.len() < 6 {
            return Err(Error::DegenerateRegistration(format!("{} correspondences", corrs.len())));
        }
        let (nx, _, conv) = levenberg_marquardt(&corrs, x, cfg.max_lm_iter, cfg.lambda0);
        x = nx;
        converged = conv;
    }
    let gate = *cfg.gates.last().expect("gates");
    let mut corrs = reference.associate(curr, &params_to_pose(&x), gate, cfg.neighbour_radius);
    if corrs.len() < 6 {
        return Err(Error::DegenerateRegistration(format!("{} correspondences", corrs.len())));
    }
    let rows: usize = corrs.iter().map(Correspondence::rows).sum();
    // Cauchy reweighting: correspondences that disagree with the consensus
    // (viewpoint-dependent silhouettes, corner patches) lose influence
    if cfg.robust_scale > 0.0 {
        let mut buf = Vec::with_capacity(rows);
        for _ in 0..cfg.robust_rounds {
            for c in corrs.iter_mut() {
                c.set_weight(1.0);
            }
            residuals(&corrs, &x, &mut buf);
            let mut row = 0;
            for c in corrs.iter_mut() {
                let k = c.rows();
                let r2: f64 = buf[row..row + k].iter().map(|v| v * v).sum();
                row += k;
                c.set_weight((1.0 / (1.0 + r2 / (cfg.robust_scale * cfg.robust_scale))).sqrt());
            }
            let (nx, _, conv) = levenberg_marquardt(&corrs, x, cfg.max_lm_iter, cfg.lambda0);
            x = nx;
            converged = conv;
        }
    }
    // Silhouette and corner edges move with the viewpoint by up to the
    // beam spacing; planes do not. Finish on planes alone when they pin
    // down the translation by themselves.
    if cfg.plane_refinement {
        let planes: Vec<Correspondence> =
            corrs.iter().filter(|c| matches!(c, Correspondence::Plane { .. })).copied().collect();
        let plane_rows = planes.len();
        if plane_rows >= 6 {
            let (jtj, _, _) = jacobian(&planes, &x, plane_rows);
            let info = SymmetricEigen::new(jtj.fixed_view::<3, 3>(3, 3).into_owned()).eigenvalues.min();
            if info >= cfg.min_information {
                let mut planes = planes;
                let scale = 0.25 * cfg.robust_scale;
                let mut buf = Vec::with_capacity(plane_rows);
                for _ in 0..cfg.robust_rounds.max(1) {
                    if scale > 0.0 {
                        for c in planes.iter_mut() {
                            c.set_weight(1.0);
                        }
                        residuals(&planes, &x, &mut buf);
                        for (c, r) in planes.iter_mut().zip(&buf) {
                            c.set_weight((1.0 / (1.0 + r * r / (scale * scale))).sqrt());
                        }
                    }
                    let (nx, _, conv) = levenberg_marquardt(&planes, x, cfg.max_lm_iter, cfg.lambda0);
                    x = nx;
                    converged = conv;
                }
            }
        }
    }
    let (jtj, _, mut cost) = jacobian(&corrs, &x, rows);
    let eig = SymmetricEigen::new(jtj).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo / hi < cfg.degeneracy_ratio {
        return Err(Error::DegenerateRegistration(format!("ill-conditioned geometry (eigenvalue ratio {:.2e})", lo / hi)));
    }
    let translation_info = SymmetricEigen::new(jtj.fixed_view::<3, 3>(3, 3).into_owned()).eigenvalues.min();
    if translation_info < cfg.min_information {
        return Err(Error::DegenerateRegistration(format!("translation unobservable (information {translation_info:.2e})")));
    }
    let mut buf = Vec::new();
    residuals(&corrs, &x_init, &mut buf);
    if sum_sq(&buf) < cost {
        x = x_init;
        cost = sum_sq(&buf);
    }
    Ok(OdometryEstimate {
        pose: params_to_pose(&x),
        residual: (cost / rows as f64).sqrt(),
        correspondences: corrs.len(),
        converged,
    })
}

/// Incremental odometry: chains scan-to-scan registrations into a pose in
/// the frame of the first scan (or a supplied origin).
#[derive(Debug, Clone)]
pub struct LidarOdometry {
    pub config: MatchConfig,
    /// Per-sector caps for the reference side, which is denser than the
    /// query side.
    pub reference_cap: usize,
    prev: Option<FeatureSet>,
    pose: PoseTransform,
    delta: PoseTransform,
}

impl LidarOdometry {
    pub fn new(config: MatchConfig, origin: PoseTransform) -> Self {
        Self { config, reference_cap: 40, prev: None, pose: origin, delta: PoseTransform::IDENTITY }
    }

    pub fn pose(&self) -> PoseTransform {
        self.pose
    }

    /// Overwrite the chained pose, e.g. after fusion with another source.
    pub fn set_pose(&mut self, pose: PoseTransform) {
        self.pose = pose;
    }

    /// Register a scan. The motion prior is the previous inter-scan motion
    /// unless one is supplied.
    pub fn process(&mut self, scan: &LaserScan, prior: Option<PoseTransform>) -> Result<OdometryEstimate> {
        let query = extract_features_with(scan, &self.config.features)?;
        let ref_cfg = FeatureConfig {
            max_edges_per_sector: self.reference_cap,
            max_planars_per_sector: self.reference_cap,
            ..self.config.features
        };
        let reference = extract_features_with(scan, &ref_cfg)?;
        let Some(prev) = self.prev.replace(reference) else {
            return Ok(OdometryEstimate { pose: self.pose, residual: 0.0, correspondences: 0, converged: true });
        };
        let init = prior.unwrap_or(self.delta);
        match match_features(&prev, &query, &init, &self.config) {
            Ok(est) => {
                self.delta = est.pose;
                self.pose = compose(&self.pose, &est.pose);
                Ok(OdometryEstimate { pose: self.pose, ..est })
            }
            Err(e) => {
                // keep dead-reckoning on the prior so the chain stays usable
                self.pose = compose(&self.pose, &init);
                Err(e)
            }
        }
    }
}

/// Map the points of the last `m` frames into the `target` frame.
pub fn accumulate_frames(frames: &[(LaserScan, PoseTransform)], target: &PoseTransform, m: usize) -> Vec<Point3> {
    let start = frames.len().saturating_sub(m);
    frames[start..]
        .iter()
        .flat_map(|(scan, pose)| scan.points().map(move |p| transfer_point(p, pose, target)))
        .collect()
}

/// As [`accumulate_frames`] for plain point sets.
pub fn accumulate_points(frames: &[(Vec<Point3>, PoseTransform)], target: &PoseTransform, m: usize) -> Vec<Point3> {
    let start = frames.len().saturating_sub(m);
    frames[start..]
        .iter()
        .flat_map(|(pts, pose)| pts.iter().map(move |p| transfer_point(p, pose, target)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedPose {
    pub pose: PoseTransform,
    pub lidar_weight: f64,
    pub gps_weight: f64,
}

/// Fixed-gain complementary blend: weight `alpha` on GPS, `1 - alpha` on
/// LIDAR; a missing source passes the other through unchanged.
pub fn fuse_pose(lidar: Option<&OdometryEstimate>, gps: Option<&PoseTransform>, alpha: f64) -> Result<FusedPose> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("blend factor {alpha} outside [0, 1]")));
    }
    match (lidar, gps) {
        (None, None) => Err(Error::LocalizationLost),
        (Some(l), None) => Ok(FusedPose { pose: l.pose, lidar_weight: 1.0, gps_weight: 0.0 }),
        (None, Some(g)) => Ok(FusedPose { pose: *g, lidar_weight: 0.0, gps_weight: 1.0 }),
        (Some(l), Some(g)) => {
            let pose = if alpha == 0.0 {
                l.pose
            } else if alpha == 1.0 {
                *g
            } else {
                let t = l.pose.translation * (1.0 - alpha) + g.translation * alpha;
                let q: Quaternion = l.pose.rotation().slerp(&g.rotation(), alpha);
                PoseTransform::new(t, q)?
            };
            Ok(FusedPose { pose, lidar_weight: 1.0 - alpha, gps_weight: alpha })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_layer(n: usize) -> Vec<Point3> {
        (0..n).map(|i| Point3::new(5.0, 0.0, i as f64 * 0.1 - 1.0)).collect()
    }

    #[test]
    fn collinear_symmetric_neighbours_are_smooth() {
        let scan = LaserScan::new(vec![line_layer(21)], 0.0);
        assert_abs_diff_eq!(smoothness(&scan, 0, 10, 5).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn corner_is_sharp() {
        // square corner at (5, 0, 0): one wall along -z, the other along -x
        let mut pts: Vec<Point3> = (0..6).rev().map(|k| Point3::new(5.0, 0.0, -0.1 * k as f64)).collect();
        pts.extend((1..6).map(|k| Point3::new(5.0 - 0.1 * k as f64, 0.0, 0.0)));
        let scan = LaserScan::new(vec![pts], 0.0);
        let c = smoothness(&scan, 0, 5, 5).unwrap();
        // sum of differences is 1.5 along each wall direction
        let expected = (2.0f64).sqrt() * 1.5 / (10.0 * 5.0);
        assert_abs_diff_eq!(c, expected, epsilon = 1e-12);
        assert!(c > FeatureConfig::default().edge_thresh);
    }

    #[test]
    fn window_bounds_and_zero_range() {
        let scan = LaserScan::new(vec![line_layer(21)], 0.0);
        assert!(matches!(smoothness(&scan, 0, 2, 5), Err(Error::InvalidIndex(_))));
        assert!(matches!(smoothness(&scan, 3, 10, 5), Err(Error::InvalidIndex(_))));
        let mut pts = line_layer(21);
        pts[10] = Point3::zeros();
        let scan = LaserScan::new(vec![pts], 0.0);
        assert!(matches!(smoothness(&scan, 0, 10, 5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn empty_scan_gives_empty_features() {
        let f = extract_features(&LaserScan::default(), 0.02, 0.004, 4).unwrap();
        assert!(f.is_empty());
        assert!(extract_features(&LaserScan::default(), 0.01, 0.02, 4).is_err());
    }

    #[test]
    fn plane_scan_has_no_edges() {
        // a flat wall seen by several layers
        let layers = (0..4)
            .map(|l| (0..200).map(|i| Point3::new(8.0, l as f64 * 0.3 - 0.5, i as f64 * 0.05 - 5.0)).collect())
            .collect();
        let f = extract_features(&LaserScan::new(layers, 0.0), 0.02, 0.004, 4).unwrap();
        assert!(f.edges.is_empty());
        assert!(!f.planars.is_empty());
        for p in &f.planars {
            assert!(p.smoothness < 0.004);
        }
    }

    #[test]
    fn scan_text_round_trip() {
        let scan = LaserScan::new(
            vec![vec![Point3::new(1.0, 2.0, 3.0), Point3::new(0.1, -0.2, 1e-9)], vec![], vec![Point3::new(4.0, 5.0, 6.0)]],
            12.25,
        );
        let parsed = parse_scan(&scan_to_string(&scan)).unwrap();
        assert_eq!(parsed, scan);
        assert!(parse_scan("# conetrack-scan v9\n").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.scan");
        write_scan(&path, &scan).unwrap();
        assert_eq!(read_scan(&path).unwrap(), scan);
    }

    fn pose(tx: f64, ty: f64, tz: f64, yaw: f64) -> PoseTransform {
        PoseTransform::new(Vector3::new(tx, ty, tz), Quaternion::from_yaw(yaw)).unwrap()
    }

    #[test]
    fn accumulate_identity_and_stacking() {
        let scan = LaserScan::new(vec![line_layer(5)], 0.0);
        let p = pose(1.0, 0.0, 2.0, 0.3);
        let one = accumulate_frames(&[(scan.clone(), p)], &p, 1);
        for (a, b) in one.iter().zip(scan.points()) {
            assert!((a - b).norm() < 1e-12);
        }
        let frames = vec![(scan.clone(), p); 4];
        let three = accumulate_frames(&frames, &p, 3);
        assert_eq!(three.len(), 15);
        for k in 0..3 {
            for i in 0..5 {
                assert!((three[k * 5 + i] - three[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn accumulated_static_cone_keeps_centroid() {
        // one cone at world (6, 0.15, 0) seen from two poses 1 m apart
        let cone: Vec<Point3> = (0..20)
            .map(|k| {
                let a = k as f64 / 20.0 * std::f64::consts::TAU;
                Point3::new(6.0 + 0.1 * a.cos(), 0.05 + 0.01 * k as f64, 0.1 * a.sin())
            })
            .collect();
        let p0 = PoseTransform::IDENTITY;
        let p1 = pose(1.0, 0.0, 0.0, 0.0);
        let in1: Vec<Point3> = cone.iter().map(|p| p1.inverse().apply(p)).collect();
        let acc = accumulate_points(&[(cone.clone(), p0), (in1, p1)], &p0, 5);
        assert_eq!(acc.len(), 40);
        let c: Point3 = acc.iter().sum::<Point3>() / 40.0;
        let c0: Point3 = cone.iter().sum::<Point3>() / 20.0;
        assert!((c - c0).norm() < 1e-9);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let corrs = vec![
            Correspondence::Line {
                p: Point3::new(3.0, 0.4, -1.0),
                a: Point3::new(2.9, 0.0, -1.1),
                n1: Point3::new(0.0, 0.0, 1.0),
                n2: Point3::new(1.0, 0.0, 0.0),
                w: 0.7,
            },
            Correspondence::Plane {
                p: Point3::new(5.0, -0.5, 2.0),
                q: Point3::new(5.2, -0.5, 2.1),
                n: Point3::new(0.0, 1.0, 0.0),
                w: 1.0,
            },
            Correspondence::Plane {
                p: Point3::new(-1.0, 1.5, 4.0),
                q: Point3::new(-1.1, 1.4, 4.0),
                n: Point3::new(0.6, 0.0, 0.8),
                w: 0.4,
            },
        ];
        let x = Vector6::new(0.05, -0.3, 0.2, 0.4, -0.1, 0.3);
        let (jtj, jtd, cost) = jacobian(&corrs, &x, 4);
        let h = 1e-6;
        let mut base = Vec::new();
        residuals(&corrs, &x, &mut base);
        let mut cols = Vec::new();
        for k in 0..6 {
            let mut e = Vector6::zeros();
            e[k] = h;
            let (mut a, mut b) = (Vec::new(), Vec::new());
            residuals(&corrs, &(x + e), &mut a);
            residuals(&corrs, &(x - e), &mut b);
            cols.push(a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
        }
        for i in 0..6 {
            let d: f64 = cols[i].iter().zip(&base).map(|(a, b)| a * b).sum();
            assert!((d - jtd[i]).abs() < 1e-7, "{i}: {d} vs {}", jtd[i]);
            for j in 0..6 {
                let v: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                assert!((v - jtj[(i, j)]).abs() < 1e-7);
            }
        }
        assert!((cost - sum_sq(&base)).abs() < 1e-12);
    }

    #[test]
    fn fusion_blends_and_falls_back() {
        let est = |p: PoseTransform| OdometryEstimate { pose: p, residual: 0.0, correspondences: 10, converged: true };
        let a = pose(0.0, 0.0, 0.0, 0.0);
        let b = pose(1.0, 0.0, 0.0, 0.4);
        let f = fuse_pose(Some(&est(a)), Some(&b), 0.25).unwrap();
        assert_abs_diff_eq!(f.pose.translation.x, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(f.pose.rotation().yaw(), 0.1, epsilon = 1e-9);
        assert_eq!(f.lidar_weight + f.gps_weight, 1.0);
        assert_eq!(fuse_pose(Some(&est(a)), Some(&b), 0.0).unwrap().pose, a);
        assert_eq!(fuse_pose(Some(&est(a)), Some(&b), 1.0).unwrap().pose, b);
        let same = fuse_pose(Some(&est(b)), Some(&b), 0.6).unwrap().pose;
        assert!((same.translation - b.translation).norm() < 1e-12);
        assert_abs_diff_eq!(same.rotation().yaw(), 0.4, epsilon = 1e-12);
        let g = fuse_pose(None, Some(&b), 0.3).unwrap();
        assert_eq!((g.pose, g.gps_weight), (b, 1.0));
        let l = fuse_pose(Some(&est(a)), None, 0.3).unwrap();
        assert_eq!((l.pose, l.lidar_weight), (a, 1.0));
        assert!(matches!(fuse_pose(None, None, 0.5), Err(Error::LocalizationLost)));
        assert!(fuse_pose(None, Some(&b), 1.5).is_err());
    }
}

