use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Point2, PoseTransform};
use crate::planning::{build_trajectory, Trajectory};
use crate::rng::{stream, tag};
use crate::track_map::{MappedCone, TrackMap};
use crate::vision::ConeColor;

/// Barrier walls lining both sides of the track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConfig {
    /// Lateral offset from the centreline.
    pub offset: f64,
    pub segment: f64,
    pub gap: f64,
    pub height: f64,
    pub thickness: f64,
    /// Alternating yaw of successive segments against the track direction.
    pub skew: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self { offset: 5.5, segment: 6.0, gap: 2.5, height: 1.0, thickness: 0.4, skew: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneryConfig {
    pub tyre_stacks: usize,
    pub loose_tyres: usize,
    pub barriers: Option<BarrierConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    /// Closed centreline control points; the first is the start line.
    pub control_points: Vec<Point2>,
    pub width: f64,
    pub spacing: f64,
    pub seed: u64,
    /// Standard deviation of cone placement noise.
    pub cone_jitter: f64,
    pub cone_radius: f64,
    pub cone_height: f64,
    pub scenery: SceneryConfig,
}

impl TrackSpec {
    pub fn new(control_points: Vec<Point2>, seed: u64) -> Self {
        Self {
            control_points,
            width: 4.0,
            spacing: 5.0,
            seed,
            cone_jitter: 0.0,
            cone_radius: 0.12,
            cone_height: 0.3,
            scenery: SceneryConfig::default(),
        }
    }

    pub fn circle(radius: f64, points: usize, seed: u64) -> Self {
        let pts = (0..points)
            .map(|k| {
                let a = k as f64 / points as f64 * std::f64::consts::TAU - std::f64::consts::FRAC_PI_2;
                Point2::new(radius * a.cos(), radius * a.sin() + radius)
            })
            .collect();
        Self::new(pts, seed)
    }

    /// The reference circuit: about 200 m with hairpins near 9 m radius,
    /// barriers, tyre stacks and loose tyres.
    pub fn reference(seed: u64) -> Self {
        let pts = [
            (0.0, 0.0),
            (18.0, 0.0),
            (32.0, 2.0),
            (42.0, 9.0),
            (43.0, 20.0),
            (37.0, 26.0),
            (29.0, 25.0),
            (22.0, 21.0),
            (14.0, 22.0),
            (4.0, 30.0),
            (-8.0, 28.0),
            (-13.0, 17.0),
            (-11.0, 5.0),
        ];
        let mut spec = Self::new(pts.iter().map(|&(x, y)| Point2::new(x, y) * 1.32).collect(), seed);
        spec.scenery = SceneryConfig { tyre_stacks: 6, loose_tyres: 6, barriers: Some(BarrierConfig::default()) };
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.control_points.len() < 3 {
            return Err(Error::InvalidTrack("a closed track needs at least three control points".into()));
        }
        if !(self.width > 1.5) {
            return Err(Error::InvalidTrack("track width must exceed the vehicle width".into()));
        }
        if !(self.spacing > 0.0) || !(self.cone_radius > 0.0) || !(self.cone_height > 0.0) || !(self.cone_jitter >= 0.0) {
            return Err(Error::InvalidTrack("spacing, cone size and jitter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldCone {
    pub position: Point2,
    pub color: ConeColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleKind {
    TyreStack,
    LooseTyre,
}

/// Upright cylinder in the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub kind: ObstacleKind,
    pub position: Point2,
    pub radius: f64,
    pub height: f64,
}

/// Straight barrier block: centre line from `a` to `b`, with thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub a: Point2,
    pub b: Point2,
    pub height: f64,
    pub thickness: f64,
}

impl Barrier {
    /// Corners of the block footprint in order around it.
    pub fn corners(&self) -> [Point2; 4] {
        let d = (self.b - self.a).normalize();
        let n = Point2::new(-d.y, d.x) * (0.5 * self.thickness);
        [self.a + n, self.b + n, self.b - n, self.a - n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldGroundTruth {
    pub cones: Vec<WorldCone>,
    pub centerline: Trajectory,
    pub start_position: Point2,
    pub start_heading: f64,
    pub width: f64,
    pub cone_radius: f64,
    pub cone_height: f64,
    pub obstacles: Vec<Obstacle>,
    pub barriers: Vec<Barrier>,
}

impl WorldGroundTruth {
    /// Sensor pose at the start, mounted at `height`.
    pub fn start_pose(&self, height: f64) -> PoseTransform {
        PoseTransform::from_planar(self.start_position.x, self.start_position.y, self.start_heading, height)
    }

    /// Signed lateral offset of `p` from the centreline (left positive) and
    /// the arc length of its projection.
    pub fn lateral_offset(&self, p: &Point2) -> (f64, f64) {
        let total = self.centerline.length();
        let n = (total / 0.5).ceil() as usize;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..n {
            let s = k as f64 * total / n as f64;
            let d = (self.centerline.sample_at(s).position - p).norm_squared();
            if d < best.0 {
                best = (d, s);
            }
        }
        // refine by golden-section search around the coarse minimum
        let step = total / n as f64;
        let f = |s: f64| (self.centerline.sample_at(s.rem_euclid(total)).position - p).norm_squared();
        let (mut a, mut b) = (best.1 - step, best.1 + step);
        let g = 0.618_033_988_749_895;
        for _ in 0..40 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let s = (0.5 * (a + b)).rem_euclid(total);
        let c = self.centerline.sample_at(s);
        let t = c.heading();
        let normal = Point2::new(-t.sin(), t.cos());
        ((p - c.position).dot(&normal), s)
    }
}

fn segments_cross(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let cross = |o: Point2, a: Point2, b: Point2| (a - o).perp(&(b - o));
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn sample_line(traj: &Trajectory, step: f64) -> Vec<(f64, Point2, f64)> {
    let total = traj.length();
    let n = (total / step).ceil() as usize;
    (0..n)
        .map(|k| {
            let s = k as f64 * total / n as f64;
            let c = traj.sample_at(s);
            (s, c.position, c.heading())
        })
        .collect()
}

fn check_geometry(traj: &Trajectory, width: f64) -> Result<()> {
    let line = sample_line(traj, 0.5);
    let n = line.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(line[i].1, line[(i + 1) % n].1, line[j].1, line[(j + 1) % n].1) {
                return Err(Error::InvalidTrack(format!("centreline crosses itself near s = {:.1} m", line[i].0)));
            }
        }
    }
    let total = traj.length();
    let min_radius = 0.5 * width + 1.0;
    let mut k = 0.0;
    while k < total {
        let c = traj.sample_at(k);
        if c.curvature().abs() > 1.0 / min_radius {
            return Err(Error::InvalidTrack(format!("turn radius below {min_radius:.1} m near s = {k:.1} m")));
        }
        k += 0.25;
    }
    // separate parts of the loop must not overlap
    for i in 0..n {
        for j in i + 1..n {
            let ds = (line[j].0 - line[i].0).min(total - (line[j].0 - line[i].0));
            if ds > 2.0 * width && (line[i].1 - line[j].1).norm() < width + 2.0 {
                return Err(Error::InvalidTrack(format!(
                    "track sections at s = {:.1} m and {:.1} m overlap",
                    line[i].0, line[j].0
                )));
            }
        }
    }
    Ok(())
}

/// Build the ground-truth world for a closed track.
pub fn generate_track(spec: &TrackSpec) -> Result<WorldGroundTruth> {
    spec.validate()?;
    let centerline = build_trajectory(&spec.control_points, true).map_err(|e| Error::InvalidTrack(e.to_string()))?;
    check_geometry(&centerline, spec.width)?;
    let mut rng = stream(spec.seed, tag::TRACK, 0);
    let jitter = Normal::new(0.0, spec.cone_jitter.max(1e-300)).expect("finite sigma");
    let total = centerline.length();
    let pairs = ((total / spec.spacing).round() as usize).max(3);
    let half = 0.5 * spec.width;
    let mut cones = Vec::with_capacity(2 * pairs);
    for k in 0..pairs {
        let c = centerline.sample_at(k as f64 * total / pairs as f64);
        let t = c.heading();
        let normal = Point2::new(-t.sin(), t.cos());
        for (side, color) in [(1.0, ConeColor::Red), (-1.0, ConeColor::Blue)] {
            let mut p = c.position + normal * (side * half);
            if spec.cone_jitter > 0.0 {
                p += Point2::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
            }
            cones.push(WorldCone { position: p, color: if k == 0 { ConeColor::Yellow } else { color } });
        }
    }
    let start = centerline.sample_at(0.0);
    let mut world = WorldGroundTruth {
        cones,
        start_position: start.position,
        start_heading: start.heading(),
        width: spec.width,
        cone_radius: spec.cone_radius,
        cone_height: spec.cone_height,
        obstacles: Vec::new(),
        barriers: Vec::new(),
        centerline,
    };
    if let Some(b) = spec.scenery.barriers {
        place_barriers(&mut world, &b);
    }
    place_obstacles(&mut world, &spec.scenery, &mut rng);
    Ok(world)
}

fn place_barriers(world: &mut WorldGroundTruth, cfg: &BarrierConfig) {
    let total = world.centerline.length();
    let period = cfg.segment + cfg.gap;
    let count = (total / period).floor() as usize;
    let line = sample_line(&world.centerline, 1.0);
    for side in [1.0, -1.0] {
        for k in 0..count {
            let s0 = k as f64 * total / count as f64;
            let ends = [s0, s0 + cfg.segment].map(|s| {
                let c = world.centerline.sample_at(s.rem_euclid(total));
                let t = c.heading();
                c.position + Point2::new(-t.sin(), t.cos()) * (side * cfg.offset)
            });
            let mid = (ends[0] + ends[1]) * 0.5;
            let angle = if k % 2 == 0 { cfg.skew } else { -cfg.skew };
            let rot = nalgebra::Rotation2::new(angle);
            let ends = ends.map(|e| mid + rot * (e - mid));
            // skip walls that would cut into another part of the track
            let clear = (0..=10).all(|i| {
                let p = ends[0] + (ends[1] - ends[0]) * (i as f64 / 10.0);
                line.iter().all(|(_, q, _)| (p - q).norm() >= 0.5 * world.width + 1.5)
            });
            if clear {
                world.barriers.push(Barrier { a: ends[0], b: ends[1], height: cfg.height, thickness: cfg.thickness });
            }
        }
    }
}

fn place_obstacles(world: &mut WorldGroundTruth, cfg: &SceneryConfig, rng: &mut impl Rng) {
    let total = world.centerline.length();
    let line = sample_line(&world.centerline, 1.0);
    let kinds = std::iter::repeat_n(ObstacleKind::TyreStack, cfg.tyre_stacks)
        .chain(std::iter::repeat_n(ObstacleKind::LooseTyre, cfg.loose_tyres));
    for kind in kinds {
        let (radius, height) = match kind {
            ObstacleKind::TyreStack => (0.35, 0.9),
            ObstacleKind::LooseTyre => (0.22, 0.2),
        };
        for _ in 0..200 {
            let s = rng.random_range(0.0..total);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let offset = rng.random_range(0.5 * world.width + 2.0..0.5 * world.width + 3.0);
            let c = world.centerline.sample_at(s);
            let t = c.heading();
            let p = c.position + Point2::new(-t.sin(), t.cos()) * (side * offset);
            let clear_track = line.iter().all(|(_, q, _)| (p - q).norm() >= 0.5 * world.width + 2.0);
            let clear_objects = world.obstacles.iter().all(|o| (o.position - p).norm() > 3.0)
                && world.barriers.iter().all(|b| segment_distance(&p, &b.a, &b.b) > radius + 0.5);
            if clear_track && clear_objects {
                world.obstacles.push(Obstacle { kind, position: p, radius, height });
                break;
            }
        }
    }
}

pub(crate) fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

/// Ground-truth track map: every cone observed once, the centreline as the
/// trail, closed.
pub fn truth_track_map(world: &WorldGroundTruth, sensor_height: f64) -> TrackMap {
    let mut map = TrackMap::new(world.start_pose(sensor_height));
    map.cones = world.cones.iter().map(|c| MappedCone::new(c.position, c.color)).collect();
    let line = sample_line(&world.centerline, 1.0);
    map.trail = line.iter().map(|(_, p, _)| *p).collect();
    map.trail.push(world.start_position);
    map.closed = true;
    map.lap_count = 1;
    map
}
