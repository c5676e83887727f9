//! Parametric cubic trajectory through midline points.
//!
//! A [`SplineSegment`] is the cubic `P(u) = [u^3 u^2 u 1] * A` through four
//! points at knots `0 < u1 < u2 < 1`. A [`Trajectory`] chains overlapping
//! four-point windows with chord-length knots. Each span between consecutive
//! input points blends the window centred on it with the window starting at
//! it, `S(t) = (1 - t) * A(t) + t * B(t)`; both interpolate the span ends, and
//! neighbouring spans share the window that defines the tangent at their
//! common point, so joins are G1.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2};

#[derive(Debug, Clone, PartialEq)]
pub struct SplineSegment {
    /// Rows are the `u^3, u^2, u, 1` coefficients for `(x, y)`.
    pub coeffs: [[f64; 2]; 4],
    pub knots: [f64; 4],
}

/// Position with first and second derivatives along the parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub position: Point2,
    pub d1: Point2,
    pub d2: Point2,
}

impl CurveSample {
    pub fn heading(&self) -> f64 {
        self.d1.y.atan2(self.d1.x)
    }

    pub fn curvature(&self) -> f64 {
        let (d1, d2) = (self.d1, self.d2);
        (d1.x * d2.y - d1.y * d2.x) / d1.norm_squared().powf(1.5)
    }
}

fn basis_row(u: f64) -> [f64; 4] {
    [u * u * u, u * u, u, 1.0]
}

/// Solve for the cubic through `points` at knots `[0, u1, u2, 1]`.
pub fn fit_segment(points: [Point2; 4], u1: f64, u2: f64) -> Result<SplineSegment> {
    if !(0.0 < u1 && u1 < u2 && u2 < 1.0) {
        return Err(Error::DegenerateFit(format!("knots must satisfy 0 < {u1} < {u2} < 1")));
    }
    for i in 0..4 {
        for j in i + 1..4 {
            if (points[i] - points[j]).norm() < 1e-12 {
                return Err(Error::DegenerateFit(format!("points {i} and {j} coincide")));
            }
        }
    }
    let knots = [0.0, u1, u2, 1.0];
    let rows: Vec<f64> = knots.iter().flat_map(|&u| basis_row(u)).collect();
    let m = Matrix4::from_row_slice(&rows);
    let lu = m.lu();
    let solve = |b: Vector4<f64>| lu.solve(&b).ok_or_else(|| Error::DegenerateFit("singular knot matrix".into()));
    let cx = solve(Vector4::from_fn(|i, _| points[i].x))?;
    let cy = solve(Vector4::from_fn(|i, _| points[i].y))?;
    Ok(SplineSegment { coeffs: std::array::from_fn(|r| [cx[r], cy[r]]), knots })
}

impl SplineSegment {
    fn eval_unchecked(&self, u: f64) -> CurveSample {
        let c = &self.coeffs;
        let f = |k: usize| c[0][k] * u * u * u + c[1][k] * u * u + c[2][k] * u + c[3][k];
        let g = |k: usize| 3.0 * c[0][k] * u * u + 2.0 * c[1][k] * u + c[2][k];
        let h = |k: usize| 6.0 * c[0][k] * u + 2.0 * c[1][k];
        CurveSample {
            position: Point2::new(f(0), f(1)),
            d1: Point2::new(g(0), g(1)),
            d2: Point2::new(h(0), h(1)),
        }
    }
}

/// Evaluate a segment at `u` in `[0, 1]`.
pub fn evaluate(seg: &SplineSegment, u: f64) -> Result<CurveSample> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::OutOfRange(format!("parameter {u} outside [0, 1]")));
    }
    Ok(seg.eval_unchecked(u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    segment: usize,
    u0: f64,
    u1: f64,
}

impl Piece {
    fn eval(&self, segs: &[SplineSegment], t: f64) -> CurveSample {
        let du = self.u1 - self.u0;
        let s = segs[self.segment].eval_unchecked(self.u0 + t * du);
        CurveSample { position: s.position, d1: s.d1 * du, d2: s.d2 * du * du }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Span {
    piece: Piece,
    /// Derivative corrections applied at `t = 0` and `t = 1`.
    fix0: Point2,
    fix1: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    segments: Vec<SplineSegment>,
    spans: Vec<Span>,
    points: Vec<Point2>,
    closed: bool,
    /// Cumulative arc length at the start of each span, plus the total.
    span_start_s: Vec<f64>,
    /// Per-span lookup of `(t, s)` for arc-length inversion.
    tables: Vec<Vec<(f64, f64)>>,
}

const TABLE_STEPS: usize = 32;

fn gauss_length(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    X.iter().zip(W).map(|(x, w)| w * f(m + r * x)).sum::<f64>() * r
}

fn chord_knots(p: &[Point2; 4]) -> (f64, f64) {
    let d: [f64; 3] = std::array::from_fn(|i| (p[i + 1] - p[i]).norm());
    let total = d[0] + d[1] + d[2];
    (d[0] / total, (d[0] + d[1]) / total)
}

/// Interpolating trajectory through `points` (open, or closed by wrapping).
pub fn build_trajectory(points: &[Point2], closed: bool) -> Result<Trajectory> {
    let n = points.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("{n} points, need at least 4")));
    }
    let consecutive = if closed { n } else { n - 1 };
    for i in 0..consecutive {
        if (points[(i + 1) % n] - points[i]).norm() < 1e-9 {
            return Err(Error::InvalidInput(format!("consecutive duplicate points at {i}")));
        }
    }
    let window_count = if closed { n } else { n - 3 };
    let mut segments = Vec::with_capacity(window_count);
    let mut knots = Vec::with_capacity(window_count);
    for j in 0..window_count {
        let p: [Point2; 4] = std::array::from_fn(|k| points[(j + k) % n]);
        let (u1, u2) = chord_knots(&p);
        segments.push(fit_segment(p, u1, u2)?);
        knots.push((u1, u2));
    }
    // window j covers points j..j+3; its first span is [0,u1], central [u1,u2], last [u2,1]
    let first = |j: usize| Piece { segment: j, u0: 0.0, u1: knots[j].0 };
    let central = |j: usize| Piece { segment: j, u0: knots[j].0, u1: knots[j].1 };
    let last = |j: usize| Piece { segment: j, u0: knots[j].1, u1: 1.0 };
    let pieces: Vec<Piece> = if closed {
        (0..n).map(|i| central((i + n - 1) % n)).collect()
    } else {
        (0..n - 1)
            .map(|i| match i {
                0 => first(0),
                i if i == n - 2 => last(n - 4),
                i => central(i - 1),
            })
            .collect()
    };
    let raw: Vec<(Point2, Point2)> =
        pieces.iter().map(|p| (p.eval(&segments, 0.0).d1, p.eval(&segments, 1.0).d1)).collect();
    let m = pieces.len();
    let bisector = |a: Point2, b: Point2| {
        let d = a.normalize() + b.normalize();
        if d.norm() > 1e-9 { d.normalize() } else { b.normalize() }
    };
    let spans: Vec<Span> = (0..m)
        .map(|i| {
            let (d0, d1) = raw[i];
            let start = if closed || i > 0 { bisector(raw[(i + m - 1) % m].1, d0) * d0.norm() } else { d0 };
            let end = if closed || i + 1 < m { bisector(d1, raw[(i + 1) % m].0) * d1.norm() } else { d1 };
            Span { piece: pieces[i], fix0: start - d0, fix1: end - d1 }
        })
        .collect();
    let mut traj = Trajectory {
        segments,
        spans,
        points: points.to_vec(),
        closed,
        span_start_s: Vec::new(),
        tables: Vec::new(),
    };
    traj.build_tables();
    Ok(traj)
}

impl Trajectory {
    fn build_tables(&mut self) {
        let mut s_acc = 0.0;
        self.span_start_s.clear();
        self.tables.clear();
        for i in 0..self.spans.len() {
            self.span_start_s.push(s_acc);
            let mut table = Vec::with_capacity(TABLE_STEPS + 1);
            let mut local = 0.0;
            table.push((0.0, 0.0));
            for k in 0..TABLE_STEPS {
                let (a, b) = (k as f64 / TABLE_STEPS as f64, (k + 1) as f64 / TABLE_STEPS as f64);
                local += gauss_length(|t| self.eval_span(i, t).d1.norm(), a, b);
                table.push((b, local));
            }
            s_acc += local;
            self.tables.push(table);
        }
        self.span_start_s.push(s_acc);
    }

    fn eval_span(&self, i: usize, t: f64) -> CurveSample {
        let span = &self.spans[i];
        let c = span.piece.eval(&self.segments, t);
        // Hermite tangent basis: h0 = t^3 - 2t^2 + t, h1 = t^3 - t^2
        let (t2, t3) = (t * t, t * t * t);
        let (h0, h1) = (t3 - 2.0 * t2 + t, t3 - t2);
        let (g0, g1) = (3.0 * t2 - 4.0 * t + 1.0, 3.0 * t2 - 2.0 * t);
        let (k0, k1) = (6.0 * t - 4.0, 6.0 * t - 2.0);
        CurveSample {
            position: c.position + span.fix0 * h0 + span.fix1 * h1,
            d1: c.d1 + span.fix0 * g0 + span.fix1 * g1,
            d2: c.d2 + span.fix0 * k0 + span.fix1 * k1,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn span_count(&self) -> usize {
        self.spans.len()
    }

    pub fn segments(&self) -> &[SplineSegment] {
        &self.segments
    }

    pub fn input_points(&self) -> &[Point2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.span_start_s.last().unwrap_or(&0.0)
    }

    /// Evaluate span `i` at local parameter `t` in `[0, 1]`; derivatives are
    /// with respect to `t`.
    pub fn evaluate(&self, span: usize, t: f64) -> Result<CurveSample> {
        if span >= self.spans.len() {
            return Err(Error::InvalidIndex(format!("span {span} of {}", self.spans.len())));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange(format!("parameter {t} outside [0, 1]")));
        }
        Ok(self.eval_span(span, t))
    }

    /// Span index and local parameter at arc length `s` (clamped, or wrapped
    /// when closed).
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let total = self.length();
        let s = if self.closed { s.rem_euclid(total) } else { s.clamp(0.0, total) };
        let i = match self.span_start_s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(self.spans.len() - 1),
            Err(i) => i.saturating_sub(1).min(self.spans.len() - 1),
        };
        let local = s - self.span_start_s[i];
        let table = &self.tables[i];
        let k = table.partition_point(|&(_, ls)| ls < local).clamp(1, table.len() - 1);
        let (t0, s0) = table[k - 1];
        let (t1, s1) = table[k];
        let mut t = if s1 > s0 { t0 + (t1 - t0) * (local - s0) / (s1 - s0) } else { t0 };
        // Newton polish against the quadrature
        for _ in 0..3 {
            let cur = s0 + gauss_length(|x| self.eval_span(i, x).d1.norm(), t0, t);
            let speed = self.eval_span(i, t).d1.norm();
            if speed <= 1e-12 {
                break;
            }
            t = (t - (cur - local) / speed).clamp(0.0, 1.0);
        }
        (i, t)
    }

    pub fn sample_at(&self, s: f64) -> CurveSample {
        let (i, t) = self.locate(s);
        self.eval_span(i, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Point2,
    pub heading: f64,
    pub curvature: f64,
    pub s: f64,
}

/// Sample waypoints at (nearly) uniform arc-length spacing.
pub fn sample_waypoints(traj: &Trajectory, spacing: f64) -> Result<Vec<Waypoint>> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidInput("spacing must be positive".into()));
    }
    let total = traj.length();
    let intervals = ((total / spacing).round() as usize).max(1);
    let step = total / intervals as f64;
    let count = if traj.closed { intervals } else { intervals + 1 };
    Ok((0..count)
        .map(|k| {
            let s = if k == intervals { total } else { k as f64 * step };
            let c = traj.sample_at(s);
            Waypoint { position: c.position, heading: wrap_angle(c.heading()), curvature: c.curvature(), s }
        })
        .collect())
}

pub const WAYPOINT_HEADER: &str = "# conetrack-waypoints v1";

pub fn write_waypoints(path: &Path, waypoints: &[Waypoint], closed: bool) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{WAYPOINT_HEADER}").unwrap();
    writeln!(out, "closed,{closed}").unwrap();
    writeln!(out, "s,x,y,heading,curvature").unwrap();
    for w in waypoints {
        writeln!(out, "{},{},{},{},{}", w.s, w.position.x, w.position.y, w.heading, w.curvature).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_waypoints(path: &Path) -> Result<(Vec<Waypoint>, bool)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(WAYPOINT_HEADER) {
        return Err(Error::Format("missing waypoint header".into()));
    }
    let closed = match lines.next() {
        Some("closed,true") => true,
        Some("closed,false") => false,
        other => return Err(Error::Format(format!("bad closed line {other:?}"))),
    };
    lines.next();
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Format(format!("{line}: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 5 {
            return Err(Error::Format(format!("expected 5 fields in {line}")));
        }
        out.push(Waypoint { s: v[0], position: Point2::new(v[1], v[2]), heading: v[3], curvature: v[4] });
    }
    Ok((out, closed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    fn circle(n: usize, r: f64) -> Vec<Point2> {
        (0..n).map(|i| Point2::new(r * (TAU * i as f64 / n as f64).cos(), r * (TAU * i as f64 / n as f64).sin())).collect()
    }

    #[test]
    fn segment_hits_its_knots() {
        let p = [Point2::new(0.0, 0.0), Point2::new(1.0, 2.0), Point2::new(3.0, 1.0), Point2::new(4.0, 4.0)];
        let seg = fit_segment(p, 0.3, 0.6).unwrap();
        for (k, &u) in seg.knots.iter().enumerate() {
            assert_abs_diff_eq!(evaluate(&seg, u).unwrap().position, p[k], epsilon = 1e-9);
        }
        assert_eq!(evaluate(&seg, 0.0).unwrap().position, p[0]);
    }

    #[test]
    fn collinear_points_stay_collinear() {
        let p: [Point2; 4] = std::array::from_fn(|i| Point2::new(i as f64, 2.0 * i as f64));
        let seg = fit_segment(p, 1.0 / 3.0, 2.0 / 3.0).unwrap();
        for k in 0..=50 {
            let q = evaluate(&seg, k as f64 / 50.0).unwrap().position;
            assert_abs_diff_eq!(q.y - 2.0 * q.x, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn parabola_matches_independent_solve() {
        // y = x^2 sampled at x = 0, 1, 2, 3, knots 0.2, 0.7
        let p: [Point2; 4] = std::array::from_fn(|i| Point2::new(i as f64, (i * i) as f64));
        let (u1, u2) = (0.2, 0.7);
        let seg = fit_segment(p, u1, u2).unwrap();
        // Lagrange form through the four (u, P) pairs
        let us = [0.0, u1, u2, 1.0];
        let u = 0.5;
        let mut expect = Point2::zeros();
        for i in 0..4 {
            let mut l = 1.0;
            for j in 0..4 {
                if i != j {
                    l *= (u - us[j]) / (us[i] - us[j]);
                }
            }
            expect += p[i] * l;
        }
        assert_abs_diff_eq!(evaluate(&seg, u).unwrap().position, expect, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let p: [Point2; 4] = std::array::from_fn(|i| Point2::new(i as f64, 0.0));
        assert!(fit_segment(p, 0.5, 0.5).is_err());
        let dup = [p[0], p[0], p[2], p[3]];
        assert!(fit_segment(dup, 0.3, 0.6).is_err());
        let seg = fit_segment(p, 0.3, 0.6).unwrap();
        assert!(evaluate(&seg, 1.1).is_err());
        assert!(build_trajectory(&p[..3], false).is_err());
    }

    #[test]
    fn segment_derivatives_match_finite_differences() {
        let p = [Point2::new(0.0, 0.0), Point2::new(1.0, 2.0), Point2::new(3.0, 1.0), Point2::new(4.0, 4.0)];
        let seg = fit_segment(p, 0.3, 0.6).unwrap();
        let h = 1e-6;
        for k in 1..20 {
            let u = k as f64 / 20.0;
            let c = evaluate(&seg, u).unwrap();
            let fd = (evaluate(&seg, u + h).unwrap().position - evaluate(&seg, u - h).unwrap().position) / (2.0 * h);
            assert!((c.d1 - fd).norm() <= 1e-6 * c.d1.norm().max(1.0));
        }
    }

    #[test]
    fn straight_line_has_zero_curvature() {
        let pts: Vec<Point2> = (0..8).map(|i| Point2::new(i as f64 * 1.5, 0.5 * i as f64 * 1.5)).collect();
        let traj = build_trajectory(&pts, false).unwrap();
        for w in sample_waypoints(&traj, 0.25).unwrap() {
            assert_abs_diff_eq!(w.curvature, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn ten_meter_line_gives_eleven_waypoints() {
        let pts: Vec<Point2> = (0..5).map(|i| Point2::new(2.5 * i as f64, 0.0)).collect();
        let traj = build_trajectory(&pts, false).unwrap();
        let wps = sample_waypoints(&traj, 1.0).unwrap();
        assert_eq!(wps.len(), 11);
        for (k, w) in wps.iter().enumerate() {
            assert_abs_diff_eq!(w.s, k as f64, epsilon = 1e-9);
            assert_abs_diff_eq!(w.position.x, k as f64, epsilon = 1e-6);
            assert_abs_diff_eq!(w.heading, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_curvature_within_two_percent() {
        let traj = build_trajectory(&circle(36, 10.0), true).unwrap();
        let wps = sample_waypoints(&traj, 0.5).unwrap();
        for w in &wps {
            assert!((w.curvature - 0.1).abs() <= 0.002, "kappa {}", w.curvature);
        }
        assert!(wps.windows(2).all(|p| p[1].s > p[0].s));
    }

    #[test]
    fn closed_loop_is_c0_and_g1() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(10.0, -1.0),
            Point2::new(20.0, 0.5),
            Point2::new(21.0, 10.0),
            Point2::new(19.0, 20.0),
            Point2::new(10.0, 21.0),
            Point2::new(0.0, 19.0),
            Point2::new(-1.0, 10.0),
        ];
        let traj = build_trajectory(&pts, true).unwrap();
        let n = traj.span_count();
        assert_eq!(n, pts.len());
        for i in 0..n {
            let end = traj.evaluate(i, 1.0).unwrap();
            let next = traj.evaluate((i + 1) % n, 0.0).unwrap();
            assert_abs_diff_eq!(end.position, next.position, epsilon = 1e-9);
            let angle = wrap_angle(end.heading() - next.heading());
            assert!(angle.abs() < 1e-9, "G1 gap {angle} at join {i}");
            assert_abs_diff_eq!(traj.evaluate(i, 0.0).unwrap().position, pts[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn waypoint_file_round_trip() {
        let traj = build_trajectory(&circle(12, 5.0), true).unwrap();
        let wps = sample_waypoints(&traj, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        write_waypoints(&path, &wps, true).unwrap();
        let (back, closed) = read_waypoints(&path).unwrap();
        assert!(closed);
        assert_eq!(back, wps);
    }
}
