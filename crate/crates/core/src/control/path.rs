//! Polyline view of a waypoint sequence used by the trackers.

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2};
use crate::planning::Waypoint;

/// Foot point of a query on the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProjection {
    pub s: f64,
    /// Index of the segment start waypoint.
    pub index: usize,
    pub position: Point2,
    /// Signed offset of the query, positive to the left of the path.
    pub lateral: f64,
    pub heading: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    waypoints: Vec<Waypoint>,
    closed: bool,
    length: f64,
}

impl WaypointPath {
    /// Arc lengths are recomputed from the polyline so `s` is consistent
    /// with the projections below.
    pub fn new(mut waypoints: Vec<Waypoint>, closed: bool) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidInput("a path needs at least two waypoints".into()));
        }
        let mut s = 0.0;
        for i in 0..waypoints.len() {
            if i > 0 {
                s += (waypoints[i].position - waypoints[i - 1].position).norm();
            }
            waypoints[i].s = s;
        }
        let length = if closed {
            s + (waypoints[0].position - waypoints[waypoints.len() - 1].position).norm()
        } else {
            s
        };
        if !(length > 0.0) {
            return Err(Error::InvalidInput("path has zero length".into()));
        }
        Ok(Self { waypoints, closed, length })
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn segment_count(&self) -> usize {
        if self.closed {
            self.waypoints.len()
        } else {
            self.waypoints.len() - 1
        }
    }

    fn segment(&self, i: usize) -> (&Waypoint, &Waypoint) {
        let n = self.waypoints.len();
        (&self.waypoints[i], &self.waypoints[(i + 1) % n])
    }

    fn project_segment(&self, i: usize, p: &Point2) -> (f64, PathProjection) {
        let (a, b) = self.segment(i);
        let d = b.position - a.position;
        let len2 = d.norm_squared();
        let t = if len2 > 0.0 { ((p - a.position).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let foot = a.position + d * t;
        let seg_len = len2.sqrt();
        let off = p - foot;
        let dist2 = off.norm_squared();
        let tangent = if seg_len > 0.0 { d / seg_len } else { Point2::new(a.heading.cos(), a.heading.sin()) };
        let lateral = tangent.x * off.y - tangent.y * off.x;
        let heading = a.heading + wrap_angle(b.heading - a.heading) * t;
        let proj = PathProjection {
            s: a.s + t * seg_len,
            index: i,
            position: foot,
            lateral,
            heading: wrap_angle(heading),
            curvature: a.curvature + (b.curvature - a.curvature) * t,
        };
        (dist2, proj)
    }

    /// Closest point on the path. With a hint, only segments within
    /// `window` of the hint are searched, which keeps the projection on the
    /// right branch where a path passes close to itself.
    pub fn project(&self, p: &Point2, hint: Option<usize>, window: usize) -> PathProjection {
        let m = self.segment_count();
        let candidates: Box<dyn Iterator<Item = usize>> = match hint {
            Some(h) if 2 * window + 1 < m => {
                let h = h.min(m - 1);
                if self.closed {
                    Box::new((0..=2 * window).map(move |k| (h + m + k - window) % m))
                } else {
                    let lo = h.saturating_sub(window);
                    let hi = (h + window).min(m - 1);
                    Box::new(lo..=hi)
                }
            }
            _ => Box::new(0..m),
        };
        let mut best: Option<(f64, PathProjection)> = None;
        for i in candidates {
            let c = self.project_segment(i, p);
            if best.as_ref().is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
        best.expect("path has segments").1
    }

    /// Position, heading and curvature at arc length `s` (wrapped on closed
    /// paths, clamped on open ones).
    pub fn at(&self, s: f64) -> (Point2, f64, f64) {
        let s = if self.closed { s.rem_euclid(self.length) } else { s.clamp(0.0, self.length) };
        let i = match self.waypoints.binary_search_by(|w| w.s.partial_cmp(&s).expect("finite")) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let i = i.min(self.segment_count() - 1);
        let (a, b) = self.segment(i);
        let seg_len = (b.position - a.position).norm();
        let t = if seg_len > 0.0 { ((s - a.s) / seg_len).clamp(0.0, 1.0) } else { 0.0 };
        let pos = a.position + (b.position - a.position) * t;
        let heading = wrap_angle(a.heading + wrap_angle(b.heading - a.heading) * t);
        (pos, heading, a.curvature + (b.curvature - a.curvature) * t)
    }

    /// Distance left to the end of an open path; infinite when closed.
    pub fn remaining(&self, s: f64) -> f64 {
        if self.closed {
            f64::INFINITY
        } else {
            (self.length - s).max(0.0)
        }
    }
}
