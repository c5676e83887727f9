//! Euclidean clustering of obstacle points and cone-size filtering.

use crate::geometry::Point3;
use crate::ground::PlaneModel;
use crate::spatial::SpatialHash;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the clustered point sequence, ascending.
    pub members: Vec<usize>,
    pub centroid: Point3,
    /// Axis-aligned envelope `(dx, dy, dz)`.
    pub extents: (f64, f64, f64),
}

impl Cluster {
    fn from_members(points: &[Point3], members: Vec<usize>) -> Self {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        let mut sum = Point3::zeros();
        for &i in &members {
            let p = &points[i];
            lo = lo.inf(p);
            hi = hi.sup(p);
            sum += p;
        }
        let d = hi - lo;
        Self { centroid: sum / members.len() as f64, extents: (d.x, d.y, d.z), members }
    }

    pub fn horizontal_extent(&self) -> f64 {
        self.extents.0.max(self.extents.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeCandidate {
    /// Sensor-frame position, dropped onto the ground plane.
    pub position: Point3,
    pub extent: f64,
    pub height: f64,
    pub point_count: usize,
}

/// Acceptance window for cone-sized clusters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeWindow {
    pub min_extent: f64,
    pub max_extent: f64,
    pub max_height: f64,
    pub max_points: usize,
}

impl Default for ConeWindow {
    fn default() -> Self {
        Self { min_extent: 0.1, max_extent: 0.5, max_height: 0.5, max_points: 2000 }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root index wins so labels are order independent
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Group points whose pairwise chains stay within `radius`; clusters smaller
/// than `min_points` are dropped. Output is ordered by smallest member index.
pub fn euclidean_cluster(points: &[Point3], radius: f64, min_points: usize) -> Vec<Cluster> {
    assert!(radius > 0.0 && min_points >= 1, "radius > 0 and min_points >= 1");
    if points.is_empty() {
        return Vec::new();
    }
    let grid = SpatialHash::new(points, radius);
    let mut sets = DisjointSet::new(points.len());
    for (i, p) in points.iter().enumerate() {
        for j in grid.within(points, p, radius) {
            if j > i {
                sets.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
    for i in 0..points.len() {
        let r = sets.find(i);
        groups[r].push(i);
    }
    groups
        .into_iter()
        .filter(|g| !g.is_empty() && g.len() >= min_points)
        .map(|g| Cluster::from_members(points, g))
        .collect()
}

/// Keep clusters whose footprint and height fit a cone.
pub fn filter_cone_sized(clusters: &[Cluster], window: &ConeWindow, ground: &PlaneModel) -> Vec<ConeCandidate> {
    clusters
        .iter()
        .filter(|c| {
            let e = c.horizontal_extent();
            e >= window.min_extent
                && e <= window.max_extent
                && c.extents.1 <= window.max_height
                && c.members.len() <= window.max_points
        })
        .map(|c| {
            let mut position = c.centroid;
            position.y = ground.height_at(position.x, position.z);
            ConeCandidate {
                position,
                extent: c.horizontal_extent(),
                height: c.extents.1,
                point_count: c.members.len(),
            }
        })
        .collect()
}
