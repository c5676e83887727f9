//! Uniform grid hash for radius and nearest-neighbour queries.

use std::collections::HashMap;
use std::hash::BuildHasherDefault;
use std::collections::hash_map::DefaultHasher;

use crate::geometry::Point3;

type Cell = (i64, i64, i64);
type FixedState = BuildHasherDefault<DefaultHasher>;

#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    cells: HashMap<Cell, Vec<usize>, FixedState>,
}

impl SpatialHash {
    pub fn new(points: &[Point3], cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut cells: HashMap<Cell, Vec<usize>, FixedState> = HashMap::default();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(cell, p)).or_default().push(i);
        }
        Self { cell, cells }
    }

    fn key(cell: f64, p: &Point3) -> Cell {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
    }

    /// Indices of points within `radius` of `q` (inclusive), ascending.
    pub fn within(&self, points: &[Point3], q: &Point3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.visit(q, radius, |i| {
            if (points[i] - q).norm_squared() <= r2 {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Up to `k` nearest points within `max_dist`, ordered by distance then index.
    pub fn nearest(&self, points: &[Point3], q: &Point3, k: usize, max_dist: f64) -> Vec<(usize, f64)> {
        if k == 0 {
            return Vec::new();
        }
        // grow the search ball until it holds k points; anything closer
        // than the ball radius is already inside it
        let mut radius = (0.5 * self.cell).min(max_dist);
        let mut found = Vec::new();
        loop {
            let r2 = radius * radius;
            found.clear();
            self.visit(q, radius, |i| {
                let d2 = (points[i] - q).norm_squared();
                if d2 <= r2 {
                    found.push((i, d2));
                }
            });
            if found.len() >= k || radius >= max_dist {
                break;
            }
            radius = (2.0 * radius).min(max_dist);
        }
        let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if found.len() > k {
            found.select_nth_unstable_by(k - 1, by_distance);
            found.truncate(k);
        }
        found.sort_unstable_by(by_distance);
        found.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect()
    }

    fn visit(&self, q: &Point3, radius: f64, mut f: impl FnMut(usize)) {
        let lo = Self::key(self.cell, &(q - Point3::repeat(radius)));
        let hi = Self::key(self.cell, &(q + Point3::repeat(radius)));
        for x in lo.0..=hi.0 {
            for y in lo.1..=hi.1 {
                for z in lo.2..=hi.2 {
                    if let Some(v) = self.cells.get(&(x, y, z)) {
                        v.iter().copied().for_each(&mut f);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_query_matches_brute_force() {
        let pts: Vec<Point3> = (0..500)
            .map(|i| {
                let f = i as f64;
                Point3::new((f * 0.37).sin() * 3.0, (f * 0.11).cos(), (f * 0.73).sin() * 2.0)
            })
            .collect();
        let h = SpatialHash::new(&pts, 0.4);
        for q in pts.iter().step_by(17) {
            let brute: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() <= 0.4).collect();
            assert_eq!(h.within(&pts, q, 0.4), brute);
            let nn = h.nearest(&pts, q, 3, 1.0);
            assert!(nn.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }
}
