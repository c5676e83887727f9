//! Cone landmark map, loop-closure scoring and midline extraction.

use std::fmt::Write as _;
use std::path::Path;

use crate::detection::ConeCandidate;
use crate::error::{Error, Result};
use crate::geometry::{to_plane, wrap_angle, Point2, PoseTransform};
use crate::vision::ConeColor;

const COLORS: [ConeColor; 4] = [ConeColor::Red, ConeColor::Blue, ConeColor::Yellow, ConeColor::Unknown];

fn color_index(c: ConeColor) -> usize {
    COLORS.iter().position(|x| *x == c).expect("listed colour")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappedCone {
    pub position: Point2,
    pub color: ConeColor,
    pub observation_count: u32,
    /// Colour votes in the order red, blue, yellow, unknown.
    pub votes: [u32; 4],
}

impl MappedCone {
    pub fn new(position: Point2, color: ConeColor) -> Self {
        let mut votes = [0; 4];
        votes[color_index(color)] = 1;
        Self { position, color, observation_count: 1, votes }
    }

    fn observe(&mut self, p: &Point2, color: ConeColor) {
        self.observation_count += 1;
        self.position += (p - self.position) / self.observation_count as f64;
        self.votes[color_index(color)] += 1;
        // majority among definite colours; ties keep the earlier colour
        let mut best = (ConeColor::Unknown, 0);
        for (k, c) in COLORS.iter().take(3).enumerate() {
            if self.votes[k] > best.1 {
                best = (*c, self.votes[k]);
            }
        }
        self.color = best.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopClosureConfig {
    pub w_c: f64,
    pub w_h: f64,
    pub w_d: f64,
    pub threshold: f64,
    /// Distance to travel after the start or a detection before the next
    /// detection can fire.
    pub arming_distance: f64,
}

impl Default for LoopClosureConfig {
    fn default() -> Self {
        Self { w_c: 0.5, w_h: 1.0, w_d: 1.0, threshold: 3.0, arming_distance: 15.0 }
    }
}

impl LoopClosureConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.w_c, self.w_h, self.w_d, self.arming_distance].iter().any(|w| !(*w >= 0.0)) || !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("loop weights must be nonnegative and the threshold positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapConfig {
    pub merge_radius: f64,
    pub pairing_gate: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { merge_radius: 1.0, pairing_gate: 7.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackMap {
    pub cones: Vec<MappedCone>,
    pub start_pose: PoseTransform,
    pub lap_count: u32,
    pub closed: bool,
    /// Vehicle positions recorded while mapping.
    pub trail: Vec<Point2>,
    pub config: MapConfig,
    travelled_since_fire: f64,
}

impl TrackMap {
    pub fn new(start_pose: PoseTransform) -> Self {
        Self {
            cones: Vec::new(),
            start_pose,
            lap_count: 0,
            closed: false,
            trail: Vec::new(),
            config: MapConfig::default(),
            travelled_since_fire: 0.0,
        }
    }

    /// Append a vehicle position to the trail.
    pub fn record_position(&mut self, p: Point2) {
        if let Some(last) = self.trail.last() {
            self.travelled_since_fire += (p - last).norm();
        }
        self.trail.push(p);
    }

    pub fn travelled_since_detection(&self) -> f64 {
        self.travelled_since_fire
    }

    /// Index of the mapped cone nearest to `p`.
    pub fn nearest(&self, p: &Point2) -> Option<(usize, f64)> {
        self.cones
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (c.position - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn count(&self, color: ConeColor) -> usize {
        self.cones.iter().filter(|c| c.color == color).count()
    }
}

/// Fold candidates (sensor frame) into the map using the vehicle pose.
pub fn insert_observations(map: &mut TrackMap, candidates: &[(ConeCandidate, ConeColor)], pose: &PoseTransform) {
    for (cand, color) in candidates {
        let p = to_plane(&pose.apply(&cand.position));
        insert_world(map, p, *color);
    }
}

/// Fold one world-frame observation into the map.
pub fn insert_world(map: &mut TrackMap, p: Point2, color: ConeColor) {
    match map.nearest(&p) {
        Some((i, d)) if d <= map.config.merge_radius => map.cones[i].observe(&p, color),
        _ => map.cones.push(MappedCone::new(p, color)),
    }
}

/// Weighted sum of the cone re-observation error, heading change and
/// position change relative to the start.
pub fn loop_closure_coefficient(
    map: &TrackMap,
    detected: &[Point2],
    heading_now: f64,
    heading_start: f64,
    pos_now: &Point2,
    pos_start: &Point2,
    cfg: &LoopClosureConfig,
) -> f64 {
    let cone_term: f64 = if cfg.w_c > 0.0 {
        detected.iter().map(|d| map.nearest(d).map_or(0.0, |(_, dist)| dist)).sum()
    } else {
        0.0
    };
    cfg.w_c * cone_term + cfg.w_h * wrap_angle(heading_now - heading_start).abs() + cfg.w_d * (pos_now - pos_start).norm()
}

/// Fires when the coefficient drops below the threshold after the arming
/// distance has been covered; a detection closes the map, counts a lap and
/// disarms until the arming distance is covered again.
pub fn detect_loop(
    map: &mut TrackMap,
    detected: &[Point2],
    heading_now: f64,
    pos_now: &Point2,
    cfg: &LoopClosureConfig,
) -> bool {
    if map.travelled_since_fire < cfg.arming_distance {
        return false;
    }
    let (sx, sy, spsi) = map.start_pose.planar();
    let c = loop_closure_coefficient(map, detected, heading_now, spsi, pos_now, &Point2::new(sx, sy), cfg);
    if c < cfg.threshold {
        map.closed = true;
        map.lap_count += 1;
        map.travelled_since_fire = 0.0;
        true
    } else {
        false
    }
}

/// Midpoints of left/right cone pairs, and the cones that found no partner.
pub fn pair_midpoints(map: &TrackMap) -> (Vec<Point2>, Vec<usize>) {
    let gate = map.config.pairing_gate;
    let idx_of = |c: ConeColor| -> Vec<usize> { (0..map.cones.len()).filter(|&i| map.cones[i].color == c).collect() };
    let (reds, blues, yellows) = (idx_of(ConeColor::Red), idx_of(ConeColor::Blue), idx_of(ConeColor::Yellow));
    let mut mids = Vec::new();
    let mut unpaired = Vec::new();
    let mut used_blue = vec![false; map.cones.len()];
    let nearest_in = |p: &Point2, set: &[usize], skip: usize| {
        set.iter()
            .filter(|&&j| j != skip)
            .map(|&j| (j, (map.cones[j].position - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };
    for &i in &reds {
        let p = map.cones[i].position;
        match nearest_in(&p, &blues, usize::MAX) {
            Some((j, d)) if d <= gate => {
                used_blue[j] = true;
                mids.push((p + map.cones[j].position) * 0.5);
            }
            _ => unpaired.push(i),
        }
    }
    // a blue cone no red chose pairs with its own nearest red
    for &j in &blues {
        if used_blue[j] {
            continue;
        }
        let p = map.cones[j].position;
        match nearest_in(&p, &reds, usize::MAX) {
            Some((i, d)) if d <= gate => mids.push((p + map.cones[i].position) * 0.5),
            _ => unpaired.push(j),
        }
    }
    let mut yellow_done = vec![false; map.cones.len()];
    for &i in &yellows {
        if yellow_done[i] {
            continue;
        }
        let p = map.cones[i].position;
        match nearest_in(&p, &yellows, i) {
            Some((j, d)) if d <= gate && !yellow_done[j] => {
                yellow_done[i] = true;
                yellow_done[j] = true;
                mids.push((p + map.cones[j].position) * 0.5);
            }
            _ => unpaired.push(i),
        }
    }
    // collapse near-duplicates produced by the two pairing passes
    let mut out: Vec<Point2> = Vec::with_capacity(mids.len());
    for m in mids {
        if !out.iter().any(|o| (o - m).norm() < 1.0) {
            out.push(m);
        }
    }
    (out, unpaired)
}

/// Midline through the mapped pairs, ordered by where each midpoint
/// projects onto the recorded trail (or by greedy chaining from the start
/// when there is no trail).
pub fn extract_midline(map: &TrackMap) -> Result<Vec<Point2>> {
    if map.count(ConeColor::Red) < 2 || map.count(ConeColor::Blue) < 2 {
        return Err(Error::InsufficientMap(format!(
            "{} red and {} blue cones mapped",
            map.count(ConeColor::Red),
            map.count(ConeColor::Blue)
        )));
    }
    let (mids, _) = pair_midpoints(map);
    if mids.len() < 2 {
        return Err(Error::InsufficientMap("fewer than two cone pairs".into()));
    }
    if map.trail.len() >= 2 {
        let mut arc = vec![0.0; map.trail.len()];
        for i in 1..map.trail.len() {
            arc[i] = arc[i - 1] + (map.trail[i] - map.trail[i - 1]).norm();
        }
        let mut keyed: Vec<(f64, Point2)> = mids.iter().map(|m| (project_on_polyline(&map.trail, &arc, m), *m)).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(keyed.into_iter().map(|(_, m)| m).collect())
    } else {
        let (sx, sy, psi) = map.start_pose.planar();
        Ok(chain_forward(&mids, Point2::new(sx, sy), psi, f64::INFINITY, 8.0))
    }
}

fn project_on_polyline(poly: &[Point2], arc: &[f64], p: &Point2) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..poly.len() - 1 {
        let a = poly[i];
        let d = poly[i + 1] - a;
        let len2 = d.norm_squared();
        let t = if len2 > 0.0 { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let dist = (a + d * t - p).norm_squared();
        if dist < best.0 {
            best = (dist, arc[i] + t * len2.sqrt());
        }
    }
    best.1
}

/// Chain points greedily from `origin`: each step takes the nearest unused
/// point within `max_step` lying within 60 degrees of the current direction.
pub fn chain_forward(points: &[Point2], origin: Point2, heading: f64, max_length: f64, max_step: f64) -> Vec<Point2> {
    let mut used = vec![false; points.len()];
    let mut out = Vec::new();
    let mut here = origin;
    let mut dir = Point2::new(heading.cos(), heading.sin());
    let mut length = 0.0;
    let cos_limit = (60f64).to_radians().cos();
    while length < max_length {
        let next = points
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .filter_map(|(i, p)| {
                let d = p - here;
                let n = d.norm();
                (n <= 1e-9 || (n <= max_step && d.dot(&dir) >= cos_limit * n)).then_some((i, n))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, n)) = next else { break };
        used[i] = true;
        if n > 1e-9 {
            dir = (points[i] - here) / n;
        }
        here = points[i];
        length += n;
        out.push(here);
    }
    out
}

/// Midpoints ahead of the vehicle for the detection-drive planner.
pub fn local_midline(map: &TrackMap, position: Point2, heading: f64, horizon: f64) -> Vec<Point2> {
    let (mids, _) = pair_midpoints(map);
    chain_forward(&mids, position, heading, horizon, 8.0)
}

pub const TRACKMAP_HEADER: &str = "# conetrack-trackmap v1";

/// Text format: version line; `start` with the 7 pose values; `closed`;
/// `laps`; `cones <n>` then `x,y,color,count` rows; `trail <n>` then `x,y`
/// rows.
pub fn map_to_string(map: &TrackMap) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TRACKMAP_HEADER}");
    let s = map.start_pose.to_array();
    let _ = writeln!(out, "start {}", s.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" "));
    let _ = writeln!(out, "closed {}", map.closed);
    let _ = writeln!(out, "laps {}", map.lap_count);
    let _ = writeln!(out, "cones {}", map.cones.len());
    for c in &map.cones {
        let _ = writeln!(out, "{:?},{:?},{},{}", c.position.x, c.position.y, c.color.as_str(), c.observation_count);
    }
    let _ = writeln!(out, "trail {}", map.trail.len());
    for p in &map.trail {
        let _ = writeln!(out, "{:?},{:?}", p.x, p.y);
    }
    out
}

pub fn parse_map(text: &str) -> Result<TrackMap> {
    let bad = |m: &str| Error::Format(format!("track map: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(TRACKMAP_HEADER) {
        return Err(bad("missing or unsupported version header"));
    }
    let mut keyed = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad("truncated"))?;
        line.strip_prefix(key).map(|r| r.trim().to_string()).ok_or_else(|| bad(&format!("expected `{key}`")))
    };
    let start: Vec<f64> = keyed("start")?.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("start"))?;
    let start: [f64; 7] = start.try_into().map_err(|_| bad("start needs seven values"))?;
    let closed: bool = keyed("closed")?.parse().map_err(|_| bad("closed"))?;
    let laps: u32 = keyed("laps")?.parse().map_err(|_| bad("laps"))?;
    let n: usize = keyed("cones")?.parse().map_err(|_| bad("cone count"))?;
    let mut map = TrackMap::new(PoseTransform::from_array(start)?);
    map.closed = closed;
    map.lap_count = laps;
    let rows: Vec<&str> = lines.collect();
    if rows.len() < n + 1 {
        return Err(bad("truncated cone list"));
    }
    for row in &rows[..n] {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 4 {
            return Err(bad("cone row"));
        }
        let x: f64 = f[0].parse().map_err(|_| bad("cone x"))?;
        let y: f64 = f[1].parse().map_err(|_| bad("cone y"))?;
        let color = ConeColor::parse(f[2]).ok_or_else(|| bad("cone colour"))?;
        let count: u32 = f[3].parse().map_err(|_| bad("cone count"))?;
        if count == 0 {
            return Err(bad("observation count must be positive"));
        }
        let mut cone = MappedCone::new(Point2::new(x, y), color);
        cone.observation_count = count;
        cone.votes[color_index(color)] = count;
        map.cones.push(cone);
    }
    let m: usize = rows[n].strip_prefix("trail").ok_or_else(|| bad("expected `trail`"))?.trim().parse().map_err(|_| bad("trail count"))?;
    if rows.len() != n + 1 + m {
        return Err(bad("trail length mismatch"));
    }
    for row in &rows[n + 1..] {
        let f: Vec<f64> = row.split(',').map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("trail row"))?;
        if f.len() != 2 {
            return Err(bad("trail row"));
        }
        map.trail.push(Point2::new(f[0], f[1]));
    }
    Ok(map)
}

pub fn write_map(path: &Path, map: &TrackMap) -> Result<()> {
    std::fs::write(path, map_to_string(map))?;
    Ok(())
}

pub fn read_map(path: &Path) -> Result<TrackMap> {
    parse_map(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use approx::assert_abs_diff_eq;

    fn cand(x: f64, z: f64) -> ConeCandidate {
        ConeCandidate { position: Point3::new(x, 0.0, z), extent: 0.2, height: 0.3, point_count: 10 }
    }

    #[test]
    fn insertion_and_merging() {
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        insert_observations(&mut map, &[(cand(5.0, -2.0), ConeColor::Red), (cand(5.0, 2.0), ConeColor::Blue)], &PoseTransform::IDENTITY);
        assert_eq!(map.cones.len(), 2);
        assert_eq!(map.cones[0].position, Point2::new(5.0, 2.0));
        insert_world(&mut map, Point2::new(5.0, 2.0), ConeColor::Red);
        assert_eq!(map.cones[0].observation_count, 2);
        assert_eq!(map.cones[0].position, Point2::new(5.0, 2.0));
        let mut m2 = TrackMap::new(PoseTransform::IDENTITY);
        insert_world(&mut m2, Point2::new(1.1, 0.0), ConeColor::Blue);
        insert_world(&mut m2, Point2::new(0.9, 0.0), ConeColor::Blue);
        assert_eq!(m2.cones.len(), 1);
        assert_abs_diff_eq!(m2.cones[0].position.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn colour_votes_ignore_unknown() {
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        insert_world(&mut map, Point2::zeros(), ConeColor::Unknown);
        assert_eq!(map.cones[0].color, ConeColor::Unknown);
        insert_world(&mut map, Point2::zeros(), ConeColor::Blue);
        insert_world(&mut map, Point2::zeros(), ConeColor::Unknown);
        assert_eq!(map.cones[0].color, ConeColor::Blue);
    }

    #[test]
    fn coefficient_terms() {
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        insert_world(&mut map, Point2::new(2.0, 2.0), ConeColor::Red);
        let cfg = LoopClosureConfig::default();
        let c = loop_closure_coefficient(&map, &[Point2::new(2.0, 2.0)], 0.1, 0.1, &Point2::zeros(), &Point2::zeros(), &cfg);
        assert_eq!(c, 0.0);
        let only_d = LoopClosureConfig { w_c: 0.0, w_h: 0.0, w_d: 1.0, ..cfg };
        let c = loop_closure_coefficient(&map, &[], 1.0, 0.0, &Point2::new(3.0, 0.0), &Point2::zeros(), &only_d);
        assert_abs_diff_eq!(c, 3.0, epsilon = 1e-12);
        // heading difference wraps
        let only_h = LoopClosureConfig { w_c: 0.0, w_h: 1.0, w_d: 0.0, ..cfg };
        let c = loop_closure_coefficient(&map, &[], 3.1, -3.1, &Point2::zeros(), &Point2::zeros(), &only_h);
        assert_abs_diff_eq!(c, std::f64::consts::TAU - 6.2, epsilon = 1e-12);
    }

    #[test]
    fn coefficient_is_monotone_in_weights() {
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        insert_world(&mut map, Point2::new(2.0, 2.0), ConeColor::Red);
        let det = [Point2::new(2.5, 2.0)];
        let base = LoopClosureConfig::default();
        let f = |c: &LoopClosureConfig| loop_closure_coefficient(&map, &det, 0.4, 0.0, &Point2::new(1.0, 1.0), &Point2::zeros(), c);
        let c0 = f(&base);
        assert!(c0 > 0.0);
        assert!(f(&LoopClosureConfig { w_c: 1.0, ..base }) >= c0);
        assert!(f(&LoopClosureConfig { w_h: 2.0, ..base }) >= c0);
        assert!(f(&LoopClosureConfig { w_d: 2.0, ..base }) >= c0);
    }

    #[test]
    fn detection_needs_arming_and_fires_once() {
        let cfg = LoopClosureConfig::default();
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        map.record_position(Point2::zeros());
        assert!(!detect_loop(&mut map, &[], 0.0, &Point2::zeros(), &cfg));
        // drive a 20 m square loop back to the start
        let corners = [(5.0, 0.0), (5.0, 5.0), (0.0, 5.0), (0.0, 0.0)];
        let mut fired = 0;
        let mut here = Point2::zeros();
        for (x, y) in corners {
            let target = Point2::new(x, y);
            for k in 1..=50 {
                let p = here + (target - here) * (k as f64 / 50.0);
                map.record_position(p);
                if detect_loop(&mut map, &[], 0.0, &p, &cfg) {
                    fired += 1;
                }
            }
            here = target;
        }
        assert_eq!(fired, 1);
        assert!(map.closed);
        assert_eq!(map.lap_count, 1);
    }

    #[test]
    fn straight_path_never_closes() {
        let cfg = LoopClosureConfig::default();
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        for k in 0..500 {
            let p = Point2::new(k as f64 * 0.2, 0.0);
            map.record_position(p);
            assert!(!detect_loop(&mut map, &[], 0.0, &p, &cfg));
        }
    }

    #[test]
    fn single_pair_midpoint() {
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        insert_world(&mut map, Point2::new(0.0, 2.5), ConeColor::Red);
        insert_world(&mut map, Point2::new(0.0, -2.5), ConeColor::Blue);
        let (mids, unpaired) = pair_midpoints(&map);
        assert_eq!(mids, vec![Point2::zeros()]);
        assert!(unpaired.is_empty());
        assert!(matches!(extract_midline(&map), Err(Error::InsufficientMap(_))));
    }

    #[test]
    fn straight_rows_give_centred_midline() {
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        for k in 0..6 {
            insert_world(&mut map, Point2::new(k as f64 * 5.0, 2.5), ConeColor::Red);
            insert_world(&mut map, Point2::new(k as f64 * 5.0, -2.5), ConeColor::Blue);
        }
        insert_world(&mut map, Point2::new(60.0, 30.0), ConeColor::Red);
        let mid = extract_midline(&map).unwrap();
        assert_eq!(mid.len(), 6);
        for (k, m) in mid.iter().enumerate() {
            assert_abs_diff_eq!(m.y, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.x, k as f64 * 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_rows_with_trail() {
        let mut map = TrackMap::new(PoseTransform::IDENTITY);
        let n = 30;
        for k in 0..n {
            let a = k as f64 / n as f64 * std::f64::consts::TAU;
            let dir = Point2::new(a.cos(), a.sin());
            // counter-clockwise travel: left is inside
            insert_world(&mut map, dir * 18.0, ConeColor::Red);
            insert_world(&mut map, dir * 22.0, ConeColor::Blue);
        }
        for k in 0..=200 {
            let a = k as f64 / 200.0 * std::f64::consts::TAU;
            map.record_position(Point2::new(20.0 * a.cos(), 20.0 * a.sin()));
        }
        let mid = extract_midline(&map).unwrap();
        assert_eq!(mid.len(), n);
        for (k, m) in mid.iter().enumerate() {
            assert_abs_diff_eq!(m.norm(), 20.0, epsilon = 1e-9);
            let a = m.y.atan2(m.x).rem_euclid(std::f64::consts::TAU);
            assert_abs_diff_eq!(a, k as f64 / n as f64 * std::f64::consts::TAU, epsilon = 1e-9);
        }
    }

    #[test]
    fn map_file_round_trip() {
        let mut map = TrackMap::new(PoseTransform::from_planar(1.0, 2.0, 0.3, 0.0));
        insert_world(&mut map, Point2::new(0.5, 2.5), ConeColor::Yellow);
        insert_world(&mut map, Point2::new(0.5, 2.5), ConeColor::Yellow);
        insert_world(&mut map, Point2::new(-3.0, 1.0), ConeColor::Blue);
        map.record_position(Point2::new(0.1, 0.2));
        map.closed = true;
        map.lap_count = 1;
        let back = parse_map(&map_to_string(&map)).unwrap();
        assert_eq!(back.cones.len(), 2);
        assert_eq!(back.cones[0].observation_count, 2);
        assert_eq!(back.cones[1].color, ConeColor::Blue);
        assert_eq!(back.trail, map.trail);
        assert_eq!((back.closed, back.lap_count), (true, 1));
        let (a, b) = (back.start_pose.planar(), map.start_pose.planar());
        assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.2, b.2, epsilon = 1e-12);
        assert!(parse_map("# conetrack-trackmap v2\n").is_err());
    }
}
