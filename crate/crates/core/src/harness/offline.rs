//! Offline tools: world files for a generated track and cone detection on
//! recorded scans.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::Path;

use super::config::RunConfig;
use crate::detection::{euclidean_cluster, filter_cone_sized, ConeCandidate, ConeWindow};
use crate::error::Result;
use crate::geometry::{Point2, Point3, PoseTransform};
use crate::ground::{ransac_fit_with, RansacConfig};
use crate::odometry::{write_scan, LaserScan};
use crate::planning::{sample_waypoints, write_waypoints};
use crate::rng::{derive_seed, tag};
use crate::sim::{generate_track, simulate_lidar, truth_track_map, WorldGroundTruth};
use crate::track_map::write_map;

pub const CONES_HEADER: &str = "# conetrack-cones v1";
pub const DETECTIONS_HEADER: &str = "# conetrack-detections v1";

/// Cone-sized clusters above the ground plane, sensor frame. The cluster
/// centroid sits on the visible face, so it is pushed back along the ray by
/// the mean depth of a cylinder's front arc.
pub fn detect_cone_candidates(scan: &LaserScan, cone_radius: f64, seed: u64) -> Vec<ConeCandidate> {
    let cloud = scan.to_points();
    let Ok(seg) = ransac_fit_with(&cloud, &RansacConfig::default(), seed) else {
        return Vec::new();
    };
    let obstacles: Vec<Point3> = seg.obstacle_indices.iter().map(|&i| cloud[i]).collect();
    if obstacles.is_empty() {
        return Vec::new();
    }
    let clusters = euclidean_cluster(&obstacles, 0.35, 2);
    let mut cands = filter_cone_sized(&clusters, &ConeWindow::default(), &seg.model);
    for c in &mut cands {
        let ray = Point2::new(c.position.x, c.position.z);
        let n = ray.norm();
        if n > 1e-9 {
            let push = ray * (cone_radius * FRAC_PI_4 / n);
            c.position.x += push.x;
            c.position.z += push.y;
        }
    }
    cands
}

pub fn cones_to_string(world: &WorldGroundTruth) -> String {
    let mut out = format!("{CONES_HEADER}\nx,y,color\n");
    for c in &world.cones {
        let _ = writeln!(out, "{:.4},{:.4},{}", c.position.x, c.position.y, c.color.as_str());
    }
    out
}

/// Generate the configured world and write `cones.csv`, `centerline.txt`,
/// `map.txt` and, when `scans > 0`, that many lidar scans taken at even
/// spacing along the centre line under `scans/`.
pub fn generate_track_files(cfg: &RunConfig, dir: &Path, scans: usize) -> Result<WorldGroundTruth> {
    cfg.validate()?;
    let world = generate_track(&cfg.track.spec(cfg.seed)?)?;
    let height = cfg.sensors.lidar.mount_height;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("cones.csv"), cones_to_string(&world))?;
    let wps = sample_waypoints(&world.centerline, 0.5)?;
    write_waypoints(&dir.join("centerline.txt"), &wps, true)?;
    write_map(&dir.join("map.txt"), &truth_track_map(&world, height))?;
    if scans > 0 {
        let scan_dir = dir.join("scans");
        std::fs::create_dir_all(&scan_dir)?;
        let len = world.centerline.length();
        for k in 0..scans {
            let s = len * k as f64 / scans as f64;
            let c = world.centerline.sample_at(s);
            let pose = PoseTransform::from_planar(c.position.x, c.position.y, c.heading(), height);
            let mut scan = simulate_lidar(&pose, &world, &cfg.sensors.lidar, derive_seed(cfg.seed, tag::LIDAR, k as u64));
            scan.timestamp = k as f64;
            write_scan(&scan_dir.join(format!("scan_{k:04}.txt")), &scan)?;
        }
    }
    Ok(world)
}

/// Cone candidates for each named scan, one CSV row per candidate in the
/// sensor frame.
pub fn perception_to_string(scans: &[(String, LaserScan)], cone_radius: f64, seed: u64) -> String {
    let mut out = format!("{DETECTIONS_HEADER}\nscan,t,x,y,z,extent,height,points\n");
    for (k, (name, scan)) in scans.iter().enumerate() {
        for c in detect_cone_candidates(scan, cone_radius, derive_seed(seed, tag::LIDAR ^ 1, k as u64)) {
            let _ = writeln!(
                out,
                "{name},{:.3},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
                scan.timestamp, c.position.x, c.position.y, c.position.z, c.extent, c.height, c.point_count
            );
        }
    }
    out
}
