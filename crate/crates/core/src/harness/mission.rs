//! The closed-loop two-lap mission.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use super::config::{ControllerKind, RunConfig};
use super::offline::detect_cone_candidates;
use super::logs::{
    compute_metrics, parse_step_log, parse_truth_log, step_log_to_string, truth_log_to_string, MetricBlock, PoseSource,
    StepRecord, TruthRecord,
};
use crate::control::{
    lateral_acceleration, limit_command, pure_pursuit_on, ControlInput, MpcController, ReferenceHorizon, VehicleState,
    WaypointPath,
};
use crate::error::Result;
use crate::detection::ConeCandidate;
use crate::geometry::{to_plane, wrap_angle, Point2, PoseTransform};
use crate::mission::{mode_update, AsState, MissionEvent, MissionMode, Supervisor};
use crate::odometry::{fuse_pose, LidarOdometry, MatchConfig, OdometryEstimate};
use crate::planning::{build_trajectory, sample_waypoints, write_waypoints, Waypoint};
use crate::rng::{derive_seed, tag};
use crate::sim::{
    generate_track, patch_dataset, simulate_camera_patch, simulate_gps_ins, simulate_lidar, step_plant, PatchSubject,
    WorldGroundTruth,
};
use crate::track_map::{
    chain_forward, detect_loop, extract_midline, insert_observations, loop_closure_coefficient, pair_midpoints, write_map,
    TrackMap,
};
use crate::vision::{classify_color, hog_features, svm_predict, svm_train, ConeColor, LinearSvmModel};

pub const REPORT_HEADER: &str = "# conetrack-report v1";
pub const STEP_LOG_FILE: &str = "steps.csv";
pub const TRUTH_LOG_FILE: &str = "truth.csv";

/// Detections farther than this do not enter the loop-closure test.
const LOOP_DETECTION_RANGE: f64 = 12.0;
/// Look-ahead of the detection-drive planner.
const LOCAL_HORIZON: f64 = 22.0;
/// Longest gap bridged between consecutive midpoints.
const MAX_CHAIN_STEP: f64 = 12.0;
/// Fixes older than this count as a GPS outage.
/// Midpoints closer than this are treated as beside the vehicle.
const NEAR_MIDPOINT: f64 = 1.5;
const GPS_TIMEOUT: f64 = 0.25;
const STOPPED_SPEED: f64 = 0.05;
const TRAINING_PATCHES: usize = 400;

/// One firing of the loop detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopEvent {
    pub t: f64,
    /// Signed arc distance of the true position from the start line.
    pub distance_to_start: f64,
    pub coefficient: f64,
}

/// Loop-closure coefficient at one scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSample {
    pub t: f64,
    pub coefficient: f64,
    pub distance_to_start: f64,
    pub armed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionReport {
    pub seed: u64,
    pub controller: ControllerKind,
    pub track: String,
    pub completed: bool,
    pub cause: Option<String>,
    pub final_state: AsState,
    pub lap_count: u32,
    pub lap_times: Vec<f64>,
    pub boundary_violations: usize,
    pub loop_events: Vec<LoopEvent>,
    pub metrics: Option<MetricBlock>,
    /// Log file names, relative to the report.
    pub step_log: String,
    pub truth_log: String,
}

impl MissionReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "controller = {}", self.controller.as_str());
        let _ = writeln!(out, "track = {}", self.track);
        let _ = writeln!(out, "completed = {}", self.completed);
        let _ = writeln!(out, "cause = {}", self.cause.as_deref().unwrap_or("none"));
        let _ = writeln!(out, "final_state = {}", self.final_state);
        let _ = writeln!(out, "laps = {}", self.lap_count);
        let times: Vec<String> = self.lap_times.iter().map(|t| format!("{t:.3}")).collect();
        let _ = writeln!(out, "lap_times = {}", times.join(","));
        let _ = writeln!(out, "boundary_violations = {}", self.boundary_violations);
        for e in &self.loop_events {
            let _ = writeln!(
                out,
                "loop_event = t {:.3}, distance_to_start {:.3}, coefficient {:.4}",
                e.t, e.distance_to_start, e.coefficient
            );
        }
        match &self.metrics {
            Some(m) => {
                let _ = writeln!(out, "lateral_accel_std = {:.6}", m.lateral_accel_std);
                let _ = writeln!(out, "mean_lateral_error = {:.6}", m.mean_lateral_error);
                let _ = writeln!(out, "average_speed = {:.6}", m.average_speed);
                let _ = writeln!(out, "average_sideslip = {:.6}", m.average_sideslip);
            }
            None => out.push_str("metrics = none\n"),
        }
        let _ = writeln!(out, "step_log = {}", self.step_log);
        let _ = writeln!(out, "truth_log = {}", self.truth_log);
        out
    }
}

/// A finished mission with everything it logged.
#[derive(Debug, Clone)]
pub struct MissionRun {
    pub report: MissionReport,
    pub world: WorldGroundTruth,
    pub steps: Vec<StepRecord>,
    pub truth: Vec<TruthRecord>,
    pub loop_samples: Vec<LoopSample>,
    pub map: TrackMap,
    /// Closed path driven on the second lap.
    pub lap2_waypoints: Option<Vec<Waypoint>>,
    pub transitions: String,
}

/// Run the mission and return its report; files go to the configured
/// output directory, if any.
pub fn run_two_lap_mission(cfg: &RunConfig) -> Result<MissionReport> {
    let run = simulate_mission(cfg)?;
    if let Some(dir) = &cfg.output_dir {
        write_run(dir, cfg, &run)?;
    }
    Ok(run.report)
}

/// Write the report, logs, map and path of a run into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, run: &MissionRun) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    std::fs::write(dir.join("report.txt"), run.report.to_text())?;
    std::fs::write(dir.join(STEP_LOG_FILE), step_log_to_string(&run.steps))?;
    std::fs::write(dir.join(TRUTH_LOG_FILE), truth_log_to_string(&run.truth))?;
    std::fs::write(dir.join("transitions.txt"), &run.transitions)?;
    write_map(&dir.join("map.txt"), &run.map)?;
    if let Some(w) = &run.lap2_waypoints {
        write_waypoints(&dir.join("waypoints.txt"), w, true)?;
    }
    let mut loops = String::from("# conetrack-loops v1\nt,coefficient,distance_to_start,armed\n");
    for s in &run.loop_samples {
        let _ = writeln!(loops, "{:.3},{:.6},{:.3},{}", s.t, s.coefficient, s.distance_to_start, s.armed as u8);
    }
    std::fs::write(dir.join("loops.csv"), loops)?;
    Ok(())
}

/// Cone-coloured subject nearest a true world position, as the camera sees it.
fn subject_at(world: &WorldGroundTruth, p: &Point2) -> PatchSubject {
    let cone = world.cones.iter().map(|c| ((c.position - p).norm(), c.color)).min_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((d, color)) = cone {
        if d < 0.5 {
            return PatchSubject::Cone(color);
        }
    }
    for o in &world.obstacles {
        if (o.position - p).norm() < o.radius + 0.4 {
            return match o.kind {
                crate::sim::ObstacleKind::TyreStack => PatchSubject::TyreStack,
                crate::sim::ObstacleKind::LooseTyre => PatchSubject::LooseTyre,
            };
        }
    }
    for b in &world.barriers {
        let ab = b.b - b.a;
        let t = ((p - b.a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        if (b.a + ab * t - p).norm() < b.thickness + 0.5 {
            return PatchSubject::Barrier;
        }
    }
    PatchSubject::Ground
}

fn train_verifier(cfg: &RunConfig) -> Result<LinearSvmModel> {
    let data = patch_dataset(TRAINING_PATCHES, &cfg.sensors.camera, derive_seed(cfg.seed, tag::DATASET, 1));
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (patch, subject) in &data {
        let d = hog_features(patch)?;
        if subject.is_cone() {
            pos.push(d);
        } else {
            neg.push(d);
        }
    }
    let (model, _) = svm_train(&pos, &neg, 60, 0.1, 1e-4, derive_seed(cfg.seed, tag::DATASET, 2))?;
    Ok(model)
}

/// Open path through a chain of midpoints, extended at both ends so the
/// spline covers every chained point.
fn local_path(chain: &[Point2]) -> Option<WaypointPath> {
    if chain.len() < 2 {
        return None;
    }
    let n = chain.len();
    let d0 = (chain[1] - chain[0]).try_normalize(1e-9)?;
    let d1 = (chain[n - 1] - chain[n - 2]).try_normalize(1e-9)?;
    let mut pts = vec![chain[0] - d0 * 12.0, chain[0] - d0 * 6.0];
    pts.extend_from_slice(chain);
    pts.push(chain[n - 1] + d1 * 6.0);
    pts.push(chain[n - 1] + d1 * 12.0);
    let traj = build_trajectory(&pts, false).ok()?;
    let wps = sample_waypoints(&traj, 0.5).ok()?;
    WaypointPath::new(wps, false).ok()
}

/// Midpoints from a few metres behind the vehicle to the planning horizon.
fn local_chain(mids: &[Point2], here: Point2, heading: f64) -> Vec<Point2> {
    // a midpoint right beside the vehicle is neither ahead nor behind it;
    // chain both ways from that point so it is never dropped
    let near = mids
        .iter()
        .map(|m| (m, (m - here).norm()))
        .filter(|(_, d)| *d < NEAR_MIDPOINT)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(m, _)| *m);
    let origin = near.unwrap_or(here);
    let mut chain = chain_forward(mids, origin, wrap_angle(heading + PI), 7.0, MAX_CHAIN_STEP);
    chain.reverse();
    if chain.is_empty() {
        // nothing mapped behind yet (standing on the start line): the
        // vehicle itself anchors the start of the path
        chain.push(here);
    }
    let ahead = chain_forward(mids, origin, heading, LOCAL_HORIZON, MAX_CHAIN_STEP);
    chain.extend(ahead.into_iter().skip(usize::from(near.is_some())));
    chain
}

fn closed_path(map: &TrackMap) -> Result<(WaypointPath, Vec<Waypoint>)> {
    let mid = extract_midline(map)?;
    let traj = build_trajectory(&mid, true)?;
    let wps = sample_waypoints(&traj, 0.5)?;
    Ok((WaypointPath::new(wps.clone(), true)?, wps))
}

enum Tracker {
    Mpc(Box<MpcController>),
    Pursuit,
}

struct Plan {
    path: WaypointPath,
    hint: Option<usize>,
}

/// Speed allowed by the lateral-acceleration limit at curvature `k`.
fn corner_speed(target: f64, k: f64, a_lim: f64) -> f64 {
    if k.abs() < 1e-6 {
        target
    } else {
        target.min((a_lim / k.abs()).sqrt())
    }
}

/// Signed arc distance from the start line on a closed centre line.
fn arc_to_start(s: f64, length: f64) -> f64 {
    if s > 0.5 * length {
        s - length
    } else {
        s
    }
}

/// Run the mission in memory.
pub fn simulate_mission(cfg: &RunConfig) -> Result<MissionRun> {
    cfg.validate()?;
    let world = generate_track(&cfg.track.spec(cfg.seed)?)?;
    let params = cfg.vehicle;
    let dt = cfg.mpc.dt;
    let lidar_every = ((1.0 / (cfg.sensors.lidar.rate_hz * dt)).round() as usize).max(1);
    let height = cfg.sensors.lidar.mount_height;
    let half_width = 0.5 * world.width;

    let truth_path = WaypointPath::new(sample_waypoints(&world.centerline, 0.25)?, true)?;
    let track_length = truth_path.length();
    let mut truth_hint: Option<usize> = None;

    let verifier = train_verifier(cfg)?;
    let start_pose = world.start_pose(height);
    let mut truth = VehicleState { x: world.start_position.x, y: world.start_position.y, psi: world.start_heading, ..Default::default() };
    let mut est = (truth.x, truth.y, truth.psi);
    let mut map = TrackMap::new(start_pose);
    let mut odom = LidarOdometry::new(MatchConfig::default(), start_pose);

    let mut sup = Supervisor::new();
    sup.handle(0.0, MissionEvent::AsmsOn);
    sup.handle(0.0, MissionEvent::SystemChecksPassed);
    sup.handle(0.0, MissionEvent::GoSignal);
    let mut mode = MissionMode::DetectionDrive;

    let mut tracker = match cfg.controller {
        ControllerKind::Mpc => Tracker::Mpc(Box::new(MpcController::new(cfg.mpc, params)?)),
        ControllerKind::PurePursuit => Tracker::Pursuit,
    };
    let mut plan: Option<Plan> = None;
    let mut lap_path: Option<WaypointPath> = None;
    let mut lap2_waypoints = None;

    let mut steps = Vec::new();
    let mut truth_log = Vec::new();
    let mut loop_samples = Vec::new();
    let mut loop_events = Vec::new();
    let mut lap_times = Vec::new();
    let mut lap_start = 0.0;
    let mut stopping = false;
    let mut cause: Option<String> = None;
    let mut violations = 0;
    let mut last_gps = 0.0;
    let mut reported_loss = false;
    let mut source = PoseSource::Fused;

    let mut step: u64 = 0;
    loop {
        let t = step as f64 * dt;
        if let Some(te) = cfg.estop_at {
            if t >= te {
                sup.handle(t, MissionEvent::EStop);
                cause = Some(format!("emergency stop at {t:.2} s"));
                break;
            }
        }
        if t > cfg.max_time {
            sup.handle(t, MissionEvent::SubsystemFailure);
            cause = Some(format!("time limit of {:.0} s reached", cfg.max_time));
            break;
        }
        let tracking = mode == MissionMode::TrackingDrive;
        let truth_pose = PoseTransform::from_planar(truth.x, truth.y, truth.psi, height);

        // GPS fix at the control rate
        let mut gps_cfg = cfg.sensors.gps;
        if tracking {
            gps_cfg.dropout = gps_cfg.dropout.max(cfg.lap2_gps_dropout);
        }
        let gps = simulate_gps_ins(&truth, &gps_cfg, height, derive_seed(cfg.seed, tag::GPS, step));
        if gps.is_some() {
            last_gps = t;
        }
        let gps_ok = t - last_gps <= GPS_TIMEOUT;
        if tracking {
            if let Some(g) = &gps {
                // GPS-primary: each fix corrects the dead-reckoned pose
                let predicted = OdometryEstimate {
                    pose: PoseTransform::from_planar(est.0, est.1, est.2, height),
                    residual: 0.0,
                    correspondences: 0,
                    converged: true,
                };
                est = fuse_pose(Some(&predicted), Some(g), cfg.gps_gain)?.pose.planar();
                source = PoseSource::Gps;
            }
            if !gps_ok && !reported_loss {
                reported_loss = true;
                sup.handle(t, MissionEvent::LocalizationLost);
            }
        }

        if step.is_multiple_of(lidar_every as u64) {
            let scan = simulate_lidar(&truth_pose, &world, &cfg.sensors.lidar, derive_seed(cfg.seed, tag::LIDAR, step));
            let odo = odom.process(&scan, None).ok();
            if !tracking {
                if let Ok(f) = fuse_pose(odo.as_ref(), gps.as_ref(), cfg.fusion_alpha) {
                    est = f.pose.planar();
                    odom.set_pose(f.pose);
                    source = if f.gps_weight == 0.0 {
                        PoseSource::Lidar
                    } else if f.lidar_weight == 0.0 {
                        PoseSource::Gps
                    } else {
                        PoseSource::Fused
                    };
                }
            } else if gps_ok {
                odom.set_pose(PoseTransform::from_planar(est.0, est.1, est.2, height));
            } else if let Some(o) = &odo {
                est = o.pose.planar();
                source = PoseSource::Lidar;
            }

            // perception: lidar clusters verified and coloured by the camera
            let est_pose = PoseTransform::from_planar(est.0, est.1, est.2, height);
            let cands = detect_cone_candidates(&scan, world.cone_radius, derive_seed(cfg.seed, tag::LIDAR ^ 1, step));
            let mut accepted: Vec<(ConeCandidate, ConeColor)> = Vec::new();
            for (k, c) in cands.iter().enumerate() {
                let true_world = to_plane(&truth_pose.apply(&c.position));
                let subject = subject_at(&world, &true_world);
                let cam_seed = derive_seed(cfg.seed, tag::CAMERA, step * 256 + k as u64);
                let Ok(patch) = simulate_camera_patch(&true_world, subject, truth_pose.planar(), &cfg.sensors.camera, cam_seed)
                else {
                    continue;
                };
                let (is_cone, _) = svm_predict(&verifier, &hog_features(&patch)?)?;
                if !is_cone {
                    continue;
                }
                let color = classify_color(&patch, cam_seed);
                if color != ConeColor::Unknown {
                    accepted.push((*c, color));
                }
            }
            let detected: Vec<Point2> = accepted
                .iter()
                .filter(|(c, _)| Point2::new(c.position.x, c.position.z).norm() <= LOOP_DETECTION_RANGE)
                .map(|(c, _)| to_plane(&est_pose.apply(&c.position)))
                .collect();

            if tracking && !gps_ok {
                // pull the drifting odometry pose onto the lap-1 map
                let mut shift = Point2::zeros();
                let mut matched = 0;
                for d in &detected {
                    if let Some((i, dist)) = map.nearest(d) {
                        if dist < 1.0 {
                            shift += map.cones[i].position - d;
                            matched += 1;
                        }
                    }
                }
                if matched >= 3 {
                    let s = shift * (0.5 / matched as f64);
                    est.0 += s.x;
                    est.1 += s.y;
                    odom.set_pose(PoseTransform::from_planar(est.0, est.1, est.2, height));
                }
            }

            let here = Point2::new(est.0, est.1);
            map.record_position(here);
            let (sx, sy, spsi) = map.start_pose.planar();
            let coefficient =
                loop_closure_coefficient(&map, &detected, est.2, spsi, &here, &Point2::new(sx, sy), &cfg.loop_closure);
            let armed = map.travelled_since_detection() >= cfg.loop_closure.arming_distance;
            let truth_proj = truth_path.project(&Point2::new(truth.x, truth.y), truth_hint, 40);
            let to_start = arc_to_start(truth_proj.s, track_length);
            loop_samples.push(LoopSample { t, coefficient, distance_to_start: to_start, armed });

            if !stopping && detect_loop(&mut map, &detected, est.2, &here, &cfg.loop_closure) {
                loop_events.push(LoopEvent { t, distance_to_start: to_start, coefficient });
                lap_times.push(t - lap_start);
                lap_start = t;
                sup.handle(t, MissionEvent::LapLoopDetected);
                if mode == MissionMode::DetectionDrive {
                    mode = mode_update(mode, true);
                    match closed_path(&map) {
                        Ok((path, wps)) => {
                            lap_path = Some(path);
                            lap2_waypoints = Some(wps);
                            plan = None;
                            if let Tracker::Mpc(m) = &mut tracker {
                                m.reset();
                            }
                        }
                        Err(e) => {
                            sup.handle(t, MissionEvent::SubsystemFailure);
                            cause = Some(format!("no lap path: {e}"));
                            break;
                        }
                    }
                } else {
                    stopping = true;
                }
            }
            if mode == MissionMode::DetectionDrive {
                insert_observations(&mut map, &accepted, &est_pose);
            }

            let tracking = mode == MissionMode::TrackingDrive;
            if !tracking || !gps_ok {
                // detection-drive planner: the local midline ahead
                let (mids, _) = pair_midpoints(&map);
                let chain = local_chain(&mids, here, est.2);
                if let Some(path) = local_path(&chain) {
                    plan = Some(Plan { path, hint: None });
                }
            } else if let Some(p) = &lap_path {
                if plan.as_ref().is_none_or(|pl| !pl.path.is_closed()) {
                    plan = Some(Plan { path: p.clone(), hint: None });
                }
            }
        }

        // truth bookkeeping
        let truth_proj = truth_path.project(&Point2::new(truth.x, truth.y), truth_hint, 40);
        truth_hint = Some(truth_proj.index);
        if truth_proj.lateral.abs() > half_width {
            violations += 1;
            sup.handle(t, MissionEvent::SubsystemFailure);
            cause = Some(format!("boundary violation at {t:.2} s ({:.2} m off centre)", truth_proj.lateral));
            break;
        }

        // control
        let lap_speed = if mode == MissionMode::TrackingDrive { cfg.lap1_speed * cfg.lap2_factor } else { cfg.lap1_speed };
        let mut state = VehicleState { x: est.0, y: est.1, psi: est.2, ..truth };
        let (command, cost, iterations) = match plan.as_mut() {
            None => {
                // no path yet: brake, or hold still without winding up the brake
                let a = if truth.u > STOPPED_SPEED { -params.a_max } else { 0.0 };
                (limit_command(&ControlInput::new(0.0, (a - truth.ax) / dt), &truth, &params, dt), 0.0, 0)
            }
            Some(pl) => {
                let proj = pl.path.project(&Point2::new(state.x, state.y), pl.hint, 25);
                pl.hint = Some(proj.index);
                state.ey = proj.lateral;
                state.epsi = wrap_angle(state.psi - proj.heading);
                let target_at = |s: f64| {
                    if stopping {
                        0.0
                    } else {
                        corner_speed(lap_speed, pl.path.at(s).2, cfg.lateral_accel_limit)
                    }
                };
                match &mut tracker {
                    Tracker::Mpc(mpc) => {
                        let n = mpc.config.horizon;
                        let mut curvature = Vec::with_capacity(n);
                        let mut speed = Vec::with_capacity(n);
                        let mut s = proj.s;
                        let mut u = state.u;
                        for _ in 0..n {
                            let v = target_at(s);
                            u += (v - u).clamp(-params.a_max * dt, params.a_max * dt);
                            s += u.max(0.5) * dt;
                            curvature.push(pl.path.at(s).2);
                            speed.push(target_at(s));
                        }
                        let sol = mpc.step(&state, &ReferenceHorizon { curvature, speed })?;
                        (sol.command, sol.cost, sol.iterations)
                    }
                    Tracker::Pursuit => {
                        let delta = pure_pursuit_on(&state, &pl.path, cfg.pursuit.lookahead, &params, pl.hint)?;
                        let zeta = (delta - state.delta) / cfg.pursuit.steer_time_constant;
                        let v = target_at(proj.s + cfg.pursuit.lookahead);
                        let a = (cfg.speed_gain * (v - state.u)).clamp(-params.a_max, params.a_max);
                        let jerk = (a - state.ax) / dt;
                        (limit_command(&ControlInput::new(zeta, jerk), &truth, &params, dt), 0.0, 0)
                    }
                }
            }
        };

        let ay = lateral_acceleration(&truth, &command, &params);
        truth_log.push(TruthRecord {
            t,
            x: truth.x,
            y: truth.y,
            psi: truth.psi,
            u: truth.u,
            v: truth.v,
            r: truth.r,
            delta: truth.delta,
            ay,
            lateral: truth_proj.lateral,
            s: truth_proj.s,
        });
        steps.push(StepRecord {
            t,
            x: state.x,
            y: state.y,
            psi: state.psi,
            u: state.u,
            v: state.v,
            r: state.r,
            delta: state.delta,
            ax: state.ax,
            zeta: command.zeta,
            jerk: command.jerk,
            ey: state.ey,
            cost,
            iterations,
            mode: (mode == MissionMode::TrackingDrive) as u8,
            lap: map.lap_count,
            source,
        });

        if stopping && truth.u < STOPPED_SPEED {
            sup.handle(t, MissionEvent::MissionComplete);
            break;
        }

        let before = truth;
        truth = step_plant(&truth, &command, dt, &params, &cfg.plant, derive_seed(cfg.seed, tag::PLANT, step));
        // dead reckoning on wheel speed and yaw rate until the next fix
        let (u, v, r) = (0.5 * (before.u + truth.u), 0.5 * (before.v + truth.v), 0.5 * (before.r + truth.r));
        let mid_psi = est.2 + 0.5 * r * dt;
        est.0 += (u * mid_psi.cos() - v * mid_psi.sin()) * dt;
        est.1 += (u * mid_psi.sin() + v * mid_psi.cos()) * dt;
        est.2 = wrap_angle(est.2 + r * dt);
        step += 1;
    }

    // metrics from the logs as written, so files and report agree
    let steps = parse_step_log(&step_log_to_string(&steps))?;
    let truth_log = parse_truth_log(&truth_log_to_string(&truth_log))?;
    let completed = sup.state() == AsState::Finished;
    let metrics = compute_metrics(&steps, &truth_log).ok();
    let report = MissionReport {
        seed: cfg.seed,
        controller: cfg.controller,
        track: cfg.track.describe(),
        completed,
        cause: if completed { None } else { cause.or_else(|| Some("mission did not finish".into())) },
        final_state: sup.state(),
        lap_count: map.lap_count,
        lap_times,
        boundary_violations: violations,
        loop_events,
        metrics,
        step_log: STEP_LOG_FILE.into(),
        truth_log: TRUTH_LOG_FILE.into(),
    };
    Ok(MissionRun {
        report,
        world,
        steps,
        truth: truth_log,
        loop_samples,
        map,
        lap2_waypoints,
        transitions: sup.log_text(),
    })
}
