//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary so the lines come out in order and uncaptured.
//! Criteria listed in `KNOWN_UNMET` are reported as FAIL but do not fail
//! the run; any other failure, or a known one that starts passing, does.

use std::time::Instant;

use conetrack::control::{
    linearize, model_derivative, ControlInput, InputVector, MpcConfig, MpcProblem, ReferenceHorizon, StateVector,
    VehicleParams, VehicleState, INPUT_DIM, STATE_DIM,
};
use conetrack::geometry::{compose, Point2, Point3, PoseTransform};
use conetrack::ground::{ransac_fit, PlaneModel, RoiBox};
use conetrack::harness::{simulate_mission, ControllerKind, MissionRun, RunConfig};
use conetrack::mission::{transition, AsState, MissionEvent};
use conetrack::odometry::{extract_features_with, match_features, FeatureConfig, LidarOdometry, MatchConfig};
use conetrack::planning::{build_trajectory, evaluate, fit_segment, sample_waypoints};
use conetrack::sim::{generate_track, patch_dataset, simulate_lidar, CameraConfig, LidarConfig, PatchSubject, TrackSpec};
use conetrack::vision::{classify_color, hog_features, svm_predict, svm_train, ConeColor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Criteria that this build does not meet; see the README.
const KNOWN_UNMET: &[u32] = &[1];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Missions {
    mpc: MissionRun,
    pursuit: MissionRun,
    mpc_again: MissionRun,
    seconds: [f64; 3],
}

fn run_missions() -> Missions {
    let timed = |kind: ControllerKind| {
        let cfg = RunConfig { controller: kind, ..RunConfig::default() };
        let t = Instant::now();
        let run = simulate_mission(&cfg).expect("mission runs");
        (run, t.elapsed().as_secs_f64())
    };
    let (mpc, a) = timed(ControllerKind::Mpc);
    let (pursuit, b) = timed(ControllerKind::PurePursuit);
    let (mpc_again, c) = timed(ControllerKind::Mpc);
    Missions { mpc, pursuit, mpc_again, seconds: [a, b, c] }
}

fn controller_comparison(m: &Missions) -> Outcome {
    let (Some(a), Some(b)) = (m.mpc.report.metrics, m.pursuit.report.metrics) else {
        return outcome(false, "a run produced no metrics".into());
    };
    let ratio = a.mean_lateral_error / b.mean_lateral_error;
    let error_ok = ratio <= 0.6;
    let speed_ok = a.average_speed >= b.average_speed;
    let accel_ok = a.lateral_accel_std <= b.lateral_accel_std;
    let slowest = m.seconds.iter().copied().fold(0.0, f64::max);
    let time_ok = slowest <= 60.0;
    outcome(
        error_ok && speed_ok && accel_ok && time_ok,
        format!(
            "lateral error {:.4} vs {:.4} (ratio {ratio:.3} {}), speed {:.3} vs {:.3} ({}), ay std {:.4} vs {:.4} ({}), slowest mission {slowest:.1} s ({})",
            a.mean_lateral_error,
            b.mean_lateral_error,
            mark(error_ok),
            a.average_speed,
            b.average_speed,
            mark(speed_ok),
            a.lateral_accel_std,
            b.lateral_accel_std,
            mark(accel_ok),
            mark(time_ok),
        ),
    )
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "NOT MET"
    }
}

/// Tilted ground at height 0.3 plus cone-shaped outlier clusters.
fn ground_cloud(rng: &mut ChaCha8Rng, truth: &PlaneModel) -> (Vec<Point3>, usize) {
    let total = 30_000;
    let cones = total / 10;
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut cloud = Vec::with_capacity(total);
    for _ in 0..total - cones {
        let (x, z) = (rng.random_range(0.0..20.0), rng.random_range(-6.0..6.0));
        cloud.push(Point3::new(x, truth.height_at(x, z) + noise.sample(rng), z));
    }
    let per_cone = cones / 20;
    for _ in 0..20 {
        let (cx, cz) = (rng.random_range(2.0..19.0), rng.random_range(-5.0..5.0));
        for _ in 0..per_cone {
            let up = rng.random_range(0.06..0.3);
            let r = 0.12 * (1.0 - up / 0.3) + 0.01;
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let (x, z) = (cx + r * a.cos(), cz + r * a.sin());
            cloud.push(Point3::new(x, truth.height_at(x, z) + up, z));
        }
    }
    let ground = total - cones;
    (cloud, ground)
}

fn ransac_recovery() -> Outcome {
    let mut worst_param: f64 = 0.0;
    let mut worst_recall: f64 = 1.0;
    let mut failures = 0;
    for rep in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + rep);
        let pitch = rng.random_range(-5f64..5.0).to_radians();
        let roll = rng.random_range(-5f64..5.0).to_radians();
        let truth = PlaneModel::new(pitch.tan(), roll.tan(), 0.3);
        let (cloud, ground) = ground_cloud(&mut rng, &truth);
        let fit = ransac_fit(&cloud, &RoiBox::default(), 0.05, 100, rep).expect("fit");
        let err = (fit.model.a - truth.a).abs().max((fit.model.b - truth.b).abs()).max((fit.model.h - truth.h).abs());
        let recalled = fit.ground_indices.iter().filter(|&&i| i < ground).count();
        let recall = recalled as f64 / ground as f64;
        worst_param = worst_param.max(err);
        worst_recall = worst_recall.min(recall);
        if err > 0.01 || recall < 0.99 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("50 repetitions, {failures} failed; worst parameter error {worst_param:.2e}, worst recall {worst_recall:.4}"),
    )
}

fn track_pose(world: &conetrack::sim::WorldGroundTruth, s: f64, lateral: f64, yaw: f64) -> PoseTransform {
    let c = world.centerline.sample_at(s);
    let t = c.heading();
    let p = c.position + Point2::new(-t.sin(), t.cos()) * lateral;
    PoseTransform::from_planar(p.x, p.y, t + yaw, 0.5)
}

fn odometry_accuracy() -> Outcome {
    let world = generate_track(&TrackSpec::reference(3)).unwrap();
    // single step, noise-free returns
    let clean = LidarConfig { range_sigma: 0.0, ..LidarConfig::default() };
    let match_cfg = MatchConfig::default();
    let reference_cfg = FeatureConfig { max_edges_per_sector: 40, max_planars_per_sector: 40, ..FeatureConfig::default() };
    let (mut step_t, mut step_r): (f64, f64) = (0.0, 0.0);
    for (k, s) in [12.0, 60.0, 110.0, 170.0].into_iter().enumerate() {
        let a = track_pose(&world, s, 0.2, 0.0);
        let b = track_pose(&world, s + 0.35, 0.25, 0.012);
        let prev = extract_features_with(&simulate_lidar(&a, &world, &clean, k as u64), &reference_cfg).unwrap();
        let curr =
            extract_features_with(&simulate_lidar(&b, &world, &clean, 100 + k as u64), &match_cfg.features).unwrap();
        let est = match match_features(&prev, &curr, &PoseTransform::IDENTITY, &match_cfg) {
            Ok(e) => e,
            Err(e) => return outcome(false, format!("single step at s = {s}: {e}")),
        };
        let truth = compose(&a.inverse(), &b);
        step_t = step_t.max((est.pose.translation - truth.translation).norm());
        step_r = step_r.max(compose(&est.pose.inverse(), &truth).rotation().to_rotation_vector().norm());
    }
    // one noisy lap
    let cfg = LidarConfig::default();
    let start = track_pose(&world, 0.0, 0.0, 0.0);
    let mut odo = LidarOdometry::new(match_cfg, start);
    let step = 0.3;
    let n = (world.centerline.length() / step) as usize;
    let (mut path, mut prev) = (0.0, start);
    for k in 0..=n {
        let truth = track_pose(&world, k as f64 * step, 0.3 * (k as f64 * 0.05).sin(), 0.02 * (k as f64 * 0.07).cos());
        path += (truth.translation - prev.translation).norm();
        prev = truth;
        let _ = odo.process(&simulate_lidar(&truth, &world, &cfg, k as u64), None);
    }
    let drift = (odo.pose().translation - prev.translation).norm();
    let ok = step_t <= 1e-3 && step_r <= 1e-3 && path >= 100.0 && drift <= 0.02 * path;
    outcome(
        ok,
        format!(
            "single step {step_t:.2e} m / {step_r:.2e} rad; drift {drift:.3} m over {path:.1} m ({:.2}%)",
            100.0 * drift / path
        ),
    )
}

fn spline_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    // interpolation: a wobbly closed loop and an open chain
    let mut worst_interp: f64 = 0.0;
    for closed in [true, false] {
        let n = 14;
        let pts: Vec<Point2> = (0..n)
            .map(|k| {
                let a = k as f64 / n as f64 * std::f64::consts::TAU;
                let r = 20.0 + rng.random_range(-3.0..3.0);
                if closed {
                    Point2::new(r * a.cos(), r * a.sin())
                } else {
                    Point2::new(4.0 * k as f64, rng.random_range(-2.0..2.0))
                }
            })
            .collect();
        let traj = build_trajectory(&pts, closed).unwrap();
        for i in 0..traj.span_count() {
            let p = traj.evaluate(i, 0.0).unwrap().position;
            worst_interp = worst_interp.max((p - pts[i]).norm());
            let q = traj.evaluate(i, 1.0).unwrap().position;
            worst_interp = worst_interp.max((q - pts[(i + 1) % n]).norm());
        }
    }
    // circle curvature
    let radius = 15.0;
    let circle: Vec<Point2> = (0..40)
        .map(|k| {
            let a = k as f64 / 40.0 * std::f64::consts::TAU;
            Point2::new(radius * a.cos(), radius * a.sin())
        })
        .collect();
    let wps = sample_waypoints(&build_trajectory(&circle, true).unwrap(), 0.25).unwrap();
    let worst_kappa = wps.iter().map(|w| (w.curvature * radius - 1.0).abs()).fold(0.0, f64::max);
    // analytic derivatives against central differences
    let mut worst_d: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..1000 {
        let p: [Point2; 4] = std::array::from_fn(|_| Point2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)));
        let u1 = rng.random_range(0.2..0.45);
        let u2 = rng.random_range(0.55..0.8);
        let Ok(seg) = fit_segment(p, u1, u2) else { continue };
        let u = rng.random_range(h..1.0 - h);
        let c = evaluate(&seg, u).unwrap();
        let (lo, hi) = (evaluate(&seg, u - h).unwrap(), evaluate(&seg, u + h).unwrap());
        let d1 = (hi.position - lo.position) / (2.0 * h);
        let d2 = (hi.d1 - lo.d1) / (2.0 * h);
        let rel = |a: Point2, b: Point2| (a - b).norm() / a.norm().max(1.0);
        worst_d = worst_d.max(rel(c.d1, d1)).max(rel(c.d2, d2));
    }
    let ok = worst_interp <= 1e-9 && worst_kappa <= 0.02 && worst_d <= 1e-4;
    outcome(
        ok,
        format!(
            "interpolation error {worst_interp:.1e}, circle curvature error {:.2}%, derivative error {worst_d:.1e}",
            100.0 * worst_kappa
        ),
    )
}

fn grid_minimum(problem: &MpcProblem, p: &VehicleParams) -> f64 {
    let levels = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut best = f64::INFINITY;
    for code in 0..5usize.pow(6) {
        let mut c = code;
        let seq: Vec<ControlInput> = (0..3)
            .map(|_| {
                let z = levels[c % 5] * p.zeta_max;
                let j = levels[(c / 5) % 5] * p.jerk_max;
                c /= 25;
                ControlInput::new(z, j)
            })
            .collect();
        best = best.min(problem.rollout_cost(&seq));
    }
    best
}

fn mpc_oracle() -> Outcome {
    let cfg = MpcConfig { horizon: 3, ..Default::default() };
    let p = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..20 {
        let s = VehicleState {
            u: rng.random_range(0.5..8.0),
            v: rng.random_range(-0.3..0.3),
            r: rng.random_range(-0.5..0.5),
            delta: rng.random_range(-0.3..0.3),
            ax: rng.random_range(-3.0..3.0),
            ey: rng.random_range(-1.0..1.0),
            epsi: rng.random_range(-0.3..0.3),
            ..Default::default()
        };
        let reference = ReferenceHorizon::constant(3, rng.random_range(-0.1..0.1), rng.random_range(1.0..7.0));
        let problem = MpcProblem::new(&s, &reference, &cfg, &p).unwrap();
        let (seq, _, _) = problem.solve(None);
        worst_gap = worst_gap.max(problem.rollout_cost(&seq) - grid_minimum(&problem, &p));
    }
    // dynamics Jacobians
    let mut worst_rel: f64 = 0.0;
    let h = 1e-6;
    for _ in 0..50 {
        let s = VehicleState {
            psi: rng.random_range(-3.0..3.0),
            u: rng.random_range(1.0..12.0),
            v: rng.random_range(-0.5..0.5),
            r: rng.random_range(-0.8..0.8),
            delta: rng.random_range(-0.35..0.35),
            ax: rng.random_range(-3.0..3.0),
            ey: rng.random_range(-1.0..1.0),
            epsi: rng.random_range(-0.3..0.3),
            ..Default::default()
        };
        let w = ControlInput::new(rng.random_range(-1.0..1.0), rng.random_range(-5.0..5.0));
        let kappa = rng.random_range(-0.1..0.1);
        let lin = linearize(&s, &w, kappa, &p);
        let f = |x: &StateVector, w: &InputVector| {
            model_derivative(&VehicleState::from_vector(x), &ControlInput::new(w[0], w[1]), kappa, &p)
        };
        let (x0, w0) = (s.to_vector(), w.to_vector());
        let rel = |an: f64, fd: f64| (an - fd).abs() / an.abs().max(1.0);
        for j in 0..STATE_DIM {
            let mut e = StateVector::zeros();
            e[j] = h;
            let col = (f(&(x0 + e), &w0) - f(&(x0 - e), &w0)) / (2.0 * h);
            for i in 0..STATE_DIM {
                worst_rel = worst_rel.max(rel(lin.a[(i, j)], col[i]));
            }
        }
        for j in 0..INPUT_DIM {
            let mut e = InputVector::zeros();
            e[j] = h;
            let col = (f(&x0, &(w0 + e)) - f(&x0, &(w0 - e))) / (2.0 * h);
            for i in 0..STATE_DIM {
                worst_rel = worst_rel.max(rel(lin.b[(i, j)], col[i]));
            }
        }
    }
    outcome(
        worst_gap <= 1e-6 && worst_rel <= 1e-5,
        format!("solver minus grid cost at most {worst_gap:.2e} over 20 states; Jacobian relative error {worst_rel:.1e}"),
    )
}

fn loop_closure(m: &Missions) -> Outcome {
    let run = &m.mpc;
    let threshold = RunConfig::default().loop_closure.threshold;
    let events = &run.report.loop_events;
    let far = events.iter().map(|e| e.distance_to_start.abs()).fold(0.0, f64::max);
    let mid_lap = run.loop_samples.iter().filter(|s| s.distance_to_start.abs() > 3.0);
    let lowest = mid_lap.map(|s| s.coefficient).fold(f64::INFINITY, f64::min);
    let ok = events.len() == 2 && far <= 3.0 && lowest > threshold;
    outcome(
        ok,
        format!(
            "{} detections, farthest {far:.2} m from the start line; lowest mid-lap coefficient {lowest:.3} (threshold {threshold})",
            events.len()
        ),
    )
}

fn vision() -> Outcome {
    let clean_cfg = CameraConfig { noise: 0.0, ..CameraConfig::default() };
    let data = patch_dataset(1000, &CameraConfig::default(), 31);
    let (train, test) = data.split_at(800);
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (patch, subject) in train {
        let d = hog_features(patch).unwrap();
        if subject.is_cone() {
            pos.push(d);
        } else {
            neg.push(d);
        }
    }
    let (model, _) = svm_train(&pos, &neg, 60, 0.1, 1e-4, 5).unwrap();
    let correct = test
        .iter()
        .filter(|(patch, subject)| svm_predict(&model, &hog_features(patch).unwrap()).unwrap().0 == subject.is_cone())
        .count();
    let accuracy = correct as f64 / test.len() as f64;

    let colour_rate = |cfg: &CameraConfig, seed: u64| {
        let cones: Vec<_> = patch_dataset(1000, cfg, seed)
            .into_iter()
            .filter_map(|(p, s)| match s {
                PatchSubject::Cone(c) => Some((p, c)),
                _ => None,
            })
            .collect();
        let right = cones.iter().enumerate().filter(|(k, (p, c))| classify_color(p, *k as u64) == *c).count();
        (right as f64 / cones.len() as f64, cones.len())
    };
    let (clean, n_clean) = colour_rate(&clean_cfg, 41);
    let (noisy, n_noisy) = colour_rate(&CameraConfig { noise: 0.05, ..CameraConfig::default() }, 42);
    let _ = ConeColor::Unknown;
    outcome(
        accuracy >= 0.95 && clean == 1.0 && noisy >= 0.95,
        format!(
            "held-out accuracy {:.1}% (200 patches); colour {:.1}% of {n_clean} noise-free cones, {:.1}% of {n_noisy} at sigma 0.05",
            100.0 * accuracy,
            100.0 * clean,
            100.0 * noisy
        ),
    )
}

/// The declared relation, rule by rule.
fn declared(s: AsState, e: MissionEvent) -> AsState {
    use AsState::*;
    use MissionEvent::*;
    match (s, e) {
        (Off, _) if e != SystemChecksPassed => Off,
        (Off, SystemChecksPassed) => Ready,
        (_, EStop | SubsystemFailure) => Emergency,
        (Ready, GoSignal) => Driving,
        (Driving, MissionComplete) => Finished,
        (Emergency | Finished, Reset) => Off,
        _ => s,
    }
}

fn state_machine() -> Outcome {
    let mut mismatches = Vec::new();
    for s in AsState::ALL {
        for e in MissionEvent::ALL {
            if transition(s, e) != declared(s, e) {
                mismatches.push(format!("({s}, {e})"));
            }
        }
    }
    // from every state, Emergency is reachable, and one EStop suffices
    // from every active state
    let mut unreachable = Vec::new();
    for s in AsState::ALL {
        let mut seen = vec![s];
        let mut frontier = vec![s];
        while let Some(x) = frontier.pop() {
            for e in MissionEvent::ALL {
                let y = transition(x, e);
                if !seen.contains(&y) {
                    seen.push(y);
                    frontier.push(y);
                }
            }
        }
        let one_step = s == AsState::Off || transition(s, MissionEvent::EStop) == AsState::Emergency;
        if !seen.contains(&AsState::Emergency) || !one_step {
            unreachable.push(s.to_string());
        }
    }
    outcome(
        mismatches.is_empty() && unreachable.is_empty(),
        format!(
            "{} state-event pairs checked, {} mismatches; EStop property fails for {} states",
            AsState::ALL.len() * MissionEvent::ALL.len(),
            mismatches.len(),
            unreachable.len()
        ),
    )
}

fn reproducibility(m: &Missions) -> Outcome {
    let (a, b) = (m.mpc.report.to_text(), m.mpc_again.report.to_text());
    let r = &m.mpc.report;
    let identical = a == b;
    let laps_ok = r.completed && r.lap_times.len() == 2 && r.lap_times[1] < r.lap_times[0];
    let clean = r.boundary_violations == 0;
    outcome(
        identical && laps_ok && clean,
        format!(
            "reports {}; completed {}, lap times {:?}, boundary violations {}",
            if identical { "byte-identical" } else { "DIFFER" },
            r.completed,
            r.lap_times,
            r.boundary_violations
        ),
    )
}

fn main() {
    // `cargo test -- --list` and friends probe test binaries
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let missions = run_missions();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "controller comparison", controller_comparison(&missions)),
        (2, "RANSAC recovery", ransac_recovery()),
        (3, "odometry accuracy", odometry_accuracy()),
        (4, "spline correctness", spline_correctness()),
        (5, "MPC oracle equivalence", mpc_oracle()),
        (6, "loop closure", loop_closure(&missions)),
        (7, "vision", vision()),
        (8, "state machine", state_machine()),
        (9, "end-to-end reproducibility", reproducibility(&missions)),
    ];
    let mut unexpected = Vec::new();
    for (id, name, o) in &results {
        println!("criterion {id} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass == KNOWN_UNMET.contains(id) {
            unexpected.push(*id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("acceptance status changed for criteria {unexpected:?}; update KNOWN_UNMET or fix the regression");
        std::process::exit(1);
    }
}
