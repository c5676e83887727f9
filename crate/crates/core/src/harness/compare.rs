//! Same mission, two controllers.

use std::fmt::Write as _;

use super::config::{ControllerKind, RunConfig};
use super::mission::{simulate_mission, write_run, MissionRun};
use crate::error::{Error, Result};
use crate::geometry::Point2;

pub const COMPARISON_HEADER: &str = "# conetrack-comparison v1";

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub mpc: MissionRun,
    pub pursuit: MissionRun,
    /// Either mission failed to finish.
    pub partial: bool,
}

/// Run the mission with MPC and with pure pursuit on the same world and
/// seed. With an output directory, each run lands in its own subdirectory
/// next to the side-by-side table, the plot series and the path overlay.
pub fn compare_controllers(cfg: &RunConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let with = |kind: ControllerKind| RunConfig { controller: kind, output_dir: None, ..cfg.clone() };
    let (a, b) = (with(ControllerKind::Mpc), with(ControllerKind::PurePursuit));
    let (mpc, pursuit) = std::thread::scope(|s| {
        let h = s.spawn(|| simulate_mission(&b));
        let m = simulate_mission(&a);
        (m, h.join().unwrap_or_else(|_| Err(Error::InvalidInput("pure-pursuit run panicked".into()))))
    });
    let (mpc, pursuit) = (mpc?, pursuit?);
    let partial = !(mpc.report.completed && pursuit.report.completed);
    let report = ComparisonReport { mpc, pursuit, partial };
    if let Some(dir) = &cfg.output_dir {
        write_run(&dir.join("mpc"), &a, &report.mpc)?;
        write_run(&dir.join("pure_pursuit"), &b, &report.pursuit)?;
        std::fs::write(dir.join("comparison.txt"), comparison_to_string(&report))?;
        std::fs::write(dir.join("series.csv"), series_csv(&report))?;
        std::fs::write(dir.join("overlay.svg"), overlay_svg(&report))?;
    }
    Ok(report)
}

pub fn comparison_to_string(r: &ComparisonReport) -> String {
    let mut out = format!("{COMPARISON_HEADER}\n");
    let _ = writeln!(out, "partial = {}", r.partial);
    let _ = writeln!(out, "metric,mpc,pure_pursuit");
    let m = r.mpc.report.metrics;
    let p = r.pursuit.report.metrics;
    let cell = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
    let rows: [(&str, fn(&super::logs::MetricBlock) -> f64); 4] = [
        ("lateral_accel_std", |b| b.lateral_accel_std),
        ("mean_lateral_error", |b| b.mean_lateral_error),
        ("average_speed", |b| b.average_speed),
        ("average_sideslip", |b| b.average_sideslip),
    ];
    for (name, f) in rows {
        let _ = writeln!(out, "{name},{},{}", cell(m.as_ref().map(f)), cell(p.as_ref().map(f)));
    }
    let laps = |run: &MissionRun| run.report.lap_times.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>().join(";");
    let _ = writeln!(out, "lap_times,{},{}", laps(&r.mpc), laps(&r.pursuit));
    let _ = writeln!(out, "completed,{},{}", r.mpc.report.completed, r.pursuit.report.completed);
    out
}

/// Long-format series for the path, lateral error, sideslip and lateral
/// acceleration plots.
fn series_csv(r: &ComparisonReport) -> String {
    let mut out = String::from("# conetrack-series v1\ncontroller,t,x,y,lateral,sideslip,ay\n");
    for (name, run) in [("mpc", &r.mpc), ("pure_pursuit", &r.pursuit)] {
        for row in &run.truth {
            let beta = if row.u.abs() < 1e-9 { 0.0 } else { (row.v / row.u).atan() };
            let _ = writeln!(
                out,
                "{name},{:.3},{:.4},{:.4},{:.4},{:.5},{:.4}",
                row.t, row.x, row.y, row.lateral, beta, row.ay
            );
        }
    }
    out
}

/// Vector drawing of the cones, the true centre line and both driven paths.
pub fn overlay_svg(r: &ComparisonReport) -> String {
    let world = &r.mpc.world;
    let mut pts: Vec<Point2> = world.cones.iter().map(|c| c.position).collect();
    pts.extend(r.mpc.truth.iter().chain(&r.pursuit.truth).map(|t| Point2::new(t.x, t.y)));
    let (mut lo, mut hi) = (Point2::repeat(f64::INFINITY), Point2::repeat(f64::NEG_INFINITY));
    for p in &pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let margin = 3.0;
    let (w, h) = (hi.x - lo.x + 2.0 * margin, hi.y - lo.y + 2.0 * margin);
    let scale = 8.0;
    // flip y so north is up
    let map = |p: &Point2| ((p.x - lo.x + margin) * scale, (hi.y - p.y + margin) * scale);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        w * scale,
        h * scale
    );
    let polyline = |pts: &mut dyn Iterator<Item = Point2>, color: &str, width: f64| {
        let coords: Vec<String> = pts.map(|p| map(&p)).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" points=\"{}\"/>\n", coords.join(" "))
    };
    let n = 400;
    let len = world.centerline.length();
    out.push_str(&polyline(
        &mut (0..=n).map(|k| world.centerline.sample_at(len * k as f64 / n as f64).position),
        "#999999",
        1.0,
    ));
    out.push_str(&polyline(&mut r.pursuit.truth.iter().map(|t| Point2::new(t.x, t.y)), "#d08000", 1.5));
    out.push_str(&polyline(&mut r.mpc.truth.iter().map(|t| Point2::new(t.x, t.y)), "#008000", 1.5));
    for c in &world.cones {
        let (x, y) = map(&c.position);
        let fill = match c.color {
            crate::vision::ConeColor::Red => "red",
            crate::vision::ConeColor::Blue => "blue",
            crate::vision::ConeColor::Yellow => "gold",
            crate::vision::ConeColor::Unknown => "gray",
        };
        let _ = writeln!(out, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"2\" fill=\"{fill}\"/>");
    }
    out.push_str("<text x=\"10\" y=\"20\" font-size=\"14\" fill=\"#008000\">mpc</text>\n");
    out.push_str("<text x=\"10\" y=\"38\" font-size=\"14\" fill=\"#d08000\">pure pursuit</text>\n");
    out.push_str("</svg>\n");
    out
}
