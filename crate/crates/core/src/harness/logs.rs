//! Per-step logs and the metrics computed from them.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const STEP_LOG_HEADER: &str = "# conetrack-steplog v1";
pub const TRUTH_LOG_HEADER: &str = "# conetrack-truthlog v1";

const STEP_COLUMNS: &str = "t,x,y,psi,u,v,r,delta,ax,zeta,jerk,ey,cost,iterations,mode,lap,source";
const TRUTH_COLUMNS: &str = "t,x,y,psi,u,v,r,delta,ay,lateral,s";

/// Which pose source the controller used on a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseSource {
    Fused,
    Gps,
    Lidar,
    DeadReckoning,
}

impl PoseSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoseSource::Fused => "fused",
            PoseSource::Gps => "gps",
            PoseSource::Lidar => "lidar",
            PoseSource::DeadReckoning => "dead_reckoning",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(PoseSource::Fused),
            "gps" => Ok(PoseSource::Gps),
            "lidar" => Ok(PoseSource::Lidar),
            "dead_reckoning" => Ok(PoseSource::DeadReckoning),
            other => Err(Error::InvalidLog(format!("unknown pose source `{other}`"))),
        }
    }
}

/// What the controller saw and did on one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub delta: f64,
    pub ax: f64,
    pub zeta: f64,
    pub jerk: f64,
    /// Lateral offset from the planned path.
    pub ey: f64,
    pub cost: f64,
    pub iterations: usize,
    /// 0 while mapping, 1 while tracking.
    pub mode: u8,
    pub lap: u32,
    pub source: PoseSource,
}

/// True vehicle state on one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub delta: f64,
    pub ay: f64,
    /// Signed distance to the true centre line.
    pub lateral: f64,
    /// Arc length of the foot point on the centre line.
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricBlock {
    pub lateral_accel_std: f64,
    pub mean_lateral_error: f64,
    pub average_speed: f64,
    pub average_sideslip: f64,
}

fn sideslip(u: f64, v: f64) -> f64 {
    if u.abs() < 1e-9 {
        0.0
    } else {
        (v / u).atan()
    }
}

/// Table metrics over time-aligned logs.
pub fn compute_metrics(steps: &[StepRecord], truth: &[TruthRecord]) -> Result<MetricBlock> {
    if steps.is_empty() || truth.is_empty() {
        return Err(Error::InvalidLog("empty log".into()));
    }
    if steps.len() != truth.len() {
        return Err(Error::InvalidLog(format!("{} steps against {} truth rows", steps.len(), truth.len())));
    }
    if let Some(i) = steps.iter().zip(truth).position(|(a, b)| (a.t - b.t).abs() > 1e-9) {
        return Err(Error::InvalidLog(format!("logs disagree on the time of row {i}")));
    }
    let n = truth.len() as f64;
    let mean_ay = truth.iter().map(|r| r.ay).sum::<f64>() / n;
    let var = truth.iter().map(|r| (r.ay - mean_ay).powi(2)).sum::<f64>() / n;
    let mean_lat = truth.iter().map(|r| r.lateral.abs()).sum::<f64>() / n;
    let distance: f64 = truth.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum();
    let duration = truth[truth.len() - 1].t - truth[0].t;
    let speed = if duration > 0.0 { distance / duration } else { truth[0].u.abs() };
    let beta = truth.iter().map(|r| sideslip(r.u, r.v)).sum::<f64>() / n;
    Ok(MetricBlock { lateral_accel_std: var.sqrt(), mean_lateral_error: mean_lat, average_speed: speed, average_sideslip: beta })
}

pub fn step_log_to_string(steps: &[StepRecord]) -> String {
    let mut out = format!("{STEP_LOG_HEADER}\n{STEP_COLUMNS}\n");
    for s in steps {
        let _ = writeln!(
            out,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            s.t,
            s.x,
            s.y,
            s.psi,
            s.u,
            s.v,
            s.r,
            s.delta,
            s.ax,
            s.zeta,
            s.jerk,
            s.ey,
            s.cost,
            s.iterations,
            s.mode,
            s.lap,
            s.source.as_str()
        );
    }
    out
}

pub fn truth_log_to_string(truth: &[TruthRecord]) -> String {
    let mut out = format!("{TRUTH_LOG_HEADER}\n{TRUTH_COLUMNS}\n");
    for r in truth {
        let _ = writeln!(
            out,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.t, r.x, r.y, r.psi, r.u, r.v, r.r, r.delta, r.ay, r.lateral, r.s
        );
    }
    out
}

fn rows<'a>(text: &'a str, header: &str, columns: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::InvalidLog(format!("missing `{header}` header")));
    }
    if lines.next().map(str::trim) != Some(columns) {
        return Err(Error::InvalidLog("unexpected column header".into()));
    }
    let width = columns.split(',').count();
    let parsed: Vec<(usize, Vec<&str>)> =
        lines.enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 3, l.trim().split(',').collect())).collect();
    if let Some((line, _)) = parsed.iter().find(|(_, f)| f.len() != width) {
        return Err(Error::InvalidLog(format!("line {line}: expected {width} fields")));
    }
    Ok(parsed.into_iter())
}

fn field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::InvalidLog(format!("line {line}: bad value `{s}`")))
}

pub fn parse_step_log(text: &str) -> Result<Vec<StepRecord>> {
    rows(text, STEP_LOG_HEADER, STEP_COLUMNS)?
        .map(|(line, f)| {
            let x = |i: usize| field::<f64>(f[i], line);
            Ok(StepRecord {
                t: x(0)?,
                x: x(1)?,
                y: x(2)?,
                psi: x(3)?,
                u: x(4)?,
                v: x(5)?,
                r: x(6)?,
                delta: x(7)?,
                ax: x(8)?,
                zeta: x(9)?,
                jerk: x(10)?,
                ey: x(11)?,
                cost: x(12)?,
                iterations: field(f[13], line)?,
                mode: field(f[14], line)?,
                lap: field(f[15], line)?,
                source: PoseSource::parse(f[16])?,
            })
        })
        .collect()
}

pub fn parse_truth_log(text: &str) -> Result<Vec<TruthRecord>> {
    rows(text, TRUTH_LOG_HEADER, TRUTH_COLUMNS)?
        .map(|(line, f)| {
            let x = |i: usize| field::<f64>(f[i], line);
            Ok(TruthRecord {
                t: x(0)?,
                x: x(1)?,
                y: x(2)?,
                psi: x(3)?,
                u: x(4)?,
                v: x(5)?,
                r: x(6)?,
                delta: x(7)?,
                ay: x(8)?,
                lateral: x(9)?,
                s: x(10)?,
            })
        })
        .collect()
}

pub fn read_step_log(path: &Path) -> Result<Vec<StepRecord>> {
    parse_step_log(&std::fs::read_to_string(path)?)
}

pub fn read_truth_log(path: &Path) -> Result<Vec<TruthRecord>> {
    parse_truth_log(&std::fs::read_to_string(path)?)
}
