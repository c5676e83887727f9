//! Mission configuration as `key = value` text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::control::{MpcConfig, PurePursuitConfig, VehicleParams};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::sim::{PlantConfig, SensorConfig, TrackSpec};
use crate::track_map::LoopClosureConfig;

pub const CONFIG_HEADER: &str = "# conetrack-config v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Mpc,
    PurePursuit,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::PurePursuit => "pure_pursuit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "mpc" => Ok(ControllerKind::Mpc),
            "pure_pursuit" | "pure-pursuit" | "pp" => Ok(ControllerKind::PurePursuit),
            other => Err(Error::InvalidConfig(format!("unknown controller `{other}`"))),
        }
    }
}

/// Where the track comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackSource {
    Reference,
    Circle(f64),
    /// Text file of control points, one `x,y` per line.
    File(PathBuf),
}

impl TrackSource {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "reference" {
            return Ok(TrackSource::Reference);
        }
        if let Some(r) = s.strip_prefix("circle:") {
            let r: f64 = r.parse().map_err(|_| Error::InvalidConfig(format!("bad circle radius `{r}`")))?;
            if !(r > 0.0) {
                return Err(Error::InvalidConfig("circle radius must be positive".into()));
            }
            return Ok(TrackSource::Circle(r));
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(TrackSource::File(PathBuf::from(p)));
        }
        Err(Error::InvalidConfig(format!("unknown track `{s}` (reference, circle:R or file:PATH)")))
    }

    pub fn describe(&self) -> String {
        match self {
            TrackSource::Reference => "reference".into(),
            TrackSource::Circle(r) => format!("circle:{r}"),
            TrackSource::File(p) => format!("file:{}", p.display()),
        }
    }

    /// Track specification for a seed.
    pub fn spec(&self, seed: u64) -> Result<TrackSpec> {
        match self {
            TrackSource::Reference => Ok(TrackSpec::reference(seed)),
            TrackSource::Circle(r) => Ok(TrackSpec::circle(*r, 64, seed)),
            TrackSource::File(p) => Ok(TrackSpec::new(read_control_points(p)?, seed)),
        }
    }
}

/// Parse `x,y` control points; `#` starts a comment.
pub fn parse_control_points(text: &str) -> Result<Vec<Point2>> {
    let mut pts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("line {}: expected `x,y`", n + 1)))?;
        if v.len() != 2 {
            return Err(Error::Format(format!("line {}: expected `x,y`", n + 1)));
        }
        pts.push(Point2::new(v[0], v[1]));
    }
    Ok(pts)
}

pub fn read_control_points(path: &Path) -> Result<Vec<Point2>> {
    parse_control_points(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub controller: ControllerKind,
    pub track: TrackSource,
    pub sensors: SensorConfig,
    pub vehicle: VehicleParams,
    pub mpc: MpcConfig,
    pub pursuit: PurePursuitConfig,
    /// Proportional gain of the pure-pursuit speed loop, 1/s.
    pub speed_gain: f64,
    pub plant: PlantConfig,
    pub loop_closure: LoopClosureConfig,
    /// Target speed while mapping.
    pub lap1_speed: f64,
    /// Lap-2 target as a multiple of the lap-1 target.
    pub lap2_factor: f64,
    /// Lateral acceleration that caps the target speed in corners.
    pub lateral_accel_limit: f64,
    /// Weight on GPS in the lap-1 pose blend.
    pub fusion_alpha: f64,
    /// Weight of each GPS fix against the dead-reckoned pose once the lap
    /// is closed.
    pub gps_gain: f64,
    /// GPS dropout probability once the first lap is closed.
    pub lap2_gps_dropout: f64,
    /// Inject an emergency stop at this mission time.
    pub estop_at: Option<f64>,
    pub max_time: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            controller: ControllerKind::Mpc,
            track: TrackSource::Reference,
            sensors: SensorConfig::default(),
            vehicle: VehicleParams::default(),
            mpc: MpcConfig::default(),
            pursuit: PurePursuitConfig::default(),
            speed_gain: 1.5,
            plant: PlantConfig::default(),
            loop_closure: LoopClosureConfig::default(),
            lap1_speed: 3.0,
            lap2_factor: 2.2,
            lateral_accel_limit: 4.0,
            fusion_alpha: 0.3,
            gps_gain: 0.1,
            lap2_gps_dropout: 0.0,
            estop_at: None,
            max_time: 300.0,
            output_dir: None,
        }
    }
}

fn num(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|_| Error::InvalidConfig(format!("{key}: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::InvalidConfig(format!("{key}: value must be finite")));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::InvalidConfig(format!("{key}: `{v}` is not a count")))
}

fn optional(key: &str, v: &str) -> Result<Option<f64>> {
    if v.trim() == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let v = value.trim();
        let n = || num(key, v);
        match key {
            "seed" => self.seed = v.parse().map_err(|_| Error::InvalidConfig(format!("seed: `{v}` is not an integer")))?,
            "controller" => self.controller = ControllerKind::parse(v)?,
            "track" => self.track = TrackSource::parse(v)?,
            "lap1_speed" => self.lap1_speed = n()?,
            "lap2_factor" => self.lap2_factor = n()?,
            "lateral_accel_limit" => self.lateral_accel_limit = n()?,
            "fusion_alpha" => self.fusion_alpha = n()?,
            "gps_gain" => self.gps_gain = n()?,
            "lap2_gps_dropout" => self.lap2_gps_dropout = n()?,
            "estop_at" => self.estop_at = optional(key, v)?,
            "max_time" => self.max_time = n()?,
            "output_dir" => self.output_dir = if v == "none" { None } else { Some(PathBuf::from(v)) },
            "speed_gain" => self.speed_gain = n()?,

            "lidar.layers" => self.sensors.lidar.layers = count(key, v)?,
            "lidar.vertical_half_fov" => self.sensors.lidar.vertical_half_fov = n()?,
            "lidar.azimuth_step" => self.sensors.lidar.azimuth_step = n()?,
            "lidar.max_range" => self.sensors.lidar.max_range = n()?,
            "lidar.range_sigma" => self.sensors.lidar.range_sigma = n()?,
            "lidar.rate_hz" => self.sensors.lidar.rate_hz = n()?,
            "lidar.mount_height" => self.sensors.lidar.mount_height = n()?,
            "gps.position_sigma" => self.sensors.gps.position_sigma = n()?,
            "gps.heading_sigma" => self.sensors.gps.heading_sigma = n()?,
            "gps.dropout" => self.sensors.gps.dropout = n()?,
            "gps.rate_hz" => self.sensors.gps.rate_hz = n()?,
            "camera.half_fov" => self.sensors.camera.half_fov = n()?,
            "camera.max_range" => self.sensors.camera.max_range = n()?,
            "camera.noise" => self.sensors.camera.noise = n()?,

            "vehicle.mass" => self.vehicle.mass = n()?,
            "vehicle.izz" => self.vehicle.izz = n()?,
            "vehicle.lf" => self.vehicle.lf = n()?,
            "vehicle.lr" => self.vehicle.lr = n()?,
            "vehicle.c_af" => self.vehicle.c_af = n()?,
            "vehicle.c_ar" => self.vehicle.c_ar = n()?,
            "vehicle.delta_max" => self.vehicle.delta_max = n()?,
            "vehicle.zeta_max" => self.vehicle.zeta_max = n()?,
            "vehicle.a_max" => self.vehicle.a_max = n()?,
            "vehicle.jerk_max" => self.vehicle.jerk_max = n()?,
            "vehicle.u_min" => self.vehicle.u_min = n()?,

            "mpc.horizon" => self.mpc.horizon = count(key, v)?,
            "mpc.dt" => self.mpc.dt = n()?,
            "mpc.substeps" => self.mpc.substeps = count(key, v)?,
            "mpc.w_u" => self.mpc.w_u = n()?,
            "mpc.w_epsi" => self.mpc.w_epsi = n()?,
            "mpc.w_ey" => self.mpc.w_ey = n()?,
            "mpc.w_sh" => self.mpc.w_sh = n()?,
            "mpc.corridor" => self.mpc.corridor = n()?,
            "mpc.slack_max" => self.mpc.slack_max = n()?,
            "mpc.w_speed" => self.mpc.w_speed = n()?,
            "mpc.w_zeta" => self.mpc.w_zeta = n()?,
            "mpc.w_jerk" => self.mpc.w_jerk = n()?,
            "mpc.w_bounds" => self.mpc.w_bounds = n()?,
            "mpc.iterations" => self.mpc.iterations = count(key, v)?,

            "pursuit.lookahead" => self.pursuit.lookahead = n()?,
            "pursuit.steer_time_constant" => self.pursuit.steer_time_constant = n()?,

            "plant.substeps" => self.plant.substeps = count(key, v)?,
            "plant.friction_limit" => self.plant.friction_limit = optional(key, v)?,
            "plant.yaw_noise" => self.plant.yaw_noise = n()?,

            "loop.w_c" => self.loop_closure.w_c = n()?,
            "loop.w_h" => self.loop_closure.w_h = n()?,
            "loop.w_d" => self.loop_closure.w_d = n()?,
            "loop.threshold" => self.loop_closure.threshold = n()?,
            "loop.arming_distance" => self.loop_closure.arming_distance = n()?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Apply `key=value` strings in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("override `{}` is not key=value", o.as_ref())))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Defaults updated by the settings in `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every setting, one per line; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let s = &self.sensors;
        let v = &self.vehicle;
        let m = &self.mpc;
        let l = &self.loop_closure;
        let out_dir = self.output_dir.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string());
        let entries: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("controller", self.controller.as_str().into()),
            ("track", self.track.describe()),
            ("lap1_speed", self.lap1_speed.to_string()),
            ("lap2_factor", self.lap2_factor.to_string()),
            ("lateral_accel_limit", self.lateral_accel_limit.to_string()),
            ("fusion_alpha", self.fusion_alpha.to_string()),
            ("gps_gain", self.gps_gain.to_string()),
            ("lap2_gps_dropout", self.lap2_gps_dropout.to_string()),
            ("estop_at", show(self.estop_at)),
            ("max_time", self.max_time.to_string()),
            ("output_dir", out_dir),
            ("speed_gain", self.speed_gain.to_string()),
            ("lidar.layers", s.lidar.layers.to_string()),
            ("lidar.vertical_half_fov", s.lidar.vertical_half_fov.to_string()),
            ("lidar.azimuth_step", s.lidar.azimuth_step.to_string()),
            ("lidar.max_range", s.lidar.max_range.to_string()),
            ("lidar.range_sigma", s.lidar.range_sigma.to_string()),
            ("lidar.rate_hz", s.lidar.rate_hz.to_string()),
            ("lidar.mount_height", s.lidar.mount_height.to_string()),
            ("gps.position_sigma", s.gps.position_sigma.to_string()),
            ("gps.heading_sigma", s.gps.heading_sigma.to_string()),
            ("gps.dropout", s.gps.dropout.to_string()),
            ("gps.rate_hz", s.gps.rate_hz.to_string()),
            ("camera.half_fov", s.camera.half_fov.to_string()),
            ("camera.max_range", s.camera.max_range.to_string()),
            ("camera.noise", s.camera.noise.to_string()),
            ("vehicle.mass", v.mass.to_string()),
            ("vehicle.izz", v.izz.to_string()),
            ("vehicle.lf", v.lf.to_string()),
            ("vehicle.lr", v.lr.to_string()),
            ("vehicle.c_af", v.c_af.to_string()),
            ("vehicle.c_ar", v.c_ar.to_string()),
            ("vehicle.delta_max", v.delta_max.to_string()),
            ("vehicle.zeta_max", v.zeta_max.to_string()),
            ("vehicle.a_max", v.a_max.to_string()),
            ("vehicle.jerk_max", v.jerk_max.to_string()),
            ("vehicle.u_min", v.u_min.to_string()),
            ("mpc.horizon", m.horizon.to_string()),
            ("mpc.dt", m.dt.to_string()),
            ("mpc.substeps", m.substeps.to_string()),
            ("mpc.w_u", m.w_u.to_string()),
            ("mpc.w_epsi", m.w_epsi.to_string()),
            ("mpc.w_ey", m.w_ey.to_string()),
            ("mpc.w_sh", m.w_sh.to_string()),
            ("mpc.corridor", m.corridor.to_string()),
            ("mpc.slack_max", m.slack_max.to_string()),
            ("mpc.w_speed", m.w_speed.to_string()),
            ("mpc.w_zeta", m.w_zeta.to_string()),
            ("mpc.w_jerk", m.w_jerk.to_string()),
            ("mpc.w_bounds", m.w_bounds.to_string()),
            ("mpc.iterations", m.iterations.to_string()),
            ("pursuit.lookahead", self.pursuit.lookahead.to_string()),
            ("pursuit.steer_time_constant", self.pursuit.steer_time_constant.to_string()),
            ("plant.substeps", self.plant.substeps.to_string()),
            ("plant.friction_limit", show(self.plant.friction_limit)),
            ("plant.yaw_noise", self.plant.yaw_noise.to_string()),
            ("loop.w_c", l.w_c.to_string()),
            ("loop.w_h", l.w_h.to_string()),
            ("loop.w_d", l.w_d.to_string()),
            ("loop.threshold", l.threshold.to_string()),
            ("loop.arming_distance", l.arming_distance.to_string()),
        ];
        let mut out = String::from(CONFIG_HEADER);
        out.push('\n');
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.sensors.validate()?;
        self.vehicle.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.mpc.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.plant.validate()?;
        self.loop_closure.validate()?;
        if !(self.lap1_speed > 0.0) || !(self.lap2_factor > 0.0) || !(self.lateral_accel_limit > 0.0) {
            return Err(Error::InvalidConfig("speeds, lap-2 factor and lateral limit must be positive".into()));
        }
        if [self.fusion_alpha, self.gps_gain, self.lap2_gps_dropout].iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidConfig("fusion_alpha, gps_gain and lap2_gps_dropout must lie in [0, 1]".into()));
        }
        if !(self.max_time > 0.0) || self.estop_at.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::InvalidConfig("max_time must be positive and estop_at nonnegative".into()));
        }
        if !(self.pursuit.lookahead > 0.0) || !(self.pursuit.steer_time_constant > 0.0) || !(self.speed_gain > 0.0) {
            return Err(Error::InvalidConfig("pursuit lookahead, time constant and speed gain must be positive".into()));
        }
        Ok(())
    }
}
