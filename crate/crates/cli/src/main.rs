use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conetrack::harness::{
    compare_controllers, comparison_to_string, compute_metrics, generate_track_files, perception_to_string,
    read_step_log, read_truth_log, run_two_lap_mission, RunConfig,
};
use conetrack::odometry::read_scan;
use conetrack::Error;

const EXIT_INCOMPLETE: u8 = 2;
const EXIT_INVALID_CONFIG: u8 = 3;
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "conetrack", version, about = "Driverless cone-track autonomy stack in simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a track and write its cones, centre line, map and sample scans.
    GenerateTrack {
        #[command(flatten)]
        run: RunArgs,
        /// Lidar scans to record at even spacing along the centre line.
        #[arg(long, default_value_t = 0)]
        scans: usize,
    },
    /// Drive the two-lap mission and print its report.
    RunMission {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Detect cone candidates in recorded scan files.
    RunPerception {
        /// Scan files, or directories of scan files.
        #[arg(required = true)]
        scans: Vec<PathBuf>,
        /// Cone radius used to place candidates on the cone axis, metres.
        #[arg(long, default_value_t = 0.12)]
        cone_radius: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the detections here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the mission with MPC and with pure pursuit and compare them.
    CompareControllers {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Recompute the metric block from a step log and a truth log.
    ComputeMetrics {
        #[arg(long)]
        steps: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

/// Run configuration: defaults, then the config file, then flags, then
/// `--set` overrides.
#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any setting, e.g. `--set mpc.horizon=15`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// mpc or pure_pursuit.
    #[arg(long)]
    controller: Option<String>,
    /// reference, circle:RADIUS or file:PATH.
    #[arg(long)]
    track: Option<String>,
    #[arg(long)]
    lap1_speed: Option<f64>,
    #[arg(long)]
    lap2_factor: Option<f64>,
    /// GPS dropout probability during the second lap.
    #[arg(long)]
    lap2_gps_dropout: Option<f64>,
    /// Inject an emergency stop at this mission time, seconds.
    #[arg(long)]
    estop_at: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> conetrack::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::read(path).map_err(|e| match e {
                Error::Io(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
                other => other,
            })?,
            None => RunConfig::default(),
        };
        let mut flags: Vec<String> = Vec::new();
        let mut flag = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.push(format!("{key}={v}"));
            }
        };
        flag("seed", self.seed.map(|v| v.to_string()));
        flag("controller", self.controller.clone());
        flag("track", self.track.clone());
        flag("lap1_speed", self.lap1_speed.map(|v| v.to_string()));
        flag("lap2_factor", self.lap2_factor.map(|v| v.to_string()));
        flag("lap2_gps_dropout", self.lap2_gps_dropout.map(|v| v.to_string()));
        flag("estop_at", self.estop_at.map(|v| v.to_string()));
        flag("max_time", self.max_time.map(|v| v.to_string()));
        flag("output_dir", self.output.as_ref().map(|p| p.display().to_string()));
        flags.extend(self.overrides.iter().cloned());
        let refs: Vec<&str> = flags.iter().map(String::as_str).collect();
        cfg.apply_overrides(&refs)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidConfig(_) | Error::InvalidTrack(_) => EXIT_INVALID_CONFIG,
                _ => EXIT_FAILURE,
            };
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> conetrack::Result<ExitCode> {
    match command {
        Command::GenerateTrack { run, scans } => {
            let cfg = run.config()?;
            let dir = cfg
                .output_dir
                .clone()
                .ok_or_else(|| Error::InvalidConfig("generate-track needs an output directory".into()))?;
            let world = generate_track_files(&cfg, &dir, scans)?;
            println!(
                "{} cones, centre line {:.1} m, {} scans -> {}",
                world.cones.len(),
                world.centerline.length(),
                scans,
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::RunMission { run } => {
            let report = run_two_lap_mission(&run.config()?)?;
            print!("{}", report.to_text());
            Ok(if report.completed { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INCOMPLETE) })
        }
        Command::RunPerception { scans, cone_radius, seed, output } => {
            let mut named = Vec::new();
            for path in collect_scan_files(&scans)? {
                let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into());
                named.push((name, read_scan(&path)?));
            }
            let text = perception_to_string(&named, cone_radius, seed);
            match output {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CompareControllers { run } => {
            let report = compare_controllers(&run.config()?)?;
            print!("{}", comparison_to_string(&report));
            Ok(if report.partial { ExitCode::from(EXIT_INCOMPLETE) } else { ExitCode::SUCCESS })
        }
        Command::ComputeMetrics { steps, truth } => {
            let m = compute_metrics(&read_step_log(&steps)?, &read_truth_log(&truth)?)?;
            println!("lateral_accel_std = {:.6}", m.lateral_accel_std);
            println!("mean_lateral_error = {:.6}", m.mean_lateral_error);
            println!("average_speed = {:.6}", m.average_speed);
            println!("average_sideslip = {:.6}", m.average_sideslip);
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Expand directories into their files, sorted by name.
fn collect_scan_files(paths: &[PathBuf]) -> conetrack::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(Path::new(p).to_path_buf());
        }
    }
    Ok(out)
}
