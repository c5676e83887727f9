//! Mission harness: configuration, the closed-loop two-lap mission, logs,
//! metrics, the controller comparison and offline tools.

mod compare;
mod config;
mod logs;
mod mission;
mod offline;

pub use compare::{compare_controllers, comparison_to_string, overlay_svg, ComparisonReport, COMPARISON_HEADER};
pub use config::{parse_control_points, read_control_points, ControllerKind, RunConfig, TrackSource, CONFIG_HEADER};
pub use logs::{
    compute_metrics, parse_step_log, parse_truth_log, read_step_log, read_truth_log, step_log_to_string,
    truth_log_to_string, MetricBlock, PoseSource, StepRecord, TruthRecord, STEP_LOG_HEADER, TRUTH_LOG_HEADER,
};
pub use mission::{
    run_two_lap_mission, simulate_mission, write_run, LoopEvent, LoopSample, MissionReport, MissionRun, REPORT_HEADER,
    STEP_LOG_FILE, TRUTH_LOG_FILE,
};
pub use offline::{
    cones_to_string, detect_cone_candidates, generate_track_files, perception_to_string, CONES_HEADER, DETECTIONS_HEADER,
};
