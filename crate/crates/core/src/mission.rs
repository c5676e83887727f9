//! Autonomous-system state machine and mission mode latch.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AsState {
    Off,
    Ready,
    Driving,
    Emergency,
    Finished,
}

impl AsState {
    pub const ALL: [AsState; 5] = [AsState::Off, AsState::Ready, AsState::Driving, AsState::Emergency, AsState::Finished];

    pub fn as_str(&self) -> &'static str {
        match self {
            AsState::Off => "off",
            AsState::Ready => "ready",
            AsState::Driving => "driving",
            AsState::Emergency => "emergency",
            AsState::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MissionEvent {
    AsmsOn,
    SystemChecksPassed,
    GoSignal,
    EStop,
    SubsystemFailure,
    LocalizationLost,
    LapLoopDetected,
    MissionComplete,
    Reset,
}

impl MissionEvent {
    pub const ALL: [MissionEvent; 9] = [
        MissionEvent::AsmsOn,
        MissionEvent::SystemChecksPassed,
        MissionEvent::GoSignal,
        MissionEvent::EStop,
        MissionEvent::SubsystemFailure,
        MissionEvent::LocalizationLost,
        MissionEvent::LapLoopDetected,
        MissionEvent::MissionComplete,
        MissionEvent::Reset,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MissionEvent::AsmsOn => "asms_on",
            MissionEvent::SystemChecksPassed => "system_checks_passed",
            MissionEvent::GoSignal => "go_signal",
            MissionEvent::EStop => "estop",
            MissionEvent::SubsystemFailure => "subsystem_failure",
            MissionEvent::LocalizationLost => "localization_lost",
            MissionEvent::LapLoopDetected => "lap_loop_detected",
            MissionEvent::MissionComplete => "mission_complete",
            MissionEvent::Reset => "reset",
        }
    }
}

impl fmt::Display for AsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for MissionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Total transition function; pairs without a rule stay put.
///
/// The master-switch requirement for leaving `Off` is enforced by
/// [`Supervisor`], which only forwards `SystemChecksPassed` once `AsmsOn`
/// has been seen.
pub fn transition(s: AsState, e: MissionEvent) -> AsState {
    use AsState::*;
    use MissionEvent::*;
    match (s, e) {
        (Off, _) => {
            if e == SystemChecksPassed {
                Ready
            } else {
                Off
            }
        }
        (_, EStop | SubsystemFailure) => Emergency,
        (Ready, GoSignal) => Driving,
        (Driving, MissionComplete) => Finished,
        (Emergency | Finished, Reset) => Off,
        (s, _) => s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MissionMode {
    DetectionDrive,
    TrackingDrive,
}

/// Latches into tracking on the first loop detection.
pub fn mode_update(mode: MissionMode, loop_detected: bool) -> MissionMode {
    if loop_detected {
        MissionMode::TrackingDrive
    } else {
        mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub t: f64,
    pub from: AsState,
    pub event: MissionEvent,
    pub to: AsState,
}

/// Owns the state, the master-switch flag and the transition log.
#[derive(Debug, Clone, PartialEq)]
pub struct Supervisor {
    state: AsState,
    asms_on: bool,
    log: Vec<TransitionRecord>,
}

impl Default for Supervisor {
    fn default() -> Self {
        Self::new()
    }
}

impl Supervisor {
    pub fn new() -> Self {
        Self { state: AsState::Off, asms_on: false, log: Vec::new() }
    }

    pub fn state(&self) -> AsState {
        self.state
    }

    pub fn log(&self) -> &[TransitionRecord] {
        &self.log
    }

    /// Apply an event at time `t`; every event is logged, including
    /// self-loops.
    pub fn handle(&mut self, t: f64, event: MissionEvent) -> AsState {
        let from = self.state;
        let to = match (from, event) {
            (AsState::Off, MissionEvent::AsmsOn) => {
                self.asms_on = true;
                AsState::Off
            }
            (AsState::Off, MissionEvent::SystemChecksPassed) if !self.asms_on => AsState::Off,
            _ => transition(from, event),
        };
        if to == AsState::Off && from != AsState::Off {
            self.asms_on = false;
        }
        self.state = to;
        self.log.push(TransitionRecord { t, from, event, to });
        to
    }

    pub fn log_text(&self) -> String {
        let mut out = String::from(TRANSITION_HEADER);
        out.push('\n');
        for r in &self.log {
            let _ = writeln!(out, "{:.3} {} {} {}", r.t, r.from, r.event, r.to);
        }
        out
    }
}

pub const TRANSITION_HEADER: &str = "# conetrack-transitions v1";

pub fn parse_state(s: &str) -> Result<AsState> {
    AsState::ALL.into_iter().find(|x| x.as_str() == s).ok_or_else(|| Error::Format(format!("unknown state `{s}`")))
}

pub fn parse_event(s: &str) -> Result<MissionEvent> {
    MissionEvent::ALL.into_iter().find(|x| x.as_str() == s).ok_or_else(|| Error::Format(format!("unknown event `{s}`")))
}
