//! Controller interface and the non-learning holding schemes.

use std::fmt;
use std::str::FromStr;

use crate::headways::{BusPlan, BusPoint, HeadwayError, LineModel, LineSnapshot};
use crate::simulator::EpisodeLog;

/// What a controller sees when a bus is activated at a stop.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub now_s: f64,
    /// Index of the activated bus.
    pub bus: usize,
    /// Index of the stop it is activated at.
    pub stop: usize,
    /// Latest arrival at every stop, counting the expected arrivals of buses
    /// already on their way there.
    pub latest_arrival_s: &'a [f64],
    /// Expected schedule of every bus up to its next activation. The
    /// activated bus has `activation_s == now_s` at `stop`.
    pub plans: &'a [BusPlan],
}

impl Observation<'_> {
    pub fn points(&self, n_stops: usize) -> Vec<BusPoint> {
        self.plans.iter().map(|p| p.point_at(self.now_s, n_stops)).collect()
    }

    pub fn headways(&self, model: &LineModel) -> Result<Vec<f64>, HeadwayError> {
        let points = self.points(model.n_stops());
        model.headways(&LineSnapshot { now_s: self.now_s, latest_arrival_s: self.latest_arrival_s, buses: &points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision {
    pub hold_s: f64,
}

impl ControlDecision {
    pub fn hold(hold_s: f64) -> Self {
        Self { hold_s }
    }
}

pub trait Controller {
    /// Called once per activation.
    fn decide(&mut self, obs: &Observation<'_>) -> ControlDecision;

    /// Whether decisions at `stop` are control stages.
    fn controls(&self, stop: usize) -> bool;

    /// Whether holds must come from the stop's action set.
    fn restricted(&self) -> bool {
        true
    }

    fn begin_episode(&mut self) {}

    fn end_episode(&mut self, _log: &EpisodeLog) {}
}

/// Never holds.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoControl;

impl Controller for NoControl {
    fn decide(&mut self, _obs: &Observation<'_>) -> ControlDecision {
        ControlDecision::hold(0.0)
    }

    fn controls(&self, _stop: usize) -> bool {
        false
    }
}

/// Hold needed to stretch headway `headway_s` to `target_s`.
pub fn terminal_hold(target_s: f64, headway_s: f64) -> f64 {
    (target_s - headway_s).max(0.0)
}

/// Holds at a few terminal stops until the headway to the bus ahead reaches the target.
#[derive(Debug, Clone)]
pub struct TerminalHolding {
    stops: Vec<usize>,
    target_s: f64,
    model: LineModel,
}

impl TerminalHolding {
    /// `stops` are stop indices, `target_s` usually the expected system headway.
    pub fn new(model: LineModel, stops: Vec<usize>, target_s: f64) -> Self {
        Self { stops, target_s, model }
    }

    /// Stop 1 only.
    pub fn single_point(model: LineModel, target_s: f64) -> Self {
        Self::new(model, vec![0], target_s)
    }

    /// Stop 1 and the stop half-way round.
    pub fn two_point(model: LineModel, target_s: f64) -> Self {
        let half = model.n_stops() / 2;
        Self::new(model, vec![0, half], target_s)
    }

    pub fn stops(&self) -> &[usize] {
        &self.stops
    }
}

impl Controller for TerminalHolding {
    fn decide(&mut self, obs: &Observation<'_>) -> ControlDecision {
        if !self.controls(obs.stop) {
            return ControlDecision::hold(0.0);
        }
        let ahead = obs.headways(&self.model).map(|h| h[obs.bus]).unwrap_or(self.target_s);
        ControlDecision::hold(terminal_hold(self.target_s, ahead))
    }

    fn controls(&self, stop: usize) -> bool {
        self.stops.contains(&stop)
    }

    fn restricted(&self) -> bool {
        false
    }
}

/// Control schemes addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    NoControl,
    SinglePoint,
    TwoPoint,
    /// Q-learning with the given look-ahead depth; depth 0 is plain Q-learning.
    QLearning { lookahead: usize },
}

impl Scheme {
    pub fn is_learning(&self) -> bool {
        matches!(self, Scheme::QLearning { .. })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::NoControl => f.write_str("NC"),
            Scheme::SinglePoint => f.write_str("SP"),
            Scheme::TwoPoint => f.write_str("TP"),
            Scheme::QLearning { lookahead: 0 } => f.write_str("OQL"),
            Scheme::QLearning { lookahead } => write!(f, "QL{lookahead}S"),
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.as_str() {
            "NC" => return Ok(Scheme::NoControl),
            "SP" => return Ok(Scheme::SinglePoint),
            "TP" => return Ok(Scheme::TwoPoint),
            "OQL" => return Ok(Scheme::QLearning { lookahead: 0 }),
            _ => {}
        }
        upper
            .strip_prefix("QL")
            .and_then(|rest| rest.strip_suffix('S'))
            .and_then(|n| n.parse().ok())
            .map(|lookahead| Scheme::QLearning { lookahead })
            .ok_or_else(|| format!("unknown scheme {s:?} (expected NC, SP, TP, OQL or QL<n>S)"))
    }
}
