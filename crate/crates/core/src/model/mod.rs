//! Static description of a circular bus line and the experiment parameters.
//!
//! Config files are TOML with explicit units in every field name (`_s` for
//! seconds, `_m` for meters, `_per_min` for passengers per minute). Ids are
//! 1-based and must appear in order; internally everything is indexed from 0.

mod builtin;
mod hyper;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use builtin::{builtin_line, BUILTIN_LINES, L5_CONFIG};
pub use hyper::{CostCoefficient, HyperParams};

/// Tolerance on the sum of a destination series.
///
/// The bundled series are tabulated to four decimals and one of them sums to
/// 0.9999, so the check is loose; sampling always renormalises.
pub const SERIES_SUM_TOLERANCE: f64 = 1e-3;

/// Tolerance between the declared line length and the sum of segment lengths.
pub const LINE_LENGTH_TOLERANCE_M: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown builtin line {0:?} (expected one of L1..L5)")]
    UnknownLine(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Red,
    Green,
}

/// Boarding/alighting behaviour of the two passenger types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassengerTypes {
    pub slow_board_s: f64,
    pub slow_alight_s: f64,
    pub quick_board_s: f64,
    pub quick_alight_s: f64,
    /// Number of slow passengers per quick passenger.
    pub slow_per_quick: f64,
}

impl PassengerTypes {
    /// Probability that a generated passenger is of the slow type.
    pub fn slow_share(&self) -> f64 {
        self.slow_per_quick / (1.0 + self.slow_per_quick)
    }

    pub fn mean_board_s(&self) -> f64 {
        let p = self.slow_share();
        p * self.slow_board_s + (1.0 - p) * self.quick_board_s
    }

    pub fn mean_alight_s(&self) -> f64 {
        let p = self.slow_share();
        p * self.slow_alight_s + (1.0 - p) * self.quick_alight_s
    }
}

impl Default for PassengerTypes {
    fn default() -> Self {
        Self {
            slow_board_s: 4.0,
            slow_alight_s: 2.0,
            quick_board_s: 1.0,
            quick_alight_s: 0.5,
            slow_per_quick: 1.0 / 9.0,
        }
    }
}

/// Probabilities over the 1st, 2nd, ... downstream stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationSeries {
    pub id: usize,
    pub probabilities: Vec<f64>,
}

/// Discrete holding times available at a stop: `{0, τ, 2τ, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub id: String,
    pub unit_s: f64,
    pub holds_s: Vec<f64>,
}

impl ActionSet {
    /// `A_{unit x max_units}`, i.e. `{0, unit, ..., unit * max_units}`.
    pub fn uniform(unit_s: u32, max_units: u32) -> Self {
        Self {
            id: format!("A{unit_s}x{max_units}"),
            unit_s: f64::from(unit_s),
            holds_s: (0..=max_units).map(|n| f64::from(n * unit_s)).collect(),
        }
    }

    /// Parses a name such as `A2x5` or `2x5`.
    pub fn parse(name: &str) -> Option<Self> {
        let body = name.strip_prefix(['A', 'a']).unwrap_or(name);
        let (unit, max) = body.split_once(['x', 'X'])?;
        let unit: u32 = unit.trim().parse().ok()?;
        let max: u32 = max.trim().parse().ok()?;
        (unit > 0).then(|| Self::uniform(unit, max))
    }

    pub fn max_hold_s(&self) -> f64 {
        self.holds_s.last().copied().unwrap_or(0.0)
    }

    pub fn contains(&self, hold_s: f64) -> bool {
        self.holds_s.iter().any(|h| (h - hold_s).abs() < 1e-9)
    }

    pub fn len(&self) -> usize {
        self.holds_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holds_s.is_empty()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.unit_s > 0.0 && self.unit_s.is_finite()) {
            return Err(invalid(format!("action set {}: unit_s must be positive", self.id)));
        }
        if self.holds_s.is_empty() {
            return Err(invalid(format!("action set {}: empty", self.id)));
        }
        if !self.contains(0.0) {
            return Err(invalid(format!("action set {}: must contain holding time 0", self.id)));
        }
        if self.holds_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(format!("action set {}: holds must be strictly increasing", self.id)));
        }
        for h in &self.holds_s {
            let units = h / self.unit_s;
            if (units - units.round()).abs() > 1e-9 || *h < 0.0 {
                return Err(invalid(format!(
                    "action set {}: hold {h} is not a non-negative multiple of {}",
                    self.id, self.unit_s
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopSpec {
    pub id: usize,
    pub arrival_rate_per_min: f64,
    /// Id of the destination series used by passengers generated here.
    pub series: usize,
    /// Id of the stop's action set.
    pub action_set: String,
}

/// Bus-line segment from stop `id` to the next stop downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub id: usize,
    pub length_m: f64,
    /// Lengths of the road pieces between consecutive ends (stops or
    /// intersections). Defaults to an equal split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_piece_lengths_m: Option<Vec<f64>>,
}

/// Pre-timed two-phase signal on the bus approach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionSpec {
    pub id: usize,
    /// Segment containing the intersection.
    pub segment: usize,
    pub red_s: f64,
    pub green_s: f64,
    pub initial_phase: Phase,
    /// Time left in the initial phase at t = 0.
    pub initial_remaining_s: f64,
}

impl IntersectionSpec {
    pub fn cycle_s(&self) -> f64 {
        self.red_s + self.green_s
    }

    /// Mean delay for a bus arriving at a uniformly random instant: `red² / (2 cycle)`.
    pub fn expected_delay_s(&self) -> f64 {
        expected_signal_delay(self.red_s, self.cycle_s())
    }

    /// Delay of a bus reaching the stop line at `arrival_s`.
    ///
    /// Arriving exactly on a phase switch takes the new phase.
    pub fn delay_at(&self, arrival_s: f64) -> f64 {
        let cycle = self.cycle_s();
        if self.red_s <= 0.0 || cycle <= 0.0 {
            return 0.0;
        }
        // Position within a cycle laid out as [red | green].
        let start = match self.initial_phase {
            Phase::Red => self.red_s - self.initial_remaining_s,
            Phase::Green => cycle - self.initial_remaining_s,
        };
        let pos = (start + arrival_s).rem_euclid(cycle);
        if pos < self.red_s {
            self.red_s - pos
        } else {
            0.0
        }
    }
}

pub fn expected_signal_delay(red_s: f64, cycle_s: f64) -> f64 {
    if cycle_s <= 0.0 {
        return 0.0;
    }
    0.5 * red_s * red_s / cycle_s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: usize,
    pub capacity: u32,
    pub initial_stop: usize,
    /// Time remaining for the bus to be activated at the beginning.
    pub trab_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusLineConfig {
    pub name: String,
    pub line_length_m: f64,
    pub cruise_speed_kmh: f64,
    pub horizon_s: f64,
    /// Standard deviation of a road piece's travel time per km of length.
    pub travel_noise_s_per_km: f64,
    pub passengers: PassengerTypes,
    pub destination_series: Vec<DestinationSeries>,
    pub action_sets: Vec<ActionSet>,
    pub stops: Vec<StopSpec>,
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub intersections: Vec<IntersectionSpec>,
    pub buses: Vec<BusSpec>,
}

impl BusLineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Short content hash, used to refuse comparisons across different lines.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn n_stops(&self) -> usize {
        self.stops.len()
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn speed_mps(&self) -> f64 {
        self.cruise_speed_kmh / 3.6
    }

    /// Destination probabilities for passengers generated at stop index `stop`.
    pub fn series_of(&self, stop: usize) -> &[f64] {
        let id = self.stops[stop].series;
        &self
            .destination_series
            .iter()
            .find(|s| s.id == id)
            .expect("validated config")
            .probabilities
    }

    pub fn action_set_of(&self, stop: usize) -> &ActionSet {
        let id = &self.stops[stop].action_set;
        self.action_sets.iter().find(|a| &a.id == id).expect("validated config")
    }

    /// Intersection indices on segment index `seg`, in travel order.
    pub fn intersections_on(&self, seg: usize) -> Vec<usize> {
        self.intersections
            .iter()
            .enumerate()
            .filter(|(_, i)| i.segment == seg + 1)
            .map(|(k, _)| k)
            .collect()
    }

    /// Road-piece lengths of segment index `seg`.
    pub fn road_pieces(&self, seg: usize) -> Vec<f64> {
        let spec = &self.segments[seg];
        match &spec.road_piece_lengths_m {
            Some(pieces) => pieces.clone(),
            None => {
                let n = self.intersections_on(seg).len() + 1;
                vec![spec.length_m / n as f64; n]
            }
        }
    }

    /// Replaces every stop's action set with `set`.
    pub fn with_uniform_action_set(mut self, set: ActionSet) -> Self {
        for stop in &mut self.stops {
            stop.action_set = set.id.clone();
        }
        self.action_sets = vec![set];
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;

        if !finite_pos(self.cruise_speed_kmh) {
            return Err(invalid("cruise_speed_kmh must be positive"));
        }
        if !finite_pos(self.horizon_s) {
            return Err(invalid("horizon_s must be positive"));
        }
        if !finite_nonneg(self.travel_noise_s_per_km) {
            return Err(invalid("travel_noise_s_per_km must be non-negative"));
        }
        let p = &self.passengers;
        for (name, v) in [
            ("slow_board_s", p.slow_board_s),
            ("slow_alight_s", p.slow_alight_s),
            ("quick_board_s", p.quick_board_s),
            ("quick_alight_s", p.quick_alight_s),
            ("slow_per_quick", p.slow_per_quick),
        ] {
            if !finite_nonneg(v) {
                return Err(invalid(format!("passengers.{name} must be non-negative")));
            }
        }

        let n_e = self.stops.len();
        if n_e < 2 {
            return Err(invalid("a line needs at least two stops"));
        }

        for set in &self.action_sets {
            set.validate()?;
        }
        for series in &self.destination_series {
            if series.probabilities.is_empty() {
                return Err(invalid(format!("destination series {} is empty", series.id)));
            }
            if series.probabilities.iter().any(|&v| !finite_nonneg(v)) {
                return Err(invalid(format!("destination series {} has a negative entry", series.id)));
            }
            let sum: f64 = series.probabilities.iter().sum();
            if (sum - 1.0).abs() > SERIES_SUM_TOLERANCE {
                return Err(invalid(format!(
                    "destination series {} sums to {sum}, expected 1",
                    series.id
                )));
            }
        }

        for (k, stop) in self.stops.iter().enumerate() {
            if stop.id != k + 1 {
                return Err(invalid(format!("stop ids must be 1..{n_e} in order, found {}", stop.id)));
            }
            if !finite_nonneg(stop.arrival_rate_per_min) {
                return Err(invalid(format!("stop {}: arrival rate must be non-negative", stop.id)));
            }
            let series = self
                .destination_series
                .iter()
                .find(|s| s.id == stop.series)
                .ok_or_else(|| invalid(format!("stop {}: unknown destination series {}", stop.id, stop.series)))?;
            if series.probabilities.len() >= n_e {
                return Err(invalid(format!(
                    "stop {}: destination series {} reaches past the origin ({} entries, {n_e} stops)",
                    stop.id,
                    series.id,
                    series.probabilities.len()
                )));
            }
            if !self.action_sets.iter().any(|a| a.id == stop.action_set) {
                return Err(invalid(format!("stop {}: unknown action set {:?}", stop.id, stop.action_set)));
            }
        }

        if self.segments.len() != n_e {
            return Err(invalid(format!(
                "expected {n_e} segments (one per stop), found {}",
                self.segments.len()
            )));
        }
        for (k, inter) in self.intersections.iter().enumerate() {
            if inter.id != k + 1 {
                return Err(invalid(format!("intersection ids must be in order, found {}", inter.id)));
            }
            if inter.segment == 0 || inter.segment > n_e {
                return Err(invalid(format!("intersection {}: unknown segment {}", inter.id, inter.segment)));
            }
            if !finite_nonneg(inter.red_s) || !finite_nonneg(inter.green_s) || inter.cycle_s() <= 0.0 {
                return Err(invalid(format!("intersection {}: bad phase lengths", inter.id)));
            }
            let initial_len = match inter.initial_phase {
                Phase::Red => inter.red_s,
                Phase::Green => inter.green_s,
            };
            if !(inter.initial_remaining_s > 0.0 && inter.initial_remaining_s <= initial_len) {
                return Err(invalid(format!(
                    "intersection {}: initial remaining {} outside (0, {initial_len}]",
                    inter.id, inter.initial_remaining_s
                )));
            }
        }
        let mut total = 0.0;
        for (k, seg) in self.segments.iter().enumerate() {
            if seg.id != k + 1 {
                return Err(invalid(format!("segment ids must be in order, found {}", seg.id)));
            }
            if !finite_pos(seg.length_m) {
                return Err(invalid(format!("segment {}: length must be positive", seg.id)));
            }
            if let Some(pieces) = &seg.road_piece_lengths_m {
                let expected = self.intersections_on(k).len() + 1;
                if pieces.len() != expected {
                    return Err(invalid(format!(
                        "segment {}: {} road pieces for {} intersections",
                        seg.id,
                        pieces.len(),
                        expected - 1
                    )));
                }
                if pieces.iter().any(|&l| !finite_pos(l)) {
                    return Err(invalid(format!("segment {}: road pieces must be positive", seg.id)));
                }
                let sum: f64 = pieces.iter().sum();
                if (sum - seg.length_m).abs() > 1e-6 {
                    return Err(invalid(format!(
                        "segment {}: road pieces sum to {sum}, segment length is {}",
                        seg.id, seg.length_m
                    )));
                }
            }
            total += seg.length_m;
        }
        if (total - self.line_length_m).abs() > LINE_LENGTH_TOLERANCE_M {
            return Err(invalid(format!(
                "segment lengths sum to {total} m, line length is {} m",
                self.line_length_m
            )));
        }

        if self.buses.is_empty() {
            return Err(invalid("a line needs at least one bus"));
        }
        for (k, bus) in self.buses.iter().enumerate() {
            if bus.id != k + 1 {
                return Err(invalid(format!("bus ids must be in order, found {}", bus.id)));
            }
            if bus.capacity == 0 {
                return Err(invalid(format!("bus {}: capacity must be positive", bus.id)));
            }
            if bus.initial_stop == 0 || bus.initial_stop > n_e {
                return Err(invalid(format!("bus {}: unknown initial stop {}", bus.id, bus.initial_stop)));
            }
            if !finite_nonneg(bus.trab_s) {
                return Err(invalid(format!("bus {}: trab_s must be non-negative", bus.id)));
            }
        }
        Ok(())
    }
}
