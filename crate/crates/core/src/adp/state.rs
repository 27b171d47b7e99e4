//! Learning state and its one-stage transition.

use crate::control::Observation;
use crate::headways::BusPlan;

/// Constants that map times, stop indices and holds into network inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputScale {
    /// Reference headway `H̃`.
    pub headway_s: f64,
    pub n_buses: usize,
    pub n_stops: usize,
    pub max_hold_s: f64,
}

impl InputScale {
    /// Width of the state part of the input.
    pub fn state_width(&self) -> usize {
        self.n_stops + 2 * self.n_buses
    }

    pub fn input_width(&self) -> usize {
        self.state_width() + 1
    }

    pub fn hold(&self, hold_s: f64) -> f64 {
        if self.max_hold_s > 0.0 {
            hold_s / self.max_hold_s
        } else {
            0.0
        }
    }
}

/// Latest arrival per stop, time to the next activation and the stop of
/// that activation per bus, plus the clock the timers are measured from.
#[derive(Debug, Clone, PartialEq)]
pub struct AdpState {
    pub latest_arrival_s: Vec<f64>,
    pub time_to_activation_s: Vec<f64>,
    pub next_stop: Vec<usize>,
    pub clock_s: f64,
}

impl AdpState {
    pub fn from_plans(now_s: f64, plans: &[BusPlan], latest_arrival_s: &[f64]) -> Self {
        Self {
            latest_arrival_s: latest_arrival_s.to_vec(),
            time_to_activation_s: plans.iter().map(|p| (p.activation_s - now_s).max(0.0)).collect(),
            next_stop: plans.iter().map(|p| p.next_stop).collect(),
            clock_s: now_s,
        }
    }

    pub fn from_observation(obs: &Observation<'_>) -> Self {
        Self::from_plans(obs.now_s, obs.plans, obs.latest_arrival_s)
    }

    /// Bus with the smallest timer; ties go to the lowest index.
    pub fn next_bus(&self) -> usize {
        argmin(&self.time_to_activation_s)
    }

    /// Appends the state part of the network input to `out`.
    pub fn write_features(&self, scale: &InputScale, out: &mut Vec<f64>) {
        write_features(self.clock_s, &self.latest_arrival_s, self.next_stop.iter().copied(), &self.time_to_activation_s, scale, out);
    }
}

pub(crate) fn write_features(
    clock_s: f64,
    latest_arrival_s: &[f64],
    next_stop: impl Iterator<Item = usize>,
    time_to_activation_s: &[f64],
    scale: &InputScale,
    out: &mut Vec<f64>,
) {
    let span = scale.n_buses as f64 * scale.headway_s;
    out.extend(latest_arrival_s.iter().map(|la| (la - clock_s) / span));
    out.extend(time_to_activation_s.iter().map(|t| t / scale.headway_s));
    out.extend(next_stop.map(|e| e as f64 / scale.n_stops as f64));
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Realised travel and dwell that follow a hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Information {
    /// Travel time to the next stop.
    pub travel_s: f64,
    /// Dwell at the next stop until activation.
    pub dwell_s: f64,
}

/// Activates the bus with the smallest timer, holds it for `hold_s` and moves
/// it to its next activation using `info`. Every timer is then shifted by the
/// timer of the activated bus and the clock advances by the same amount.
pub fn state_transition(s: &AdpState, hold_s: f64, info: Information, n_stops: usize) -> AdpState {
    let mut next = s.clone();
    let b = s.next_bus();
    let t_min = s.time_to_activation_s[b];
    next.time_to_activation_s[b] += hold_s + info.travel_s + info.dwell_s;
    let e = (s.next_stop[b] + 1) % n_stops;
    next.next_stop[b] = e;
    next.latest_arrival_s[e] = s.clock_s + next.time_to_activation_s[b] - info.dwell_s;
    for t in &mut next.time_to_activation_s {
        *t -= t_min;
    }
    next.clock_s += t_min;
    next
}
