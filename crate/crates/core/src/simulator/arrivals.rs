//! Passenger generation, one second after the other.

use rand::Rng;

use crate::model::BusLineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassengerKind {
    Slow,
    Quick,
}

impl PassengerKind {
    pub fn label(self) -> &'static str {
        match self {
            PassengerKind::Slow => "s",
            PassengerKind::Quick => "q",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Passenger {
    pub id: usize,
    pub origin: usize,
    pub destination: usize,
    pub kind: PassengerKind,
    pub arrive_s: f64,
    pub board_s: Option<f64>,
    pub alight_s: Option<f64>,
    pub bus: Option<usize>,
}

/// State of a passenger when the observation period ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PassengerClass {
    /// Trip completed.
    Alighted,
    /// Still riding.
    Onboard,
    /// Never boarded.
    Waiting,
}

impl PassengerClass {
    pub fn label(self) -> &'static str {
        match self {
            PassengerClass::Alighted => "P1",
            PassengerClass::Onboard => "P2",
            PassengerClass::Waiting => "P3",
        }
    }
}

impl Passenger {
    pub fn class(&self) -> PassengerClass {
        match (self.board_s, self.alight_s) {
            (Some(_), Some(_)) => PassengerClass::Alighted,
            (Some(_), None) => PassengerClass::Onboard,
            _ => PassengerClass::Waiting,
        }
    }
}

/// All passengers of an episode plus, per stop, their ids in arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrivals {
    pub passengers: Vec<Passenger>,
    pub by_stop: Vec<Vec<usize>>,
}

/// Draws arrivals for every integer second in `[0, horizon_s)`.
///
/// Draw order is tick-major: for each second, each stop in turn gets a
/// Bernoulli trial and, on success, a type draw and a destination draw.
pub fn generate_arrivals(config: &BusLineConfig, rng: &mut impl Rng, horizon_s: f64) -> Arrivals {
    let n_e = config.n_stops();
    let slow_share = config.passengers.slow_share();
    let probs: Vec<f64> = config.stops.iter().map(|s| (s.arrival_rate_per_min / 60.0).min(1.0)).collect();
    let series: Vec<&[f64]> = (0..n_e).map(|e| config.series_of(e)).collect();
    let totals: Vec<f64> = series.iter().map(|s| s.iter().sum()).collect();

    let mut passengers = Vec::new();
    let mut by_stop = vec![Vec::new(); n_e];
    let ticks = horizon_s.ceil().max(0.0) as u64;
    for tick in 0..ticks {
        for origin in 0..n_e {
            if probs[origin] <= 0.0 || !rng.random_bool(probs[origin]) {
                continue;
            }
            let kind = if rng.random_bool(slow_share) { PassengerKind::Slow } else { PassengerKind::Quick };
            let u = rng.random::<f64>() * totals[origin];
            let mut acc = 0.0;
            let mut hops = series[origin].len();
            for (k, p) in series[origin].iter().enumerate() {
                acc += p;
                if u < acc {
                    hops = k + 1;
                    break;
                }
            }
            let id = passengers.len();
            passengers.push(Passenger {
                id,
                origin,
                destination: (origin + hops) % n_e,
                kind,
                arrive_s: tick as f64,
                board_s: None,
                alight_s: None,
                bus: None,
            });
            by_stop[origin].push(id);
        }
    }
    Arrivals { passengers, by_stop }
}
