//! Discrete-event simulation of one observation period.
//!
//! Each bus cycles through three states: dwelling (doors open after arrival,
//! until activation), holding (from activation to departure) and en route
//! (a sampled [`Traversal`] of the next segment). The controller is queried
//! once per activation; every departure is recorded as a [`StageRecord`]
//! with the headways at that instant.

pub mod arrivals;
pub mod dwell;
pub mod export;
pub mod travel;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::control::{Controller, Observation};
use crate::headways::{BusPlan, HeadwayError, LineModel, LineSnapshot};
use crate::model::BusLineConfig;
use crate::rng::{stream, Stream};

pub use arrivals::{generate_arrivals, Arrivals, Passenger, PassengerClass, PassengerKind};
pub use dwell::{dwell_and_hold, StopContext, StopQueue};
pub use travel::{sample_piece_time, SegmentLayout, Step, StepKind, Traversal};

/// Headways below this share of the expected system headway count as bunching.
pub const DEFAULT_BUNCHING_RATIO: f64 = 0.05;
pub const DEFAULT_TRAJECTORY_INTERVAL_S: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("bus {bus} at stop {stop}: hold {hold_s} s is not in the stop's action set")]
    InvalidHold { bus: usize, stop: usize, hold_s: f64 },
    #[error(transparent)]
    Headway(#[from] HeadwayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// Position in departure order.
    pub index: usize,
    /// Departure time.
    pub time_s: f64,
    pub bus: usize,
    pub stop: usize,
    pub activation_s: f64,
    pub hold_s: f64,
    /// Hold seconds with no passenger at the doors.
    pub idle_hold_s: f64,
    /// Whether the stop is one the controller acts on.
    pub controlled: bool,
    pub boarded: usize,
    pub alighted: usize,
    pub headways_s: Vec<f64>,
    pub mean_h_s: f64,
    pub sigma_h_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time_s: f64,
    pub bus: usize,
    /// Distance driven since the start of the line's coordinate system.
    pub odometer_m: f64,
    /// Position along the line, in `[0, X)`.
    pub position_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub line: String,
    pub fingerprint: String,
    pub seed: u64,
    pub horizon_s: f64,
    pub esh_s: f64,
    pub stages: Vec<StageRecord>,
    pub passengers: Vec<Passenger>,
    pub trajectories: Vec<TrajectorySample>,
    pub bunching: bool,
}

impl EpisodeLog {
    pub fn controlled_stages(&self) -> impl Iterator<Item = &StageRecord> {
        self.stages.iter().filter(|s| s.controlled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Arrive = 0,
    Activate = 1,
    Depart = 2,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time_s: f64,
    kind: EventKind,
    /// Secondary order: bus id for activations, scheduling order otherwise.
    tie: u64,
    bus: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time_s
            .total_cmp(&self.time_s)
            .then(other.kind.cmp(&self.kind))
            .then(other.tie.cmp(&self.tie))
    }
}

#[derive(Debug, Clone)]
enum BusState {
    Dwelling { stop: usize, arrived_s: f64, activation_s: f64 },
    Holding {
        stop: usize,
        activation_s: f64,
        depart_s: f64,
        hold_s: f64,
        idle_s: f64,
        controlled: bool,
        boarded: usize,
        alighted: usize,
    },
    EnRoute { traversal: Traversal },
}

#[derive(Debug, Clone)]
struct BusRuntime {
    capacity: usize,
    onboard: Vec<usize>,
    state: BusState,
    /// Odometer at the start of the current state.
    odometer_m: f64,
    /// Passengers boarded/alighted during the current visit's arrival phase.
    visit_counts: (usize, usize),
}

/// A line ready to be simulated.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: BusLineConfig,
    model: LineModel,
    esh_s: f64,
    fingerprint: String,
    layouts: Vec<SegmentLayout>,
    stop_offsets_m: Vec<f64>,
    pub bunching_ratio: f64,
    pub trajectory_interval_s: f64,
}

impl Simulation {
    pub fn new(config: BusLineConfig) -> Result<Self, SimError> {
        let model = LineModel::new(&config);
        let esh_s = model.expected_system_headway()?;
        let layouts = SegmentLayout::all(&config);
        let mut stop_offsets_m = Vec::with_capacity(config.n_stops());
        let mut x = 0.0;
        for seg in &config.segments {
            stop_offsets_m.push(x);
            x += seg.length_m;
        }
        Ok(Self {
            fingerprint: config.fingerprint(),
            config,
            model,
            esh_s,
            layouts,
            stop_offsets_m,
            bunching_ratio: DEFAULT_BUNCHING_RATIO,
            trajectory_interval_s: DEFAULT_TRAJECTORY_INTERVAL_S,
        })
    }

    pub fn config(&self) -> &BusLineConfig {
        &self.config
    }

    pub fn model(&self) -> &LineModel {
        &self.model
    }

    pub fn esh_s(&self) -> f64 {
        self.esh_s
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn run(&self, controller: &mut dyn Controller, seed: u64) -> Result<EpisodeLog, SimError> {
        controller.begin_episode();
        let log = Episode::new(self, seed).run(controller)?;
        controller.end_episode(&log);
        Ok(log)
    }
}

pub fn run_episode(config: &BusLineConfig, controller: &mut dyn Controller, seed: u64) -> Result<EpisodeLog, SimError> {
    Simulation::new(config.clone())?.run(controller, seed)
}

struct Episode<'a> {
    sim: &'a Simulation,
    seed: u64,
    passengers: Vec<Passenger>,
    queues: Vec<StopQueue>,
    buses: Vec<BusRuntime>,
    latest_arrival_s: Vec<f64>,
    /// Arrival time of the last bus scheduled on each segment.
    segment_last_arrival_s: Vec<f64>,
    events: BinaryHeap<Event>,
    seq: u64,
    travel_rng: rand_chacha::ChaCha8Rng,
    stages: Vec<StageRecord>,
    trajectories: Vec<TrajectorySample>,
    next_sample_s: f64,
    bunching: bool,
}

impl<'a> Episode<'a> {
    fn new(sim: &'a Simulation, seed: u64) -> Self {
        let config = &sim.config;
        let horizon = config.horizon_s;
        let arrivals = generate_arrivals(config, &mut stream(seed, Stream::Arrivals), horizon);
        let queues = arrivals.by_stop.into_iter().map(StopQueue::new).collect();
        let buses = config
            .buses
            .iter()
            .map(|b| BusRuntime {
                capacity: b.capacity as usize,
                onboard: Vec::new(),
                state: BusState::Dwelling { stop: b.initial_stop - 1, arrived_s: 0.0, activation_s: b.trab_s },
                odometer_m: sim.stop_offsets_m[b.initial_stop - 1],
                visit_counts: (0, 0),
            })
            .collect();
        let mut episode = Self {
            sim,
            seed,
            passengers: arrivals.passengers,
            queues,
            buses,
            latest_arrival_s: vec![0.0; config.n_stops()],
            segment_last_arrival_s: vec![f64::NEG_INFINITY; config.n_stops()],
            events: BinaryHeap::new(),
            seq: 0,
            travel_rng: stream(seed, Stream::Travel),
            stages: Vec::new(),
            trajectories: Vec::new(),
            next_sample_s: 0.0,
            bunching: false,
        };
        for (b, spec) in config.buses.iter().enumerate() {
            episode.push(spec.trab_s, EventKind::Activate, b);
        }
        episode
    }

    fn push(&mut self, time_s: f64, kind: EventKind, bus: usize) {
        let tie = if kind == EventKind::Activate {
            bus as u64
        } else {
            self.seq += 1;
            self.seq
        };
        self.events.push(Event { time_s, kind, tie, bus });
    }

    fn run(mut self, controller: &mut dyn Controller) -> Result<EpisodeLog, SimError> {
        let horizon = self.sim.config.horizon_s;
        while let Some(event) = self.events.pop() {
            if event.time_s > horizon {
                break;
            }
            self.sample_trajectories_before(event.time_s);
            match event.kind {
                EventKind::Arrive => self.arrive(event.bus, event.time_s),
                EventKind::Activate => self.activate(event.bus, event.time_s, controller)?,
                EventKind::Depart => self.depart(event.bus, event.time_s)?,
            }
        }
        self.sample_trajectories_before(horizon + self.sim.trajectory_interval_s * 0.5);
        Ok(self.finish())
    }

    fn stop_context(&mut self, bus: usize, stop: usize) -> StopContext<'_> {
        let runtime = &mut self.buses[bus];
        StopContext {
            passengers: &mut self.passengers,
            queue: &mut self.queues[stop],
            onboard: &mut runtime.onboard,
            capacity: runtime.capacity,
            bus,
            stop,
            types: &self.sim.config.passengers,
        }
    }

    fn arrive(&mut self, bus: usize, t: f64) {
        let BusState::EnRoute { traversal } = &self.buses[bus].state else {
            unreachable!("arrival of a bus that is not travelling");
        };
        let stop = (traversal.segment + 1) % self.sim.config.n_stops();
        let length = self.sim.config.segments[traversal.segment].length_m;
        self.latest_arrival_s[stop] = t;
        let outcome = self.stop_context(bus, stop).arrive(t);
        let runtime = &mut self.buses[bus];
        runtime.odometer_m += length;
        runtime.visit_counts = (outcome.boarded, outcome.alighted);
        runtime.state = BusState::Dwelling { stop, arrived_s: t, activation_s: outcome.activation_s };
        self.push(outcome.activation_s, EventKind::Activate, bus);
    }

    fn activate(&mut self, bus: usize, t: f64, controller: &mut dyn Controller) -> Result<(), SimError> {
        let BusState::Dwelling { stop, .. } = self.buses[bus].state else {
            unreachable!("activation of a bus that is not dwelling");
        };
        let (plans, latest) = self.plans(t);
        let obs = Observation { now_s: t, bus, stop, latest_arrival_s: &latest, plans: &plans };
        let hold_s = controller.decide(&obs).hold_s;
        let allowed = hold_s.is_finite()
            && hold_s >= 0.0
            && (!controller.restricted() || self.sim.config.action_set_of(stop).contains(hold_s));
        if !allowed {
            return Err(SimError::InvalidHold { bus: bus + 1, stop: stop + 1, hold_s });
        }
        let controlled = controller.controls(stop);
        let hold = self.stop_context(bus, stop).hold(t, hold_s);
        let runtime = &mut self.buses[bus];
        let (boarded, alighted) = runtime.visit_counts;
        runtime.state = BusState::Holding {
            stop,
            activation_s: t,
            depart_s: hold.departure_s,
            hold_s,
            idle_s: hold.idle_hold_s,
            controlled,
            boarded: boarded + hold.boarded,
            alighted,
        };
        self.push(hold.departure_s, EventKind::Depart, bus);
        Ok(())
    }

    fn depart(&mut self, bus: usize, t: f64) -> Result<(), SimError> {
        let BusState::Holding { stop, activation_s, hold_s, idle_s, controlled, boarded, alighted, .. } =
            self.buses[bus].state
        else {
            unreachable!("departure of a bus that is not holding");
        };
        let traversal = Traversal::sample(
            &self.sim.config,
            &self.sim.layouts[stop],
            stop,
            t,
            self.segment_last_arrival_s[stop],
            &mut self.travel_rng,
        );
        self.segment_last_arrival_s[stop] = traversal.arrive_s;
        self.push(traversal.arrive_s, EventKind::Arrive, bus);
        self.buses[bus].state = BusState::EnRoute { traversal };

        let (plans, latest) = self.plans(t);
        let n_e = self.sim.config.n_stops();
        let points: Vec<_> = plans.iter().map(|p| p.point_at(t, n_e)).collect();
        let snapshot = self
            .sim
            .model
            .snapshot(&LineSnapshot { now_s: t, latest_arrival_s: &latest, buses: &points })?;
        let threshold = self.sim.bunching_ratio * self.sim.esh_s;
        if snapshot.per_bus_h.iter().any(|&h| h < threshold) {
            self.bunching = true;
        }
        self.stages.push(StageRecord {
            index: self.stages.len(),
            time_s: t,
            bus,
            stop,
            activation_s,
            hold_s,
            idle_hold_s: idle_s,
            controlled,
            boarded,
            alighted,
            headways_s: snapshot.per_bus_h,
            mean_h_s: snapshot.mean_h,
            sigma_h_s: snapshot.sigma_h,
        });
        Ok(())
    }

    /// Expected schedule of every bus to its next activation, and the latest
    /// arrival per stop including arrivals already expected.
    fn plans(&self, now: f64) -> (Vec<BusPlan>, Vec<f64>) {
        let model = &self.sim.model;
        let n_e = model.n_stops();
        let mut latest = self.latest_arrival_s.clone();
        let mut plans = Vec::with_capacity(self.buses.len());
        let mut upcoming = Vec::new();
        for (b, runtime) in self.buses.iter().enumerate() {
            let plan = match &runtime.state {
                BusState::Dwelling { stop, arrived_s, activation_s } => BusPlan {
                    next_stop: *stop,
                    depart_s: *arrived_s,
                    arrive_s: *arrived_s,
                    activation_s: *activation_s,
                },
                BusState::Holding { stop, depart_s, .. } => {
                    let arrive_s = depart_s + model.segment_s(*stop);
                    upcoming.push((arrive_s, b));
                    BusPlan { next_stop: (stop + 1) % n_e, depart_s: *depart_s, arrive_s, activation_s: arrive_s }
                }
                BusState::EnRoute { traversal } => {
                    let arrive_s = now + traversal.expected_remaining(now);
                    upcoming.push((arrive_s, b));
                    BusPlan {
                        next_stop: (traversal.segment + 1) % n_e,
                        depart_s: traversal.depart_s,
                        arrive_s,
                        activation_s: arrive_s,
                    }
                }
            };
            plans.push(plan);
        }
        upcoming.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (arrive_s, b) in upcoming {
            let stop = plans[b].next_stop;
            plans[b].activation_s = arrive_s + model.expected_dwell(stop, arrive_s - latest[stop]);
            latest[stop] = latest[stop].max(arrive_s);
        }
        (plans, latest)
    }

    fn position_at(&self, bus: usize, time_s: f64) -> f64 {
        let runtime = &self.buses[bus];
        match &runtime.state {
            BusState::EnRoute { traversal } => runtime.odometer_m + traversal.distance_at(time_s),
            _ => runtime.odometer_m,
        }
    }

    fn sample_trajectories_before(&mut self, time_s: f64) {
        let line = self.sim.config.line_length_m;
        while self.next_sample_s < time_s && self.next_sample_s <= self.sim.config.horizon_s {
            let t = self.next_sample_s;
            for bus in 0..self.buses.len() {
                let odometer_m = self.position_at(bus, t);
                self.trajectories.push(TrajectorySample {
                    time_s: t,
                    bus,
                    odometer_m,
                    position_m: odometer_m.rem_euclid(line),
                });
            }
            self.next_sample_s += self.sim.trajectory_interval_s;
        }
    }

    fn finish(mut self) -> EpisodeLog {
        let horizon = self.sim.config.horizon_s;
        for p in &mut self.passengers {
            if p.board_s.is_some_and(|t| t > horizon) {
                p.board_s = None;
                p.bus = None;
                p.alight_s = None;
            }
            if p.alight_s.is_some_and(|t| t > horizon) {
                p.alight_s = None;
            }
        }
        EpisodeLog {
            line: self.sim.config.name.clone(),
            fingerprint: self.sim.fingerprint.clone(),
            seed: self.seed,
            horizon_s: horizon,
            esh_s: self.sim.esh_s,
            stages: self.stages,
            passengers: self.passengers,
            trajectories: self.trajectories,
            bunching: self.bunching,
        }
    }
}
