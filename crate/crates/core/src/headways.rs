//! Expected-time geometry of the line and headway estimates.
//!
//! Positions are measured in *expected travel time* along the circle: stop
//! `e` sits at coordinate [`LineModel::stop_coord`], and segment `e` takes
//! its expected cruise time plus the mean delay of its signals. Dwell is not
//! part of the coordinate; it is added per intervening stop from the demand
//! expected to have accumulated there.

use thiserror::Error;

use crate::model::BusLineConfig;

const ESH_TOLERANCE_S: f64 = 0.01;
const ESH_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeadwayError {
    #[error("headways need at least two buses")]
    SingleBus,
    #[error("expected system headway did not converge after {0} iterations")]
    NoConvergence(usize),
}

/// Where a bus is, as seen by the expected-time model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusLocation {
    /// At stop index `0..n_E` (arriving, dwelling or holding).
    AtStop(usize),
    /// Travelling to stop `to` with `remaining_s` expected seconds left.
    EnRoute { to: usize, remaining_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusPoint {
    pub location: BusLocation,
    /// Dwell the bus is already known to face at the stop it is heading to.
    /// Used when `latest_arrival` of that stop has been set by the bus itself.
    pub own_stop_dwell_s: Option<f64>,
}

impl BusPoint {
    pub fn at_stop(stop: usize) -> Self {
        Self { location: BusLocation::AtStop(stop), own_stop_dwell_s: None }
    }

    pub fn en_route(to: usize, remaining_s: f64) -> Self {
        Self { location: BusLocation::EnRoute { to, remaining_s }, own_stop_dwell_s: None }
    }
}

/// Expected schedule of a bus up to its next activation.
///
/// A bus that is dwelling before activation has `depart_s == arrive_s` in the
/// past; a bus that is holding has a future `depart_s` from the previous stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusPlan {
    /// Stop of the next activation.
    pub next_stop: usize,
    pub depart_s: f64,
    pub arrive_s: f64,
    pub activation_s: f64,
}

impl BusPlan {
    pub fn point_at(&self, time_s: f64, n_stops: usize) -> BusPoint {
        if time_s < self.depart_s {
            BusPoint::at_stop((self.next_stop + n_stops - 1) % n_stops)
        } else if time_s < self.arrive_s {
            BusPoint {
                location: BusLocation::EnRoute { to: self.next_stop, remaining_s: self.arrive_s - time_s },
                own_stop_dwell_s: Some(self.activation_s - self.arrive_s),
            }
        } else {
            BusPoint::at_stop(self.next_stop)
        }
    }
}

/// Inputs of one headway evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LineSnapshot<'a> {
    pub now_s: f64,
    /// Latest bus arrival time at every stop.
    pub latest_arrival_s: &'a [f64],
    pub buses: &'a [BusPoint],
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadwaySnapshot {
    pub time_s: f64,
    pub per_bus_h: Vec<f64>,
    /// Dynamic circle headway (mean of `per_bus_h`).
    pub mean_h: f64,
    /// Population standard deviation of `per_bus_h`.
    pub sigma_h: f64,
}

impl HeadwaySnapshot {
    pub fn from_headways(time_s: f64, per_bus_h: Vec<f64>) -> Self {
        let (mean_h, sigma_h) = mean_and_population_std(&per_bus_h);
        Self { time_s, per_bus_h, mean_h, sigma_h }
    }
}

pub fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Expected-value view of a line, precomputed once per config.
#[derive(Debug, Clone, PartialEq)]
pub struct LineModel {
    segment_s: Vec<f64>,
    stop_coord: Vec<f64>,
    circle_s: f64,
    dwell_per_gap: Vec<f64>,
    cruise_s: f64,
    signal_delay_s: f64,
    n_buses: usize,
}

impl LineModel {
    pub fn new(config: &BusLineConfig) -> Self {
        let n_e = config.n_stops();
        let v = config.speed_mps();
        let mut segment_s = vec![0.0; n_e];
        let mut cruise_s = 0.0;
        let mut signal_delay_s = 0.0;
        for (seg, spec) in config.segments.iter().enumerate() {
            let cruise = spec.length_m / v;
            let delay: f64 = config
                .intersections_on(seg)
                .into_iter()
                .map(|i| config.intersections[i].expected_delay_s())
                .sum();
            segment_s[seg] = cruise + delay;
            cruise_s += cruise;
            signal_delay_s += delay;
        }
        let mut stop_coord = Vec::with_capacity(n_e);
        let mut x = 0.0;
        for t in &segment_s {
            stop_coord.push(x);
            x += t;
        }

        // Expected boarding and alighting demand per second at each stop.
        let mut alight_rate = vec![0.0; n_e];
        for origin in 0..n_e {
            let rate = config.stops[origin].arrival_rate_per_min / 60.0;
            let series = config.series_of(origin);
            let total: f64 = series.iter().sum();
            for (k, p) in series.iter().enumerate() {
                alight_rate[(origin + k + 1) % n_e] += rate * p / total;
            }
        }
        let pax = &config.passengers;
        let dwell_per_gap = (0..n_e)
            .map(|e| {
                let board = config.stops[e].arrival_rate_per_min / 60.0 * pax.mean_board_s();
                let alight = alight_rate[e] * pax.mean_alight_s();
                board.max(alight)
            })
            .collect();

        Self {
            segment_s,
            stop_coord,
            circle_s: x,
            dwell_per_gap,
            cruise_s,
            signal_delay_s,
            n_buses: config.n_buses(),
        }
    }

    pub fn n_stops(&self) -> usize {
        self.segment_s.len()
    }

    /// Expected time from stop `seg` to the next stop, signals included.
    pub fn segment_s(&self, seg: usize) -> f64 {
        self.segment_s[seg]
    }

    pub fn stop_coord(&self, stop: usize) -> f64 {
        self.stop_coord[stop]
    }

    /// Expected time for one lap without dwelling.
    pub fn circle_s(&self) -> f64 {
        self.circle_s
    }

    pub fn cruise_s(&self) -> f64 {
        self.cruise_s
    }

    /// Sum of expected signal delays over the whole line.
    pub fn signal_delay_s(&self) -> f64 {
        self.signal_delay_s
    }

    /// Expected dwell at `stop` per second since the previous bus left demand there.
    pub fn dwell_per_gap(&self, stop: usize) -> f64 {
        self.dwell_per_gap[stop]
    }

    pub fn expected_dwell(&self, stop: usize, gap_s: f64) -> f64 {
        self.dwell_per_gap[stop] * gap_s.max(0.0)
    }

    fn coord(&self, location: BusLocation) -> f64 {
        match location {
            BusLocation::AtStop(e) => self.stop_coord[e],
            BusLocation::EnRoute { to, remaining_s } => {
                let x = (self.stop_coord[to] - remaining_s).rem_euclid(self.circle_s);
                if x >= self.circle_s {
                    0.0
                } else {
                    x
                }
            }
        }
    }

    /// Expected system headway, with stop dwells solved by fixed-point iteration.
    pub fn expected_system_headway(&self) -> Result<f64, HeadwayError> {
        let n_b = self.n_buses as f64;
        let dwell_total: f64 = self.dwell_per_gap.iter().sum();
        let mut h = self.circle_s / n_b;
        for _ in 0..ESH_MAX_ITERATIONS {
            let next = (self.circle_s + dwell_total * h) / n_b;
            if !next.is_finite() {
                break;
            }
            if (next - h).abs() < ESH_TOLERANCE_S {
                return Ok(next);
            }
            h = next;
        }
        Err(HeadwayError::NoConvergence(ESH_MAX_ITERATIONS))
    }

    /// `h_b` for every bus, in the order of `snapshot.buses`.
    pub fn headways(&self, snapshot: &LineSnapshot<'_>) -> Result<Vec<f64>, HeadwayError> {
        let mut out = Vec::with_capacity(snapshot.buses.len());
        self.headways_into(snapshot, &mut out)?;
        Ok(out)
    }

    pub fn headways_into(&self, snapshot: &LineSnapshot<'_>, out: &mut Vec<f64>) -> Result<(), HeadwayError> {
        let n = snapshot.buses.len();
        if n < 2 {
            return Err(HeadwayError::SingleBus);
        }
        let coords: Vec<f64> = snapshot.buses.iter().map(|b| self.coord(b.location)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| coords[a].total_cmp(&coords[b]).then(a.cmp(&b)));

        out.clear();
        out.resize(n, 0.0);
        for (rank, &b) in order.iter().enumerate() {
            let travel = if rank + 1 < n {
                coords[order[rank + 1]] - coords[b]
            } else {
                coords[order[0]] + self.circle_s - coords[b]
            };
            out[b] = travel + self.intervening_dwell(snapshot, b, travel);
        }
        Ok(())
    }

    pub fn snapshot(&self, snapshot: &LineSnapshot<'_>) -> Result<HeadwaySnapshot, HeadwayError> {
        Ok(HeadwaySnapshot::from_headways(snapshot.now_s, self.headways(snapshot)?))
    }

    /// Expected dwell at the stops strictly between bus `b` and the position
    /// `travel` seconds ahead of it. The bus's own current stop is excluded.
    fn intervening_dwell(&self, snapshot: &LineSnapshot<'_>, b: usize, travel: f64) -> f64 {
        let n_e = self.n_stops();
        let point = &snapshot.buses[b];
        let (mut stop, mut ds) = match point.location {
            BusLocation::AtStop(e) => ((e + 1) % n_e, self.segment_s[e]),
            BusLocation::EnRoute { to, remaining_s } => (to, remaining_s),
        };
        let mut own = match point.location {
            BusLocation::EnRoute { .. } => point.own_stop_dwell_s,
            BusLocation::AtStop(_) => None,
        };
        let mut dwell = 0.0;
        while ds < travel {
            let d = match own.take() {
                Some(d) => d,
                None => {
                    let arrive = snapshot.now_s + ds + dwell;
                    self.expected_dwell(stop, arrive - snapshot.latest_arrival_s[stop])
                }
            };
            dwell += d;
            ds += self.segment_s[stop];
            stop = (stop + 1) % n_e;
        }
        dwell
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_line, IntersectionSpec, Phase};

    fn ring(n_stops: usize, n_buses: usize, segment_m: f64, rate: f64) -> BusLineConfig {
        let mut c = builtin_line("L5").unwrap();
        c.intersections.clear();
        c.stops.truncate(n_stops);
        for s in &mut c.stops {
            s.arrival_rate_per_min = rate;
            s.series = 1;
        }
        c.destination_series = vec![crate::model::DestinationSeries { id: 1, probabilities: vec![1.0] }];
        c.segments.truncate(n_stops);
        for s in &mut c.segments {
            s.length_m = segment_m;
        }
        c.line_length_m = segment_m * n_stops as f64;
        c.buses.truncate(n_buses);
        for (k, b) in c.buses.iter_mut().enumerate() {
            b.initial_stop = 1 + k * n_stops / n_buses;
        }
        c.validate().unwrap();
        c
    }

    #[test]
    fn opposite_buses_split_the_circle() {
        // 4 segments of 2500 m at 30 km/h: 300 s each, 1200 s per lap.
        let model = LineModel::new(&ring(4, 2, 2500.0, 0.0));
        assert!((model.circle_s() - 1200.0).abs() < 1e-9);
        let buses = [BusPoint::at_stop(0), BusPoint::at_stop(2)];
        let la = [0.0; 4];
        let h = model.headways(&LineSnapshot { now_s: 0.0, latest_arrival_s: &la, buses: &buses }).unwrap();
        assert!((h[0] - 600.0).abs() < 1e-9 && (h[1] - 600.0).abs() < 1e-9);
    }

    #[test]
    fn same_position_gives_zero() {
        let model = LineModel::new(&ring(4, 2, 2500.0, 0.0));
        let buses = [BusPoint::en_route(1, 100.0), BusPoint::en_route(1, 100.0)];
        let la = [0.0; 4];
        let h = model.headways(&LineSnapshot { now_s: 0.0, latest_arrival_s: &la, buses: &buses }).unwrap();
        assert_eq!(h[0], 0.0);
        assert!((h[1] - 1200.0).abs() < 1e-9);
    }

    #[test]
    fn single_bus_is_an_error() {
        let model = LineModel::new(&ring(4, 1, 2500.0, 0.0));
        let buses = [BusPoint::at_stop(0)];
        let la = [0.0; 4];
        let snap = LineSnapshot { now_s: 0.0, latest_arrival_s: &la, buses: &buses };
        assert_eq!(model.headways(&snap), Err(HeadwayError::SingleBus));
    }

    #[test]
    fn piece_plus_signal() {
        let mut c = ring(2, 2, 1200.0, 0.0);
        c.intersections.push(IntersectionSpec {
            id: 1,
            segment: 1,
            red_s: 40.0,
            green_s: 50.0,
            initial_phase: Phase::Red,
            initial_remaining_s: 10.0,
        });
        c.validate().unwrap();
        let model = LineModel::new(&c);
        let signal = 40.0 * 40.0 / 2.0 / 90.0;
        // Bus 0 at the start of the 600 m piece before the signal, bus 1 just past it.
        let buses = [BusPoint::en_route(1, 72.0 + signal + 72.0), BusPoint::en_route(1, 72.0)];
        let la = [0.0; 2];
        let h = model.headways(&LineSnapshot { now_s: 0.0, latest_arrival_s: &la, buses: &buses }).unwrap();
        assert!((h[0] - 80.888_888_888_9).abs() < 1e-6);
    }

    #[test]
    fn intervening_dwell_uses_gap() {
        // 60 pax/min boarding, everyone rides one stop: kappa = max(1.3, 0.65) per second of gap.
        let model = LineModel::new(&ring(4, 2, 2500.0, 60.0));
        assert!((model.dwell_per_gap(0) - 1.3).abs() < 1e-12);
        let buses = [BusPoint::at_stop(0), BusPoint::at_stop(2)];
        let la = [0.0, 250.0, 0.0, 0.0];
        let h = model.headways(&LineSnapshot { now_s: 300.0, latest_arrival_s: &la, buses: &buses }).unwrap();
        // Bus 0 reaches stop 1 at 600, 350 s after the last bus: 455 s of dwell.
        assert!((h[0] - (600.0 + 1.3 * 350.0)).abs() < 1e-9);
        // Bus 1 only passes stop 3; its own stop 2 and the leader's stop 0 are excluded.
        assert!((h[1] - (600.0 + 1.3 * 600.0)).abs() < 1e-9);
    }

    #[test]
    fn dch_examples() {
        let s = HeadwaySnapshot::from_headways(0.0, vec![275.0; 13]);
        assert_eq!((s.mean_h, s.sigma_h), (275.0, 0.0));
        let s = HeadwaySnapshot::from_headways(0.0, vec![100.0, 300.0]);
        assert_eq!((s.mean_h, s.sigma_h), (200.0, 100.0));
        let s = HeadwaySnapshot::from_headways(0.0, vec![0.0, 200.0, 400.0]);
        assert_eq!(s.mean_h, 200.0);
        assert!((s.sigma_h - 163.299_316_185_5).abs() < 1e-9);
    }

    #[test]
    fn esh_pure_cruise() {
        let model = LineModel::new(&ring(4, 4, 2500.0, 0.0));
        assert!((model.expected_system_headway().unwrap() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn esh_l5() {
        let model = LineModel::new(&builtin_line("L5").unwrap());
        assert!((model.signal_delay_s() - 161.1).abs() < 1.0);
        let h = model.expected_system_headway().unwrap();
        assert!((h - 275.0).abs() <= 10.0, "ESH {h}");
    }

    #[test]
    fn esh_rejects_saturated_demand() {
        let model = LineModel::new(&ring(4, 2, 2500.0, 60.0));
        assert_eq!(model.expected_system_headway(), Err(HeadwayError::NoConvergence(100)));
    }

    #[test]
    fn esh_invariant_to_rotation() {
        let c = builtin_line("L5").unwrap();
        let n = c.n_stops();
        let shift = 5;
        let mut r = c.clone();
        r.stops.rotate_left(shift);
        r.segments.rotate_left(shift);
        for (k, s) in r.stops.iter_mut().enumerate() {
            s.id = k + 1;
        }
        for (k, s) in r.segments.iter_mut().enumerate() {
            s.id = k + 1;
        }
        for i in &mut r.intersections {
            i.segment = (i.segment + n - 1 - shift) % n + 1;
        }
        r.intersections.sort_by_key(|i| i.segment);
        for (k, i) in r.intersections.iter_mut().enumerate() {
            i.id = k + 1;
        }
        r.validate().unwrap();
        let a = LineModel::new(&c).expected_system_headway().unwrap();
        let b = LineModel::new(&r).expected_system_headway().unwrap();
        assert!((a - b).abs() < 1e-6);
    }
}
