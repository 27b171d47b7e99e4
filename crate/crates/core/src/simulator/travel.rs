//! Road travel between consecutive stops.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::BusLineConfig;

/// Samples are never shorter than this share of the mean piece time.
pub const MIN_PIECE_SHARE: f64 = 0.5;

/// Travel time of one road piece: mean `l/v` plus normal noise with standard
/// deviation `noise_s_per_km · l[km]`, clamped from below.
pub fn sample_piece_time(length_m: f64, speed_mps: f64, noise_s_per_km: f64, rng: &mut impl Rng) -> f64 {
    let mean = length_m / speed_mps;
    let z: f64 = rng.sample(StandardNormal);
    (mean + noise_s_per_km * length_m / 1000.0 * z).max(MIN_PIECE_SHARE * mean)
}

/// Road pieces and signals of one segment, in travel order.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentLayout {
    /// `pieces.len() == signals.len() + 1`; signal `k` follows piece `k`.
    pub pieces_m: Vec<f64>,
    pub signals: Vec<usize>,
}

impl SegmentLayout {
    pub fn all(config: &BusLineConfig) -> Vec<Self> {
        (0..config.n_stops())
            .map(|seg| Self { pieces_m: config.road_pieces(seg), signals: config.intersections_on(seg) })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    Piece { length_m: f64, expected_s: f64 },
    Signal { intersection: usize, expected_s: f64 },
    /// Waiting behind the bus ahead at the end of the segment.
    Queue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub kind: StepKind,
    pub start_s: f64,
    pub end_s: f64,
}

/// A realised trip along one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Traversal {
    pub segment: usize,
    pub depart_s: f64,
    pub arrive_s: f64,
    pub steps: Vec<Step>,
}

impl Traversal {
    /// Samples the trip departing `depart_s`. `not_before_s` is the arrival of
    /// the previous bus on this segment; buses do not overtake on the road.
    pub fn sample(
        config: &BusLineConfig,
        layout: &SegmentLayout,
        segment: usize,
        depart_s: f64,
        not_before_s: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let v = config.speed_mps();
        let mut steps = Vec::with_capacity(layout.pieces_m.len() * 2);
        let mut t = depart_s;
        for (k, &length_m) in layout.pieces_m.iter().enumerate() {
            let dt = sample_piece_time(length_m, v, config.travel_noise_s_per_km, rng);
            steps.push(Step { kind: StepKind::Piece { length_m, expected_s: length_m / v }, start_s: t, end_s: t + dt });
            t += dt;
            if let Some(&i) = layout.signals.get(k) {
                let signal = &config.intersections[i];
                let delay = signal.delay_at(t);
                steps.push(Step {
                    kind: StepKind::Signal { intersection: i, expected_s: signal.expected_delay_s() },
                    start_s: t,
                    end_s: t + delay,
                });
                t += delay;
            }
        }
        if not_before_s > t {
            steps.push(Step { kind: StepKind::Queue, start_s: t, end_s: not_before_s });
            t = not_before_s;
        }
        Self { segment, depart_s, arrive_s: t, steps }
    }

    /// Expected time still needed at `time_s`: the unfinished share of the
    /// current piece at its mean pace, actual waits already underway, and
    /// mean values for everything not yet started.
    pub fn expected_remaining(&self, time_s: f64) -> f64 {
        let mut total = 0.0;
        for step in &self.steps {
            if step.end_s <= time_s {
                continue;
            }
            let started = step.start_s <= time_s;
            total += match step.kind {
                StepKind::Piece { expected_s, .. } if started => {
                    let span = step.end_s - step.start_s;
                    expected_s * (step.end_s - time_s) / span
                }
                StepKind::Piece { expected_s, .. } | StepKind::Signal { expected_s, .. } if !started => expected_s,
                StepKind::Queue if !started => 0.0,
                _ => step.end_s - time_s,
            };
        }
        total
    }

    /// Distance covered since departure.
    pub fn distance_at(&self, time_s: f64) -> f64 {
        let mut d = 0.0;
        for step in &self.steps {
            if let StepKind::Piece { length_m, .. } = step.kind {
                if time_s >= step.end_s {
                    d += length_m;
                } else if time_s > step.start_s {
                    d += length_m * (time_s - step.start_s) / (step.end_s - step.start_s);
                }
            }
        }
        d
    }
}
