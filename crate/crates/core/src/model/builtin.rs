//! Bundled lines.
//!
//! L5 is shipped fully as `data/l5.cfg`. For L1–L4 only the counts and the
//! total length are known, so the remaining details are generated from a fixed
//! seed with the rule in [`generate_line`]; they are "L1-like" lines, not
//! reproductions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const L5_CONFIG: &str = include_str!("../../data/l5.cfg");

pub const BUILTIN_LINES: [&str; 5] = ["L1", "L2", "L3", "L4", "L5"];

struct LineScale {
    name: &'static str,
    buses: usize,
    stops: usize,
    intersections: usize,
    length_m: f64,
    seed: u64,
}

const SCALES: [LineScale; 4] = [
    LineScale { name: "L1", buses: 5, stops: 18, intersections: 8, length_m: 10_650.0, seed: 101 },
    LineScale { name: "L2", buses: 7, stops: 24, intersections: 11, length_m: 14_210.0, seed: 102 },
    LineScale { name: "L3", buses: 9, stops: 30, intersections: 13, length_m: 17_950.0, seed: 103 },
    LineScale { name: "L4", buses: 11, stops: 36, intersections: 15, length_m: 21_350.0, seed: 104 },
];

pub fn builtin_line(name: &str) -> Result<BusLineConfig, ConfigError> {
    let upper = name.to_ascii_uppercase();
    if upper == "L5" {
        return BusLineConfig::from_toml_str(L5_CONFIG);
    }
    let scale = SCALES
        .iter()
        .find(|s| s.name == upper)
        .ok_or_else(|| ConfigError::UnknownLine(name.to_string()))?;
    let config = generate_line(scale);
    config.validate()?;
    Ok(config)
}

/// Generation rule for the lines without published details:
///
/// - segment lengths: `X/n_E + N(0, 80)` rounded to 10 m and clipped to
///   [450, 800], then nudged in 10 m steps until they sum to `X`;
/// - intersections: one each on `n_I` distinct random segments, red from
///   {30, 40} s, green from {30, 35, 45, 50} s, random initial phase with a
///   remaining time from {10, 15, 20, 30} s capped at the phase length;
/// - stop arrival rates 1/2/3/4 pax/min with the L5 frequencies (17/18/5/2
///   out of 42); destination series 1 with probability 11/42, else series 2;
/// - buses evenly spread over the stops, capacity drawn from {60, 70, 72, 80},
///   TRAB uniform on {0, ..., 50} s;
/// - the `A2x5` action set everywhere and the L5 passenger and noise constants.
fn generate_line(scale: &LineScale) -> BusLineConfig {
    let l5 = BusLineConfig::from_toml_str(L5_CONFIG).expect("bundled L5 config is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(scale.seed);
    let n_e = scale.stops;

    let normal = rand_distr::Normal::new(0.0, 80.0).expect("valid normal");
    let base = scale.length_m / n_e as f64;
    let mut lengths: Vec<f64> = (0..n_e)
        .map(|_| {
            let raw: f64 = base + rng.sample(normal);
            ((raw / 10.0).round() * 10.0).clamp(450.0, 800.0)
        })
        .collect();
    let mut diff = ((scale.length_m - lengths.iter().sum::<f64>()) / 10.0).round() as i64;
    while diff != 0 {
        let j = rng.random_range(0..n_e);
        let step = if diff > 0 { 10.0 } else { -10.0 };
        let next = lengths[j] + step;
        if (450.0..=800.0).contains(&next) {
            lengths[j] = next;
            diff -= diff.signum();
        }
    }

    let mut seg_ids: Vec<usize> = (1..=n_e).collect();
    seg_ids.shuffle(&mut rng);
    let mut inter_segs: Vec<usize> = seg_ids[..scale.intersections].to_vec();
    inter_segs.sort_unstable();
    let intersections = inter_segs
        .iter()
        .enumerate()
        .map(|(k, &segment)| {
            let red_s = [30.0, 40.0][rng.random_range(0..2)];
            let green_s = [30.0, 35.0, 45.0, 50.0][rng.random_range(0..4)];
            let initial_phase = if rng.random_bool(0.5) { Phase::Red } else { Phase::Green };
            let phase_len = match initial_phase {
                Phase::Red => red_s,
                Phase::Green => green_s,
            };
            let remaining: f64 = [10.0, 15.0, 20.0, 30.0][rng.random_range(0..4)];
            IntersectionSpec {
                id: k + 1,
                segment,
                red_s,
                green_s,
                initial_phase,
                initial_remaining_s: remaining.min(phase_len),
            }
        })
        .collect();

    let stops = (1..=n_e)
        .map(|id| {
            let draw = rng.random_range(0..42);
            let rate = match draw {
                0..17 => 1.0,
                17..35 => 2.0,
                35..40 => 3.0,
                _ => 4.0,
            };
            let series = if rng.random_range(0..42) < 11 { 1 } else { 2 };
            StopSpec { id, arrival_rate_per_min: rate, series, action_set: "A2x5".into() }
        })
        .collect();

    let buses = (0..scale.buses)
        .map(|b| BusSpec {
            id: b + 1,
            capacity: [60, 70, 72, 80][rng.random_range(0..4)],
            initial_stop: b * n_e / scale.buses + 1,
            trab_s: f64::from(rng.random_range(0..=50u32)),
        })
        .collect();

    BusLineConfig {
        name: scale.name.to_string(),
        line_length_m: scale.length_m,
        cruise_speed_kmh: l5.cruise_speed_kmh,
        horizon_s: l5.horizon_s,
        travel_noise_s_per_km: l5.travel_noise_s_per_km,
        passengers: l5.passengers.clone(),
        destination_series: l5.destination_series.clone(),
        action_sets: l5.action_sets.clone(),
        stops,
        segments: lengths
            .into_iter()
            .enumerate()
            .map(|(k, length_m)| SegmentSpec { id: k + 1, length_m, road_piece_lengths_m: None })
            .collect(),
        intersections,
        buses,
    }
}
