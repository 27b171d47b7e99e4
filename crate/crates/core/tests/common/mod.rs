//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use holdline::adp::{Node, Perceptron, Planner};
use holdline::headways::{mean_and_population_std, BusPlan, LineModel};
use holdline::metrics::{interference, stability};
use holdline::model::{builtin_line, ActionSet, CostCoefficient, DestinationSeries};
use holdline::simulator::{EpisodeLog, StageRecord};
use holdline::BusLineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ring of `n_stops` equal segments without signals, one destination
/// series that always rides one stop, and buses spread evenly.
pub fn ring(n_stops: usize, n_buses: usize, segment_m: f64, rate_per_min: f64, holds: &[f64]) -> BusLineConfig {
    let mut c = builtin_line("L5").unwrap();
    c.intersections.clear();
    c.stops.truncate(n_stops);
    for s in &mut c.stops {
        s.arrival_rate_per_min = rate_per_min;
        s.series = 1;
    }
    c.destination_series = vec![DestinationSeries { id: 1, probabilities: vec![1.0] }];
    c.segments.truncate(n_stops);
    for s in &mut c.segments {
        s.length_m = segment_m;
        s.road_piece_lengths_m = None;
    }
    c.line_length_m = segment_m * n_stops as f64;
    c.buses.truncate(n_buses);
    for (k, b) in c.buses.iter_mut().enumerate() {
        b.initial_stop = 1 + k * n_stops / n_buses;
    }
    let set = ActionSet { id: "toy".into(), unit_s: 1.0, holds_s: holds.to_vec() };
    let c = c.with_uniform_action_set(set);
    c.validate().unwrap();
    c
}

// ---------------------------------------------------------------- gradients

/// Relative error `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)` of the backpropagated
/// gradient against central differences with step `h`.
pub fn gradient_error(net: &Perceptron, x: &[f64], h: f64) -> f64 {
    let (_, g) = net.gradient(x);
    let mut probe = net.clone();
    let mut diff2 = 0.0;
    let mut norm_g = 0.0;
    let mut norm_fd = 0.0;
    for i in 0..g.len() {
        let p = net.params()[i];
        probe.params_mut()[i] = p + h;
        let up = probe.forward(x);
        probe.params_mut()[i] = p - h;
        let down = probe.forward(x);
        probe.params_mut()[i] = p;
        let fd = (up - down) / (2.0 * h);
        diff2 += (g[i] - fd).powi(2);
        norm_g += g[i] * g[i];
        norm_fd += fd * fd;
    }
    diff2.sqrt() / norm_g.sqrt().max(norm_fd.sqrt()).max(f64::MIN_POSITIVE)
}

/// Worst relative error over `cases` random networks and inputs.
pub fn gradient_suite(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let inputs = rng.random_range(2..12);
        let hidden = (rng.random_range(1..7), rng.random_range(1..5));
        let slope = rng.random_range(0.2..1.5);
        let net = Perceptron::random(inputs, hidden, slope, 2.0, &mut rng);
        let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-1.5..1.5)).collect();
        worst = worst.max(gradient_error(&net, &x, 1e-5));
    }
    worst
}

// ---------------------------------------------------------------- look-ahead

/// Every hold sequence of length `depth`, expanded explicitly: at each level
/// the bus with the earliest activation moves, the hold is costed on the
/// planner's clock, and the last node is valued by `leaf`. Returns the first
/// hold of the cheapest sequence and its discounted value.
pub fn brute_force(planner: &Planner, node: &Node, bus: usize, depth: usize, leaf: &dyn Fn(&Node) -> f64) -> (f64, f64) {
    let mut paths: Vec<(Vec<f64>, Node, f64, f64)> = vec![(Vec::new(), node.clone(), 0.0, 1.0)];
    for level in 0..depth {
        let mut next = Vec::new();
        for (holds, n, value, discount) in paths {
            let b = if level == 0 { bus } else { n.next_activation().0 };
            let plan = n.plans[b];
            for &a in planner.actions(plan.next_stop) {
                let child = planner.advance(&n, b, a);
                let cost = planner.cost_at(&child, planner.evaluation_time(plan));
                let mut h = holds.clone();
                h.push(a);
                next.push((h, child, value + discount * cost, discount * planner.gamma()));
            }
        }
        paths = next;
    }
    let mut best = (f64::NAN, f64::INFINITY);
    for (holds, n, value, discount) in paths {
        let total = value + discount * leaf(&n);
        if total < best.1 {
            best = (holds[0], total);
        }
    }
    best
}

/// Random two-bus states on a four-stop ring with demand.
pub fn toy_instances(count: usize, seed: u64) -> Vec<(Planner, Node)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..count {
        let n_actions = rng.random_range(1..=3);
        let mut holds: Vec<f64> = (1..n_actions).map(|_| f64::from(rng.random_range(1..=6u32) * 5)).collect();
        holds.push(0.0);
        holds.sort_by(f64::total_cmp);
        holds.dedup();
        let config = ring(4, 2, 2000.0, rng.random_range(0.0..3.0), &holds);
        let model = LineModel::new(&config);
        let esh = model.expected_system_headway().unwrap();
        let coefficient = if rng.random_bool(0.5) { CostCoefficient::Dch } else { CostCoefficient::Esh };
        let depth = rng.random_range(1..=2);
        let planner = Planner::new(
            model.clone(),
            Planner::action_lists(&config),
            depth,
            rng.random_range(0.1..0.9),
            coefficient,
            esh,
            2.0 * esh * esh,
        );
        let first = rng.random_range(0..4);
        let second = (first + rng.random_range(1..4)) % 4;
        let mut plans = Vec::new();
        for (k, stop) in [first, second].into_iter().enumerate() {
            let activation_s = if k == 0 { 0.0 } else { rng.random_range(0.0..200.0) };
            let arrive_s = activation_s - rng.random_range(0.0..20.0);
            let depart_s = arrive_s - model.segment_s((stop + 3) % 4);
            plans.push(BusPlan { next_stop: stop, depart_s, arrive_s, activation_s });
        }
        let latest_arrival_s = (0..4).map(|_| rng.random_range(-400.0..0.0)).collect();
        out.push((planner, Node { plans, latest_arrival_s }));
    }
    out
}

/// Deterministic but uneven leaf values.
pub fn bumpy_leaf(n: &Node) -> f64 {
    let x: f64 = n.plans.iter().map(|p| p.activation_s * 0.013 + p.next_stop as f64).sum();
    0.5 + 0.4 * x.sin()
}

// ---------------------------------------------------------------- metrics

/// Assembles a log from per-stage headways and holds.
pub fn log_from(headways: &[Vec<f64>], holds: &[(f64, bool)]) -> EpisodeLog {
    let stages = headways
        .iter()
        .zip(holds)
        .enumerate()
        .map(|(k, (h, &(hold_s, controlled)))| {
            let (mean, sigma) = mean_and_population_std(h);
            StageRecord {
                index: k,
                time_s: k as f64 * 10.0,
                bus: k % h.len(),
                stop: k,
                activation_s: k as f64 * 10.0,
                hold_s,
                idle_hold_s: hold_s / 2.0,
                controlled,
                boarded: 0,
                alighted: 0,
                headways_s: h.clone(),
                mean_h_s: mean,
                sigma_h_s: sigma,
            }
        })
        .collect();
    EpisodeLog {
        line: "toy".into(),
        fingerprint: String::new(),
        seed: 0,
        horizon_s: 100.0,
        esh_s: 100.0,
        stages,
        passengers: Vec::new(),
        trajectories: Vec::new(),
        bunching: false,
    }
}

/// Largest gap between the library's indices and a from-scratch computation
/// on random logs of two to five stages.
pub fn metric_oracle_gap(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n_stages = rng.random_range(2..=5);
        let n_buses = rng.random_range(2..=6);
        let headways: Vec<Vec<f64>> =
            (0..n_stages).map(|_| (0..n_buses).map(|_| rng.random_range(0.0..600.0)).collect()).collect();
        let holds: Vec<(f64, bool)> =
            (0..n_stages).map(|_| (f64::from(rng.random_range(0..=5u32) * 2), rng.random_bool(0.7))).collect();
        let log = log_from(&headways, &holds);

        // Per-stage DCH and σ_H straight from the definitions.
        let mut sigmas = Vec::new();
        for (h, s) in headways.iter().zip(&log.stages) {
            let dch = h.iter().sum::<f64>() / h.len() as f64;
            let mut sq = 0.0;
            for x in h {
                sq += (x - dch) * (x - dch);
            }
            let sigma = (sq / h.len() as f64).sqrt();
            worst = worst.max((s.mean_h_s - dch).abs()).max((s.sigma_h_s - sigma).abs());
            sigmas.push(sigma);
        }
        let fsi = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
        let mut sq = 0.0;
        for s in &sigmas {
            sq += (s - fsi) * (s - fsi);
        }
        let ssi = (sq / (sigmas.len() - 1) as f64).sqrt();
        let st = stability(&log).unwrap();
        worst = worst.max((st.fsi - fsi).abs()).max((st.ssi - ssi).abs());

        let controlled: Vec<f64> = holds.iter().filter(|h| h.1).map(|h| h.0).collect();
        let a_sigma: f64 = controlled.iter().sum();
        let it = interference(&log);
        worst = worst.max((it.a_sigma - a_sigma).abs());
        if !controlled.is_empty() {
            let a_bar = a_sigma / controlled.len() as f64;
            worst = worst.max((it.a_bar - a_bar).abs());
            if controlled.len() > 1 {
                let mut sq = 0.0;
                for a in &controlled {
                    sq += (a - a_bar) * (a - a_bar);
                }
                worst = worst.max((it.sigma_a - (sq / (controlled.len() - 1) as f64).sqrt()).abs());
            }
        }
        worst = worst.max((it.n_m as f64 - controlled.len() as f64).abs());
    }
    worst
}
