//! Q-learning controller, training loop and greedy evaluation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{ControlDecision, Controller, Observation};
use crate::metrics::{interference, stability, RunReport};
use crate::model::HyperParams;
use crate::rng::{episode_seed, stream, Stream};
use crate::simulator::{EpisodeLog, Simulation};

use super::lookahead::{Node, Planner};
use super::state::{write_features, AdpState};
use super::{AdpError, Policy, QNetwork};

struct Exploration {
    epsilon: f64,
    learning_rate: f64,
    rng: ChaCha8Rng,
}

/// The previous decision, waiting for the next state to form its target.
struct Pending {
    input: Vec<f64>,
    cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct EpisodeStats {
    updates: usize,
    sum_sq_error: f64,
    sum_smoothed: f64,
}

/// Holds every activated bus for a time chosen from its stop's action set.
pub struct QLearningController {
    policy: Policy,
    planner: Planner,
    exploration: Option<Exploration>,
    pending: Option<Pending>,
    divergence_bound: f64,
    diverged: Option<f64>,
    stats: EpisodeStats,
    /// Per-stage running average of targets across episodes.
    smoothed: Vec<f64>,
    episodes_seen: usize,
    stage: usize,
    features: Vec<f64>,
}

impl QLearningController {
    /// Greedy controller; the network is never changed.
    pub fn greedy(sim: &Simulation, policy: Policy) -> Self {
        let planner = Planner::new(
            sim.model().clone(),
            Planner::action_lists(sim.config()),
            policy.lookahead,
            policy.gamma,
            policy.coefficient,
            sim.esh_s(),
            policy.network.cost_scale,
        );
        Self {
            policy,
            planner,
            exploration: None,
            pending: None,
            divergence_bound: f64::INFINITY,
            diverged: None,
            stats: EpisodeStats::default(),
            smoothed: Vec::new(),
            episodes_seen: 0,
            stage: 0,
            features: Vec::new(),
        }
    }

    /// Learning controller exploring with its own random stream.
    pub fn learning(sim: &Simulation, policy: Policy, seed: u64, divergence_bound: f64) -> Self {
        let mut c = Self::greedy(sim, policy);
        c.exploration = Some(Exploration { epsilon: 0.0, learning_rate: 0.0, rng: stream(seed, Stream::Exploration) });
        c.divergence_bound = divergence_bound;
        c
    }

    /// Exploration probability and learning rate for the coming episodes.
    pub fn set_schedule(&mut self, epsilon: f64, learning_rate: f64) {
        if let Some(x) = &mut self.exploration {
            x.epsilon = epsilon;
            x.learning_rate = learning_rate;
        }
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn into_policy(self) -> Policy {
        self.policy
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    /// Largest parameter magnitude seen above the bound, if any.
    pub fn diverged(&self) -> Option<f64> {
        self.diverged
    }

    fn network(&self) -> &QNetwork {
        &self.policy.network
    }

    /// Value of a look-ahead leaf: the smallest `Q` over the holds of the
    /// next bus, with every time measured from that bus's activation.
    fn leaf_value(network: &QNetwork, planner: &Planner, node: &Node, buf: &mut Vec<f64>) -> f64 {
        let (bus, clock) = node.next_activation();
        buf.clear();
        let timers: Vec<f64> = node.plans.iter().map(|p| p.activation_s - clock).collect();
        write_features(clock, &node.latest_arrival_s, node.plans.iter().map(|p| p.next_stop), &timers, &network.scale, buf);
        network.min_q(buf, planner.actions(node.plans[bus].next_stop))
    }

    fn choose(&mut self, obs: &Observation<'_>, node: &Node) -> f64 {
        let holds = self.planner.actions(obs.stop);
        if let Some(x) = &mut self.exploration {
            if x.epsilon > 0.0 && x.rng.random_bool(x.epsilon) {
                return holds[x.rng.random_range(0..holds.len())];
            }
        }
        if self.planner.depth() == 0 {
            let mut q = Vec::with_capacity(holds.len());
            self.network().q_values(&self.features, holds, &mut q);
            let mut best = 0;
            for (k, v) in q.iter().enumerate() {
                if *v < q[best] {
                    best = k;
                }
            }
            return holds[best];
        }
        let network = &self.policy.network;
        let planner = &self.planner;
        let mut buf = Vec::with_capacity(network.scale.state_width());
        let mut leaf = |n: &Node| Self::leaf_value(network, planner, n, &mut buf);
        planner.select(node, obs.bus, &mut leaf).hold_s
    }

    fn update(&mut self, pending: Pending, min_next_q: f64, learning_rate: f64) {
        let target = (pending.cost + self.policy.gamma * min_next_q).clamp(0.0, 1.0);
        let q = self.policy.network.net.step_towards(&pending.input, target, learning_rate);
        self.stats.updates += 1;
        self.stats.sum_sq_error += (target - q) * (target - q);

        let m = self.stage;
        if self.smoothed.len() <= m {
            self.smoothed.resize(m + 1, 0.0);
        }
        let alpha = 1.0 / self.episodes_seen.max(1) as f64;
        self.smoothed[m] = (1.0 - alpha) * self.smoothed[m] + alpha * target;
        self.stats.sum_smoothed += self.smoothed[m];

        let max_abs = self.policy.network.net.max_abs_param();
        if max_abs > self.divergence_bound {
            self.diverged = Some(max_abs);
        }
    }

    fn take_stats(&mut self) -> EpisodeStats {
        std::mem::take(&mut self.stats)
    }
}

impl Controller for QLearningController {
    fn decide(&mut self, obs: &Observation<'_>) -> ControlDecision {
        let state = AdpState::from_observation(obs);
        self.features.clear();
        state.write_features(&self.policy.network.scale, &mut self.features);

        let learning = self.exploration.as_ref().map(|x| x.learning_rate).filter(|_| self.diverged.is_none());
        if let (Some(lr), Some(pending)) = (learning, self.pending.take()) {
            let min_next = self.network().min_q(&self.features, self.planner.actions(obs.stop));
            self.update(pending, min_next, lr);
            self.stage += 1;
        }

        let node = Node::from_observation(obs);
        let hold = self.choose(obs, &node);

        if self.exploration.is_some() {
            let mut input = self.features.clone();
            input.push(self.policy.network.scale.hold(hold));
            let cost = self.planner.stage_cost(&node, obs.bus, hold);
            self.pending = Some(Pending { input, cost });
        }
        ControlDecision::hold(hold)
    }

    fn controls(&self, _stop: usize) -> bool {
        true
    }

    fn begin_episode(&mut self) {
        self.pending = None;
        self.stage = 0;
        self.episodes_seen += 1;
    }

    fn end_episode(&mut self, _log: &EpisodeLog) {
        self.pending = None;
    }
}

/// One training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub fsi: f64,
    pub ssi: f64,
    pub a_sigma: f64,
    pub bunching: bool,
    pub updates: usize,
    /// Mean squared gap between target and prediction over the updates.
    pub mean_sq_error: f64,
    /// Mean of the smoothed per-stage `Q` estimates.
    pub mean_smoothed_q: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: [&str; 10] =
    ["episode", "epsilon", "learning_rate", "fsi", "ssi", "a_sigma", "bunching", "updates", "mean_sq_error", "mean_smoothed_q"];

impl TrainTrace {
    pub fn fsi(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fsi).collect()
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.episode.to_string(),
                r.epsilon.to_string(),
                r.learning_rate.to_string(),
                r.fsi.to_string(),
                r.ssi.to_string(),
                r.a_sigma.to_string(),
                u8::from(r.bunching).to_string(),
                r.updates.to_string(),
                r.mean_sq_error.to_string(),
                r.mean_smoothed_q.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub policy: Policy,
    pub trace: TrainTrace,
}

pub fn train(sim: &Simulation, hyper: &HyperParams) -> Result<Trained, AdpError> {
    train_with_progress(sim, hyper, &mut |_| {})
}

/// Runs `hyper.episodes` learning episodes from a fresh network.
pub fn train_with_progress(
    sim: &Simulation,
    hyper: &HyperParams,
    progress: &mut dyn FnMut(&TraceRow),
) -> Result<Trained, AdpError> {
    hyper.validate()?;
    let policy = Policy::initial(sim, hyper);
    let mut controller = QLearningController::learning(sim, policy, hyper.seed, hyper.divergence_bound);
    let mut trace = TrainTrace::default();
    for k in 1..=hyper.episodes {
        let epsilon = hyper.epsilon_at(k);
        let learning_rate = hyper.learning_rate_at(k);
        controller.set_schedule(epsilon, learning_rate);
        let log = sim.run(&mut controller, episode_seed(hyper.seed, k as u64))?;
        if let Some(max_abs) = controller.diverged() {
            return Err(AdpError::Diverged { episode: k, max_abs });
        }
        let stats = controller.take_stats();
        let st = stability(&log)?;
        let per_update = |x: f64| if stats.updates > 0 { x / stats.updates as f64 } else { 0.0 };
        let row = TraceRow {
            episode: k,
            epsilon,
            learning_rate,
            fsi: st.fsi,
            ssi: st.ssi,
            a_sigma: interference(&log).a_sigma,
            bunching: log.bunching,
            updates: stats.updates,
            mean_sq_error: per_update(stats.sum_sq_error),
            mean_smoothed_q: per_update(stats.sum_smoothed),
        };
        progress(&row);
        trace.rows.push(row);
    }
    Ok(Trained { policy: controller.into_policy(), trace })
}

/// Greedy episodes with `policy`, one per seed, run in parallel.
pub fn evaluate(sim: &Simulation, policy: &Policy, seeds: &[u64]) -> Result<Vec<RunReport>, AdpError> {
    policy.check_fits(sim)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = QLearningController::greedy(sim, policy.clone());
            let log = sim.run(&mut c, seed)?;
            Ok(RunReport::from_log(&log)?)
        })
        .collect()
}
