//! Learning holding controller: a perceptron Q-factor combined with an
//! expected-value look-ahead over the next few activations.

pub mod checkpoint;
pub mod learner;
pub mod lookahead;
pub mod network;
pub mod state;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::model::{ConfigError, CostCoefficient, HyperParams};
use crate::simulator::{SimError, Simulation};

pub use learner::{evaluate, train, train_with_progress, QLearningController, TraceRow, TrainTrace, Trained};
pub use lookahead::{action_cost, Choice, Node, Planner};
pub use network::Perceptron;
pub use state::{state_transition, AdpState, Information, InputScale};

#[derive(Debug, Error)]
pub enum AdpError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("training diverged in episode {episode}: |θ|∞ = {max_abs}")]
    Diverged { episode: usize, max_abs: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("policy does not fit this line: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Perceptron plus the constants that turn states and holds into its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub net: Perceptron,
    pub scale: InputScale,
    /// Action costs are divided by this before they are learned.
    pub cost_scale: f64,
}

impl QNetwork {
    /// `Q` for every hold in `holds`, state part already encoded.
    pub fn q_values(&self, state: &[f64], holds: &[f64], out: &mut Vec<f64>) {
        let last: Vec<f64> = holds.iter().map(|&a| self.scale.hold(a)).collect();
        self.net.forward_last_input(state, &last, out);
    }

    pub fn min_q(&self, state: &[f64], holds: &[f64]) -> f64 {
        let mut out = Vec::with_capacity(holds.len());
        self.q_values(state, holds, &mut out);
        out.into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Everything needed to act greedily on a line.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub network: QNetwork,
    pub lookahead: usize,
    pub gamma: f64,
    pub coefficient: CostCoefficient,
    pub line_fingerprint: String,
}

impl Policy {
    /// Randomly initialised policy for `sim` from `hyper`.
    pub fn initial(sim: &Simulation, hyper: &HyperParams) -> Self {
        let config = sim.config();
        let scale = InputScale {
            headway_s: sim.esh_s(),
            n_buses: config.n_buses(),
            n_stops: config.n_stops(),
            max_hold_s: config.action_sets.iter().map(|s| s.max_hold_s()).fold(0.0, f64::max),
        };
        let mut rng = crate::rng::stream(hyper.seed, crate::rng::Stream::NetworkInit);
        let net = Perceptron::random(scale.input_width(), hyper.hidden, hyper.sigmoid_slope, hyper.weight_init_range, &mut rng);
        let cost_scale = hyper.cost_scale.unwrap_or(scale.n_buses as f64 * scale.headway_s * scale.headway_s);
        Self {
            network: QNetwork { net, scale, cost_scale },
            lookahead: hyper.lookahead,
            gamma: hyper.gamma,
            coefficient: hyper.coefficient,
            line_fingerprint: sim.fingerprint().to_string(),
        }
    }

    pub fn check_fits(&self, sim: &Simulation) -> Result<(), AdpError> {
        let config = sim.config();
        let s = &self.network.scale;
        if s.n_buses != config.n_buses() || s.n_stops != config.n_stops() {
            return Err(AdpError::Mismatch(format!(
                "network expects {} stops and {} buses, line has {} and {}",
                s.n_stops,
                s.n_buses,
                config.n_stops(),
                config.n_buses()
            )));
        }
        if self.network.net.inputs() != s.input_width() {
            return Err(AdpError::Mismatch("input width does not match the scale".into()));
        }
        Ok(())
    }
}
