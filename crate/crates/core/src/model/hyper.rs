use serde::{Deserialize, Serialize};

use super::{invalid, ConfigError};

/// Reference headway `𝒦` in the action cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CostCoefficient {
    /// Dynamic circle headway: mean instantaneous headway at the time of evaluation.
    #[default]
    Dch,
    /// Expected system headway, fixed per line.
    Esh,
}

impl std::str::FromStr for CostCoefficient {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dch" => Ok(Self::Dch),
            "esh" => Ok(Self::Esh),
            other => Err(format!("unknown coefficient {other:?} (expected dch or esh)")),
        }
    }
}

/// Learning parameters. Defaults follow the reference experiment on L5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub gamma: f64,
    pub episodes: usize,
    pub epsilon0: f64,
    pub xi: f64,
    /// Look-ahead depth; 0 is plain Q-learning without look-ahead.
    pub lookahead: usize,
    pub learning_rate: f64,
    /// Per-episode multiplicative decay of the learning rate.
    pub learning_rate_decay: f64,
    pub hidden: (usize, usize),
    pub sigmoid_slope: f64,
    /// Initial parameters are drawn from `U[-r, r]`.
    pub weight_init_range: f64,
    /// Normaliser for action costs; `None` means `n_B · H̃²`.
    pub cost_scale: Option<f64>,
    pub coefficient: CostCoefficient,
    /// Training aborts if any parameter exceeds this magnitude.
    pub divergence_bound: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            episodes: 300,
            epsilon0: 0.6,
            xi: 1.0 / 600.0,
            lookahead: 3,
            learning_rate: 0.05,
            learning_rate_decay: 0.995,
            hidden: (5, 3),
            sigmoid_slope: 0.5,
            weight_init_range: 2.0,
            cost_scale: None,
            coefficient: CostCoefficient::Dch,
            divergence_bound: 1e3,
            seed: 1,
        }
    }
}

impl HyperParams {
    /// Exploration probability used in episode `k` (1-based): `max(0, ε₀ − kξ)`.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        (self.epsilon0 - episode as f64 * self.xi).max(0.0)
    }

    pub fn learning_rate_at(&self, episode: usize) -> f64 {
        self.learning_rate * self.learning_rate_decay.powi(episode.saturating_sub(1) as i32)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.epsilon0) {
            return Err(invalid("epsilon0 must lie in [0, 1)"));
        }
        if self.xi < 0.0 || self.epsilon0 - self.episodes as f64 * self.xi < -1e-12 {
            return Err(invalid("exploration schedule requires epsilon0 - episodes * xi >= 0"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be non-negative"));
        }
        if !(self.learning_rate_decay > 0.0 && self.learning_rate_decay <= 1.0) {
            return Err(invalid("learning_rate_decay must lie in (0, 1]"));
        }
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return Err(invalid("hidden layers must be non-empty"));
        }
        if !(self.sigmoid_slope > 0.0) {
            return Err(invalid("sigmoid_slope must be positive"));
        }
        if let Some(scale) = self.cost_scale {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(invalid("cost_scale must be positive"));
            }
        }
        if !(self.divergence_bound > 0.0) {
            return Err(invalid("divergence_bound must be positive"));
        }
        Ok(())
    }
}
