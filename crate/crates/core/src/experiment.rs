//! Running schemes over many seeds.

use rayon::prelude::*;
use thiserror::Error;

use crate::adp::{AdpError, Policy, QLearningController};
use crate::control::{Controller, NoControl, Scheme, TerminalHolding};
use crate::metrics::{MetricsError, RunReport, SchemeSummary};
use crate::rng::evaluation_seed;
use crate::simulator::{SimError, Simulation};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("scheme {0} needs a trained policy")]
    MissingPolicy(Scheme),
    #[error("control stop {0} is not on the line")]
    BadStop(usize),
    #[error(transparent)]
    Adp(#[from] AdpError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Seeds of `runs` evaluation episodes derived from `seed`.
pub fn evaluation_seeds(seed: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|r| evaluation_seed(seed, r)).collect()
}

/// How to build a controller for one scheme on one line.
#[derive(Debug, Clone)]
pub struct SchemeSetup {
    pub scheme: Scheme,
    /// Control stops (0-based) for the terminal schemes; defaults apply when empty.
    pub stops: Vec<usize>,
    pub policy: Option<Policy>,
}

impl SchemeSetup {
    pub fn new(scheme: Scheme) -> Self {
        Self { scheme, stops: Vec::new(), policy: None }
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = Some(policy);
        self
    }

    pub fn with_stops(mut self, stops: Vec<usize>) -> Self {
        self.stops = stops;
        self
    }

    pub fn controller(&self, sim: &Simulation) -> Result<Box<dyn Controller + Send>, ExperimentError> {
        let model = sim.model().clone();
        let esh = sim.esh_s();
        let n_e = sim.config().n_stops();
        if let Some(&bad) = self.stops.iter().find(|&&s| s >= n_e) {
            return Err(ExperimentError::BadStop(bad + 1));
        }
        Ok(match self.scheme {
            Scheme::NoControl => Box::new(NoControl),
            Scheme::SinglePoint | Scheme::TwoPoint if !self.stops.is_empty() => {
                Box::new(TerminalHolding::new(model, self.stops.clone(), esh))
            }
            Scheme::SinglePoint => Box::new(TerminalHolding::single_point(model, esh)),
            Scheme::TwoPoint => Box::new(TerminalHolding::two_point(model, esh)),
            Scheme::QLearning { .. } => {
                let policy = self.policy.clone().ok_or(ExperimentError::MissingPolicy(self.scheme))?;
                policy.check_fits(sim)?;
                Box::new(QLearningController::greedy(sim, policy))
            }
        })
    }

    /// One episode per seed, in parallel; reports come back in seed order.
    pub fn run(&self, sim: &Simulation, seeds: &[u64]) -> Result<Vec<RunReport>, ExperimentError> {
        self.controller(sim)?;
        seeds
            .par_iter()
            .map(|&seed| {
                let mut c = self.controller(sim)?;
                let log = sim.run(c.as_mut(), seed)?;
                Ok(RunReport::from_log(&log)?)
            })
            .collect()
    }

    pub fn summarize(&self, sim: &Simulation, seeds: &[u64]) -> Result<SchemeSummary, ExperimentError> {
        let runs = self.run(sim, seeds)?;
        Ok(SchemeSummary::from_runs(self.scheme.to_string(), &sim.config().name, sim.fingerprint(), &runs)?)
    }
}
