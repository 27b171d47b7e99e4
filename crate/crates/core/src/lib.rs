//! Stochastic simulation of a circular bus line and an adaptive holding
//! controller built on Q-learning with multistage look-ahead.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: line configuration (stops, segments, signals, buses, demand)
//!   and hyper-parameters, with config-file ingestion and validation.
//! - [`headways`]: the expected-travel line model, instantaneous headways,
//!   the dynamic circle headway and the expected system headway.
//! - [`simulator`]: the discrete-event engine producing episode logs.
//! - [`metrics`]: stability, service and interference indices plus report tables.
//! - [`control`]: the controller interface and the non-learning schemes.
//! - [`adp`]: the perceptron Q-factor, look-ahead search and training loop.
//! - [`experiment`]: running a scheme over many seeds.
//! - [`cli`]: the `holdline` command-line runner.

pub mod adp;
pub mod cli;
pub mod control;
pub mod experiment;
pub mod headways;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod simulator;

pub use control::{ControlDecision, Controller, Observation, Scheme};
pub use headways::{BusLocation, HeadwaySnapshot, LineModel, LineSnapshot};
pub use model::{BusLineConfig, ConfigError, HyperParams};
pub use simulator::{run_episode, EpisodeLog, SimError, Simulation};
