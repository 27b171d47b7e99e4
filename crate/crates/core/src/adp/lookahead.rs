//! Expected-value look-ahead over the next few activations.
//!
//! A [`Node`] holds the expected schedule of every bus up to its next
//! activation and the latest arrival per stop, all in absolute time. Holding
//! the bus with the earliest activation moves it one segment on using the
//! expected travel time and the expected dwell at the next stop. The cost of
//! a hold is the squared spread of the headways once the longest hold
//! allowed at that stop has ended, so that all candidates see the other buses
//! at the same positions.

use crate::control::Observation;
use crate::headways::{BusPlan, BusPoint, LineModel, LineSnapshot};
use crate::model::{BusLineConfig, CostCoefficient};

use super::state::argmin;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub plans: Vec<BusPlan>,
    pub latest_arrival_s: Vec<f64>,
}

impl Node {
    pub fn from_observation(obs: &Observation<'_>) -> Self {
        Self { plans: obs.plans.to_vec(), latest_arrival_s: obs.latest_arrival_s.to_vec() }
    }

    /// Bus with the earliest activation (lowest index on ties) and its time.
    pub fn next_activation(&self) -> (usize, f64) {
        let times: Vec<f64> = self.plans.iter().map(|p| p.activation_s).collect();
        let b = argmin(&times);
        (b, times[b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub hold_s: f64,
    /// Backed-up value of the chosen hold.
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Planner {
    model: LineModel,
    actions: Vec<Vec<f64>>,
    depth: usize,
    gamma: f64,
    coefficient: CostCoefficient,
    esh_s: f64,
    cost_scale: f64,
}

impl Planner {
    /// `actions[e]` are the holds allowed at stop `e`, each list non-empty.
    pub fn new(
        model: LineModel,
        mut actions: Vec<Vec<f64>>,
        depth: usize,
        gamma: f64,
        coefficient: CostCoefficient,
        esh_s: f64,
        cost_scale: f64,
    ) -> Self {
        assert_eq!(actions.len(), model.n_stops(), "one action list per stop");
        for list in &mut actions {
            assert!(!list.is_empty(), "empty action set");
            list.sort_by(f64::total_cmp);
        }
        Self { model, actions, depth, gamma, coefficient, esh_s, cost_scale }
    }

    pub fn action_lists(config: &BusLineConfig) -> Vec<Vec<f64>> {
        (0..config.n_stops()).map(|e| config.action_set_of(e).holds_s.clone()).collect()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn model(&self) -> &LineModel {
        &self.model
    }

    pub fn actions(&self, stop: usize) -> &[f64] {
        &self.actions[stop]
    }

    /// Holds `bus` for `hold_s` at its next activation and plans its trip to
    /// the following stop.
    pub fn advance(&self, node: &Node, bus: usize, hold_s: f64) -> Node {
        let mut child = node.clone();
        let n_e = self.model.n_stops();
        let plan = node.plans[bus];
        let from = plan.next_stop;
        let to = (from + 1) % n_e;
        let depart_s = plan.activation_s + hold_s;
        let arrive_s = depart_s + self.model.segment_s(from);
        let dwell = self.model.expected_dwell(to, arrive_s - node.latest_arrival_s[to]);
        child.latest_arrival_s[to] = arrive_s;
        child.plans[bus] = BusPlan { next_stop: to, depart_s, arrive_s, activation_s: arrive_s + dwell };
        child
    }

    /// Normalised cost of the headway pattern at `time_s`.
    pub fn cost_at(&self, node: &Node, time_s: f64) -> f64 {
        let n_e = self.model.n_stops();
        let points: Vec<BusPoint> = node.plans.iter().map(|p| p.point_at(time_s, n_e)).collect();
        let snapshot = LineSnapshot { now_s: time_s, latest_arrival_s: &node.latest_arrival_s, buses: &points };
        let Ok(h) = self.model.headways(&snapshot) else {
            return 0.0;
        };
        let reference = match self.coefficient {
            CostCoefficient::Dch => h.iter().sum::<f64>() / h.len() as f64,
            CostCoefficient::Esh => self.esh_s,
        };
        action_cost(&h, reference) / self.cost_scale
    }

    /// When the holds at `plan`'s activation are compared: the end of the
    /// longest one, so every candidate is judged on the same clock.
    pub fn evaluation_time(&self, plan: BusPlan) -> f64 {
        let longest = self.actions[plan.next_stop].last().copied().unwrap_or(0.0);
        plan.activation_s + longest
    }

    /// Cost of holding `bus` for `hold_s`.
    pub fn stage_cost(&self, node: &Node, bus: usize, hold_s: f64) -> f64 {
        let child = self.advance(node, bus, hold_s);
        self.cost_at(&child, self.evaluation_time(node.plans[bus]))
    }

    /// Best hold for `bus` over a tree of `depth` activations. `leaf` values
    /// the node reached after the last level.
    pub fn select(&self, node: &Node, bus: usize, leaf: &mut dyn FnMut(&Node) -> f64) -> Choice {
        self.expand(node, bus, 1, leaf)
    }

    fn expand(&self, node: &Node, bus: usize, level: usize, leaf: &mut dyn FnMut(&Node) -> f64) -> Choice {
        let plan = node.plans[bus];
        let mut best = Choice { hold_s: f64::NAN, value: f64::INFINITY };
        let at = self.evaluation_time(plan);
        for &a in &self.actions[plan.next_stop] {
            let child = self.advance(node, bus, a);
            let cost = self.cost_at(&child, at);
            let tail = if level >= self.depth {
                leaf(&child)
            } else {
                let (next, _) = child.next_activation();
                self.expand(&child, next, level + 1, leaf).value
            };
            let value = cost + self.gamma * tail;
            if value < best.value || best.hold_s.is_nan() {
                best = Choice { hold_s: a, value };
            }
        }
        best
    }
}

/// `Σ (h − reference)²`.
pub fn action_cost(headways_s: &[f64], reference_s: f64) -> f64 {
    headways_s.iter().map(|h| (h - reference_s) * (h - reference_s)).sum()
}
