mod common;

use holdline::adp::{checkpoint, train, Node, Perceptron, Planner, Policy};
use holdline::headways::{BusPlan, LineModel};
use holdline::model::{builtin_line, CostCoefficient, HyperParams};
use holdline::simulator::Simulation;

use common::{brute_force, bumpy_leaf, gradient_suite, ring, toy_instances};

#[test]
fn backprop_matches_finite_differences() {
    let worst = gradient_suite(100, 17);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn one_level_two_bus_toy_picks_the_equalising_hold() {
    // 4 stops 300 s apart, no demand. Bus 1 leaves stop 1 now; bus 2 reaches
    // stop 3 in 10 s, so a 10 s hold splits the circle evenly.
    let config = ring(4, 2, 2500.0, 0.0, &[0.0, 5.0, 10.0]);
    let model = LineModel::new(&config);
    assert!((model.segment_s(0) - 300.0).abs() < 1e-9);
    let planner = Planner::new(model, Planner::action_lists(&config), 1, 0.5, CostCoefficient::Dch, 600.0, 1.0);
    let node = Node {
        plans: vec![
            BusPlan { next_stop: 0, depart_s: -10.0, arrive_s: -10.0, activation_s: 0.0 },
            BusPlan { next_stop: 2, depart_s: -290.0, arrive_s: 10.0, activation_s: 10.0 },
        ],
        latest_arrival_s: vec![0.0; 4],
    };
    let costs: Vec<f64> = [0.0, 5.0, 10.0].iter().map(|&a| planner.stage_cost(&node, 0, a)).collect();
    assert!((costs[0] - 200.0).abs() < 1e-9 && (costs[1] - 50.0).abs() < 1e-9 && costs[2].abs() < 1e-9, "{costs:?}");
    let zero = Perceptron::zeros(1, (5, 3), 0.5);
    let mut leaf = |_: &Node| zero.forward(&[0.0]);
    let choice = planner.select(&node, 0, &mut leaf);
    assert_eq!(choice.hold_s, 10.0);
    assert!((choice.value - 0.25).abs() < 1e-9);
}

#[test]
fn tree_search_equals_exhaustive_enumeration() {
    for (k, (planner, node)) in toy_instances(200, 3).into_iter().enumerate() {
        for leaf in [bumpy_leaf as fn(&Node) -> f64, |_: &Node| 0.5] {
            let mut l = leaf;
            let choice = planner.select(&node, 0, &mut l);
            let (hold, value) = brute_force(&planner, &node, 0, planner.depth(), &leaf);
            assert_eq!(choice.hold_s, hold, "instance {k}");
            assert!((choice.value - value).abs() < 1e-12, "instance {k}: {} vs {value}", choice.value);
        }
    }
}

#[test]
fn uniform_scaling_keeps_the_choice() {
    for (planner, node) in toy_instances(50, 8) {
        for factor in [0.01, 3.0, 250.0] {
            // Dividing costs and leaf values by the same factor.
            let scaled = Planner::new(
                planner.model().clone(),
                (0..4).map(|e| planner.actions(e).to_vec()).collect(),
                planner.depth(),
                planner.gamma(),
                CostCoefficient::Dch,
                0.0,
                1.0,
            );
            let reference = Planner::new(
                planner.model().clone(),
                (0..4).map(|e| planner.actions(e).to_vec()).collect(),
                planner.depth(),
                planner.gamma(),
                CostCoefficient::Dch,
                0.0,
                factor,
            );
            let a = scaled.select(&node, 0, &mut |n| bumpy_leaf(n)).hold_s;
            let b = reference.select(&node, 0, &mut |n| bumpy_leaf(n) / factor).hold_s;
            assert_eq!(a, b);
        }
    }
}

#[test]
fn zero_network_one_level_is_myopic() {
    for (planner, node) in toy_instances(50, 21) {
        let one = Planner::new(
            planner.model().clone(),
            (0..4).map(|e| planner.actions(e).to_vec()).collect(),
            1,
            planner.gamma(),
            CostCoefficient::Dch,
            0.0,
            1.0,
        );
        let choice = one.select(&node, 0, &mut |_| 0.5).hold_s;
        let holds = one.actions(node.plans[0].next_stop);
        let mut best = holds[0];
        for &a in holds {
            if one.stage_cost(&node, 0, a) < one.stage_cost(&node, 0, best) {
                best = a;
            }
        }
        assert_eq!(choice, best);
    }
}

#[test]
fn exploration_schedule_is_linear_and_non_increasing() {
    let h = HyperParams::default();
    assert!((h.epsilon_at(300) - 0.1).abs() < 1e-12);
    let eps: Vec<f64> = (1..=h.episodes).map(|k| h.epsilon_at(k)).collect();
    assert!(eps.windows(2).all(|w| w[1] <= w[0]));
    assert!(eps.iter().all(|&e| e >= 0.0));
}

#[test]
fn short_training_is_bit_reproducible_and_checkpoints_round_trip() {
    let mut config = builtin_line("L5").unwrap();
    config.horizon_s = 1200.0;
    let sim = Simulation::new(config).unwrap();
    let hyper = HyperParams { episodes: 3, lookahead: 2, ..HyperParams::default() };
    let a = train(&sim, &hyper).unwrap();
    let b = train(&sim, &hyper).unwrap();
    assert_eq!(checkpoint::to_string(&a.policy), checkpoint::to_string(&b.policy));
    assert_ne!(a.policy, Policy::initial(&sim, &hyper));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.txt");
    checkpoint::save(&a.policy, &path).unwrap();
    assert_eq!(checkpoint::load(&path).unwrap(), a.policy);
}
