//! End-to-end acceptance checks on the L5 line.
//!
//! Each test prints one `PASS`/`FAIL` line to stderr (bypassing output
//! capture) before asserting. The trained controllers and the 50-run
//! evaluations are computed once and shared between tests.

mod common;

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use holdline::adp::{checkpoint, train, Trained};
use holdline::control::Scheme;
use holdline::experiment::{evaluation_seeds, SchemeSetup};
use holdline::headways::{mean_and_population_std, LineModel};
use holdline::metrics::{interference_from_holds, stability_from_sigmas, SchemeSummary};
use holdline::model::{builtin_line, ActionSet, CostCoefficient, HyperParams};
use holdline::simulator::{export, PassengerClass, Simulation};

use common::{brute_force, bumpy_leaf, gradient_suite, metric_oracle_gap, toy_instances};

const EVAL_SEED: u64 = 2024;
const RUNS: usize = 50;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let line = format!("criterion {id:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(pass, "{line}");
}

fn l5() -> &'static Simulation {
    static SIM: OnceLock<Simulation> = OnceLock::new();
    SIM.get_or_init(|| Simulation::new(builtin_line("L5").unwrap()).unwrap())
}

fn l5_a5x4() -> &'static Simulation {
    static SIM: OnceLock<Simulation> = OnceLock::new();
    SIM.get_or_init(|| {
        let config = builtin_line("L5").unwrap().with_uniform_action_set(ActionSet::parse("A5x4").unwrap());
        Simulation::new(config).unwrap()
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Variant {
    Ql1,
    Ql3,
    Ql3A5x4,
    Ql3Esh,
}

impl Variant {
    fn sim(self) -> &'static Simulation {
        if self == Variant::Ql3A5x4 {
            l5_a5x4()
        } else {
            l5()
        }
    }

    fn hyper(self) -> HyperParams {
        let lookahead = if self == Variant::Ql1 { 1 } else { 3 };
        let coefficient = if self == Variant::Ql3Esh { CostCoefficient::Esh } else { CostCoefficient::Dch };
        HyperParams { lookahead, coefficient, ..HyperParams::default() }
    }
}

fn trained(v: Variant) -> &'static Trained {
    static CACHE: OnceLock<Mutex<HashMap<Variant, &'static Trained>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(v).or_insert_with(|| {
        let start = Instant::now();
        let t = train(v.sim(), &v.hyper()).unwrap();
        let _ = writeln!(std::io::stderr(), "trained {v:?} in {:.1} s", start.elapsed().as_secs_f64());
        Box::leak(Box::new(t))
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Row {
    Fixed(Scheme),
    Learned(Variant),
}

fn summary(row: Row) -> &'static SchemeSummary {
    static CACHE: OnceLock<Mutex<HashMap<Row, &'static SchemeSummary>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    // Training happens outside the lock so other rows are not blocked behind it.
    if let Some(s) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&row) {
        return s;
    }
    let seeds = evaluation_seeds(EVAL_SEED, RUNS);
    let s = match row {
        Row::Fixed(scheme) => SchemeSetup::new(scheme).summarize(l5(), &seeds).unwrap(),
        Row::Learned(v) => {
            let policy = trained(v).policy.clone();
            let scheme = Scheme::QLearning { lookahead: policy.lookahead };
            SchemeSetup::new(scheme).with_policy(policy).summarize(v.sim(), &seeds).unwrap()
        }
    };
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(row).or_insert_with(|| Box::leak(Box::new(s)))
}

fn fsi(row: Row) -> (f64, f64) {
    let s = summary(row);
    (s.stability.fsi, s.fsi_standard_error())
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn criterion_01_expected_system_headway() {
    let start = Instant::now();
    let model = LineModel::new(l5().config());
    let esh = model.expected_system_headway().unwrap();
    // Red and green phases of the 18 signals, copied by hand.
    let red = [40., 40., 40., 30., 30., 40., 40., 30., 30., 40., 40., 40., 30., 40., 40., 40., 30., 40.];
    let green = [50., 30., 35., 45., 30., 30., 45., 35., 45., 50., 30., 35., 45., 50., 30., 35., 45., 50.];
    let hand: f64 = red.iter().zip(&green).map(|(r, g)| 0.5 * r * r / (r + g)).sum();
    let modelled = model.signal_delay_s();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (esh - 275.0).abs() <= 10.0 && (modelled - hand).abs() < 1e-9 && (hand - 161.0).abs() <= 1.0 && elapsed < 1.0;
    report(1, "ESH anchor", pass, format!("esh {esh:.2} s, signal delay {modelled:.2} s (hand {hand:.2} s), {elapsed:.3} s"));
}

#[test]
fn criterion_02_bunching_emerges_without_control() {
    let start = Instant::now();
    let nc = SchemeSetup::new(Scheme::NoControl).summarize(l5(), &evaluation_seeds(EVAL_SEED, 20)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let (ql3, _) = fsi(Row::Learned(Variant::Ql3));
    let pass = nc.bunched_runs >= 18 && nc.stability.fsi >= 5.0 * ql3 && elapsed < 120.0;
    report(
        2,
        "bunching emergence",
        pass,
        format!("NC bunched {}/20, FSI {:.2} vs QL3S {ql3:.2} (ratio {:.1}), {elapsed:.1} s", nc.bunched_runs, nc.stability.fsi, nc.stability.fsi / ql3),
    );
}

#[test]
fn criterion_03_scheme_ordering() {
    let order = [
        ("QL3S", Row::Learned(Variant::Ql3)),
        ("QL1S", Row::Learned(Variant::Ql1)),
        ("TP", Row::Fixed(Scheme::TwoPoint)),
        ("SP", Row::Fixed(Scheme::SinglePoint)),
        ("NC", Row::Fixed(Scheme::NoControl)),
    ];
    let values: Vec<(f64, f64)> = order.iter().map(|(_, r)| fsi(*r)).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, ((name, _), (m, se))) in order.iter().zip(&values).enumerate() {
        detail.push(format!("{name} {m:.2}±{se:.2}"));
        if i > 0 {
            let (prev, prev_se) = values[i - 1];
            let gap = m - prev;
            let pooled = (se * se + prev_se * prev_se).sqrt();
            if gap <= 2.0 * pooled {
                pass = false;
                detail.push(format!("(gap {gap:.2} <= 2x {pooled:.2})"));
            }
        }
    }
    report(3, "scheme ordering", pass, detail.join(" < "));
}

#[test]
fn criterion_04_interference_ordering() {
    let ql: Vec<f64> = [Variant::Ql1, Variant::Ql3].iter().map(|v| summary(Row::Learned(*v)).interference.a_bar).collect();
    let terminal: Vec<f64> =
        [Scheme::SinglePoint, Scheme::TwoPoint].iter().map(|s| summary(Row::Fixed(*s)).interference.a_bar).collect();
    let pass = ql.iter().all(|&a| a < 10.0) && terminal.iter().all(|&a| a > 50.0);
    report(
        4,
        "interference ordering",
        pass,
        format!("mean hold QL1S {:.2}, QL3S {:.2}, SP {:.2}, TP {:.2} s", ql[0], ql[1], terminal[0], terminal[1]),
    );
}

#[test]
fn criterion_05_bunching_elimination() {
    let s = summary(Row::Learned(Variant::Ql3));
    report(5, "bunching elimination", s.bunched_runs <= 2, format!("QL3S bunched in {}/{RUNS} runs", s.bunched_runs));
}

#[test]
fn criterion_06_service_improvement() {
    let wait = |row| summary(row).service.class(PassengerClass::Alighted).waiting.unwrap().mean;
    let ql3 = wait(Row::Learned(Variant::Ql3));
    let nc = wait(Row::Fixed(Scheme::NoControl));
    report(6, "service improvement", ql3 <= 0.8 * nc, format!("P1 wait QL3S {ql3:.1} s vs NC {nc:.1} s (ratio {:.3})", ql3 / nc));
}

#[test]
fn criterion_07_learning_curve_settles() {
    let rows = &trained(Variant::Ql3).trace.rows;
    let early: Vec<f64> = rows.iter().filter(|r| (1..=100).contains(&r.episode)).map(|r| r.fsi).collect();
    let late: Vec<f64> = rows.iter().filter(|r| (200..=300).contains(&r.episode)).map(|r| r.fsi).collect();
    let (e, l) = (sample_std(&early), sample_std(&late));
    report(7, "learning curve", l < e && early.len() == 100 && late.len() == 101, format!("FSI std episodes 1-100 {e:.2}, 200-300 {l:.2}"));
}

#[test]
fn criterion_08_gradient_suite() {
    let worst = gradient_suite(100, 8);
    report(8, "gradient suite", worst < 1e-4, format!("worst relative error {worst:.2e} over 100 cases"));
}

#[test]
fn criterion_09_lookahead_oracle() {
    let mut mismatches = 0;
    let mut count = 0;
    for (planner, node) in toy_instances(300, 9) {
        for leaf in [bumpy_leaf as fn(&holdline::adp::Node) -> f64, |_: &holdline::adp::Node| 0.5] {
            let mut l = leaf;
            let choice = planner.select(&node, 0, &mut l);
            let (hold, value) = brute_force(&planner, &node, 0, planner.depth(), &leaf);
            count += 1;
            if choice.hold_s != hold || (choice.value - value).abs() > 1e-12 {
                mismatches += 1;
            }
        }
    }
    report(9, "look-ahead oracle", mismatches == 0, format!("{mismatches} mismatches over {count} toy trees"));
}

#[test]
fn criterion_10_metric_oracles() {
    let gap = metric_oracle_gap(500, 10);
    let (h1, s1) = mean_and_population_std(&[100.0, 300.0]);
    let (h2, s2) = mean_and_population_std(&[0.0, 200.0, 400.0]);
    let st = stability_from_sigmas(&[10.0, 30.0], false).unwrap();
    let it = interference_from_holds(&[10.0, 0.0], &[0.0, 0.0]);
    let hand = h1 == 200.0
        && s1 == 100.0
        && h2 == 200.0
        && (s2 - 163.299_316_185_545_2).abs() < 1e-9
        && st.fsi == 20.0
        && (st.ssi - 200f64.sqrt()).abs() < 1e-12
        && it.a_sigma == 10.0
        && it.a_bar == 5.0
        && (it.sigma_a - 50f64.sqrt()).abs() < 1e-12;
    report(10, "metric oracles", gap < 1e-9 && hand, format!("largest gap {gap:.2e} over 500 logs, hand examples {}", if hand { "ok" } else { "wrong" }));
}

#[test]
fn criterion_11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = builtin_line("L5").unwrap();
    config.horizon_s = 1800.0;
    let sim = Simulation::new(config).unwrap();
    let mut same = true;

    // Episode exports.
    let mut exports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("episode{k}"));
        std::fs::create_dir_all(&out).unwrap();
        let mut c = SchemeSetup::new(Scheme::TwoPoint).controller(&sim).unwrap();
        export::write_episode(&sim.run(c.as_mut(), 77).unwrap(), &out).unwrap();
        exports.push(out);
    }
    for file in ["stages.csv", "passengers.csv", "trajectories.csv"] {
        same &= std::fs::read(exports[0].join(file)).unwrap() == std::fs::read(exports[1].join(file)).unwrap();
    }

    // Training outputs.
    let hyper = HyperParams { episodes: 4, lookahead: 2, seed: 31, ..HyperParams::default() };
    let mut trainings = Vec::new();
    for _ in 0..2 {
        let t = train(&sim, &hyper).unwrap();
        let mut trace = Vec::new();
        t.trace.write_csv(&mut trace).unwrap();
        trainings.push((checkpoint::to_string(&t.policy), trace));
    }
    same &= trainings[0] == trainings[1];

    // Parallel evaluation summaries.
    let policy = checkpoint::from_str(&trainings[0].0).unwrap();
    let setup = SchemeSetup::new(Scheme::QLearning { lookahead: 2 }).with_policy(policy);
    let seeds = evaluation_seeds(5, 6);
    let a = serde_json::to_string(&setup.summarize(&sim, &seeds).unwrap()).unwrap();
    let b = serde_json::to_string(&setup.summarize(&sim, &seeds).unwrap()).unwrap();
    same &= a == b;
    report(11, "determinism", same, "episode exports, training checkpoints and traces, evaluation summaries".into());
}

#[test]
fn criterion_12_episode_runtime() {
    let policy = trained(Variant::Ql3).policy.clone();
    let setup = SchemeSetup::new(Scheme::QLearning { lookahead: 3 }).with_policy(policy);
    let mut c = setup.controller(l5()).unwrap();
    let start = Instant::now();
    let log = l5().run(c.as_mut(), 12).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    report(12, "episode runtime", elapsed < 10.0, format!("7200 s QL3S episode, {} stages, {elapsed:.2} s", log.stages.len()));
}

#[test]
fn criterion_13_action_set_sweep() {
    let a2 = summary(Row::Learned(Variant::Ql3));
    let a5 = summary(Row::Learned(Variant::Ql3A5x4));
    let pass = a5.stability.fsi < a2.stability.fsi && a5.interference.a_sigma > a2.interference.a_sigma;
    report(
        13,
        "action-set sweep",
        pass,
        format!(
            "A5x4 FSI {:.2}, total hold {:.0} s; A2x5 FSI {:.2}, total hold {:.0} s",
            a5.stability.fsi, a5.interference.a_sigma, a2.stability.fsi, a2.interference.a_sigma
        ),
    );
}

#[test]
fn criterion_14_dch_versus_esh() {
    let (dch, dch_se) = fsi(Row::Learned(Variant::Ql3));
    let (esh, esh_se) = fsi(Row::Learned(Variant::Ql3Esh));
    report(14, "DCH vs ESH cost", dch <= esh, format!("QL3S FSI with DCH {dch:.2}±{dch_se:.2}, with ESH {esh:.2}±{esh_se:.2}"));
}
