//! Helpers shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use easm::detection::{detect, detect_loads, DetectionParams, ZeroLoadPolicy};
use easm::executor::execute_plan;
use easm::load::{LoadMode, LoadModel};
use easm::planner::{plan, variance, variance_after_migration, PlannerParams, SearchMode};
use easm::rng::derive_seed;
use easm::scenario::{random_state, RandomPlacement};
use easm::sim::{generate_trace, lbr, run, TraceSpec};
use easm::state::{ControllerId, NetworkState, SwitchId};
use easm::strategies::{build, StrategyContext, StrategyKind};
use easm::topology::Topology;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub fn floor() -> DetectionParams {
    DetectionParams {
        zero_load: ZeroLoadPolicy::Floor,
        ..DetectionParams::default()
    }
}

pub fn model(mode: LoadMode) -> LoadModel {
    match mode {
        LoadMode::Full => LoadModel::default(),
        LoadMode::Simplified => LoadModel::simplified(),
    }
}

/// Random connected topology with a switch on every node and controllers
/// co-located with random switches; capacities at twice the mean load.
pub fn random_instance(seed: u64, controllers: usize, switches: usize, mode: LoadMode) -> NetworkState {
    let topo = Arc::new(Topology::random_connected(switches, switches / 2, seed));
    let placement = RandomPlacement {
        controllers,
        switches,
        flow_rate: [50.0, 300.0],
        capacity: None,
    };
    random_state(topo, &placement, derive_seed(seed, 7), &model(mode)).expect("valid random instance")
}

/// A state with the given shape on a random topology, drawn from a seed.
pub fn instance_strategy() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 2usize..=6, 6usize..=24)
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg.into()))
    }
}

pub fn prop_hop_metric((seed, nodes, extra): (u64, usize, usize)) -> Result<(), TestCaseError> {
    let t = Topology::random_connected(nodes, extra, seed);
    let n = t.node_count();
    let h = t.hop_matrix();
    for a in 0..n {
        check(h[a][a] == 0, "zero diagonal")?;
        for b in 0..n {
            check(h[a][b] == h[b][a], "symmetry")?;
            check(a == b || h[a][b] >= 1, "positive off-diagonal")?;
            for c in 0..n {
                check(h[a][c] <= h[a][b] + h[b][c], "triangle inequality")?;
            }
        }
    }
    for &(a, b) in t.links() {
        check(h[a.0][b.0] == 1, "links are one hop")?;
    }
    Ok(())
}

pub fn prop_partition((seed, c, s): (u64, usize, usize), moves: &[(usize, usize)]) -> Result<(), TestCaseError> {
    let mut st = random_instance(seed, c.min(s), s, LoadMode::Simplified);
    for &(sw, to) in moves {
        st = st
            .reassign(SwitchId(sw % s), ControllerId(to % st.controller_count()))
            .unwrap();
        check(st.is_consistent(), "domains match mastership")?;
        let mut seen = BTreeSet::new();
        for ctrl in st.controller_ids() {
            for &x in st.switches_of(ctrl) {
                check(seen.insert(x), "switch in two domains")?;
                check(st.master_of(x) == ctrl, "master agrees with domain")?;
            }
        }
        check(seen.len() == s, "every switch has a master")?;
    }
    Ok(())
}

pub fn prop_reassign_reversible((seed, c, s): (u64, usize, usize), sw: usize, to: usize) -> Result<(), TestCaseError> {
    let st = random_instance(seed, c.min(s), s, LoadMode::Full);
    let sw = SwitchId(sw % s);
    let from = st.master_of(sw);
    let to = ControllerId(to % st.controller_count());
    let back = st.reassign(sw, to).unwrap().reassign(sw, from).unwrap();
    check(back == st, "reassign then reverse restores the state")
}

pub fn prop_scale_free_detection(loads: &[f64], k: f64) -> Result<(), TestCaseError> {
    let p = DetectionParams::default();
    let a = detect_loads(loads, &p).unwrap();
    let scaled: Vec<f64> = loads.iter().map(|l| l * k).collect();
    let b = detect_loads(&scaled, &p).unwrap();
    let tol = 1e-9;
    check((a.threshold - b.threshold).abs() <= tol, "threshold is scale-free")?;
    for (x, y) in a.matrix.rows().flatten().zip(b.matrix.rows().flatten()) {
        check((x - y).abs() <= tol * x.abs().max(1.0), "matrix is scale-free")?;
    }
    // only pairs clear of the threshold by more than rounding can be compared
    for m in 0..loads.len() {
        for n in m + 1..loads.len() {
            let da = a.matrix.trigger_factor(m, n);
            if (da - a.threshold).abs() > 1e-6 {
                let in_a = a
                    .triggers
                    .iter()
                    .any(|t| (t.high.0.min(t.low.0), t.high.0.max(t.low.0)) == (m, n));
                let in_b = b
                    .triggers
                    .iter()
                    .any(|t| (t.high.0.min(t.low.0), t.high.0.max(t.low.0)) == (m, n));
                check(in_a == in_b, "trigger set is scale-free")?;
            }
        }
    }
    Ok(())
}

pub fn prop_plan_deterministic((seed, c, s): (u64, usize, usize)) -> Result<(), TestCaseError> {
    let st = random_instance(seed, c.min(s), s, LoadMode::Full);
    let m = LoadModel::default();
    let det = detect(&st, &m, &floor()).unwrap();
    if det.is_balanced() {
        return Ok(());
    }
    for mode in [SearchMode::Sa, SearchMode::Exhaustive] {
        let params = PlannerParams {
            seed,
            mode,
            ..PlannerParams::default()
        };
        let a = plan(&st, &m, &params, &det, &BTreeSet::new()).unwrap();
        let b = plan(&st, &m, &params, &det, &BTreeSet::new()).unwrap();
        check(a == b, "same inputs and seed give the same plan")?;
        let mut claimed = BTreeSet::new();
        let mut loads = det.loads.clone();
        for t in &a.triplets {
            check(t.emigration != t.immigration, "distinct controllers")?;
            check(claimed.insert(t.switch), "switch claimed once")?;
            check(st.master_of(t.switch) == t.emigration, "switch in emigration domain")?;
            let (out, inn) = m.migration_shift(&st, t.switch, t.emigration, t.immigration);
            loads[t.emigration.0] -= out;
            loads[t.immigration.0] += inn;
            check(
                loads[t.immigration.0] <= st.controller(t.immigration).capacity + 1e-9,
                "target fits",
            )?;
            check(t.efficiency > 0.0, "planned moves lower the variance")?;
        }
    }
    Ok(())
}

pub fn prop_execution_conserves((seed, c, s): (u64, usize, usize)) -> Result<(), TestCaseError> {
    let st = random_instance(seed, c.min(s), s, LoadMode::Full);
    let m = LoadModel::default();
    let det = detect(&st, &m, &floor()).unwrap();
    let p = plan(
        &st,
        &m,
        &PlannerParams {
            seed,
            ..PlannerParams::default()
        },
        &det,
        &BTreeSet::new(),
    )
    .unwrap();
    let out = execute_plan(&st, &m, &p);
    let rate_sum = |x: &NetworkState| x.switches().iter().map(|r| r.flow_rate).sum::<f64>();
    check(out.state.switch_count() == st.switch_count(), "switch count conserved")?;
    check(rate_sum(&out.state) == rate_sum(&st), "total flow rate conserved")?;
    check(out.state.is_consistent(), "partition holds after execution")?;
    check(
        variance(&m.loads(&out.state)) <= variance(&det.loads),
        "execution never raises the variance",
    )
}

pub fn prop_variance_consistency((seed, c, s): (u64, usize, usize), sw: usize, to: usize) -> Result<(), TestCaseError> {
    let mode = if seed % 2 == 0 {
        LoadMode::Full
    } else {
        LoadMode::Simplified
    };
    let st = random_instance(seed, c.min(s), s, mode);
    let m = model(mode);
    let sw = SwitchId(sw % s);
    let from = st.master_of(sw);
    let to = ControllerId(to % st.controller_count());
    if from == to {
        return Ok(());
    }
    let loads = m.loads(&st);
    let hyp = variance_after_migration(&st, &m, &loads, sw, from, to);
    let real = variance(&m.loads(&st.reassign(sw, to).unwrap()));
    check(
        (hyp - real).abs() <= 1e-9 * real.max(1.0),
        "hypothetical loads match the real move",
    )
}

pub fn prop_sim_deterministic(seed: u64) -> Result<(), TestCaseError> {
    let st = random_instance(seed, 3, 10, LoadMode::Full);
    let rates: Vec<f64> = st.switches().iter().map(|r| r.flow_rate).collect();
    let trace = generate_trace(&TraceSpec::default(), &rates, 8, seed).unwrap();
    for kind in StrategyKind::ALL {
        let ctx = StrategyContext {
            detection: floor(),
            seed,
            ..StrategyContext::default()
        };
        let a = run(&st, build(kind, ctx).as_mut(), &trace, &ctx.model).unwrap();
        let b = run(&st, build(kind, ctx).as_mut(), &trace, &ctx.model).unwrap();
        check(a == b, format!("{kind} run is reproducible"))?;
        for w in a.windows(2) {
            check(
                w[1].cumulative_cost >= w[0].cumulative_cost,
                "cumulative cost never falls",
            )?;
        }
        check(a.iter().all(|r| (0.0..=1.0).contains(&r.lbr)), "lbr within [0, 1]")?;
    }
    Ok(())
}

pub fn prop_lbr_spread(mean: f64, spread: f64) -> Result<(), TestCaseError> {
    // mean-preserving spread of two loads strictly lowers the rate
    let base = lbr(&[mean, mean, mean]).unwrap();
    let wider = lbr(&[mean - spread, mean, mean + spread]).unwrap();
    let widest = lbr(&[mean - 2.0 * spread, mean, mean + 2.0 * spread]).unwrap();
    check((base - 1.0).abs() <= 1e-12, "equal loads give 1")?;
    check(wider < base, "spread lowers lbr")?;
    check(widest < wider || widest == 0.0, "wider spread lowers lbr further")
}

fn fmt<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| format!("{e}"))
}

/// Runs every property with `cases` cases each and returns
/// `(name, cases, outcome)` per property.
pub fn run_all(cases: u32) -> Vec<(&'static str, u32, Result<(), String>)> {
    let mut out = Vec::new();
    let mut go = |name: &'static str, res: Result<(), String>| out.push((name, cases, res));
    let runner = || {
        TestRunner::new(Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        })
    };

    go(
        "hop matrix is a metric",
        fmt(runner().run(&(any::<u64>(), 1usize..30, 0usize..30), prop_hop_metric)),
    );
    go(
        "domains partition the switches",
        fmt(runner().run(
            &(
                instance_strategy(),
                proptest::collection::vec((0usize..100, 0usize..100), 1..12),
            ),
            |(inst, moves)| prop_partition(inst, &moves),
        )),
    );
    go(
        "reassign is reversible",
        fmt(
            runner().run(&(instance_strategy(), 0usize..100, 0usize..100), |(i, s, t)| {
                prop_reassign_reversible(i, s, t)
            }),
        ),
    );
    go(
        "detection is scale-free",
        fmt(runner().run(
            &(proptest::collection::vec(1.0f64..1000.0, 2..8), 0.01f64..100.0),
            |(l, k)| prop_scale_free_detection(&l, k),
        )),
    );
    go(
        "planning is deterministic and feasible",
        fmt(runner().run(&instance_strategy(), prop_plan_deterministic)),
    );
    go(
        "execution conserves switches and load",
        fmt(runner().run(&instance_strategy(), prop_execution_conserves)),
    );
    go(
        "hypothetical variance matches the move",
        fmt(
            runner().run(&(instance_strategy(), 0usize..100, 0usize..100), |(i, s, t)| {
                prop_variance_consistency(i, s, t)
            }),
        ),
    );
    go(
        "simulation is deterministic",
        fmt(runner().run(&any::<u64>(), prop_sim_deterministic)),
    );
    go(
        "lbr falls under mean-preserving spread",
        fmt(runner().run(&(1.0f64..1e4, 0.001f64..0.49), |(m, f)| prop_lbr_spread(m, m * f))),
    );
    out
}
