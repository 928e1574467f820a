//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Failures are reported but do not fail the process unless
//! `EASM_ACCEPTANCE_STRICT` is set, so known-red criteria stay visible
//! without breaking the regular test run.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use easm::detection::{detect, DetectionParams};
use easm::executor::{execute_plan, rebalance, RebalanceParams};
use easm::load::{LoadMode, LoadModel};
use easm::planner::{
    anneal_argmax, emigration_controllers, exhaustive_argmax, plan, simplified_migration_cost, variance, MigrationPlan,
    MigrationTriplet, PlannerParams, PlanningContext, SearchMode,
};
use easm::rng::{derive_seed, seeded_rng};
use easm::scenario::{fig1a_state, random_state, RandomPlacement};
use easm::sim::{generate_trace, lbr, run, summarize, TraceSpec};
use easm::state::NetworkState;
use easm::strategies::{build, step_csm_with, StrategyContext, StrategyKind};
use easm::topology::Topology;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn triplet(st: &NetworkState, e: &str, s: &str, i: &str) -> (usize, usize, usize) {
    (
        st.controller_by_name(e).unwrap().0,
        st.switch_by_name(s).unwrap().0,
        st.controller_by_name(i).unwrap().0,
    )
}

fn keys(p: &MigrationPlan) -> Vec<(usize, usize, usize)> {
    p.triplets
        .iter()
        .map(|t: &MigrationTriplet| (t.emigration.0, t.switch.0, t.immigration.0))
        .collect()
}

fn golden_easm(st: &NetworkState, mode: SearchMode) -> Result<MigrationPlan, String> {
    let m = LoadModel::simplified();
    let det = detect(st, &m, &DetectionParams::default()).map_err(|e| e.to_string())?;
    let params = PlannerParams {
        mode,
        ..PlannerParams::default()
    };
    plan(st, &m, &params, &det, &BTreeSet::new()).map_err(|e| e.to_string())
}

fn csm_forced_s7(st: &NetworkState) -> Result<(NetworkState, f64), String> {
    let ctx = StrategyContext {
        model: LoadModel::simplified(),
        ..StrategyContext::default()
    };
    let s7 = st.switch_by_name("s7").unwrap();
    let (next, report) = step_csm_with(st, &ctx, &mut |_, _| s7).map_err(|e| e.to_string())?;
    Ok((next, report.simplified_cost()))
}

fn criterion_1() -> Outcome {
    let st = fig1a_state();
    let m = LoadModel::simplified();
    ensure(
        m.loads(&st) == vec![90.0, 150.0, 70.0],
        format!("initial loads {:?}", m.loads(&st)),
    )?;
    let want = vec![triplet(&st, "c2", "s6", "c3")];
    for mode in [SearchMode::Sa, SearchMode::Exhaustive] {
        let p = golden_easm(&st, mode)?;
        ensure(keys(&p) == want, format!("{mode:?} plan {:?}", keys(&p)))?;
        let after = execute_plan(&st, &m, &p).state;
        ensure(
            m.loads(&after) == vec![90.0, 110.0, 110.0],
            format!("post loads {:?}", m.loads(&after)),
        )?;
        let cost: f64 = p
            .triplets
            .iter()
            .map(|t| simplified_migration_cost(&st, t.switch, t.immigration))
            .sum();
        ensure(cost == 120.0, format!("EASM cost {cost}"))?;
    }
    let (csm, cost) = csm_forced_s7(&st)?;
    ensure(
        m.loads(&csm) == vec![90.0, 100.0, 120.0],
        format!("CSM loads {:?}", m.loads(&csm)),
    )?;
    ensure(cost == 200.0, format!("CSM cost {cost}"))?;
    Ok("loads (90,150,70) -> (90,110,110) at cost 120; CSM (90,100,120) at cost 200".into())
}

fn criterion_2() -> Outcome {
    let st = fig1a_state();
    let det = detect(&st, &LoadModel::simplified(), &DetectionParams::default()).map_err(|e| e.to_string())?;
    let printed = [[1.0, 0.6, 1.3], [1.7, 1.0, 2.1], [0.9, 0.5, 1.0]];
    let mut misses = Vec::new();
    for (m, row) in printed.iter().enumerate() {
        for (n, want) in row.iter().enumerate() {
            let got = det.matrix.get(m, n);
            if (got - want).abs() > 0.05 {
                misses.push(format!("d({},{}) = {got:.4} vs printed {want}", m + 1, n + 1));
            }
        }
    }
    let d21 = det.matrix.trigger_factor(1, 0);
    let d23 = det.matrix.trigger_factor(1, 2);
    let d13 = det.matrix.trigger_factor(0, 2);
    let lam = det.threshold;
    let mut other = Vec::new();
    if (d21 - 1.1).abs() > 0.15 {
        other.push(format!("delta_21 {d21:.4}"));
    }
    if (d23 - 1.6).abs() > 0.15 {
        other.push(format!("delta_23 {d23:.4}"));
    }
    if d13 >= lam {
        other.push(format!("delta_13 {d13:.4} >= threshold {lam:.4}"));
    }
    if (lam - 0.7).abs() > 0.15 {
        other.push(format!("threshold {lam:.4}"));
    }
    let tf: BTreeSet<(usize, usize)> = det.triggers.iter().map(|t| (t.high.0, t.low.0)).collect();
    if tf != BTreeSet::from([(1, 0), (1, 2)]) {
        other.push(format!("trigger set {tf:?}"));
    }
    let summary = format!("delta_21 {d21:.3}, delta_23 {d23:.3}, delta_13 {d13:.3}, threshold {lam:.3}");
    misses.extend(other);
    if misses.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", misses.join("; ")))
    }
}

fn criterion_3() -> Outcome {
    let st = fig1a_state();
    let m = LoadModel::simplified();
    let initial = lbr(&m.loads(&st)).map_err(|e| e.to_string())?;
    let p = golden_easm(&st, SearchMode::Sa)?;
    let easm = lbr(&m.loads(&execute_plan(&st, &m, &p).state)).map_err(|e| e.to_string())?;
    let csm = lbr(&m.loads(&csm_forced_s7(&st)?.0)).map_err(|e| e.to_string())?;
    let s = format!("EASM {easm:.4} > CSM {csm:.4} > initial {initial:.4}");
    ensure(easm > csm && csm > initial, s.clone())?;
    Ok(s)
}

fn criterion_4() -> Outcome {
    let want = 50;
    let (mut instances, mut hits, mut seed) = (0, 0, 0u64);
    let mut misses = Vec::new();
    let mut sizes = Vec::new();
    while instances < want {
        seed += 1;
        ensure(seed < 10_000, "too few instances with a choice of targets")?;
        let c = 2 + (seed % 4) as usize;
        let s = 8 + (seed % 8) as usize;
        let st = common::random_instance(seed, c, s, LoadMode::Full);
        let m = LoadModel::default();
        let det = detect(&st, &m, &common::floor()).map_err(|e| e.to_string())?;
        let Some(&c_m) = emigration_controllers(&det).first() else {
            continue;
        };
        let none = BTreeSet::new();
        let ctx = PlanningContext::new(&st, &m, &det.loads, &none);
        let mut rng = seeded_rng(derive_seed(seed, 1));
        let Some(sw) = ctx
            .select_switch(c_m, st.switches_of(c_m), &mut rng)
            .map_err(|e| e.to_string())?
        else {
            continue;
        };
        let cands = ctx.candidates(sw, c_m).map_err(|e| e.to_string())?;
        if cands.len() < 2 {
            continue;
        }
        let scores = ctx.immigration_scores(sw, &cands, 0.5).map_err(|e| e.to_string())?;
        instances += 1;
        sizes.push(cands.len());
        let sa = anneal_argmax(&scores, 1.0, 400, &mut seeded_rng(derive_seed(seed, 2)));
        let ex = exhaustive_argmax(&scores);
        if scores[sa] == scores[ex] {
            hits += 1;
        } else {
            let c = &cands[sa];
            let fits = det.loads[c.target.0] + c.in_shift <= st.controller(c.target).capacity;
            ensure(
                fits && c.eta_after < ctx.eta(),
                format!("seed {seed}: SA miss is infeasible"),
            )?;
            misses.push(seed);
        }
    }
    let avg = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    let s = format!("{hits}/{instances} match the exhaustive argmax (mean {avg:.1} targets)");
    ensure(hits * 100 >= 95 * instances, format!("{s}; misses at seeds {misses:?}"))?;
    Ok(s)
}

fn criterion_5() -> Outcome {
    let m = LoadModel::default();
    let (mut balanced, mut stalled, mut max_rounds_seen) = (0, 0, 0);
    for seed in 0..200u64 {
        let c = 3 + (seed % 6) as usize;
        let s = 15 + (derive_seed(seed, 3) % 46) as usize;
        let st = common::random_instance(seed, c, s, LoadMode::Full);
        // undamped detection only reports balance at exactly equal loads
        let det_params = DetectionParams {
            damping: [1.0, 1.25, 1.5][(seed % 3) as usize],
            ..common::floor()
        };
        let params = PlannerParams {
            seed,
            ..PlannerParams::default()
        };
        let (fin, rep) = rebalance(
            &st,
            &m,
            &det_params,
            &params,
            &RebalanceParams { max_rounds: 10 },
            &BTreeSet::new(),
        )
        .map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(rep.rounds <= 10, format!("seed {seed}: {} rounds", rep.rounds))?;
        max_rounds_seen = max_rounds_seen.max(rep.rounds);
        for w in rep.eta_trace.windows(2) {
            ensure(w[1] <= w[0], format!("seed {seed}: variance rose {} -> {}", w[0], w[1]))?;
        }
        ensure(
            (variance(&m.loads(&fin)) - rep.eta_trace.last().unwrap()).abs() <= 1e-9 * rep.eta_trace[0].max(1.0),
            format!("seed {seed}: variance trace disagrees with the final state"),
        )?;
        if rep.balanced {
            balanced += 1;
            let again = detect(&fin, &m, &det_params).map_err(|e| e.to_string())?;
            ensure(
                again.triggers.is_empty(),
                format!("seed {seed}: balanced but re-detection triggers"),
            )?;
        } else {
            stalled += 1;
        }
    }
    Ok(format!(
        "200 runs terminate (max {max_rounds_seen} rounds); {balanced} balanced, {stalled} stalled or capped"
    ))
}

struct Comparison {
    lbr_wins: usize,
    cost_wins: usize,
    nsm_cost_zero: bool,
    mean: [f64; 4],
}

fn compare_once(run_seed: u64) -> Result<Comparison, String> {
    let topo = Arc::new(Topology::builtin_os3e());
    let model = LoadModel::default();
    let placement = RandomPlacement {
        controllers: 5,
        switches: 30,
        flow_rate: [100.0, 300.0],
        capacity: None,
    };
    let st = random_state(topo, &placement, derive_seed(run_seed, u64::MAX), &model).map_err(|e| e.to_string())?;
    let rates: Vec<f64> = st.switches().iter().map(|r| r.flow_rate).collect();
    let trace =
        generate_trace(&TraceSpec::default(), &rates, 200, derive_seed(run_seed, 1)).map_err(|e| e.to_string())?;
    let ctx = StrategyContext {
        model,
        detection: common::floor(),
        planner: PlannerParams {
            seed: run_seed,
            ..PlannerParams::default()
        },
        seed: run_seed,
    };
    let mut summaries = Vec::new();
    for kind in StrategyKind::ALL {
        let records = run(&st, build(kind, ctx).as_mut(), &trace, &model).map_err(|e| e.to_string())?;
        let s = summarize(kind.name(), &records);
        ensure(s.errors == 0, format!("run {run_seed}: {kind} reported step errors"))?;
        summaries.push(s);
    }
    let [nsm, csm, musm, easm] = [&summaries[0], &summaries[1], &summaries[2], &summaries[3]];
    Ok(Comparison {
        lbr_wins: usize::from(easm.mean_lbr >= musm.mean_lbr && easm.mean_lbr >= csm.mean_lbr),
        cost_wins: usize::from(easm.total_cost <= musm.total_cost),
        nsm_cost_zero: nsm.total_cost == 0.0 && nsm.migrations == 0,
        mean: [nsm.mean_lbr, csm.mean_lbr, musm.mean_lbr, easm.mean_lbr],
    })
}

fn criterion_6() -> Outcome {
    let runs = 100u64;
    let results: Vec<Result<Comparison, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..runs).map(|r| scope.spawn(move || compare_once(r))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison run panicked"))
            .collect()
    });
    let (mut lbr_wins, mut cost_wins, mut nsm_zero) = (0, 0, true);
    let mut mean = [0.0; 4];
    for r in results {
        let c = r?;
        lbr_wins += c.lbr_wins;
        cost_wins += c.cost_wins;
        nsm_zero &= c.nsm_cost_zero;
        for (acc, v) in mean.iter_mut().zip(c.mean) {
            *acc += v / runs as f64;
        }
    }
    let s = format!(
        "EASM best mean LBR in {lbr_wins}/{runs} runs, cost <= MUSM in {cost_wins}/{runs}; \
         average mean LBR nsm {:.3} csm {:.3} musm {:.3} easm {:.3}",
        mean[0], mean[1], mean[2], mean[3]
    );
    ensure(nsm_zero, format!("NSM migrated; {s}"))?;
    ensure(
        lbr_wins * 100 >= 80 * runs as usize && cost_wins * 100 >= 70 * runs as usize,
        s.clone(),
    )?;
    Ok(s)
}

fn criterion_7() -> Outcome {
    let results = common::run_all(200);
    let total: u32 = results.iter().map(|r| r.1).sum();
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, _, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    ensure(total >= 1000, format!("only {total} cases"))?;
    ensure(failed.is_empty(), failed.join("; "))?;
    Ok(format!("{} properties, {total} cases", results.len()))
}

fn criterion_8() -> Outcome {
    let t = Topology::builtin_os3e();
    ensure(
        t.node_count() == 34 && t.link_count() == 42,
        format!("{} nodes / {} links", t.node_count(), t.link_count()),
    )?;
    let h = t.hop_matrix();
    for (a, row) in h.iter().enumerate() {
        for (b, &x) in row.iter().enumerate() {
            ensure(x == h[b][a], "hop matrix is not symmetric")?;
            ensure(a == b || (x > 0 && x < u32::MAX), "hop matrix is not connected")?;
        }
    }
    let diameter = h.iter().flatten().max().copied().unwrap_or(0);
    Ok(format!(
        "34 nodes / 42 links, connected, symmetric, diameter {diameter}"
    ))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        ("golden scenario", criterion_1, Duration::from_secs(1)),
        ("golden detection", criterion_2, Duration::from_secs(1)),
        ("LBR ordering", criterion_3, Duration::from_secs(1)),
        ("SA matches exhaustive", criterion_4, Duration::from_secs(30)),
        ("rebalance termination", criterion_5, Duration::from_secs(60)),
        ("strategy comparison", criterion_6, Duration::from_secs(300)),
        ("invariant suite", criterion_7, Duration::from_secs(120)),
        ("OS3E ingestion", criterion_8, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(s) if took > *limit => Err(format!("took {took:.2?}, limit {limit:?}; {s}")),
            other => other,
        };
        match outcome {
            Ok(s) => println!("PASS {}. {name} ({took:.2?}): {s}", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {}. {name} ({took:.2?}): {e}", i + 1);
            }
        }
    }
    println!("{}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("EASM_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
