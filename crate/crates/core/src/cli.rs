//! Command-line front end.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::detection::detect;
use crate::executor::execute_plan;
use crate::planner::plan;
use crate::rng::derive_seed;
use crate::scenario::{load_scenario, Scenario};
use crate::sim::{self, generate_trace, lbr, metrics_csv, summarize, summary_csv, write_atomic};
use crate::strategies::{build, StrategyKind};

#[derive(Debug, Parser)]
#[command(
    name = "easm",
    version,
    about = "SDN multi-controller load balancing by switch migration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect imbalance, plan and execute one round of migrations.
    Plan(CommonArgs),
    /// Run every listed strategy over the same traffic trace.
    Compare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output_dir`, then `out`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario's strategy list (repeat or comma-separate).
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<StrategyKind>,
}

fn output_dir(args: &CommonArgs, sc: &Scenario) -> PathBuf {
    args.out
        .clone()
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn prepare(args: &CommonArgs) -> Result<(Scenario, PathBuf)> {
    let mut sc = load_scenario(&args.scenario, args.seed)?;
    if !args.strategy.is_empty() {
        sc.strategies = args.strategy.clone();
    }
    let dir = output_dir(args, &sc);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok((sc, dir))
}

fn fmt_loads(loads: &[f64]) -> String {
    let parts: Vec<String> = loads.iter().map(|l| format!("{l:.3}")).collect();
    format!("({})", parts.join(", "))
}

/// Runs detection, planning and one execution pass; prints the outcome and
/// writes `triggers.csv` and `plan.csv`.
pub fn cmd_plan(args: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let (sc, dir) = prepare(args)?;
    let st = &sc.state;
    let names = sc.controller_names();
    let det = detect(st, &sc.model, &sc.detection)?;

    writeln!(out, "controllers: {}", names.join(", "))?;
    writeln!(out, "loads (KB/s): {}", fmt_loads(&det.loads))?;
    writeln!(out, "load ratio matrix:")?;
    for (name, row) in names.iter().zip(det.matrix.rows()) {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:8.4}")).collect();
        writeln!(out, "  {name:>8} {}", cells.join(" "))?;
    }
    writeln!(
        out,
        "threshold: {:.4} (effective {:.4})",
        det.threshold, det.effective_threshold
    )?;
    for t in &det.triggers {
        writeln!(
            out,
            "trigger: {} > {} delta {:.4}",
            names[t.high.0], names[t.low.0], t.delta
        )?;
    }

    let mut triggers = csv::Writer::from_writer(Vec::new());
    triggers.write_record(["high", "low", "delta", "threshold"])?;
    for t in &det.triggers {
        triggers.write_record([
            names[t.high.0].clone(),
            names[t.low.0].clone(),
            t.delta.to_string(),
            det.effective_threshold.to_string(),
        ])?;
    }
    write_atomic(&dir.join("triggers.csv"), &triggers.into_inner()?)?;

    let mut plan_csv = csv::Writer::from_writer(Vec::new());
    plan_csv.write_record(["emigration", "switch", "immigration", "cost", "efficiency", "executed"])?;

    if det.is_balanced() {
        writeln!(out, "no migration needed")?;
        write_atomic(&dir.join("plan.csv"), &plan_csv.into_inner()?)?;
        return Ok(());
    }

    let p = plan(st, &sc.model, &sc.planner, &det, &BTreeSet::new())?;
    for w in &p.warnings {
        writeln!(out, "warning: {w}")?;
    }
    let exec = execute_plan(st, &sc.model, &p);
    let done: BTreeSet<_> = exec.executed.iter().map(|e| e.triplet.key()).collect();
    for t in &p.triplets {
        let ran = done.contains(&t.key());
        writeln!(
            out,
            "triplet: {} cost {:.3} KB/s efficiency {:.6}{}",
            t.describe(st),
            t.cost,
            t.efficiency,
            if ran { "" } else { " (skipped)" }
        )?;
        plan_csv.write_record([
            st.controller(t.emigration).name.clone(),
            st.switch(t.switch).name.clone(),
            st.controller(t.immigration).name.clone(),
            t.cost.to_string(),
            t.efficiency.to_string(),
            ran.to_string(),
        ])?;
    }
    for s in &exec.skipped {
        writeln!(out, "skipped: {s}")?;
    }
    write_atomic(&dir.join("plan.csv"), &plan_csv.into_inner()?)?;
    if p.is_empty() {
        writeln!(out, "no feasible migration")?;
    }
    let after = sc.model.loads(&exec.state);
    writeln!(
        out,
        "loads before: {} lbr {:.4}",
        fmt_loads(&det.loads),
        lbr(&det.loads)?
    )?;
    writeln!(out, "loads after:  {} lbr {:.4}", fmt_loads(&after), lbr(&after)?)?;
    Ok(())
}

/// Runs each strategy on the same trace and writes `<strategy>.csv` per run
/// plus `summary.csv`.
pub fn cmd_compare(args: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let (sc, dir) = prepare(args)?;
    let kinds: Vec<StrategyKind> = {
        let mut seen = BTreeSet::new();
        sc.strategies.iter().copied().filter(|k| seen.insert(*k)).collect()
    };
    if kinds.len() < 2 {
        bail!("compare needs at least two distinct strategies, got {}", kinds.len());
    }
    let trace = generate_trace(&sc.trace, &sc.base_rates(), sc.steps, derive_seed(sc.seed, 1))?;
    let names = sc.controller_names();

    let results: Vec<Result<(StrategyKind, Vec<sim::MetricsRecord>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&kind| {
                let (sc, trace) = (&sc, &trace);
                scope.spawn(move || -> Result<_> {
                    let mut strategy = build(kind, sc.context());
                    let records = sim::run(&sc.state, strategy.as_mut(), trace, &sc.model)?;
                    Ok((kind, records))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(anyhow::anyhow!("strategy run panicked")))
            })
            .collect()
    });

    let mut summaries = Vec::new();
    let mut errors = 0;
    for r in results {
        let (kind, records) = r?;
        write_atomic(&dir.join(format!("{kind}.csv")), &metrics_csv(&names, &records)?)?;
        let s = summarize(kind.name(), &records);
        errors += s.errors;
        summaries.push(s);
    }
    write_atomic(&dir.join("summary.csv"), &summary_csv(&summaries)?)?;

    writeln!(
        out,
        "{:<6} {:>9} {:>9} {:>12} {:>10} {:>7}",
        "name", "mean_lbr", "final", "total_cost", "migrations", "rounds"
    )?;
    for s in &summaries {
        writeln!(
            out,
            "{:<6} {:>9.4} {:>9.4} {:>12.3} {:>10} {:>7}",
            s.strategy, s.mean_lbr, s.final_lbr, s.total_cost, s.migrations, s.rounds
        )?;
    }
    writeln!(
        out,
        "wrote {} run files and summary.csv to {}",
        summaries.len(),
        dir.display()
    )?;
    if errors > 0 {
        bail!("{errors} step(s) reported strategy errors; see the error column");
    }
    Ok(())
}

/// Dispatches a parsed command line. Returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a, out),
        Command::Compare(a) => cmd_compare(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}
