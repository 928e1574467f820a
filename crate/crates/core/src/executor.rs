//! Plan execution and the detect, plan, execute loop.

use std::collections::BTreeSet;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{detect, DetectionError, DetectionParams};
use crate::load::LoadModel;
use crate::planner::{self, variance, MigrationPlan, MigrationTriplet, MoveKey, PlanError, PlannerParams};
use crate::rng::derive_seed;
use crate::state::NetworkState;

#[derive(Debug, Error, PartialEq)]
pub enum ExecError {
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("max_rounds must be at least 1")]
    NoRounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RebalanceParams {
    pub max_rounds: u32,
}

impl Default for RebalanceParams {
    fn default() -> Self {
        Self { max_rounds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutedTriplet {
    pub triplet: MigrationTriplet,
    pub loads_before: Vec<f64>,
    pub loads_after: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub state: NetworkState,
    pub executed: Vec<ExecutedTriplet>,
    /// One message per skipped triplet.
    pub skipped: Vec<String>,
}

/// Applies triplets in order against the evolving state. A triplet is
/// skipped when its switch has already moved, when the target would exceed
/// its capacity under the real post-move loads, or when the move would not
/// strictly lower the real load variance.
pub fn execute_plan(state: &NetworkState, model: &LoadModel, plan: &MigrationPlan) -> Execution {
    let mut current = state.clone();
    let mut loads = model.loads(&current);
    let mut executed = Vec::new();
    let mut skipped = Vec::new();
    for t in &plan.triplets {
        let label = t.describe(&current);
        if current.master_of(t.switch) != t.emigration {
            skipped.push(format!(
                "{label}: switch no longer supervised by the emigration controller"
            ));
            continue;
        }
        let next = match current.reassign(t.switch, t.immigration) {
            Ok(next) => next,
            Err(e) => {
                skipped.push(format!("{label}: {e}"));
                continue;
            }
        };
        let after = model.loads(&next);
        let capacity = next.controller(t.immigration).capacity;
        if after[t.immigration.0] > capacity {
            skipped.push(format!(
                "{label}: target load {:.3} would exceed capacity {capacity}",
                after[t.immigration.0]
            ));
            continue;
        }
        let (before_eta, after_eta) = (variance(&loads), variance(&after));
        if !(after_eta < before_eta) {
            skipped.push(format!(
                "{label}: load variance would not decrease ({before_eta:.6} -> {after_eta:.6})"
            ));
            continue;
        }
        debug!("migrate {label}");
        executed.push(ExecutedTriplet {
            triplet: *t,
            loads_before: loads,
            loads_after: after.clone(),
        });
        loads = after;
        current = next;
    }
    for s in &skipped {
        info!("skipped {s}");
    }
    Execution {
        state: current,
        executed,
        skipped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Balanced,
    /// Imbalance detected but nothing could be executed.
    Stalled,
    RoundLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceReport {
    /// Rounds in which at least one triplet was executed.
    pub rounds: u32,
    pub executed: Vec<ExecutedTriplet>,
    pub total_cost: f64,
    pub final_lambda: f64,
    pub balanced: bool,
    pub stop: StopReason,
    /// Load variance before the first round and after each executed round.
    pub eta_trace: Vec<f64>,
    pub warnings: Vec<String>,
    /// Moves executed in the final executed round.
    pub last_round: Vec<MoveKey>,
}

impl RebalanceReport {
    /// Moves to bar in a follow-up call: the reverse of every move executed
    /// in the last round.
    pub fn last_round_reversals(&self) -> BTreeSet<MoveKey> {
        self.last_round.iter().map(|k| k.reversed()).collect()
    }
}

/// Runs detection, planning and execution until the loads are balanced,
/// nothing more can be done, or `max_rounds` rounds have run. Returns the
/// final state with the report.
///
/// Moves in `barred` are excluded from the first round. Afterwards the
/// reverse of each move executed in one round is barred in the next.
pub fn rebalance(
    state: &NetworkState,
    model: &LoadModel,
    detection: &DetectionParams,
    planner_params: &PlannerParams,
    params: &RebalanceParams,
    barred: &BTreeSet<MoveKey>,
) -> Result<(NetworkState, RebalanceReport), ExecError> {
    if params.max_rounds == 0 {
        return Err(ExecError::NoRounds);
    }
    let mut current = state.clone();
    let mut barred = barred.clone();
    let mut executed = Vec::new();
    let mut warnings = Vec::new();
    let mut rounds = 0;
    let mut stop = StopReason::RoundLimit;
    let mut eta_trace = vec![variance(&model.loads(&current))];
    let mut last_round = Vec::new();

    for round in 0..params.max_rounds {
        let det = detect(&current, model, detection)?;
        if det.is_balanced() {
            stop = StopReason::Balanced;
            break;
        }
        let round_params = PlannerParams {
            seed: derive_seed(planner_params.seed, u64::from(round)),
            ..*planner_params
        };
        let plan = planner::plan(&current, model, &round_params, &det, &barred)?;
        warnings.extend(plan.warnings.iter().cloned());
        if plan.is_empty() {
            stop = StopReason::Stalled;
            break;
        }
        let out = execute_plan(&current, model, &plan);
        warnings.extend(out.skipped);
        if out.executed.is_empty() {
            stop = StopReason::Stalled;
            break;
        }
        rounds += 1;
        last_round = out.executed.iter().map(|e| e.triplet.key()).collect();
        barred = last_round.iter().map(|k: &MoveKey| k.reversed()).collect();
        executed.extend(out.executed);
        current = out.state;
        eta_trace.push(variance(&model.loads(&current)));
    }

    let fin = detect(&current, model, detection)?;
    let report = RebalanceReport {
        rounds,
        total_cost: executed.iter().map(|e: &ExecutedTriplet| e.triplet.cost).sum(),
        executed,
        final_lambda: fin.threshold,
        balanced: fin.is_balanced(),
        stop,
        eta_trace,
        warnings,
        last_round,
    };
    Ok((current, report))
}
