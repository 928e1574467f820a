//! Migration strategies compared by the simulator.
//!
//! * NSM never migrates.
//! * CSM moves a random switch of each overloaded controller to the closest
//!   controller whose load is below the mean.
//! * MUSM moves the busiest switch of each overloaded controller to the
//!   controller with the most residual capacity.
//! * EASM runs one detect, plan, execute round per step.
//!
//! All four share the same imbalance trigger, so only the migration policy
//! differs between them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{detect, DetectionError, DetectionParams};
use crate::executor::{rebalance, ExecError, RebalanceParams};
use crate::load::LoadModel;
use crate::planner::{
    emigration_controllers, migration_cost, simplified_migration_cost, MoveKey, PlanError, PlannerParams,
};
use crate::rng::{derive_seed, seeded_rng};
use crate::state::{ControllerId, NetworkState, StateError, SwitchId};

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("unknown strategy `{0}` (expected nsm, csm, musm or easm)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Nsm,
    Csm,
    Musm,
    Easm,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::Nsm, Self::Csm, Self::Musm, Self::Easm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nsm => "nsm",
            Self::Csm => "csm",
            Self::Musm => "musm",
            Self::Easm => "easm",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| StrategyError::UnknownKind(s.to_string()))
    }
}

/// One executed switch move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MigrationRecord {
    pub switch: SwitchId,
    pub from: ControllerId,
    pub to: ControllerId,
    /// Request plus hop-weighted flow-rate cost, KB/s.
    pub cost: f64,
    /// Flow rate times hops to the new controller, KB/s.
    pub simplified_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub migrations: Vec<MigrationRecord>,
    pub rounds: u32,
    pub warnings: Vec<String>,
}

impl StepReport {
    pub fn cost(&self) -> f64 {
        self.migrations.iter().map(|m| m.cost).sum()
    }

    pub fn simplified_cost(&self) -> f64 {
        self.migrations.iter().map(|m| m.simplified_cost).sum()
    }
}

/// Settings shared by every strategy in one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrategyContext {
    pub model: LoadModel,
    pub detection: DetectionParams,
    pub planner: PlannerParams,
    /// Base seed; each step derives its own stream from it.
    pub seed: u64,
}

pub trait Strategy {
    fn kind(&self) -> StrategyKind;

    /// Produces the state for the next step. `step` selects the random
    /// stream so that runs are reproducible.
    fn step(&mut self, state: &NetworkState, step: u64) -> Result<(NetworkState, StepReport), StrategyError>;
}

pub fn build(kind: StrategyKind, ctx: StrategyContext) -> Box<dyn Strategy> {
    match kind {
        StrategyKind::Nsm => Box::new(Nsm),
        StrategyKind::Csm => Box::new(Csm { ctx }),
        StrategyKind::Musm => Box::new(Musm { ctx }),
        StrategyKind::Easm => Box::new(Easm::new(ctx)),
    }
}

pub struct Nsm;

impl Strategy for Nsm {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Nsm
    }

    fn step(&mut self, state: &NetworkState, _step: u64) -> Result<(NetworkState, StepReport), StrategyError> {
        Ok((state.clone(), StepReport::default()))
    }
}

pub struct Csm {
    pub ctx: StrategyContext,
}

impl Strategy for Csm {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Csm
    }

    fn step(&mut self, state: &NetworkState, step: u64) -> Result<(NetworkState, StepReport), StrategyError> {
        let mut rng = seeded_rng(derive_seed(self.ctx.seed, step));
        step_csm_with(state, &self.ctx, &mut |_, domain| {
            domain[rng.random_range(0..domain.len())]
        })
    }
}

/// CSM step with the migrating switch chosen by `pick` from the domain of
/// the overloaded controller.
pub fn step_csm_with(
    state: &NetworkState,
    ctx: &StrategyContext,
    pick: &mut dyn FnMut(ControllerId, &[SwitchId]) -> SwitchId,
) -> Result<(NetworkState, StepReport), StrategyError> {
    per_overloaded(state, ctx, |st, loads, c_m| {
        let domain = st.switches_of(c_m);
        if domain.is_empty() {
            return None;
        }
        let s = pick(c_m, domain);
        let mean = loads.iter().sum::<f64>() / loads.len() as f64;
        let target = st
            .controller_ids()
            .filter(|&c| c != c_m && loads[c.0] < mean && fits(st, &ctx.model, loads, s, c_m, c))
            .min_by_key(|&c| (st.switch_hops(s, c), c))?;
        Some((s, target))
    })
}

pub struct Musm {
    pub ctx: StrategyContext,
}

impl Strategy for Musm {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Musm
    }

    fn step(&mut self, state: &NetworkState, _step: u64) -> Result<(NetworkState, StepReport), StrategyError> {
        let model = self.ctx.model;
        per_overloaded(state, &self.ctx, |st, loads, c_m| {
            let s = *st
                .switches_of(c_m)
                .iter()
                .reduce(|a, b| if st.flow_rate(*b) > st.flow_rate(*a) { b } else { a })?;
            let residual = |c: ControllerId| st.controller(c).capacity - loads[c.0];
            let target = st
                .controller_ids()
                .filter(|&c| c != c_m && fits(st, &model, loads, s, c_m, c))
                .reduce(|a, b| if residual(b) > residual(a) { b } else { a })?;
            Some((s, target))
        })
    }
}

pub struct Easm {
    pub ctx: StrategyContext,
    barred: BTreeSet<MoveKey>,
}

impl Easm {
    pub fn new(ctx: StrategyContext) -> Self {
        Self {
            ctx,
            barred: BTreeSet::new(),
        }
    }
}

impl Strategy for Easm {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Easm
    }

    fn step(&mut self, state: &NetworkState, step: u64) -> Result<(NetworkState, StepReport), StrategyError> {
        let planner = PlannerParams {
            seed: derive_seed(self.ctx.seed, step),
            ..self.ctx.planner
        };
        let (next, report) = rebalance(
            state,
            &self.ctx.model,
            &self.ctx.detection,
            &planner,
            &RebalanceParams { max_rounds: 1 },
            &self.barred,
        )?;
        self.barred = report.last_round_reversals();
        let migrations = report
            .executed
            .iter()
            .map(|e| {
                let t = e.triplet;
                MigrationRecord {
                    switch: t.switch,
                    from: t.emigration,
                    to: t.immigration,
                    cost: t.cost,
                    simplified_cost: simplified_migration_cost(state, t.switch, t.immigration),
                }
            })
            .collect();
        Ok((
            next,
            StepReport {
                migrations,
                rounds: report.rounds,
                warnings: report.warnings,
            },
        ))
    }
}

fn fits(
    state: &NetworkState,
    model: &LoadModel,
    loads: &[f64],
    s: SwitchId,
    from: ControllerId,
    to: ControllerId,
) -> bool {
    let (_, in_shift) = model.migration_shift(state, s, from, to);
    loads[to.0] + in_shift <= state.controller(to).capacity
}

/// Shared driver for the single-move baselines: detect, then for each
/// emigration controller in descending load order ask `choose` for a move
/// against the current loads and apply it.
fn per_overloaded<F>(
    state: &NetworkState,
    ctx: &StrategyContext,
    mut choose: F,
) -> Result<(NetworkState, StepReport), StrategyError>
where
    F: FnMut(&NetworkState, &[f64], ControllerId) -> Option<(SwitchId, ControllerId)>,
{
    let det = detect(state, &ctx.model, &ctx.detection)?;
    let mut current = state.clone();
    let mut report = StepReport::default();
    for c_m in emigration_controllers(&det) {
        let loads = ctx.model.loads(&current);
        let Some((s, to)) = choose(&current, &loads, c_m) else {
            let msg = format!("{}: no eligible target", current.controller(c_m).name);
            debug!("{msg}");
            report.warnings.push(msg);
            continue;
        };
        report.migrations.push(MigrationRecord {
            switch: s,
            from: c_m,
            to,
            cost: migration_cost(&current, &ctx.model, s, c_m, to)?,
            simplified_cost: simplified_migration_cost(&current, s, to),
        });
        current = current.reassign(s, to)?;
    }
    if !report.migrations.is_empty() {
        report.rounds = 1;
    }
    Ok((current, report))
}
