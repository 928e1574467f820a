//! Migration planning: pick emigration controllers, the switch each one
//! sheds, and the controller that takes it over.

mod anneal;
mod efficiency;
mod selection;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anneal::{anneal_argmax, exhaustive_argmax};
pub use efficiency::{
    migration_cost, migration_efficiency, simplified_migration_cost, variance, variance_after, variance_after_migration,
};
pub use selection::{Candidate, PlanningContext};

use crate::detection::DetectionResult;
use crate::load::LoadModel;
use crate::rng::seeded_rng;
use crate::state::{ControllerId, NetworkState, SwitchId};

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("unknown switch {0}")]
    UnknownSwitch(SwitchId),
    #[error("unknown controller {0}")]
    UnknownController(ControllerId),
    #[error("switch {switch} is not supervised by {controller}")]
    NotSupervised { switch: SwitchId, controller: ControllerId },
    #[error("source and target are both {0}")]
    SameController(ControllerId),
    #[error("migration cost is zero")]
    ZeroCost,
    #[error("controller {0} supervises no switches")]
    EmptyDomain(ControllerId),
    #[error("no immigration target for switch {0}")]
    NoImmigrationTarget(SwitchId),
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Simulated annealing over the candidate controllers.
    #[default]
    Sa,
    /// Score every candidate and take the first maximum.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    /// Weight of residual capacity against efficiency in the target score.
    pub gamma: f64,
    /// Initial annealing temperature.
    pub t0: f64,
    /// Annealing iterations.
    pub max_temp_change: u32,
    pub seed: u64,
    pub mode: SearchMode,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            t0: 1.0,
            max_temp_change: 100,
            seed: 0,
            mode: SearchMode::Sa,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(PlanError::InvalidParams(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(PlanError::InvalidParams(format!("t0 {} must be positive", self.t0)));
        }
        if self.max_temp_change == 0 {
            return Err(PlanError::InvalidParams("max_temp_change must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MigrationTriplet {
    pub emigration: ControllerId,
    pub switch: SwitchId,
    pub immigration: ControllerId,
    /// Migration cost, KB/s.
    pub cost: f64,
    pub efficiency: f64,
}

impl MigrationTriplet {
    pub fn key(&self) -> MoveKey {
        MoveKey {
            switch: self.switch,
            from: self.emigration,
            to: self.immigration,
        }
    }

    /// `(c2, s6, c3)` using the state's names.
    pub fn describe(&self, state: &NetworkState) -> String {
        format!(
            "({}, {}, {})",
            state.controller(self.emigration).name,
            state.switch(self.switch).name,
            state.controller(self.immigration).name
        )
    }
}

impl fmt::Display for MigrationTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.emigration, self.switch, self.immigration)
    }
}

/// A directed switch move, used to bar specific moves from a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MoveKey {
    pub switch: SwitchId,
    pub from: ControllerId,
    pub to: ControllerId,
}

impl MoveKey {
    pub fn reversed(self) -> Self {
        Self {
            switch: self.switch,
            from: self.to,
            to: self.from,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MigrationPlan {
    pub triplets: Vec<MigrationTriplet>,
    pub warnings: Vec<String>,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.triplets.iter().map(|t| t.cost).sum()
    }

    pub fn total_efficiency(&self) -> f64 {
        self.triplets.iter().map(|t| t.efficiency).sum()
    }
}

/// High side of every trigger, deduplicated, most loaded first (ties by index).
pub fn emigration_controllers(detection: &DetectionResult) -> Vec<ControllerId> {
    let set: BTreeSet<ControllerId> = detection.triggers.iter().map(|t| t.high).collect();
    let mut out: Vec<ControllerId> = set.into_iter().collect();
    out.sort_by(|a, b| detection.loads[b.0].total_cmp(&detection.loads[a.0]).then(a.cmp(b)));
    out
}

/// Picks one target among `candidates` by score, using the configured search.
pub fn select_immigration(scores: &[f64], params: &PlannerParams, rng: &mut crate::rng::SimRng) -> usize {
    match params.mode {
        SearchMode::Sa => anneal_argmax(scores, params.t0, params.max_temp_change, rng),
        SearchMode::Exhaustive => exhaustive_argmax(scores),
    }
}

/// Builds a plan for the detection result. Moves in `forbidden` are never
/// proposed. Emigration controllers without a feasible move are reported in
/// the plan's warnings.
pub fn plan(
    state: &NetworkState,
    model: &LoadModel,
    params: &PlannerParams,
    detection: &DetectionResult,
    forbidden: &BTreeSet<MoveKey>,
) -> Result<MigrationPlan, PlanError> {
    params.validate()?;
    let mut rng = seeded_rng(params.seed);
    let mut working = detection.loads.clone();
    let mut claimed = BTreeSet::new();
    let mut out = MigrationPlan::default();

    for c_m in emigration_controllers(detection) {
        let eligible: Vec<SwitchId> = state
            .switches_of(c_m)
            .iter()
            .copied()
            .filter(|s| !claimed.contains(s))
            .collect();
        if eligible.is_empty() {
            out.warnings
                .push(format!("{}: no unclaimed switches", state.controller(c_m).name));
            continue;
        }
        let ctx = PlanningContext::new(state, model, &working, forbidden);
        let Some(s) = ctx.select_switch(c_m, &eligible, &mut rng)? else {
            out.warnings.push(format!(
                "{}: no feasible migration that lowers the load variance",
                state.controller(c_m).name
            ));
            continue;
        };
        let candidates = ctx.candidates(s, c_m)?;
        let scores = ctx.immigration_scores(s, &candidates, params.gamma)?;
        let chosen = candidates[select_immigration(&scores, params, &mut rng)];
        out.triplets.push(MigrationTriplet {
            emigration: c_m,
            switch: s,
            immigration: chosen.target,
            cost: chosen.cost,
            efficiency: chosen.efficiency,
        });
        working[c_m.0] -= chosen.out_shift;
        working[chosen.target.0] += chosen.in_shift;
        claimed.insert(s);
    }
    Ok(out)
}
