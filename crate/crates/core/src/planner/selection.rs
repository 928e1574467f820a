//! Switch and target scoring over a working view of controller loads.

use std::collections::BTreeSet;

use rand::Rng;

use super::efficiency::{check_move, migration_cost, variance, variance_after};
use super::{MoveKey, PlanError};
use crate::load::LoadModel;
use crate::rng::SimRng;
use crate::state::{ControllerId, NetworkState, SwitchId};

/// A feasible, variance-lowering target for one switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub switch: SwitchId,
    pub target: ControllerId,
    /// Migration cost, KB/s.
    pub cost: f64,
    pub eta_after: f64,
    pub efficiency: f64,
    pub out_shift: f64,
    pub in_shift: f64,
}

/// Read-only scoring view. `loads` may differ from the state's own loads
/// when earlier triplets of a plan have promised load to some controllers.
pub struct PlanningContext<'a> {
    state: &'a NetworkState,
    model: &'a LoadModel,
    loads: &'a [f64],
    forbidden: &'a BTreeSet<MoveKey>,
    eta: f64,
}

impl<'a> PlanningContext<'a> {
    pub fn new(
        state: &'a NetworkState,
        model: &'a LoadModel,
        loads: &'a [f64],
        forbidden: &'a BTreeSet<MoveKey>,
    ) -> Self {
        Self {
            state,
            model,
            loads,
            forbidden,
            eta: variance(loads),
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Targets for `s` that respect capacity, are not forbidden and strictly
    /// lower the variance, in controller index order.
    pub fn candidates(&self, s: SwitchId, from: ControllerId) -> Result<Vec<Candidate>, PlanError> {
        let mut out = Vec::new();
        for to in self.state.controller_ids() {
            if to == from {
                continue;
            }
            check_move(self.state, s, from, to)?;
            let key = MoveKey { switch: s, from, to };
            if self.forbidden.contains(&key) {
                continue;
            }
            let (out_shift, in_shift) = self.model.migration_shift(self.state, s, from, to);
            if self.loads[to.0] + in_shift > self.state.controller(to).capacity {
                continue;
            }
            let eta_after = variance_after(self.loads, from, to, out_shift, in_shift);
            if !(eta_after < self.eta - 1e-12 * self.eta.max(1.0)) {
                continue;
            }
            let cost = migration_cost(self.state, self.model, s, from, to)?;
            out.push(Candidate {
                switch: s,
                target: to,
                cost,
                eta_after,
                efficiency: (self.eta - eta_after) / cost,
                out_shift,
                in_shift,
            });
        }
        Ok(out)
    }

    /// Product of the switch's best efficiency, how close shedding it brings
    /// `c_m` to the mean load, and a softmax over hop distances within the
    /// domain (far switches score higher). Zero when no target is feasible.
    pub fn switch_selection_score(&self, c_m: ControllerId, s: SwitchId) -> Result<f64, PlanError> {
        let candidates = self.candidates(s, c_m)?;
        let Some(best) = candidates.iter().map(|c| c.efficiency).reduce(f64::max) else {
            return Ok(0.0);
        };
        let mean = self.loads.iter().sum::<f64>() / self.loads.len() as f64;
        let shed = candidates[0].out_shift;
        let closeness = 1.0 / (1.0 + (mean - (self.loads[c_m.0] - shed)).abs());
        Ok(best * closeness * self.distance_softmax(c_m, s))
    }

    pub fn distance_softmax(&self, c_m: ControllerId, s: SwitchId) -> f64 {
        let domain = self.state.switches_of(c_m);
        let hops = |x: SwitchId| f64::from(self.state.switch_hops(x, c_m));
        let top = domain.iter().map(|&x| hops(x)).fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = domain.iter().map(|&x| (hops(x) - top).exp()).sum();
        (hops(s) - top).exp() / denom
    }

    /// Highest-scoring switch among `eligible` (a subset of the domain of
    /// `c_m`). Ties go to the switch with the nearest feasible target, then
    /// to a seeded-uniform pick. `None` if no eligible switch can move.
    pub fn select_switch(
        &self,
        c_m: ControllerId,
        eligible: &[SwitchId],
        rng: &mut SimRng,
    ) -> Result<Option<SwitchId>, PlanError> {
        if self.state.switches_of(c_m).is_empty() {
            return Err(PlanError::EmptyDomain(c_m));
        }
        let mut scored = Vec::with_capacity(eligible.len());
        for &s in eligible {
            scored.push((s, self.switch_selection_score(c_m, s)?));
        }
        let best = scored.iter().map(|x| x.1).fold(0.0, f64::max);
        if !(best > 0.0) {
            return Ok(None);
        }
        let tied: Vec<SwitchId> = scored
            .iter()
            .filter(|x| x.1 >= best * (1.0 - 1e-12))
            .map(|x| x.0)
            .collect();
        if tied.len() == 1 {
            return Ok(Some(tied[0]));
        }
        let mut nearest = Vec::with_capacity(tied.len());
        for &s in &tied {
            let hop = self
                .candidates(s, c_m)?
                .iter()
                .map(|c| self.state.switch_hops(s, c.target))
                .min()
                .unwrap_or(u32::MAX);
            nearest.push((s, hop));
        }
        let min_hop = nearest.iter().map(|x| x.1).min().unwrap_or(u32::MAX);
        let closest: Vec<SwitchId> = nearest.into_iter().filter(|x| x.1 == min_hop).map(|x| x.0).collect();
        if closest.len() == 1 {
            return Ok(Some(closest[0]));
        }
        Ok(Some(closest[rng.random_range(0..closest.len())]))
    }

    /// Weighted sum of min-max normalized residual capacity and efficiency
    /// for each candidate. A column with no spread normalizes to 1.
    pub fn immigration_scores(&self, s: SwitchId, candidates: &[Candidate], gamma: f64) -> Result<Vec<f64>, PlanError> {
        if candidates.is_empty() {
            return Err(PlanError::NoImmigrationTarget(s));
        }
        let alpha = self.state.flow_rate(s);
        let residual: Vec<f64> = candidates
            .iter()
            .map(|c| self.state.controller(c.target).capacity - self.loads[c.target.0] - alpha)
            .collect();
        let tau: Vec<f64> = candidates.iter().map(|c| c.efficiency).collect();
        let r = min_max(&residual);
        let t = min_max(&tau);
        Ok(r.iter().zip(&t).map(|(r, t)| gamma * r + (1.0 - gamma) * t).collect())
    }
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 1e-12 * hi.abs().max(lo.abs()).max(1e-300)) {
        return vec![1.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}
