//! Migration cost, load variance and migration efficiency.

use super::PlanError;
use crate::load::LoadModel;
use crate::state::{ControllerId, NetworkState, SwitchId};

/// Cost of moving `s` from `from` to `to`, KB/s: one migration request of
/// Packet-in size plus the flow rate weighted by the change in hop distance.
pub fn migration_cost(
    state: &NetworkState,
    model: &LoadModel,
    s: SwitchId,
    from: ControllerId,
    to: ControllerId,
) -> Result<f64, PlanError> {
    check_move(state, s, from, to)?;
    let h_from = f64::from(state.switch_hops(s, from));
    let h_to = f64::from(state.switch_hops(s, to));
    Ok(model.params().p_packet_kb() + state.flow_rate(s) * (h_to - h_from).abs())
}

/// Flow rate times hop distance to the new controller.
pub fn simplified_migration_cost(state: &NetworkState, s: SwitchId, to: ControllerId) -> f64 {
    state.flow_rate(s) * f64::from(state.switch_hops(s, to))
}

/// Population variance of controller loads.
pub fn variance(loads: &[f64]) -> f64 {
    if loads.is_empty() {
        return 0.0;
    }
    let n = loads.len() as f64;
    let mean = loads.iter().sum::<f64>() / n;
    loads.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n
}

/// Variance after removing `out_shift` from `from` and adding `in_shift` to
/// `to`; every other load is unchanged and the mean is recomputed.
pub fn variance_after(loads: &[f64], from: ControllerId, to: ControllerId, out_shift: f64, in_shift: f64) -> f64 {
    let mut next = loads.to_vec();
    next[from.0] -= out_shift;
    next[to.0] += in_shift;
    variance(&next)
}

/// Variance after hypothetically migrating `s`, using the model's load shift.
pub fn variance_after_migration(
    state: &NetworkState,
    model: &LoadModel,
    loads: &[f64],
    s: SwitchId,
    from: ControllerId,
    to: ControllerId,
) -> f64 {
    let (out, inn) = model.migration_shift(state, s, from, to);
    variance_after(loads, from, to, out, inn)
}

/// Absolute variance change per unit of migration cost.
pub fn migration_efficiency(
    state: &NetworkState,
    model: &LoadModel,
    loads: &[f64],
    s: SwitchId,
    from: ControllerId,
    to: ControllerId,
) -> Result<f64, PlanError> {
    let cost = migration_cost(state, model, s, from, to)?;
    if !(cost > 0.0) {
        return Err(PlanError::ZeroCost);
    }
    let before = variance(loads);
    let after = variance_after_migration(state, model, loads, s, from, to);
    Ok((after - before).abs() / cost)
}

pub(crate) fn check_move(
    state: &NetworkState,
    s: SwitchId,
    from: ControllerId,
    to: ControllerId,
) -> Result<(), PlanError> {
    if s.0 >= state.switch_count() {
        return Err(PlanError::UnknownSwitch(s));
    }
    if from.0 >= state.controller_count() || to.0 >= state.controller_count() {
        return Err(PlanError::UnknownController(if from.0 >= state.controller_count() {
            from
        } else {
            to
        }));
    }
    if state.master_of(s) != from {
        return Err(PlanError::NotSupervised {
            switch: s,
            controller: from,
        });
    }
    if from == to {
        return Err(PlanError::SameController(from));
    }
    Ok(())
}
