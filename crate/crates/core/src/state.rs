//! Controller/switch assignment with capacities and flow rates.
//!
//! A [`NetworkState`] is an immutable value. Every switch has exactly one
//! master controller (the mastership vector is total by construction) and the
//! per-controller domains are kept as the exact inverse image of it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::load::LoadModel;
use crate::topology::{NodeIndex, Topology};

/// Default controller capacity in KB/s (5 MB/s).
pub const DEFAULT_CAPACITY: f64 = 5000.0;

/// Recommended number of switches per controller.
pub const DOMAIN_SIZE_RANGE: (usize, usize) = (5, 20);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ControllerId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwitchId(pub usize);

impl fmt::Display for ControllerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c#{}", self.0)
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s#{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown controller `{0}`")]
    UnknownController(String),
    #[error("unknown switch `{0}`")]
    UnknownSwitch(String),
    #[error("duplicate {kind} name `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("switch `{0}` has no master controller")]
    Unmapped(String),
    #[error("controller `{name}` has non-positive capacity {capacity}")]
    BadCapacity { name: String, capacity: f64 },
    #[error("switch `{name}` has invalid flow rate {rate}")]
    BadFlowRate { name: String, rate: f64 },
    #[error("every controller exceeds its capacity")]
    AllOverloaded,
    #[error("expected {expected} flow rates, got {got}")]
    RateCount { expected: usize, got: usize },
    #[error("network needs at least one controller")]
    NoControllers,
}

/// Input description of a controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub name: String,
    pub node: String,
    /// Processing capacity, KB/s.
    pub capacity: f64,
}

/// Input description of a switch.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSpec {
    pub name: String,
    pub node: String,
    /// Average flow rate, KB/s.
    pub flow_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRecord {
    pub name: String,
    pub node: NodeIndex,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchRecord {
    pub name: String,
    pub node: NodeIndex,
    pub flow_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    topology: Arc<Topology>,
    controllers: Arc<Vec<ControllerRecord>>,
    switches: Vec<SwitchRecord>,
    master: Vec<ControllerId>,
    gamma: Vec<Vec<SwitchId>>,
}

impl NetworkState {
    /// Validates and builds a state. `mastership` maps switch name to
    /// controller name and must cover every switch. At least one controller
    /// must be within capacity under `model`.
    pub fn new(
        topology: Arc<Topology>,
        controllers: &[ControllerSpec],
        switches: &[SwitchSpec],
        mastership: &BTreeMap<String, String>,
        model: &LoadModel,
    ) -> Result<Self, StateError> {
        let state = Self::structural(topology, controllers, switches, mastership)?;
        state.check_capacity(&model.loads(&state))?;
        Ok(state)
    }

    /// Like [`NetworkState::new`] without the capacity check.
    pub fn structural(
        topology: Arc<Topology>,
        controllers: &[ControllerSpec],
        switches: &[SwitchSpec],
        mastership: &BTreeMap<String, String>,
    ) -> Result<Self, StateError> {
        if controllers.is_empty() {
            return Err(StateError::NoControllers);
        }
        let node = |id: &str| {
            topology
                .node_index(id)
                .ok_or_else(|| StateError::UnknownNode(id.to_string()))
        };
        let mut ctrl_names = BTreeMap::new();
        let mut ctrl_records = Vec::with_capacity(controllers.len());
        for (i, c) in controllers.iter().enumerate() {
            if ctrl_names.insert(c.name.clone(), ControllerId(i)).is_some() {
                return Err(StateError::Duplicate {
                    kind: "controller",
                    name: c.name.clone(),
                });
            }
            if !(c.capacity > 0.0) || !c.capacity.is_finite() {
                return Err(StateError::BadCapacity {
                    name: c.name.clone(),
                    capacity: c.capacity,
                });
            }
            ctrl_records.push(ControllerRecord {
                name: c.name.clone(),
                node: node(&c.node)?,
                capacity: c.capacity,
            });
        }
        let mut sw_names = BTreeMap::new();
        let mut sw_records = Vec::with_capacity(switches.len());
        for (i, s) in switches.iter().enumerate() {
            if sw_names.insert(s.name.clone(), i).is_some() {
                return Err(StateError::Duplicate {
                    kind: "switch",
                    name: s.name.clone(),
                });
            }
            check_rate(&s.name, s.flow_rate)?;
            sw_records.push(SwitchRecord {
                name: s.name.clone(),
                node: node(&s.node)?,
                flow_rate: s.flow_rate,
            });
        }
        for sw in mastership.keys() {
            if !sw_names.contains_key(sw) {
                return Err(StateError::UnknownSwitch(sw.clone()));
            }
        }
        let mut master = Vec::with_capacity(switches.len());
        for s in switches {
            let c = mastership
                .get(&s.name)
                .ok_or_else(|| StateError::Unmapped(s.name.clone()))?;
            let id = ctrl_names
                .get(c)
                .ok_or_else(|| StateError::UnknownController(c.clone()))?;
            master.push(*id);
        }
        let gamma = inverse(controllers.len(), &master);
        Ok(Self {
            topology,
            controllers: Arc::new(ctrl_records),
            switches: sw_records,
            master,
            gamma,
        })
    }

    /// Fails unless some controller is at or below its capacity.
    pub fn check_capacity(&self, loads: &[f64]) -> Result<(), StateError> {
        if self.controllers.iter().zip(loads).any(|(c, &l)| l <= c.capacity) {
            Ok(())
        } else {
            Err(StateError::AllOverloaded)
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn topology_arc(&self) -> Arc<Topology> {
        Arc::clone(&self.topology)
    }

    pub fn controller_count(&self) -> usize {
        self.controllers.len()
    }

    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }

    pub fn controller_ids(&self) -> impl Iterator<Item = ControllerId> + '_ {
        (0..self.controllers.len()).map(ControllerId)
    }

    pub fn switch_ids(&self) -> impl Iterator<Item = SwitchId> + '_ {
        (0..self.switches.len()).map(SwitchId)
    }

    pub fn controller(&self, c: ControllerId) -> &ControllerRecord {
        &self.controllers[c.0]
    }

    pub fn switch(&self, s: SwitchId) -> &SwitchRecord {
        &self.switches[s.0]
    }

    pub fn controllers(&self) -> &[ControllerRecord] {
        &self.controllers
    }

    pub fn switches(&self) -> &[SwitchRecord] {
        &self.switches
    }

    pub fn controller_by_name(&self, name: &str) -> Result<ControllerId, StateError> {
        self.controllers
            .iter()
            .position(|c| c.name == name)
            .map(ControllerId)
            .ok_or_else(|| StateError::UnknownController(name.to_string()))
    }

    pub fn switch_by_name(&self, name: &str) -> Result<SwitchId, StateError> {
        self.switches
            .iter()
            .position(|s| s.name == name)
            .map(SwitchId)
            .ok_or_else(|| StateError::UnknownSwitch(name.to_string()))
    }

    pub fn master_of(&self, s: SwitchId) -> ControllerId {
        self.master[s.0]
    }

    /// Switches supervised by `c`, in index order.
    pub fn switches_of(&self, c: ControllerId) -> &[SwitchId] {
        &self.gamma[c.0]
    }

    pub fn switches_of_named(&self, name: &str) -> Result<Vec<&str>, StateError> {
        let c = self.controller_by_name(name)?;
        Ok(self
            .switches_of(c)
            .iter()
            .map(|&s| self.switch(s).name.as_str())
            .collect())
    }

    pub fn flow_rate(&self, s: SwitchId) -> f64 {
        self.switches[s.0].flow_rate
    }

    /// Hop count between a switch and a controller.
    pub fn switch_hops(&self, s: SwitchId, c: ControllerId) -> u32 {
        self.topology.hops(self.switches[s.0].node, self.controllers[c.0].node)
    }

    /// Hop count between two controllers.
    pub fn controller_hops(&self, a: ControllerId, b: ControllerId) -> u32 {
        self.topology
            .hops(self.controllers[a.0].node, self.controllers[b.0].node)
    }

    /// Returns a new state where `s` is mastered by `to`.
    pub fn reassign(&self, s: SwitchId, to: ControllerId) -> Result<Self, StateError> {
        if s.0 >= self.switches.len() {
            return Err(StateError::UnknownSwitch(s.to_string()));
        }
        if to.0 >= self.controllers.len() {
            return Err(StateError::UnknownController(to.to_string()));
        }
        let from = self.master[s.0];
        let mut next = self.clone();
        if from == to {
            return Ok(next);
        }
        next.master[s.0] = to;
        next.gamma[from.0].retain(|&x| x != s);
        let dest = &mut next.gamma[to.0];
        let pos = dest.binary_search(&s).unwrap_err();
        dest.insert(pos, s);
        Ok(next)
    }

    pub fn reassign_named(&self, switch: &str, controller: &str) -> Result<Self, StateError> {
        self.reassign(self.switch_by_name(switch)?, self.controller_by_name(controller)?)
    }

    /// Returns a new state with the given per-switch flow rates (index order).
    pub fn with_flow_rates(&self, rates: &[f64]) -> Result<Self, StateError> {
        if rates.len() != self.switches.len() {
            return Err(StateError::RateCount {
                expected: self.switches.len(),
                got: rates.len(),
            });
        }
        let mut next = self.clone();
        for (rec, &r) in next.switches.iter_mut().zip(rates) {
            check_rate(&rec.name, r)?;
            rec.flow_rate = r;
        }
        Ok(next)
    }

    /// Controllers whose domain size lies outside `range` (inclusive).
    pub fn domain_size_warnings(&self, range: (usize, usize)) -> Vec<String> {
        self.controller_ids()
            .filter_map(|c| {
                let n = self.switches_of(c).len();
                (n < range.0 || n > range.1).then(|| {
                    format!(
                        "controller `{}` supervises {n} switches (recommended {}..={})",
                        self.controller(c).name,
                        range.0,
                        range.1
                    )
                })
            })
            .collect()
    }

    /// Checks that the domains partition the switch set and agree with the
    /// mastership vector.
    pub fn is_consistent(&self) -> bool {
        self.gamma == inverse(self.controllers.len(), &self.master)
    }

    /// Mastership as switch name -> controller name.
    pub fn mastership(&self) -> BTreeMap<String, String> {
        self.switches
            .iter()
            .zip(&self.master)
            .map(|(s, c)| (s.name.clone(), self.controllers[c.0].name.clone()))
            .collect()
    }
}

fn check_rate(name: &str, rate: f64) -> Result<(), StateError> {
    if rate >= 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(StateError::BadFlowRate {
            name: name.to_string(),
            rate,
        })
    }
}

fn inverse(controllers: usize, master: &[ControllerId]) -> Vec<Vec<SwitchId>> {
    let mut gamma = vec![Vec::new(); controllers];
    for (i, c) in master.iter().enumerate() {
        gamma[c.0].push(SwitchId(i));
    }
    gamma
}
