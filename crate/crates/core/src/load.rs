//! Controller load model.
//!
//! In `full` mode a controller's load is the weighted sum of three overheads:
//! data interaction with its switches, routing formulation (Packet-in
//! handling plus flow-table distribution to peer controllers) and state
//! synchronization with every other controller. All components are in KB/s;
//! packet sizes are configured in bytes and converted to KB (1 KB = 1000 B).
//!
//! In `simplified` mode a controller's load is the sum of the flow rates of the
//! switches it supervises.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{ControllerId, NetworkState, SwitchId};

#[derive(Debug, Error, PartialEq)]
pub enum LoadError {
    #[error("load weights must sum to 1, got {0}")]
    WeightSum(f64),
    #[error("load parameter `{0}` must be finite and non-negative")]
    Negative(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadMode {
    #[default]
    Full,
    Simplified,
}

impl std::str::FromStr for LoadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "simplified" => Ok(Self::Simplified),
            other => Err(format!("unknown load mode `{other}`")),
        }
    }
}

/// How the planner predicts the load moved by a migration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftRule {
    /// The change the configured load model actually undergoes.
    #[default]
    Exact,
    /// Flow rate times hop distance on both sides.
    HopWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadModelParams {
    /// Average polling rate per switch, KB/s.
    pub nu: f64,
    /// Average Packet-in size, bytes.
    pub p_packet_bytes: f64,
    /// Synchronization packet size, bytes.
    pub zeta_sync_bytes: f64,
    /// Weights of the data, routing and synchronization overheads.
    pub sigma: [f64; 3],
    /// Prediction used for hypothetical post-migration loads.
    pub shift: ShiftRule,
}

impl Default for LoadModelParams {
    fn default() -> Self {
        Self {
            nu: 15.0,
            p_packet_bytes: 30.0,
            zeta_sync_bytes: 18.0,
            sigma: [1.0 / 3.0; 3],
            shift: ShiftRule::Exact,
        }
    }
}

impl LoadModelParams {
    pub fn p_packet_kb(&self) -> f64 {
        self.p_packet_bytes / 1000.0
    }

    pub fn zeta_sync_kb(&self) -> f64 {
        self.zeta_sync_bytes / 1000.0
    }

    pub fn validate(&self) -> Result<(), LoadError> {
        let fields = [
            ("nu", self.nu),
            ("p_packet_bytes", self.p_packet_bytes),
            ("zeta_sync_bytes", self.zeta_sync_bytes),
            ("sigma", self.sigma[0]),
            ("sigma", self.sigma[1]),
            ("sigma", self.sigma[2]),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LoadError::Negative(name));
            }
        }
        let sum: f64 = self.sigma.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(LoadError::WeightSum(sum));
        }
        Ok(())
    }
}

/// Per-component load of one controller, KB/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadBreakdown {
    pub f_data: f64,
    pub f_packet: f64,
    pub f_table: f64,
    pub f_routing: f64,
    pub f_state: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadModel {
    mode: LoadMode,
    params: LoadModelParams,
}

impl Default for LoadModel {
    fn default() -> Self {
        Self {
            mode: LoadMode::Full,
            params: LoadModelParams::default(),
        }
    }
}

impl LoadModel {
    pub fn new(mode: LoadMode, params: LoadModelParams) -> Result<Self, LoadError> {
        params.validate()?;
        Ok(Self { mode, params })
    }

    pub fn simplified() -> Self {
        Self {
            mode: LoadMode::Simplified,
            params: LoadModelParams::default(),
        }
    }

    pub fn mode(&self) -> LoadMode {
        self.mode
    }

    pub fn params(&self) -> &LoadModelParams {
        &self.params
    }

    pub fn data_interaction_overhead(&self, state: &NetworkState, c: ControllerId) -> f64 {
        self.params.nu * domain_hops(state, c)
    }

    pub fn packet_in_overhead(&self, state: &NetworkState, c: ControllerId) -> f64 {
        self.params.p_packet_kb() * domain_hops(state, c)
    }

    /// Flow-table distribution: every supervised switch's traffic is pushed
    /// to each peer controller, weighted by both hop distances.
    pub fn flow_table_overhead(&self, state: &NetworkState, c: ControllerId) -> f64 {
        let peers = peer_hops(state, c);
        state
            .switches_of(c)
            .iter()
            .map(|&s| state.flow_rate(s) * f64::from(state.switch_hops(s, c)) * peers)
            .sum()
    }

    pub fn routing_overhead(&self, state: &NetworkState, c: ControllerId) -> f64 {
        self.packet_in_overhead(state, c) + self.flow_table_overhead(state, c)
    }

    /// Full-mesh synchronization with every other controller.
    pub fn state_sync_overhead(&self, state: &NetworkState, c: ControllerId) -> f64 {
        self.params.zeta_sync_kb() * peer_hops(state, c)
    }

    pub fn controller_load(&self, state: &NetworkState, c: ControllerId) -> LoadBreakdown {
        let f_data = self.data_interaction_overhead(state, c);
        let f_packet = self.packet_in_overhead(state, c);
        let f_table = self.flow_table_overhead(state, c);
        let f_routing = f_packet + f_table;
        let f_state = self.state_sync_overhead(state, c);
        let [w1, w2, w3] = self.params.sigma;
        LoadBreakdown {
            f_data,
            f_packet,
            f_table,
            f_routing,
            f_state,
            total: w1 * f_data + w2 * f_routing + w3 * f_state,
        }
    }

    /// Sum of the supervised switches' flow rates.
    pub fn simplified_load(state: &NetworkState, c: ControllerId) -> f64 {
        state.switches_of(c).iter().map(|&s| state.flow_rate(s)).sum()
    }

    /// Load of `c` under the configured mode.
    pub fn load(&self, state: &NetworkState, c: ControllerId) -> f64 {
        match self.mode {
            LoadMode::Full => self.controller_load(state, c).total,
            LoadMode::Simplified => Self::simplified_load(state, c),
        }
    }

    pub fn loads(&self, state: &NetworkState) -> Vec<f64> {
        state.controller_ids().map(|c| self.load(state, c)).collect()
    }

    /// Hypothetical load moved by migrating `s` from `from` to `to`, as
    /// `(removed from source, added to target)`.
    ///
    /// `Exact` returns the change the model itself undergoes. In full mode
    /// only the two domains' data and routing terms depend on the switch, so
    /// each side is a per-hop weight times the switch's hop distance.
    /// `HopWeighted` uses flow rate times hops in either mode.
    pub fn migration_shift(
        &self,
        state: &NetworkState,
        s: SwitchId,
        from: ControllerId,
        to: ControllerId,
    ) -> (f64, f64) {
        let alpha = state.flow_rate(s);
        let (h_from, h_to) = (
            f64::from(state.switch_hops(s, from)),
            f64::from(state.switch_hops(s, to)),
        );
        match (self.params.shift, self.mode) {
            (ShiftRule::HopWeighted, _) => (alpha * h_from, alpha * h_to),
            (ShiftRule::Exact, LoadMode::Simplified) => (alpha, alpha),
            (ShiftRule::Exact, LoadMode::Full) => {
                let [w1, w2, _] = self.params.sigma;
                let per_hop = |c: ControllerId| {
                    w1 * self.params.nu + w2 * (self.params.p_packet_kb() + alpha * peer_hops(state, c))
                };
                (per_hop(from) * h_from, per_hop(to) * h_to)
            }
        }
    }
}

fn domain_hops(state: &NetworkState, c: ControllerId) -> f64 {
    state
        .switches_of(c)
        .iter()
        .map(|&s| f64::from(state.switch_hops(s, c)))
        .sum()
}

fn peer_hops(state: &NetworkState, c: ControllerId) -> f64 {
    state
        .controller_ids()
        .filter(|&n| n != c)
        .map(|n| f64::from(state.controller_hops(c, n)))
        .sum()
}
