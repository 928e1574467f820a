//! Scenario files and built-in fixtures.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! seed = 7
//! load_mode = "simplified"          # or "full" (default)
//! strategies = ["nsm", "csm", "musm", "easm"]
//! steps = 200
//! output_dir = "out/example"        # optional
//!
//! [topology]
//! builtin = "os3e"                  # or: path = "net.graphml"
//!
//! [[controllers]]
//! name = "c1"
//! node = "Seattle"
//! capacity = 5000.0                 # KB/s, optional
//!
//! [[switches]]
//! name = "s1"
//! node = "Portland"
//! flow_rate = 200.0                 # KB/s
//!
//! [mastership]                      # optional: nearest controller otherwise
//! s1 = "c1"
//!
//! [trace]
//! kind = "uniform-walk"             # constant | uniform-walk | spike
//! ```
//!
//! Instead of listing controllers and switches, a `[random]` table places
//! them on random nodes of the topology from the scenario seed. Optional
//! tables `[load]`, `[detection]`, `[planner]` and `[rebalance]` override
//! the model parameters; `[load] shift = "hop-weighted"` makes the planner
//! predict migrated load as flow rate times hops instead of the model's
//! exact change. Relative topology paths resolve against the
//! scenario file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::detection::DetectionParams;
use crate::executor::RebalanceParams;
use crate::load::{LoadError, LoadMode, LoadModel, LoadModelParams};
use crate::planner::{PlanError, PlannerParams};
use crate::rng::{derive_seed, seeded_rng};
use crate::sim::TraceSpec;
use crate::state::{ControllerSpec, NetworkState, StateError, SwitchSpec, DEFAULT_CAPACITY};
use crate::strategies::{StrategyContext, StrategyKind};
use crate::topology::{Topology, TopologyError};

/// Flow rates of `s1..s9` in the three-domain example network, KB/s.
pub const FIG1_RATES: [f64; 9] = [30.0, 30.0, 30.0, 30.0, 30.0, 40.0, 50.0, 30.0, 40.0];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("topology {origin}: {source}")]
    Topology {
        origin: String,
        #[source]
        source: TopologyError,
    },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySource {
    pub builtin: Option<String>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerEntry {
    pub name: String,
    pub node: String,
    #[serde(default = "default_capacity")]
    pub capacity: f64,
}

fn default_capacity() -> f64 {
    DEFAULT_CAPACITY
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchEntry {
    pub name: String,
    pub node: String,
    pub flow_rate: f64,
}

/// Random placement of controllers and switches on distinct topology nodes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPlacement {
    pub controllers: usize,
    pub switches: usize,
    /// Initial flow rates are drawn uniformly from this range, KB/s.
    #[serde(default = "default_rate_range")]
    pub flow_rate: [f64; 2],
    /// Capacity of every controller. When absent, twice the mean initial
    /// controller load.
    pub capacity: Option<f64>,
}

fn default_rate_range() -> [f64; 2] {
    [100.0, 300.0]
}

/// The on-disk scenario document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    #[serde(default)]
    pub load_mode: LoadMode,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub output_dir: Option<PathBuf>,
    pub topology: TopologySource,
    #[serde(default)]
    pub load: LoadModelParams,
    #[serde(default)]
    pub detection: DetectionParams,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub rebalance: RebalanceParams,
    #[serde(default)]
    pub controllers: Vec<ControllerEntry>,
    #[serde(default)]
    pub switches: Vec<SwitchEntry>,
    pub mastership: Option<BTreeMap<String, String>>,
    pub random: Option<RandomPlacement>,
    #[serde(default)]
    pub trace: TraceSpec,
}

fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

fn default_steps() -> usize {
    100
}

/// A validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub state: NetworkState,
    pub model: LoadModel,
    pub detection: DetectionParams,
    pub planner: PlannerParams,
    pub rebalance: RebalanceParams,
    pub strategies: Vec<StrategyKind>,
    pub steps: usize,
    pub output_dir: Option<PathBuf>,
    pub trace: TraceSpec,
}

impl Scenario {
    pub fn context(&self) -> StrategyContext {
        StrategyContext {
            model: self.model,
            detection: self.detection,
            planner: self.planner,
            seed: self.seed,
        }
    }

    /// Configured flow rates in switch order.
    pub fn base_rates(&self) -> Vec<f64> {
        self.state.switches().iter().map(|s| s.flow_rate).collect()
    }

    pub fn controller_names(&self) -> Vec<String> {
        self.state.controllers().iter().map(|c| c.name.clone()).collect()
    }
}

/// Reads and validates a scenario. `seed` overrides the file's seed.
pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|source| ScenarioError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    file.resolve(path.parent().unwrap_or(Path::new(".")), seed)
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|source| ScenarioError::Parse {
            path: PathBuf::from("<inline>"),
            source,
        })
    }

    pub fn resolve(self, base_dir: &Path, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
        let seed = seed.unwrap_or(self.seed);
        let model = LoadModel::new(self.load_mode, self.load)?;
        let planner = PlannerParams { seed, ..self.planner };
        planner.validate()?;
        if !(self.detection.damping > 0.0) || !self.detection.damping.is_finite() {
            return Err(ScenarioError::Invalid(format!(
                "detection damping {} must be positive",
                self.detection.damping
            )));
        }
        if self.rebalance.max_rounds == 0 {
            return Err(ScenarioError::Invalid("rebalance.max_rounds must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(ScenarioError::Invalid("steps must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(ScenarioError::Invalid("at least one strategy is required".into()));
        }
        let topology = Arc::new(load_topology(&self.topology, base_dir)?);
        let state = match (&self.random, self.controllers.is_empty() && self.switches.is_empty()) {
            (Some(random), true) => random_state(topology, random, derive_seed(seed, u64::MAX), &model)?,
            (Some(_), false) => {
                return Err(ScenarioError::Invalid(
                    "use either [random] or explicit controllers and switches, not both".into(),
                ))
            }
            (None, _) => {
                let controllers: Vec<ControllerSpec> = self
                    .controllers
                    .iter()
                    .map(|c| ControllerSpec {
                        name: c.name.clone(),
                        node: c.node.clone(),
                        capacity: c.capacity,
                    })
                    .collect();
                let switches: Vec<SwitchSpec> = self
                    .switches
                    .iter()
                    .map(|s| SwitchSpec {
                        name: s.name.clone(),
                        node: s.node.clone(),
                        flow_rate: s.flow_rate,
                    })
                    .collect();
                let mastership = match &self.mastership {
                    Some(m) => m.clone(),
                    None => nearest_mastership(&topology, &controllers, &switches)?,
                };
                NetworkState::new(topology, &controllers, &switches, &mastership, &model)?
            }
        };
        Ok(Scenario {
            seed,
            state,
            model,
            detection: self.detection,
            planner,
            rebalance: self.rebalance,
            strategies: self.strategies,
            steps: self.steps,
            output_dir: self.output_dir,
            trace: self.trace,
        })
    }
}

fn load_topology(src: &TopologySource, base_dir: &Path) -> Result<Topology, ScenarioError> {
    match (&src.builtin, &src.path) {
        (Some(name), None) => Topology::builtin(name).map_err(|source| ScenarioError::Topology {
            origin: format!("builtin `{name}`"),
            source,
        }),
        (None, Some(path)) => {
            let full = if path.is_absolute() {
                path.clone()
            } else {
                base_dir.join(path)
            };
            let text = std::fs::read_to_string(&full).map_err(|source| ScenarioError::Io {
                path: full.clone(),
                source,
            })?;
            Topology::from_graphml(&text).map_err(|source| ScenarioError::Topology {
                origin: full.display().to_string(),
                source,
            })
        }
        _ => Err(ScenarioError::Invalid(
            "[topology] needs exactly one of `builtin` or `path`".into(),
        )),
    }
}

/// Assigns every switch to its hop-nearest controller, ties to the earlier
/// controller in the list.
pub fn nearest_mastership(
    topology: &Topology,
    controllers: &[ControllerSpec],
    switches: &[SwitchSpec],
) -> Result<BTreeMap<String, String>, StateError> {
    let index = |id: &str| {
        topology
            .node_index(id)
            .ok_or_else(|| StateError::UnknownNode(id.to_string()))
    };
    let ctrl_nodes = controllers
        .iter()
        .map(|c| index(&c.node))
        .collect::<Result<Vec<_>, _>>()?;
    if controllers.is_empty() {
        return Err(StateError::NoControllers);
    }
    let mut out = BTreeMap::new();
    for s in switches {
        let node = index(&s.node)?;
        let best = (0..controllers.len())
            .min_by_key(|&i| (topology.hops(node, ctrl_nodes[i]), i))
            .expect("at least one controller");
        out.insert(s.name.clone(), controllers[best].name.clone());
    }
    Ok(out)
}

/// Places switches and controllers on distinct random nodes (a controller may
/// share a node with a switch), draws flow rates and assigns each switch to
/// its nearest controller.
pub fn random_state(
    topology: Arc<Topology>,
    placement: &RandomPlacement,
    seed: u64,
    model: &LoadModel,
) -> Result<NetworkState, ScenarioError> {
    let n = topology.node_count();
    if placement.controllers == 0 || placement.controllers > n || placement.switches > n {
        return Err(ScenarioError::Invalid(format!(
            "cannot place {} controllers and {} switches on {n} nodes",
            placement.controllers, placement.switches
        )));
    }
    let [lo, hi] = placement.flow_rate;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(ScenarioError::Invalid(format!(
            "flow rate range [{lo}, {hi}] is invalid"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng);
    let mut sw_nodes = nodes[..placement.switches].to_vec();
    sw_nodes.sort_unstable();
    nodes.shuffle(&mut rng);
    let ctrl_nodes = &nodes[..placement.controllers];
    let id = |i: usize| topology.node_id(crate::topology::NodeIndex(i)).to_string();
    let switches: Vec<SwitchSpec> = sw_nodes
        .iter()
        .map(|&i| SwitchSpec {
            name: id(i),
            node: id(i),
            flow_rate: if hi > lo { rng.random_range(lo..=hi) } else { lo },
        })
        .collect();
    let mut controllers: Vec<ControllerSpec> = ctrl_nodes
        .iter()
        .enumerate()
        .map(|(k, &i)| ControllerSpec {
            name: format!("c{}", k + 1),
            node: id(i),
            capacity: placement.capacity.unwrap_or(DEFAULT_CAPACITY),
        })
        .collect();
    let mastership = nearest_mastership(&topology, &controllers, &switches)?;
    if placement.capacity.is_none() {
        let probe = NetworkState::structural(topology.clone(), &controllers, &switches, &mastership)?;
        let loads = model.loads(&probe);
        let mean = loads.iter().sum::<f64>() / loads.len() as f64;
        let cap = if mean > 0.0 { 2.0 * mean } else { DEFAULT_CAPACITY };
        for c in &mut controllers {
            c.capacity = cap;
        }
    }
    Ok(NetworkState::new(
        topology,
        &controllers,
        &switches,
        &mastership,
        model,
    )?)
}

fn fig1_specs(capacities: &[f64; 3]) -> (Vec<ControllerSpec>, Vec<SwitchSpec>, BTreeMap<String, String>) {
    let controllers = (0..3)
        .map(|i| ControllerSpec {
            name: format!("c{}", i + 1),
            node: format!("c{}", i + 1),
            capacity: capacities[i],
        })
        .collect();
    let switches = FIG1_RATES
        .iter()
        .enumerate()
        .map(|(i, &r)| SwitchSpec {
            name: format!("s{}", i + 1),
            node: format!("s{}", i + 1),
            flow_rate: r,
        })
        .collect();
    let master = ["c1", "c1", "c1", "c2", "c2", "c2", "c2", "c3", "c3"];
    let mastership = master
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("s{}", i + 1), c.to_string()))
        .collect();
    (controllers, switches, mastership)
}

/// The three-domain example network with its initial assignment:
/// c1 = {s1, s2, s3}, c2 = {s4..s7}, c3 = {s8, s9}, capacities 5000 KB/s.
pub fn fig1a_state() -> NetworkState {
    fig1a_state_with_capacity(&[DEFAULT_CAPACITY; 3])
}

pub fn fig1a_state_with_capacity(capacities: &[f64; 3]) -> NetworkState {
    let (c, s, m) = fig1_specs(capacities);
    NetworkState::new(Arc::new(Topology::builtin_fig1()), &c, &s, &m, &LoadModel::simplified())
        .expect("fig1 fixture is valid")
}
