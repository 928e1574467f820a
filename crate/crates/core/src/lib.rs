//! Multi-controller SDN load balancing by switch migration.
//!
//! The crate models controller load from switch flow rates and topology,
//! detects imbalance from pairwise load ratios, plans switch migrations by
//! migration efficiency (variance reduction per unit cost) and compares the
//! result against simple baselines over synthetic traffic.

// negated float comparisons are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detection;
pub mod executor;
pub mod load;
pub mod planner;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod state;
pub mod strategies;
pub mod topology;

pub use detection::{detect, DetectionParams, DetectionResult, ZeroLoadPolicy};
pub use executor::{execute_plan, rebalance, RebalanceParams, RebalanceReport, StopReason};
pub use load::{LoadMode, LoadModel, LoadModelParams, ShiftRule};
pub use planner::{plan, MigrationPlan, MigrationTriplet, PlannerParams, SearchMode};
pub use state::{ControllerId, NetworkState, SwitchId};
pub use strategies::{Strategy, StrategyContext, StrategyKind};
pub use topology::Topology;
