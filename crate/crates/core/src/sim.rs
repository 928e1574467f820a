//! Time-stepped experiments: traffic traces, the step loop and metrics.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::load::LoadModel;
use crate::rng::seeded_rng;
use crate::state::NetworkState;
use crate::strategies::Strategy;

/// Response proxy reported for a controller at or above capacity.
pub const SATURATED_RESPONSE: f64 = 1e3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("mean controller load is zero")]
    ZeroMean,
    #[error("invalid trace parameters: {0}")]
    Trace(String),
    #[error("trace has {trace} switches, network has {network}")]
    Width { trace: usize, network: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Load balancing rate: one minus the coefficient of variation of the
/// loads, clamped to `[0, 1]`. Equal loads give 1.
pub fn lbr(loads: &[f64]) -> Result<f64, SimError> {
    if loads.is_empty() {
        return Err(SimError::ZeroMean);
    }
    let n = loads.len() as f64;
    let mean = loads.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(SimError::ZeroMean);
    }
    let sd = (loads.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok((1.0 - sd / mean).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TraceSpec {
    /// The switches' configured rates at every step.
    Constant,
    /// Independent reflected random walk per switch inside
    /// `[mean - half_width, mean + half_width]`.
    UniformWalk {
        #[serde(default = "default_mean")]
        mean: f64,
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default = "default_walk_step")]
        step: f64,
    },
    /// Configured rates, with a contiguous block of `width` switches
    /// (random start) multiplied by `factor` during `[start, start + duration)`.
    Spike {
        #[serde(default = "default_factor")]
        factor: f64,
        start: usize,
        duration: usize,
        width: usize,
    },
}

fn default_mean() -> f64 {
    200.0
}
fn default_half_width() -> f64 {
    100.0
}
fn default_walk_step() -> f64 {
    20.0
}
fn default_factor() -> f64 {
    3.0
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self::UniformWalk {
            mean: default_mean(),
            half_width: default_half_width(),
            step: default_walk_step(),
        }
    }
}

/// Per-step, per-switch flow rates in KB/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    pub rates: Vec<Vec<f64>>,
    pub seed: u64,
}

impl TrafficTrace {
    pub fn steps(&self) -> usize {
        self.rates.len()
    }
}

/// Builds a deterministic trace from `base` (the switches' configured rates).
pub fn generate_trace(spec: &TraceSpec, base: &[f64], steps: usize, seed: u64) -> Result<TrafficTrace, SimError> {
    if steps == 0 {
        return Err(SimError::Trace("steps must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let rates = match *spec {
        TraceSpec::Constant => vec![base.to_vec(); steps],
        TraceSpec::UniformWalk { mean, half_width, step } => {
            let ok = [mean, half_width, step].iter().all(|x| x.is_finite() && *x >= 0.0);
            if !ok || mean - half_width < 0.0 {
                return Err(SimError::Trace(format!(
                    "band {mean} +/- {half_width} with step {step} must be finite and non-negative"
                )));
            }
            let (lo, hi) = (mean - half_width, mean + half_width);
            let mut cur: Vec<f64> = base
                .iter()
                .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect();
            let mut out = Vec::with_capacity(steps);
            for _ in 0..steps {
                out.push(cur.clone());
                for r in cur.iter_mut() {
                    let d = if step > 0.0 {
                        rng.random_range(-step..=step)
                    } else {
                        0.0
                    };
                    *r = reflect(*r + d, lo, hi);
                }
            }
            out
        }
        TraceSpec::Spike {
            factor,
            start,
            duration,
            width,
        } => {
            if !(factor.is_finite() && factor >= 0.0) || width > base.len() {
                return Err(SimError::Trace(format!(
                    "spike factor {factor} must be non-negative and width {width} at most {}",
                    base.len()
                )));
            }
            let first = if base.len() > width {
                rng.random_range(0..=base.len() - width)
            } else {
                0
            };
            (0..steps)
                .map(|t| {
                    let hot = t >= start && t < start + duration;
                    base.iter()
                        .enumerate()
                        .map(|(i, &r)| {
                            if hot && i >= first && i < first + width {
                                r * factor
                            } else {
                                r
                            }
                        })
                        .collect()
                })
                .collect()
        }
    };
    Ok(TrafficTrace { rates, seed })
}

fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    while x < lo || x > hi {
        if x < lo {
            x = 2.0 * lo - x;
        }
        if x > hi {
            x = 2.0 * hi - x;
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub loads: Vec<f64>,
    pub lbr: f64,
    /// Request plus hop-weighted cost of this step's migrations, KB/s.
    pub migration_cost_step: f64,
    pub cumulative_cost: f64,
    /// Flow rate times target hops, KB/s.
    pub simplified_cost_step: f64,
    pub migrations: usize,
    pub rounds: u32,
    /// Mean of `1 / (capacity - load)`, a headroom-based latency proxy.
    pub response_proxy: f64,
    /// Sum of `min(load, capacity)`.
    pub throughput_proxy: f64,
    pub error: Option<String>,
}

/// Runs `strategy` over `trace` starting from `initial`. Strategy errors are
/// recorded on the step and leave the state unchanged.
pub fn run(
    initial: &NetworkState,
    strategy: &mut dyn Strategy,
    trace: &TrafficTrace,
    model: &LoadModel,
) -> Result<Vec<MetricsRecord>, SimError> {
    let mut state = initial.clone();
    let mut cumulative = 0.0;
    let mut out = Vec::with_capacity(trace.steps());
    for (t, rates) in trace.rates.iter().enumerate() {
        if rates.len() != state.switch_count() {
            return Err(SimError::Width {
                trace: rates.len(),
                network: state.switch_count(),
            });
        }
        let fed = state
            .with_flow_rates(rates)
            .map_err(|e| SimError::Trace(e.to_string()))?;
        let (next, report, error) = match strategy.step(&fed, t as u64) {
            Ok((next, report)) => (next, report, None),
            Err(e) => (fed, Default::default(), Some(e.to_string())),
        };
        debug_assert!(next.is_consistent());
        let loads = model.loads(&next);
        let (lbr_value, error) = match lbr(&loads) {
            Ok(v) => (v, error),
            Err(e) => (1.0, error.or(Some(e.to_string()))),
        };
        let cost = report.cost();
        cumulative += cost;
        let caps: Vec<f64> = next.controllers().iter().map(|c| c.capacity).collect();
        let response = loads
            .iter()
            .zip(&caps)
            .map(|(l, c)| {
                if l < c {
                    (1.0 / (c - l)).min(SATURATED_RESPONSE)
                } else {
                    SATURATED_RESPONSE
                }
            })
            .sum::<f64>()
            / loads.len() as f64;
        let throughput = loads.iter().zip(&caps).map(|(l, c)| l.min(*c)).sum();
        out.push(MetricsRecord {
            step: t,
            lbr: lbr_value,
            migration_cost_step: cost,
            cumulative_cost: cumulative,
            simplified_cost_step: report.simplified_cost(),
            migrations: report.migrations.len(),
            rounds: report.rounds,
            response_proxy: response,
            throughput_proxy: throughput,
            error,
            loads,
        });
        state = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub strategy: String,
    pub steps: usize,
    pub mean_lbr: f64,
    pub final_lbr: f64,
    pub total_cost: f64,
    pub total_simplified_cost: f64,
    pub migrations: usize,
    pub rounds: u64,
    pub errors: usize,
}

pub fn summarize(strategy: &str, records: &[MetricsRecord]) -> RunSummary {
    let n = records.len().max(1) as f64;
    RunSummary {
        strategy: strategy.to_string(),
        steps: records.len(),
        mean_lbr: records.iter().map(|r| r.lbr).sum::<f64>() / n,
        final_lbr: records.last().map_or(0.0, |r| r.lbr),
        total_cost: records.last().map_or(0.0, |r| r.cumulative_cost),
        total_simplified_cost: records.iter().map(|r| r.simplified_cost_step).sum(),
        migrations: records.iter().map(|r| r.migrations).sum(),
        rounds: records.iter().map(|r| u64::from(r.rounds)).sum(),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
    }
}

pub const METRICS_COLUMNS: [&str; 10] = [
    "step",
    "lbr",
    "migration_cost",
    "cumulative_cost",
    "simplified_cost",
    "migrations",
    "rounds",
    "response_proxy",
    "throughput_proxy",
    "error",
];

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "strategy",
    "steps",
    "mean_lbr",
    "final_lbr",
    "total_cost",
    "total_simplified_cost",
    "migrations",
    "rounds",
    "errors",
];

/// Per-step CSV: the fixed columns followed by one `load_<controller>`
/// column per controller.
pub fn metrics_csv(controllers: &[String], records: &[MetricsRecord]) -> Result<Vec<u8>, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = METRICS_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(controllers.iter().map(|c| format!("load_{c}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.step.to_string(),
            r.lbr.to_string(),
            r.migration_cost_step.to_string(),
            r.cumulative_cost.to_string(),
            r.simplified_cost_step.to_string(),
            r.migrations.to_string(),
            r.rounds.to_string(),
            r.response_proxy.to_string(),
            r.throughput_proxy.to_string(),
            r.error.clone().unwrap_or_default(),
        ];
        row.extend(r.loads.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| SimError::Io(e.into_error()))
}

pub fn summary_csv(summaries: &[RunSummary]) -> Result<Vec<u8>, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS)?;
    for s in summaries {
        w.write_record([
            s.strategy.clone(),
            s.steps.to_string(),
            s.mean_lbr.to_string(),
            s.final_lbr.to_string(),
            s.total_cost.to_string(),
            s.total_simplified_cost.to_string(),
            s.migrations.to_string(),
            s.rounds.to_string(),
            s.errors.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| SimError::Io(e.into_error()))
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
