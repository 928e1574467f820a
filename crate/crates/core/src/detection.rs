//! Load-imbalance detection.
//!
//! Builds the pairwise load-ratio matrix, derives the threshold from its
//! spread and reports every controller pair whose trigger factor
//! `|L_m/L_n - L_n/L_m|` exceeds the threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::load::LoadModel;
use crate::state::{ControllerId, NetworkState};

/// Floor applied to zero loads in [`ZeroLoadPolicy::Floor`] mode, KB/s.
pub const LOAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("controller {0} has zero load; ratio matrix is undefined")]
    ZeroLoad(ControllerId),
    #[error("no controller loads to compare")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroLoadPolicy {
    #[default]
    Strict,
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    pub zero_load: ZeroLoadPolicy,
    /// Multiplies the threshold; values above 1 migrate less often.
    pub damping: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            zero_load: ZeroLoadPolicy::Strict,
            damping: 1.0,
        }
    }
}

/// Square matrix of load ratios `d(m, n) = L_m / L_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadMatrix {
    size: usize,
    data: Vec<f64>,
}

impl LoadMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.data[m * self.size + n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.size)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Trigger factor of the unordered pair `(m, n)`.
    pub fn trigger_factor(&self, m: usize, n: usize) -> f64 {
        (self.get(m, n) - self.get(n, m)).abs()
    }
}

/// A controller pair flagged as imbalanced, oriented from the higher-loaded
/// controller to the lower-loaded one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    pub high: ControllerId,
    pub low: ControllerId,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub loads: Vec<f64>,
    pub matrix: LoadMatrix,
    /// Threshold computed from the matrix spread.
    pub threshold: f64,
    /// Threshold after damping; triggers are compared against this value.
    pub effective_threshold: f64,
    pub triggers: Vec<Trigger>,
}

impl DetectionResult {
    pub fn is_balanced(&self) -> bool {
        self.triggers.is_empty()
    }
}

pub fn load_difference_matrix(loads: &[f64], policy: ZeroLoadPolicy) -> Result<LoadMatrix, DetectionError> {
    if loads.is_empty() {
        return Err(DetectionError::Empty);
    }
    let mut effective = Vec::with_capacity(loads.len());
    for (i, &l) in loads.iter().enumerate() {
        if l > 0.0 {
            effective.push(l);
        } else {
            match policy {
                ZeroLoadPolicy::Strict => return Err(DetectionError::ZeroLoad(ControllerId(i))),
                ZeroLoadPolicy::Floor => effective.push(LOAD_FLOOR),
            }
        }
    }
    let n = effective.len();
    let mut data = Vec::with_capacity(n * n);
    for &lm in &effective {
        for &ln in &effective {
            data.push(lm / ln);
        }
    }
    Ok(LoadMatrix { size: n, data })
}

/// `(max - min) / max` over every matrix entry.
pub fn threshold(matrix: &LoadMatrix) -> f64 {
    let max = matrix.max();
    (max - matrix.min()) / max
}

/// Detection on precomputed loads. Pairs are scanned once in lexicographic
/// index order.
pub fn detect_loads(loads: &[f64], params: &DetectionParams) -> Result<DetectionResult, DetectionError> {
    let matrix = load_difference_matrix(loads, params.zero_load)?;
    let lambda = threshold(&matrix);
    let effective = lambda * params.damping;
    let mut triggers = Vec::new();
    for m in 0..matrix.size() {
        for n in m + 1..matrix.size() {
            let delta = matrix.trigger_factor(m, n);
            if delta > effective {
                let (high, low) = if loads[n] > loads[m] { (n, m) } else { (m, n) };
                triggers.push(Trigger {
                    high: ControllerId(high),
                    low: ControllerId(low),
                    delta,
                });
            }
        }
    }
    Ok(DetectionResult {
        loads: loads.to_vec(),
        matrix,
        threshold: lambda,
        effective_threshold: effective,
        triggers,
    })
}

pub fn detect(
    state: &NetworkState,
    model: &LoadModel,
    params: &DetectionParams,
) -> Result<DetectionResult, DetectionError> {
    detect_loads(&model.loads(state), params)
}
