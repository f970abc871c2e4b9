//! Gaussian curricula: densities, KL, importance-weighted objectives and the trust-region update.

mod gaussian;
mod objective;
mod solver;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gaussian::{gaussian_kl, GaussianContextDistribution};
pub use objective::{marginal_ratio, objective, step_weights, WeightedBatch};
pub use solver::{finite_difference_gradient, update_distribution, SolverStatus, Update};

use crate::cmdp::ProductTrajectory;
use crate::scalar::Real;

/// Importance-weight clamp.
pub const W_MAX: f64 = 1e6;
/// Penalty coefficient used once the curriculum sits on the target.
pub const A_MAX: f64 = 1e6;
const KL_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurriculumError {
    #[error("mean has {mean} entries but variances has {variances}")]
    Shape { mean: usize, variances: usize },
    #[error("means must be finite and variances finite and positive")]
    InvalidParameters,
    #[error("marginal over an empty dimension set")]
    EmptyMarginal,
    #[error("dimension {dim} outside 1..={dims}")]
    DimOutOfRange { dim: usize, dims: usize },
    #[error("expected {expected} context dimensions, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("rm_guided weighting needs a reward-machine-context mapping")]
    MissingMapping,
    #[error("distribution update needs a non-empty batch")]
    EmptyBatch,
    #[error("invalid curriculum setting: {0}")]
    InvalidConfig(&'static str),
}

/// How returns are importance-weighted when scoring a candidate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Whole-trajectory ratio on the flat MDP.
    Spdl,
    /// Whole-trajectory ratio on the product MDP.
    Intermediate,
    /// Per-step marginal ratios over `F(q, q')`.
    RmGuided,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Spdl => "spdl",
            Mode::Intermediate => "intermediate",
            Mode::RmGuided => "rm_guided",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spdl" => Ok(Mode::Spdl),
            "intermediate" => Ok(Mode::Intermediate),
            "rm_guided" => Ok(Mode::RmGuided),
            _ => Err(format!("unknown curriculum mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct CurriculumConfig<T> {
    /// Trust-region radius on `KL(nu_k || nu_{k-1})`.
    pub epsilon: T,
    /// Proportion of the mean return traded against distance to the target.
    pub zeta: T,
    /// Iterations with no pull towards the target.
    pub k_alpha: usize,
    /// Convergence threshold on `KL(nu || target)`; below it the update snaps to the target.
    pub kl_lb: T,
    /// Standard-deviation floor.
    pub sigma_lb: T,
}

impl<T: Real> Default for CurriculumConfig<T> {
    fn default() -> Self {
        CurriculumConfig {
            epsilon: T::lit(0.25),
            zeta: T::lit(1.0),
            k_alpha: 15,
            kl_lb: T::lit(0.05),
            sigma_lb: T::lit(0.1),
        }
    }
}

impl<T: Real> CurriculumConfig<T> {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        if !(self.epsilon > T::zero()) {
            return Err(CurriculumError::InvalidConfig("epsilon must be positive"));
        }
        if !(self.zeta >= T::zero()) {
            return Err(CurriculumError::InvalidConfig("zeta must be non-negative"));
        }
        if !(self.kl_lb >= T::zero()) {
            return Err(CurriculumError::InvalidConfig("kl_lb must be non-negative"));
        }
        if !(self.sigma_lb > T::zero()) {
            return Err(CurriculumError::InvalidConfig("sigma_lb must be positive"));
        }
        Ok(())
    }
}

/// `(1/N) sum_i sum_{t>=1} gamma^t r_{i,t}`: the return used by the penalty schedule.
pub fn alpha_return<T: Real>(batch: &[ProductTrajectory<T>], gamma: T) -> T {
    if batch.is_empty() {
        return T::zero();
    }
    let total: T = batch.iter().map(|traj| gamma * crate::cmdp::discounted_return(traj, gamma)).sum();
    total / T::lit(batch.len() as f64)
}

/// Penalty coefficient for iteration `k` (1-based).
pub fn alpha_schedule<T: Real>(
    k: usize,
    config: &CurriculumConfig<T>,
    nu_prev: &GaussianContextDistribution<T>,
    target: &GaussianContextDistribution<T>,
    mean_return: T,
) -> T {
    if k <= config.k_alpha {
        return T::zero();
    }
    let numerator = config.zeta * mean_return.max(T::zero());
    if numerator == T::zero() {
        return T::zero();
    }
    let kl = gaussian_kl(nu_prev, target);
    let cap = T::lit(A_MAX);
    if kl < T::lit(KL_FLOOR) {
        log::debug!("alpha capped at {A_MAX:e}");
        return cap;
    }
    (numerator / kl).min(cap)
}

#[cfg(test)]
mod tests;
