use super::{gaussian_kl, CurriculumError, GaussianContextDistribution, Mode, W_MAX};
use crate::cmdp::ProductTrajectory;
use crate::mapping::{DimSet, RMContextMapping};
use crate::scalar::Real;

/// Density ratio of the marginals over `dims`; exactly 1 for the empty set.
/// The second value reports whether the ratio hit `W_MAX`.
pub fn marginal_ratio<T: Real>(
    dims: DimSet,
    c: &[T],
    nu: &GaussianContextDistribution<T>,
    nu_prev: &GaussianContextDistribution<T>,
) -> (T, bool) {
    if dims.is_empty() {
        return (T::one(), false);
    }
    ratio_from_logs(nu.marginal_log_pdf(dims, c), nu_prev.marginal_log_pdf(dims, c))
}

fn ratio_from_logs<T: Real>(log_num: T, log_den: T) -> (T, bool) {
    let w = (log_num - log_den).exp();
    let cap = T::lit(W_MAX);
    if !(w <= cap) {
        (cap, true)
    } else {
        (w, false)
    }
}

/// Per-step importance weights `rho_F(c|nu) / rho_F(c|nu_prev)` with `F = F(q_t, q_{t+1})`.
pub fn step_weights<T: Real>(
    traj: &ProductTrajectory<T>,
    nu: &GaussianContextDistribution<T>,
    nu_prev: &GaussianContextDistribution<T>,
    f: &RMContextMapping,
) -> Vec<T> {
    let c = traj.context.values();
    traj.steps
        .iter()
        .map(|s| {
            let dims = f.get_or_full(s.state.rm_state, s.next.rm_state);
            let (w, clamped) = marginal_ratio(dims, c, nu, nu_prev);
            if clamped {
                log::warn!("importance weight clamped at {W_MAX:e}");
            }
            w
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Group<T> {
    dims: DimSet,
    /// Discounted reward collected on steps weighted by `dims`.
    discounted: T,
    log_prev: T,
}

/// A batch of trajectories prepared for repeated objective evaluation.
///
/// Discounted rewards are summed per weighting set, so each candidate `nu`
/// costs one marginal density per distinct set and trajectory. SPDL and
/// Intermediate use the full set on every step, RM-guided uses `F(q, q')`.
#[derive(Debug, Clone)]
pub struct WeightedBatch<T> {
    contexts: Vec<Vec<T>>,
    groups: Vec<Vec<Group<T>>>,
    mean_return: T,
}

impl<T: Real> WeightedBatch<T> {
    pub fn new(
        batch: &[ProductTrajectory<T>],
        gamma: T,
        nu_prev: &GaussianContextDistribution<T>,
        mode: Mode,
        f: Option<&RMContextMapping>,
    ) -> Result<Self, CurriculumError> {
        if mode == Mode::RmGuided && f.is_none() {
            return Err(CurriculumError::MissingMapping);
        }
        let full = DimSet::full(nu_prev.dims());
        let mut contexts = Vec::with_capacity(batch.len());
        let mut groups = Vec::with_capacity(batch.len());
        let mut total = T::zero();
        for traj in batch {
            if traj.context.dims() != nu_prev.dims() {
                return Err(CurriculumError::DimensionMismatch {
                    expected: nu_prev.dims(),
                    found: traj.context.dims(),
                });
            }
            let c = traj.context.values();
            let mut mine: Vec<Group<T>> = Vec::new();
            let mut discount = T::one();
            for step in &traj.steps {
                let dims = match (mode, f) {
                    (Mode::RmGuided, Some(f)) => f.get_or_full(step.state.rm_state, step.next.rm_state),
                    _ => full,
                };
                let r = discount * step.reward;
                discount = discount * gamma;
                total = total + r;
                match mine.iter_mut().find(|g| g.dims == dims) {
                    Some(g) => g.discounted = g.discounted + r,
                    None => mine.push(Group {
                        dims,
                        discounted: r,
                        log_prev: nu_prev.marginal_log_pdf(dims, c),
                    }),
                }
            }
            contexts.push(c.to_vec());
            groups.push(mine);
        }
        let mean_return = if batch.is_empty() {
            T::zero()
        } else {
            total / T::lit(batch.len() as f64)
        };
        Ok(WeightedBatch {
            contexts,
            groups,
            mean_return,
        })
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// Unweighted mean discounted return.
    pub fn mean_return(&self) -> T {
        self.mean_return
    }

    /// Importance-weighted return estimate under `nu` and the number of clamped weights.
    pub fn estimate(&self, nu: &GaussianContextDistribution<T>) -> (T, usize) {
        if self.is_empty() {
            return (T::zero(), 0);
        }
        let mut clamped = 0;
        let mut total = T::zero();
        for (c, groups) in self.contexts.iter().zip(&self.groups) {
            for g in groups {
                let w = if g.dims.is_empty() {
                    T::one()
                } else {
                    let (w, hit) = ratio_from_logs(nu.marginal_log_pdf(g.dims, c), g.log_prev);
                    clamped += hit as usize;
                    w
                };
                total = total + w * g.discounted;
            }
        }
        (total / T::lit(self.len() as f64), clamped)
    }

    /// Estimated return minus `alpha * KL(nu || target)`.
    pub fn objective(&self, nu: &GaussianContextDistribution<T>, target: &GaussianContextDistribution<T>, alpha: T) -> T {
        let (value, _) = self.estimate(nu);
        if alpha == T::zero() {
            value
        } else {
            value - alpha * gaussian_kl(nu, target)
        }
    }
}

/// One-shot objective: builds the weighted batch and evaluates it at `nu`.
#[allow(clippy::too_many_arguments)]
pub fn objective<T: Real>(
    nu: &GaussianContextDistribution<T>,
    batch: &[ProductTrajectory<T>],
    nu_prev: &GaussianContextDistribution<T>,
    target: &GaussianContextDistribution<T>,
    alpha: T,
    gamma: T,
    mode: Mode,
    f: Option<&RMContextMapping>,
) -> Result<T, CurriculumError> {
    Ok(WeightedBatch::new(batch, gamma, nu_prev, mode, f)?.objective(nu, target, alpha))
}
