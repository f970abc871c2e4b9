use super::{gaussian_kl, CurriculumConfig, CurriculumError, GaussianContextDistribution, WeightedBatch};
use crate::cmdp::BoxContextSpace;
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 200;
const MAX_BACKTRACKS: usize = 30;
const MAX_PENALTY_DOUBLINGS: usize = 40;
const BISECTION_STEPS: usize = 60;
/// Slack granted to the trust region (half of the published tolerance).
const KL_SLACK: f64 = 5e-5;
const NON_DEGRADATION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// No update was attempted (non-curriculum methods).
    Skipped,
    Converged,
    /// The iteration cap was reached; the last feasible iterate is used.
    MaxIterations,
    /// Pulled back along the segment to `nu_prev` to restore feasibility.
    Bisected,
    /// The candidate lowered the objective; `nu_prev` is kept.
    Fallback,
    /// Close enough to the target to jump onto it.
    Snapped,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Skipped => "skipped",
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIterations => "max_iterations",
            SolverStatus::Bisected => "bisected",
            SolverStatus::Fallback => "fallback",
            SolverStatus::Snapped => "snapped",
        }
    }

    /// A warning worth surfacing in logs. Hitting the iteration cap is not one: the
    /// iterate is feasible and no worse than `nu_prev`.
    pub fn is_warning(self) -> bool {
        matches!(self, SolverStatus::Bisected | SolverStatus::Fallback)
    }
}

impl std::str::FromStr for SolverStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SolverStatus::Skipped,
            SolverStatus::Converged,
            SolverStatus::MaxIterations,
            SolverStatus::Bisected,
            SolverStatus::Fallback,
            SolverStatus::Snapped,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
        .ok_or_else(|| format!("unknown solver status `{s}`"))
    }
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Update<T> {
    pub next: GaussianContextDistribution<T>,
    pub status: SolverStatus,
    /// `KL(next || prev)`.
    pub kl_step: T,
    pub objective_prev: T,
    pub objective_next: T,
    /// Importance weights that hit the clamp when evaluating `next`.
    pub clamped_weights: usize,
}

/// Unconstrained parameters `(mu, ln sigma)` mapped back onto the feasible box.
struct Params<'a, T> {
    bounds: &'a BoxContextSpace<T>,
    sigma_lb: T,
}

impl<T: Real> Params<'_, T> {
    fn encode(&self, nu: &GaussianContextDistribution<T>) -> Vec<T> {
        let half = T::lit(0.5);
        nu.mean()
            .iter()
            .copied()
            .chain(nu.variances().iter().map(|v| half * v.ln()))
            .collect()
    }

    fn project(&self, theta: &mut [T]) {
        let g = theta.len() / 2;
        let ln_lb = self.sigma_lb.ln();
        for d in 0..g {
            theta[d] = theta[d].max(self.bounds.lo()[d]).min(self.bounds.hi()[d]);
            theta[g + d] = theta[g + d].max(ln_lb);
        }
    }

    /// `None` when the parameters overflow.
    fn decode(&self, theta: &[T]) -> Option<GaussianContextDistribution<T>> {
        let g = theta.len() / 2;
        let floor = self.sigma_lb * self.sigma_lb;
        let variances = theta[g..].iter().map(|&l| (l + l).exp().max(floor)).collect();
        GaussianContextDistribution::new(theta[..g].to_vec(), variances).ok()
    }
}

/// Finite-difference step: `1e-5`, widened for low-precision scalars.
fn fd_step<T: Real>() -> T {
    T::lit(1e-5).max(T::epsilon().cbrt())
}

/// Central finite-difference gradient of `f` at `theta`.
pub fn finite_difference_gradient<T: Real>(theta: &[T], f: impl Fn(&[T]) -> T) -> Vec<T> {
    let h = fd_step::<T>();
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            probe[j] = theta[j] + h;
            let up = f(&probe);
            probe[j] = theta[j] - h;
            let down = f(&probe);
            probe[j] = theta[j];
            (up - down) / (h + h)
        })
        .collect()
}

/// Trust-region update of the context distribution.
///
/// Maximizes the batch objective subject to `KL(nu || nu_prev) <= epsilon`,
/// the variance floor and mean bounds, by penalized gradient ascent.
pub fn update_distribution<T: Real>(
    nu_prev: &GaussianContextDistribution<T>,
    batch: &WeightedBatch<T>,
    target: &GaussianContextDistribution<T>,
    alpha: T,
    config: &CurriculumConfig<T>,
    bounds: &BoxContextSpace<T>,
) -> Result<Update<T>, CurriculumError> {
    if batch.is_empty() {
        return Err(CurriculumError::EmptyBatch);
    }
    if nu_prev.dims() != bounds.dims() || target.dims() != bounds.dims() {
        return Err(CurriculumError::DimensionMismatch {
            expected: bounds.dims(),
            found: nu_prev.dims(),
        });
    }
    let params = Params {
        bounds,
        sigma_lb: config.sigma_lb,
    };
    let eps = config.epsilon;
    let slack = T::lit(KL_SLACK);
    let objective = |nu: &GaussianContextDistribution<T>| batch.objective(nu, target, alpha);
    let excess = |nu: &GaussianContextDistribution<T>| (gaussian_kl(nu, nu_prev) - eps).max(T::zero());
    let objective_prev = objective(nu_prev);
    if gaussian_kl(nu_prev, target) < config.kl_lb && gaussian_kl(target, nu_prev) <= eps {
        return Ok(finish(
            target.clone(),
            SolverStatus::Snapped,
            nu_prev,
            batch,
            target,
            alpha,
            objective_prev,
            config,
        ));
    }

    let mut theta = params.encode(nu_prev);
    let mut moved = false;
    let mut hit_cap = false;
    let mut lambda = T::one();
    for _ in 0..MAX_PENALTY_DOUBLINGS {
        let penalized = |th: &[T]| match params.decode(th) {
            Some(nu) => {
                let e = excess(&nu);
                objective(&nu) - lambda * e * e
            }
            None => T::neg_infinity(),
        };
        let mut value = penalized(&theta);
        let mut step = T::one();
        let mut converged = false;
        for _ in 0..MAX_ITERATIONS {
            let grad = finite_difference_gradient(&theta, penalized);
            let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
            if norm == T::zero() || !norm.is_finite() {
                converged = true;
                break;
            }
            let mut accepted = None;
            let mut t = step;
            for _ in 0..MAX_BACKTRACKS {
                let mut cand: Vec<T> = theta.iter().zip(&grad).map(|(&x, &g)| x + t * g / norm).collect();
                params.project(&mut cand);
                let v = penalized(&cand);
                if v > value {
                    accepted = Some((cand, v));
                    break;
                }
                t = t * T::lit(0.5);
            }
            match accepted {
                Some((cand, v)) => {
                    let gain = v - value;
                    theta = cand;
                    value = v;
                    moved = true;
                    step = (t + t).min(T::lit(4.0));
                    if gain <= T::lit(1e-12) * (T::one() + value.abs()) {
                        converged = true;
                        break;
                    }
                }
                None => {
                    converged = true;
                    break;
                }
            }
        }
        hit_cap = !converged;
        if params.decode(&theta).is_some_and(|nu| excess(&nu) <= slack) {
            break;
        }
        lambda = lambda + lambda;
    }

    if !moved {
        return Ok(finish(
            nu_prev.clone(),
            SolverStatus::Converged,
            nu_prev,
            batch,
            target,
            alpha,
            objective_prev,
            config,
        ));
    }

    let mut status = if hit_cap {
        SolverStatus::MaxIterations
    } else {
        SolverStatus::Converged
    };
    let mut candidate = params.decode(&theta).expect("accepted iterates are finite");
    if excess(&candidate) > slack {
        // Largest feasible fraction of the step from nu_prev, by bisection.
        let start = params.encode(nu_prev);
        let at = |s: T| {
            let mut th: Vec<T> = start.iter().zip(&theta).map(|(&a, &b)| a + s * (b - a)).collect();
            params.project(&mut th);
            params.decode(&th).expect("between two finite iterates")
        };
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..BISECTION_STEPS {
            let mid = (lo + hi) * T::lit(0.5);
            if excess(&at(mid)) <= slack {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        candidate = if lo == T::zero() { nu_prev.clone() } else { at(lo) };
        status = SolverStatus::Bisected;
        log::warn!("trust region restored by bisection");
    }

    if objective(&candidate) < objective_prev - T::lit(NON_DEGRADATION) {
        log::warn!("distribution update lowered the objective; keeping the previous distribution");
        return Ok(finish(
            nu_prev.clone(),
            SolverStatus::Fallback,
            nu_prev,
            batch,
            target,
            alpha,
            objective_prev,
            config,
        ));
    }
    Ok(finish(candidate, status, nu_prev, batch, target, alpha, objective_prev, config))
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    mut next: GaussianContextDistribution<T>,
    mut status: SolverStatus,
    nu_prev: &GaussianContextDistribution<T>,
    batch: &WeightedBatch<T>,
    target: &GaussianContextDistribution<T>,
    alpha: T,
    objective_prev: T,
    config: &CurriculumConfig<T>,
) -> Update<T> {
    // Snapping must not break the trust region.
    if gaussian_kl(&next, target) < config.kl_lb && gaussian_kl(target, nu_prev) <= config.epsilon {
        next = target.clone();
        status = SolverStatus::Snapped;
    }
    let (estimate, clamped_weights) = batch.estimate(&next);
    if clamped_weights > 0 {
        log::warn!("{clamped_weights} importance weights clamped");
    }
    let objective_next = if alpha == T::zero() {
        estimate
    } else {
        estimate - alpha * gaussian_kl(&next, target)
    };
    Update {
        kl_step: gaussian_kl(&next, nu_prev),
        next,
        status,
        objective_prev,
        objective_next,
        clamped_weights,
    }
}
