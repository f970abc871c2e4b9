use rand::Rng;
use rand_distr::StandardNormal;

use super::CurriculumError;
use crate::mapping::DimSet;
use crate::scalar::Real;

/// Diagonal-covariance Gaussian over contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianContextDistribution<T> {
    mean: Vec<T>,
    variances: Vec<T>,
}

impl<T: Real> GaussianContextDistribution<T> {
    pub fn new(mean: Vec<T>, variances: Vec<T>) -> Result<Self, CurriculumError> {
        if mean.is_empty() || mean.len() != variances.len() {
            return Err(CurriculumError::Shape {
                mean: mean.len(),
                variances: variances.len(),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) || variances.iter().any(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(CurriculumError::InvalidParameters);
        }
        Ok(GaussianContextDistribution { mean, variances })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    pub fn log_pdf(&self, c: &[T]) -> T {
        self.marginal_log_pdf(DimSet::full(self.dims()), c)
    }

    pub fn pdf(&self, c: &[T]) -> T {
        self.log_pdf(c).exp()
    }

    /// Log density of the marginal over `dims`, evaluated at the matching coordinates of `c`.
    pub fn marginal_log_pdf(&self, dims: DimSet, c: &[T]) -> T {
        let half_log_two_pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        dims.iter()
            .map(|d| {
                let z = c[d] - self.mean[d];
                -half_log_two_pi - T::lit(0.5) * self.variances[d].ln() - z * z / (T::lit(2.0) * self.variances[d])
            })
            .sum()
    }

    /// Coordinate projection onto `dims` (exact for diagonal covariance).
    pub fn marginal(&self, dims: DimSet) -> Result<Self, CurriculumError> {
        if dims.is_empty() {
            return Err(CurriculumError::EmptyMarginal);
        }
        if let Some(d) = dims.iter().find(|&d| d >= self.dims()) {
            return Err(CurriculumError::DimOutOfRange {
                dim: d + 1,
                dims: self.dims(),
            });
        }
        Ok(GaussianContextDistribution {
            mean: dims.iter().map(|d| self.mean[d]).collect(),
            variances: dims.iter().map(|d| self.variances[d]).collect(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.mean
            .iter()
            .zip(&self.variances)
            .map(|(&m, &v)| {
                let z: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * T::lit(z)
            })
            .collect()
    }
}

/// `KL(p || q)` for diagonal Gaussians.
pub fn gaussian_kl<T: Real>(p: &GaussianContextDistribution<T>, q: &GaussianContextDistribution<T>) -> T {
    let half = T::lit(0.5);
    p.mean
        .iter()
        .zip(&p.variances)
        .zip(q.mean.iter().zip(&q.variances))
        .map(|((&mp, &vp), (&mq, &vq))| {
            let dm = mp - mq;
            half * (vq / vp).ln() + (vp + dm * dm) / (T::lit(2.0) * vq) - half
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn g(mean: &[f64], var: &[f64]) -> GaussianContextDistribution<f64> {
        GaussianContextDistribution::new(mean.to_vec(), var.to_vec()).unwrap()
    }

    #[test]
    fn standard_normal_density() {
        assert_abs_diff_eq!(g(&[0.0], &[1.0]).pdf(&[0.0]), 0.398_942_280_4, epsilon = 1e-9);
        assert_abs_diff_eq!(g(&[0.0, 0.0], &[1.0, 1.0]).pdf(&[0.0, 0.0]), 0.159_154_943_1, epsilon = 1e-9);
    }

    #[test]
    fn kl_examples() {
        let p = g(&[0.0], &[1.0]);
        assert_eq!(gaussian_kl(&p, &p), 0.0);
        assert_abs_diff_eq!(gaussian_kl(&p, &g(&[1.0], &[1.0])), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn marginal_projects() {
        let d = g(&[2.0, 2.0], &[1.0, 1.0]);
        assert_eq!(d.marginal(DimSet::from_one_based(&[1])).unwrap(), g(&[2.0], &[1.0]));
        assert_eq!(d.marginal(DimSet::full(2)).unwrap(), d);
        assert_eq!(d.marginal(DimSet::EMPTY), Err(CurriculumError::EmptyMarginal));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GaussianContextDistribution::new(vec![0.0], vec![0.0]).is_err());
        assert!(GaussianContextDistribution::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(GaussianContextDistribution::<f32>::new(vec![f32::NAN], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn density_is_symmetric(m in -5.0..5.0f64, v in 0.01..9.0f64, x in 0.0..4.0f64) {
            let d = g(&[m], &[v]);
            prop_assert!((d.pdf(&[m + x]) - d.pdf(&[m - x])).abs() < 1e-15);
        }

        #[test]
        fn kl_nonnegative(a in prop::collection::vec((-4.0..4.0f64, 0.01..4.0f64), 1..4),
                          shift in -2.0..2.0f64, scale in 0.2..3.0f64) {
            let p = g(&a.iter().map(|x| x.0).collect::<Vec<_>>(), &a.iter().map(|x| x.1).collect::<Vec<_>>());
            let q = g(&a.iter().map(|x| x.0 + shift).collect::<Vec<_>>(), &a.iter().map(|x| x.1 * scale).collect::<Vec<_>>());
            prop_assert!(gaussian_kl(&p, &q) >= -1e-12);
        }
    }
}
