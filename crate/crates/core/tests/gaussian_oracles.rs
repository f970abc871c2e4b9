mod common;

use approx::assert_relative_eq;
use common::{kl_quadrature_2d, marginal_quadrature_2d};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmsprl_core::curriculum::{gaussian_kl, GaussianContextDistribution};
use rmsprl_core::DimSet;

type G = GaussianContextDistribution<f64>;

fn random_gaussian(rng: &mut impl Rng) -> G {
    let mean = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
    let var = (0..2).map(|_| rng.random_range(0.05..3.0)).collect();
    G::new(mean, var).unwrap()
}

#[test]
fn kl_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (p, q) = (random_gaussian(&mut rng), random_gaussian(&mut rng));
        let oracle = kl_quadrature_2d(&p, &q);
        assert!(
            (gaussian_kl(&p, &q) - oracle).abs() < 1e-6,
            "{p:?} {q:?}: {} vs {oracle}",
            gaussian_kl(&p, &q)
        );
    }
}

#[test]
fn marginal_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let p = random_gaussian(&mut rng);
        for keep in 0..2 {
            let x = p.mean()[keep] + rng.random_range(-2.0..2.0) * p.variances()[keep].sqrt();
            let mut c = [0.0; 2];
            c[keep] = x;
            let got = p.marginal_log_pdf(DimSet::from_one_based(&[keep + 1]), &c).exp();
            let projected = p.marginal(DimSet::from_one_based(&[keep + 1])).unwrap().pdf(&[x]);
            let oracle = marginal_quadrature_2d(&p, keep, x);
            assert!((got - oracle).abs() < 1e-4);
            assert_relative_eq!(got, projected, max_relative = 1e-12);
        }
    }
}

#[test]
fn empty_marginal_is_rejected() {
    let p = G::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    assert!(p.marginal(DimSet::EMPTY).is_err());
    assert_eq!(p.marginal_log_pdf(DimSet::EMPTY, &[5.0, 5.0]), 0.0);
}

#[test]
fn single_precision_agrees_with_double() {
    let p64 = G::new(vec![0.3, -1.2], vec![0.5, 2.0]).unwrap();
    let q64 = G::new(vec![1.0, 0.0], vec![1.5, 0.25]).unwrap();
    let p32 = GaussianContextDistribution::<f32>::new(vec![0.3, -1.2], vec![0.5, 2.0]).unwrap();
    let q32 = GaussianContextDistribution::<f32>::new(vec![1.0, 0.0], vec![1.5, 0.25]).unwrap();
    assert_relative_eq!(gaussian_kl(&p32, &q32) as f64, gaussian_kl(&p64, &q64), max_relative = 1e-5);
}

fn gaussian(dims: usize) -> impl Strategy<Value = G> {
    (
        proptest::collection::vec(-10.0f64..10.0, dims),
        proptest::collection::vec(0.01f64..25.0, dims),
    )
        .prop_map(|(m, v)| G::new(m, v).unwrap())
}

proptest! {
    #[test]
    fn kl_is_non_negative_and_zero_on_itself((p, q) in (1usize..=4).prop_flat_map(|d| (gaussian(d), gaussian(d)))) {
        prop_assert!(gaussian_kl(&p, &q) >= -1e-12);
        prop_assert!(gaussian_kl(&p, &p).abs() < 1e-12);
    }

    #[test]
    fn kl_adds_over_dimensions((p, q) in (gaussian(3), gaussian(3))) {
        let total: f64 = (1..=3)
            .map(|d| {
                let s = DimSet::from_one_based(&[d]);
                gaussian_kl(&p.marginal(s).unwrap(), &q.marginal(s).unwrap())
            })
            .sum();
        prop_assert!((total - gaussian_kl(&p, &q)).abs() <= 1e-9 * total.abs().max(1.0));
    }

    #[test]
    fn marginal_log_densities_add_over_disjoint_sets(p in gaussian(3), c in proptest::collection::vec(-10.0f64..10.0, 3)) {
        let a = DimSet::from_one_based(&[1, 3]);
        let b = DimSet::from_one_based(&[2]);
        let sum = p.marginal_log_pdf(a, &c) + p.marginal_log_pdf(b, &c);
        prop_assert!((sum - p.log_pdf(&c)).abs() <= 1e-9 * sum.abs().max(1.0));
    }
}
