use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use super::*;
use crate::cmdp::{BoxContextSpace, Context, ProductState, ProductStep};
use crate::mapping::{DimSet, RMContextMapping};
use crate::rm::{parse_rm, Label, RewardMachine, RmState};
use crate::rng::StreamRng;

fn g(mean: &[f64], var: &[f64]) -> GaussianContextDistribution<f64> {
    GaussianContextDistribution::new(mean.to_vec(), var.to_vec()).unwrap()
}

fn space() -> BoxContextSpace<f64> {
    BoxContextSpace::new(vec![-4.0, -4.0], vec![4.0, 4.0]).unwrap()
}

/// Trajectory through RM states `qs` (length = steps + 1) with the given rewards.
fn traj(c: &[f64], qs: &[usize], rewards: &[f64]) -> ProductTrajectory<f64> {
    let steps = rewards
        .iter()
        .enumerate()
        .map(|(t, &reward)| ProductStep {
            state: ProductState {
                env_state: 0,
                rm_state: RmState(qs[t]),
            },
            action: 0,
            reward,
            next: ProductState {
                env_state: 0,
                rm_state: RmState(qs[t + 1]),
            },
            label: Label::EMPTY,
        })
        .collect();
    ProductTrajectory {
        context: Context::new(c.to_vec()),
        steps,
        terminal: false,
    }
}

fn three_state_rm() -> RewardMachine<f64> {
    parse_rm(
        "alphabet: a, b\nstate q0 initial\nstate q1\nstate q2 accepting\n\
         edge q0 -> q1 on a reward 1\nedge q0 -> q0 on !a reward 0\n\
         edge q1 -> q2 on b reward 2\nedge q1 -> q1 on !b reward 0\nedge q2 -> q2 on true reward 0\n",
    )
    .unwrap()
}

fn mapping(rm: &RewardMachine<f64>) -> RMContextMapping {
    RMContextMapping::from_named(
        rm,
        2,
        &[
            ("q0", "q0", &[1]),
            ("q0", "q1", &[1]),
            ("q1", "q1", &[2]),
            ("q1", "q2", &[2]),
            ("q2", "q2", &[]),
        ],
    )
    .unwrap()
}

fn random_batch(rng: &mut StreamRng, n: usize) -> Vec<ProductTrajectory<f64>> {
    (0..n)
        .map(|_| {
            let c = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let len = rng.random_range(0..12);
            let mut qs = vec![0usize];
            for _ in 0..len {
                let q = *qs.last().unwrap();
                qs.push((q + rng.random_range(0..2)).min(2));
            }
            let rewards: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..4.0)).collect();
            traj(&c, &qs, &rewards)
        })
        .collect()
}

#[test]
fn alpha_examples() {
    let cfg = CurriculumConfig::<f64> {
        k_alpha: 5,
        ..Default::default()
    };
    let target = g(&[0.0], &[1.0]);
    let prev = g(&[1.0], &[1.0]); // KL = 0.5
    assert_eq!(alpha_schedule(5, &cfg, &prev, &target, 2.0), 0.0);
    assert_eq!(alpha_schedule(6, &cfg, &prev, &target, -3.0), 0.0);
    assert_abs_diff_eq!(alpha_schedule(6, &cfg, &prev, &target, 2.0), 4.0, epsilon = 1e-12);
    assert_eq!(alpha_schedule(6, &cfg, &target, &target, 2.0), A_MAX);
}

#[test]
fn alpha_return_starts_discounting_at_one() {
    let batch = [traj(&[0.0, 0.0], &[0, 0, 0], &[0.0, 2.0])];
    assert_abs_diff_eq!(alpha_return(&batch, 0.5), 0.5, epsilon = 1e-15);
}

#[test]
fn step_weights_examples() {
    let rm = three_state_rm();
    let f = mapping(&rm);
    let t = traj(&[0.5, -1.0], &[0, 0, 1, 1, 2, 2], &[0.0, 1.0, 0.0, 2.0, 0.0]);
    let nu_prev = g(&[0.0, 0.0], &[1.0, 1.0]);
    let nu = g(&[1.0, -0.5], &[0.5, 2.0]);

    assert!(step_weights(&t, &nu_prev, &nu_prev, &f).iter().all(|&w| w == 1.0));

    let empty = RMContextMapping::constant(&rm, 2, DimSet::EMPTY);
    assert!(step_weights(&t, &nu, &nu_prev, &empty).iter().all(|&w| w == 1.0));

    let full = RMContextMapping::constant(&rm, 2, DimSet::full(2));
    let joint = nu.pdf(&[0.5, -1.0]) / nu_prev.pdf(&[0.5, -1.0]);
    for w in step_weights(&t, &nu, &nu_prev, &full) {
        assert_abs_diff_eq!(w, joint, epsilon = 1e-12);
    }

    let w = step_weights(&t, &nu, &nu_prev, &f);
    let m1 = |d: &GaussianContextDistribution<f64>| d.marginal(DimSet::from_one_based(&[1])).unwrap().pdf(&[0.5]);
    let m2 = |d: &GaussianContextDistribution<f64>| d.marginal(DimSet::from_one_based(&[2])).unwrap().pdf(&[-1.0]);
    assert_abs_diff_eq!(w[0], m1(&nu) / m1(&nu_prev), epsilon = 1e-12);
    assert_abs_diff_eq!(w[2], m2(&nu) / m2(&nu_prev), epsilon = 1e-12);
    assert_eq!(w[4], 1.0);
}

#[test]
fn weights_clamp_far_from_previous() {
    let nu_prev = g(&[-4.0], &[0.01]);
    let nu = g(&[4.0], &[0.01]);
    let (w, hit) = marginal_ratio(DimSet::full(1), &[4.0], &nu, &nu_prev);
    assert!(hit);
    assert_eq!(w, W_MAX);
}

#[test]
fn objective_examples() {
    let target = g(&[2.0, 2.0], &[1.0, 1.0]);
    let nu_prev = g(&[0.0, 0.0], &[1.0, 1.0]);
    let batch = vec![
        traj(&[0.1, 0.2], &[0, 0, 1], &[0.0, 1.0]),
        traj(&[-0.3, 0.4], &[0, 1, 1, 2], &[1.0, 0.0, 2.0]),
    ];
    let gamma = 0.9;
    let mean = batch.iter().map(|t| crate::cmdp::discounted_return(t, gamma)).sum::<f64>() / 2.0;
    let v = objective(&nu_prev, &batch, &nu_prev, &target, 0.0, gamma, Mode::Intermediate, None).unwrap();
    assert_abs_diff_eq!(v, mean, epsilon = 1e-12);

    // single reward at t = 0: w r - alpha KL
    let nu = g(&[0.5, 0.1], &[1.2, 0.8]);
    let single = vec![traj(&[0.3, -0.2], &[0, 1], &[3.0])];
    let w = nu.pdf(&[0.3, -0.2]) / nu_prev.pdf(&[0.3, -0.2]);
    let v = objective(&nu, &single, &nu_prev, &target, 0.7, gamma, Mode::Spdl, None).unwrap();
    assert_abs_diff_eq!(v, w * 3.0 - 0.7 * gaussian_kl(&nu, &target), epsilon = 1e-12);

    assert_eq!(
        objective(&nu, &single, &nu_prev, &target, 0.0, gamma, Mode::RmGuided, None),
        Err(CurriculumError::MissingMapping)
    );
}

#[test]
fn full_mapping_reduces_to_intermediate() {
    let rm = three_state_rm();
    let full = RMContextMapping::constant(&rm, 2, DimSet::full(2));
    let target = g(&[2.0, 2.0], &[1.0, 1.0]);
    let mut rng = StreamRng::seed_from_u64(3);
    for _ in 0..100 {
        let nu_prev = g(
            &[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
            &[rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)],
        );
        let nu = g(
            &[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
            &[rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)],
        );
        let batch = random_batch(&mut rng, 16);
        let alpha = rng.random_range(0.0..2.0);
        let a = objective(&nu, &batch, &nu_prev, &target, alpha, 0.95, Mode::Intermediate, None).unwrap();
        let b = objective(&nu, &batch, &nu_prev, &target, alpha, 0.95, Mode::RmGuided, Some(&full)).unwrap();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

// Analytic derivatives of the whole-trajectory objective in (mu, ln sigma).
fn analytic_gradient(
    nu: &GaussianContextDistribution<f64>,
    batch: &[ProductTrajectory<f64>],
    nu_prev: &GaussianContextDistribution<f64>,
    target: &GaussianContextDistribution<f64>,
    alpha: f64,
    gamma: f64,
) -> Vec<f64> {
    let dims = nu.dims();
    let mut grad = vec![0.0; 2 * dims];
    for t in batch {
        let c = t.context.values();
        let w = (nu.log_pdf(c) - nu_prev.log_pdf(c)).exp();
        let r = crate::cmdp::discounted_return(t, gamma);
        for d in 0..dims {
            let z = c[d] - nu.mean()[d];
            let v = nu.variances()[d];
            grad[d] += w * r * z / v / batch.len() as f64;
            grad[dims + d] += w * r * (z * z / v - 1.0) / batch.len() as f64;
        }
    }
    for d in 0..dims {
        let vt = target.variances()[d];
        grad[d] -= alpha * (nu.mean()[d] - target.mean()[d]) / vt;
        grad[dims + d] -= alpha * (nu.variances()[d] / vt - 1.0);
    }
    grad
}

#[test]
fn finite_differences_match_analytic_gradient() {
    let target = g(&[2.0, 2.0], &[1.0, 1.0]);
    let nu_prev = g(&[0.0, -1.0], &[1.0, 0.5]);
    let mut rng = StreamRng::seed_from_u64(11);
    let batch = random_batch(&mut rng, 24);
    let wb = WeightedBatch::new(&batch, 0.95, &nu_prev, Mode::Intermediate, None).unwrap();
    let nu = g(&[0.3, -0.8], &[0.9, 0.7]);
    let theta: Vec<f64> = [0.3, -0.8, 0.5 * 0.9f64.ln(), 0.5 * 0.7f64.ln()].to_vec();
    let f = |th: &[f64]| {
        let cand = g(&th[..2], &[(2.0 * th[2]).exp(), (2.0 * th[3]).exp()]);
        wb.objective(&cand, &target, 0.4)
    };
    let fd = finite_difference_gradient(&theta, f);
    let exact = analytic_gradient(&nu, &batch, &nu_prev, &target, 0.4, 0.95);
    for (a, b) in fd.iter().zip(&exact) {
        assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

#[test]
fn importance_estimator_is_unbiased() {
    // Return R(c) = c_1 + 2 gives J(nu) = mu_1 + 2.
    let nu_prev = g(&[0.0, 0.0], &[1.0, 1.0]);
    let nu = g(&[0.4, -0.3], &[0.8, 1.1]);
    let expected = 0.4 + 2.0;
    let mut rng = StreamRng::seed_from_u64(5);
    let n = 10_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let c = nu_prev.sample(&mut rng);
            let batch = [traj(&c, &[0, 0], &[c[0] + 2.0])];
            WeightedBatch::new(&batch, 0.95, &nu_prev, Mode::Spdl, None)
                .unwrap()
                .estimate(&nu)
                .0
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} expected {expected} se {se}");
}

#[test]
fn zero_rewards_leave_distribution_unchanged() {
    let target = g(&[2.0, 2.0], &[1.0, 1.0]);
    let nu_prev = g(&[-2.0, -2.0], &[0.5, 0.5]);
    let batch = vec![traj(&[-2.0, -1.5], &[0, 0, 0], &[0.0, 0.0]); 4];
    let wb = WeightedBatch::new(&batch, 0.95, &nu_prev, Mode::Intermediate, None).unwrap();
    let up = update_distribution(&nu_prev, &wb, &target, 0.0, &CurriculumConfig::default(), &space()).unwrap();
    assert_eq!(up.next, nu_prev);
    assert_eq!(up.kl_step, 0.0);
}

#[test]
fn snaps_when_close_to_target() {
    let target = g(&[2.0, 2.0], &[1.0, 1.0]);
    let nu_prev = g(&[1.9, 2.05], &[1.1, 0.95]);
    let batch = vec![traj(&[2.0, 2.0], &[0, 0], &[1.0])];
    let wb = WeightedBatch::new(&batch, 0.95, &nu_prev, Mode::Intermediate, None).unwrap();
    let up = update_distribution(&nu_prev, &wb, &target, 1.0, &CurriculumConfig::default(), &space()).unwrap();
    assert_eq!(up.next, target);
    assert_eq!(up.status, SolverStatus::Snapped);
}

#[test]
fn large_alpha_moves_to_trust_region_boundary() {
    let target = g(&[2.0, 2.0], &[1.0, 1.0]);
    let nu_prev = g(&[-3.0, -3.0], &[0.25, 0.25]);
    let batch = vec![traj(&[-3.0, -3.0], &[0, 0], &[1.0]); 8];
    let cfg = CurriculumConfig::default();
    let wb = WeightedBatch::new(&batch, 0.95, &nu_prev, Mode::Intermediate, None).unwrap();
    let up = update_distribution(&nu_prev, &wb, &target, A_MAX, &cfg, &space()).unwrap();
    assert!(up.kl_step <= cfg.epsilon + 1e-4, "{}", up.kl_step);
    assert!(up.kl_step >= cfg.epsilon - 1e-2, "{}", up.kl_step);
    assert!(gaussian_kl(&up.next, &target) < gaussian_kl(&nu_prev, &target));
    assert!(up.objective_next >= up.objective_prev - 1e-9);
}

#[test]
fn empty_batch_is_rejected() {
    let nu = g(&[0.0, 0.0], &[1.0, 1.0]);
    let wb = WeightedBatch::new(&[], 0.95, &nu, Mode::Intermediate, None).unwrap();
    assert!(matches!(
        update_distribution(&nu, &wb, &nu, 0.0, &CurriculumConfig::default(), &space()),
        Err(CurriculumError::EmptyBatch)
    ));
}

#[test]
fn single_precision_update_respects_trust_region() {
    let target = GaussianContextDistribution::<f32>::new(vec![2.0, 2.0], vec![1.0, 1.0]).unwrap();
    let nu_prev = GaussianContextDistribution::<f32>::new(vec![-3.0, -3.0], vec![0.25, 0.25]).unwrap();
    let bounds = BoxContextSpace::<f32>::new(vec![-4.0, -4.0], vec![4.0, 4.0]).unwrap();
    let t = ProductTrajectory {
        context: Context::new(vec![-2.5f32, -3.0]),
        steps: vec![ProductStep {
            state: ProductState {
                env_state: 0,
                rm_state: RmState(0),
            },
            action: 0,
            reward: 1.0f32,
            next: ProductState {
                env_state: 0,
                rm_state: RmState(0),
            },
            label: Label::EMPTY,
        }],
        terminal: false,
    };
    let cfg = CurriculumConfig::<f32>::default();
    let wb = WeightedBatch::new(&[t], 0.95, &nu_prev, Mode::Intermediate, None).unwrap();
    let up = update_distribution(&nu_prev, &wb, &target, 10.0, &cfg, &bounds).unwrap();
    assert!(up.kl_step <= cfg.epsilon + 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn updates_stay_feasible_and_never_degrade(
        seed in any::<u64>(),
        mu in prop::array::uniform2(-3.5..3.5f64),
        var in prop::array::uniform2(0.02..3.0f64),
        alpha in prop_oneof![Just(0.0), 0.0..5.0f64, Just(A_MAX)],
        rm_guided in any::<bool>(),
    ) {
        let rm = three_state_rm();
        let f = mapping(&rm);
        let cfg = CurriculumConfig::default();
        let target = g(&[2.0, 2.0], &[1.0, 1.0]);
        let nu_prev = g(&mu, &var);
        let mut rng = StreamRng::seed_from_u64(seed);
        let batch: Vec<_> = random_batch(&mut rng, 12)
            .into_iter()
            .map(|mut t| {
                t.context = space().clamp(&nu_prev.sample(&mut rng));
                t
            })
            .collect();
        let (mode, fm) = if rm_guided { (Mode::RmGuided, Some(&f)) } else { (Mode::Intermediate, None) };
        let wb = WeightedBatch::new(&batch, 0.95, &nu_prev, mode, fm).unwrap();
        let up = update_distribution(&nu_prev, &wb, &target, alpha, &cfg, &space()).unwrap();
        prop_assert!(up.kl_step <= cfg.epsilon + 1e-4, "kl step {}", up.kl_step);
        prop_assert!(up.next.variances().iter().all(|&v| v >= cfg.sigma_lb * cfg.sigma_lb));
        prop_assert!(up.next.mean().iter().all(|&m| (-4.0..=4.0).contains(&m)));
        if up.status != SolverStatus::Snapped {
            prop_assert!(up.objective_next >= up.objective_prev - 1e-9);
        }
    }
}
