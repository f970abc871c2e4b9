mod common;

use common::Fixture;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmsprl_core::{rm_run, Context, EnvKind, LabeledCmdp, UniformPolicy};

fn random_context(env: &dyn LabeledCmdp<f64>, rng: &mut impl Rng) -> Context<f64> {
    let space = env.context_space();
    Context::new((0..space.dims()).map(|d| rng.random_range(space.lo()[d]..=space.hi()[d])).collect())
}

#[test]
fn uniform_rollouts_replay_through_the_machine() {
    for kind in EnvKind::ALL {
        let fx = Fixture::new(kind);
        let product = fx.product();
        let env = fx.env.as_cmdp();
        let policy = UniformPolicy {
            num_actions: env.num_actions(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let c = random_context(env, &mut rng);
            let traj = product.rollout(&c, &policy, env.horizon(), &mut rng);
            assert_eq!(traj.rewards(), rm_run(&fx.rm, &traj.labels()), "{kind}");
            let mut q = fx.rm.initial();
            for step in &traj.steps {
                assert_eq!(step.state.rm_state, q);
                let label = product.transition_label(&c, step.state.env_state, step.action, step.next.env_state);
                assert_eq!(step.label, label);
                q = fx.rm.next_state(q, label);
                assert_eq!(step.next.rm_state, q);
            }
            assert!(traj.len() <= env.horizon());
            assert_eq!(traj.terminal, product.is_terminal(q));
        }
    }
}

proptest! {
    // Any action sequence at all, not only what a uniform policy tends to produce.
    #[test]
    fn scripted_two_door_runs_agree(actions in proptest::collection::vec(0usize..4, 0..60), c1 in -4.0f64..4.0, c2 in -4.0f64..4.0) {
        let fx = Fixture::new(EnvKind::TwoDoor8);
        let product = fx.product();
        let c = Context::new(vec![c1, c2]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut state = product.initial(&c, &mut rng);
        let mut steps = Vec::new();
        for &a in &actions {
            let step = product.step(&c, state, a, &mut rng);
            state = step.next;
            steps.push(step);
        }
        let labels: Vec<_> = steps.iter().map(|s| s.label).collect();
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        prop_assert_eq!(rewards, rm_run(&fx.rm, &labels));
    }
}
