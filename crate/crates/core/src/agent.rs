//! Tabular Q-learning over product states with quantized contexts.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmdp::{discounted_return, BoxContextSpace, Context, LabeledCmdp, Policy, Product, ProductState, ProductTrajectory};
use crate::curriculum::GaussianContextDistribution;
use crate::envs::Environment;
use crate::rm::RmState;
use crate::rng::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Learning rate.
    pub eta: f64,
    /// Exploration rate at the first iteration, decayed linearly to `explore_end`.
    pub explore_start: f64,
    pub explore_end: f64,
    /// Initial action value for unseen entries.
    pub q_init: f64,
    /// Replay each step against every reward-machine state (product methods only).
    pub counterfactual: bool,
    /// Bins per dimension for environments without their own context cells.
    pub bins: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            eta: 0.1,
            explore_start: 0.1,
            explore_end: 0.01,
            q_init: 0.0,
            counterfactual: true,
            bins: 8,
        }
    }
}

impl AgentConfig {
    /// Exploration rate for iteration `k` of `total` (both 1-based).
    pub fn exploration_at(&self, k: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.explore_start;
        }
        let frac = (k.saturating_sub(1)) as f64 / (total - 1) as f64;
        self.explore_start + (self.explore_end - self.explore_start) * frac.min(1.0)
    }
}

/// Maps contexts to discrete cells.
#[derive(Debug, Clone)]
pub enum ContextQuantizer {
    /// Whatever the environment reports through [`LabeledCmdp::context_cell`].
    Env(Arc<Environment<f64>>),
    /// `bins` equal-width bins per dimension over the box.
    Uniform { space: BoxContextSpace<f64>, bins: usize },
}

impl ContextQuantizer {
    /// The environment's own cells when it has them, uniform bins otherwise.
    pub fn for_env(env: &Environment<f64>, bins: usize) -> Self {
        let cmdp = env.as_cmdp();
        let probe = Context::new(cmdp.context_space().lo().to_vec());
        match cmdp.context_cell(&probe) {
            Some(_) => ContextQuantizer::Env(Arc::new(env.clone())),
            None => ContextQuantizer::Uniform {
                space: cmdp.context_space().clone(),
                bins,
            },
        }
    }

    pub fn cell(&self, c: &Context<f64>) -> Vec<usize> {
        match self {
            ContextQuantizer::Env(env) => env
                .as_cmdp()
                .context_cell(c)
                .expect("environment reported context cells at construction"),
            ContextQuantizer::Uniform { space, bins } => c
                .values()
                .iter()
                .zip(space.lo().iter().zip(space.hi()))
                .map(|(&x, (&lo, &hi))| {
                    let b = ((x - lo) / (hi - lo) * *bins as f64).floor();
                    (b.max(0.0) as usize).min(bins - 1)
                })
                .collect(),
        }
    }

    fn key(&self, c: &Context<f64>) -> u64 {
        self.cell(c)
            .iter()
            .fold(0u64, |acc, &v| acc.wrapping_mul(1 << 16).wrapping_add(v as u64))
    }
}

/// `(context cell, env state, rm state)`; the rm state is 0 for flat agents.
type Key = (u64, usize, usize);

/// Action values keyed by context cell, environment state and reward-machine state.
#[derive(Debug, Clone)]
pub struct TabularPolicy {
    table: HashMap<Key, Vec<f64>>,
    num_actions: usize,
    quantizer: ContextQuantizer,
    /// Whether the reward-machine state is part of the key.
    product: bool,
    explore: f64,
    eta: f64,
    gamma: f64,
    q_init: f64,
}

impl TabularPolicy {
    pub fn new(num_actions: usize, quantizer: ContextQuantizer, product: bool, gamma: f64, config: &AgentConfig) -> Self {
        TabularPolicy {
            table: HashMap::new(),
            num_actions,
            quantizer,
            product,
            explore: config.explore_start,
            eta: config.eta,
            gamma,
            q_init: config.q_init,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn is_product(&self) -> bool {
        self.product
    }

    pub fn exploration(&self) -> f64 {
        self.explore
    }

    pub fn set_exploration(&mut self, rate: f64) {
        self.explore = rate.clamp(0.0, 1.0);
    }

    /// Number of `(cell, s, q, a)` entries written so far.
    pub fn num_entries(&self) -> usize {
        self.table.len() * self.num_actions
    }

    fn key(&self, cell: u64, s: usize, q: RmState) -> Key {
        (cell, s, if self.product { q.index() } else { 0 })
    }

    pub fn q_value(&self, c: &Context<f64>, state: ProductState, a: usize) -> f64 {
        self.values(self.key(self.quantizer.key(c), state.env_state, state.rm_state))
            .map_or(self.q_init, |v| v[a])
    }

    /// Sets one entry directly.
    pub fn set_q_value(&mut self, c: &Context<f64>, state: ProductState, a: usize, value: f64) {
        let key = self.key(self.quantizer.key(c), state.env_state, state.rm_state);
        self.entry(key)[a] = value;
    }

    fn values(&self, key: Key) -> Option<&Vec<f64>> {
        self.table.get(&key)
    }

    fn entry(&mut self, key: Key) -> &mut Vec<f64> {
        let (n, init) = (self.num_actions, self.q_init);
        self.table.entry(key).or_insert_with(|| vec![init; n])
    }

    fn max_q(&self, key: Key) -> f64 {
        self.values(key)
            .map_or(self.q_init, |v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Greedy action (lowest index on ties) or epsilon-greedy with random tie-breaks.
    pub fn act(&self, state: ProductState, c: &Context<f64>, greedy: bool, rng: &mut dyn RngCore) -> usize {
        let key = self.key(self.quantizer.key(c), state.env_state, state.rm_state);
        let Some(values) = self.values(key) else {
            return if greedy { 0 } else { rng.random_range(0..self.num_actions) };
        };
        if greedy {
            let mut best = 0;
            for a in 1..self.num_actions {
                if values[a] > values[best] {
                    best = a;
                }
            }
            return best;
        }
        if rng.random::<f64>() < self.explore {
            return rng.random_range(0..self.num_actions);
        }
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..self.num_actions).filter(|&a| values[a] == top).collect();
        ties[rng.random_range(0..ties.len())]
    }

    /// Behaviour policy view.
    pub fn explorer(&self) -> Explore<'_> {
        Explore(self)
    }

    /// Evaluation policy view.
    pub fn greedy(&self) -> Greedy<'_> {
        Greedy(self)
    }

    fn td_update(&mut self, key: Key, a: usize, reward: f64, bootstrap: f64) {
        let (eta, gamma) = (self.eta, self.gamma);
        let q = &mut self.entry(key)[a];
        *q += eta * (reward + gamma * bootstrap - *q);
    }

    /// One-step Q-learning over the batch; steps are replayed last to first.
    ///
    /// With `counterfactual`, each step is replayed from every reward-machine state
    /// on its label. Flat policies ignore the flag.
    pub fn update<E: LabeledCmdp<f64> + ?Sized>(
        &mut self,
        batch: &[ProductTrajectory<f64>],
        product: &Product<'_, f64, E>,
        counterfactual: bool,
    ) {
        let rm = product.rm();
        for traj in batch {
            let cell = self.quantizer.key(&traj.context);
            for step in traj.steps.iter().rev() {
                let (s, s2) = (step.state.env_state, step.next.env_state);
                if counterfactual && self.product {
                    for q in 0..rm.num_states() {
                        let q = RmState(q);
                        let (q2, r) = rm.step(q, step.label);
                        let boot = if product.is_terminal(q2) {
                            0.0
                        } else {
                            self.max_q(self.key(cell, s2, q2))
                        };
                        self.td_update(self.key(cell, s, q), step.action, r, boot);
                    }
                } else {
                    let q2 = step.next.rm_state;
                    let boot = if product.is_terminal(q2) {
                        0.0
                    } else {
                        self.max_q(self.key(cell, s2, q2))
                    };
                    self.td_update(self.key(cell, s, step.state.rm_state), step.action, step.reward, boot);
                }
            }
        }
    }
}

pub struct Explore<'a>(&'a TabularPolicy);

impl Policy<f64> for Explore<'_> {
    fn act(&self, state: ProductState, context: &Context<f64>, rng: &mut dyn RngCore) -> usize {
        self.0.act(state, context, false, rng)
    }
}

pub struct Greedy<'a>(&'a TabularPolicy);

impl Policy<f64> for Greedy<'_> {
    fn act(&self, state: ProductState, context: &Context<f64>, rng: &mut dyn RngCore) -> usize {
        self.0.act(state, context, true, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean_return: f64,
    /// Fraction of rollouts ending in an accepting reward-machine state.
    pub success_ratio: f64,
}

/// Greedy rollouts on `n_eval` contexts drawn from `target` (clamped into the box).
pub fn evaluate<P, E>(
    policy: &P,
    product: &Product<'_, f64, E>,
    target: &GaussianContextDistribution<f64>,
    n_eval: usize,
    gamma: f64,
    seed: u64,
) -> Evaluation
where
    P: Policy<f64> + Sync + ?Sized,
    E: LabeledCmdp<f64> + ?Sized,
{
    if n_eval == 0 {
        return Evaluation {
            mean_return: 0.0,
            success_ratio: 0.0,
        };
    }
    let env = product.env();
    let results: Vec<(f64, bool)> = (0..n_eval)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, &[i as u64]);
            let c = env.context_space().clamp(&target.sample(&mut rng));
            let traj = product.rollout(&c, policy, env.horizon(), &mut rng);
            let success = traj.final_rm_state().is_some_and(|q| product.rm().is_accepting(q));
            (discounted_return(&traj, gamma), success)
        })
        .collect();
    let n = n_eval as f64;
    Evaluation {
        mean_return: results.iter().map(|r| r.0).sum::<f64>() / n,
        success_ratio: results.iter().filter(|r| r.1).count() as f64 / n,
    }
}
