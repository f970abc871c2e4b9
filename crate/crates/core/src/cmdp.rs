//! Labeled contextual MDPs and their synchronous product with a reward machine.

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::rm::{Label, RewardMachine, RmState};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmdpError {
    #[error("context space needs at least one dimension")]
    NoDimensions,
    #[error("dimension {dim}: lower bound {lo} is not below upper bound {hi}")]
    EmptyInterval { dim: usize, lo: f64, hi: f64 },
    #[error("bounds have different lengths ({0} vs {1})")]
    BoundsMismatch(usize, usize),
    #[error("environment proposition `{0}` is missing from the reward machine alphabet")]
    UnboundProposition(String),
    #[error("terminal state `{0}` is not a state of the reward machine")]
    UnknownTerminal(String),
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_G, hi_G]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxContextSpace<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> BoxContextSpace<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self, CmdpError> {
        if lo.len() != hi.len() {
            return Err(CmdpError::BoundsMismatch(lo.len(), hi.len()));
        }
        if lo.is_empty() {
            return Err(CmdpError::NoDimensions);
        }
        for (dim, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l < h) {
                return Err(CmdpError::EmptyInterval {
                    dim: dim + 1,
                    lo: l.as_f64(),
                    hi: h.as_f64(),
                });
            }
        }
        Ok(BoxContextSpace { lo, hi })
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn contains(&self, values: &[T]) -> bool {
        values.len() == self.dims()
            && values
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    /// Coordinate-wise projection onto the box.
    pub fn clamp(&self, values: &[T]) -> Context<T> {
        Context(
            values
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(&v, (&l, &h))| v.max(l).min(h))
                .collect(),
        )
    }
}

/// A point of the context space.
#[derive(Debug, Clone, PartialEq)]
pub struct Context<T>(pub Vec<T>);

impl<T: Real> Context<T> {
    pub fn new(values: Vec<T>) -> Self {
        Context(values)
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }
}

impl<T> std::ops::Index<usize> for Context<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// A contextual MDP with finite state and action spaces and a labeling function.
///
/// Labels are expressed over [`LabeledCmdp::propositions`]; [`Product`] rebinds
/// them onto a reward machine's alphabet by name.
pub trait LabeledCmdp<T: Real>: Send + Sync {
    fn context_space(&self) -> &BoxContextSpace<T>;
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn propositions(&self) -> &[&'static str];
    /// Support of `phi_c` with probabilities summing to one.
    fn initial_distribution(&self, c: &Context<T>) -> Vec<(usize, T)>;
    /// Support of `p_c(s, a, .)` with probabilities summing to one.
    fn transition(&self, c: &Context<T>, s: usize, a: usize) -> Vec<(usize, T)>;
    fn label(&self, c: &Context<T>, s: usize, a: usize, next: usize) -> Label;
    fn horizon(&self) -> usize;
    fn discount(&self) -> T;

    /// Reward-machine states at which rollouts stop (simulation choice, not RM semantics).
    fn terminal_rm_states(&self) -> &[&'static str] {
        &[]
    }

    /// Environment-specific context quantization for tabular agents, if any.
    fn context_cell(&self, _c: &Context<T>) -> Option<Vec<usize>> {
        None
    }
}

pub(crate) fn sample_discrete<T: Real, R: Rng + ?Sized>(support: &[(usize, T)], rng: &mut R) -> usize {
    if let [(s, _)] = support {
        return *s;
    }
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for &(s, p) in support {
        acc = acc + p;
        if u < acc {
            return s;
        }
    }
    support.last().expect("non-empty support").0
}

/// State of the product: environment state paired with reward-machine state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProductState {
    pub env_state: usize,
    pub rm_state: RmState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductStep<T> {
    pub state: ProductState,
    pub action: usize,
    pub reward: T,
    pub next: ProductState,
    /// Label emitted by the transition, over the reward machine alphabet.
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductTrajectory<T> {
    pub context: Context<T>,
    pub steps: Vec<ProductStep<T>>,
    /// True if the rollout stopped in a terminal reward-machine state.
    pub terminal: bool,
}

impl<T: Real> ProductTrajectory<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<T> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.steps.iter().map(|s| s.label).collect()
    }

    pub fn final_rm_state(&self) -> Option<RmState> {
        self.steps.last().map(|s| s.next.rm_state)
    }
}

/// `sum_t gamma^t r_{t+1}`.
pub fn discounted_return<T: Real>(traj: &ProductTrajectory<T>, gamma: T) -> T {
    let mut discount = T::one();
    let mut total = T::zero();
    for step in &traj.steps {
        total = total + discount * step.reward;
        discount = discount * gamma;
    }
    total
}

/// Chooses actions in the product.
pub trait Policy<T> {
    fn act(&self, state: ProductState, context: &Context<T>, rng: &mut dyn RngCore) -> usize;
}

impl<T, F> Policy<T> for F
where
    F: Fn(ProductState, &Context<T>) -> usize,
{
    fn act(&self, state: ProductState, context: &Context<T>, _rng: &mut dyn RngCore) -> usize {
        self(state, context)
    }
}

/// Uniformly random actions.
#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy {
    pub num_actions: usize,
}

impl<T> Policy<T> for UniformPolicy {
    fn act(&self, _state: ProductState, _context: &Context<T>, rng: &mut dyn RngCore) -> usize {
        rng.random_range(0..self.num_actions)
    }
}

/// Product of a labeled CMDP with a reward machine.
pub struct Product<'a, T: Real, E: ?Sized> {
    env: &'a E,
    rm: &'a RewardMachine<T>,
    binding: Vec<usize>,
    terminal: Vec<bool>,
}

impl<'a, T: Real, E: LabeledCmdp<T> + ?Sized> Product<'a, T, E> {
    pub fn new(env: &'a E, rm: &'a RewardMachine<T>) -> Result<Self, CmdpError> {
        let binding = env
            .propositions()
            .iter()
            .map(|p| rm.proposition_index(p).ok_or_else(|| CmdpError::UnboundProposition(p.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut terminal = vec![false; rm.num_states()];
        for name in env.terminal_rm_states() {
            let q = rm.state_by_name(name).ok_or_else(|| CmdpError::UnknownTerminal(name.to_string()))?;
            terminal[q.index()] = true;
        }
        Ok(Product {
            env,
            rm,
            binding,
            terminal,
        })
    }

    pub fn env(&self) -> &'a E {
        self.env
    }

    pub fn rm(&self) -> &'a RewardMachine<T> {
        self.rm
    }

    pub fn is_terminal(&self, q: RmState) -> bool {
        self.terminal[q.index()]
    }

    /// Translates an environment label onto the reward machine alphabet.
    pub fn rm_label(&self, env_label: Label) -> Label {
        env_label.iter().fold(Label::EMPTY, |acc, i| acc.with(self.binding[i]))
    }

    /// Reward-machine label of an environment transition.
    pub fn transition_label(&self, c: &Context<T>, s: usize, a: usize, next: usize) -> Label {
        self.rm_label(self.env.label(c, s, a, next))
    }

    /// Samples `s ~ phi_c`; the machine starts in its initial state.
    pub fn initial<R: Rng + ?Sized>(&self, c: &Context<T>, rng: &mut R) -> ProductState {
        ProductState {
            env_state: sample_discrete(&self.env.initial_distribution(c), rng),
            rm_state: self.rm.initial(),
        }
    }

    /// Samples `s' ~ p_c(s, a)` and advances the machine on `L_c(s, a, s')`.
    pub fn step<R: Rng + ?Sized>(&self, c: &Context<T>, state: ProductState, action: usize, rng: &mut R) -> ProductStep<T> {
        let next_env = sample_discrete(&self.env.transition(c, state.env_state, action), rng);
        let label = self.transition_label(c, state.env_state, action, next_env);
        let (rm_next, reward) = self.rm.step(state.rm_state, label);
        ProductStep {
            state,
            action,
            reward,
            next: ProductState {
                env_state: next_env,
                rm_state: rm_next,
            },
            label,
        }
    }

    /// Rolls out `policy` for at most `horizon` steps, stopping in terminal RM states.
    pub fn rollout<P: Policy<T> + ?Sized, R: RngCore>(
        &self,
        c: &Context<T>,
        policy: &P,
        horizon: usize,
        rng: &mut R,
    ) -> ProductTrajectory<T> {
        let mut state = self.initial(c, rng);
        let mut steps = Vec::with_capacity(horizon.min(1024));
        let mut terminal = false;
        for _ in 0..horizon {
            let action = policy.act(state, c, rng);
            let step = self.step(c, state, action, rng);
            state = step.next;
            steps.push(step);
            if self.is_terminal(state.rm_state) {
                terminal = true;
                break;
            }
        }
        ProductTrajectory {
            context: c.clone(),
            steps,
            terminal,
        }
    }
}
