//! Reward machines, product contextual MDPs and self-paced curriculum reinforcement learning.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases. The agent and experiment harness run in `f64`.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod cmdp;
pub mod curriculum;
pub mod envs;
pub mod harness;
pub mod mapping;
pub mod rm;
pub mod rng;
pub mod scalar;

pub use cmdp::{
    discounted_return, BoxContextSpace, CmdpError, Context, LabeledCmdp, Policy, Product, ProductState, ProductStep, ProductTrajectory,
    UniformPolicy,
};
pub use envs::{EnvKind, Environment};
pub use mapping::{
    compute_f, compute_hmin, is_identifier_set, validate_declared_f, ContextGrid, DimSet, MappingError, RMContextMapping, ValidationReport,
    Verdict,
};
pub use rm::{eval_guard, parse_rm, rm_run, rm_step, GuardFormula, Label, RewardMachine, RmError, RmState};
pub use scalar::Real;

pub type RewardMachine64 = RewardMachine<f64>;
pub type RewardMachine32 = RewardMachine<f32>;
pub type Context64 = Context<f64>;
pub type Context32 = Context<f32>;
pub type ProductTrajectory64 = ProductTrajectory<f64>;
pub type ProductTrajectory32 = ProductTrajectory<f32>;
pub type ContextDistribution64 = curriculum::GaussianContextDistribution<f64>;
pub type ContextDistribution32 = curriculum::GaussianContextDistribution<f32>;
