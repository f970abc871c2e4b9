use rand::Rng;
use rayon::prelude::*;

use super::{ExperimentConfig, HarnessError, MappingCheck, MappingSource, Method};
use crate::agent::{evaluate, ContextQuantizer, TabularPolicy};
use crate::cmdp::{discounted_return, LabeledCmdp, Product, ProductTrajectory};
use crate::curriculum::{
    alpha_return, alpha_schedule, gaussian_kl, update_distribution, GaussianContextDistribution, SolverStatus, WeightedBatch,
};
use crate::envs::Environment;
use crate::mapping::{compute_f, validate_declared_f, ContextGrid, DimSet, RMContextMapping, Verdict};
use crate::rm::{parse_rm, RewardMachine};
use crate::rng::derive_rng;

/// One curriculum iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
    pub alpha: f64,
    /// Mean discounted return of the training batch.
    pub batch_return: f64,
    pub eval_return: f64,
    pub success_ratio: f64,
    pub kl_to_target: f64,
    /// `KL(nu_k || nu_{k-1})`.
    pub kl_step: f64,
    pub solver_status: SolverStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub method: Method,
    pub seed: u64,
    pub dims: usize,
    pub records: Vec<IterationRecord>,
}

impl RunLog {
    pub fn kl_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.kl_to_target).collect()
    }

    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

fn load_rm(config: &ExperimentConfig) -> Result<RewardMachine<f64>, HarnessError> {
    let env = config.env_kind()?;
    match &config.experiment.rm {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            Ok(parse_rm(&text)?)
        }
        None => Ok(env.default_rm()?),
    }
}

/// The mapping requested by the config, or `None` for methods that do not weight per step.
pub fn resolve_mapping(
    config: &ExperimentConfig,
    env: &Environment<f64>,
    rm: &RewardMachine<f64>,
) -> Result<Option<RMContextMapping>, HarnessError> {
    if config.experiment.method != Method::RmGuided {
        return Ok(None);
    }
    let dims = env.as_cmdp().context_space().dims();
    let computed = || -> Result<RMContextMapping, HarnessError> {
        let product = Product::new(env.as_cmdp(), rm)?;
        let grid = ContextGrid::uniform(env.as_cmdp().context_space(), config.experiment.grid)?;
        Ok(compute_f(&product, &grid))
    };
    let mapping = match config.experiment.mapping {
        MappingSource::Declared => {
            let declared = env.declared_mapping(rm)?;
            if config.experiment.mapping_check != MappingCheck::Off {
                check_declared(&declared, &computed()?, config.experiment.mapping_check)?;
            }
            declared
        }
        MappingSource::Computed => computed()?,
        MappingSource::Full => RMContextMapping::constant(rm, dims, DimSet::full(dims)),
    };
    Ok(Some(mapping))
}

fn check_declared(declared: &RMContextMapping, computed: &RMContextMapping, check: MappingCheck) -> Result<(), HarnessError> {
    let report = validate_declared_f(declared, computed)?;
    for e in &report.entries {
        match e.verdict {
            Verdict::Exact => {}
            Verdict::SoundNotMinimal if check == MappingCheck::Warn => {
                log::warn!("declared F{} = {} is larger than the computed {}", e.pair, e.declared, e.computed);
            }
            _ => {
                return Err(HarnessError::Config(format!(
                    "declared F{} = {} is {} (computed {})",
                    e.pair, e.declared, e.verdict, e.computed
                )))
            }
        }
    }
    Ok(())
}

/// Runs the curriculum loop for one seed.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunLog, HarnessError> {
    config.validate()?;
    let ex = &config.experiment;
    let env: Environment<f64> = config.env_kind()?.build();
    let rm = load_rm(config)?;
    let mapping = resolve_mapping(config, &env, &rm)?;
    let cmdp: &dyn LabeledCmdp<f64> = env.as_cmdp();
    let product = Product::new(cmdp, &rm)?;
    let space = cmdp.context_space();
    let gamma = ex.gamma.unwrap_or_else(|| cmdp.discount());
    let horizon = cmdp.horizon();

    let target = GaussianContextDistribution::new(ex.target_mean.clone(), ex.target_var.clone())?;
    let mode = ex.method.curriculum_mode();
    let mut nu = match mode {
        Some(_) => GaussianContextDistribution::new(ex.init_mean.clone(), ex.init_var.clone())?,
        None => target.clone(),
    };
    let mut policy = TabularPolicy::new(
        cmdp.num_actions(),
        ContextQuantizer::for_env(&env, config.agent.bins),
        ex.method.uses_product(),
        gamma,
        &config.agent,
    );

    let mut records = Vec::with_capacity(ex.iterations);
    for k in 1..=ex.iterations {
        let mut sampler = derive_rng(seed, &[k as u64, 0]);
        let contexts: Vec<_> = (0..ex.rollouts).map(|_| space.clamp(&nu.sample(&mut sampler))).collect();
        policy.set_exploration(config.agent.exploration_at(k, ex.iterations));
        let batch: Vec<ProductTrajectory<f64>> = {
            let explorer = policy.explorer();
            contexts
                .par_iter()
                .enumerate()
                .map(|(i, c)| {
                    let mut rng = derive_rng(seed, &[k as u64, 1, i as u64]);
                    product.rollout(c, &explorer, horizon, &mut rng)
                })
                .collect()
        };
        policy.update(&batch, &product, config.agent.counterfactual);

        let batch_return = batch.iter().map(|t| discounted_return(t, gamma)).sum::<f64>() / batch.len() as f64;
        let (alpha, status, next) = match mode {
            None => (0.0, SolverStatus::Skipped, nu.clone()),
            Some(mode) => {
                let alpha = alpha_schedule(k, &config.curriculum, &nu, &target, alpha_return(&batch, gamma));
                let weighted = WeightedBatch::new(&batch, gamma, &nu, mode, mapping.as_ref())?;
                let update = update_distribution(&nu, &weighted, &target, alpha, &config.curriculum, space)?;
                if update.status.is_warning() {
                    log::warn!("{} seed {seed} iteration {k}: solver {}", ex.method, update.status);
                }
                (alpha, update.status, update.next)
            }
        };
        let kl_step = gaussian_kl(&next, &nu);
        nu = next;

        let eval_seed = derive_rng(seed, &[k as u64, 2]).random::<u64>();
        let eval = evaluate(&policy.greedy(), &product, &target, ex.n_eval, gamma, eval_seed);
        records.push(IterationRecord {
            iter: k,
            mean: nu.mean().to_vec(),
            variances: nu.variances().to_vec(),
            alpha,
            batch_return,
            eval_return: eval.mean_return,
            success_ratio: eval.success_ratio,
            kl_to_target: gaussian_kl(&nu, &target),
            kl_step,
            solver_status: status,
        });
        log::debug!(
            "{} seed {seed} k={k} mu={:?} kl={:.4} success={:.2}",
            ex.method,
            nu.mean(),
            gaussian_kl(&nu, &target),
            eval.success_ratio
        );
    }
    Ok(RunLog {
        method: ex.method,
        seed,
        dims: space.dims(),
        records,
    })
}

/// Runs every configured seed in parallel, in seed order.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<RunLog>, HarnessError> {
    config.experiment.seeds.par_iter().map(|&s| run_experiment(config, s)).collect()
}
