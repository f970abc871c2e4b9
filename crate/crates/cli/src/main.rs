use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};

use rmsprl_core::envs::EnvKind;
use rmsprl_core::harness::{emit_csv, run_experiment, sweep, ExperimentConfig, Report};
use rmsprl_core::mapping::{compute_f, validate_declared_f, ContextGrid};
use rmsprl_core::{parse_rm, Product};

#[derive(Parser)]
#[command(name = "rmsprl", version, about = "Reward-machine-guided self-paced RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed of an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory (defaults to the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a range of seeds in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `a..b` (exclusive), `a..=b` or a single seed.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Curriculum length and variance tables for a directory of runs.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Compare an environment's declared mapping with the brute-forced one.
    ValidateMapping {
        #[arg(long)]
        env: String,
        /// Reward machine file (the environment's built-in machine by default).
        #[arg(long)]
        rm: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        grid: usize,
    },
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..=") {
        let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
        if a >= b {
            bail!("empty seed range `{spec}`");
        }
        return Ok((a..b).collect());
    }
    Ok(vec![spec.parse().with_context(|| format!("bad seed list `{spec}`"))?])
}

fn save(config: &ExperimentConfig, logs: &[rmsprl_core::harness::RunLog], out: &Path) -> Result<()> {
    let files = emit_csv(logs, out)?;
    let cfg_path = out.join(format!("{}.toml", config.experiment.method));
    std::fs::write(&cfg_path, config.to_toml()).with_context(|| format!("writing {}", cfg_path.display()))?;
    for (log, file) in logs.iter().zip(files) {
        let last = log.final_record();
        println!(
            "{} seed {}: success {:.3}, return {:.4}, kl to target {:.4} -> {}",
            log.method,
            log.seed,
            last.map_or(0.0, |r| r.success_ratio),
            last.map_or(0.0, |r| r.eval_return),
            last.map_or(f64::NAN, |r| r.kl_to_target),
            file.display()
        );
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RMSPRL_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("RMSPRL_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn validate_mapping(env_name: &str, rm_path: Option<&Path>, grid: usize) -> Result<bool> {
    let kind: EnvKind = env_name.parse()?;
    let env = kind.build::<f64>();
    let rm = match rm_path {
        Some(p) => parse_rm(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => kind.default_rm()?,
    };
    let product = Product::new(env.as_cmdp(), &rm)?;
    let grid = ContextGrid::uniform(env.as_cmdp().context_space(), grid)?;
    let computed = compute_f(&product, &grid);
    let declared = env.declared_mapping(&rm)?;
    let report = validate_declared_f(&declared, &computed)?;
    print!("{report}");
    if report.entries.iter().any(|e| e.verdict == rmsprl_core::Verdict::SoundNotMinimal) {
        log::warn!("declared mapping is sound but not minimal");
    }
    Ok(!report.any_unsound())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let log = run_experiment(&cfg, seed)?;
            save(&cfg, &[log], out.as_deref().unwrap_or(&cfg.experiment.out_dir))?;
            Ok(true)
        }
        Command::Sweep { config, seeds, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.experiment.seeds = parse_seeds(&seeds)?;
            let logs = sweep(&cfg)?;
            save(&cfg, &logs, out.as_deref().unwrap_or(&cfg.experiment.out_dir))?;
            Ok(true)
        }
        Command::Report { input } => {
            let report = Report::from_dir(&input)?;
            print!("{report}");
            let path = input.join("report.csv");
            std::fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            Ok(true)
        }
        Command::ValidateMapping { env, rm, grid } => validate_mapping(&env, rm.as_deref(), grid),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_seeds;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
