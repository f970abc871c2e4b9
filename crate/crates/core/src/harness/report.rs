use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use super::{
    curricula_variance, curriculum_length, rank_sum_p_value, read_run_csv, ExperimentConfig, HarnessError, Method, RunLog, VarianceTable,
};
use crate::curriculum::CurriculumConfig;

/// Summary of one method's runs.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub lengths: Vec<Option<usize>>,
    pub final_success: Vec<f64>,
    pub final_return: Vec<f64>,
    pub variance: VarianceTable,
}

impl MethodSummary {
    pub fn from_logs(method: Method, logs: &[RunLog], k_alpha: usize, kl_lb: f64) -> Self {
        MethodSummary {
            method,
            seeds: logs.iter().map(|l| l.seed).collect(),
            lengths: logs.iter().map(|l| curriculum_length(l, kl_lb)).collect(),
            final_success: logs.iter().map(|l| l.final_record().map_or(0.0, |r| r.success_ratio)).collect(),
            final_return: logs.iter().map(|l| l.final_record().map_or(0.0, |r| r.eval_return)).collect(),
            variance: curricula_variance(logs, k_alpha, kl_lb),
        }
    }

    /// Median curriculum length; unconverged runs count as longer than any converged one.
    pub fn median_length(&self) -> Option<f64> {
        let mut keyed: Vec<f64> = self.lengths.iter().map(|l| l.map_or(f64::INFINITY, |v| v as f64)).collect();
        let m = median(&mut keyed);
        m.is_finite().then_some(m)
    }

    pub fn median_success(&self) -> f64 {
        median(&mut self.final_success.clone())
    }

    pub fn median_return(&self) -> f64 {
        median(&mut self.final_return.clone())
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub methods: Vec<MethodSummary>,
    /// One-sided rank-sum p-values that rm_guided's per-seed variance is below intermediate's.
    pub p_values: Vec<(String, f64)>,
}

impl Report {
    pub fn from_logs(logs: BTreeMap<Method, Vec<RunLog>>, settings: &BTreeMap<Method, CurriculumConfig<f64>>) -> Self {
        let methods: Vec<MethodSummary> = logs
            .iter()
            .map(|(&m, runs)| {
                let cfg = settings.get(&m).cloned().unwrap_or_default();
                MethodSummary::from_logs(m, runs, cfg.k_alpha, cfg.kl_lb)
            })
            .collect();
        let find = |m: Method| methods.iter().find(|s| s.method == m);
        let p_values = match (find(Method::RmGuided), find(Method::Intermediate)) {
            (Some(a), Some(b)) => a
                .variance
                .statistics
                .iter()
                .enumerate()
                .map(|(j, name)| (name.clone(), rank_sum_p_value(&a.variance.column(j), &b.variance.column(j))))
                .collect(),
            _ => Vec::new(),
        };
        Report { methods, p_values }
    }

    /// Reads every `<method>_seed<n>.csv` in `dir`; `<method>.toml` next to them supplies K_alpha and the threshold.
    pub fn from_dir(dir: &Path) -> Result<Self, HarnessError> {
        let mut logs: BTreeMap<Method, Vec<RunLog>> = BTreeMap::new();
        let mut settings = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "csv") && p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.contains("_seed"))
            })
            .collect();
        paths.sort();
        for path in paths {
            let log = read_run_csv(&path)?;
            logs.entry(log.method).or_default().push(log);
        }
        for &m in logs.keys() {
            let cfg_path = dir.join(format!("{m}.toml"));
            if cfg_path.exists() {
                settings.insert(m, ExperimentConfig::load(&cfg_path)?.curriculum);
            }
        }
        for runs in logs.values_mut() {
            runs.sort_by_key(|l| l.seed);
        }
        Ok(Report::from_logs(logs, &settings))
    }

    /// Long-format `method,statistic,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,statistic,value\n");
        for s in &self.methods {
            let len = s.median_length().map_or("none".to_string(), |v| format!("{v}"));
            out += &format!("{},runs,{}\n", s.method, s.seeds.len());
            out += &format!("{},converged_runs,{}\n", s.method, s.lengths.iter().flatten().count());
            out += &format!("{},median_curriculum_length,{len}\n", s.method);
            out += &format!("{},median_final_success,{:.16e}\n", s.method, s.median_success());
            out += &format!("{},median_final_return,{:.16e}\n", s.method, s.median_return());
            for (name, v) in s.variance.statistics.iter().zip(s.variance.averages()) {
                out += &format!("{},variance_{name},{v:.16e}\n", s.method);
            }
        }
        for (name, p) in &self.p_values {
            out += &format!("rm_guided_vs_intermediate,p_{name},{p:.16e}\n");
        }
        out
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14} {:>5} {:>10} {:>12} {:>10}",
            "method", "runs", "converged", "median len", "success"
        )?;
        for s in &self.methods {
            let len = s.median_length().map_or("none".to_string(), |v| format!("{v}"));
            writeln!(
                f,
                "{:<14} {:>5} {:>10} {:>12} {:>10.3}",
                s.method.name(),
                s.seeds.len(),
                s.lengths.iter().flatten().count(),
                len,
                s.median_success()
            )?;
        }
        writeln!(f)?;
        writeln!(f, "average curricula variance")?;
        for s in &self.methods {
            if s.method.curriculum_mode().is_none() {
                continue;
            }
            let cells: Vec<String> = s
                .variance
                .statistics
                .iter()
                .zip(s.variance.averages())
                .map(|(n, v)| format!("{n}={v:.3e}"))
                .collect();
            writeln!(f, "{:<14} {}", s.method.name(), cells.join("  "))?;
        }
        if !self.p_values.is_empty() {
            writeln!(f)?;
            let cells: Vec<String> = self.p_values.iter().map(|(n, p)| format!("{n}: p={p:.4}")).collect();
            writeln!(f, "rm_guided < intermediate  {}", cells.join("  "))?;
        }
        Ok(())
    }
}
