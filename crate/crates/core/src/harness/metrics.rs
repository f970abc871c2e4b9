use super::RunLog;

/// First iteration whose curriculum is within `kl_lb` of the target.
pub fn curriculum_length(log: &RunLog, kl_lb: f64) -> Option<usize> {
    log.records.iter().find(|r| r.kl_to_target < kl_lb).map(|r| r.iter)
}

/// Per-seed variance of each curriculum statistic over iterations `(k_alpha, convergence]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTable {
    /// `mu_1..mu_G, var_1..var_G`.
    pub statistics: Vec<String>,
    /// `per_seed[s][j]`: variance of statistic `j` in run `s`.
    pub per_seed: Vec<Vec<f64>>,
    /// Runs that never converged (measured up to the last iteration).
    pub unconverged: Vec<u64>,
}

impl VarianceTable {
    /// Average over seeds, per statistic.
    pub fn averages(&self) -> Vec<f64> {
        (0..self.statistics.len())
            .map(|j| {
                if self.per_seed.is_empty() {
                    0.0
                } else {
                    self.per_seed.iter().map(|row| row[j]).sum::<f64>() / self.per_seed.len() as f64
                }
            })
            .collect()
    }

    /// Per-seed values of one statistic.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.per_seed.iter().map(|row| row[j]).collect()
    }
}

fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

pub fn curricula_variance(logs: &[RunLog], k_alpha: usize, kl_lb: f64) -> VarianceTable {
    let dims = logs.first().map_or(0, |l| l.dims);
    let statistics = (1..=dims)
        .map(|i| format!("mu_{i}"))
        .chain((1..=dims).map(|i| format!("var_{i}")))
        .collect();
    let mut unconverged = Vec::new();
    let per_seed = logs
        .iter()
        .map(|log| {
            let end = curriculum_length(log, kl_lb).unwrap_or_else(|| {
                unconverged.push(log.seed);
                log.records.last().map_or(0, |r| r.iter)
            });
            let window: Vec<_> = log.records.iter().filter(|r| r.iter > k_alpha && r.iter <= end).collect();
            (0..dims)
                .map(|i| population_variance(&window.iter().map(|r| r.mean[i]).collect::<Vec<_>>()))
                .chain((0..dims).map(|i| population_variance(&window.iter().map(|r| r.variances[i]).collect::<Vec<_>>())))
                .collect()
        })
        .collect();
    VarianceTable {
        statistics,
        per_seed,
        unconverged,
    }
}

/// Exact one-sided Wilcoxon rank-sum p-value for "`a` tends to be smaller than `b`".
///
/// Ties get mid-ranks; the null distribution is enumerated over the observed ranks.
pub fn rank_sum_p_value(a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return 1.0;
    }
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Doubled mid-ranks keep everything integral.
    let mut ranks2 = vec![0usize; m + n];
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        for r in &mut ranks2[i..=j] {
            *r = i + j + 2;
        }
        i = j + 1;
    }
    let observed: usize = pooled.iter().zip(&ranks2).filter(|(p, _)| p.1).map(|(_, &r)| r).sum();

    // ways[c][s]: subsets of size c with doubled rank sum s.
    let max_sum: usize = ranks2.iter().sum();
    let mut ways = vec![vec![0f64; max_sum + 1]; m + 1];
    ways[0][0] = 1.0;
    for &r in &ranks2 {
        for c in (1..=m).rev() {
            for s in (r..=max_sum).rev() {
                let add = ways[c - 1][s - r];
                if add != 0.0 {
                    ways[c][s] += add;
                }
            }
        }
    }
    let total: f64 = ways[m].iter().sum();
    let below: f64 = ways[m][..=observed].iter().sum();
    below / total
}
