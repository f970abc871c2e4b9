#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use rmsprl_core::curriculum::GaussianContextDistribution;
use rmsprl_core::{Context, DimSet, EnvKind, Environment, LabeledCmdp, Product, RewardMachine, RmState};

pub struct Fixture {
    pub env: Environment<f64>,
    pub rm: RewardMachine<f64>,
}

impl Fixture {
    pub fn new(kind: EnvKind) -> Self {
        Fixture {
            env: kind.build(),
            rm: kind.default_rm().expect("bundled machine parses"),
        }
    }

    pub fn product(&self) -> Product<'_, f64, dyn LabeledCmdp<f64> + '_> {
        Product::new(self.env.as_cmdp(), &self.rm).expect("alphabets bind")
    }
}

/// A product transition with the next RM state under each grid context.
#[derive(Debug, Clone)]
pub struct Transition {
    pub q: RmState,
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub outcomes: Vec<RmState>,
}

/// Straight BFS over `(q, s)` per context, then every `(a, s')` out of the union.
pub fn transitions<E: LabeledCmdp<f64> + ?Sized>(product: &Product<'_, f64, E>, contexts: &[Context<f64>]) -> Vec<Transition> {
    let env = product.env();
    let rm = product.rm();
    let mut reachable: HashSet<(RmState, usize)> = HashSet::new();
    for c in contexts {
        let mut seen = HashSet::new();
        let mut queue: Vec<(RmState, usize)> = env
            .initial_distribution(c)
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .map(|(s, _)| (rm.initial(), s))
            .collect();
        seen.extend(queue.iter().copied());
        while let Some((q, s)) = queue.pop() {
            for a in 0..env.num_actions() {
                for (s2, p) in env.transition(c, s, a) {
                    if p <= 0.0 {
                        continue;
                    }
                    let label = product.transition_label(c, s, a, s2);
                    let next = (rm.next_state(q, label), s2);
                    if seen.insert(next) {
                        queue.push(next);
                    }
                }
            }
        }
        reachable.extend(seen);
    }
    let mut out = Vec::new();
    let mut keys: Vec<_> = reachable.into_iter().collect();
    keys.sort();
    for (q, s) in keys {
        for a in 0..env.num_actions() {
            let mut nexts: Vec<usize> = contexts
                .iter()
                .flat_map(|c| env.transition(c, s, a))
                .filter(|&(_, p)| p > 0.0)
                .map(|(s2, _)| s2)
                .collect();
            nexts.sort_unstable();
            nexts.dedup();
            for s_next in nexts {
                let outcomes = contexts
                    .iter()
                    .map(|c| rm.next_state(q, product.transition_label(c, s, a, s_next)))
                    .collect();
                out.push(Transition { q, s, a, s_next, outcomes });
            }
        }
    }
    out
}

/// Contexts that agree on `set` must agree on the outcome.
pub fn identifies(outcomes: &[RmState], set: DimSet, contexts: &[Context<f64>]) -> bool {
    let mut seen: HashMap<Vec<u64>, RmState> = HashMap::new();
    for (c, &q) in contexts.iter().zip(outcomes) {
        let key = set.iter().map(|d| c[d].to_bits()).collect();
        if *seen.entry(key).or_insert(q) != q {
            return false;
        }
    }
    true
}

pub fn identifier_sets(outcomes: &[RmState], dims: usize, contexts: &[Context<f64>]) -> Vec<DimSet> {
    DimSet::all_subsets(dims).filter(|&h| identifies(outcomes, h, contexts)).collect()
}

/// The identifier set of least size. Panics if two of that size exist.
pub fn smallest_identifier(outcomes: &[RmState], dims: usize, contexts: &[Context<f64>]) -> DimSet {
    let sets = identifier_sets(outcomes, dims, contexts);
    let least = sets.iter().map(|h| h.len()).min().expect("the full set always identifies");
    let smallest: Vec<_> = sets.into_iter().filter(|h| h.len() == least).collect();
    assert_eq!(smallest.len(), 1, "two different smallest identifier sets: {smallest:?}");
    smallest[0]
}

/// `F(q, q')` as the union of smallest identifier sets over transitions reaching `q'`.
pub fn oracle_f(transitions: &[Transition], dims: usize, contexts: &[Context<f64>]) -> BTreeMap<(RmState, RmState), DimSet> {
    let mut table = BTreeMap::new();
    for t in transitions {
        let h = smallest_identifier(&t.outcomes, dims, contexts);
        for &q2 in &t.outcomes {
            let e = table.entry((t.q, q2)).or_insert(DimSet::EMPTY);
            *e = e.union(h);
        }
    }
    table
}

/// Composite trapezoid nodes and weights over `[lo, hi]`.
pub fn trapezoid(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            (lo + i as f64 * h, w)
        })
        .collect()
}

/// Nodes covering twelve standard deviations either side of each mean.
pub fn nodes_for(p: &GaussianContextDistribution<f64>, d: usize, n: usize) -> Vec<(f64, f64)> {
    let sd = p.variances()[d].sqrt();
    trapezoid(p.mean()[d] - 12.0 * sd, p.mean()[d] + 12.0 * sd, n)
}

/// `KL(p || q)` by two-dimensional quadrature of `p ln(p/q)`.
pub fn kl_quadrature_2d(p: &GaussianContextDistribution<f64>, q: &GaussianContextDistribution<f64>) -> f64 {
    let xs = nodes_for(p, 0, 400);
    let ys = nodes_for(p, 1, 400);
    let mut total = 0.0;
    for &(x, wx) in &xs {
        for &(y, wy) in &ys {
            let c = [x, y];
            let lp = p.log_pdf(&c);
            total += wx * wy * lp.exp() * (lp - q.log_pdf(&c));
        }
    }
    total
}

/// Density of `c[keep]` under `p`, integrating the other coordinate of a 2-D Gaussian out.
pub fn marginal_quadrature_2d(p: &GaussianContextDistribution<f64>, keep: usize, value: f64) -> f64 {
    let other = 1 - keep;
    nodes_for(p, other, 400)
        .into_iter()
        .map(|(y, w)| {
            let mut c = [0.0; 2];
            c[keep] = value;
            c[other] = y;
            w * p.pdf(&c)
        })
        .sum()
}
