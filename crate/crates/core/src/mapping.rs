//! Identifier context parameters and the reward-machine-context mapping `F`.
//!
//! A set `G` of context dimensions identifies a product transition `(q, s, a, s')`
//! when any two contexts agreeing on `G` drive the reward machine to the same next
//! state. Quantification over the context space is replaced by a finite
//! [`ContextGrid`]; the grid is a Cartesian product, so it is itself box-shaped.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::cmdp::{BoxContextSpace, Context, LabeledCmdp, Product};
use crate::rm::{RewardMachine, RmState};
use crate::scalar::Real;

/// Set of context dimensions, stored 0-based; displayed 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DimSet(u32);

impl DimSet {
    pub const EMPTY: DimSet = DimSet(0);

    pub fn full(dims: usize) -> Self {
        DimSet(((1u64 << dims) - 1) as u32)
    }

    pub fn from_bits(bits: u32) -> Self {
        DimSet(bits)
    }

    /// From 1-based dimension indices.
    pub fn from_one_based(indices: &[usize]) -> Self {
        DimSet(indices.iter().fold(0, |acc, &i| acc | (1 << (i - 1))))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, dim: usize) -> bool {
        self.0 & (1 << dim) != 0
    }

    pub fn insert(&mut self, dim: usize) {
        self.0 |= 1 << dim;
    }

    pub fn without(self, dim: usize) -> Self {
        DimSet(self.0 & !(1 << dim))
    }

    pub fn union(self, other: DimSet) -> Self {
        DimSet(self.0 | other.0)
    }

    pub fn intersection(self, other: DimSet) -> Self {
        DimSet(self.0 & other.0)
    }

    pub fn is_subset(self, other: DimSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// 0-based members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&d| self.contains(d))
    }

    /// Every subset of `{0..dims}`.
    pub fn all_subsets(dims: usize) -> impl Iterator<Item = DimSet> {
        (0..1u32 << dims).map(DimSet)
    }
}

impl fmt::Display for DimSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.iter().map(|d| (d + 1).to_string()).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("unknown reward machine state `{0}`")]
    UnknownState(String),
    #[error("dimension {dim} outside 1..={dims}")]
    DimOutOfRange { dim: usize, dims: usize },
    #[error("mapping keys differ: only declared {only_declared:?}, only computed {only_computed:?}")]
    KeyMismatch {
        only_declared: Vec<String>,
        only_computed: Vec<String>,
    },
    #[error("grid needs at least one point per dimension")]
    EmptyGrid,
}

/// Finite per-dimension sample sets whose Cartesian product stands in for the context space.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextGrid<T> {
    points: Vec<Vec<T>>,
}

impl<T: Real> ContextGrid<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self, MappingError> {
        if points.is_empty() || points.iter().any(|p| p.is_empty()) {
            return Err(MappingError::EmptyGrid);
        }
        Ok(ContextGrid { points })
    }

    /// `n` evenly spaced points per dimension, endpoints included (`n = 1` takes the midpoint).
    pub fn uniform(space: &BoxContextSpace<T>, n: usize) -> Result<Self, MappingError> {
        if n == 0 {
            return Err(MappingError::EmptyGrid);
        }
        let points = space
            .lo()
            .iter()
            .zip(space.hi())
            .map(|(&lo, &hi)| {
                if n == 1 {
                    return vec![(lo + hi) / T::lit(2.0)];
                }
                (0..n)
                    .map(|k| {
                        if k == n - 1 {
                            hi
                        } else {
                            lo + (hi - lo) * T::lit(k as f64) / T::lit((n - 1) as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        ContextGrid::new(points)
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-dimension point indices of grid context `k` (first dimension varies slowest).
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        for d in (0..self.dims()).rev() {
            let n = self.points[d].len();
            idx[d] = k % n;
            k /= n;
        }
        idx
    }

    pub fn context(&self, k: usize) -> Context<T> {
        Context::new(self.multi_index(k).iter().enumerate().map(|(d, &i)| self.points[d][i]).collect())
    }

    pub fn contexts(&self) -> Vec<Context<T>> {
        (0..self.len()).map(|k| self.context(k)).collect()
    }
}

/// A product transition together with the next reward-machine state under every grid context.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionOutcomes {
    pub q: RmState,
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    /// `outcomes[k]` is `delta_q(q, L_c(s, a, s'))` for grid context `k`.
    pub outcomes: Vec<RmState>,
}

/// Next reward-machine state of `(q, s, a, s')` for every grid context.
pub fn transition_outcomes<T: Real, E: LabeledCmdp<T> + ?Sized>(
    product: &Product<'_, T, E>,
    q: RmState,
    s: usize,
    a: usize,
    s_next: usize,
    grid_contexts: &[Context<T>],
) -> Vec<RmState> {
    grid_contexts
        .iter()
        .map(|c| product.rm().next_state(q, product.transition_label(c, s, a, s_next)))
        .collect()
}

/// Definition-level identifier test on precomputed outcomes.
pub fn is_identifier_for(outcomes: &[RmState], set: DimSet, grid: &ContextGrid<impl Real>) -> bool {
    let mut seen: HashMap<Vec<usize>, RmState> = HashMap::new();
    for (k, &next) in outcomes.iter().enumerate() {
        let idx = grid.multi_index(k);
        let key: Vec<usize> = set.iter().map(|d| idx[d]).collect();
        match seen.get(&key) {
            Some(&prev) if prev != next => return false,
            Some(_) => {}
            None => {
                seen.insert(key, next);
            }
        }
    }
    true
}

/// Smallest identifier set via single-dimension removal: `i` belongs to it iff
/// dropping `i` from the full set breaks identification.
pub fn hmin_for(outcomes: &[RmState], grid: &ContextGrid<impl Real>) -> DimSet {
    let full = DimSet::full(grid.dims());
    let mut out = DimSet::EMPTY;
    for d in 0..grid.dims() {
        if !is_identifier_for(outcomes, full.without(d), grid) {
            out.insert(d);
        }
    }
    out
}

pub fn is_identifier_set<T: Real, E: LabeledCmdp<T> + ?Sized>(
    product: &Product<'_, T, E>,
    set: DimSet,
    q: RmState,
    s: usize,
    a: usize,
    s_next: usize,
    grid: &ContextGrid<T>,
) -> bool {
    let outcomes = transition_outcomes(product, q, s, a, s_next, &grid.contexts());
    is_identifier_for(&outcomes, set, grid)
}

pub fn compute_hmin<T: Real, E: LabeledCmdp<T> + ?Sized>(
    product: &Product<'_, T, E>,
    q: RmState,
    s: usize,
    a: usize,
    s_next: usize,
    grid: &ContextGrid<T>,
) -> DimSet {
    let outcomes = transition_outcomes(product, q, s, a, s_next, &grid.contexts());
    hmin_for(&outcomes, grid)
}

/// Product states `(q, s)` reachable from the initial distribution under some grid context.
pub fn reachable_product_states<T: Real, E: LabeledCmdp<T> + ?Sized>(
    product: &Product<'_, T, E>,
    grid_contexts: &[Context<T>],
) -> Vec<(RmState, usize)> {
    let env = product.env();
    let n_s = env.num_states();
    let n_q = product.rm().num_states();
    let per_context: Vec<Vec<bool>> = grid_contexts
        .par_iter()
        .map(|c| {
            let mut seen = vec![false; n_q * n_s];
            let mut stack = Vec::new();
            for (s, p) in env.initial_distribution(c) {
                if p > T::zero() {
                    let key = product.rm().initial().index() * n_s + s;
                    if !seen[key] {
                        seen[key] = true;
                        stack.push((product.rm().initial(), s));
                    }
                }
            }
            while let Some((q, s)) = stack.pop() {
                for a in 0..env.num_actions() {
                    for (s2, p) in env.transition(c, s, a) {
                        if p <= T::zero() {
                            continue;
                        }
                        let q2 = product.rm().next_state(q, product.transition_label(c, s, a, s2));
                        let key = q2.index() * n_s + s2;
                        if !seen[key] {
                            seen[key] = true;
                            stack.push((q2, s2));
                        }
                    }
                }
            }
            seen
        })
        .collect();
    (0..n_q * n_s)
        .filter(|&k| per_context.iter().any(|seen| seen[k]))
        .map(|k| (RmState(k / n_s), k % n_s))
        .collect()
}

/// Every transition leaving a reachable product state, with its per-context outcomes.
pub fn enumerate_transitions<T: Real, E: LabeledCmdp<T> + ?Sized>(
    product: &Product<'_, T, E>,
    grid: &ContextGrid<T>,
) -> Vec<TransitionOutcomes> {
    let contexts = grid.contexts();
    let env = product.env();
    reachable_product_states(product, &contexts)
        .into_par_iter()
        .flat_map_iter(|(q, s)| {
            let contexts = &contexts;
            (0..env.num_actions()).flat_map(move |a| {
                let mut nexts: Vec<usize> = contexts
                    .iter()
                    .flat_map(|c| env.transition(c, s, a))
                    .filter(|&(_, p)| p > T::zero())
                    .map(|(s2, _)| s2)
                    .collect();
                nexts.sort_unstable();
                nexts.dedup();
                nexts.into_iter().map(move |s_next| TransitionOutcomes {
                    q,
                    s,
                    a,
                    s_next,
                    outcomes: transition_outcomes(product, q, s, a, s_next, contexts),
                })
            })
        })
        .collect()
}

/// `F(q, q')`: union of `H_min` over the transitions reaching `q'` from `q` under some grid context.
pub fn compute_f<T: Real, E: LabeledCmdp<T> + ?Sized>(product: &Product<'_, T, E>, grid: &ContextGrid<T>) -> RMContextMapping {
    let transitions = enumerate_transitions(product, grid);
    let mut table = BTreeMap::new();
    for t in &transitions {
        let h = hmin_for(&t.outcomes, grid);
        let mut targets = t.outcomes.clone();
        targets.sort_unstable();
        targets.dedup();
        for q2 in targets {
            let entry = table.entry((t.q, q2)).or_insert(DimSet::EMPTY);
            *entry = entry.union(h);
        }
    }
    RMContextMapping {
        dims: grid.dims(),
        names: product.rm().states().iter().map(|s| s.name.clone()).collect(),
        table,
    }
}

/// Table `(q, q') -> F(q, q')`.
#[derive(Debug, Clone, PartialEq)]
pub struct RMContextMapping {
    dims: usize,
    names: Vec<String>,
    table: BTreeMap<(RmState, RmState), DimSet>,
}

impl RMContextMapping {
    /// Builds a table from state names and 1-based dimension lists.
    pub fn from_named<T: Real>(rm: &RewardMachine<T>, dims: usize, entries: &[(&str, &str, &[usize])]) -> Result<Self, MappingError> {
        let lookup = |n: &str| rm.state_by_name(n).ok_or_else(|| MappingError::UnknownState(n.to_string()));
        let mut table = BTreeMap::new();
        for &(q, q2, ds) in entries {
            if let Some(&dim) = ds.iter().find(|&&d| d == 0 || d > dims) {
                return Err(MappingError::DimOutOfRange { dim, dims });
            }
            table.insert((lookup(q)?, lookup(q2)?), DimSet::from_one_based(ds));
        }
        Ok(RMContextMapping {
            dims,
            names: rm.states().iter().map(|s| s.name.clone()).collect(),
            table,
        })
    }

    /// Maps every pair of machine states to `set`.
    pub fn constant<T: Real>(rm: &RewardMachine<T>, dims: usize, set: DimSet) -> Self {
        let n = rm.num_states();
        let table = (0..n).flat_map(|a| (0..n).map(move |b| ((RmState(a), RmState(b)), set))).collect();
        RMContextMapping {
            dims,
            names: rm.states().iter().map(|s| s.name.clone()).collect(),
            table,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn get(&self, q: RmState, q2: RmState) -> Option<DimSet> {
        self.table.get(&(q, q2)).copied()
    }

    /// Like [`get`](Self::get), but unknown pairs fall back to the full set, which identifies every transition.
    pub fn get_or_full(&self, q: RmState, q2: RmState) -> DimSet {
        self.get(q, q2).unwrap_or_else(|| DimSet::full(self.dims))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((RmState, RmState), DimSet)> + '_ {
        self.table.iter().map(|(&k, &v)| (k, v))
    }

    pub fn pair_name(&self, key: (RmState, RmState)) -> String {
        let name = |q: RmState| self.names.get(q.index()).cloned().unwrap_or_else(|| format!("#{}", q.index()));
        format!("({},{})", name(key.0), name(key.1))
    }
}

impl fmt::Display for RMContextMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, set) in self.iter() {
            writeln!(f, "F{} = {}", self.pair_name(key), set)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Exact,
    /// Strict superset of the computed set: still identifies, not minimal.
    SoundNotMinimal,
    Unsound,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Exact => "EXACT",
            Verdict::SoundNotMinimal => "SOUND-NOT-MINIMAL",
            Verdict::Unsound => "UNSOUND",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationEntry {
    pub pair: String,
    pub key: (RmState, RmState),
    pub declared: DimSet,
    pub computed: DimSet,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn any_unsound(&self) -> bool {
        self.entries.iter().any(|e| e.verdict == Verdict::Unsound)
    }

    pub fn all_exact(&self) -> bool {
        self.entries.iter().all(|e| e.verdict == Verdict::Exact)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "F{:<10} declared {:<7} computed {:<7} {}",
                e.pair,
                e.declared.to_string(),
                e.computed.to_string(),
                e.verdict
            )?;
        }
        Ok(())
    }
}

/// Compares an expert table with a computed one, key by key.
pub fn validate_declared_f(declared: &RMContextMapping, computed: &RMContextMapping) -> Result<ValidationReport, MappingError> {
    let only_declared: Vec<String> = declared
        .table
        .keys()
        .filter(|k| !computed.table.contains_key(k))
        .map(|&k| declared.pair_name(k))
        .collect();
    let only_computed: Vec<String> = computed
        .table
        .keys()
        .filter(|k| !declared.table.contains_key(k))
        .map(|&k| computed.pair_name(k))
        .collect();
    if !only_declared.is_empty() || !only_computed.is_empty() {
        return Err(MappingError::KeyMismatch {
            only_declared,
            only_computed,
        });
    }
    let entries = declared
        .iter()
        .map(|(key, d)| {
            let c = computed.table[&key];
            let verdict = if d == c {
                Verdict::Exact
            } else if c.is_subset(d) {
                Verdict::SoundNotMinimal
            } else {
                Verdict::Unsound
            };
            ValidationEntry {
                pair: declared.pair_name(key),
                key,
                declared: d,
                computed: c,
                verdict,
            }
        })
        .collect();
    Ok(ValidationReport { entries })
}
