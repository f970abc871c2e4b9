//! Reward machines: finite-state transducers from label sets to scalar rewards.
//!
//! A machine is given as a list of guarded edges. At construction time the
//! edges are compiled into a dense `(state, label) -> (state, reward)` table
//! by enumerating every label over the alphabet, which is also where
//! determinism and completeness are checked.

mod formula;
mod parse;

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::scalar::Real;

pub use formula::{eval_guard, GuardFormula};
pub use parse::parse_rm;

/// Upper bound on the alphabet size; the determinism check enumerates `2^|alphabet|` labels.
pub const MAX_PROPOSITIONS: usize = 16;

/// A set of propositions, stored as a bitset over alphabet indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Label(u32);

impl Label {
    pub const EMPTY: Label = Label(0);

    pub fn from_bits(bits: u32) -> Self {
        Label(bits)
    }

    pub fn singleton(index: usize) -> Self {
        Label(1 << index)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, index: usize) -> bool {
        index < 32 && self.0 & (1 << index) != 0
    }

    pub fn with(self, index: usize) -> Self {
        Label(self.0 | (1 << index))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |i| self.contains(*i))
    }
}

/// Index of a reward-machine state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RmState(pub usize);

impl RmState {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateInfo {
    pub name: String,
    pub accepting: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T> {
    pub source: RmState,
    pub guard: GuardFormula,
    pub target: RmState,
    pub reward: T,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RmError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: undeclared proposition `{name}`")]
    UndeclaredProposition { name: String, line: usize },
    #[error("line {line}: unknown state `{name}`")]
    UnknownState { name: String, line: usize },
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("duplicate proposition `{0}`")]
    DuplicateProposition(String),
    #[error("invalid proposition name `{0}`")]
    InvalidProposition(String),
    #[error("alphabet has {0} propositions, at most {MAX_PROPOSITIONS} are supported")]
    AlphabetTooLarge(usize),
    #[error("machine declares no states")]
    NoStates,
    #[error("no initial state declared")]
    MissingInitial,
    #[error("more than one initial state declared (`{0}` and `{1}`)")]
    MultipleInitial(String, String),
    #[error("edge references state index {0} outside the machine")]
    StateOutOfRange(usize),
    #[error("guard references proposition index {0} outside the alphabet")]
    AtomOutOfRange(usize),
    #[error("reward {0} is not finite")]
    NonFiniteReward(f64),
    #[error("not deterministic: state `{state}` has {matches} satisfied edges for label {label}")]
    Nondeterministic { state: String, label: String, matches: usize },
}

/// A deterministic, complete reward machine with real-valued outputs.
#[derive(Debug, Clone)]
pub struct RewardMachine<T> {
    alphabet: Vec<String>,
    states: Vec<StateInfo>,
    initial: RmState,
    edges: Vec<Edge<T>>,
    // (state, label bits) -> (edge index); row-major by state.
    table: Vec<u32>,
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl<T: Real> RewardMachine<T> {
    pub fn new(alphabet: Vec<String>, states: Vec<StateInfo>, initial: RmState, edges: Vec<Edge<T>>) -> Result<Self, RmError> {
        if alphabet.len() > MAX_PROPOSITIONS {
            return Err(RmError::AlphabetTooLarge(alphabet.len()));
        }
        let mut seen = HashSet::new();
        for p in &alphabet {
            if !is_identifier(p) || p == "true" || p == "false" {
                return Err(RmError::InvalidProposition(p.clone()));
            }
            if !seen.insert(p.as_str()) {
                return Err(RmError::DuplicateProposition(p.clone()));
            }
        }
        if states.is_empty() {
            return Err(RmError::NoStates);
        }
        let mut seen = HashSet::new();
        for s in &states {
            if !seen.insert(s.name.as_str()) {
                return Err(RmError::DuplicateState(s.name.clone()));
            }
        }
        if initial.0 >= states.len() {
            return Err(RmError::StateOutOfRange(initial.0));
        }
        for e in &edges {
            for q in [e.source, e.target] {
                if q.0 >= states.len() {
                    return Err(RmError::StateOutOfRange(q.0));
                }
            }
            if let Some(p) = e.guard.max_atom() {
                if p >= alphabet.len() {
                    return Err(RmError::AtomOutOfRange(p));
                }
            }
            if !e.reward.is_finite() {
                return Err(RmError::NonFiniteReward(e.reward.as_f64()));
            }
        }

        let n_labels = 1usize << alphabet.len();
        let mut table = vec![u32::MAX; states.len() * n_labels];
        for (q, info) in states.iter().enumerate() {
            for bits in 0..n_labels {
                let label = Label(bits as u32);
                let mut hit = None;
                let mut matches = 0;
                for (i, e) in edges.iter().enumerate() {
                    if e.source.0 == q && e.guard.eval(label) {
                        matches += 1;
                        hit = Some(i);
                    }
                }
                if matches != 1 {
                    return Err(RmError::Nondeterministic {
                        state: info.name.clone(),
                        label: format_label(&alphabet, label),
                        matches,
                    });
                }
                table[q * n_labels + bits] = hit.unwrap() as u32;
            }
        }

        Ok(RewardMachine {
            alphabet,
            states,
            initial,
            edges,
            table,
        })
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn states(&self) -> &[StateInfo] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> RmState {
        self.initial
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn state_name(&self, q: RmState) -> &str {
        &self.states[q.0].name
    }

    pub fn state_by_name(&self, name: &str) -> Option<RmState> {
        self.states.iter().position(|s| s.name == name).map(RmState)
    }

    pub fn is_accepting(&self, q: RmState) -> bool {
        self.states[q.0].accepting
    }

    pub fn proposition_index(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|p| p == name)
    }

    /// Builds a label from proposition names; `None` if a name is not in the alphabet.
    pub fn label(&self, names: &[&str]) -> Option<Label> {
        names
            .iter()
            .try_fold(Label::EMPTY, |l, n| self.proposition_index(n).map(|i| l.with(i)))
    }

    /// Number of distinct labels, `2^|alphabet|`.
    pub fn num_labels(&self) -> usize {
        1 << self.alphabet.len()
    }

    fn edge_for(&self, q: RmState, label: Label) -> &Edge<T> {
        let n_labels = self.num_labels();
        let bits = label.0 as usize & (n_labels - 1);
        &self.edges[self.table[q.0 * n_labels + bits] as usize]
    }

    /// One transition: the unique edge of `q` whose guard `label` satisfies.
    pub fn step(&self, q: RmState, label: Label) -> (RmState, T) {
        let e = self.edge_for(q, label);
        (e.target, e.reward)
    }

    pub fn next_state(&self, q: RmState, label: Label) -> RmState {
        self.edge_for(q, label).target
    }

    /// Rewards produced from the initial state on a label sequence.
    pub fn run(&self, labels: &[Label]) -> Vec<T> {
        self.run_from(self.initial, labels).0
    }

    /// Rewards and final state starting in `q`.
    pub fn run_from(&self, q: RmState, labels: &[Label]) -> (Vec<T>, RmState) {
        let mut q = q;
        let rewards = labels
            .iter()
            .map(|&l| {
                let (next, r) = self.step(q, l);
                q = next;
                r
            })
            .collect();
        (rewards, q)
    }

    /// True if every edge leaving `q` loops back to `q`.
    pub fn is_absorbing(&self, q: RmState) -> bool {
        self.edges.iter().filter(|e| e.source == q).all(|e| e.target == q)
    }

    pub fn format_label(&self, label: Label) -> String {
        format_label(&self.alphabet, label)
    }
}

pub fn rm_step<T: Real>(m: &RewardMachine<T>, q: RmState, label: Label) -> (RmState, T) {
    m.step(q, label)
}

pub fn rm_run<T: Real>(m: &RewardMachine<T>, labels: &[Label]) -> Vec<T> {
    m.run(labels)
}

fn format_label(alphabet: &[String], label: Label) -> String {
    let names: Vec<&str> = label.iter().filter(|&i| i < alphabet.len()).map(|i| alphabet[i].as_str()).collect();
    format!("{{{}}}", names.join(","))
}

/// Prints the machine in the DSL accepted by [`parse_rm`].
impl<T: Real> fmt::Display for RewardMachine<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alphabet: {}", self.alphabet.join(", "))?;
        for (i, s) in self.states.iter().enumerate() {
            write!(f, "state {}", s.name)?;
            if i == self.initial.0 {
                write!(f, " initial")?;
            }
            if s.accepting {
                write!(f, " accepting")?;
            }
            writeln!(f)?;
        }
        for e in &self.edges {
            // `{:?}` on f64 is shortest round-trip; go through f64 for both scalar types.
            writeln!(
                f,
                "edge {} -> {} on {} reward {:?}",
                self.states[e.source.0].name,
                self.states[e.target.0].name,
                e.guard.display(&self.alphabet),
                e.reward.as_f64()
            )?;
        }
        Ok(())
    }
}
