use crate::cmdp::{BoxContextSpace, Context, LabeledCmdp};
use crate::mapping::{MappingError, RMContextMapping};
use crate::rm::{Label, RewardMachine};
use crate::scalar::Real;

use super::round_half_up;

const F1: usize = 0;
const F2: usize = 1;
const PROPS: [&str; 2] = ["f1", "f2"];
const HALF_WIDTH: i64 = 20;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Flag position for one context coordinate: nearest cell, half-way cases rounded up.
pub fn flag_cell<T: Real>(c: T) -> i64 {
    round_half_up(c).as_f64() as i64
}

/// One-dimensional line of cells `-20..=20`. The agent starts at 0 and must touch the
/// flag left of the start, then the flag right of it. Flag cells come from the context
/// `[-10, -1] x [1, 10]`.
#[derive(Debug, Clone)]
pub struct FlagCorridorEnv<T> {
    space: BoxContextSpace<T>,
    gamma: T,
}

impl<T: Real> Default for FlagCorridorEnv<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> FlagCorridorEnv<T> {
    pub fn new() -> Self {
        let space =
            BoxContextSpace::new(vec![T::lit(-10.0), T::lit(1.0)], vec![T::lit(-1.0), T::lit(10.0)]).expect("valid corridor context space");
        FlagCorridorEnv {
            space,
            gamma: T::lit(0.95),
        }
    }

    pub fn state_of(&self, position: i64) -> usize {
        (position + HALF_WIDTH) as usize
    }

    pub fn position(&self, s: usize) -> i64 {
        s as i64 - HALF_WIDTH
    }

    pub fn flags(&self, c: &Context<T>) -> (i64, i64) {
        (flag_cell(c[0]), flag_cell(c[1]))
    }

    pub fn successor(&self, s: usize, a: usize) -> usize {
        let p = self.position(s);
        let next = match a {
            LEFT if p > -HALF_WIDTH => p - 1,
            RIGHT if p < HALF_WIDTH => p + 1,
            _ => p,
        };
        self.state_of(next)
    }
}

impl<T: Real> LabeledCmdp<T> for FlagCorridorEnv<T> {
    fn context_space(&self) -> &BoxContextSpace<T> {
        &self.space
    }

    fn num_states(&self) -> usize {
        (2 * HALF_WIDTH + 1) as usize
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn propositions(&self) -> &[&'static str] {
        &PROPS
    }

    fn initial_distribution(&self, _c: &Context<T>) -> Vec<(usize, T)> {
        vec![(self.state_of(0), T::one())]
    }

    fn transition(&self, _c: &Context<T>, s: usize, a: usize) -> Vec<(usize, T)> {
        vec![(self.successor(s, a), T::one())]
    }

    fn label(&self, c: &Context<T>, s: usize, _a: usize, next: usize) -> Label {
        if next == s {
            return Label::EMPTY;
        }
        let p = self.position(next);
        let (f1, f2) = self.flags(c);
        if p == f1 {
            Label::singleton(F1)
        } else if p == f2 {
            Label::singleton(F2)
        } else {
            Label::EMPTY
        }
    }

    fn horizon(&self) -> usize {
        60
    }

    fn discount(&self) -> T {
        self.gamma
    }

    fn terminal_rm_states(&self) -> &[&'static str] {
        &["q2"]
    }

    fn context_cell(&self, c: &Context<T>) -> Option<Vec<usize>> {
        let (f1, f2) = self.flags(c);
        Some(vec![(f1 + 10) as usize, (f2 - 1) as usize])
    }
}

pub(super) const DECLARED: &[(&str, &str, &[usize])] = &[
    ("q0", "q1", &[1]),
    ("q0", "q0", &[1]),
    ("q1", "q2", &[2]),
    ("q1", "q1", &[2]),
    ("q2", "q2", &[]),
];

pub(super) fn declared_mapping<T: Real>(rm: &RewardMachine<T>) -> Result<RMContextMapping, MappingError> {
    RMContextMapping::from_named(rm, 2, DECLARED)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_and_labels() {
        let env = FlagCorridorEnv::<f64>::new();
        let c = Context::new(vec![-3.4, 5.5]);
        assert_eq!(env.flags(&c), (-3, 6));
        let s = env.state_of(-2);
        assert_eq!(env.label(&c, s, LEFT, env.successor(s, LEFT)), Label::singleton(F1));
        let s = env.state_of(5);
        assert_eq!(env.label(&c, s, RIGHT, env.successor(s, RIGHT)), Label::singleton(F2));
        let s = env.state_of(0);
        assert_eq!(env.label(&c, s, RIGHT, env.successor(s, RIGHT)), Label::EMPTY);
    }

    #[test]
    fn boundary_is_silent() {
        let env = FlagCorridorEnv::<f64>::new();
        let edge = env.state_of(-20);
        assert_eq!(env.successor(edge, LEFT), edge);
        let c = Context::new(vec![-1.0, 1.0]);
        assert_eq!(env.label(&c, edge, LEFT, edge), Label::EMPTY);
    }
}
