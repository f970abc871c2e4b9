use crate::cmdp::{BoxContextSpace, Context, LabeledCmdp};
use crate::mapping::{MappingError, RMContextMapping};
use crate::rm::{Label, RewardMachine};
use crate::scalar::Real;

use super::round_half_up;

const D1: usize = 0;
const BOX: usize = 1;
const D2: usize = 2;
const GOAL: usize = 3;
const WALL: usize = 4;
const PROPS: [&str; 5] = ["d1", "b", "d2", "g", "w"];

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

/// Grid geometry. Cells are `(row, col)`; `UP` increases the row.
///
/// The agent starts in the first room (rows below `wall_rows[0]`), passes door 1 on
/// the first wall row, collects the key in the middle room, passes door 2 on the
/// second wall row and reaches the goal in the last room.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoDoorLayout {
    pub size: usize,
    pub wall_rows: [usize; 2],
    pub box_cell: (usize, usize),
    pub goal: (usize, usize),
    pub start: (usize, usize),
    pub horizon: usize,
}

impl TwoDoorLayout {
    /// 40x40 grid.
    pub fn full() -> Self {
        TwoDoorLayout {
            size: 40,
            wall_rows: [13, 26],
            box_cell: (20, 5),
            goal: (39, 20),
            start: (0, 20),
            horizon: 200,
        }
    }

    /// 8x8 grid whose middle room is a single-row corridor with the key at its
    /// left end, so the route to the key and back overlaps.
    pub fn reduced() -> Self {
        TwoDoorLayout {
            size: 8,
            wall_rows: [2, 4],
            box_cell: (3, 0),
            goal: (7, 4),
            start: (0, 4),
            horizon: 60,
        }
    }

    fn validate(&self) {
        let [w1, w2] = self.wall_rows;
        assert!(w1 > 0 && w1 + 1 < w2 && w2 + 1 < self.size, "rooms must be non-empty");
        for (r, c) in [self.box_cell, self.goal, self.start] {
            assert!(r < self.size && c < self.size, "cell outside the grid");
            assert!(r != w1 && r != w2, "special cell on a wall row");
        }
        assert!(self.start.0 < w1 && w1 < self.box_cell.0 && self.box_cell.0 < w2 && w2 < self.goal.0);
    }
}

/// Door column for one context coordinate in `[-4, 4]`.
pub fn door_column<T: Real>(c: T, size: usize) -> usize {
    let max = T::lit((size - 1) as f64);
    let col = round_half_up((c + T::lit(4.0)) / T::lit(8.0) * max);
    col.max(T::zero()).min(max).as_f64() as usize
}

/// Grid world with two walls whose door positions are set by the context.
///
/// Stepping onto a wall cell is allowed and labeled `w`; the reward machine turns
/// it into failure. Doors are one-way: a `DOWN` move from a wall-row cell is
/// blocked. Moves that leave the agent in place emit the empty label.
#[derive(Debug, Clone)]
pub struct TwoDoorEnv<T> {
    layout: TwoDoorLayout,
    space: BoxContextSpace<T>,
    gamma: T,
}

impl<T: Real> TwoDoorEnv<T> {
    pub fn new(layout: TwoDoorLayout) -> Self {
        layout.validate();
        let space = BoxContextSpace::new(vec![T::lit(-4.0); 2], vec![T::lit(4.0); 2]).expect("valid two-door context space");
        TwoDoorEnv {
            layout,
            space,
            gamma: T::lit(0.95),
        }
    }

    pub fn layout(&self) -> &TwoDoorLayout {
        &self.layout
    }

    pub fn cell(&self, row: usize, col: usize) -> usize {
        row * self.layout.size + col
    }

    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s / self.layout.size, s % self.layout.size)
    }

    pub fn doors(&self, c: &Context<T>) -> (usize, usize) {
        (door_column(c[0], self.layout.size), door_column(c[1], self.layout.size))
    }

    fn is_wall_row(&self, row: usize) -> bool {
        self.layout.wall_rows.contains(&row)
    }

    /// Deterministic successor of `s` under `a`.
    pub fn successor(&self, s: usize, a: usize) -> usize {
        let (r, c) = self.coords(s);
        let n = self.layout.size;
        let (nr, nc) = match a {
            UP if r + 1 < n => (r + 1, c),
            DOWN if r > 0 && !self.is_wall_row(r) => (r - 1, c),
            LEFT if c > 0 => (r, c - 1),
            RIGHT if c + 1 < n => (r, c + 1),
            _ => (r, c),
        };
        self.cell(nr, nc)
    }
}

impl<T: Real> LabeledCmdp<T> for TwoDoorEnv<T> {
    fn context_space(&self) -> &BoxContextSpace<T> {
        &self.space
    }

    fn num_states(&self) -> usize {
        self.layout.size * self.layout.size
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn propositions(&self) -> &[&'static str] {
        &PROPS
    }

    fn initial_distribution(&self, _c: &Context<T>) -> Vec<(usize, T)> {
        vec![(self.cell(self.layout.start.0, self.layout.start.1), T::one())]
    }

    fn transition(&self, _c: &Context<T>, s: usize, a: usize) -> Vec<(usize, T)> {
        vec![(self.successor(s, a), T::one())]
    }

    fn label(&self, c: &Context<T>, s: usize, _a: usize, next: usize) -> Label {
        if next == s {
            return Label::EMPTY;
        }
        let (row, col) = self.coords(next);
        let (door1, door2) = self.doors(c);
        let [w1, w2] = self.layout.wall_rows;
        let prop = if row == w1 {
            if col == door1 {
                D1
            } else {
                WALL
            }
        } else if row == w2 {
            if col == door2 {
                D2
            } else {
                WALL
            }
        } else if (row, col) == self.layout.box_cell {
            BOX
        } else if (row, col) == self.layout.goal {
            GOAL
        } else {
            return Label::EMPTY;
        };
        Label::singleton(prop)
    }

    fn horizon(&self) -> usize {
        self.layout.horizon
    }

    fn discount(&self) -> T {
        self.gamma
    }

    fn terminal_rm_states(&self) -> &[&'static str] {
        &["q4", "q5"]
    }

    fn context_cell(&self, c: &Context<T>) -> Option<Vec<usize>> {
        let (d1, d2) = self.doors(c);
        Some(vec![d1, d2])
    }
}

pub(super) const DECLARED: &[(&str, &str, &[usize])] = &[
    ("q0", "q1", &[1]),
    ("q0", "q5", &[1]),
    ("q0", "q0", &[]),
    ("q1", "q1", &[1]),
    ("q1", "q2", &[]),
    ("q1", "q5", &[1]),
    ("q2", "q3", &[2]),
    ("q2", "q5", &[1, 2]),
    ("q2", "q2", &[1]),
    ("q3", "q4", &[]),
    ("q3", "q5", &[2]),
    ("q3", "q3", &[2]),
    ("q4", "q4", &[]),
    ("q5", "q5", &[]),
];

pub(super) fn declared_mapping<T: Real>(rm: &RewardMachine<T>) -> Result<RMContextMapping, MappingError> {
    RMContextMapping::from_named(rm, 2, DECLARED)
}
