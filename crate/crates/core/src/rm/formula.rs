use std::fmt;

use super::Label;

/// Propositional guard over the machine alphabet. Atoms hold alphabet indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardFormula {
    True,
    False,
    Atom(usize),
    Not(Box<GuardFormula>),
    And(Box<GuardFormula>, Box<GuardFormula>),
    Or(Box<GuardFormula>, Box<GuardFormula>),
}

impl GuardFormula {
    pub fn negate(g: GuardFormula) -> Self {
        GuardFormula::Not(Box::new(g))
    }

    pub fn and(a: GuardFormula, b: GuardFormula) -> Self {
        GuardFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: GuardFormula, b: GuardFormula) -> Self {
        GuardFormula::Or(Box::new(a), Box::new(b))
    }

    /// Standard propositional semantics with `Atom(p)` true iff `p` is in the label.
    pub fn eval(&self, label: Label) -> bool {
        match self {
            GuardFormula::True => true,
            GuardFormula::False => false,
            GuardFormula::Atom(p) => label.contains(*p),
            GuardFormula::Not(g) => !g.eval(label),
            GuardFormula::And(a, b) => a.eval(label) && b.eval(label),
            GuardFormula::Or(a, b) => a.eval(label) || b.eval(label),
        }
    }

    /// Largest atom index referenced, if any.
    pub fn max_atom(&self) -> Option<usize> {
        match self {
            GuardFormula::True | GuardFormula::False => None,
            GuardFormula::Atom(p) => Some(*p),
            GuardFormula::Not(g) => g.max_atom(),
            GuardFormula::And(a, b) | GuardFormula::Or(a, b) => match (a.max_atom(), b.max_atom()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            GuardFormula::Or(..) => 1,
            GuardFormula::And(..) => 2,
            GuardFormula::Not(_) => 3,
            _ => 4,
        }
    }

    /// Renders the formula in DSL syntax using names from `alphabet`.
    pub fn display<'a>(&'a self, alphabet: &'a [String]) -> FormulaDisplay<'a> {
        FormulaDisplay { formula: self, alphabet }
    }
}

pub fn eval_guard(g: &GuardFormula, label: Label) -> bool {
    g.eval(label)
}

pub struct FormulaDisplay<'a> {
    formula: &'a GuardFormula,
    alphabet: &'a [String],
}

impl FormulaDisplay<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, g: &GuardFormula, min_prec: u8) -> fmt::Result {
        let paren = g.precedence() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match g {
            GuardFormula::True => f.write_str("true")?,
            GuardFormula::False => f.write_str("false")?,
            GuardFormula::Atom(p) => f.write_str(&self.alphabet[*p])?,
            GuardFormula::Not(inner) => {
                f.write_str("!")?;
                self.write(f, inner, 3)?;
            }
            GuardFormula::And(a, b) => {
                self.write(f, a, 2)?;
                f.write_str(" & ")?;
                self.write(f, b, 3)?;
            }
            GuardFormula::Or(a, b) => {
                self.write(f, a, 1)?;
                f.write_str(" | ")?;
                self.write(f, b, 2)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.formula, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const D1: usize = 0;
    const W: usize = 1;
    const D2: usize = 2;
    const B: usize = 3;

    fn atom(p: usize) -> GuardFormula {
        GuardFormula::Atom(p)
    }

    #[test]
    fn disjunction_with_wall() {
        let g = GuardFormula::or(atom(W), atom(D2));
        assert!(g.eval(Label::singleton(W)));
        assert!(g.eval(Label::singleton(D2)));
        assert!(!g.eval(Label::EMPTY));
    }

    #[test]
    fn constant_true_on_empty_label() {
        assert!(GuardFormula::True.eval(Label::EMPTY));
        assert!(!GuardFormula::False.eval(Label::EMPTY));
    }

    #[test]
    fn negated_disjunction_truth_table() {
        let g = GuardFormula::negate(GuardFormula::or(atom(D1), atom(W)));
        // Truth table over {d1, w}; other atoms are irrelevant.
        for bits in 0u32..16 {
            let label = Label::from_bits(bits);
            let expected = !(bits & 1 != 0 || bits & 2 != 0);
            assert_eq!(g.eval(label), expected, "bits {bits:04b}");
        }
        assert!(g.eval(Label::singleton(B)));
    }

    #[test]
    fn display_respects_precedence() {
        let names: Vec<String> = ["d1", "w", "d2", "b"].iter().map(|s| s.to_string()).collect();
        let g = GuardFormula::negate(GuardFormula::or(atom(B), GuardFormula::or(atom(W), atom(D2))));
        assert_eq!(g.display(&names).to_string(), "!(b | (w | d2))");
        let g = GuardFormula::or(GuardFormula::and(atom(D1), atom(W)), GuardFormula::negate(atom(B)));
        assert_eq!(g.display(&names).to_string(), "d1 & w | !b");
    }
}
