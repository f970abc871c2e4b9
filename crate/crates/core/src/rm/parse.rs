//! Line-oriented parser for the reward-machine DSL.
//!
//! ```text
//! alphabet: d1, b, d2, g, w
//! state q0 initial
//! state q4 accepting
//! edge q0 -> q1 on d1 reward 1
//! edge q0 -> q0 on !(d1 | w) reward 0
//! ```
//!
//! Operator precedence is `!` > `&` > `|`; `#` starts a comment.

use super::{Edge, GuardFormula, RewardMachine, RmError, RmState, StateInfo};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Colon,
    Comma,
    Arrow,
    Bang,
    Amp,
    Pipe,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> RmError {
    RmError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Spanned>, RmError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let column = i + 1;
        let single = match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                continue;
            }
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '!' => Some(Tok::Bang),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, column });
            i += 1;
            continue;
        }
        if c == '-' && bytes.get(i + 1) == Some(&b'>') {
            out.push(Spanned { tok: Tok::Arrow, column });
            i += 2;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(text[start..i].to_string()),
                column,
            });
            continue;
        }
        if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            i += 1;
            while i < bytes.len() {
                let d = bytes[i];
                let exp_sign = (d == b'-' || d == b'+') && matches!(bytes[i - 1], b'e' | b'E');
                if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| syntax(line, column, format!("invalid number `{lit}`")))?;
            out.push(Spanned {
                tok: Tok::Number(value),
                column,
            });
            continue;
        }
        return Err(syntax(line, column, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Spanned],
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|s| s.column).unwrap_or(self.end_column)
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn err(&self, message: impl Into<String>) -> RmError {
        syntax(self.line, self.column(), message)
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), RmError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), RmError> {
        let column = self.column();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok((s.clone(), column))
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), RmError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{kw}`"))),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn finish(&self) -> Result<(), RmError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }
}

struct FormulaParser<'a, 'c> {
    cur: &'c mut Cursor<'a>,
    alphabet: &'c [String],
}

impl FormulaParser<'_, '_> {
    fn or(&mut self) -> Result<GuardFormula, RmError> {
        let mut lhs = self.and()?;
        while self.cur.peek() == Some(&Tok::Pipe) {
            self.cur.next();
            let rhs = self.and()?;
            lhs = GuardFormula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<GuardFormula, RmError> {
        let mut lhs = self.unary()?;
        while self.cur.peek() == Some(&Tok::Amp) {
            self.cur.next();
            let rhs = self.unary()?;
            lhs = GuardFormula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<GuardFormula, RmError> {
        let column = self.cur.column();
        match self.cur.peek() {
            Some(Tok::Bang) => {
                self.cur.next();
                Ok(GuardFormula::negate(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.cur.next();
                let inner = self.or()?;
                self.cur.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) if name == "reward" => Err(self.cur.err("expected formula")),
            Some(Tok::Ident(name)) => {
                self.cur.next();
                match name.as_str() {
                    "true" => Ok(GuardFormula::True),
                    "false" => Ok(GuardFormula::False),
                    _ => {
                        self.alphabet
                            .iter()
                            .position(|p| p == name)
                            .map(GuardFormula::Atom)
                            .ok_or_else(|| RmError::UndeclaredProposition {
                                name: name.clone(),
                                line: self.cur.line,
                            })
                    }
                }
            }
            _ => Err(syntax(self.cur.line, column, "expected formula")),
        }
    }
}

struct RawEdge {
    line: usize,
    source: (String, usize),
    target: (String, usize),
    guard: GuardFormula,
    reward: f64,
}

const RESERVED: &[&str] = &["true", "false", "reward"];

/// Parses DSL text into a validated machine.
pub fn parse_rm<T: Real>(text: &str) -> Result<RewardMachine<T>, RmError> {
    let mut alphabet: Option<Vec<String>> = None;
    let mut states: Vec<StateInfo> = Vec::new();
    let mut initial: Option<usize> = None;
    let mut raw_edges: Vec<RawEdge> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let toks = tokenize(content, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line,
            end_column: content.trim_end().len() + 1,
        };
        let (head, _) = cur.ident("declaration")?;
        match head.as_str() {
            "alphabet" => {
                if alphabet.is_some() {
                    return Err(syntax(line, 1, "alphabet declared twice"));
                }
                cur.expect(&Tok::Colon, "`:`")?;
                let mut props = vec![];
                loop {
                    let (name, column) = cur.ident("proposition name")?;
                    if RESERVED.contains(&name.as_str()) {
                        return Err(syntax(line, column, format!("`{name}` is reserved")));
                    }
                    props.push(name);
                    if cur.peek() == Some(&Tok::Comma) {
                        cur.next();
                    } else {
                        break;
                    }
                }
                cur.finish()?;
                alphabet = Some(props);
            }
            "state" | "edge" if alphabet.is_none() => {
                return Err(syntax(line, 1, "expected `alphabet` declaration first"));
            }
            "state" => {
                let (name, _) = cur.ident("state name")?;
                let mut accepting = false;
                let mut is_initial = false;
                while let Some(Tok::Ident(flag)) = cur.peek() {
                    match flag.as_str() {
                        "initial" if !is_initial => is_initial = true,
                        "accepting" if !accepting => accepting = true,
                        _ => return Err(cur.err(format!("unexpected `{flag}`"))),
                    }
                    cur.next();
                }
                cur.finish()?;
                if states.iter().any(|s| s.name == name) {
                    return Err(RmError::DuplicateState(name));
                }
                if is_initial {
                    if let Some(prev) = initial {
                        return Err(RmError::MultipleInitial(states[prev].name.clone(), name));
                    }
                    initial = Some(states.len());
                }
                states.push(StateInfo { name, accepting });
            }
            "edge" => {
                let source = cur.ident("source state")?;
                cur.expect(&Tok::Arrow, "`->`")?;
                let target = cur.ident("target state")?;
                cur.keyword("on")?;
                let guard = FormulaParser {
                    cur: &mut cur,
                    alphabet: alphabet.as_deref().unwrap_or_default(),
                }
                .or()?;
                cur.keyword("reward")?;
                let reward = match cur.next() {
                    Some(Tok::Number(v)) => *v,
                    _ => {
                        cur.pos -= 1;
                        return Err(cur.err("expected reward value"));
                    }
                };
                cur.finish()?;
                raw_edges.push(RawEdge {
                    line,
                    source,
                    target,
                    guard,
                    reward,
                });
            }
            other => {
                return Err(syntax(line, 1, format!("unknown declaration `{other}`")));
            }
        }
    }

    let alphabet = alphabet.ok_or_else(|| syntax(1, 1, "missing `alphabet` declaration"))?;
    if states.is_empty() {
        return Err(RmError::NoStates);
    }
    let initial = initial.ok_or(RmError::MissingInitial)?;
    let lookup = |name: &str, line: usize| {
        states
            .iter()
            .position(|s| s.name == name)
            .map(RmState)
            .ok_or_else(|| RmError::UnknownState {
                name: name.to_string(),
                line,
            })
    };
    let edges = raw_edges
        .into_iter()
        .map(|e| {
            Ok(Edge {
                source: lookup(&e.source.0, e.line)?,
                target: lookup(&e.target.0, e.line)?,
                guard: e.guard,
                reward: T::lit(e.reward),
            })
        })
        .collect::<Result<Vec<_>, RmError>>()?;
    RewardMachine::new(alphabet, states, RmState(initial), edges)
}
