//! Text syntax for properties.
//!
//! ```text
//! formula := disj ('->' formula)?
//! disj    := conj ('|' conj)*
//! conj    := until ('&' until)*
//! until   := unary (('U' | 'until') interval? until)?
//! unary   := '!' unary | ('G' | 'always') interval? unary
//!          | ('F' | 'eventually') interval? unary | ('X' | 'next') unary | primary
//! primary := 'true' | 'false' | expr cmp expr | predicate | '(' formula ')'
//! interval:= '[' number ',' (number | 'inf') ']'          (seconds)
//! ```
//!
//! `expr` is a linear combination of numeric catalog variables and enum literals.
//! `predicate` is a flag variable (`inJunction`), `stopped`, or a distance predicate
//! such as `NPCAhead(10)`.

use super::ast::{Cmp, Formula, Interval, LinExpr};
use super::SpecError;
use crate::trace::{enum_literal, SignalVar, VarKind};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Bang,
    And,
    Or,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Cmp(Cmp),
}

fn describe(t: Option<&Tok>) -> String {
    match t {
        None => "end of input".into(),
        Some(Tok::Ident(s)) => format!("`{s}`"),
        Some(Tok::Num(n)) => format!("number {n}"),
        Some(other) => format!("{other:?}"),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SpecError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let two = |s: &str| text[i..].starts_with(s);
        let tok = match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            ',' => Tok::Comma,
            '+' => Tok::Plus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '-' if two("->") => {
                i += 1;
                Tok::Arrow
            }
            '-' => Tok::Minus,
            '&' => {
                if two("&&") {
                    i += 1;
                }
                Tok::And
            }
            '|' => {
                if two("||") {
                    i += 1;
                }
                Tok::Or
            }
            '!' if two("!=") => {
                i += 1;
                Tok::Cmp(Cmp::Ne)
            }
            '!' => Tok::Bang,
            '<' if two("<=") => {
                i += 1;
                Tok::Cmp(Cmp::Le)
            }
            '<' => Tok::Cmp(Cmp::Lt),
            '>' if two(">=") => {
                i += 1;
                Tok::Cmp(Cmp::Ge)
            }
            '>' => Tok::Cmp(Cmp::Gt),
            '=' if two("==") => {
                i += 1;
                Tok::Cmp(Cmp::Eq)
            }
            '=' => Tok::Cmp(Cmp::Eq),
            _ if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let lit = &text[i..j];
                let v: f64 = lit.parse().map_err(|_| SpecError::Syntax {
                    pos: start,
                    msg: format!("bad number `{lit}`"),
                })?;
                i = j;
                out.push((Tok::Num(v), start));
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = text[i..j].to_string();
                i = j;
                out.push((Tok::Ident(word), start));
                continue;
            }
            _ => {
                return Err(SpecError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        };
        i += 1;
        out.push((tok, start));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

type PResult<T> = Result<T, SpecError>;

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "G" | "F" | "U" | "X" | "always" | "eventually" | "until" | "next" | "true" | "false"
    )
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(SpecError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.err(format!("expected {t:?}, found {}", describe(self.peek())))
        }
    }

    fn eat_ident(&mut self, names: &[&str]) -> bool {
        if let Some(Tok::Ident(s)) = self.peek() {
            if names.contains(&s.as_str()) {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn number(&mut self) -> PResult<f64> {
        let neg = self.eat(&Tok::Minus);
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            other => self.err(format!("expected number, found {}", describe(other))),
        }
    }

    fn interval(&mut self) -> PResult<Interval> {
        if self.peek() != Some(&Tok::LBrack) {
            return Ok(Interval::UNBOUNDED);
        }
        let at = self.offset();
        self.pos += 1;
        let lo = self.number()?;
        self.expect(Tok::Comma)?;
        let hi = if self.eat_ident(&["inf"]) {
            f64::INFINITY
        } else {
            self.number()?
        };
        self.expect(Tok::RBrack)?;
        Interval::new(lo, hi).ok_or(SpecError::MalformedInterval { pos: at, lo, hi })
    }

    fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.disj()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> PResult<Formula> {
        let mut f = self.conj()?;
        while self.eat(&Tok::Or) {
            f = Formula::or(f, self.conj()?);
        }
        Ok(f)
    }

    fn conj(&mut self) -> PResult<Formula> {
        let mut f = self.until()?;
        while self.eat(&Tok::And) {
            f = Formula::and(f, self.until()?);
        }
        Ok(f)
    }

    fn until(&mut self) -> PResult<Formula> {
        let lhs = self.unary()?;
        if self.eat_ident(&["U", "until"]) {
            let i = self.interval()?;
            let rhs = self.until()?;
            return Ok(Formula::until(i, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Formula> {
        if self.eat(&Tok::Bang) {
            return Ok(Formula::not(self.unary()?));
        }
        if self.eat_ident(&["G", "always"]) {
            let i = self.interval()?;
            return Ok(Formula::always(i, self.unary()?));
        }
        if self.eat_ident(&["F", "eventually"]) {
            let i = self.interval()?;
            return Ok(Formula::eventually(i, self.unary()?));
        }
        if self.eat_ident(&["X", "next"]) {
            return Ok(Formula::next(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Formula> {
        if self.eat_ident(&["true"]) {
            return Ok(Formula::Const(true));
        }
        if self.eat_ident(&["false"]) {
            return Ok(Formula::Const(false));
        }
        let save = self.pos;
        let cmp_err = match self.comparison() {
            Ok(f) => return Ok(f),
            Err(e) => e,
        };
        let cmp_reach = self.pos;
        self.pos = save;
        let alt = if self.eat(&Tok::LParen) {
            self.formula().and_then(|f| self.expect(Tok::RParen).map(|_| f))
        } else {
            self.predicate()
        };
        match alt {
            Ok(f) => Ok(f),
            // Report whichever reading got further into the input.
            Err(e) if e.pos() >= cmp_err.pos().max(cmp_reach.min(self.toks.len())) => Err(e),
            Err(e) => match (&e, &cmp_err) {
                (SpecError::UnknownVariable { .. }, _) => Err(e),
                _ => Err(cmp_err),
            },
        }
    }

    fn predicate(&mut self) -> PResult<Formula> {
        let at = self.offset();
        let name = match self.peek() {
            Some(Tok::Ident(s)) if !is_keyword(s) => s.clone(),
            other => return self.err(format!("expected a formula, found {}", describe(other))),
        };
        self.pos += 1;
        let arg = if self.eat(&Tok::LParen) {
            let v = self.number()?;
            self.expect(Tok::RParen)?;
            Some(v)
        } else {
            None
        };
        let var = SignalVar::new(&name, arg).map_err(|e| SpecError::UnknownVariable {
            pos: at,
            msg: e.to_string(),
        })?;
        match var.kind() {
            VarKind::Within(s) => Ok(Formula::within(s, arg.unwrap_or(0.0))),
            VarKind::Flag(s) => Ok(Formula::flag(s)),
            VarKind::Stopped => Ok(Formula::stopped()),
            VarKind::Numeric(_) => Err(SpecError::Syntax {
                pos: at,
                msg: format!("numeric variable `{name}` must be compared with a value"),
            }),
        }
    }

    fn comparison(&mut self) -> PResult<Formula> {
        let lhs = self.expr()?;
        let cmp = match self.peek() {
            Some(Tok::Cmp(c)) => *c,
            other => return self.err(format!("expected comparison, found {}", describe(other))),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        Ok(Formula::prop(lhs.minus(rhs), cmp))
    }

    fn expr(&mut self) -> PResult<LinExpr> {
        let mut e = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                e = e.plus(self.term()?);
            } else if self.eat(&Tok::Minus) {
                e = e.minus(self.term()?);
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> PResult<LinExpr> {
        let mut e = self.factor()?;
        loop {
            if self.eat(&Tok::Star) {
                let at = self.offset();
                let rhs = self.factor()?;
                e = match (e.is_constant(), rhs.is_constant()) {
                    (true, _) => rhs.scaled(e.constant_term()),
                    (_, true) => e.scaled(rhs.constant_term()),
                    _ => {
                        return Err(SpecError::Syntax {
                            pos: at,
                            msg: "product of two variables is not linear".into(),
                        })
                    }
                };
            } else if self.eat(&Tok::Slash) {
                let at = self.offset();
                let rhs = self.factor()?;
                if !rhs.is_constant() || rhs.constant_term() == 0.0 {
                    return Err(SpecError::Syntax {
                        pos: at,
                        msg: "division only by a non-zero constant".into(),
                    });
                }
                e = e.scaled(1.0 / rhs.constant_term());
            } else {
                return Ok(e);
            }
        }
    }

    fn factor(&mut self) -> PResult<LinExpr> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(self.factor()?.scaled(-1.0))
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(LinExpr::constant(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) if !is_keyword(&name) => {
                self.pos += 1;
                if let Some(v) = enum_literal(&name) {
                    return Ok(LinExpr::constant(v));
                }
                if self.peek() == Some(&Tok::LParen) {
                    return Err(SpecError::Syntax {
                        pos: at,
                        msg: format!("`{name}(..)` is a predicate, not a number"),
                    });
                }
                let var = SignalVar::new(&name, None).map_err(|e| SpecError::UnknownVariable {
                    pos: at,
                    msg: e.to_string(),
                })?;
                match var.kind() {
                    VarKind::Numeric(s) | VarKind::Flag(s) => Ok(LinExpr::signal(s)),
                    _ => Err(SpecError::Syntax {
                        pos: at,
                        msg: format!("`{name}` is a predicate, not a number"),
                    }),
                }
            }
            other => self.err(format!("expected expression, found {}", describe(other.as_ref()))),
        }
    }
}

pub fn parse_spec(text: &str) -> Result<Formula, SpecError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return p.err(format!("unexpected trailing {}", describe(p.peek())));
    }
    Ok(f)
}

/// One `name:` / `stl:` stanza from a spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSpec {
    pub name: String,
    pub text: String,
    pub formula: Formula,
}

/// Parses a spec file: stanzas of `name: <id>` followed by `stl: <formula>`.
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_spec_file(text: &str) -> Result<Vec<NamedSpec>, SpecError> {
    let mut out = Vec::new();
    let mut pending: Option<(String, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("name:") {
            if let Some((name, l)) = pending.take() {
                return Err(SpecError::File {
                    line: l,
                    msg: format!("spec `{name}` has no `stl:` line"),
                });
            }
            let name = rest.trim();
            if name.is_empty() {
                return Err(SpecError::File {
                    line: lineno,
                    msg: "empty spec name".into(),
                });
            }
            pending = Some((name.to_string(), lineno));
        } else if let Some(rest) = line.strip_prefix("stl:") {
            let (name, _) = pending.take().ok_or(SpecError::File {
                line: lineno,
                msg: "`stl:` without a preceding `name:`".into(),
            })?;
            let formula = parse_spec(rest.trim()).map_err(|e| SpecError::File {
                line: lineno,
                msg: e.to_string(),
            })?;
            out.push(NamedSpec {
                name,
                text: rest.trim().to_string(),
                formula,
            });
        } else {
            return Err(SpecError::File {
                line: lineno,
                msg: format!("expected `name:` or `stl:`, found `{line}`"),
            });
        }
    }
    if let Some((name, l)) = pending {
        return Err(SpecError::File {
            line: l,
            msg: format!("spec `{name}` has no `stl:` line"),
        });
    }
    Ok(out)
}
