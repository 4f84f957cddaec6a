use thiserror::Error;

use super::{Arg, Call, Condition, MuDriveProgram, Rule};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Bang,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: [&str; 6] = ["rule", "trigger", "condition", "then", "until", "end"];

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            _ if c.is_whitespace() => advance(1, &mut i),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' | ')' | ',' | '!' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Bang,
                };
                advance(1, &mut i);
                out.push(Spanned { tok, line: l0, col: c0 });
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None | Some('\n') => {
                            return Err(err(l0, c0, "unterminated string literal".into()))
                        }
                        Some('"') => break,
                        Some('\\') => {
                            let esc = match chars.get(j + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some('t') => '\t',
                                other => {
                                    return Err(err(
                                        l0,
                                        c0 + (j - i),
                                        format!("bad escape {other:?}"),
                                    ))
                                }
                            };
                            s.push(esc);
                            j += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                advance(j + 1 - i, &mut i);
                out.push(Spanned {
                    tok: Tok::Str(s),
                    line: l0,
                    col: c0,
                });
            }
            _ if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut j = i + 1;
                while j < chars.len()
                    && (chars[j].is_ascii_digit()
                        || chars[j] == '.'
                        || chars[j] == 'e'
                        || chars[j] == 'E'
                        || ((chars[j] == '-' || chars[j] == '+')
                            && matches!(chars[j - 1], 'e' | 'E')))
                {
                    j += 1;
                }
                let lit: String = chars[i..j].iter().collect();
                let v: f64 = lit
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| err(l0, c0, format!("bad number `{lit}`")))?;
                advance(j - i, &mut i);
                out.push(Spanned {
                    tok: Tok::Num(v),
                    line: l0,
                    col: c0,
                });
            }
            _ if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                advance(j - i, &mut i);
                out.push(Spanned {
                    tok: Tok::Ident(word),
                    line: l0,
                    col: c0,
                });
            }
            _ => return Err(err(l0, c0, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map_or(self.eof, |s| (s.line, s.col));
        Err(ParseError {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Num(v)) => format!("number {v}"),
            Some(Tok::Str(s)) => format!("string {s:?}"),
            Some(t) => format!("{t:?}"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.found()))
        }
    }

    fn program(&mut self) -> Result<MuDriveProgram, ParseError> {
        let mut rules = Vec::new();
        while self.peek().is_some() {
            rules.push(self.rule()?);
        }
        if rules.is_empty() {
            return self.err("a program needs at least one rule");
        }
        Ok(MuDriveProgram { rules })
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        self.keyword("rule")?;
        let name = match self.peek() {
            Some(Tok::Str(s)) => s.clone(),
            _ => return self.err(format!("expected rule name string, found {}", self.found())),
        };
        self.pos += 1;
        self.keyword("trigger")?;
        let trigger = self.call()?;
        let mut conditions = Vec::new();
        if self.is_kw("condition") {
            self.pos += 1;
            loop {
                let negated = self.peek() == Some(&Tok::Bang);
                if negated {
                    self.pos += 1;
                }
                conditions.push(Condition {
                    negated,
                    call: self.call()?,
                });
                if self.is_kw("then") {
                    break;
                }
            }
        }
        self.keyword("then")?;
        let mut actions = Vec::new();
        while !(self.is_kw("until") || self.is_kw("end") || self.peek().is_none()) {
            actions.push(self.call()?);
        }
        if actions.is_empty() {
            return self.err("a rule needs at least one action after `then`");
        }
        let mut until = None;
        if self.is_kw("until") {
            self.pos += 1;
            until = Some(self.call()?);
            if self.is_kw("until") {
                return self.err("a rule may have at most one `until`");
            }
        }
        self.keyword("end")?;
        Ok(Rule {
            name,
            trigger,
            conditions,
            actions,
            until,
        })
    }

    fn call(&mut self) -> Result<Call, ParseError> {
        let name = match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => s.clone(),
            _ => return self.err(format!("expected a name, found {}", self.found())),
        };
        self.pos += 1;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    args.push(self.arg()?);
                    match self.peek() {
                        Some(Tok::Comma) => self.pos += 1,
                        Some(Tok::RParen) => break,
                        _ => return self.err(format!("expected `,` or `)`, found {}", self.found())),
                    }
                }
            }
            self.pos += 1;
        }
        Ok(Call { name, args })
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        let a = match self.peek() {
            Some(Tok::Num(v)) => Arg::Num(*v),
            Some(Tok::Str(s)) => Arg::Str(s.clone()),
            Some(Tok::Ident(s)) if s == "true" => Arg::Bool(true),
            Some(Tok::Ident(s)) if s == "false" => Arg::Bool(false),
            Some(Tok::Ident(s)) => Arg::Ident(s.clone()),
            _ => return self.err(format!("expected an argument, found {}", self.found())),
        };
        self.pos += 1;
        Ok(a)
    }
}

pub fn parse_program(text: &str) -> Result<MuDriveProgram, ParseError> {
    let toks = lex(text)?;
    let lines = text.split('\n').count();
    let last_len = text.rsplit('\n').next().map_or(0, |l| l.chars().count());
    let mut p = Parser {
        toks,
        pos: 0,
        eof: (lines, last_len + 1),
    };
    p.program()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG5: &str = r#"rule "Drive slowly through a junction when there is an obstacle."
trigger
    entering_junction
condition
    obstacle_distance_leq(20)
    is_traffic_light(green)
then
    cruise_speed(30)
until
    exiting_junction
end
"#;

    #[test]
    fn junction_rule() {
        let p = parse_program(FIG5).unwrap();
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        assert_eq!(r.trigger, Call::bare("entering_junction"));
        assert_eq!(
            r.conditions,
            vec![
                Condition {
                    negated: false,
                    call: Call::new("obstacle_distance_leq", vec![Arg::Num(20.0)])
                },
                Condition {
                    negated: false,
                    call: Call::new("is_traffic_light", vec![Arg::Ident("green".into())])
                },
            ]
        );
        assert_eq!(r.actions, vec![Call::new("cruise_speed", vec![Arg::Num(30.0)])]);
        assert_eq!(r.until, Some(Call::bare("exiting_junction")));
        assert_eq!(super::super::pretty_print(&p), FIG5);
    }

    #[test]
    fn negation_and_args() {
        let p = parse_program(
            "rule \"x\" trigger always condition !in_junction speed_gt(-1.5e1) then enable_lane_borrow(true) f(a, \"s\") end",
        )
        .unwrap();
        let r = &p.rules[0];
        assert!(r.conditions[0].negated);
        assert_eq!(r.conditions[1].call.args, vec![Arg::Num(-15.0)]);
        assert_eq!(r.actions[1].args, vec![Arg::Ident("a".into()), Arg::Str("s".into())]);
    }

    #[test]
    fn structural_errors() {
        assert!(parse_program("").is_err());
        assert!(parse_program("  # only a comment\n").is_err());
        let e = parse_program("rule \"x\"\ntrigger always\nthen\nend\n").unwrap_err();
        assert_eq!((e.line, e.col), (4, 1));
        let e = parse_program("rule \"x\" trigger always then a until b until c end").unwrap_err();
        assert!(e.msg.contains("at most one"));
        let e = parse_program("rule \"x\" trigger always then a(1,) end").unwrap_err();
        assert!(e.msg.contains("argument"));
        assert!(parse_program("rule \"x\" trigger always then a").is_err());
        assert!(parse_program("rule x trigger always then a end").is_err());
        let e = parse_program("rule \"x\"\n  trigger @").unwrap_err();
        assert_eq!((e.line, e.col), (2, 11));
    }
}
