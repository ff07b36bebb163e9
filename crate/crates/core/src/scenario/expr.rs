//! Small expression language for stopping rules, events and maps.
//!
//! ```text
//! rule  := at(t) | hit_above(l) cap c | hit_below(l) cap c
//!        | first_drop(rule, eps) cap c | first_above(rule, l) cap c
//!        | restricted(rule, event, t) | earliest(rule, rule)
//!        | prefix_set([v v .. | v v ..]) cap c | NAME
//! event := all | none | below_at(rule, k) | above_at(rule, k)
//!        | later(rule, rule) | and(event, event) | or(event, event)
//!        | not(event) | prefix_in(rule, [..]) | NAME
//! map   := affine(a, b) | exp | log | power(p) | neg_power(q)
//!        | piecewise(x:y x:y ..) | piecewise_strict(x:y x:y ..)
//! ```
//!
//! Any rule may carry a trailing `cap c`, which overrides its cap.

use crate::scalar::{parse_scalar, Scalar};
use crate::stopping::{EventPredicate, StoppingRule};
use crate::transforms::MonotoneMap;

pub type ExprResult<T> = std::result::Result<T, String>;

/// Named rules and events visible to an expression.
pub struct Defs<'a, T> {
    pub rules: &'a [(String, StoppingRule<T>)],
    pub events: &'a [(String, EventPredicate<T>)],
}

impl<T> Defs<'_, T> {
    pub fn empty() -> Defs<'static, T> {
        Defs {
            rules: &[],
            events: &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Punct(char),
}

fn tokenize(text: &str) -> ExprResult<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
        } else if "()[],|:".contains(c) {
            out.push((Tok::Punct(c), start));
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == '/' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push((Tok::Num(chars[start..i].iter().collect()), start));
        } else {
            return Err(format!("unexpected character '{c}' at column {}", start + 1));
        }
    }
    Ok(out)
}

struct Parser<'a, T> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    defs: &'a Defs<'a, T>,
    len: usize,
}

impl<'a, T: Scalar> Parser<'a, T> {
    fn new(text: &str, defs: &'a Defs<'a, T>) -> ExprResult<Self> {
        Ok(Self {
            toks: tokenize(text)?,
            pos: 0,
            defs,
            len: text.chars().count(),
        })
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |t| t.1) + 1
    }

    fn fail<X>(&self, what: &str) -> ExprResult<X> {
        Err(format!("{what} at column {}", self.column()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn punct(&mut self, c: char) -> ExprResult<()> {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(&format!("expected '{c}'"))
        }
    }

    fn try_punct(&mut self, c: char) -> bool {
        let hit = self.peek() == Some(&Tok::Punct(c));
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn ident(&mut self) -> ExprResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail("expected a name"),
        }
    }

    fn number(&mut self) -> ExprResult<T> {
        match self.peek() {
            Some(Tok::Num(s)) => {
                let v = parse_scalar(s).ok_or_else(|| format!("bad number '{s}' at column {}", self.column()))?;
                self.pos += 1;
                Ok(v)
            }
            _ => self.fail("expected a number"),
        }
    }

    fn finish(&self) -> ExprResult<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            self.fail("unexpected trailing input")
        }
    }

    fn cap(&mut self) -> ExprResult<Option<T>> {
        if self.peek() == Some(&Tok::Ident("cap".into())) {
            self.pos += 1;
            Ok(Some(self.number()?))
        } else {
            Ok(None)
        }
    }

    fn required_cap(&mut self, name: &str) -> ExprResult<T> {
        self.cap()?
            .ok_or_else(|| format!("{name} needs 'cap <time>' at column {}", self.column()))
    }

    fn prefixes(&mut self) -> ExprResult<Vec<Vec<T>>> {
        self.punct('[')?;
        let mut out = vec![Vec::new()];
        loop {
            if self.try_punct(']') {
                break;
            }
            if self.try_punct('|') {
                out.push(Vec::new());
                continue;
            }
            let v = self.number()?;
            out.last_mut().expect("non-empty").push(v);
        }
        if out.iter().any(Vec::is_empty) {
            return self.fail("empty prefix");
        }
        Ok(out)
    }

    fn rule(&mut self) -> ExprResult<StoppingRule<T>> {
        let name = self.ident()?;
        if self.peek() != Some(&Tok::Punct('(')) {
            let found = self.defs.rules.iter().rev().find(|(n, _)| *n == name);
            let rule = match found {
                Some((_, r)) => r.clone(),
                None => return Err(format!("unknown rule '{name}' before column {}", self.column())),
            };
            return Ok(match self.cap()? {
                Some(c) => rule.with_cap(c),
                None => rule,
            });
        }
        self.punct('(')?;
        let rule = match name.as_str() {
            "at" => {
                let t = self.number()?;
                self.punct(')')?;
                StoppingRule::deterministic(t)
            }
            "hit_above" | "hit_below" => {
                let l = self.number()?;
                self.punct(')')?;
                let cap = self.required_cap(&name)?;
                if name == "hit_above" {
                    StoppingRule::hit_above(l, cap)
                } else {
                    StoppingRule::hit_below(l, cap)
                }
            }
            "first_drop" | "first_above" => {
                let base = self.rule()?;
                self.punct(',')?;
                let x = self.number()?;
                self.punct(')')?;
                let cap = self.required_cap(&name)?;
                if name == "first_drop" {
                    StoppingRule::first_drop(base, x, cap)
                } else {
                    StoppingRule::first_above(base, x, cap)
                }
            }
            "restricted" => {
                let base = self.rule()?;
                self.punct(',')?;
                let event = self.event()?;
                self.punct(',')?;
                let fallback = self.number()?;
                self.punct(')')?;
                StoppingRule::restricted(base, event, fallback)
            }
            "earliest" => {
                let a = self.rule()?;
                self.punct(',')?;
                let b = self.rule()?;
                self.punct(')')?;
                StoppingRule::earliest(a, b)
            }
            "prefix_set" => {
                let ps = self.prefixes()?;
                self.punct(')')?;
                let cap = self.required_cap(&name)?;
                StoppingRule::prefix_set(ps, cap)
            }
            other => return Err(format!("unknown rule constructor '{other}'")),
        };
        Ok(match self.cap()? {
            Some(c) => rule.with_cap(c),
            None => rule,
        })
    }

    fn event(&mut self) -> ExprResult<EventPredicate<T>> {
        let name = self.ident()?;
        match name.as_str() {
            "all" => return Ok(EventPredicate::WholeSpace),
            "none" => return Ok(EventPredicate::empty()),
            _ => {}
        }
        if self.peek() != Some(&Tok::Punct('(')) {
            return match self.defs.events.iter().rev().find(|(n, _)| *n == name) {
                Some((_, e)) => Ok(e.clone()),
                None => Err(format!("unknown event '{name}' before column {}", self.column())),
            };
        }
        self.punct('(')?;
        let event = match name.as_str() {
            "below_at" | "above_at" => {
                let r = self.rule()?;
                self.punct(',')?;
                let k = self.number()?;
                if name == "below_at" {
                    EventPredicate::value_below_at(r, k)
                } else {
                    EventPredicate::value_above_at(r, k)
                }
            }
            "later" => {
                let a = self.rule()?;
                self.punct(',')?;
                let b = self.rule()?;
                EventPredicate::strictly_later(a, b)
            }
            "and" | "or" => {
                let a = self.event()?;
                self.punct(',')?;
                let b = self.event()?;
                if name == "and" {
                    a.and(b)
                } else {
                    a.or(b)
                }
            }
            "not" => self.event()?.not(),
            "prefix_in" => {
                let r = self.rule()?;
                self.punct(',')?;
                EventPredicate::prefix_in(r, self.prefixes()?)
            }
            other => return Err(format!("unknown event constructor '{other}'")),
        };
        self.punct(')')?;
        Ok(event)
    }

    fn map(&mut self) -> ExprResult<MonotoneMap<T>> {
        let name = self.ident()?;
        let map = match name.as_str() {
            "exp" => MonotoneMap::Exp,
            "log" => MonotoneMap::Log,
            "identity" => MonotoneMap::identity(),
            "affine" => {
                self.punct('(')?;
                let alpha = self.number()?;
                self.punct(',')?;
                let beta = self.number()?;
                self.punct(')')?;
                MonotoneMap::Affine { alpha, beta }
            }
            "power" | "neg_power" => {
                self.punct('(')?;
                let p = self.number()?;
                self.punct(')')?;
                if name == "power" {
                    MonotoneMap::Power(p)
                } else {
                    MonotoneMap::NegPower(p)
                }
            }
            "piecewise" | "piecewise_strict" => {
                self.punct('(')?;
                let mut knots = Vec::new();
                while !self.try_punct(')') {
                    let x = self.number()?;
                    self.punct(':')?;
                    knots.push((x, self.number()?));
                }
                MonotoneMap::PiecewiseLinear {
                    knots,
                    strict: name == "piecewise_strict",
                }
            }
            other => return Err(format!("unknown map '{other}'")),
        };
        map.validate().map_err(|e| e.to_string())?;
        Ok(map)
    }
}

pub fn parse_rule<T: Scalar>(text: &str, defs: &Defs<'_, T>) -> ExprResult<StoppingRule<T>> {
    let mut p = Parser::new(text, defs)?;
    let r = p.rule()?;
    p.finish()?;
    Ok(r)
}

pub fn parse_event<T: Scalar>(text: &str, defs: &Defs<'_, T>) -> ExprResult<EventPredicate<T>> {
    let mut p = Parser::new(text, defs)?;
    let e = p.event()?;
    p.finish()?;
    Ok(e)
}

pub fn parse_map<T: Scalar>(text: &str) -> ExprResult<MonotoneMap<T>> {
    let defs = Defs::empty();
    let mut p = Parser::new(text, &defs)?;
    let m = p.map()?;
    p.finish()?;
    Ok(m)
}

pub fn parse_number<T: Scalar>(text: &str) -> ExprResult<T> {
    parse_scalar(text).ok_or_else(|| format!("bad number '{}'", text.trim()))
}

/// Comma- or space-separated numbers.
pub fn parse_numbers<T: Scalar>(text: &str) -> ExprResult<Vec<T>> {
    let out: Vec<T> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_number)
        .collect::<ExprResult<_>>()?;
    if out.is_empty() {
        return Err("expected at least one number".into());
    }
    Ok(out)
}

/// Splits `key: value; key: value` into pairs, respecting parentheses.
pub fn parse_fields(text: &str) -> ExprResult<Vec<(String, String)>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in text.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if c == ';' && depth == 0 {
            parts.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    parts.push(cur);
    parts
        .into_iter()
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once(':')
                .ok_or_else(|| format!("expected 'key: value' in '{}'", p.trim()))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}
