//! Terms and classical literals in clingo's textual syntax.
//!
//! Literals show up in three places: solver output (`-fish(fir)`), test
//! documents, and query `ATOM(..)` patterns. The last may contain variables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse literal `{input}`: {reason}")]
pub struct LiteralParseError {
    pub input: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Number(i64),
    Str(String),
    /// Constant or function symbol; a constant has no arguments.
    Func(String, Vec<Term>),
    /// Anonymous tuple `(a,b)`.
    Tuple(Vec<Term>),
    Var(String),
}

impl Term {
    pub fn constant(name: &str) -> Self {
        Term::Func(name.to_string(), Vec::new())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Func(_, args) | Term::Tuple(args) => args.iter().all(Term::is_ground),
            Term::Number(_) | Term::Str(_) => true,
        }
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if v != "_" && !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Func(_, args) | Term::Tuple(args) => {
                args.iter().for_each(|a| a.collect_vars(out))
            }
            _ => {}
        }
    }

    fn substitute(&self, binding: &BTreeMap<String, Term>) -> Term {
        match self {
            Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Func(name, args) => Term::Func(
                name.clone(),
                args.iter().map(|a| a.substitute(binding)).collect(),
            ),
            Term::Tuple(args) => Term::Tuple(args.iter().map(|a| a.substitute(binding)).collect()),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Number(n) => write!(f, "{n}"),
            Term::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Term::Func(name, args) => {
                f.write_str(name)?;
                if !args.is_empty() {
                    write_args(f, args)?;
                }
                Ok(())
            }
            // a 1-tuple is written `(a,)`
            Term::Tuple(args) if args.len() == 1 => write!(f, "({},)", args[0]),
            Term::Tuple(args) => write_args(f, args),
            Term::Var(v) => f.write_str(v),
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

/// A classical literal: an atom, optionally under strong negation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub negated: bool,
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Literal { negated: false, predicate: predicate.to_string(), args }
    }

    pub fn atom(name: &str) -> Self {
        Literal::new(name, Vec::new())
    }

    /// The strong-negation complement: `p` <-> `-p`.
    pub fn complement(&self) -> Self {
        Literal { negated: !self.negated, ..self.clone() }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    /// Variables in first-occurrence order, anonymous `_` excluded.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.args.iter().for_each(|a| a.collect_vars(&mut out));
        out
    }

    pub fn substitute(&self, binding: &BTreeMap<String, Term>) -> Literal {
        Literal {
            negated: self.negated,
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| a.substitute(binding)).collect(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("-")?;
        }
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            write_args(f, &self.args)?;
        }
        Ok(())
    }
}

impl FromStr for Literal {
    type Err = LiteralParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TermParser { src: s, pos: 0 };
        let lit = p.literal().map_err(|reason| LiteralParseError { input: s.to_string(), reason })?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(LiteralParseError {
                input: s.to_string(),
                reason: format!("unexpected trailing input at byte {}", p.pos),
            });
        }
        Ok(lit)
    }
}

impl Serialize for Literal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct TermParser<'a> {
    src: &'a str,
    pos: usize,
}

impl TermParser<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        let mut chars = self.src[self.pos..].char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        let mut end = self.src.len();
        for (i, c) in chars {
            if !(c.is_ascii_alphanumeric() || c == '_' || c == '\'') {
                end = self.pos + i;
                break;
            }
        }
        self.pos = end;
        Some(self.src[start..end].to_string())
    }

    fn literal(&mut self) -> Result<Literal, String> {
        self.skip_ws();
        let negated = self.eat('-');
        let name = self.ident().ok_or_else(|| "expected predicate name".to_string())?;
        if !name.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(format!("predicate `{name}` must start with a lowercase letter"));
        }
        let args = if self.eat('(') { self.args(')')? } else { Vec::new() };
        Ok(Literal { negated, predicate: name, args })
    }

    fn args(&mut self, close: char) -> Result<Vec<Term>, String> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            if self.eat(',') {
                // trailing comma, as in clingo's `(a,)`
                if self.eat(close) {
                    return Ok(out);
                }
                continue;
            }
            if self.eat(close) {
                return Ok(out);
            }
            return Err(format!("expected `,` or `{close}` at byte {}", self.pos));
        }
    }

    fn term(&mut self) -> Result<Term, String> {
        self.skip_ws();
        match self.peek() {
            Some('"') => self.string(),
            Some('(') => {
                self.pos += 1;
                Ok(Term::Tuple(self.args(')')?))
            }
            Some(c) if c == '-' || c.is_ascii_digit() => {
                let start = self.pos;
                if c == '-' {
                    self.pos += 1;
                }
                let digits_start = self.pos;
                while matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                    self.pos += 1;
                }
                if self.pos == digits_start {
                    // `-f(x)`: a negated function term
                    let inner = self.term()?;
                    return match inner {
                        Term::Func(name, args) => Ok(Term::Func(format!("-{name}"), args)),
                        other => Err(format!("cannot negate term `{other}`")),
                    };
                }
                self.src[start..self.pos]
                    .parse()
                    .map(Term::Number)
                    .map_err(|e| format!("bad number: {e}"))
            }
            _ => {
                let name = self.ident().ok_or_else(|| format!("expected term at byte {}", self.pos))?;
                if name.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
                    return Ok(Term::Var(name));
                }
                let args = if self.eat('(') { self.args(')')? } else { Vec::new() };
                Ok(Term::Func(name, args))
            }
        }
    }

    fn string(&mut self) -> Result<Term, String> {
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.src[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(Term::Str(out));
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, e)) => out.push(e),
                    None => break,
                },
                c => out.push(c),
            }
        }
        Err("unterminated string".to_string())
    }
}
