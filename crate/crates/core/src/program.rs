//! ID-annotated ASP programs.
//!
//! Statements are split on their terminating `.` by a small scanner that
//! knows about strings, comments and `..` ranges; everything else about ASP
//! syntax is left to the solver. A line comment `% [R3]` directly above a
//! statement names it, and `% --- commonsense ---` style banners switch the
//! section of the statements that follow.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::literal::Literal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("line {line}: malformed rule annotation: {reason}")]
    MalformedAnnotation { line: usize, reason: String },
    #[error("line {line}: statement is missing its terminating `.`")]
    UnterminatedStatement { line: usize },
    #[error("unknown rule id `{0}`")]
    UnknownRuleId(String),
    #[error("fact `{0}` is not ground")]
    NonGroundFact(String),
    #[error("invalid program: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Premise,
    Commonsense,
    TestFact,
}

impl Section {
    fn banner(self) -> &'static str {
        match self {
            Section::Premise => "% --- premises ---",
            Section::Commonsense => "% --- commonsense ---",
            Section::TestFact => "% --- test facts ---",
        }
    }

    fn from_banner(name: &str) -> Option<Section> {
        match name.to_ascii_lowercase().replace(['_', '-'], " ").trim() {
            "premise" | "premises" => Some(Section::Premise),
            "commonsense" | "common sense" => Some(Section::Commonsense),
            "test fact" | "test facts" => Some(Section::TestFact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    /// One complete statement with whitespace collapsed and comments removed.
    pub text: String,
    pub section: Section,
    pub source_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicProgram {
    rules: Vec<Rule>,
    pub origin: Option<String>,
}

/// Lines (1-based, inclusive) a rule occupies in rendered text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSpan {
    pub id: String,
    pub first_line: usize,
    pub last_line: usize,
}

/// A statement as found by the scanner, before IDs are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawStatement {
    pub annotation: Option<String>,
    pub section: Section,
    pub text: String,
    /// First line of the statement, or of its annotation when present.
    pub first_line: usize,
    pub last_line: usize,
    pub terminated: bool,
}

impl LogicProgram {
    /// Builds a program from rules, re-numbering `source_index` in order.
    pub fn from_rules(rules: Vec<Rule>) -> Result<Self, ProgramError> {
        let mut seen = HashSet::new();
        let mut rules = rules;
        for (i, r) in rules.iter_mut().enumerate() {
            if !seen.insert(r.id.clone()) {
                return Err(ProgramError::Invalid(format!("duplicate rule id `{}`", r.id)));
            }
            r.source_index = i;
        }
        Ok(LogicProgram { rules, origin: None })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.id.as_str())
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }

    /// Keeps only the rules whose id is in `keep`, preserving order.
    pub fn restricted_to(&self, keep: &BTreeSet<String>) -> LogicProgram {
        let rules = self
            .rules
            .iter()
            .filter(|r| keep.contains(&r.id))
            .cloned()
            .enumerate()
            .map(|(i, r)| Rule { source_index: i, ..r })
            .collect();
        LogicProgram { rules, origin: self.origin.clone() }
    }

    /// Appends raw statements under fresh ids, returning the new program and
    /// the assigned ids.
    pub fn appended(&self, statements: &[(String, Section)]) -> (LogicProgram, Vec<String>) {
        let mut used: HashSet<String> = self.rules.iter().map(|r| r.id.clone()).collect();
        let mut rules = self.rules.clone();
        let mut ids = Vec::with_capacity(statements.len());
        let mut next = rules.len() + 1;
        for (text, section) in statements {
            let id = fresh_id(&mut used, &mut next);
            rules.push(Rule {
                id: id.clone(),
                text: text.clone(),
                section: *section,
                source_index: rules.len(),
            });
            ids.push(id);
        }
        (LogicProgram { rules, origin: self.origin.clone() }, ids)
    }
}

fn fresh_id(used: &mut HashSet<String>, next: &mut usize) -> String {
    loop {
        let id = format!("R{next}");
        *next += 1;
        if used.insert(id.clone()) {
            return id;
        }
    }
}

/// Parses annotated ASP source into a program.
pub fn parse_program(text: &str) -> Result<LogicProgram, ProgramError> {
    let raw = scan_statements(text)?;
    if let Some(open) = raw.iter().find(|s| !s.terminated) {
        return Err(ProgramError::UnterminatedStatement { line: open.first_line });
    }
    let ids = assign_ids(&raw)?;
    let rules = raw
        .into_iter()
        .zip(ids)
        .enumerate()
        .map(|(i, (s, id))| Rule { id, text: s.text, section: s.section, source_index: i })
        .collect();
    Ok(LogicProgram { rules, origin: None })
}

/// Assigns ids to scanned statements: explicit annotations win, the rest get
/// `R{k}` for their 1-based position, bumped past any id already taken.
pub fn assign_ids(raw: &[RawStatement]) -> Result<Vec<String>, ProgramError> {
    let mut used = HashSet::new();
    for s in raw {
        if let Some(id) = &s.annotation {
            if !used.insert(id.clone()) {
                return Err(ProgramError::MalformedAnnotation {
                    line: s.first_line,
                    reason: format!("duplicate id `{id}`"),
                });
            }
        }
    }
    let mut out = Vec::with_capacity(raw.len());
    for (i, s) in raw.iter().enumerate() {
        match &s.annotation {
            Some(id) => out.push(id.clone()),
            None => {
                let mut next = i + 1;
                out.push(fresh_id(&mut used, &mut next));
            }
        }
    }
    Ok(out)
}

pub fn render_program(p: &LogicProgram, include_ids: bool) -> String {
    render_with_spans(p, include_ids).0
}

/// Renders a program and reports the lines each rule occupies.
pub fn render_with_spans(p: &LogicProgram, include_ids: bool) -> (String, Vec<RuleSpan>) {
    let mut out = String::new();
    let mut spans = Vec::with_capacity(p.rules.len());
    let mut line = 1;
    let mut section = Section::Premise;
    for rule in &p.rules {
        if rule.section != section {
            section = rule.section;
            out.push_str(section.banner());
            out.push('\n');
            line += 1;
        }
        let first_line = line;
        if include_ids {
            let _ = writeln!(out, "% [{}]", rule.id);
            line += 1;
        }
        out.push_str(&rule.text);
        out.push('\n');
        spans.push(RuleSpan { id: rule.id.clone(), first_line, last_line: line });
        line += 1;
    }
    (out, spans)
}

/// Returns a new program with `remove_ids` dropped and `add_facts` appended
/// as test facts. The input is left untouched.
pub fn splice(
    p: &LogicProgram,
    add_facts: &[Literal],
    remove_ids: &BTreeSet<String>,
) -> Result<LogicProgram, ProgramError> {
    if let Some(missing) = remove_ids.iter().find(|id| p.get(id).is_none()) {
        return Err(ProgramError::UnknownRuleId(missing.clone()));
    }
    if let Some(bad) = add_facts.iter().find(|l| !l.is_ground()) {
        return Err(ProgramError::NonGroundFact(bad.to_string()));
    }
    let keep: BTreeSet<String> =
        p.ids().filter(|id| !remove_ids.contains(*id)).map(str::to_string).collect();
    let mut out = p.restricted_to(&keep);
    // fresh ids must not reuse removed ones either
    let mut used: HashSet<String> = p.ids().map(str::to_string).collect();
    let mut next = p.len() + 1;
    for fact in add_facts {
        let id = fresh_id(&mut used, &mut next);
        let source_index = out.rules.len();
        out.rules.push(Rule { id, text: format!("{fact}."), section: Section::TestFact, source_index });
    }
    Ok(out)
}

/// Splits source text into statements.
///
/// Never fails on ASP syntax; it only rejects malformed `% [..]` annotations.
/// A trailing fragment without a terminator is returned with
/// `terminated == false` so callers can map solver diagnostics onto it.
pub fn scan_statements(text: &str) -> Result<Vec<RawStatement>, ProgramError> {
    let mut out = Vec::new();
    let mut section = Section::Premise;
    let mut pending: Option<(String, usize)> = None;
    let mut buf = String::new();
    let mut start_line = 0;
    let mut line = 1;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;

    let push_ws = |buf: &mut String| {
        if !buf.is_empty() && !buf.ends_with(' ') {
            buf.push(' ');
        }
    };

    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                push_ws(&mut buf);
                i += 1;
            }
            c if c.is_whitespace() => {
                push_ws(&mut buf);
                i += 1;
            }
            '%' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'%')) {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                i = (i + 2).min(chars.len());
                push_ws(&mut buf);
            }
            '%' => {
                let begin = i + 1;
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                let body: String = chars[begin..i].iter().collect();
                if buf.is_empty() {
                    directive(body.trim(), line, &mut pending, &mut section)?;
                } else {
                    push_ws(&mut buf);
                }
            }
            '"' => {
                if buf.is_empty() {
                    start_line = line;
                }
                buf.push('"');
                i += 1;
                while i < chars.len() {
                    let s = chars[i];
                    buf.push(s);
                    i += 1;
                    if s == '\\' && i < chars.len() {
                        buf.push(chars[i]);
                        i += 1;
                    } else if s == '"' {
                        break;
                    } else if s == '\n' {
                        line += 1;
                    }
                }
            }
            '.' => {
                if buf.is_empty() {
                    start_line = line;
                }
                let range = chars.get(i + 1) == Some(&'.') || (i > 0 && chars[i - 1] == '.');
                buf.push('.');
                i += 1;
                if !range {
                    let (annotation, first_line) = match pending.take() {
                        Some((id, l)) => (Some(id), l),
                        None => (None, start_line),
                    };
                    out.push(RawStatement {
                        annotation,
                        section,
                        text: buf.trim().to_string(),
                        first_line,
                        last_line: line,
                        terminated: true,
                    });
                    buf.clear();
                }
            }
            c => {
                if buf.is_empty() {
                    start_line = line;
                }
                buf.push(c);
                i += 1;
            }
        }
    }

    let rest = buf.trim();
    if !rest.is_empty() {
        let (annotation, first_line) = match pending.take() {
            Some((id, l)) => (Some(id), l),
            None => (None, start_line),
        };
        out.push(RawStatement {
            annotation,
            section,
            text: rest.to_string(),
            first_line,
            last_line: line,
            terminated: false,
        });
    } else if let Some((id, l)) = pending {
        return Err(ProgramError::MalformedAnnotation {
            line: l,
            reason: format!("annotation `{id}` is not followed by a statement"),
        });
    }
    Ok(out)
}

fn directive(
    body: &str,
    line: usize,
    pending: &mut Option<(String, usize)>,
    section: &mut Section,
) -> Result<(), ProgramError> {
    if let Some(inner) = body.strip_prefix('[') {
        let id = inner.strip_suffix(']').map(str::trim).ok_or_else(|| {
            ProgramError::MalformedAnnotation { line, reason: format!("unclosed `[` in `%{body}`") }
        })?;
        let valid = id.starts_with(|c: char| c.is_ascii_alphabetic())
            && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(ProgramError::MalformedAnnotation {
                line,
                reason: format!("`{id}` is not a valid rule id"),
            });
        }
        if let Some((prev, _)) = pending {
            return Err(ProgramError::MalformedAnnotation {
                line,
                reason: format!("annotation `{prev}` is not followed by a statement"),
            });
        }
        *pending = Some((id.to_string(), line));
    } else if let Some(name) = body.strip_prefix("---").and_then(|b| b.strip_suffix("---")) {
        if let Some(s) = Section::from_banner(name) {
            *section = s;
        }
    }
    Ok(())
}
