//! Structured conclusion queries and their three-valued evaluation.
//!
//! A query is a numbered list of nodes, composed bottom-up:
//!
//! ```text
//! 1. ATOM(supernova(red_star))
//! 2. ATOM(observed_for_brightness(red_star))
//! 3. OR(1, 2)
//! ...
//! 7. IF-THEN(3, 6)
//! ```
//!
//! Each answer set is evaluated with strong Kleene logic: `ATOM(l)` is true
//! when `l` is in the set, false when its strong-negation complement is, and
//! unknown otherwise. The verdict is True when the root is true in every
//! answer set, False when it is false in every answer set, Uncertain
//! otherwise.
//!
//! Variables range over the argument terms occurring in the answer set. A
//! variable is bound at the lowest node covering all of its occurrences:
//! universally at `ALL(a, b)`, existentially at `SOME(a, b)` or anywhere else.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::literal::{Literal, Term};
use crate::program::{render_program, LogicProgram};
use crate::solver::{AnswerSet, SolveStatus, Solver, SolverError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("line {line}: node {index} refers to node {child}, which is not an earlier node")]
    ForwardReference { line: usize, index: usize, child: usize },
    #[error("line {line}: {op} takes {expected} argument(s), got {got}")]
    ArityError { line: usize, op: Op, expected: &'static str, got: usize },
    #[error("line {line}: unknown operator `{op}`")]
    UnknownOperator { line: usize, op: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("node {0} is not reachable from the root")]
    Unreachable(usize),
    #[error("query is empty")]
    Empty,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("program has no answer set")]
    ProgramUnsatisfiable,
    #[error("solver could not decide the program (timeout)")]
    Undecided,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Op {
    Atom,
    And,
    Or,
    Not,
    Xor,
    IfThen,
    All,
    Some,
}

impl Op {
    fn spelling(self) -> &'static str {
        match self {
            Op::Atom => "ATOM",
            Op::And => "AND",
            Op::Or => "OR",
            Op::Not => "NOT",
            Op::Xor => "XOR",
            Op::IfThen => "IF-THEN",
            Op::All => "ALL",
            Op::Some => "SOME",
        }
    }

    fn from_spelling(s: &str) -> Option<Op> {
        let norm = s.trim().to_ascii_uppercase().replace(['_', ' '], "-");
        Some(match norm.as_str() {
            "ATOM" => Op::Atom,
            "AND" => Op::And,
            "OR" => Op::Or,
            "NOT" => Op::Not,
            "XOR" => Op::Xor,
            "IF-THEN" | "IFTHEN" => Op::IfThen,
            "ALL" => Op::All,
            "SOME" => Op::Some,
            _ => return None,
        })
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.spelling())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryNode {
    pub index: usize,
    pub op: Op,
    pub literal: Option<Literal>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    nodes: Vec<QueryNode>,
    root: usize,
}

impl QueryPlan {
    /// Validates nodes given in index order 1..=n.
    pub fn new(nodes: Vec<QueryNode>) -> Result<Self, QueryError> {
        if nodes.is_empty() {
            return Err(QueryError::Empty);
        }
        for (pos, node) in nodes.iter().enumerate() {
            let line = pos + 1;
            if node.index != line {
                return Err(QueryError::Syntax {
                    line,
                    reason: format!("expected node number {line}, found {}", node.index),
                });
            }
            check_node(node, line)?;
        }
        let root = nodes.len();
        let mut reachable = vec![false; root + 1];
        reachable[root] = true;
        for node in nodes.iter().rev() {
            if reachable[node.index] {
                for &c in &node.children {
                    reachable[c] = true;
                }
            }
        }
        if let Some(idx) = (1..=root).find(|&i| !reachable[i]) {
            return Err(QueryError::Unreachable(idx));
        }
        Ok(QueryPlan { nodes, root })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[QueryNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &QueryNode {
        &self.nodes[index - 1]
    }

    /// Ground literals mentioned by the plan's atoms.
    pub fn atoms(&self) -> impl Iterator<Item = &Literal> {
        self.nodes.iter().filter_map(|n| n.literal.as_ref())
    }

    pub fn is_ground(&self) -> bool {
        self.atoms().all(Literal::is_ground)
    }
}

fn check_node(node: &QueryNode, line: usize) -> Result<(), QueryError> {
    let got = node.children.len();
    let arity_ok = match node.op {
        Op::Atom => node.literal.is_some() && got == 0,
        Op::Not => got == 1,
        Op::IfThen | Op::Xor | Op::All | Op::Some => got == 2,
        Op::And | Op::Or => got >= 2,
    };
    if !arity_ok {
        let expected = match node.op {
            Op::Atom => "1 literal",
            Op::Not => "1",
            Op::And | Op::Or => "at least 2",
            _ => "2",
        };
        return Err(QueryError::ArityError { line, op: node.op, expected, got });
    }
    if let Some(&child) = node.children.iter().find(|&&c| c == 0 || c >= node.index) {
        return Err(QueryError::ForwardReference { line, index: node.index, child });
    }
    Ok(())
}

impl fmt::Display for QueryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for node in &self.nodes {
            write!(f, "{}. {}(", node.index, node.op)?;
            match &node.literal {
                Some(l) => write!(f, "{l}")?,
                None => {
                    let parts: Vec<String> = node.children.iter().map(|c| c.to_string()).collect();
                    f.write_str(&parts.join(", "))?;
                }
            }
            writeln!(f, ")")?;
        }
        Ok(())
    }
}

impl FromStr for QueryPlan {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_query(s)
    }
}

/// Parses the numbered-line query syntax `k. OP(args)`. Blank lines are
/// skipped; error line numbers refer to the input text.
pub fn parse_query(text: &str) -> Result<QueryPlan, QueryError> {
    let mut nodes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let src = raw.trim();
        if src.is_empty() {
            continue;
        }
        let syntax = |reason: &str| QueryError::Syntax { line, reason: reason.to_string() };
        let (num, rest) = src.split_once('.').ok_or_else(|| syntax("expected `k. OP(...)`"))?;
        let index: usize = num.trim().parse().map_err(|_| syntax("node number is not an integer"))?;
        let rest = rest.trim();
        let open = rest.find('(').ok_or_else(|| syntax("missing `(`"))?;
        let body = rest[open + 1..].strip_suffix(')').ok_or_else(|| syntax("missing closing `)`"))?;
        let op_name = &rest[..open];
        let op = Op::from_spelling(op_name)
            .ok_or_else(|| QueryError::UnknownOperator { line, op: op_name.trim().to_string() })?;
        let node = if op == Op::Atom {
            let literal: Literal = body
                .parse()
                .map_err(|e: crate::literal::LiteralParseError| syntax(&e.to_string()))?;
            QueryNode { index, op, literal: Some(literal), children: Vec::new() }
        } else {
            let children = body
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<usize>().map_err(|_| syntax(&format!("`{s}` is not a node number"))))
                .collect::<Result<Vec<_>, _>>()?;
            QueryNode { index, op, literal: None, children }
        };
        let expected = nodes.len() + 1;
        if node.index != expected {
            return Err(syntax(&format!("expected node number {expected}, found {}", node.index)));
        }
        check_node(&node, line)?;
        nodes.push(node);
    }
    QueryPlan::new(nodes)
}

/// Strong Kleene truth values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    False,
    Unknown,
    True,
}

impl Truth {
    fn rank(self) -> u8 {
        match self {
            Truth::False => 0,
            Truth::Unknown => 1,
            Truth::True => 2,
        }
    }

    pub fn and(self, other: Truth) -> Truth {
        if self.rank() <= other.rank() { self } else { other }
    }

    pub fn or(self, other: Truth) -> Truth {
        if self.rank() >= other.rank() { self } else { other }
    }

    pub fn negate(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    pub fn implies(self, other: Truth) -> Truth {
        self.negate().or(other)
    }

    /// True iff exactly one side is true and the other false.
    pub fn xor(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::Unknown, _) | (_, Truth::Unknown) => Truth::Unknown,
            (a, b) if a != b => Truth::True,
            _ => Truth::False,
        }
    }
}

/// The three-valued answer to a conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    True,
    False,
    Uncertain,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::True, Label::False, Label::Uncertain];

    pub fn parse_loose(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "true" => Some(Label::True),
            "false" => Some(Label::False),
            "uncertain" => Some(Label::Uncertain),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::True => "True",
            Label::False => "False",
            Label::Uncertain => "Uncertain",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    AllModels,
    TruncatedModels,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: Label,
    pub basis: Basis,
    pub note: String,
}

/// Binding site of every variable: node index -> variables bound there.
fn binding_sites(plan: &QueryPlan) -> BTreeMap<usize, Vec<String>> {
    // atoms reachable from each node, indexed by node
    let mut below: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); plan.nodes.len() + 1];
    for node in &plan.nodes {
        let mut set = BTreeSet::new();
        if node.op == Op::Atom {
            set.insert(node.index);
        }
        for &c in &node.children {
            set.extend(below[c].iter().copied());
        }
        below[node.index] = set;
    }
    let mut occurrences: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for node in &plan.nodes {
        if let Some(lit) = &node.literal {
            for v in lit.variables() {
                occurrences.entry(v).or_default().insert(node.index);
            }
        }
    }
    let mut sites: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (var, atoms) in occurrences {
        let site = plan
            .nodes
            .iter()
            .find(|n| atoms.is_subset(&below[n.index]))
            .map(|n| n.index)
            .unwrap_or(plan.root);
        sites.entry(site).or_default().push(var);
    }
    sites
}

struct ModelEval<'a> {
    plan: &'a QueryPlan,
    sites: &'a BTreeMap<usize, Vec<String>>,
    model: &'a AnswerSet,
    domain: Vec<Term>,
}

impl ModelEval<'_> {
    fn eval(&self, index: usize, env: &mut BTreeMap<String, Term>) -> Truth {
        let node = self.plan.node(index);
        let vars = match self.sites.get(&index) {
            Some(v) => v,
            None => return self.eval_body(node, env),
        };
        let universal = node.op == Op::All;
        let mut acc = if universal { Truth::True } else { Truth::False };
        let mut assignment = vec![0usize; vars.len()];
        if self.domain.is_empty() {
            return acc;
        }
        loop {
            for (v, &k) in vars.iter().zip(&assignment) {
                env.insert(v.clone(), self.domain[k].clone());
            }
            let value = self.eval_body(node, env);
            acc = if universal { acc.and(value) } else { acc.or(value) };
            let decided = if universal { acc == Truth::False } else { acc == Truth::True };
            if decided || !advance(&mut assignment, self.domain.len()) {
                break;
            }
        }
        for v in vars {
            env.remove(v);
        }
        acc
    }

    fn eval_body(&self, node: &QueryNode, env: &mut BTreeMap<String, Term>) -> Truth {
        let child = |i: usize, env: &mut BTreeMap<String, Term>| self.eval(node.children[i], env);
        match node.op {
            Op::Atom => {
                let lit = node.literal.as_ref().expect("ATOM carries a literal").substitute(env);
                if self.model.contains(&lit) {
                    Truth::True
                } else if self.model.contains(&lit.complement()) {
                    Truth::False
                } else {
                    Truth::Unknown
                }
            }
            Op::Not => child(0, env).negate(),
            Op::And => (0..node.children.len()).fold(Truth::True, |acc, i| acc.and(child(i, env))),
            Op::Or => (0..node.children.len()).fold(Truth::False, |acc, i| acc.or(child(i, env))),
            Op::Xor => {
                let a = child(0, env);
                a.xor(child(1, env))
            }
            Op::IfThen | Op::All => {
                let a = child(0, env);
                a.implies(child(1, env))
            }
            Op::Some => {
                let a = child(0, env);
                a.and(child(1, env))
            }
        }
    }
}

fn advance(assignment: &mut [usize], base: usize) -> bool {
    for slot in assignment.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Argument terms occurring in an answer set, the domain for variables.
pub fn herbrand_domain(model: &AnswerSet) -> Vec<Term> {
    let set: BTreeSet<&Term> = model.iter().flat_map(|l| l.args.iter()).collect();
    set.into_iter().cloned().collect()
}

/// Value of the plan's root in one answer set.
pub fn evaluate_in_model(plan: &QueryPlan, model: &AnswerSet) -> Truth {
    let sites = binding_sites(plan);
    let ev = ModelEval { plan, sites: &sites, model, domain: herbrand_domain(model) };
    ev.eval(plan.root, &mut BTreeMap::new())
}

/// Aggregates per-model values into a verdict.
pub fn verdict_over_models(plan: &QueryPlan, models: &[AnswerSet], truncated: bool) -> Verdict {
    let values: Vec<Truth> = models.iter().map(|m| evaluate_in_model(plan, m)).collect();
    let value = if !values.is_empty() && values.iter().all(|&t| t == Truth::True) {
        Label::True
    } else if !values.is_empty() && values.iter().all(|&t| t == Truth::False) {
        Label::False
    } else {
        Label::Uncertain
    };
    let (basis, note) = if truncated {
        (Basis::TruncatedModels, format!("evaluated over the first {} answer sets only", models.len()))
    } else {
        (Basis::AllModels, format!("evaluated over all {} answer set(s)", models.len()))
    };
    Verdict { value, basis, note }
}

/// Evaluates a query against every answer set of `program` (up to the
/// solver's model cap).
pub fn evaluate(program: &LogicProgram, plan: &QueryPlan, solver: &Solver) -> Result<Verdict, EvalError> {
    let result = solver.solve_capped(&render_program(program, false))?;
    match result.status {
        SolveStatus::Unsat => Err(EvalError::ProgramUnsatisfiable),
        SolveStatus::Unknown => Err(EvalError::Undecided),
        SolveStatus::Sat => Ok(verdict_over_models(plan, &result.answer_sets, result.truncated)),
    }
}
