//! Proof-by-refutation explanations and the Critic's feedback text.
//!
//! To explain why a literal is entailed, the program is extended with a
//! constraint forbidding it; the result is unsatisfiable, and a minimal
//! unsatisfiable subset of the original rules is the explanation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{ConditionKind, Evidence, SuiteReport, TestStatus};
use crate::literal::Literal;
use crate::program::{render_program, LogicProgram, Section};
use crate::solver::{CompileError, SolveStatus, Solver, SolverError};

pub const FEEDBACK_HEADER: &str = "CRITIC-FEEDBACK v1";
pub const ALL_PASSED: &str = "ALL TESTS PASSED";
/// Longest answer set printed in feedback.
pub const MAX_SHOWN_LITERALS: usize = 40;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("program is satisfiable, there is no core to extract")]
    NotUnsat,
    #[error("`{0}` is not entailed: the refutation program has an answer set")]
    NotEntailed(String),
    #[error("solver could not decide satisfiability (timeout)")]
    Timeout,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub target: String,
    /// In program order.
    pub core_rule_ids: Vec<String>,
    pub narrative: String,
}

impl Explanation {
    pub fn new(target: &str, program: &LogicProgram, core: Vec<String>) -> Self {
        let narrative = core
            .iter()
            .filter_map(|id| program.get(id))
            .map(|r| format!("[{}] {}", r.id, r.text))
            .collect::<Vec<_>>()
            .join("\n");
        Explanation { target: target.to_string(), core_rule_ids: core, narrative }
    }
}

fn is_unsat(program: &LogicProgram, solver: &Solver) -> Result<bool, ExplainError> {
    let result = solver.solve(&render_program(program, false), 1)?;
    match result.status {
        SolveStatus::Unsat => Ok(true),
        SolveStatus::Sat => Ok(false),
        SolveStatus::Unknown => Err(ExplainError::Timeout),
    }
}

/// Deletion-based minimisation. Rules are tried for removal from the last
/// to the first, so ties keep earlier rules, and passes repeat until one
/// removes nothing; every reported rule is then necessary for the final
/// set. Protected rules are never removed and never reported. Returns ids
/// in program order.
pub fn minimal_unsat_core(
    program: &LogicProgram,
    protected_ids: &BTreeSet<String>,
    solver: &Solver,
) -> Result<Vec<String>, ExplainError> {
    if !is_unsat(program, solver)? {
        return Err(ExplainError::NotUnsat);
    }
    let mut kept: BTreeSet<String> = program.ids().map(str::to_string).collect();
    // rules known to be necessary for the current `kept`
    let mut necessary: BTreeSet<String> = BTreeSet::new();
    loop {
        let mut changed = false;
        for rule in program.rules().iter().rev() {
            if protected_ids.contains(&rule.id) || !kept.contains(&rule.id) || necessary.contains(&rule.id) {
                continue;
            }
            kept.remove(&rule.id);
            if is_unsat(&program.restricted_to(&kept), solver)? {
                necessary.clear();
                changed = true;
            } else {
                kept.insert(rule.id.clone());
                necessary.insert(rule.id.clone());
            }
        }
        if !changed {
            break;
        }
    }
    Ok(program
        .ids()
        .filter(|id| kept.contains(*id) && !protected_ids.contains(*id))
        .map(str::to_string)
        .collect())
}

/// Explains why `literal` holds in every answer set of `program`.
pub fn explain_entailment(
    program: &LogicProgram,
    literal: &Literal,
    solver: &Solver,
) -> Result<Explanation, ExplainError> {
    let (refutation, ids) = program.appended(&[(format!(":- {literal}."), Section::TestFact)]);
    let protected: BTreeSet<String> = ids.into_iter().collect();
    let core = match minimal_unsat_core(&refutation, &protected, solver) {
        Err(ExplainError::NotUnsat) => return Err(ExplainError::NotEntailed(literal.to_string())),
        other => other?,
    };
    Ok(Explanation::new(&literal.to_string(), program, core))
}

fn indent(text: &str, prefix: &str) -> String {
    text.lines().map(|l| format!("{prefix}{l}")).collect::<Vec<_>>().join("\n")
}

fn render_answer_set(out: &mut String, literals: &[Literal], label: &str) {
    let shown: Vec<String> = literals.iter().take(MAX_SHOWN_LITERALS).map(|l| l.to_string()).collect();
    if literals.len() > MAX_SHOWN_LITERALS {
        let _ = writeln!(out, "    {label} ({} literals, first {} shown):", literals.len(), MAX_SHOWN_LITERALS);
    } else {
        let _ = writeln!(out, "    {label} ({} literals):", literals.len());
    }
    let _ = writeln!(out, "      {}", if shown.is_empty() { "(empty)".to_string() } else { shown.join(" ") });
}

/// Renders Critic feedback for the Actor. Pure: identical inputs give
/// identical bytes.
pub fn render_feedback(report: &SuiteReport, compile_errors: &[CompileError]) -> String {
    let mut out = String::new();
    out.push_str(FEEDBACK_HEADER);
    out.push('\n');

    if !compile_errors.is_empty() {
        let _ = writeln!(out, "COMPILE ERRORS: {}", compile_errors.len());
        for e in compile_errors {
            let rule = e.mapped_rule_id.as_deref().map(|id| format!(" (rule {id})")).unwrap_or_default();
            let _ = writeln!(out, "- line {}{rule}:", e.line);
            let _ = writeln!(out, "{}", indent(&e.message, "    "));
        }
    }

    if compile_errors.is_empty() && report.all_passed {
        let _ = writeln!(out, "TESTS: {} passed, 0 failed, 0 errors", report.passed);
        out.push_str(ALL_PASSED);
        out.push('\n');
        return out;
    }
    if report.results.is_empty() {
        return out;
    }

    let _ = writeln!(
        out,
        "TESTS: {} passed, {} failed, {} errors",
        report.passed, report.failed, report.errored
    );
    for result in &report.results {
        match result.status {
            TestStatus::Pass => continue,
            TestStatus::Error => {
                let _ = writeln!(out, "ERROR in test {}: {}", result.test.name, result.detail);
                continue;
            }
            TestStatus::Fail => {}
        }
        let _ = writeln!(out, "FAILED test {}", result.test.name);
        if !result.test.rules_referenced.is_empty() {
            let _ = writeln!(out, "  rules referenced: {}", result.test.rules_referenced.join(", "));
        }
        if !result.test.facts.is_empty() {
            let facts: Vec<String> = result.test.facts.iter().map(|l| format!("{l}.")).collect();
            let _ = writeln!(out, "  test facts: {}", facts.join(" "));
        }
        if !result.detail.is_empty() {
            let _ = writeln!(out, "  {}", result.detail);
        }
        if let Some(core) = &result.explanation {
            let _ = writeln!(out, "  minimal rules causing the contradiction:");
            let _ = writeln!(out, "{}", indent(&core.narrative, "    "));
        }
        for cond in &result.failed_conditions {
            let lit = cond.literal.as_ref().map(|l| l.to_string()).unwrap_or_default();
            let what = match cond.kind {
                ConditionKind::InferTrueAll => format!("{lit} is not inferred in every answer set"),
                ConditionKind::InferTrueAny => format!("{lit} is not inferred in any answer set"),
                ConditionKind::InferFalse => format!("{lit} is inferred in at least one answer set"),
                ConditionKind::ExpectContradiction => {
                    "expected a contradiction but the program has answer sets".to_string()
                }
            };
            let _ = writeln!(out, "  - {}: {what}", cond.kind.as_str());
            match &cond.evidence {
                Some(Evidence::Proof(expl)) => {
                    let _ = writeln!(out, "    proof (minimal rules entailing {}):", expl.target);
                    let _ = writeln!(out, "{}", indent(&expl.narrative, "      "));
                }
                Some(Evidence::AnswerSet(lits)) => {
                    let label = match cond.kind {
                        ConditionKind::InferFalse => "answer set containing it",
                        _ => "counterexample answer set",
                    };
                    render_answer_set(&mut out, lits, label);
                }
                None => {}
            }
        }
    }
    out
}
