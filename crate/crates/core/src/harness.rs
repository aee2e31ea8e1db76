//! Logic tests: optional facts plus four kinds of conditions, checked
//! against cautious and brave consequences of the extended program.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::explain::{explain_entailment, minimal_unsat_core, Explanation};
use crate::literal::Literal;
use crate::program::{render_program, splice, LogicProgram};
use crate::solver::{AnswerSet, ConsequenceMode, SolveStatus, Solver, SolverError};

pub const CONTRADICTORY_DETAIL: &str = "program contradictory under test facts";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("test #{index} ({name}): field `{field}`: {reason}")]
pub struct SchemaViolation {
    pub index: usize,
    pub name: String,
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicTest {
    pub name: String,
    pub facts: Vec<Literal>,
    pub infer_true_all: Vec<Literal>,
    pub infer_true_any: Vec<Literal>,
    pub infer_false: Vec<Literal>,
    pub expect_contradiction: bool,
    pub rules_referenced: Vec<String>,
    pub explanation: String,
}

impl LogicTest {
    pub fn named(name: &str) -> Self {
        LogicTest {
            name: name.to_string(),
            facts: Vec::new(),
            infer_true_all: Vec::new(),
            infer_true_any: Vec::new(),
            infer_false: Vec::new(),
            expect_contradiction: false,
            rules_referenced: Vec::new(),
            explanation: String::new(),
        }
    }

    fn has_inference_conditions(&self) -> bool {
        !(self.infer_true_all.is_empty() && self.infer_true_any.is_empty() && self.infer_false.is_empty())
    }

    /// Checks the schema invariants; `index` is used only for the error.
    pub fn validate(&self, index: usize) -> Result<(), SchemaViolation> {
        let violation = |field: &str, reason: &str| SchemaViolation {
            index,
            name: self.name.clone(),
            field: field.to_string(),
            reason: reason.to_string(),
        };
        if !self.expect_contradiction && !self.has_inference_conditions() {
            return Err(violation(
                "infer_true_all",
                "test has no condition (all infer lists empty and expect_contradiction false)",
            ));
        }
        if self.expect_contradiction && self.has_inference_conditions() {
            return Err(violation(
                "expect_contradiction",
                "a test expecting a contradiction cannot also list infer conditions",
            ));
        }
        if let Some(l) = self.facts.iter().find(|l| !l.is_ground()) {
            return Err(violation("facts", &format!("`{l}` is not ground")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    InferTrueAll,
    InferTrueAny,
    InferFalse,
    ExpectContradiction,
}

impl ConditionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionKind::InferTrueAll => "infer_true_all",
            ConditionKind::InferTrueAny => "infer_true_any",
            ConditionKind::InferFalse => "infer_false",
            ConditionKind::ExpectContradiction => "expect_contradiction",
        }
    }
}

/// Why a condition failed, as far as the solver can show it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// Minimal set of rules entailing an unexpected literal.
    Proof(Explanation),
    /// One answer set illustrating the failure.
    AnswerSet(Vec<Literal>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedCondition {
    pub kind: ConditionKind,
    pub literal: Option<Literal>,
    pub evidence: Option<Evidence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: LogicTest,
    pub status: TestStatus,
    pub failed_conditions: Vec<FailedCondition>,
    /// Minimal core behind an unexpected contradiction.
    pub explanation: Option<Explanation>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub results: Vec<TestResult>,
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
    pub all_passed: bool,
}

impl SuiteReport {
    pub fn from_results(results: Vec<TestResult>) -> Self {
        let count = |s: TestStatus| results.iter().filter(|r| r.status == s).count();
        let (passed, failed, errored) = (count(TestStatus::Pass), count(TestStatus::Fail), count(TestStatus::Error));
        SuiteReport { all_passed: failed == 0 && errored == 0, results, passed, failed, errored }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HarnessOptions {
    /// Gather proofs and example answer sets for failed conditions.
    pub evidence: bool,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions { evidence: true }
    }
}

pub fn run_test(program: &LogicProgram, test: &LogicTest, solver: &Solver) -> TestResult {
    run_test_with(program, test, solver, HarnessOptions::default())
}

pub fn run_test_with(
    program: &LogicProgram,
    test: &LogicTest,
    solver: &Solver,
    options: HarnessOptions,
) -> TestResult {
    match check(program, test, solver, options) {
        Ok(result) => result,
        Err(e) => TestResult {
            test: test.clone(),
            status: TestStatus::Error,
            failed_conditions: Vec::new(),
            explanation: None,
            detail: e,
        },
    }
}

fn check(
    program: &LogicProgram,
    test: &LogicTest,
    solver: &Solver,
    options: HarnessOptions,
) -> Result<TestResult, String> {
    let extended = splice(program, &test.facts, &BTreeSet::new()).map_err(|e| e.to_string())?;
    let text = render_program(&extended, false);
    let solver_err = |e: SolverError| e.to_string();

    let brave = solver.consequences(&text, ConsequenceMode::Brave).map_err(solver_err)?;
    let mut failed = Vec::new();
    let mut explanation = None;
    let mut detail = String::new();

    let Some(brave) = brave else {
        if !test.expect_contradiction {
            let all = test.infer_true_all.iter().map(|l| (ConditionKind::InferTrueAll, l));
            let any = test.infer_true_any.iter().map(|l| (ConditionKind::InferTrueAny, l));
            let never = test.infer_false.iter().map(|l| (ConditionKind::InferFalse, l));
            failed = all
                .chain(any)
                .chain(never)
                .map(|(kind, l)| FailedCondition { kind, literal: Some(l.clone()), evidence: None })
                .collect();
            detail = CONTRADICTORY_DETAIL.to_string();
            if options.evidence {
                explanation = minimal_unsat_core(&extended, &BTreeSet::new(), solver)
                    .ok()
                    .map(|core| Explanation::new("contradiction", &extended, core));
            }
        }
        return Ok(finish(test, failed, explanation, detail));
    };

    if test.expect_contradiction {
        let evidence = if options.evidence { one_model(solver, &text, None)? } else { None };
        failed.push(FailedCondition { kind: ConditionKind::ExpectContradiction, literal: None, evidence });
        return Ok(finish(test, failed, None, "program is satisfiable under test facts".into()));
    }

    let cautious = if test.infer_true_all.is_empty() && !(options.evidence && !test.infer_false.is_empty()) {
        None
    } else {
        solver.consequences(&text, ConsequenceMode::Cautious).map_err(solver_err)?
    };

    for l in &test.infer_true_all {
        let holds = cautious.as_ref().is_some_and(|c| c.contains(l));
        if !holds {
            let evidence = if options.evidence {
                one_model(solver, &text, Some(&format!(":- {l}.")))?
            } else {
                None
            };
            failed.push(FailedCondition { kind: ConditionKind::InferTrueAll, literal: Some(l.clone()), evidence });
        }
    }
    for l in &test.infer_true_any {
        if !brave.contains(l) {
            let evidence = if options.evidence { one_model(solver, &text, None)? } else { None };
            failed.push(FailedCondition { kind: ConditionKind::InferTrueAny, literal: Some(l.clone()), evidence });
        }
    }
    for l in &test.infer_false {
        if brave.contains(l) {
            let evidence = if !options.evidence {
                None
            } else if cautious.as_ref().is_some_and(|c| c.contains(l)) {
                explain_entailment(&extended, l, solver).ok().map(Evidence::Proof)
            } else {
                one_model(solver, &text, Some(&format!(":- not {l}.")))?
            };
            failed.push(FailedCondition { kind: ConditionKind::InferFalse, literal: Some(l.clone()), evidence });
        }
    }
    Ok(finish(test, failed, None, detail))
}

fn one_model(solver: &Solver, text: &str, extra: Option<&str>) -> Result<Option<Evidence>, String> {
    let text = match extra {
        Some(c) => format!("{text}{c}\n"),
        None => text.to_string(),
    };
    let result = solver.solve(&text, 1).map_err(|e| e.to_string())?;
    Ok(match result.status {
        SolveStatus::Sat => result
            .answer_sets
            .into_iter()
            .next()
            .map(|m: AnswerSet| Evidence::AnswerSet(m.into_iter().collect())),
        _ => None,
    })
}

fn finish(
    test: &LogicTest,
    failed_conditions: Vec<FailedCondition>,
    explanation: Option<Explanation>,
    detail: String,
) -> TestResult {
    let status = if failed_conditions.is_empty() { TestStatus::Pass } else { TestStatus::Fail };
    TestResult { test: test.clone(), status, failed_conditions, explanation, detail }
}

/// Runs every test; results keep the input order.
pub fn run_suite(program: &LogicProgram, tests: &[LogicTest], solver: &Solver) -> SuiteReport {
    run_suite_with(program, tests, solver, HarnessOptions::default())
}

pub fn run_suite_with(
    program: &LogicProgram,
    tests: &[LogicTest],
    solver: &Solver,
    options: HarnessOptions,
) -> SuiteReport {
    SuiteReport::from_results(tests.iter().map(|t| run_test_with(program, t, solver, options)).collect())
}

/// Parses a test document: a JSON array of test objects (or an object with
/// a `tests` array). Keys are matched case-insensitively with `-` and `_`
/// interchangeable, so `infer-True-All` reads as `infer_true_all`.
pub fn parse_tests(text: &str) -> Result<Vec<LogicTest>, SchemaViolation> {
    let doc_error = |reason: String| SchemaViolation {
        index: 0,
        name: String::new(),
        field: "<document>".into(),
        reason,
    };
    let value: Value = serde_json::from_str(text.trim()).map_err(|e| doc_error(e.to_string()))?;
    let items = match value {
        Value::Array(items) => items,
        Value::Object(mut obj) => match obj.remove("tests") {
            Some(Value::Array(items)) => items,
            _ => return Err(doc_error("expected an array of tests".into())),
        },
        _ => return Err(doc_error("expected an array of tests".into())),
    };
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let index = i + 1;
            let obj = item.as_object().ok_or_else(|| SchemaViolation {
                index,
                name: String::new(),
                field: "<test>".into(),
                reason: "each test must be an object".into(),
            })?;
            let test = test_from_object(index, obj)?;
            test.validate(index)?;
            Ok(test)
        })
        .collect()
}

fn canonical_key(key: &str) -> String {
    let k = key.trim().to_ascii_lowercase().replace(['-', ' '], "_");
    match k.as_str() {
        "test_explanation" | "rationale" => "explanation".into(),
        "test_name" | "id" => "name".into(),
        _ => k,
    }
}

fn test_from_object(index: usize, obj: &Map<String, Value>) -> Result<LogicTest, SchemaViolation> {
    let mut test = LogicTest::named(&format!("T{index}"));
    if let Some(Value::String(n)) = obj.iter().find(|(k, _)| canonical_key(k) == "name").map(|(_, v)| v) {
        test.name = n.clone();
    }
    let violation = |field: &str, reason: String, name: &str| SchemaViolation {
        index,
        name: name.to_string(),
        field: field.to_string(),
        reason,
    };
    for (key, value) in obj {
        let field = canonical_key(key);
        let name = test.name.clone();
        match field.as_str() {
            "name" => {
                if !value.is_string() {
                    return Err(violation("name", "expected a string".into(), &name));
                }
            }
            "facts" | "infer_true_all" | "infer_true_any" | "infer_false" => {
                let lits = literal_list(value).map_err(|r| violation(&field, r, &name))?;
                match field.as_str() {
                    "facts" => test.facts = lits,
                    "infer_true_all" => test.infer_true_all = lits,
                    "infer_true_any" => test.infer_true_any = lits,
                    _ => test.infer_false = lits,
                }
            }
            "expect_contradiction" => {
                test.expect_contradiction = match value {
                    Value::Bool(b) => *b,
                    Value::Null => false,
                    _ => return Err(violation(&field, "expected a boolean".into(), &name)),
                }
            }
            "rules_referenced" => {
                test.rules_referenced = string_list(value).map_err(|r| violation(&field, r, &name))?
            }
            "explanation" => match value {
                Value::String(s) => test.explanation = s.clone(),
                Value::Null => {}
                _ => return Err(violation(&field, "expected a string".into(), &name)),
            },
            _ => return Err(violation(key, "unknown field".into(), &name)),
        }
    }
    Ok(test)
}

fn string_list(value: &Value) -> Result<Vec<String>, String> {
    match value {
        Value::Null => Ok(Vec::new()),
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| "expected a list of strings".to_string()))
            .collect(),
        _ => Err("expected a list of strings".into()),
    }
}

fn literal_list(value: &Value) -> Result<Vec<Literal>, String> {
    string_list(value)?
        .iter()
        .map(|s| {
            let s = s.trim().trim_end_matches('.');
            s.parse::<Literal>().map_err(|e| e.to_string())
        })
        .collect()
}

/// Writes tests in the canonical document form read by [`parse_tests`].
pub fn serialize_tests(tests: &[LogicTest]) -> String {
    serde_json::to_string_pretty(tests).expect("tests serialize")
}
