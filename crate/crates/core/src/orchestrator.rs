//! The self-correction loop: generate, compile, test, give feedback,
//! repair; plus dialog-trace collection from finished runs.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor::{
    invoke, render_response, Actor, ActorRequest, ActorResponse, CallKey, ChatMessage, Mode, PromptAssets,
    PromptProfile, Role,
};
use crate::explain::render_feedback;
use crate::harness::{parse_tests, run_suite, SuiteReport};
use crate::program::{parse_program, ProgramError};
use crate::query::{evaluate, parse_query, Label, Verdict};
use crate::solver::{CompileError, Solver, SolverConfig, DEFAULT_MODEL_CAP, DEFAULT_TIMEOUT};

/// Appended to the Critic feedback the first time the Actor resubmits
/// unchanged artifacts.
pub const STALL_DIRECTIVE: &str = "Your last answer was identical to the previous one. You must modify at least \
one of the program, the tests or the query.";

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StallPolicy {
    #[default]
    EscalateThenStop,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub max_iterations: usize,
    pub model_cap: usize,
    pub solve_timeout_ms: u64,
    pub stall_policy: StallPolicy,
    pub prompt_profile: PromptProfile,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_iterations: 4,
            model_cap: DEFAULT_MODEL_CAP,
            solve_timeout_ms: DEFAULT_TIMEOUT.as_millis() as u64,
            stall_policy: StallPolicy::EscalateThenStop,
            prompt_profile: PromptProfile::FewShot8,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), LoopError> {
        if self.max_iterations == 0 {
            return Err(LoopError::ZeroIterations);
        }
        Ok(())
    }

    /// A solver using this configuration's cap and timeout.
    pub fn solver(&self, command: Option<Vec<String>>) -> Solver {
        let mut config = SolverConfig {
            model_cap: self.model_cap,
            timeout: Duration::from_millis(self.solve_timeout_ms),
            ..SolverConfig::default()
        };
        if let Some(cmd) = command {
            config.command = cmd;
        }
        Solver::new(config)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub premises: Vec<String>,
    pub conclusion: String,
}

impl Problem {
    /// The problem in the exemplars' `Input:` / `Query:` layout.
    pub fn problem_text(&self) -> String {
        format!("Input:\n{}\nQuery: {}", self.premises.join("\n"), self.conclusion)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub actor_request: ActorRequest,
    pub actor_response: Option<ActorResponse>,
    pub actor_error: Option<String>,
    pub compile_errors: Vec<CompileError>,
    /// Problems reading the tests document or the query.
    pub artifact_errors: Vec<String>,
    pub suite_report: Option<SuiteReport>,
    pub verdict: Option<Verdict>,
    pub eval_error: Option<String>,
    pub changed: bool,
    /// Critic feedback produced for this iteration, if the loop continued.
    pub feedback: Option<String>,
}

impl IterationRecord {
    /// All three artifacts were well formed and the program compiled.
    pub fn compiled(&self) -> bool {
        self.actor_response.is_some() && self.compile_errors.is_empty() && self.artifact_errors.is_empty()
    }

    pub fn all_tests_passed(&self) -> bool {
        self.suite_report.as_ref().is_some_and(|r| r.all_passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    AllTestsPassed,
    MaxIterations,
    Stalled,
    ActorError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FinalVerdict {
    True,
    False,
    Uncertain,
    Abstain,
}

impl From<Label> for FinalVerdict {
    fn from(l: Label) -> Self {
        match l {
            Label::True => FinalVerdict::True,
            Label::False => FinalVerdict::False,
            Label::Uncertain => FinalVerdict::Uncertain,
        }
    }
}

impl FinalVerdict {
    pub fn matches(self, gold: Label) -> bool {
        self == FinalVerdict::from(gold)
    }
}

impl fmt::Display for FinalVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FinalVerdict::True => "True",
            FinalVerdict::False => "False",
            FinalVerdict::Uncertain => "Uncertain",
            FinalVerdict::Abstain => "Abstain",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub problem_id: String,
    pub final_verdict: FinalVerdict,
    pub terminal_reason: TerminalReason,
    pub iterations: Vec<IterationRecord>,
    pub actor_parameters: BTreeMap<String, String>,
}

impl ProblemOutcome {
    /// Verdict as it stood after `iteration` (1-based): the verdict of the
    /// last compiled iteration up to that point. Later iterations repeat the
    /// final verdict.
    pub fn verdict_at(&self, iteration: usize) -> FinalVerdict {
        verdict_from(self.iterations.iter().take(iteration))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }
}

fn verdict_from<'a>(records: impl Iterator<Item = &'a IterationRecord>) -> FinalVerdict {
    match records.filter(|r| r.compiled()).last() {
        None => FinalVerdict::Abstain,
        Some(r) => r.verdict.as_ref().map(|v| v.value.into()).unwrap_or(FinalVerdict::Uncertain),
    }
}

/// True when the Actor resubmitted byte-identical program, tests and query.
pub fn detect_stall(prev: &IterationRecord, curr: &IterationRecord) -> bool {
    match (&prev.actor_response, &curr.actor_response) {
        (Some(a), Some(b)) => {
            a.program_text == b.program_text && a.tests_text == b.tests_text && a.query_text == b.query_text
        }
        _ => false,
    }
}

fn program_error_to_compile(e: &ProgramError) -> CompileError {
    let line = match e {
        ProgramError::MalformedAnnotation { line, .. } | ProgramError::UnterminatedStatement { line } => *line,
        _ => 1,
    };
    CompileError { line, column: None, message: e.to_string(), mapped_rule_id: None }
}

/// Checks all three artifacts, runs the suite and evaluates the query.
fn critique(record: &mut IterationRecord, response: &ActorResponse, solver: &Solver) {
    match solver.diagnostics(&response.program_text) {
        Ok(errors) => record.compile_errors = errors,
        Err(e) => record.compile_errors.push(CompileError {
            line: 1,
            column: None,
            message: format!("solver failure: {e}"),
            mapped_rule_id: None,
        }),
    }
    let program = match parse_program(&response.program_text) {
        Ok(p) => Some(p),
        Err(e) => {
            if record.compile_errors.is_empty() {
                record.compile_errors.push(program_error_to_compile(&e));
            }
            None
        }
    };
    let tests = parse_tests(&response.tests_text).map_err(|e| record.artifact_errors.push(format!("tests: {e}"))).ok();
    let plan = parse_query(&response.query_text).map_err(|e| record.artifact_errors.push(format!("query: {e}"))).ok();
    if !record.compiled() {
        return;
    }
    let (Some(program), Some(tests), Some(plan)) = (program, tests, plan) else { return };
    record.suite_report = Some(run_suite(&program, &tests, solver));
    match evaluate(&program, &plan, solver) {
        Ok(v) => record.verdict = Some(v),
        Err(e) => record.eval_error = Some(e.to_string()),
    }
}

fn compile_feedback(record: &IterationRecord) -> String {
    let mut text = render_feedback(&SuiteReport::default(), &record.compile_errors);
    if !record.artifact_errors.is_empty() {
        text.push_str(&format!("ARTIFACT ERRORS: {}\n", record.artifact_errors.len()));
        for e in &record.artifact_errors {
            text.push_str(&format!("- {e}\n"));
        }
    }
    text
}

fn repair_request(prev: &ActorRequest, response: &ActorResponse, mode: Mode, feedback: String) -> ActorRequest {
    ActorRequest {
        mode,
        problem_text: prev.problem_text.clone(),
        prior_program: Some(response.program_text.clone()),
        prior_tests: Some(response.tests_text.clone()),
        prior_query: Some(response.query_text.clone()),
        critic_feedback: Some(feedback),
        prompt_profile: prev.prompt_profile,
    }
}

/// Runs the loop for one problem. Actor calls never exceed
/// `config.max_iterations`.
pub fn run_problem(
    problem: &Problem,
    actor: &dyn Actor,
    assets: &PromptAssets,
    config: &LoopConfig,
    solver: &Solver,
) -> Result<ProblemOutcome, LoopError> {
    config.validate()?;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut request = ActorRequest::generate(&problem.problem_text(), config.prompt_profile);
    let mut escalated = false;
    let mut terminal = TerminalReason::MaxIterations;

    for i in 1..=config.max_iterations {
        let key = CallKey { problem_id: problem.id.clone(), iteration: i };
        let mut record = IterationRecord {
            iteration: i,
            actor_request: request.clone(),
            actor_response: None,
            actor_error: None,
            compile_errors: Vec::new(),
            artifact_errors: Vec::new(),
            suite_report: None,
            verdict: None,
            eval_error: None,
            changed: true,
            feedback: None,
        };
        let response = match invoke(actor, assets, &request, &key) {
            Ok(r) => r,
            Err(e) => {
                record.actor_error = Some(e.to_string());
                iterations.push(record);
                terminal = TerminalReason::ActorError;
                break;
            }
        };
        record.actor_response = Some(response.clone());
        if let Some(prev) = iterations.last() {
            record.changed = !detect_stall(prev, &record);
        }
        critique(&mut record, &response, solver);

        if record.compiled() && record.all_tests_passed() {
            iterations.push(record);
            terminal = TerminalReason::AllTestsPassed;
            break;
        }
        let (mode, mut feedback) = if record.compiled() {
            (Mode::FixTests, render_feedback(record.suite_report.as_ref().expect("compiled iteration has a report"), &[]))
        } else {
            (Mode::FixCompile, compile_feedback(&record))
        };
        if !record.changed {
            if config.stall_policy == StallPolicy::Stop || escalated {
                iterations.push(record);
                terminal = TerminalReason::Stalled;
                break;
            }
            escalated = true;
            feedback.push('\n');
            feedback.push_str(STALL_DIRECTIVE);
            feedback.push('\n');
        }
        request = repair_request(&request, &response, mode, feedback.clone());
        record.feedback = Some(feedback);
        iterations.push(record);
    }

    Ok(ProblemOutcome {
        problem_id: problem.id.clone(),
        final_verdict: verdict_from(iterations.iter()),
        terminal_reason: terminal,
        iterations,
        actor_parameters: actor.parameters(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    CompileFix,
    TestFix,
    Direct,
}

impl TraceKind {
    pub fn turn_count(self) -> usize {
        match self {
            TraceKind::Direct => 2,
            _ => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::CompileFix => "compile_fix",
            TraceKind::TestFix => "test_fix",
            TraceKind::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogTrace {
    pub kind: TraceKind,
    pub problem_id: String,
    pub gold_label: Label,
    #[serde(rename = "messages")]
    pub turns: Vec<ChatMessage>,
}

impl DialogTrace {
    /// Turn count matches the kind and roles alternate user/assistant.
    pub fn is_well_formed(&self) -> bool {
        self.turns.len() == self.kind.turn_count()
            && self.turns.iter().enumerate().all(|(i, t)| {
                t.role == if i % 2 == 0 { Role::User } else { Role::Assistant } && !t.content.trim().is_empty()
            })
    }
}

fn artifacts(r: &IterationRecord) -> String {
    let resp = r.actor_response.as_ref().expect("traced iterations have responses");
    render_response(&resp.program_text, &resp.tests_text, &resp.query_text)
}

/// Training traces from a finished run: only when the final verdict is
/// correct, and only the last rectification step of each kind.
pub fn collect_traces(outcome: &ProblemOutcome, gold_label: Label) -> Vec<DialogTrace> {
    if !outcome.final_verdict.matches(gold_label) {
        return Vec::new();
    }
    let its = &outcome.iterations;
    let Some(first) = its.first() else { return Vec::new() };
    let input = first.actor_request.problem_text.clone();
    let trace = |kind, turns| DialogTrace { kind, problem_id: outcome.problem_id.clone(), gold_label, turns };
    let fix = |kind, prev: &IterationRecord, curr: &IterationRecord| {
        trace(
            kind,
            vec![
                ChatMessage::new(Role::User, input.clone()),
                ChatMessage::new(Role::Assistant, artifacts(prev)),
                ChatMessage::new(Role::User, prev.feedback.clone().unwrap_or_default()),
                ChatMessage::new(Role::Assistant, artifacts(curr)),
            ],
        )
    };

    let mut traces = Vec::new();
    let pairs = || its.windows(2).rev();
    let has_response = |r: &IterationRecord| r.actor_response.is_some() && r.feedback.is_some();
    if let Some(w) = pairs().find(|w| has_response(&w[0]) && !w[0].compiled() && w[1].compiled()) {
        traces.push(fix(TraceKind::CompileFix, &w[0], &w[1]));
    }
    if let Some(w) =
        pairs().find(|w| has_response(&w[0]) && w[0].compiled() && !w[0].all_tests_passed() && w[1].all_tests_passed())
    {
        traces.push(fix(TraceKind::TestFix, &w[0], &w[1]));
    }
    if first.compiled() && first.all_tests_passed() {
        traces.push(trace(
            TraceKind::Direct,
            vec![ChatMessage::new(Role::User, input.clone()), ChatMessage::new(Role::Assistant, artifacts(first))],
        ));
    }
    traces
}
