//! FOLIO ingestion, benchmark runs, per-iteration statistics and
//! fine-tuning trace export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::actor::{Actor, PromptAssets};
use crate::orchestrator::{collect_traces, run_problem, DialogTrace, FinalVerdict, LoopConfig, Problem, ProblemOutcome, TraceKind};
use crate::query::Label;
use crate::solver::Solver;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordViolation {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum FolioError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{} invalid record(s); first at line {}: {}", .0.len(), .0[0].line, .0[0].reason)]
    Schema(Vec<RecordViolation>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FolioProblem {
    pub id: String,
    pub premises: Vec<String>,
    pub conclusion: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fol_annotations: Option<Value>,
}

impl FolioProblem {
    pub fn problem(&self) -> Problem {
        Problem { id: self.id.clone(), premises: self.premises.clone(), conclusion: self.conclusion.clone() }
    }
}

fn field<'a>(obj: &'a Map<String, Value>, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| obj.get(*n))
}

fn record_from_value(line: usize, value: Value) -> Result<FolioProblem, String> {
    let Value::Object(obj) = value else { return Err("expected a JSON object".into()) };
    let id = match field(&obj, &["id", "example_id"]) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err("`id` must be a string or number".into()),
        None => format!("line{line}"),
    };
    let premises: Vec<String> = match field(&obj, &["premises"]) {
        Some(Value::String(s)) => s.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(|s| s.trim().to_string()).ok_or("`premises` must hold strings"))
            .collect::<Result<_, _>>()?,
        _ => return Err("missing `premises`".into()),
    };
    if premises.is_empty() {
        return Err("`premises` is empty".into());
    }
    let conclusion = match field(&obj, &["conclusion"]) {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        _ => return Err("missing `conclusion`".into()),
    };
    let label = match field(&obj, &["label"]) {
        Some(Value::String(s)) => {
            Label::parse_loose(s).ok_or_else(|| format!("label `{s}` is not True, False or Uncertain"))?
        }
        _ => return Err("missing `label`".into()),
    };
    let fol_annotations = match field(&obj, &["fol_annotations"]) {
        Some(v) => Some(v.clone()),
        None => {
            let fol: Map<String, Value> = obj
                .iter()
                .filter(|(k, _)| k.to_ascii_lowercase().contains("fol"))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            (!fol.is_empty()).then_some(Value::Object(fol))
        }
    };
    Ok(FolioProblem { id, premises, conclusion, label, fol_annotations })
}

/// Parses newline-delimited FOLIO records. Every bad line is reported.
pub fn parse_folio(text: &str) -> Result<Vec<FolioProblem>, FolioError> {
    let mut problems = Vec::new();
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(raw)
            .map_err(|e| e.to_string())
            .and_then(|v| record_from_value(line, v));
        match parsed {
            Ok(p) if !seen.insert(p.id.clone()) => {
                violations.push(RecordViolation { line, reason: format!("duplicate id `{}`", p.id) })
            }
            Ok(p) => problems.push(p),
            Err(reason) => violations.push(RecordViolation { line, reason }),
        }
    }
    if violations.is_empty() {
        Ok(problems)
    } else {
        Err(FolioError::Schema(violations))
    }
}

pub fn load_folio(path: &Path) -> Result<Vec<FolioProblem>, FolioError> {
    let text = fs::read_to_string(path).map_err(|source| FolioError::Io { path: path.display().to_string(), source })?;
    parse_folio(&text)
}

pub fn render_folio(problems: &[FolioProblem]) -> String {
    problems.iter().map(|p| serde_json::to_string(p).expect("problem serializes") + "\n").collect()
}

pub fn dump_folio(problems: &[FolioProblem], path: &Path) -> Result<(), FolioError> {
    fs::write(path, render_folio(problems)).map_err(|source| FolioError::Io { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: usize,
    /// Fraction correct using each problem's verdict as of this iteration.
    pub accuracy: f64,
    /// Percentage of problems whose latest program so far compiled.
    pub compiled_pct: f64,
    /// Percentage of problems whose latest suite so far fully passed.
    pub tests_passed_pct: f64,
    pub mean_tests: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub n_problems: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_iteration: Vec<IterationRow>,
    /// Rows are gold labels, columns predictions, both in True, False,
    /// Uncertain order. Abstentions are counted separately.
    pub confusion: [[usize; 3]; 3],
    pub abstentions: usize,
    pub terminal_reasons: BTreeMap<String, usize>,
    pub actor_parameters: BTreeMap<String, String>,
}

fn label_index(l: Label) -> usize {
    Label::ALL.iter().position(|x| *x == l).expect("label")
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        round4(100.0 * n as f64 / d as f64)
    }
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Builds the report from outcomes, independent of their order.
pub fn summarize(outcomes: &[ProblemOutcome], gold: &BTreeMap<String, Label>) -> BenchmarkReport {
    let mut sorted: Vec<&ProblemOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    let n = sorted.len();
    let gold_of = |o: &ProblemOutcome| gold.get(&o.problem_id).copied();

    let mut confusion = [[0usize; 3]; 3];
    let mut abstentions = 0;
    let mut correct = 0;
    let mut terminal_reasons = BTreeMap::new();
    for o in &sorted {
        let reason = serde_json::to_value(o.terminal_reason).expect("reason").as_str().unwrap_or_default().to_string();
        *terminal_reasons.entry(reason).or_insert(0) += 1;
        let Some(g) = gold_of(o) else { continue };
        match o.final_verdict {
            FinalVerdict::Abstain => abstentions += 1,
            v => {
                let p = match v {
                    FinalVerdict::True => Label::True,
                    FinalVerdict::False => Label::False,
                    _ => Label::Uncertain,
                };
                confusion[label_index(g)][label_index(p)] += 1;
                if p == g {
                    correct += 1;
                }
            }
        }
    }

    let rows = sorted.iter().map(|o| o.iterations.len()).max().unwrap_or(0);
    let per_iteration = (1..=rows)
        .map(|k| {
            let mut right = 0;
            let mut compiled = 0;
            let mut passed = 0;
            let mut tests = 0usize;
            for o in &sorted {
                if gold_of(o).is_some_and(|g| o.verdict_at(k).matches(g)) {
                    right += 1;
                }
                if let Some(latest) = o.iterations.iter().take(k).rfind(|r| r.actor_response.is_some()) {
                    if latest.compiled() {
                        compiled += 1;
                    }
                    if latest.all_tests_passed() {
                        passed += 1;
                    }
                    tests += latest.suite_report.as_ref().map_or(0, |r| r.results.len());
                }
            }
            IterationRow {
                iteration: k,
                accuracy: if n == 0 { 0.0 } else { round4(right as f64 / n as f64) },
                compiled_pct: pct(compiled, n),
                tests_passed_pct: pct(passed, n),
                mean_tests: if n == 0 { 0.0 } else { round4(tests as f64 / n as f64) },
            }
        })
        .collect();

    BenchmarkReport {
        n_problems: n,
        correct,
        accuracy: if n == 0 { 0.0 } else { round4(correct as f64 / n as f64) },
        per_iteration,
        confusion,
        abstentions,
        terminal_reasons,
        actor_parameters: sorted.first().map(|o| o.actor_parameters.clone()).unwrap_or_default(),
    }
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "problems: {}", self.n_problems);
        let _ = writeln!(out, "accuracy: {:.4} ({} correct, {} abstained)", self.accuracy, self.correct, self.abstentions);
        let _ = writeln!(out, "\niteration  accuracy  compiled%  passed%  mean_tests");
        for r in &self.per_iteration {
            let _ = writeln!(
                out,
                "{:>9}  {:>8.4}  {:>9.2}  {:>7.2}  {:>10.2}",
                r.iteration, r.accuracy, r.compiled_pct, r.tests_passed_pct, r.mean_tests
            );
        }
        let _ = writeln!(out, "\nconfusion (rows gold, columns predicted): True False Uncertain");
        for (label, row) in Label::ALL.iter().zip(&self.confusion) {
            let _ = writeln!(out, "{:>9}: {:>4} {:>5} {:>9}", format!("{label:?}"), row[0], row[1], row[2]);
        }
        let _ = writeln!(out, "\nterminal reasons:");
        for (reason, count) in &self.terminal_reasons {
            let _ = writeln!(out, "  {reason}: {count}");
        }
        out
    }
}

/// Runs every problem through the loop on `workers` threads. Outcomes are
/// returned sorted by problem id.
pub fn run_benchmark(
    problems: &[FolioProblem],
    actor: &dyn Actor,
    assets: &PromptAssets,
    config: &LoopConfig,
    solver: &Solver,
    workers: usize,
) -> Result<(BenchmarkReport, Vec<ProblemOutcome>), crate::orchestrator::LoopError> {
    config.validate()?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<ProblemOutcome>> = Mutex::new(Vec::with_capacity(problems.len()));
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(problems.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = problems.get(i) else { break };
                let outcome = run_problem(&p.problem(), actor, assets, config, solver).expect("config validated");
                results.lock().expect("results lock").push(outcome);
            });
        }
    });
    let mut outcomes = results.into_inner().expect("results lock");
    outcomes.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    let gold: BTreeMap<String, Label> = problems.iter().map(|p| (p.id.clone(), p.label)).collect();
    Ok((summarize(&outcomes, &gold), outcomes))
}

/// Writes one outcome file per problem: `<dir>/<problem-id>.json`.
pub fn write_outcomes(outcomes: &[ProblemOutcome], dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for o in outcomes {
        fs::write(dir.join(format!("{}.json", o.problem_id)), o.to_json() + "\n")?;
    }
    Ok(())
}

/// Reads every `*.json` outcome in a directory, sorted by problem id.
pub fn read_outcomes(dir: &Path) -> io::Result<Vec<ProblemOutcome>> {
    let mut outcomes = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path)?;
            let o: ProblemOutcome = serde_json::from_str(&text)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
            outcomes.push(o);
        }
    }
    outcomes.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
}

impl TraceManifest {
    fn from_traces(traces: &[DialogTrace]) -> Self {
        let mut counts: BTreeMap<String, usize> =
            [TraceKind::CompileFix, TraceKind::TestFix, TraceKind::Direct].iter().map(|k| (k.as_str().to_string(), 0)).collect();
        for t in traces {
            *counts.entry(t.kind.as_str().to_string()).or_insert(0) += 1;
        }
        TraceManifest { total: traces.len(), counts }
    }
}

/// The manifest written next to a trace file.
pub fn manifest_path(trace_path: &Path) -> PathBuf {
    let mut name = trace_path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    trace_path.with_file_name(name)
}

/// Writes every collected trace as one JSON line, plus a manifest with
/// per-kind counts. Outcomes without a gold label are skipped.
pub fn export_traces(
    outcomes: &[ProblemOutcome],
    gold: &BTreeMap<String, Label>,
    path: &Path,
) -> io::Result<TraceManifest> {
    let mut sorted: Vec<&ProblemOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    let traces: Vec<DialogTrace> = sorted
        .iter()
        .filter_map(|o| gold.get(&o.problem_id).map(|g| collect_traces(o, *g)))
        .flatten()
        .collect();
    let body: String = traces.iter().map(|t| serde_json::to_string(t).expect("trace serializes") + "\n").collect();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, body)?;
    let manifest = TraceManifest::from_traces(&traces);
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")?;
    Ok(manifest)
}

/// Re-reads an exported trace file, checks every record's turn structure
/// and that the manifest agrees.
pub fn validate_trace_file(path: &Path) -> Result<TraceManifest, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut traces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t: DialogTrace = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        if !t.is_well_formed() {
            return Err(format!("line {}: {} trace is malformed", i + 1, t.kind.as_str()));
        }
        traces.push(t);
    }
    let found = TraceManifest::from_traces(&traces);
    let manifest_text = fs::read_to_string(manifest_path(path)).map_err(|e| e.to_string())?;
    let manifest: TraceManifest = serde_json::from_str(&manifest_text).map_err(|e| e.to_string())?;
    if manifest != found {
        return Err(format!("manifest {manifest:?} disagrees with records {found:?}"));
    }
    Ok(found)
}
