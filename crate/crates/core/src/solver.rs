//! Adapter for an external clingo-compatible solver.
//!
//! Every call spawns one subprocess, feeds the program on stdin and reads the
//! JSON report (`--outf=2`). Invocation flags and output parsing live here
//! and nowhere else.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::literal::Literal;
use crate::program::{assign_ids, scan_statements};

/// Environment variable holding the solver command line, e.g.
/// `clingo` or `python3 -m clingo`.
pub const SOLVER_ENV: &str = "LOGIC_CRITIC_SOLVER";
pub const DEFAULT_MODEL_CAP: usize = 64;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

pub type AnswerSet = BTreeSet<Literal>;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver unavailable: {0}")]
    Unavailable(String),
    #[error("solver timed out after {0:?}")]
    Timeout(Duration),
    #[error("program does not compile ({} error(s))", .0.len())]
    Syntax(Vec<CompileError>),
    #[error("unexpected solver output: {0}")]
    Failure(String),
    #[error("i/o error talking to solver: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SolveStatus {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub answer_sets: Vec<AnswerSet>,
    /// The model cap was reached and more models exist.
    pub truncated: bool,
    #[serde(skip)]
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsequenceMode {
    Cautious,
    Brave,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileError {
    pub line: usize,
    pub column: Option<usize>,
    /// The solver's diagnostic block, verbatim.
    pub message: String,
    pub mapped_rule_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub command: Vec<String>,
    /// Default enumeration cap; 0 means all models.
    pub model_cap: usize,
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: discover_command(),
            model_cap: DEFAULT_MODEL_CAP,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

/// Picks the solver command: `$LOGIC_CRITIC_SOLVER`, then `clingo` on the
/// `PATH`, then the Python module runner.
pub fn discover_command() -> Vec<String> {
    static FOUND: OnceLock<Vec<String>> = OnceLock::new();
    FOUND
        .get_or_init(|| {
            if let Ok(cmd) = std::env::var(SOLVER_ENV) {
                let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
                if !parts.is_empty() {
                    return parts;
                }
            }
            if on_path("clingo") {
                return vec!["clingo".into()];
            }
            vec!["python3".into(), "-m".into(), "clingo".into()]
        })
        .clone()
}

fn on_path(bin: &str) -> bool {
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|dir| Path::new(&dir).join(bin).is_file()))
        .unwrap_or(false)
}

#[derive(Debug, Clone, Default)]
pub struct Solver {
    pub config: SolverConfig,
}

struct RawRun {
    stdout: String,
    elapsed: Duration,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Self {
        Solver { config }
    }

    /// Enumerates up to `max_models` answer sets (0 = all).
    pub fn solve(&self, text: &str, max_models: usize) -> Result<SolveResult, SolverError> {
        let raw = match self.run(text, &[max_models.to_string()]) {
            Err(SolverError::Timeout(_)) => {
                return Ok(SolveResult {
                    status: SolveStatus::Unknown,
                    answer_sets: Vec::new(),
                    truncated: false,
                    wall_ms: self.config.timeout.as_millis(),
                })
            }
            other => other?,
        };
        let report = parse_report(&raw.stdout)?;
        let status = report.status;
        let answer_sets = if status == SolveStatus::Unsat { Vec::new() } else { report.witnesses };
        Ok(SolveResult {
            status,
            truncated: status == SolveStatus::Sat && report.more && max_models != 0,
            answer_sets,
            wall_ms: raw.elapsed.as_millis(),
        })
    }

    /// Solves with the configured model cap.
    pub fn solve_capped(&self, text: &str) -> Result<SolveResult, SolverError> {
        self.solve(text, self.config.model_cap)
    }

    /// Cautious or brave consequences via the solver's enumeration modes.
    /// `None` means the program has no answer set.
    pub fn consequences(
        &self,
        text: &str,
        mode: ConsequenceMode,
    ) -> Result<Option<AnswerSet>, SolverError> {
        let mode_flag = match mode {
            ConsequenceMode::Cautious => "--enum-mode=cautious",
            ConsequenceMode::Brave => "--enum-mode=brave",
        };
        let raw = self.run(text, &[mode_flag.to_string(), "0".to_string()])?;
        let report = parse_report(&raw.stdout)?;
        match report.status {
            SolveStatus::Unsat => Ok(None),
            SolveStatus::Unknown => Err(SolverError::Failure(
                "solver returned UNKNOWN for a consequence query".into(),
            )),
            // the last witness is the fixpoint
            SolveStatus::Sat => Ok(Some(report.witnesses.into_iter().last().unwrap_or_default())),
        }
    }

    /// Compile diagnostics for `text`; empty iff it parses and grounds.
    pub fn diagnostics(&self, text: &str) -> Result<Vec<CompileError>, SolverError> {
        match self.run(text, &["1".to_string()]) {
            Ok(_) => Ok(Vec::new()),
            Err(SolverError::Syntax(errors)) => Ok(errors),
            Err(e) => Err(e),
        }
    }

    fn run(&self, text: &str, args: &[String]) -> Result<RawRun, SolverError> {
        let (bin, base) = self
            .config
            .command
            .split_first()
            .ok_or_else(|| SolverError::Unavailable("empty solver command".into()))?;
        let started = Instant::now();
        let mut child = Command::new(bin)
            .args(base)
            .arg("--outf=2")
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => {
                    SolverError::Unavailable(format!("`{bin}` not found"))
                }
                _ => SolverError::Io(e),
            })?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = text.to_string();
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(input.as_bytes());
        });
        let mut out_pipe = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = out_pipe.read_to_string(&mut s);
            s
        });
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = err_pipe.read_to_string(&mut s);
            s
        });

        let status = child.wait_timeout(self.config.timeout)?;
        if status.is_none() {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SolverError::Timeout(self.config.timeout));
        }
        let _ = writer.join();
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();

        let errors = parse_diagnostics(&stderr, text);
        if !errors.is_empty() {
            return Err(SolverError::Syntax(errors));
        }
        if stdout.trim().is_empty() {
            if stderr.contains("No module named clingo") || stderr.contains("command not found") {
                return Err(SolverError::Unavailable(stderr.trim().to_string()));
            }
            return Err(SolverError::Failure(stderr.trim().to_string()));
        }
        Ok(RawRun { stdout, elapsed: started.elapsed() })
    }
}

struct Report {
    status: SolveStatus,
    witnesses: Vec<AnswerSet>,
    more: bool,
}

fn parse_report(stdout: &str) -> Result<Report, SolverError> {
    let json: Value = serde_json::from_str(stdout)
        .map_err(|e| SolverError::Failure(format!("bad JSON from solver: {e}")))?;
    let status = match json["Result"].as_str() {
        Some("SATISFIABLE") | Some("OPTIMUM FOUND") => SolveStatus::Sat,
        Some("UNSATISFIABLE") => SolveStatus::Unsat,
        Some("UNKNOWN") => SolveStatus::Unknown,
        other => return Err(SolverError::Failure(format!("unexpected Result field {other:?}"))),
    };
    let mut witnesses = Vec::new();
    if let Some(calls) = json["Call"].as_array() {
        for call in calls {
            for w in call["Witnesses"].as_array().into_iter().flatten() {
                let set = w["Value"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(Value::as_str)
                    // shown non-literal terms (e.g. `#show 5.`) are skipped
                    .filter_map(|s| s.parse::<Literal>().ok())
                    .collect();
                witnesses.push(set);
            }
        }
    }
    let more = json["Models"]["More"].as_str() == Some("yes");
    Ok(Report { status, witnesses, more })
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^.*?:(\d+):(\d+)(?:-(?:\d+:)?\d+)?: (error|info|warning|note): ").unwrap()
    })
}

/// Extracts `error` diagnostics from solver stderr. Each error keeps its
/// indented continuation lines and trailing `note:` lines, byte for byte.
pub fn parse_diagnostics(stderr: &str, program_text: &str) -> Vec<CompileError> {
    let n_lines = program_text.lines().count().max(1);
    let spans: Vec<(usize, usize, String)> = scan_statements(program_text)
        .ok()
        .and_then(|raw| assign_ids(&raw).ok().map(|ids| (raw, ids)))
        .map(|(raw, ids)| {
            raw.iter().zip(ids).map(|(s, id)| (s.first_line, s.last_line, id)).collect()
        })
        .unwrap_or_default();

    let mut out: Vec<CompileError> = Vec::new();
    let mut block: Option<Vec<&str>> = None;
    let mut in_error = false;
    let mut current: Option<(usize, usize)> = None;

    let mut flush = |block: &mut Option<Vec<&str>>, current: &mut Option<(usize, usize)>| {
        if let (Some(lines), Some((line, col))) = (block.take(), current.take()) {
            // EOF errors point one line past the input
            let line = line.clamp(1, n_lines);
            let mapped_rule_id = spans
                .iter()
                .find(|(first, last, _)| (*first..=*last).contains(&line))
                .map(|(_, _, id)| id.clone());
            out.push(CompileError {
                line,
                column: Some(col),
                message: lines.join("\n"),
                mapped_rule_id,
            });
        }
    };

    for line in stderr.lines() {
        if let Some(caps) = header_re().captures(line) {
            let kind = &caps[3];
            if kind == "note" && in_error {
                if let Some(b) = block.as_mut() {
                    b.push(line);
                }
                continue;
            }
            flush(&mut block, &mut current);
            in_error = kind == "error";
            if in_error {
                let l: usize = caps[1].parse().unwrap_or(1);
                let c: usize = caps[2].parse().unwrap_or(1);
                current = Some((l, c));
                block = Some(vec![line]);
            }
        } else if line.starts_with(char::is_whitespace) && !line.trim().is_empty() && in_error {
            if let Some(b) = block.as_mut() {
                b.push(line);
            }
        } else {
            flush(&mut block, &mut current);
            in_error = false;
        }
    }
    flush(&mut block, &mut current);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostics_from_recorded_stderr() {
        let stderr = "\
-:1:1-11: error: unsafe variables in:
  p(X):-[#inc_base];q.
-:1:3-4: note: 'X' is unsafe

-:3:6-7: info: atom does not occur in any rule head:
  q

-:4:3-4: error: syntax error, unexpected ., expecting ) or ;

Traceback (most recent call last):
  File \"x.py\", line 1, in <module>
*** ERROR: (pyclingo): parsing failed
";
        let text = "p(X) :- q.\nr.\n\nc(.\n";
        let errs = parse_diagnostics(stderr, text);
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[0].line, 1);
        assert_eq!(errs[0].column, Some(1));
        assert_eq!(
            errs[0].message,
            "-:1:1-11: error: unsafe variables in:\n  p(X):-[#inc_base];q.\n-:1:3-4: note: 'X' is unsafe"
        );
        assert_eq!(errs[0].mapped_rule_id.as_deref(), Some("R1"));
        assert_eq!(errs[1].line, 4);
        assert_eq!(errs[1].mapped_rule_id.as_deref(), Some("R3"));
    }

    #[test]
    fn eof_error_is_clamped_to_last_line() {
        let errs = parse_diagnostics("-:2:1-2: error: syntax error, unexpected EOF\n", "tree(fir)");
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 1);
        assert_eq!(errs[0].mapped_rule_id.as_deref(), Some("R1"));
    }

    #[test]
    fn report_parsing() {
        let json = r#"{"Result":"SATISFIABLE","Call":[{"Witnesses":[{"Value":["p","-q(a)"]},{"Value":["r"]}]}],"Models":{"Number":2,"More":"yes"}}"#;
        let r = parse_report(json).unwrap();
        assert_eq!(r.status, SolveStatus::Sat);
        assert!(r.more);
        assert_eq!(r.witnesses.len(), 2);
        assert!(r.witnesses[0].contains(&"-q(a)".parse().unwrap()));
        assert!(parse_report("not json").is_err());
    }

    #[test]
    fn missing_binary_is_unavailable() {
        let solver = Solver::new(SolverConfig {
            command: vec!["/nonexistent/solver-binary".into()],
            ..SolverConfig::default()
        });
        assert!(matches!(solver.solve("p.", 1), Err(SolverError::Unavailable(_))));
    }
}
