//! Command-line front end. Exit codes: 0 success, 1 domain failure (tests
//! failed, not entailed, unsatisfiable, ...), 2 usage or configuration error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use logic_critic::actor::{stratify, Actor, HttpActor, ReplayActor};
use logic_critic::benchmark::{export_traces, load_folio, read_outcomes, run_benchmark, write_outcomes};
use logic_critic::config::Config;
use logic_critic::explain::{explain_entailment, render_feedback, ExplainError};
use logic_critic::harness::{parse_tests, run_suite_with, HarnessOptions};
use logic_critic::literal::Literal;
use logic_critic::orchestrator::{run_problem, FinalVerdict};
use logic_critic::program::{parse_program, render_program, LogicProgram};
use logic_critic::query::{evaluate, parse_query, EvalError};
use logic_critic::solver::{SolveStatus, Solver};

#[derive(Parser)]
#[command(name = "logic-critic", version, about = "Actor-critic logic program generation with an ASP solver critic")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ActorChoice {
    /// Call the configured chat-completion endpoint.
    #[arg(long)]
    live: bool,
    /// Replay recorded responses from `<DIR>/<problem-id>/<iteration>.txt`.
    #[arg(long, value_name = "DIR")]
    replay: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate answer sets of a program.
    Solve {
        program: PathBuf,
        /// Maximum answer sets (0 = all).
        #[arg(long, default_value_t = 0)]
        models: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run a test suite against a program.
    Test {
        program: PathBuf,
        tests: PathBuf,
        #[arg(long)]
        json: bool,
        /// Skip proofs and example answer sets for failures.
        #[arg(long)]
        no_evidence: bool,
    },
    /// Explain why a literal holds in every answer set.
    Explain {
        program: PathBuf,
        literal: String,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a structured query.
    Query {
        program: PathBuf,
        query: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the self-correction loop on one problem.
    Run {
        /// FOLIO-style JSONL file.
        problems: PathBuf,
        /// Problem id; required when the file holds several problems.
        #[arg(long)]
        id: Option<String>,
        #[command(flatten)]
        actor: ActorChoice,
        /// Write the outcome record here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the loop over a problem file and report statistics.
    Bench {
        problems: PathBuf,
        #[command(flatten)]
        actor: ActorChoice,
        /// Output directory for report.json, report.txt and outcomes/.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Export fine-tuning dialog traces from outcome records.
    ExportTraces {
        /// Directory of outcome records written by `bench`.
        outcomes: PathBuf,
        /// Problem file holding the gold labels.
        problems: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster statements (one per line) by logical structure.
    Stratify {
        statements: PathBuf,
        #[command(flatten)]
        actor: ActorChoice,
    },
}

enum Failure {
    Domain(String),
    Usage(String),
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Reads a program, reporting solver diagnostics against the file's own
/// line numbers when it does not compile.
fn load_program(path: &Path, solver: &Solver) -> Result<LogicProgram, Failure> {
    let text = read(path)?;
    let errors = solver.diagnostics(&text).map_err(usage)?;
    if !errors.is_empty() {
        print!("{}", render_feedback(&Default::default(), &errors));
        return Err(Failure::Domain("program does not compile".into()));
    }
    parse_program(&text)
        .map(|p| p.with_origin(path.display().to_string()))
        .map_err(|e| Failure::Domain(e.to_string()))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn make_actor(choice: &ActorChoice, config: &Config) -> Result<Box<dyn Actor>, Failure> {
    match &choice.replay {
        Some(dir) => Ok(Box::new(ReplayActor::new(dir))),
        None => Ok(Box::new(HttpActor::new(config.endpoint.clone()).map_err(usage)?)),
    }
}

fn run(cli: Cli) -> CmdResult {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(usage)?,
        None => Config::default(),
    };
    let solver = config.solver();
    match cli.command {
        Command::Solve { program, models, json: as_json } => {
            let p = load_program(&program, &solver)?;
            let result = solver.solve(&render_program(&p, false), models).map_err(usage)?;
            if as_json {
                println!("{}", json(&result));
            } else {
                println!("{:?}", result.status);
                for (i, m) in result.answer_sets.iter().enumerate() {
                    let lits: Vec<String> = m.iter().map(Literal::to_string).collect();
                    println!("Answer {}: {}", i + 1, lits.join(" "));
                }
                if result.truncated {
                    println!("(more answer sets exist)");
                }
            }
            if result.status == SolveStatus::Unknown {
                return Err(Failure::Domain("solver timed out".into()));
            }
            Ok(())
        }
        Command::Test { program, tests, json: as_json, no_evidence } => {
            let p = load_program(&program, &solver)?;
            let tests = parse_tests(&read(&tests)?).map_err(usage)?;
            let report = run_suite_with(&p, &tests, &solver, HarnessOptions { evidence: !no_evidence });
            if as_json {
                println!("{}", json(&report));
            } else {
                print!("{}", render_feedback(&report, &[]));
            }
            if report.all_passed {
                Ok(())
            } else {
                Err(Failure::Domain(format!("{} failed, {} errors", report.failed, report.errored)))
            }
        }
        Command::Explain { program, literal, json: as_json } => {
            let p = load_program(&program, &solver)?;
            let lit: Literal = literal.parse().map_err(usage)?;
            match explain_entailment(&p, &lit, &solver) {
                Ok(e) if as_json => {
                    println!("{}", json(&e));
                    Ok(())
                }
                Ok(e) => {
                    println!("{} is entailed by:\n{}", e.target, e.narrative);
                    Ok(())
                }
                Err(e @ ExplainError::NotEntailed(_)) => Err(Failure::Domain(e.to_string())),
                Err(e) => Err(usage(e)),
            }
        }
        Command::Query { program, query, json: as_json } => {
            let p = load_program(&program, &solver)?;
            let plan = parse_query(&read(&query)?).map_err(usage)?;
            match evaluate(&p, &plan, &solver) {
                Ok(v) if as_json => {
                    println!("{}", json(&v));
                    Ok(())
                }
                Ok(v) => {
                    println!("{:?} ({})", v.value, v.note);
                    Ok(())
                }
                Err(e @ (EvalError::ProgramUnsatisfiable | EvalError::Undecided)) => Err(Failure::Domain(e.to_string())),
                Err(e) => Err(usage(e)),
            }
        }
        Command::Run { problems, id, actor, out } => {
            let problems = load_folio(&problems).map_err(usage)?;
            let problem = match (&id, problems.len()) {
                (Some(id), _) => problems.iter().find(|p| &p.id == id).ok_or_else(|| usage(format!("no problem `{id}`")))?,
                (None, 1) => &problems[0],
                (None, n) => return Err(usage(format!("{n} problems in file; pass --id"))),
            };
            let actor = make_actor(&actor, &config)?;
            let assets = config.assets().map_err(usage)?;
            let outcome =
                run_problem(&problem.problem(), actor.as_ref(), &assets, &config.loop_config, &solver).map_err(usage)?;
            match out {
                Some(path) => fs::write(&path, outcome.to_json() + "\n").map_err(usage)?,
                None => println!("{}", outcome.to_json()),
            }
            eprintln!(
                "{}: {} after {} iteration(s), gold {:?}",
                outcome.problem_id,
                outcome.final_verdict,
                outcome.iterations.len(),
                problem.label
            );
            if outcome.final_verdict == FinalVerdict::Abstain {
                return Err(Failure::Domain("no iteration produced a compiling program".into()));
            }
            Ok(())
        }
        Command::Bench { problems, actor, out, workers } => {
            let problems = load_folio(&problems).map_err(usage)?;
            let actor = make_actor(&actor, &config)?;
            let assets = config.assets().map_err(usage)?;
            let workers = workers.unwrap_or(config.bench.workers);
            let (report, outcomes) =
                run_benchmark(&problems, actor.as_ref(), &assets, &config.loop_config, &solver, workers).map_err(usage)?;
            fs::create_dir_all(&out).map_err(usage)?;
            write_outcomes(&outcomes, &out.join("outcomes")).map_err(usage)?;
            fs::write(out.join("report.json"), report.to_json() + "\n").map_err(usage)?;
            let text = report.render_text();
            fs::write(out.join("report.txt"), &text).map_err(usage)?;
            print!("{text}");
            Ok(())
        }
        Command::ExportTraces { outcomes, problems, out } => {
            let outcomes = read_outcomes(&outcomes).map_err(usage)?;
            let gold: BTreeMap<_, _> =
                load_folio(&problems).map_err(usage)?.into_iter().map(|p| (p.id, p.label)).collect();
            let manifest = export_traces(&outcomes, &gold, &out).map_err(usage)?;
            println!("{}", json(&manifest));
            Ok(())
        }
        Command::Stratify { statements, actor } => {
            let lines: Vec<String> =
                read(&statements)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect();
            let actor = make_actor(&actor, &config)?;
            let assets = config.assets().map_err(usage)?;
            let clusters = stratify(&lines, actor.as_ref(), &assets).map_err(|e| Failure::Domain(e.to_string()))?;
            println!("{}", json(&clusters));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
