mod common;

use std::collections::BTreeSet;
use std::time::Duration;

use logic_critic::solver::{AnswerSet, ConsequenceMode, SolveStatus, Solver, SolverConfig};

use common::{GenProgram, Head, Model};

fn strings(set: &AnswerSet) -> Model {
    set.iter().map(|l| l.to_string()).collect()
}

fn unbounded() -> Solver {
    Solver::new(SolverConfig { model_cap: 0, ..SolverConfig::default() })
}

#[test]
fn single_fact() {
    if !common::solver_available() {
        return;
    }
    let r = Solver::default().solve("p.\n", 0).unwrap();
    assert_eq!(r.status, SolveStatus::Sat);
    assert_eq!(r.answer_sets.len(), 1);
    assert_eq!(strings(&r.answer_sets[0]), Model::from(["p".to_string()]));
    assert!(!r.truncated);
}

#[test]
fn direct_contradiction() {
    if !common::solver_available() {
        return;
    }
    let r = Solver::default().solve("p. :- p.\n", 0).unwrap();
    assert_eq!(r.status, SolveStatus::Unsat);
    assert!(r.answer_sets.is_empty());
}

#[test]
fn fir_is_not_a_fish() {
    if !common::solver_available() {
        return;
    }
    let text = "-plant(X) :- fish(X).\nplant(X) :- tree(X).\ntree(fir).\n-fish(X) :- plant(X).\n";
    let r = Solver::default().solve(text, 0).unwrap();
    assert_eq!(r.status, SolveStatus::Sat);
    let target = "-fish(fir)".parse().unwrap();
    assert!(r.answer_sets.iter().all(|m| m.contains(&target)));
}

#[test]
fn enumeration_cap_truncates() {
    if !common::solver_available() {
        return;
    }
    let r = Solver::default().solve("{a; b; c}.\n", 3).unwrap();
    assert_eq!(r.status, SolveStatus::Sat);
    assert_eq!(r.answer_sets.len(), 3);
    assert!(r.truncated);
    let all = Solver::default().solve("{a; b; c}.\n", 0).unwrap();
    assert_eq!(all.answer_sets.len(), 8);
    assert!(!all.truncated);
}

#[test]
fn consequence_examples() {
    if !common::solver_available() {
        return;
    }
    let s = Solver::default();
    let cautious = s.consequences("1 {a; b} 1.\n", ConsequenceMode::Cautious).unwrap().unwrap();
    assert!(cautious.is_empty());
    let brave = s.consequences("1 {a; b} 1.\n", ConsequenceMode::Brave).unwrap().unwrap();
    assert_eq!(strings(&brave), Model::from(["a".to_string(), "b".to_string()]));
    let definite = s.consequences("p.\nq :- p.\n", ConsequenceMode::Cautious).unwrap().unwrap();
    assert_eq!(strings(&definite), Model::from(["p".to_string(), "q".to_string()]));
    assert!(s.consequences("p. :- p.\n", ConsequenceMode::Brave).unwrap().is_none());
}

#[test]
fn consequences_match_enumeration_oracle() {
    if !common::solver_available() {
        return;
    }
    let s = unbounded();
    let mut rng = common::seeded(11);
    for _ in 0..25 {
        let g = common::random_program(&mut rng, 5, 4);
        let models = g.stable_models();
        let text = g.text();
        let cautious = s.consequences(&text, ConsequenceMode::Cautious).unwrap();
        let brave = s.consequences(&text, ConsequenceMode::Brave).unwrap();
        if models.is_empty() {
            assert!(cautious.is_none() && brave.is_none(), "program:\n{text}");
            continue;
        }
        assert_eq!(strings(&cautious.unwrap()), common::cautious(&models), "program:\n{text}");
        assert_eq!(strings(&brave.unwrap()), common::brave(&models), "program:\n{text}");

        // the library's own enumeration agrees with the oracle as a set
        let r = s.solve(&text, 0).unwrap();
        let got: BTreeSet<Model> = r.answer_sets.iter().map(strings).collect();
        let want: BTreeSet<Model> = models.into_iter().collect();
        assert_eq!(got, want, "program:\n{text}");
    }
}

#[test]
fn unsat_is_monotone_for_definite_programs() {
    if !common::solver_available() {
        return;
    }
    let s = Solver::default();
    let mut rng = common::seeded(5);
    let mut checked = 0;
    while checked < 10 {
        let mut g = common::random_program(&mut rng, 6, 4);
        g.rules.retain(|r| r.neg.is_empty() && !matches!(r.head, Head::Choice { .. }));
        if g.rules.is_empty() || !g.stable_models().is_empty() {
            continue;
        }
        assert_eq!(s.solve(&g.text(), 1).unwrap().status, SolveStatus::Unsat);
        let facts = vec![common::random_literal(&mut rng, &common::ATOMS[..4])];
        let extended: GenProgram = g.with_facts(&facts);
        assert_eq!(s.solve(&extended.text(), 1).unwrap().status, SolveStatus::Unsat);
        checked += 1;
    }
}

#[test]
fn valid_program_has_no_diagnostics() {
    if !common::solver_available() {
        return;
    }
    assert!(Solver::default().diagnostics("tree(fir).").unwrap().is_empty());
}

#[test]
fn missing_terminator_at_eof() {
    if !common::solver_available() {
        return;
    }
    let errors = Solver::default().diagnostics("tree(fir)").unwrap();
    assert_eq!(errors.len(), 1, "{errors:?}");
    assert_eq!(errors[0].line, 1);
    assert!(errors[0].message.contains("syntax error"), "{}", errors[0].message);
    assert_eq!(errors[0].mapped_rule_id.as_deref(), Some("R1"));
}

#[test]
fn two_malformed_statements() {
    if !common::solver_available() {
        return;
    }
    let text = "% [R1]\np(X) :- q.\n% [R2]\nr.\n% [R3]\ns(Y) :- not t.\n";
    let errors = Solver::default().diagnostics(text).unwrap();
    assert!(errors.len() >= 2, "{errors:?}");
    let ids: Vec<_> = errors.iter().map(|e| e.mapped_rule_id.as_deref()).collect();
    assert_eq!(ids, [Some("R1"), Some("R3")]);
    assert!(errors[0].message.contains("unsafe variables"));
    assert!(errors[0].message.contains("'X' is unsafe"));
}

#[test]
fn timeout_yields_unknown() {
    if !common::solver_available() {
        return;
    }
    let config = SolverConfig { timeout: Duration::from_millis(1), ..SolverConfig::default() };
    let r = Solver::new(config).solve("{a; b; c}.\n", 0);
    match r {
        Ok(res) => assert_eq!(res.status, SolveStatus::Unknown),
        Err(e) => panic!("timeout should map to UNKNOWN, got {e}"),
    }
}

#[test]
fn missing_binary_is_unavailable() {
    let config = SolverConfig { command: vec!["/nonexistent/solver".into()], ..SolverConfig::default() };
    let err = Solver::new(config).solve("p.", 0).unwrap_err();
    assert!(err.to_string().contains("unavailable"), "{err}");
}
