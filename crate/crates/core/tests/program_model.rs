mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use logic_critic::actor::{parse_response, PromptAssets};
use logic_critic::literal::Literal;
use logic_critic::program::{parse_program, render_program, splice, ProgramError, Section};
use logic_critic::solver::Solver;

/// Program section of exemplar `k` with its `% [Rn]` annotations removed.
fn unannotated_exemplar(k: usize) -> String {
    let assets = PromptAssets::embedded();
    let ex = &assets.exemplars[k - 1];
    let resp = parse_response(&ex[ex.find("### PROGRAM").unwrap()..]).unwrap();
    resp.program_text.lines().filter(|l| !l.trim_start().starts_with("% [")).map(|l| format!("{l}\n")).collect()
}

#[test]
fn annotated_fact() {
    let p = parse_program("% [R1]\ntree(fir).").unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p.rules()[0].id, "R1");
    assert_eq!(p.rules()[0].text, "tree(fir).");
    assert_eq!(p.rules()[0].section, Section::Premise);
}

#[test]
fn empty_program() {
    assert!(parse_program("").unwrap().is_empty());
    assert!(parse_program("% only a comment\n\n").unwrap().is_empty());
}

#[test]
fn unannotated_rules_get_sequential_ids() {
    let p = parse_program(&unannotated_exemplar(7)).unwrap();
    let expected: Vec<String> = (1..=10).map(|i| format!("R{i}")).collect();
    assert_eq!(p.ids().collect::<Vec<_>>(), expected);
    let text = "a. b :- a. :- c.\n{d} :- b.\n";
    let p = parse_program(text).unwrap();
    assert_eq!(p.ids().collect::<Vec<_>>(), ["R1", "R2", "R3", "R4"]);
    for (i, r) in p.rules().iter().enumerate() {
        assert_eq!(r.source_index, i);
    }
}

#[test]
fn duplicate_ids_rejected() {
    let err = parse_program("% [R1]\na.\n% [R1]\nb.\n").unwrap_err();
    assert!(matches!(err, ProgramError::MalformedAnnotation { .. } | ProgramError::Invalid(_)), "{err:?}");
}

#[test]
fn render_examples() {
    let p = parse_program("tree(fir).").unwrap();
    assert_eq!(render_program(&p, false), "tree(fir).\n");
    assert_eq!(render_program(&p, true), "% [R1]\ntree(fir).\n");
}

#[test]
fn splice_examples() {
    let p = parse_program("% [R1]\ntree(fir).").unwrap();
    let fish: Literal = "fish(nemo)".parse().unwrap();
    let added = splice(&p, &[fish], &BTreeSet::new()).unwrap();
    assert_eq!(added.len(), 2);
    assert_eq!(added.rules()[1].text, "fish(nemo).");
    assert_eq!(added.rules()[1].section, Section::TestFact);
    assert_eq!(added.rules()[0], p.rules()[0]);

    let removed = splice(&p, &[], &BTreeSet::from(["R1".to_string()])).unwrap();
    assert!(removed.is_empty());
    // input untouched
    assert_eq!(p.len(), 1);
}

#[test]
fn splice_rejects_unknown_ids_and_variables() {
    let p = parse_program("a.").unwrap();
    assert!(matches!(
        splice(&p, &[], &BTreeSet::from(["R9".to_string()])),
        Err(ProgramError::UnknownRuleId(_))
    ));
    let open: Literal = "p(X)".parse().unwrap();
    assert!(matches!(splice(&p, &[open], &BTreeSet::new()), Err(ProgramError::NonGroundFact(_))));
}

#[test]
fn splice_matches_hand_edited_text() {
    if !common::solver_available() {
        return;
    }
    let solver = Solver::default();
    let mut rng = common::seeded(7);
    for _ in 0..10 {
        let g = common::random_program(&mut rng, 6, 4);
        let p = parse_program(&g.text()).unwrap();
        // drop every other rule, add one fact
        let remove: BTreeSet<String> = p.ids().step_by(2).map(str::to_string).collect();
        let fact = common::random_literal(&mut rng, &common::ATOMS[..4]);
        let spliced = splice(&p, &[fact.parse().unwrap()], &remove).unwrap();
        let keep: Vec<usize> = (0..g.rules.len()).filter(|i| i % 2 == 1).collect();
        let hand = g.subset(&keep).with_facts(std::slice::from_ref(&fact));
        let a = solver.solve(&render_program(&spliced, false), 0).unwrap();
        let b = solver.solve(&hand.text(), 0).unwrap();
        assert_eq!(a.status, b.status);
        let sa: BTreeSet<_> = a.answer_sets.into_iter().collect();
        let sb: BTreeSet<_> = b.answer_sets.into_iter().collect();
        assert_eq!(sa, sb, "program:\n{}", g.text());
    }
}

fn arb_statement() -> impl Strategy<Value = String> {
    let name = prop::sample::select(vec!["p", "q", "tree", "plant", "likes_x"]);
    let arg = prop::sample::select(vec!["fir", "X", "jumbo", "\"a. b\"", "42"]);
    (name.clone(), arg.clone(), name, arg, 0..4usize).prop_map(|(h, a, b, c, kind)| match kind {
        0 => format!("{h}({a})."),
        1 => format!("{h}({a}) :- {b}({c}), not -{b}({a})."),
        2 => format!(":- {h}({a}), {b}({c})."),
        _ => format!("{{{h}({a}); {b}({c})}} 1 :- {b}({a})."),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn render_then_parse_is_identity(stmts in prop::collection::vec(arb_statement(), 0..30), with_ids: bool) {
        let text = stmts.join("\n");
        let p = parse_program(&text).unwrap();
        prop_assert_eq!(p.len(), stmts.len());
        let again = parse_program(&render_program(&p, with_ids)).unwrap();
        prop_assert_eq!(p.rules(), again.rules());
    }

    #[test]
    fn splice_keeps_surviving_ids_and_order(
        n in 1..20usize,
        drop in prop::collection::btree_set(0..20usize, 0..10),
    ) {
        let text: String = (0..n).map(|i| format!("p{i}.\n")).collect();
        let p = parse_program(&text).unwrap();
        let remove: BTreeSet<String> = drop.iter().filter(|&&i| i < n).map(|i| format!("R{}", i + 1)).collect();
        let fact: Literal = "extra".parse().unwrap();
        let out = splice(&p, &[fact], &remove).unwrap();
        let survivors: Vec<&str> = p.ids().filter(|id| !remove.contains(*id)).collect();
        let kept: Vec<&str> = out.ids().take(survivors.len()).collect();
        prop_assert_eq!(&kept, &survivors);
        for id in &survivors {
            let (a, b) = (out.get(id).unwrap(), p.get(id).unwrap());
            prop_assert_eq!((&a.text, a.section), (&b.text, b.section));
        }
        for (i, r) in out.rules().iter().enumerate() {
            prop_assert_eq!(r.source_index, i);
        }
        let fresh = out.rules().last().unwrap();
        prop_assert!(p.get(&fresh.id).is_none());
        let unique: BTreeSet<&str> = out.ids().collect();
        prop_assert_eq!(unique.len(), out.len());
    }
}
