"""Smoke test for the logic_critic_py extension module.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/logic_critic_py-*.whl
Then run from the repository root:
    python3 python/smoke_test.py
"""

import json
import pathlib
import sys

import logic_critic_py as lc

ROOT = pathlib.Path(__file__).resolve().parent.parent
REPLAY = ROOT / "crates" / "core" / "tests" / "fixtures" / "replay"

FIR = """% [R1]
-plant(X) :- fish(X).
% [R2]
plant(X) :- tree(X).
% [R3]
tree(fir).
% [R4]
-fish(X) :- plant(X).
"""


def check(name, cond, detail=""):
    print(("ok    " if cond else "FAIL  ") + name + (f": {detail}" if detail else ""))
    return cond


def main():
    results = []
    solver = lc.Solver()

    program = lc.Program(FIR)
    results.append(check("parse", program.rule_ids == ["R1", "R2", "R3", "R4"], repr(program)))
    results.append(check("render", lc.Program(program.render(include_ids=True)).rules() == program.rules()))

    solved = solver.solve(program.render())
    results.append(check("solve", solved["status"] == "SAT" and "-fish(fir)" in solved["answer_sets"][0]))
    results.append(check("unsat", solver.solve("p. :- p.")["status"] == "UNSAT"))

    brave = solver.consequences("1 {a; b} 1.", "brave")
    cautious = solver.consequences("1 {a; b} 1.", "cautious")
    results.append(check("consequences", brave == ["a", "b"] and cautious == []))

    errors = solver.diagnostics("tree(fir)")
    results.append(check("diagnostics", len(errors) == 1 and errors[0]["line"] == 1))

    tests = json.dumps([
        {"name": "fir_plant", "infer_true_all": ["plant(fir)"]},
        {"name": "fir_not_fish", "infer_false": ["fish(fir)"]},
        {"name": "wrong", "infer_false": ["plant(fir)"]},
    ])
    report = lc.run_tests(program, tests, solver)
    results.append(check("run_tests", (report["passed"], report["failed"]) == (2, 1), str((report["passed"], report["failed"]))))
    text = lc.feedback(program, tests, solver)
    results.append(check("feedback", "plant(X) :- tree(X)." in text))

    verdict = lc.evaluate(program, "1. ATOM(-fish(fir))", solver)
    results.append(check("evaluate", verdict["value"] == "True", verdict["note"]))

    explanation = lc.explain(program, "-fish(fir)", solver)
    results.append(check("explain", explanation["core_rule_ids"] == ["R2", "R3", "R4"], str(explanation["core_rule_ids"])))

    core = lc.minimal_unsat_core(lc.Program("p.\nq.\n:- p."), solver)
    results.append(check("core", core == ["R1", "R3"], str(core)))

    spliced = program.splice(add_facts=["fish(nemo)"], remove_ids=["R3"])
    results.append(check("splice", len(spliced) == 4 and "R3" not in spliced.rule_ids))

    try:
        lc.parse_query("1. NOT(2)\n2. ATOM(p)")
        results.append(check("query errors", False))
    except ValueError:
        results.append(check("query errors", True))

    problems = lc.load_folio(str(REPLAY / "problems.jsonl"))
    p01 = problems[0]
    outcome = lc.run_problem(p01["id"], p01["premises"], p01["conclusion"], str(REPLAY))
    results.append(check("run_problem", outcome["final_verdict"] == p01["label"], outcome["terminal_reason"]))

    bench = lc.benchmark(str(REPLAY / "problems.jsonl"), str(REPLAY))
    results.append(check("benchmark", bench["accuracy"] == 0.85, f"accuracy {bench['accuracy']}"))

    passed = sum(results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
