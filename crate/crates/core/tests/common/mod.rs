//! Test-only oracle: random small ground programs and a brute-force
//! stable-model enumerator that shares no code with the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub type Model = BTreeSet<String>;

#[derive(Debug, Clone)]
pub enum Head {
    Atom(String),
    Constraint,
    Choice { atoms: Vec<String>, lower: Option<usize>, upper: Option<usize> },
}

#[derive(Debug, Clone)]
pub struct GRule {
    pub head: Head,
    pub pos: Vec<String>,
    pub neg: Vec<String>,
}

impl GRule {
    pub fn text(&self) -> String {
        let head = match &self.head {
            Head::Atom(a) => a.clone(),
            Head::Constraint => String::new(),
            Head::Choice { atoms, lower, upper } => {
                let mut s = String::new();
                if let Some(l) = lower {
                    s.push_str(&format!("{l} "));
                }
                s.push('{');
                s.push_str(&atoms.join("; "));
                s.push('}');
                if let Some(u) = upper {
                    s.push_str(&format!(" {u}"));
                }
                s
            }
        };
        let body: Vec<String> = self
            .pos
            .iter()
            .cloned()
            .chain(self.neg.iter().map(|n| format!("not {n}")))
            .collect();
        match (head.is_empty(), body.is_empty()) {
            (false, true) => format!("{head}."),
            (false, false) => format!("{head} :- {}.", body.join(", ")),
            (true, _) => format!(":- {}.", body.join(", ")),
        }
    }

    fn literals(&self) -> Vec<String> {
        let mut out: Vec<String> = self.pos.iter().chain(&self.neg).cloned().collect();
        match &self.head {
            Head::Atom(a) => out.push(a.clone()),
            Head::Choice { atoms, .. } => out.extend(atoms.iter().cloned()),
            Head::Constraint => {}
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenProgram {
    pub rules: Vec<GRule>,
}

fn complement(l: &str) -> String {
    match l.strip_prefix('-') {
        Some(a) => a.to_string(),
        None => format!("-{l}"),
    }
}

impl GenProgram {
    pub fn text(&self) -> String {
        self.rules.iter().map(|r| format!("{}\n", r.text())).collect()
    }

    pub fn subset(&self, keep: &[usize]) -> GenProgram {
        GenProgram { rules: keep.iter().map(|&i| self.rules[i].clone()).collect() }
    }

    pub fn with_facts(&self, facts: &[String]) -> GenProgram {
        let mut p = self.clone();
        for f in facts {
            p.rules.push(GRule { head: Head::Atom(f.clone()), pos: vec![], neg: vec![] });
        }
        p
    }

    pub fn universe(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.rules.iter().flat_map(|r| r.literals()).collect();
        set.into_iter().collect()
    }

    /// Guess-and-check over every subset of the literal universe using the
    /// Gelfond-Lifschitz reduct, with choice rules contributing `h :- B+`
    /// for their chosen atoms and cardinality bounds acting as constraints.
    pub fn stable_models(&self) -> Vec<Model> {
        let universe = self.universe();
        assert!(universe.len() <= 12, "oracle universe too large");
        let mut models = Vec::new();
        for mask in 0u32..(1 << universe.len()) {
            let m: Model = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, l)| l.clone())
                .collect();
            if self.is_stable(&m) {
                models.push(m);
            }
        }
        models
    }

    fn is_stable(&self, m: &Model) -> bool {
        if m.iter().any(|l| m.contains(&complement(l))) {
            return false;
        }
        let mut definite: Vec<(String, Vec<String>)> = Vec::new();
        for r in &self.rules {
            if r.neg.iter().any(|n| m.contains(n)) {
                continue;
            }
            let body_true = r.pos.iter().all(|p| m.contains(p));
            match &r.head {
                Head::Atom(h) => definite.push((h.clone(), r.pos.clone())),
                Head::Constraint => {
                    if body_true {
                        return false;
                    }
                }
                Head::Choice { atoms, lower, upper } => {
                    if body_true {
                        let chosen = atoms.iter().filter(|a| m.contains(*a)).count();
                        if lower.is_some_and(|l| chosen < l) || upper.is_some_and(|u| chosen > u) {
                            return false;
                        }
                    }
                    for a in atoms.iter().filter(|a| m.contains(*a)) {
                        definite.push((a.clone(), r.pos.clone()));
                    }
                }
            }
        }
        let mut least: Model = BTreeSet::new();
        loop {
            let before = least.len();
            for (h, body) in &definite {
                if body.iter().all(|b| least.contains(b)) {
                    least.insert(h.clone());
                }
            }
            if least.len() == before {
                break;
            }
        }
        &least == m
    }
}

pub const ATOMS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
/// Atoms that may also appear strongly negated; keeps the universe at 8.
pub const NEGATABLE: [&str; 2] = ["a", "b"];

pub fn random_literal(rng: &mut TestRng, atoms: &[&str]) -> String {
    let a = *atoms.choose(rng).unwrap();
    if NEGATABLE.contains(&a) && rng.random_bool(0.25) {
        format!("-{a}")
    } else {
        a.to_string()
    }
}

fn distinct_literals(rng: &mut TestRng, atoms: &[&str], n: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for _ in 0..n * 3 {
        if out.len() == n {
            break;
        }
        let l = random_literal(rng, atoms);
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

pub fn random_rule(rng: &mut TestRng, atoms: &[&str]) -> GRule {
    let body = |rng: &mut TestRng, max: usize| {
        let n = rng.random_range(0..=max);
        let lits = distinct_literals(rng, atoms, n);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for l in lits {
            if rng.random_bool(0.4) {
                neg.push(l)
            } else {
                pos.push(l)
            }
        }
        (pos, neg)
    };
    match rng.random_range(0..10) {
        0..=1 => GRule { head: Head::Atom(random_literal(rng, atoms)), pos: vec![], neg: vec![] },
        2..=5 => {
            let (pos, neg) = body(rng, 2);
            GRule { head: Head::Atom(random_literal(rng, atoms)), pos, neg }
        }
        6 => {
            let (mut pos, neg) = body(rng, 2);
            if pos.is_empty() && neg.is_empty() {
                pos.push(random_literal(rng, atoms));
            }
            GRule { head: Head::Constraint, pos, neg }
        }
        _ => {
            let k = rng.random_range(1..=3);
            let heads = distinct_literals(rng, atoms, k);
            let lower = if rng.random_bool(0.4) { Some(rng.random_range(0..=1)) } else { None };
            let upper = if rng.random_bool(0.4) { Some(rng.random_range(1..=2)) } else { None };
            let (pos, neg) = body(rng, 1);
            GRule { head: Head::Choice { atoms: heads, lower, upper }, pos, neg }
        }
    }
}

pub fn random_program(rng: &mut TestRng, max_rules: usize, n_atoms: usize) -> GenProgram {
    let atoms = &ATOMS[..n_atoms.min(ATOMS.len())];
    let n = rng.random_range(1..=max_rules);
    GenProgram { rules: (0..n).map(|_| random_rule(rng, atoms)).collect() }
}

/// Rejection-samples an unsatisfiable program of at most `max_rules` rules.
pub fn random_unsat_program(rng: &mut TestRng, max_rules: usize) -> GenProgram {
    loop {
        let n = rng.random_range(2..=max_rules);
        let atoms = &ATOMS[..3];
        let rules = (0..n)
            .map(|_| {
                // constraints and facts more often, to hit UNSAT
                if rng.random_bool(0.3) {
                    let lit = random_literal(rng, atoms);
                    GRule { head: Head::Constraint, pos: vec![lit], neg: vec![] }
                } else {
                    random_rule(rng, atoms)
                }
            })
            .collect();
        let p = GenProgram { rules };
        if p.stable_models().is_empty() {
            return p;
        }
    }
}

/// All minimal unsatisfiable subsets, by exhaustive subset enumeration.
pub fn all_muses(p: &GenProgram) -> Vec<BTreeSet<usize>> {
    let n = p.rules.len();
    let unsat = |s: &BTreeSet<usize>| {
        let idx: Vec<usize> = s.iter().copied().collect();
        p.subset(&idx).stable_models().is_empty()
    };
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let s: BTreeSet<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if !unsat(&s) {
            continue;
        }
        let minimal = s.iter().all(|&i| {
            let mut t = s.clone();
            t.remove(&i);
            !unsat(&t)
        });
        if minimal {
            out.push(s);
        }
    }
    out
}

/// Oracle three-valued logic, independent of the library's `Truth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K3 {
    F,
    U,
    T,
}

impl K3 {
    fn not(self) -> K3 {
        match self {
            K3::T => K3::F,
            K3::F => K3::T,
            K3::U => K3::U,
        }
    }
    fn and(self, o: K3) -> K3 {
        match (self, o) {
            (K3::F, _) | (_, K3::F) => K3::F,
            (K3::T, K3::T) => K3::T,
            _ => K3::U,
        }
    }
    fn or(self, o: K3) -> K3 {
        self.not().and(o.not()).not()
    }
}

#[derive(Debug, Clone)]
pub enum GPlan {
    Atom(String),
    And(Vec<GPlan>),
    Or(Vec<GPlan>),
    Not(Box<GPlan>),
    Xor(Box<GPlan>, Box<GPlan>),
    IfThen(Box<GPlan>, Box<GPlan>),
}

impl GPlan {
    pub fn eval(&self, m: &Model) -> K3 {
        match self {
            GPlan::Atom(l) => {
                if m.contains(l) {
                    K3::T
                } else if m.contains(&complement(l)) {
                    K3::F
                } else {
                    K3::U
                }
            }
            GPlan::And(xs) => xs.iter().fold(K3::T, |acc, x| acc.and(x.eval(m))),
            GPlan::Or(xs) => xs.iter().fold(K3::F, |acc, x| acc.or(x.eval(m))),
            GPlan::Not(x) => x.eval(m).not(),
            GPlan::Xor(a, b) => match (a.eval(m), b.eval(m)) {
                (K3::T, K3::F) | (K3::F, K3::T) => K3::T,
                (K3::T, K3::T) | (K3::F, K3::F) => K3::F,
                _ => K3::U,
            },
            GPlan::IfThen(a, b) => a.eval(m).not().or(b.eval(m)),
        }
    }

    /// Numbered-line form, children before parents.
    pub fn to_query_text(&self) -> String {
        let mut lines = Vec::new();
        self.emit(&mut lines);
        lines.iter().enumerate().map(|(i, l)| format!("{}. {}\n", i + 1, l)).collect()
    }

    fn emit(&self, lines: &mut Vec<String>) -> usize {
        let line = match self {
            GPlan::Atom(l) => format!("ATOM({l})"),
            GPlan::And(xs) | GPlan::Or(xs) => {
                let ids: Vec<String> = xs.iter().map(|x| x.emit(lines).to_string()).collect();
                let op = if matches!(self, GPlan::And(_)) { "AND" } else { "OR" };
                format!("{op}({})", ids.join(", "))
            }
            GPlan::Not(x) => format!("NOT({})", x.emit(lines)),
            GPlan::Xor(a, b) => {
                let (a, b) = (a.emit(lines), b.emit(lines));
                format!("XOR({a}, {b})")
            }
            GPlan::IfThen(a, b) => {
                let (a, b) = (a.emit(lines), b.emit(lines));
                format!("IF-THEN({a}, {b})")
            }
        };
        lines.push(line);
        lines.len()
    }
}

pub fn random_plan(rng: &mut TestRng, depth: usize, atoms: &[&str]) -> GPlan {
    if depth == 0 || rng.random_bool(0.3) {
        return GPlan::Atom(random_literal(rng, atoms));
    }
    let sub = |rng: &mut TestRng| Box::new(random_plan(rng, depth - 1, atoms));
    match rng.random_range(0..5) {
        0 => GPlan::And((0..rng.random_range(2..=3)).map(|_| *sub(rng)).collect()),
        1 => GPlan::Or((0..rng.random_range(2..=3)).map(|_| *sub(rng)).collect()),
        2 => GPlan::Not(sub(rng)),
        3 => GPlan::Xor(sub(rng), sub(rng)),
        _ => GPlan::IfThen(sub(rng), sub(rng)),
    }
}

/// All-models aggregation of the oracle evaluator.
pub fn oracle_verdict(plan: &GPlan, models: &[Model]) -> &'static str {
    let vals: Vec<K3> = models.iter().map(|m| plan.eval(m)).collect();
    if !vals.is_empty() && vals.iter().all(|&v| v == K3::T) {
        "True"
    } else if !vals.is_empty() && vals.iter().all(|&v| v == K3::F) {
        "False"
    } else {
        "Uncertain"
    }
}

pub fn cautious(models: &[Model]) -> Model {
    let mut it = models.iter();
    let first = it.next().cloned().unwrap_or_default();
    it.fold(first, |acc, m| acc.intersection(m).cloned().collect())
}

pub fn brave(models: &[Model]) -> Model {
    models.iter().flat_map(|m| m.iter().cloned()).collect()
}

pub fn seeded(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

/// True when a solver can be launched; solver-backed tests are skipped
/// with a message otherwise.
pub fn solver_available() -> bool {
    let solver = logic_critic::solver::Solver::default();
    match solver.solve("p.", 1) {
        Ok(_) => true,
        Err(e) => {
            eprintln!("skipping: {e}");
            false
        }
    }
}
