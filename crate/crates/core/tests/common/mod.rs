#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use tuplecause::lineage::{FormulaStore, NodeId};
use tuplecause::query::{parse_query, Atom, FoQuery, Formula, Query, Term};
use tuplecause::rational::ratio;
use tuplecause::{Instance, Rational, Schema, Tuple};

pub const PATH: &str = "goal :- path(a,b). path(X,Y) :- E(X,Y). path(X,Y) :- E(X,Z), path(Z,Y).";

pub fn t(p: &str, args: &[&str]) -> Tuple {
    Tuple::new(p, args)
}

pub fn routes() -> Instance {
    Instance::endogenous_only(
        Schema::parse("E(A,B)").unwrap(),
        [
            ("a", "b"),
            ("a", "c"),
            ("c", "b"),
            ("a", "d"),
            ("d", "e"),
            ("e", "b"),
        ]
        .map(|(x, y)| t("E", &[x, y])),
    )
    .unwrap()
}

pub fn negation() -> Instance {
    Instance::endogenous_only(
        Schema::parse("R(A,B)\nS(B)\nUNIVERSE a,b,c").unwrap(),
        [
            t("R", &["a", "b"]),
            t("R", &["a", "c"]),
            t("R", &["c", "b"]),
            t("S", &["c"]),
        ],
    )
    .unwrap()
}

pub const NEGATION_QUERY: &str = "EXISTS x, y . R(x,y) AND NOT S(y)";

pub const NUMBERS: [&str; 4] = ["450", "150", "100", "-100"];

pub fn numbers() -> Instance {
    Instance::endogenous_only(
        Schema::parse("R(A)").unwrap(),
        NUMBERS.map(|v| t("R", &[v])),
    )
    .unwrap()
}

pub fn q(text: &str, inst: &Instance) -> Query {
    parse_query(text, inst.schema()).unwrap()
}

pub fn rationals(pairs: &[(i64, i64)]) -> Vec<Rational> {
    pairs.iter().map(|&(n, d)| ratio(n, d)).collect()
}

/// A random formula over at most `nvars` variables `X(i)`.
pub fn random_formula(rng: &mut StdRng, nvars: usize, depth: usize) -> (FormulaStore, NodeId) {
    let mut store = FormulaStore::new();
    let vars: Vec<NodeId> = (0..nvars)
        .map(|i| store.var(Tuple::new("X", &[i.to_string()])))
        .collect();
    let root = grow_formula(rng, &mut store, &vars, depth);
    (store, root)
}

fn grow_formula(
    rng: &mut StdRng,
    store: &mut FormulaStore,
    vars: &[NodeId],
    depth: usize,
) -> NodeId {
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..12) {
            0 => store.constant(rng.gen_bool(0.5)),
            _ => *vars.choose(rng).unwrap(),
        };
    }
    match rng.gen_range(0..5) {
        0 => {
            let c = grow_formula(rng, store, vars, depth - 1);
            store.not(c)
        }
        k => {
            let n = rng.gen_range(2..=3);
            let cs: Vec<NodeId> = (0..n)
                .map(|_| grow_formula(rng, store, vars, depth - 1))
                .collect();
            if k % 2 == 0 {
                store.and(cs)
            } else {
                store.or(cs)
            }
        }
    }
}

pub const UNIVERSE: [&str; 3] = ["a", "b", "c"];

fn all_tuples(relation: &str, arity: usize) -> Vec<Tuple> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<&str>| {
                UNIVERSE.iter().map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|args| Tuple::new(relation, &args))
        .collect()
}

/// Two relations `R(A,B)` and `S(A)` over `{a,b,c}` with at most
/// `max_per_relation` tuples each; each tuple is exogenous with probability
/// `exogenous` (0 for an all-endogenous instance).
pub fn random_instance(rng: &mut StdRng, max_per_relation: usize, exogenous: f64) -> Instance {
    let schema = Schema::parse("R(A,B)\nS(A)\nUNIVERSE a,b,c").unwrap();
    let mut endo = BTreeSet::new();
    let mut exo = BTreeSet::new();
    for (rel, arity) in [("R", 2), ("S", 1)] {
        let mut pool = all_tuples(rel, arity);
        pool.shuffle(rng);
        let n = rng.gen_range(0..=max_per_relation.min(pool.len()));
        for tup in pool.into_iter().take(n) {
            if rng.gen_bool(exogenous) {
                exo.insert(tup);
            } else {
                endo.insert(tup);
            }
        }
    }
    Instance::new(schema, endo, exo).unwrap()
}

fn random_term(rng: &mut StdRng, scope: &[String]) -> Term {
    if !scope.is_empty() && rng.gen_bool(0.8) {
        Term::Var(scope.choose(rng).unwrap().clone())
    } else {
        Term::Const(UNIVERSE.choose(rng).unwrap().to_string())
    }
}

fn random_subformula(
    rng: &mut StdRng,
    scope: &mut Vec<String>,
    depth: usize,
    negation: bool,
) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..6) {
            0 => Formula::Eq(random_term(rng, scope), random_term(rng, scope)),
            1 | 2 => Formula::Atom(Atom::new("S", vec![random_term(rng, scope)])),
            _ => Formula::Atom(Atom::new(
                "R",
                vec![random_term(rng, scope), random_term(rng, scope)],
            )),
        };
    }
    let choices = if negation { 5 } else { 4 };
    match rng.gen_range(0..choices) {
        0 | 1 => Formula::And(
            (0..2)
                .map(|_| random_subformula(rng, scope, depth - 1, negation))
                .collect(),
        ),
        2 => Formula::Or(
            (0..2)
                .map(|_| random_subformula(rng, scope, depth - 1, negation))
                .collect(),
        ),
        3 => {
            let v = format!("v{}", scope.len());
            scope.push(v.clone());
            let body = random_subformula(rng, scope, depth - 1, negation);
            scope.pop();
            Formula::Exists(v, Box::new(body))
        }
        _ => Formula::Not(Box::new(random_subformula(rng, scope, depth - 1, negation))),
    }
}

/// A closed FO sentence `∃x ∃y . φ` with `φ` of depth at most `depth`.
pub fn random_fo_query(rng: &mut StdRng, depth: usize, negation: bool) -> Query {
    let mut scope = vec!["x".to_string(), "y".to_string()];
    let body = random_subformula(rng, &mut scope, depth, negation);
    let formula = Formula::Exists(
        "x".into(),
        Box::new(Formula::Exists("y".into(), Box::new(body))),
    );
    Query::Fo(FoQuery {
        formula,
        free: BTreeSet::new(),
    })
}

pub const NODES: [&str; 4] = ["a", "b", "c", "d"];

/// At most `max_edges` distinct edges over four nodes (self-loops allowed).
pub fn random_edges(rng: &mut StdRng, max_edges: usize) -> Instance {
    let mut pool: Vec<Tuple> = NODES
        .iter()
        .flat_map(|x| NODES.iter().map(move |y| Tuple::new("E", &[*x, *y])))
        .collect();
    pool.shuffle(rng);
    let n = rng.gen_range(0..=max_edges);
    Instance::endogenous_only(
        Schema::parse("E(A,B)\nUNIVERSE a,b,c,d").unwrap(),
        pool.into_iter().take(n),
    )
    .unwrap()
}

/// Breadth-first reachability from `from` to `to` over the `E` tuples.
pub fn reachable(inst: &Instance, from: &str, to: &str) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([from.to_string()]);
    while let Some(n) = queue.pop_front() {
        for e in inst.relation("E") {
            if e.args[0] == n && seen.insert(e.args[1].clone()) {
                if e.args[1] == to {
                    return true;
                }
                queue.push_back(e.args[1].clone());
            }
        }
    }
    false
}
