//! Direct evaluation of queries on instances.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::Zero;

use super::{AggregateKind, AggregateQuery, Atom, AvgMode, DatalogProgram, Formula, Query, Term};
use crate::error::{Error, Result};
use crate::rational::{int, parse_rational, Rational};
use crate::relational::{Instance, Tuple};

/// `D ⊨ Q`: quantifiers range over the schema universe; Datalog goals are
/// decided in the minimal model.
pub fn evaluate_boolean(q: &Query, inst: &Instance) -> Result<bool> {
    match q {
        Query::Fo(fo) => {
            if !fo.free.is_empty() {
                return Err(Error::BindingMismatch(format!(
                    "open query with free variables {:?}",
                    fo.free
                )));
            }
            Ok(eval_fo(&fo.formula, inst, &mut HashMap::new()))
        }
        Query::Datalog(prog) => {
            let fix = datalog_fixpoint(prog, inst);
            Ok(fix
                .facts
                .contains(&(prog.goal.predicate.clone(), Vec::new())))
        }
        Query::Aggregate(_) => Err(Error::WrongQueryKind {
            expected: "Boolean",
            found: "aggregate",
        }),
    }
}

fn resolve<'a>(t: &'a Term, env: &'a HashMap<String, String>) -> &'a str {
    match t {
        Term::Const(c) => c,
        Term::Var(v) => env
            .get(v)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unbound variable `{v}` in closed formula")),
    }
}

fn eval_fo(f: &Formula, inst: &Instance, env: &mut HashMap<String, String>) -> bool {
    match f {
        Formula::Atom(a) => {
            let t = Tuple {
                predicate: a.predicate.clone(),
                args: a.args.iter().map(|t| resolve(t, env).to_string()).collect(),
            };
            inst.contains(&t)
        }
        Formula::Eq(l, r) => resolve(l, env) == resolve(r, env),
        Formula::Not(g) => !eval_fo(g, inst, env),
        Formula::And(gs) => gs.iter().all(|g| eval_fo(g, inst, env)),
        Formula::Or(gs) => gs.iter().any(|g| eval_fo(g, inst, env)),
        Formula::Exists(x, g) => {
            let saved = env.get(x).cloned();
            let mut found = false;
            for c in inst.universe() {
                env.insert(x.clone(), c.clone());
                if eval_fo(g, inst, env) {
                    found = true;
                    break;
                }
            }
            match saved {
                Some(v) => env.insert(x.clone(), v),
                None => env.remove(x),
            };
            found
        }
    }
}

/// The minimal model of a positive program over `inst`, and the number of
/// rounds needed to reach it.
#[derive(Debug, Clone)]
pub struct Fixpoint {
    pub facts: BTreeSet<(String, Vec<String>)>,
    pub iterations: usize,
}

/// Semi-naive bottom-up evaluation.
pub fn datalog_fixpoint(prog: &DatalogProgram, inst: &Instance) -> Fixpoint {
    let mut facts: BTreeSet<(String, Vec<String>)> = inst
        .tuples()
        .map(|t| (t.predicate.clone(), t.args.clone()))
        .collect();
    let mut delta: BTreeSet<(String, Vec<String>)> = facts.clone();
    let mut iterations = 0;
    while !delta.is_empty() {
        iterations += 1;
        let mut fresh = BTreeSet::new();
        for rule in &prog.rules {
            // each derivation must use at least one fact from the last round
            let positions: Vec<Option<usize>> = if rule.body.is_empty() {
                if iterations > 1 {
                    continue;
                }
                vec![None]
            } else {
                (0..rule.body.len()).map(Some).collect()
            };
            for delta_at in positions {
                let mut out = Vec::new();
                join_body(
                    &rule.body,
                    0,
                    delta_at,
                    &facts,
                    &delta,
                    &mut BTreeMap::new(),
                    &mut out,
                );
                for env in out {
                    let args = rule
                        .head
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Const(c) => c.clone(),
                            Term::Var(v) => env[v].clone(),
                        })
                        .collect();
                    let fact = (rule.head.predicate.clone(), args);
                    if !facts.contains(&fact) {
                        fresh.insert(fact);
                    }
                }
            }
        }
        facts.extend(fresh.iter().cloned());
        delta = fresh;
    }
    Fixpoint { facts, iterations }
}

fn join_body(
    body: &[Atom],
    i: usize,
    delta_at: Option<usize>,
    facts: &BTreeSet<(String, Vec<String>)>,
    delta: &BTreeSet<(String, Vec<String>)>,
    env: &mut BTreeMap<String, String>,
    out: &mut Vec<BTreeMap<String, String>>,
) {
    if i == body.len() {
        out.push(env.clone());
        return;
    }
    let atom = &body[i];
    let source = if delta_at == Some(i) { delta } else { facts };
    let lo = (atom.predicate.clone(), Vec::new());
    for (_, args) in source.range(lo..).take_while(|(p, _)| *p == atom.predicate) {
        if args.len() != atom.args.len() {
            continue;
        }
        let mut bound = Vec::new();
        let ok = atom.args.iter().zip(args).all(|(t, c)| match t {
            Term::Const(k) => k == c,
            Term::Var(v) => match env.get(v) {
                Some(existing) => existing == c,
                None => {
                    env.insert(v.clone(), c.clone());
                    bound.push(v.clone());
                    true
                }
            },
        });
        if ok {
            join_body(body, i + 1, delta_at, facts, delta, env, out);
        }
        for v in bound {
            env.remove(&v);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggregateValue {
    Number(Rational),
    Truth(bool),
}

impl AggregateValue {
    /// Truth values become 1 and 0.
    pub fn to_rational(&self) -> Rational {
        match self {
            AggregateValue::Number(r) => r.clone(),
            AggregateValue::Truth(b) => int(i64::from(*b)),
        }
    }
}

/// Evaluates an aggregate on the instance it was posed against.
pub fn evaluate_aggregate(q: &AggregateQuery, inst: &Instance) -> Result<AggregateValue> {
    evaluate_aggregate_in_world(q, inst, inst)
}

/// Evaluates an aggregate on an intervened `world`; the fixed AVG
/// denominator is taken from `original`.
pub fn evaluate_aggregate_in_world(
    q: &AggregateQuery,
    world: &Instance,
    original: &Instance,
) -> Result<AggregateValue> {
    let mut sum = Rational::zero();
    let mut count = 0i64;
    for t in world.relation(&q.relation) {
        let raw = &t.args[q.column_index];
        let value = parse_rational(raw).ok_or_else(|| Error::NonNumeric {
            relation: q.relation.clone(),
            column: q.column.clone(),
            value: raw.clone(),
        })?;
        sum += value;
        count += 1;
    }
    Ok(match &q.kind {
        AggregateKind::Sum => AggregateValue::Number(sum),
        AggregateKind::SumThreshold {
            comparator,
            threshold,
        } => AggregateValue::Truth(comparator.holds(&sum, threshold)),
        AggregateKind::Avg(AvgMode::PerWorld) => AggregateValue::Number(if count == 0 {
            Rational::zero()
        } else {
            sum / int(count)
        }),
        AggregateKind::Avg(AvgMode::FixedDenominator) => {
            let n = original.relation(&q.relation).count();
            if n == 0 {
                return Err(Error::EmptyAverage(q.relation.clone()));
            }
            AggregateValue::Number(sum / int(n as i64))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;
    use crate::rational::ratio;
    use crate::relational::Schema;

    fn t(p: &str, args: &[&str]) -> Tuple {
        Tuple::new(p, args)
    }

    fn negation() -> Instance {
        let schema = Schema::parse("R(A,B)\nS(B)\nUNIVERSE a,b,c").unwrap();
        Instance::endogenous_only(
            schema,
            [
                t("R", &["a", "b"]),
                t("R", &["a", "c"]),
                t("R", &["c", "b"]),
                t("S", &["c"]),
            ],
        )
        .unwrap()
    }

    fn routes(universe: bool) -> Instance {
        let decl = if universe {
            "E(A,B)\nUNIVERSE a,b,c,d,e"
        } else {
            "E(A,B)"
        };
        Instance::endogenous_only(
            Schema::parse(decl).unwrap(),
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

    const PATH: &str = "goal :- path(a,b). path(X,Y) :- E(X,Y). path(X,Y) :- E(X,Z), path(Z,Y).";

    fn numbers(values: &[&str]) -> Instance {
        Instance::endogenous_only(
            Schema::parse("R(A)").unwrap(),
            values.iter().map(|v| t("R", &[v])),
        )
        .unwrap()
    }

    #[test]
    fn example_two_is_true() {
        let d = negation();
        let q = parse_query("EXISTS x, y . R(x,y) AND NOT S(y)", d.schema()).unwrap();
        assert!(evaluate_boolean(&q, &d).unwrap());
        let d2 = materialize(&d, &t("S", &["b"]));
        assert!(!evaluate_boolean(&q, &d2).unwrap());
    }

    fn materialize(d: &Instance, extra: &Tuple) -> Instance {
        let mut endo = d.endogenous().clone();
        endo.insert(extra.clone());
        Instance::new(d.schema().clone(), endo, d.exogenous().clone()).unwrap()
    }

    #[test]
    fn path_goal() {
        let d = routes(false);
        let q = parse_query(PATH, d.schema()).unwrap();
        assert!(evaluate_boolean(&q, &d).unwrap());
        let empty = Instance::endogenous_only(d.schema().clone(), []).unwrap();
        assert!(!evaluate_boolean(&q, &empty).unwrap());
        let fix = datalog_fixpoint(
            match &q {
                Query::Datalog(p) => p,
                _ => unreachable!(),
            },
            &d,
        );
        assert!(fix
            .facts
            .contains(&("path".into(), vec!["a".into(), "e".into()])));
        assert!(!fix
            .facts
            .contains(&("path".into(), vec!["b".into(), "a".into()])));
    }

    #[test]
    fn fixpoint_rounds_bounded_by_ground_atoms() {
        // a chain a→b→c→d→e needs one round per edge
        let schema = Schema::parse("E(A,B)").unwrap();
        let d = Instance::endogenous_only(
            schema,
            [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")].map(|(x, y)| t("E", &[x, y])),
        )
        .unwrap();
        let Query::Datalog(p) =
            parse_query(PATH.replace("a,b", "a,e").as_str(), d.schema()).unwrap()
        else {
            unreachable!()
        };
        let fix = datalog_fixpoint(&p, &d);
        assert!(fix.facts.contains(&("goal".into(), vec![])));
        let ground_atoms = 5 * 5 + 1 + d.len();
        assert!(fix.iterations <= ground_atoms);
    }

    #[test]
    fn aggregate_is_not_boolean() {
        let d = numbers(&["1"]);
        let q = parse_query("AGG SUM R.A", d.schema()).unwrap();
        assert!(matches!(
            evaluate_boolean(&q, &d).unwrap_err(),
            Error::WrongQueryKind { .. }
        ));
    }

    fn agg(text: &str, d: &Instance) -> AggregateQuery {
        match parse_query(text, d.schema()).unwrap() {
            Query::Aggregate(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn aggregate_values() {
        let d = numbers(&["450", "150", "100", "-100"]);
        assert_eq!(
            evaluate_aggregate(&agg("AGG SUM R.A >= 500", &d), &d).unwrap(),
            AggregateValue::Truth(true)
        );
        assert_eq!(
            evaluate_aggregate(&agg("AGG SUM R.A", &d), &d).unwrap(),
            AggregateValue::Number(int(600))
        );
        assert_eq!(
            evaluate_aggregate(&agg("AGG AVG R.A", &d), &d).unwrap(),
            AggregateValue::Number(int(150))
        );
        let world = d.without([&t("R", &["150"]), &t("R", &["100"])]);
        let avg_fixed = agg("AGG AVG R.A FIXED", &d);
        assert_eq!(
            evaluate_aggregate_in_world(&avg_fixed, &world, &d).unwrap(),
            AggregateValue::Number(ratio(350, 4))
        );
        let avg_world = agg("AGG AVG R.A PERWORLD", &d);
        assert_eq!(
            evaluate_aggregate_in_world(&avg_world, &world, &d).unwrap(),
            AggregateValue::Number(int(175))
        );
    }

    #[test]
    fn aggregate_edge_cases() {
        let empty = numbers(&[]);
        assert_eq!(
            evaluate_aggregate(&agg("AGG SUM R.A", &empty), &empty).unwrap(),
            AggregateValue::Number(int(0))
        );
        assert_eq!(
            evaluate_aggregate(&agg("AGG AVG R.A PERWORLD", &empty), &empty).unwrap(),
            AggregateValue::Number(int(0))
        );
        assert!(matches!(
            evaluate_aggregate(&agg("AGG AVG R.A", &empty), &empty).unwrap_err(),
            Error::EmptyAverage(_)
        ));
        let bad = numbers(&["x"]);
        assert!(matches!(
            evaluate_aggregate(&agg("AGG SUM R.A", &bad), &bad).unwrap_err(),
            Error::NonNumeric { .. }
        ));
    }
}
