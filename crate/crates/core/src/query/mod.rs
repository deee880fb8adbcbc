//! Query language: first-order sentences, positive Datalog programs with a
//! Boolean goal, and single-relation aggregates.

mod eval;
mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::Rational;

pub use eval::{
    datalog_fixpoint, evaluate_aggregate, evaluate_aggregate_in_world, evaluate_boolean,
    AggregateValue, Fixpoint,
};
pub use parser::{parse_query, parse_query_file, parse_query_with_free};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.to_string(),
            args,
        }
    }

    fn variables(&self) -> impl Iterator<Item = &String> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }
}

/// First-order formula. `And`/`Or` are n-ary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Atom(Atom),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(String, Box<Formula>),
}

impl Formula {
    pub fn is_negation_free(&self) -> bool {
        match self {
            Formula::Atom(_) | Formula::Eq(..) => true,
            Formula::Not(_) => false,
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_negation_free),
            Formula::Exists(_, f) => f.is_negation_free(),
        }
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
        let mut term = |t: &Term, bound: &Vec<&str>| {
            if let Term::Var(v) = t {
                if !bound.contains(&v.as_str()) {
                    out.insert(v.clone());
                }
            }
        };
        match self {
            Formula::Atom(a) => a.args.iter().for_each(|t| term(t, bound)),
            Formula::Eq(l, r) => {
                term(l, bound);
                term(r, bound);
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().for_each(|f| f.collect_free(bound, out))
            }
            Formula::Exists(x, f) => {
                bound.push(x);
                f.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Replaces free occurrences of `var` by the constant `c`.
    pub fn substitute(&self, var: &str, c: &str) -> Formula {
        let term = |t: &Term| match t {
            Term::Var(v) if v == var => Term::Const(c.to_string()),
            other => other.clone(),
        };
        match self {
            Formula::Atom(a) => Formula::Atom(Atom {
                predicate: a.predicate.clone(),
                args: a.args.iter().map(term).collect(),
            }),
            Formula::Eq(l, r) => Formula::Eq(term(l), term(r)),
            Formula::Not(f) => Formula::Not(Box::new(f.substitute(var, c))),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.substitute(var, c)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.substitute(var, c)).collect()),
            Formula::Exists(x, _) if x == var => self.clone(),
            Formula::Exists(x, f) => Formula::Exists(x.clone(), Box::new(f.substitute(var, c))),
        }
    }
}

/// An FO query with its declared free variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoQuery {
    pub formula: Formula,
    pub free: BTreeSet<String>,
}

/// `head :- body.` with positive body atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

/// A positive program whose Boolean goal is the 0-ary predicate `goal`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatalogProgram {
    pub rules: Vec<Rule>,
    pub goal: Atom,
}

impl DatalogProgram {
    pub fn intensional(&self) -> BTreeSet<&str> {
        self.rules
            .iter()
            .map(|r| r.head.predicate.as_str())
            .collect()
    }

    pub fn goal_rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules
            .iter()
            .filter(move |r| r.head.predicate == self.goal.predicate)
    }

    /// Constants mentioned anywhere in the program.
    pub fn constants(&self) -> BTreeSet<String> {
        self.rules
            .iter()
            .flat_map(|r| std::iter::once(&r.head).chain(&r.body))
            .flat_map(|a| a.args.iter())
            .filter_map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Greater,
    GreaterOrEqual,
}

impl Comparator {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Comparator::Greater => lhs > rhs,
            Comparator::GreaterOrEqual => lhs >= rhs,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Greater => ">",
            Comparator::GreaterOrEqual => ">=",
        })
    }
}

/// How AVG treats deleted tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgMode {
    /// Sum over present tuples divided by their count (0 when none).
    PerWorld,
    /// Sum over present tuples divided by the relation's size in the original instance.
    FixedDenominator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggregateKind {
    Sum,
    Avg(AvgMode),
    SumThreshold {
        comparator: Comparator,
        threshold: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateQuery {
    pub relation: String,
    pub column: String,
    pub column_index: usize,
    pub kind: AggregateKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Fo(FoQuery),
    Datalog(DatalogProgram),
    Aggregate(AggregateQuery),
}

impl Query {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Query::Fo(_) => "FO",
            Query::Datalog(_) => "Datalog",
            Query::Aggregate(_) => "aggregate",
        }
    }

    /// Negation-free FO and positive Datalog are monotone.
    pub fn is_monotone(&self) -> bool {
        match self {
            Query::Fo(q) => q.formula.is_negation_free(),
            Query::Datalog(_) => true,
            Query::Aggregate(_) => false,
        }
    }

    /// A closed FO sentence or a Datalog goal.
    pub fn is_boolean(&self) -> bool {
        match self {
            Query::Fo(q) => q.free.is_empty(),
            Query::Datalog(_) => true,
            Query::Aggregate(_) => false,
        }
    }

    /// Applies `SUM`-threshold comparator or AVG mode overrides; other
    /// queries are returned unchanged.
    pub fn with_overrides(mut self, comparator: Option<Comparator>, avg: Option<AvgMode>) -> Self {
        if let Query::Aggregate(a) = &mut self {
            match &mut a.kind {
                AggregateKind::SumThreshold { comparator: c, .. } => {
                    if let Some(new) = comparator {
                        *c = new;
                    }
                }
                AggregateKind::Avg(mode) => {
                    if let Some(new) = avg {
                        *mode = new;
                    }
                }
                AggregateKind::Sum => {}
            }
        }
        self
    }
}

/// Free variable to constant.
pub type Binding = BTreeMap<String, String>;

/// `Q[c̄]`: substitutes a binding for exactly the free variables of `q`.
pub fn bind_open_query(q: &Query, binding: &Binding) -> Result<Query> {
    match q {
        Query::Fo(fo) => {
            let keys: BTreeSet<String> = binding.keys().cloned().collect();
            if keys != fo.free {
                let missing: Vec<_> = fo.free.difference(&keys).collect();
                let extra: Vec<_> = keys.difference(&fo.free).collect();
                return Err(Error::BindingMismatch(format!(
                    "missing {missing:?}, unexpected {extra:?}"
                )));
            }
            let formula = binding
                .iter()
                .fold(fo.formula.clone(), |f, (x, c)| f.substitute(x, c));
            Ok(Query::Fo(FoQuery {
                formula,
                free: BTreeSet::new(),
            }))
        }
        _ if binding.is_empty() => Ok(q.clone()),
        _ => Err(Error::BindingMismatch(format!(
            "{} queries have no free variables",
            q.kind_name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::Schema;

    fn schema() -> Schema {
        Schema::parse("R(A,B)\nS(B)\nUNIVERSE a, b, c").unwrap()
    }

    #[test]
    fn binds_open_query() {
        let q = parse_query_with_free("EXISTS y . R(x,y)", &schema(), &["x"]).unwrap();
        assert!(!q.is_boolean());
        let bound = bind_open_query(&q, &[("x".into(), "a".into())].into()).unwrap();
        let expected = parse_query("EXISTS y . R(a,y)", &schema()).unwrap();
        assert_eq!(bound, expected);
        assert!(bound.is_boolean());
    }

    #[test]
    fn boolean_query_with_empty_binding_is_unchanged() {
        let q = parse_query("EXISTS y . R(a,y)", &schema()).unwrap();
        assert_eq!(bind_open_query(&q, &Binding::new()).unwrap(), q);
    }

    #[test]
    fn wrong_binding_is_rejected() {
        let q = parse_query_with_free("EXISTS y . R(x,y)", &schema(), &["x"]).unwrap();
        let err = bind_open_query(&q, &[("z".into(), "a".into())].into()).unwrap_err();
        assert!(matches!(err, Error::BindingMismatch(_)));
        let err = bind_open_query(&q, &Binding::new()).unwrap_err();
        assert!(matches!(err, Error::BindingMismatch(_)));
    }

    #[test]
    fn substitution_respects_shadowing() {
        let f = Formula::And(vec![
            Formula::Atom(Atom::new("S", vec![Term::var("x")])),
            Formula::Exists(
                "x".into(),
                Box::new(Formula::Atom(Atom::new("S", vec![Term::var("x")]))),
            ),
        ]);
        let g = f.substitute("x", "a");
        assert_eq!(g.free_variables(), BTreeSet::new());
        match g {
            Formula::And(parts) => {
                assert_eq!(
                    parts[0],
                    Formula::Atom(Atom::new("S", vec![Term::constant("a")]))
                );
                assert_eq!(parts[1], f_exists_sx());
            }
            _ => unreachable!(),
        }
    }

    fn f_exists_sx() -> Formula {
        Formula::Exists(
            "x".into(),
            Box::new(Formula::Atom(Atom::new("S", vec![Term::var("x")]))),
        )
    }
}
