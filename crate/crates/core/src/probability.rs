//! The uniform outcome space over tuple variables, interventions as events,
//! and exact expectations by enumeration or by Shannon expansion.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, Write};
use std::rc::Rc;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lineage::{DLineage, FormulaStore, Lineage, Node, NodeId, Polarity, VarId};
use crate::query::{evaluate_aggregate_in_world, AggregateQuery};
use crate::rational::{half, int, inverse_power_of_two, Rational};
use crate::relational::{materialize_world, Assignment, Instance, Tuple};

pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Worlds below this many free variables are summed on one thread.
const PARALLEL_THRESHOLD: usize = 12;

/// `Ω` restricted by a partial assignment: the free variables are
/// independent fair coins, the fixed ones are constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSpace {
    vars: Vec<Tuple>,
    fixed: Assignment,
}

impl OutcomeSpace {
    pub fn new(vars: impl IntoIterator<Item = Tuple>, fixed: Assignment) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let vars: Vec<Tuple> = vars
            .into_iter()
            .filter(|t| seen.insert(t.clone()))
            .collect();
        if let Some(t) = fixed.keys().find(|t| !seen.contains(*t)) {
            return Err(Error::NotInOutcomeSpace(t.clone()));
        }
        Ok(OutcomeSpace { vars, fixed })
    }

    /// `Var(Φ_Q(D))` with exogenous variables pinned.
    pub fn for_lineage(dl: &DLineage) -> Self {
        OutcomeSpace {
            vars: dl.vars.keys().cloned().collect(),
            fixed: exogenous_pinning(dl),
        }
    }

    pub fn vars(&self) -> &[Tuple] {
        &self.vars
    }

    pub fn fixed(&self) -> &Assignment {
        &self.fixed
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        self.vars.contains(t)
    }

    pub fn free(&self) -> Vec<&Tuple> {
        self.vars
            .iter()
            .filter(|t| !self.fixed.contains_key(*t))
            .collect()
    }

    /// Intersects the space with the event of an intervention.
    pub fn intervene(&self, iv: &Intervention) -> Result<OutcomeSpace> {
        let mut fixed = self.fixed.clone();
        for (t, v) in &iv.targets {
            if !self.contains(t) {
                return Err(Error::NotInOutcomeSpace(t.clone()));
            }
            match fixed.insert(t.clone(), *v) {
                Some(prev) if prev != *v => return Err(Error::InconsistentIntervention(t.clone())),
                _ => {}
            }
        }
        Ok(OutcomeSpace {
            vars: self.vars.clone(),
            fixed,
        })
    }
}

/// `do(X̄ = x̄)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Intervention {
    targets: Vec<(Tuple, bool)>,
}

impl Intervention {
    pub fn new(targets: impl IntoIterator<Item = (Tuple, bool)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let targets: Vec<(Tuple, bool)> = targets.into_iter().collect();
        for (t, _) in &targets {
            if !seen.insert(t) {
                return Err(Error::InconsistentIntervention(t.clone()));
            }
        }
        Ok(Intervention { targets })
    }

    pub fn single(t: Tuple, value: bool) -> Self {
        Intervention {
            targets: vec![(t, value)],
        }
    }

    pub fn none() -> Self {
        Intervention::default()
    }

    pub fn targets(&self) -> &[(Tuple, bool)] {
        &self.targets
    }
}

/// A rational-valued function of a total world assignment.
pub trait RandomVariable: Sync {
    fn value(&self, world: &Assignment) -> Rational;
}

/// The query as a Bernoulli variable: `1` iff the world satisfies the lineage.
pub struct LineageVariable<'a>(pub &'a Lineage);

impl RandomVariable for LineageVariable<'_> {
    fn value(&self, world: &Assignment) -> Rational {
        int(i64::from(self.0.eval(world)))
    }
}

/// `X_τ` as a Bernoulli variable.
pub struct Indicator(pub Tuple);

impl RandomVariable for Indicator {
    fn value(&self, world: &Assignment) -> Rational {
        int(i64::from(world.get(&self.0).copied().unwrap_or(false)))
    }
}

/// Pointwise product of two random variables.
pub struct Product<'a>(pub &'a dyn RandomVariable, pub &'a dyn RandomVariable);

impl RandomVariable for Product<'_> {
    fn value(&self, world: &Assignment) -> Rational {
        self.0.value(world) * self.1.value(world)
    }
}

/// An aggregate evaluated on the materialized world. Truth values map to 1/0.
pub struct AggregateVariable<'a> {
    query: &'a AggregateQuery,
    inst: &'a Instance,
    vars: Vec<Tuple>,
}

impl<'a> AggregateVariable<'a> {
    /// Fails on non-numeric column values or a fixed-denominator average
    /// over an empty relation.
    pub fn new(query: &'a AggregateQuery, inst: &'a Instance, vars: Vec<Tuple>) -> Result<Self> {
        evaluate_aggregate_in_world(query, inst, inst)?;
        Ok(AggregateVariable { query, inst, vars })
    }

    /// The aggregated relation's tuples with exogenous ones pinned present.
    pub fn space(&self) -> OutcomeSpace {
        OutcomeSpace {
            vars: self.vars.clone(),
            fixed: self
                .vars
                .iter()
                .filter(|t| self.inst.is_exogenous(t))
                .map(|t| (t.clone(), true))
                .collect(),
        }
    }
}

impl RandomVariable for AggregateVariable<'_> {
    fn value(&self, world: &Assignment) -> Rational {
        let w = materialize_world(self.inst, world, &self.vars)
            .expect("world assigns every aggregate variable");
        evaluate_aggregate_in_world(self.query, &w, self.inst)
            .expect("aggregate validated on construction")
            .to_rational()
    }
}

/// Exogenous variables pinned to their D-state: positive ones to 1,
/// negative ones to 0.
pub fn exogenous_pinning(dl: &DLineage) -> Assignment {
    dl.exogenous_vars(Polarity::Positive)
        .map(|t| (t.clone(), true))
        .chain(
            dl.exogenous_vars(Polarity::Negative)
                .map(|t| (t.clone(), false)),
        )
        .collect()
}

/// Total assignments of a space in lexicographic order of the free
/// variables (the first free variable is the most significant bit).
pub struct Worlds<'s> {
    space: &'s OutcomeSpace,
    free: Vec<&'s Tuple>,
    next: u64,
    end: u64,
}

impl Iterator for Worlds<'_> {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        if self.next >= self.end {
            return None;
        }
        let w = world_at(self.space, &self.free, self.next);
        self.next += 1;
        Some(w)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

fn world_at(space: &OutcomeSpace, free: &[&Tuple], index: u64) -> Assignment {
    let n = free.len();
    let mut w = space.fixed.clone();
    for (j, t) in free.iter().enumerate() {
        w.insert((*t).clone(), (index >> (n - 1 - j)) & 1 == 1);
    }
    w
}

fn check_cap(free: usize, cap: usize) -> Result<()> {
    if free > cap {
        Err(Error::CapExceeded {
            what: "free variables to enumerate",
            size: free,
            cap,
        })
    } else {
        Ok(())
    }
}

pub fn enumerate_worlds(space: &OutcomeSpace, cap: usize) -> Result<Worlds<'_>> {
    let free = space.free();
    check_cap(free.len(), cap)?;
    Ok(Worlds {
        space,
        end: 1u64 << free.len(),
        free,
        next: 0,
    })
}

/// `E(rv)` over the uniform completions of the space.
pub fn expectation(rv: &dyn RandomVariable, space: &OutcomeSpace, cap: usize) -> Result<Rational> {
    let free = space.free();
    check_cap(free.len(), cap)?;
    let n = free.len();
    let total: u64 = 1 << n;
    let sum = if n < PARALLEL_THRESHOLD {
        (0..total).fold(Rational::zero(), |acc, i| {
            acc + rv.value(&world_at(space, &free, i))
        })
    } else {
        let chunk: u64 = 1 << (PARALLEL_THRESHOLD - 2);
        (0..total / chunk)
            .into_par_iter()
            .map(|c| {
                (c * chunk..(c + 1) * chunk).fold(Rational::zero(), |acc, i| {
                    acc + rv.value(&world_at(space, &free, i))
                })
            })
            .reduce(Rational::zero, |a, b| a + b)
    };
    Ok(sum * inverse_power_of_two(n))
}

/// `E(rv | do(iv))`, with the space's pinning already applied.
pub fn interventional_expectation(
    rv: &dyn RandomVariable,
    space: &OutcomeSpace,
    iv: &Intervention,
    cap: usize,
) -> Result<Rational> {
    expectation(rv, &space.intervene(iv)?, cap)
}

/// Mean and variance by enumeration.
pub fn moments(
    rv: &dyn RandomVariable,
    space: &OutcomeSpace,
    cap: usize,
) -> Result<(Rational, Rational)> {
    let mean = expectation(rv, space, cap)?;
    let square = expectation(&Product(rv, rv), space, cap)?;
    let variance = square - &mean * &mean;
    Ok((mean, variance))
}

/// Writes one line per world with the variable's value. Spaces with more
/// than six free variables are summarized instead.
pub fn trace_worlds(
    rv: &dyn RandomVariable,
    space: &OutcomeSpace,
    out: &mut dyn Write,
) -> io::Result<()> {
    let free = space.free();
    if free.len() > 6 {
        return writeln!(
            out,
            "# {} free variables; per-world trace skipped",
            free.len()
        );
    }
    let header: Vec<String> = free.iter().map(|t| t.to_string()).collect();
    writeln!(out, "# {}", header.join(" "))?;
    for w in enumerate_worlds(space, 6).expect("within cap") {
        let bits: String = free.iter().map(|t| if w[*t] { '1' } else { '0' }).collect();
        writeln!(
            out,
            "{bits} -> {}",
            crate::rational::to_fraction(&rv.value(&w))
        )?;
    }
    Ok(())
}

/// `P(φ | fixed)` with every unfixed variable an independent fair coin.
///
/// The fixed part is substituted first; the residual formula is then
/// solved by splitting conjunctions and disjunctions into variable-disjoint
/// components and Shannon-expanding on the most shared variable otherwise.
/// Results are memoized per hash-consed node.
pub fn shannon_expectation(store: &FormulaStore, root: NodeId, fixed: &Assignment) -> Rational {
    let mut work = store.clone();
    let values: HashMap<VarId, bool> = fixed
        .iter()
        .filter_map(|(t, b)| work.var_id(t).map(|v| (v, *b)))
        .collect();
    let root = work.restrict(root, &values);
    let mut engine = Shannon {
        store: work,
        memo: HashMap::new(),
        vars: HashMap::new(),
    };
    engine.probability(root)
}

struct Shannon {
    store: FormulaStore,
    memo: HashMap<NodeId, Rational>,
    vars: HashMap<NodeId, Rc<BTreeSet<VarId>>>,
}

impl Shannon {
    fn vars_of(&mut self, id: NodeId) -> Rc<BTreeSet<VarId>> {
        if let Some(v) = self.vars.get(&id) {
            return Rc::clone(v);
        }
        let set = match self.store.node(id).clone() {
            Node::Const(_) => BTreeSet::new(),
            Node::Var(v) => BTreeSet::from([v]),
            Node::Not(c) => (*self.vars_of(c)).clone(),
            Node::And(cs) | Node::Or(cs) => {
                let mut s = BTreeSet::new();
                for c in cs.iter() {
                    s.extend(self.vars_of(*c).iter().copied());
                }
                s
            }
        };
        let rc = Rc::new(set);
        self.vars.insert(id, Rc::clone(&rc));
        rc
    }

    fn probability(&mut self, id: NodeId) -> Rational {
        if let Some(p) = self.memo.get(&id) {
            return p.clone();
        }
        let p = match self.store.node(id).clone() {
            Node::Const(b) => int(i64::from(b)),
            Node::Var(_) => half(),
            Node::Not(c) => Rational::one() - self.probability(c),
            Node::And(cs) | Node::Or(cs) => {
                let conjunctive = matches!(self.store.node(id), Node::And(_));
                let components = self.components(&cs);
                if components.len() > 1 {
                    let mut acc = Rational::one();
                    for group in components {
                        let sub = if conjunctive {
                            self.store.and(group)
                        } else {
                            self.store.or(group)
                        };
                        let q = self.probability(sub);
                        // P(∧) = Π p_i ; P(∨) = 1 − Π (1 − p_i)
                        acc *= if conjunctive { q } else { Rational::one() - q };
                    }
                    if conjunctive {
                        acc
                    } else {
                        Rational::one() - acc
                    }
                } else {
                    let x = self.split_variable(&cs);
                    let lo = self.store.restrict(id, &HashMap::from([(x, false)]));
                    let hi = self.store.restrict(id, &HashMap::from([(x, true)]));
                    (self.probability(lo) + self.probability(hi)) * half()
                }
            }
        };
        self.memo.insert(id, p.clone());
        p
    }

    /// Groups children into classes connected by shared variables.
    fn components(&mut self, children: &[NodeId]) -> Vec<Vec<NodeId>> {
        let sets: Vec<Rc<BTreeSet<VarId>>> = children.iter().map(|c| self.vars_of(*c)).collect();
        let mut parent: Vec<usize> = (0..children.len()).collect();
        fn find(parent: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
            }
            parent[i] = r;
            r
        }
        let mut owner: HashMap<VarId, usize> = HashMap::new();
        for (i, s) in sets.iter().enumerate() {
            for v in s.iter() {
                match owner.get(v) {
                    Some(&j) => {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                    None => {
                        owner.insert(*v, i);
                    }
                }
            }
        }
        let mut groups: Vec<(usize, Vec<NodeId>)> = Vec::new();
        for (i, c) in children.iter().enumerate() {
            let r = find(&mut parent, i);
            match groups.iter_mut().find(|(root, _)| *root == r) {
                Some((_, g)) => g.push(*c),
                None => groups.push((r, vec![*c])),
            }
        }
        groups.into_iter().map(|(_, g)| g).collect()
    }

    /// The variable occurring in the most children (lowest id on ties).
    fn split_variable(&mut self, children: &[NodeId]) -> VarId {
        let mut counts: HashMap<VarId, usize> = HashMap::new();
        for c in children {
            for v in self.vars_of(*c).iter() {
                *counts.entry(*v).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(v, _)| v)
            .expect("junction with variables")
    }
}
