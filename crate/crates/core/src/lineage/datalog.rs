//! Lineage of positive Datalog goals by top-down unfolding of ground rules.

use std::collections::{BTreeMap, BTreeSet};

use super::{instantiate_lineage, DLineage, FormulaStore, Lineage, NodeId};
use crate::error::Result;
use crate::query::{Atom, DatalogProgram, Term};
use crate::relational::{Instance, Tuple};

type GroundAtom = (String, Vec<String>);

struct Unfolder<'a> {
    prog: &'a DatalogProgram,
    inst: &'a Instance,
    intensional: BTreeSet<&'a str>,
    domain: Vec<String>,
    store: FormulaStore,
    /// ground intensional atoms on the current derivation path
    path: Vec<GroundAtom>,
}

impl<'a> Unfolder<'a> {
    fn unfold(&mut self, goal: &GroundAtom) -> NodeId {
        self.path.push(goal.clone());
        let mut disjuncts = Vec::new();
        for rule in &self.prog.rules {
            if rule.head.predicate != goal.0 || rule.head.args.len() != goal.1.len() {
                continue;
            }
            let mut env = BTreeMap::new();
            if !unify(&rule.head, &goal.1, &mut env) {
                continue;
            }
            let mut literals = Vec::new();
            self.ground_body(&rule.body, 0, &mut env, &mut literals, &mut disjuncts);
        }
        self.path.pop();
        let d = self.store.or(disjuncts);
        self.store.fold(d)
    }

    /// Enumerates groundings of `body[i..]`, pushing one conjunction per
    /// complete grounding. Extensional atoms only match tuples of `D`, since
    /// any other positive tuple variable is false in the D-lineage.
    fn ground_body(
        &mut self,
        body: &[Atom],
        i: usize,
        env: &mut BTreeMap<String, String>,
        literals: &mut Vec<NodeId>,
        out: &mut Vec<NodeId>,
    ) {
        let Some(atom) = body.get(i) else {
            out.push(self.store.and(literals.iter().copied()));
            return;
        };
        if self.intensional.contains(atom.predicate.as_str()) {
            let unbound: Vec<String> = atom
                .args
                .iter()
                .filter_map(|t| match t {
                    Term::Var(v) if !env.contains_key(v) => Some(v.clone()),
                    _ => None,
                })
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            self.each_binding(&unbound, 0, env, &mut |this, env| {
                let ground: GroundAtom = (
                    atom.predicate.clone(),
                    atom.args.iter().map(|t| resolve(t, env)).collect(),
                );
                if this.path.contains(&ground) {
                    return;
                }
                let sub = this.unfold(&ground);
                if this.store.as_constant(sub) == Some(false) {
                    return;
                }
                literals.push(sub);
                this.ground_body(body, i + 1, env, literals, out);
                literals.pop();
            });
        } else {
            let matches: Vec<Tuple> = self.inst.relation(&atom.predicate).cloned().collect();
            for t in matches {
                let mut local = env.clone();
                if !unify(atom, &t.args, &mut local) {
                    continue;
                }
                let x = self.store.var(t);
                literals.push(x);
                self.ground_body(body, i + 1, &mut local, literals, out);
                literals.pop();
            }
        }
    }

    fn each_binding(
        &mut self,
        vars: &[String],
        k: usize,
        env: &mut BTreeMap<String, String>,
        f: &mut dyn FnMut(&mut Self, &mut BTreeMap<String, String>),
    ) {
        if k == vars.len() {
            f(self, env);
            return;
        }
        for c in self.domain.clone() {
            env.insert(vars[k].clone(), c);
            self.each_binding(vars, k + 1, env, f);
        }
        env.remove(&vars[k]);
    }
}

fn resolve(t: &Term, env: &BTreeMap<String, String>) -> String {
    match t {
        Term::Const(c) => c.clone(),
        Term::Var(v) => env[v].clone(),
    }
}

fn unify(atom: &Atom, args: &[String], env: &mut BTreeMap<String, String>) -> bool {
    atom.args.len() == args.len()
        && atom.args.iter().zip(args).all(|(t, c)| match t {
            Term::Const(k) => k == c,
            Term::Var(v) => match env.get(v) {
                Some(existing) => existing == c,
                None => {
                    env.insert(v.clone(), c.clone());
                    true
                }
            },
        })
}

/// `Φ_Q(D)` of the program's goal: disjunction over ground derivations,
/// each a conjunction of extensional tuple variables. A derivation never
/// uses a ground intensional atom inside its own support, which keeps
/// recursive programs finite without losing minimal-model answers.
///
/// Intensional variables not bound by an extensional atom range over the
/// universe plus the program's constants.
pub fn ground_datalog_lineage(prog: &DatalogProgram, inst: &Instance) -> Result<DLineage> {
    let mut domain: BTreeSet<String> = inst.universe().clone();
    domain.extend(prog.constants());
    let mut u = Unfolder {
        prog,
        inst,
        intensional: prog.intensional(),
        domain: domain.into_iter().collect(),
        store: FormulaStore::new(),
        path: Vec::new(),
    };
    let goal = (
        prog.goal.predicate.clone(),
        prog.goal
            .args
            .iter()
            .map(|t| resolve(t, &BTreeMap::new()))
            .collect(),
    );
    let root = u.unfold(&goal);
    instantiate_lineage(
        &Lineage {
            store: u.store,
            root,
        },
        inst,
    )
}
