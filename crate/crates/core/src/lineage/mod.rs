//! Lineage compilation and D-instantiation.
//!
//! An FO sentence compiles to a propositional formula over one variable per
//! potential tuple of the universe. Specializing it to an instance falsifies
//! positive occurrences of absent tuples and negative literals of present
//! tuples, then folds constants. Positive Datalog programs go straight to
//! the instantiated form by unfolding ground derivations of the goal.

mod datalog;
mod formula;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use datalog::ground_datalog_lineage;
pub use formula::{FormulaStore, Node, NodeId, Occurrence, VarId};

use crate::error::{Error, Result};
use crate::query::{Formula, Query, Term};
use crate::relational::{Assignment, Instance, Tuple};

/// A formula together with the store that owns its nodes.
#[derive(Debug, Clone)]
pub struct Lineage {
    pub store: FormulaStore,
    pub root: NodeId,
}

impl Lineage {
    pub fn to_text(&self) -> String {
        self.store.to_text(self.root)
    }

    pub fn to_dot(&self) -> String {
        self.store.to_dot(self.root)
    }

    pub fn eval(&self, sigma: &Assignment) -> bool {
        self.store
            .eval(self.root, &|t| sigma.get(t).copied().unwrap_or(false))
    }

    pub fn variables(&self) -> BTreeSet<Tuple> {
        self.store.variable_tuples(self.root)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn symbol(self) -> &'static str {
        match self {
            Polarity::Positive => "+",
            Polarity::Negative => "-",
        }
    }
}

/// Classification of one variable of a D-lineage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarInfo {
    pub endogenous: bool,
    pub polarity: Polarity,
    pub in_instance: bool,
}

/// `Φ_Q(D)` and its variable table.
#[derive(Debug, Clone)]
pub struct DLineage {
    pub lineage: Lineage,
    pub vars: BTreeMap<Tuple, VarInfo>,
}

impl DLineage {
    pub fn store(&self) -> &FormulaStore {
        &self.lineage.store
    }

    pub fn root(&self) -> NodeId {
        self.lineage.root
    }

    pub fn to_text(&self) -> String {
        self.lineage.to_text()
    }

    pub fn is_constant(&self) -> Option<bool> {
        self.lineage.store.as_constant(self.lineage.root)
    }

    /// The variables of exogenous tuples occurring positively / negatively.
    pub fn exogenous_vars(&self, polarity: Polarity) -> impl Iterator<Item = &Tuple> {
        self.vars
            .iter()
            .filter(move |(_, i)| !i.endogenous && i.polarity == polarity)
            .map(|(t, _)| t)
    }
}

/// Compiles a closed FO query to `Φ_Q` over `universe`.
pub fn build_lineage(q: &Query, universe: &BTreeSet<String>) -> Result<Lineage> {
    let fo = match q {
        Query::Fo(fo) => fo,
        other => {
            return Err(Error::WrongQueryKind {
                expected: "FO",
                found: other.kind_name(),
            })
        }
    };
    let mut store = FormulaStore::new();
    let root = compile(&fo.formula, universe, &mut HashMap::new(), &mut store)?;
    Ok(Lineage { store, root })
}

fn compile(
    f: &Formula,
    universe: &BTreeSet<String>,
    env: &mut HashMap<String, String>,
    store: &mut FormulaStore,
) -> Result<NodeId> {
    let ground = |t: &Term, env: &HashMap<String, String>| match t {
        Term::Const(c) => Ok(c.clone()),
        Term::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| Error::UnboundVariable(v.clone())),
    };
    Ok(match f {
        Formula::Atom(a) => {
            let args = a
                .args
                .iter()
                .map(|t| ground(t, env))
                .collect::<Result<Vec<_>>>()?;
            store.var(Tuple {
                predicate: a.predicate.clone(),
                args,
            })
        }
        Formula::Eq(l, r) => store.constant(ground(l, env)? == ground(r, env)?),
        Formula::Not(g) => {
            let g = compile(g, universe, env, store)?;
            store.not(g)
        }
        Formula::And(gs) | Formula::Or(gs) => {
            let kids = gs
                .iter()
                .map(|g| compile(g, universe, env, store))
                .collect::<Result<Vec<_>>>()?;
            if matches!(f, Formula::And(_)) {
                store.and(kids)
            } else {
                store.or(kids)
            }
        }
        Formula::Exists(x, g) => {
            let saved = env.remove(x);
            let mut kids = Vec::with_capacity(universe.len());
            for c in universe {
                env.insert(x.clone(), c.clone());
                kids.push(compile(g, universe, env, store));
            }
            env.remove(x);
            if let Some(v) = saved {
                env.insert(x.clone(), v);
            }
            let kids = kids.into_iter().collect::<Result<Vec<_>>>()?;
            store.or(kids)
        }
    })
}

/// Builds `Φ_Q(D)`. The formula is brought to negation normal form first,
/// then each positive `X_τ` with `τ ∉ D` and each literal `¬X_τ` with
/// `τ ∈ D` becomes false, and constants are folded.
pub fn instantiate_lineage(phi: &Lineage, inst: &Instance) -> Result<DLineage> {
    let mut store = phi.store.clone();
    let root = store.nnf(phi.root);
    let root = store.rewrite(root, &mut HashMap::new(), &|s, id| match s.node(id) {
        Node::Var(v) if !inst.contains(s.tuple(*v)) => Some(s.constant(false)),
        Node::Not(c) => match s.node(*c) {
            Node::Var(v) if inst.contains(s.tuple(*v)) => Some(s.constant(false)),
            _ => Some(id),
        },
        _ => None,
    });
    let vars = classify_variables(&store, root, inst)?;
    Ok(DLineage {
        lineage: Lineage { store, root },
        vars,
    })
}

/// Per-variable partition, polarity and membership flags. Tuples outside
/// `D` are endogenous. A variable with both signs is rejected.
pub fn classify_variables(
    store: &FormulaStore,
    root: NodeId,
    inst: &Instance,
) -> Result<BTreeMap<Tuple, VarInfo>> {
    let mut out = BTreeMap::new();
    for (v, occ) in store.occurrences(root) {
        let t = store.tuple(v);
        if occ.positive && occ.negative {
            return Err(Error::MixedPolarity(t.clone()));
        }
        out.insert(
            t.clone(),
            VarInfo {
                endogenous: !inst.is_exogenous(t),
                polarity: if occ.positive {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
                in_instance: inst.contains(t),
            },
        );
    }
    Ok(out)
}

/// `Φ_Q(D)` for any Boolean query: FO through compilation, Datalog through
/// ground unfolding.
pub fn d_lineage(q: &Query, inst: &Instance) -> Result<DLineage> {
    match q {
        Query::Fo(_) => instantiate_lineage(&build_lineage(q, inst.universe())?, inst),
        Query::Datalog(p) => ground_datalog_lineage(p, inst),
        Query::Aggregate(_) => Err(Error::WrongQueryKind {
            expected: "Boolean",
            found: "aggregate",
        }),
    }
}

/// `σ_D` on `vars`.
pub fn instance_assignment<'a>(
    inst: &Instance,
    vars: impl IntoIterator<Item = &'a Tuple>,
) -> Assignment {
    inst.assignment(vars)
}
