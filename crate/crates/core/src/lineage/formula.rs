//! Hash-consed propositional formulas over tuple variables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use indexmap::IndexSet;

use crate::relational::Tuple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(u32);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Const(bool),
    Var(VarId),
    Not(NodeId),
    And(Box<[NodeId]>),
    Or(Box<[NodeId]>),
}

/// Which signs a variable occurs with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Occurrence {
    pub positive: bool,
    pub negative: bool,
}

/// Arena of formula nodes. Structurally equal nodes are interned once, so
/// node identity coincides with structural equality.
#[derive(Debug, Clone)]
pub struct FormulaStore {
    nodes: Vec<Node>,
    table: HashMap<Node, NodeId>,
    vars: IndexSet<Tuple>,
}

impl Default for FormulaStore {
    fn default() -> Self {
        Self::new()
    }
}

const FALSE: NodeId = NodeId(0);
const TRUE: NodeId = NodeId(1);

impl FormulaStore {
    pub fn new() -> Self {
        let mut store = FormulaStore {
            nodes: Vec::new(),
            table: HashMap::new(),
            vars: IndexSet::new(),
        };
        store.intern(Node::Const(false));
        store.intern(Node::Const(true));
        store
    }

    fn intern(&mut self, node: Node) -> NodeId {
        if let Some(id) = self.table.get(&node) {
            return *id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.table.insert(node, id);
        id
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&self, value: bool) -> NodeId {
        if value {
            TRUE
        } else {
            FALSE
        }
    }

    pub fn as_constant(&self, id: NodeId) -> Option<bool> {
        match self.node(id) {
            Node::Const(b) => Some(*b),
            _ => None,
        }
    }

    pub fn var(&mut self, tuple: Tuple) -> NodeId {
        let (index, _) = self.vars.insert_full(tuple);
        self.intern(Node::Var(VarId(index as u32)))
    }

    pub fn var_id(&self, tuple: &Tuple) -> Option<VarId> {
        self.vars.get_index_of(tuple).map(|i| VarId(i as u32))
    }

    pub fn tuple(&self, var: VarId) -> &Tuple {
        &self.vars[var.0 as usize]
    }

    pub fn not(&mut self, child: NodeId) -> NodeId {
        self.intern(Node::Not(child))
    }

    /// n-ary conjunction: nested conjunctions are flattened and repeated
    /// children dropped; no children gives `true`, one gives the child.
    pub fn and(&mut self, children: impl IntoIterator<Item = NodeId>) -> NodeId {
        self.junction(true, children)
    }

    /// n-ary disjunction, normalized like [`FormulaStore::and`].
    pub fn or(&mut self, children: impl IntoIterator<Item = NodeId>) -> NodeId {
        self.junction(false, children)
    }

    fn junction(
        &mut self,
        conjunctive: bool,
        children: impl IntoIterator<Item = NodeId>,
    ) -> NodeId {
        let mut flat: IndexSet<NodeId> = IndexSet::new();
        for c in children {
            match self.node(c) {
                Node::And(gs) if conjunctive => flat.extend(gs.iter().copied()),
                Node::Or(gs) if !conjunctive => flat.extend(gs.iter().copied()),
                _ => {
                    flat.insert(c);
                }
            }
        }
        match flat.len() {
            0 => self.constant(conjunctive),
            1 => flat[0],
            _ => {
                let children: Box<[NodeId]> = flat.into_iter().collect();
                self.intern(if conjunctive {
                    Node::And(children)
                } else {
                    Node::Or(children)
                })
            }
        }
    }

    /// Boolean constant folding: `false ∧ φ → false`, `true ∧ φ → φ`,
    /// `true ∨ φ → true`, `false ∨ φ → φ`, `¬true → false`, `¬¬φ → φ`.
    pub fn fold(&mut self, root: NodeId) -> NodeId {
        self.rewrite(root, &mut HashMap::new(), &|_, _| None)
    }

    /// Substitutes constants for variables and folds.
    pub fn restrict(&mut self, root: NodeId, values: &HashMap<VarId, bool>) -> NodeId {
        if values.is_empty() {
            return self.fold(root);
        }
        self.rewrite(
            root,
            &mut HashMap::new(),
            &|store, id| match store.node(id) {
                Node::Var(v) => values.get(v).map(|b| store.constant(*b)),
                _ => None,
            },
        )
    }

    /// Bottom-up rewrite with folding; `leaf` may replace a node outright.
    pub(crate) fn rewrite(
        &mut self,
        id: NodeId,
        memo: &mut HashMap<NodeId, NodeId>,
        leaf: &dyn Fn(&FormulaStore, NodeId) -> Option<NodeId>,
    ) -> NodeId {
        if let Some(done) = memo.get(&id) {
            return *done;
        }
        let out = if let Some(r) = leaf(self, id) {
            r
        } else {
            match self.node(id).clone() {
                Node::Const(_) | Node::Var(_) => id,
                Node::Not(c) => {
                    let c = self.rewrite(c, memo, leaf);
                    match self.node(c).clone() {
                        Node::Const(b) => self.constant(!b),
                        Node::Not(inner) => inner,
                        _ => self.not(c),
                    }
                }
                Node::And(cs) | Node::Or(cs) => {
                    let conjunctive = matches!(self.node(id), Node::And(_));
                    let mut kept = Vec::with_capacity(cs.len());
                    let mut absorbed = false;
                    for c in cs.iter() {
                        let c = self.rewrite(*c, memo, leaf);
                        match self.as_constant(c) {
                            Some(b) if b == conjunctive => {}
                            Some(_) => {
                                absorbed = true;
                                break;
                            }
                            None => kept.push(c),
                        }
                    }
                    if absorbed {
                        self.constant(!conjunctive)
                    } else {
                        self.junction(conjunctive, kept)
                    }
                }
            }
        };
        memo.insert(id, out);
        out
    }

    /// Negation normal form: negations pushed onto variables.
    pub fn nnf(&mut self, root: NodeId) -> NodeId {
        let mut memo = HashMap::new();
        self.nnf_rec(root, false, &mut memo)
    }

    fn nnf_rec(
        &mut self,
        id: NodeId,
        negated: bool,
        memo: &mut HashMap<(NodeId, bool), NodeId>,
    ) -> NodeId {
        if let Some(done) = memo.get(&(id, negated)) {
            return *done;
        }
        let out = match self.node(id).clone() {
            Node::Const(b) => self.constant(b != negated),
            Node::Var(_) => {
                if negated {
                    self.not(id)
                } else {
                    id
                }
            }
            Node::Not(c) => self.nnf_rec(c, !negated, memo),
            Node::And(cs) | Node::Or(cs) => {
                let conjunctive = matches!(self.node(id), Node::And(_)) != negated;
                let kids: Vec<NodeId> =
                    cs.iter().map(|c| self.nnf_rec(*c, negated, memo)).collect();
                self.junction(conjunctive, kids)
            }
        };
        memo.insert((id, negated), out);
        out
    }

    pub fn is_nnf(&self, root: NodeId) -> bool {
        self.reachable(root)
            .into_iter()
            .all(|id| match self.node(id) {
                Node::Not(c) => matches!(self.node(*c), Node::Var(_)),
                _ => true,
            })
    }

    /// Nodes reachable from `root`, children before parents.
    pub fn reachable(&self, root: NodeId) -> Vec<NodeId> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                order.push(id);
                continue;
            }
            if !seen.insert(id) {
                continue;
            }
            stack.push((id, true));
            match self.node(id) {
                Node::Not(c) => stack.push((*c, false)),
                Node::And(cs) | Node::Or(cs) => stack.extend(cs.iter().rev().map(|c| (*c, false))),
                _ => {}
            }
        }
        order
    }

    pub fn variables(&self, root: NodeId) -> BTreeSet<VarId> {
        self.reachable(root)
            .into_iter()
            .filter_map(|id| match self.node(id) {
                Node::Var(v) => Some(*v),
                _ => None,
            })
            .collect()
    }

    pub fn variable_tuples(&self, root: NodeId) -> BTreeSet<Tuple> {
        self.variables(root)
            .into_iter()
            .map(|v| self.tuple(v).clone())
            .collect()
    }

    /// Signs with which each variable occurs, counting negations on the path.
    pub fn occurrences(&self, root: NodeId) -> BTreeMap<VarId, Occurrence> {
        let mut out: BTreeMap<VarId, Occurrence> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![(root, false)];
        while let Some((id, negated)) = stack.pop() {
            if !seen.insert((id, negated)) {
                continue;
            }
            match self.node(id) {
                Node::Const(_) => {}
                Node::Var(v) => {
                    let e = out.entry(*v).or_default();
                    if negated {
                        e.negative = true;
                    } else {
                        e.positive = true;
                    }
                }
                Node::Not(c) => stack.push((*c, !negated)),
                Node::And(cs) | Node::Or(cs) => stack.extend(cs.iter().map(|c| (*c, negated))),
            }
        }
        out
    }

    /// Evaluates under a truth assignment given as a predicate on tuples.
    pub fn eval(&self, root: NodeId, value: &dyn Fn(&Tuple) -> bool) -> bool {
        let mut memo: HashMap<NodeId, bool> = HashMap::new();
        for id in self.reachable(root) {
            let v = match self.node(id) {
                Node::Const(b) => *b,
                Node::Var(x) => value(self.tuple(*x)),
                Node::Not(c) => !memo[c],
                Node::And(cs) => cs.iter().all(|c| memo[c]),
                Node::Or(cs) => cs.iter().any(|c| memo[c]),
            };
            memo.insert(id, v);
        }
        memo[&root]
    }

    /// Canonical text: `&`, `|`, `!`, variables written as tuples.
    pub fn to_text(&self, root: NodeId) -> String {
        let mut out = String::new();
        self.write_text(root, &mut out, false);
        out
    }

    fn write_text(&self, id: NodeId, out: &mut String, nested: bool) {
        match self.node(id) {
            Node::Const(b) => out.push_str(if *b { "true" } else { "false" }),
            Node::Var(v) => {
                let _ = write!(out, "{}", self.tuple(*v));
            }
            Node::Not(c) => {
                out.push('!');
                self.write_text(*c, out, true);
            }
            Node::And(cs) | Node::Or(cs) => {
                let sep = if matches!(self.node(id), Node::And(_)) {
                    " & "
                } else {
                    " | "
                };
                if nested {
                    out.push('(');
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(sep);
                    }
                    self.write_text(*c, out, true);
                }
                if nested {
                    out.push(')');
                }
            }
        }
    }

    /// Graphviz rendering of the DAG below `root`; shared nodes appear once.
    pub fn to_dot(&self, root: NodeId) -> String {
        let mut out = String::from("digraph lineage {\n  node [fontname=\"monospace\"];\n");
        for id in self.reachable(root) {
            let (label, shape) = match self.node(id) {
                Node::Const(b) => (b.to_string(), "box"),
                Node::Var(v) => (self.tuple(*v).to_string(), "box"),
                Node::Not(_) => ("!".to_string(), "circle"),
                Node::And(_) => ("&".to_string(), "circle"),
                Node::Or(_) => ("|".to_string(), "circle"),
            };
            let _ = writeln!(
                out,
                "  n{} [label=\"{}\", shape={}];",
                id.0,
                label.replace('"', "\\\""),
                shape
            );
            let children: &[NodeId] = match self.node(id) {
                Node::Not(c) => std::slice::from_ref(c),
                Node::And(cs) | Node::Or(cs) => cs,
                _ => &[],
            };
            for c in children {
                let _ = writeln!(out, "  n{} -> n{};", id.0, c.0);
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(store: &mut FormulaStore, name: &str) -> NodeId {
        store.var(Tuple::new("R", &[name]))
    }

    #[test]
    fn structurally_equal_formulas_share_nodes() {
        let mut s = FormulaStore::new();
        let a = x(&mut s, "a");
        let b = x(&mut s, "b");
        let nb = s.not(b);
        let f = s.and([a, nb]);
        let a2 = x(&mut s, "a");
        let b2 = x(&mut s, "b");
        let nb2 = s.not(b2);
        let g = s.and([a2, nb2]);
        assert_eq!(a, a2);
        assert_eq!(f, g);
        let before = s.len();
        let _ = s.or([f, g]);
        assert_eq!(s.len(), before);
    }

    #[test]
    fn junctions_flatten_and_dedupe() {
        let mut s = FormulaStore::new();
        let a = x(&mut s, "a");
        let b = x(&mut s, "b");
        let c = x(&mut s, "c");
        let ab = s.and([a, b]);
        let abc = s.and([ab, c, a]);
        assert_eq!(s.node(abc), &Node::And(vec![a, b, c].into()));
        assert_eq!(s.or([a]), a);
        let (empty_and, empty_or) = (s.and([]), s.or([]));
        assert_eq!(s.as_constant(empty_and), Some(true));
        assert_eq!(s.as_constant(empty_or), Some(false));
    }

    #[test]
    fn folding_rules() {
        let mut s = FormulaStore::new();
        let a = x(&mut s, "a");
        let t = s.constant(true);
        let f = s.constant(false);
        let g = s.and([a, f]);
        assert_eq!(s.fold(g), f);
        let g = s.and([a, t]);
        assert_eq!(s.fold(g), a);
        let g = s.or([a, t]);
        assert_eq!(s.fold(g), t);
        let g = s.or([f, a]);
        assert_eq!(s.fold(g), a);
        let na = s.not(a);
        let nna = s.not(na);
        assert_eq!(s.fold(nna), a);
        let nt = s.not(t);
        assert_eq!(s.fold(nt), f);
    }

    #[test]
    fn nnf_pushes_negation() {
        let mut s = FormulaStore::new();
        let a = x(&mut s, "a");
        let b = x(&mut s, "b");
        let ab = s.and([a, b]);
        let n = s.not(ab);
        assert!(!s.is_nnf(n));
        let m = s.nnf(n);
        assert!(s.is_nnf(m));
        assert_eq!(s.to_text(m), "!R(a) | !R(b)");
        for (va, vb) in [(false, false), (false, true), (true, false), (true, true)] {
            let val = |t: &Tuple| if t.args[0] == "a" { va } else { vb };
            assert_eq!(s.eval(n, &val), s.eval(m, &val));
        }
    }

    #[test]
    fn occurrences_track_sign() {
        let mut s = FormulaStore::new();
        let a = x(&mut s, "a");
        let b = x(&mut s, "b");
        let na = s.not(a);
        let f = s.or([na, b, a]);
        let occ = s.occurrences(f);
        let va = s.var_id(&Tuple::new("R", &["a"])).unwrap();
        let vb = s.var_id(&Tuple::new("R", &["b"])).unwrap();
        assert_eq!(
            occ[&va],
            Occurrence {
                positive: true,
                negative: true
            }
        );
        assert_eq!(
            occ[&vb],
            Occurrence {
                positive: true,
                negative: false
            }
        );
    }

    #[test]
    fn text_and_dot_rendering() {
        let mut s = FormulaStore::new();
        let a = x(&mut s, "a");
        let b = x(&mut s, "b");
        let c = x(&mut s, "c");
        let nb = s.not(b);
        let l = s.and([a, nb]);
        let r = s.and([c, nb]);
        let f = s.or([l, r]);
        assert_eq!(s.to_text(f), "(R(a) & !R(b)) | (R(c) & !R(b))");
        let dot = s.to_dot(f);
        assert!(dot.starts_with("digraph lineage {"));
        // the shared `!R(b)` node appears once
        assert_eq!(dot.matches("label=\"!\"").count(), 1);
        assert_eq!(s.to_text(s.constant(true)), "true");
    }

    #[test]
    fn restrict_substitutes_and_folds() {
        let mut s = FormulaStore::new();
        let a = x(&mut s, "a");
        let b = x(&mut s, "b");
        let f = s.or([a, b]);
        let va = s.var_id(&Tuple::new("R", &["a"])).unwrap();
        let g = s.restrict(f, &[(va, false)].into());
        assert_eq!(g, b);
        let g = s.restrict(f, &[(va, true)].into());
        assert_eq!(s.as_constant(g), Some(true));
    }
}
