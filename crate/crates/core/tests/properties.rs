mod common;

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::*;
use tuplecause::lineage::{build_lineage, d_lineage, FormulaStore, Lineage, Polarity};
use tuplecause::metrics::{
    actual_causes, causal_effect_aggregate, correlate_all, is_counterfactual_cause, rank_by_effect,
    Options,
};
use tuplecause::probability::{
    enumerate_worlds, expectation, interventional_expectation, shannon_expectation, Indicator,
    Intervention, LineageVariable, OutcomeSpace, RandomVariable,
};
use tuplecause::query::{datalog_fixpoint, evaluate_boolean, parse_query, Query};
use tuplecause::rational::{int, ratio};
use tuplecause::{Assignment, Instance, Rational, Schema, Tuple};

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn random_lineage(r: &mut StdRng, max_vars: usize) -> Lineage {
    let n = r.gen_range(1..=max_vars);
    let (store, root) = random_formula(r, n, 5);
    Lineage { store, root }
}

fn random_fixed(r: &mut StdRng, vars: &[Tuple]) -> Assignment {
    let mut fixed = Assignment::new();
    for v in vars {
        if r.gen_bool(0.3) {
            fixed.insert(v.clone(), r.gen_bool(0.5));
        }
    }
    fixed
}

fn superset(r: &mut StdRng, d: &Instance) -> Instance {
    let extra = random_instance(r, 4, 0.0);
    let endo: BTreeSet<Tuple> = d
        .endogenous()
        .iter()
        .chain(extra.tuples())
        .cloned()
        .collect();
    Instance::new(
        Schema::parse("R(A,B)\nS(A)\nUNIVERSE a,b,c").unwrap(),
        endo.difference(d.exogenous()).cloned().collect(),
        d.exogenous().clone(),
    )
    .unwrap()
}

struct Affine<'a> {
    a: Rational,
    u: &'a dyn RandomVariable,
    b: Rational,
    v: &'a dyn RandomVariable,
}

impl RandomVariable for Affine<'_> {
    fn value(&self, w: &Assignment) -> Rational {
        &self.a * self.u.value(w) + &self.b * self.v.value(w)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lineage_agrees_with_evaluator(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_instance(&mut r, 5, 0.25);
        let query = random_fo_query(&mut r, 3, true);
        let truth = evaluate_boolean(&query, &d).unwrap();
        let phi = build_lineage(&query, d.universe()).unwrap();
        prop_assert_eq!(phi.eval(&d.assignment(phi.variables().iter())), truth);
        let dl = d_lineage(&query, &d).unwrap();
        prop_assert_eq!(dl.lineage.eval(&d.assignment(dl.vars.keys())), truth);
    }

    #[test]
    fn negation_free_queries_are_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let small = random_instance(&mut r, 4, 0.2);
        let large = superset(&mut r, &small);
        let query = random_fo_query(&mut r, 3, false);
        if evaluate_boolean(&query, &small).unwrap() {
            prop_assert!(evaluate_boolean(&query, &large).unwrap());
        }
    }

    #[test]
    fn datalog_fixpoint_is_bounded(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_edges(&mut r, 7);
        let Query::Datalog(p) = q(PATH, &d) else { unreachable!() };
        let fp = datalog_fixpoint(&p, &d);
        // ground atoms: path over 4 nodes plus the goal
        prop_assert!(fp.iterations <= NODES.len() * NODES.len() + 1);
    }

    #[test]
    fn instantiated_polarity_is_normalized(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_instance(&mut r, 5, 0.25);
        let dl = d_lineage(&random_fo_query(&mut r, 3, true), &d).unwrap();
        for (t, info) in &dl.vars {
            let expected = if d.contains(t) { Polarity::Positive } else { Polarity::Negative };
            prop_assert_eq!(info.polarity, expected);
            prop_assert_eq!(info.in_instance, d.contains(t));
        }
        let occ = dl.store().occurrences(dl.root());
        for o in occ.values() {
            prop_assert!(!(o.positive && o.negative));
        }
    }

    #[test]
    fn monotone_queries_have_negation_free_lineage(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_instance(&mut r, 5, 0.25);
        let dl = d_lineage(&random_fo_query(&mut r, 3, false), &d).unwrap();
        prop_assert!(dl.store().occurrences(dl.root()).values().all(|o| !o.negative));
    }

    #[test]
    fn path_lineage_matches_reachability(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_edges(&mut r, 6);
        let dl = d_lineage(&q(PATH, &d), &d).unwrap();
        let edges: Vec<Tuple> = d.tuples().cloned().collect();
        for mask in 0..(1u32 << edges.len()) {
            let sigma: Assignment = edges
                .iter()
                .enumerate()
                .map(|(i, e)| (e.clone(), mask >> i & 1 == 1))
                .collect();
            let world = tuplecause::relational::materialize_world(&d, &sigma, &edges).unwrap();
            prop_assert_eq!(dl.lineage.eval(&sigma), reachable(&world, "a", "b"));
        }
    }

    #[test]
    fn hash_consing_identifies_equal_structure(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut store = FormulaStore::new();
        let n = r.gen_range(1..6);
        let build = |store: &mut FormulaStore, bits: &[bool]| {
            let lits: Vec<_> = bits
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let x = store.var(Tuple::new("X", &[i.to_string()]));
                    if *b { x } else { store.not(x) }
                })
                .collect();
            let c = store.and(lits.clone());
            store.or([c, lits[0]])
        };
        let bits: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        let first = build(&mut store, &bits);
        let size = store.len();
        let second = build(&mut store, &bits);
        prop_assert_eq!(first, second);
        prop_assert_eq!(store.len(), size);
    }

    #[test]
    fn shannon_agrees_with_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let l = random_lineage(&mut r, 12);
        let vars: Vec<Tuple> = l.variables().into_iter().collect();
        let fixed = random_fixed(&mut r, &vars);
        let space = OutcomeSpace::new(vars, fixed.clone()).unwrap();
        let by_enumeration = expectation(&LineageVariable(&l), &space, 24).unwrap();
        prop_assert_eq!(shannon_expectation(&l.store, l.root, &fixed), by_enumeration);
    }

    #[test]
    fn probabilities_are_bounded_and_complementary(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut l = random_lineage(&mut r, 10);
        let vars: Vec<Tuple> = l.variables().into_iter().collect();
        let fixed = random_fixed(&mut r, &vars);
        let p = shannon_expectation(&l.store, l.root, &fixed);
        prop_assert!(!p.is_negative() && p <= Rational::one());
        let negated = l.store.not(l.root);
        prop_assert_eq!(shannon_expectation(&l.store, negated, &fixed), Rational::one() - p);
    }

    #[test]
    fn intervention_equals_conditioning(seed in any::<u64>()) {
        let mut r = rng(seed);
        let l = random_lineage(&mut r, 8);
        let vars: Vec<Tuple> = l.variables().into_iter().collect();
        prop_assume!(!vars.is_empty());
        let x = vars[r.gen_range(0..vars.len())].clone();
        let value = r.gen_bool(0.5);
        let space = OutcomeSpace::new(vars, Assignment::new()).unwrap();
        let rv = LineageVariable(&l);
        let intervened =
            interventional_expectation(&rv, &space, &Intervention::single(x.clone(), value), 24)
                .unwrap();
        let (mut hits, mut total) = (Rational::zero(), 0i64);
        for w in enumerate_worlds(&space, 24).unwrap() {
            if w[&x] == value {
                hits += rv.value(&w);
                total += 1;
            }
        }
        prop_assert_eq!(intervened, hits / int(total));
    }

    #[test]
    fn expectation_is_linear(seed in any::<u64>(), a in -20i64..20, b in -20i64..20) {
        let mut r = rng(seed);
        let l = random_lineage(&mut r, 8);
        let vars: Vec<Tuple> = l.variables().into_iter().collect();
        prop_assume!(!vars.is_empty());
        let x = Indicator(vars[0].clone());
        let space = OutcomeSpace::new(vars, Assignment::new()).unwrap();
        let u = LineageVariable(&l);
        let combined = Affine { a: int(a), u: &u, b: int(b), v: &x };
        let lhs = expectation(&combined, &space, 24).unwrap();
        let rhs = int(a) * expectation(&u, &space, 24).unwrap()
            + int(b) * expectation(&x, &space, 24).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instantiated_effects_are_nonnegative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_instance(&mut r, 5, 0.25);
        let query = random_fo_query(&mut r, 3, true);
        for e in rank_by_effect(&d, &query, &Options::default()).unwrap() {
            prop_assert!(!e.effect.is_negative(), "{} {}", e.tuple, e.effect);
            prop_assert_eq!(e.effect.clone(), &e.e_do_v - &e.e_do_not_v);
        }
    }

    #[test]
    fn causes_are_the_positive_effect_tuples(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_instance(&mut r, 5, 0.2);
        prop_assume!(d.endogenous().len() <= 10);
        let query = random_fo_query(&mut r, 3, false);
        prop_assume!(evaluate_boolean(&query, &d).unwrap());
        let causes: BTreeSet<Tuple> = actual_causes(&d, &query, &Options::default())
            .unwrap()
            .into_iter()
            .filter(|c| c.is_actual_cause)
            .map(|c| c.tuple)
            .collect();
        let positive: BTreeSet<Tuple> = rank_by_effect(&d, &query, &Options::default())
            .unwrap()
            .into_iter()
            .filter(|e| e.effect.is_positive())
            .map(|e| e.tuple)
            .collect();
        prop_assert_eq!(causes, positive);
    }

    #[test]
    fn responsibility_takes_reciprocal_values(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_instance(&mut r, 4, 0.2);
        let query = random_fo_query(&mut r, 3, false);
        prop_assume!(evaluate_boolean(&query, &d).unwrap());
        for c in actual_causes(&d, &query, &Options::default()).unwrap() {
            let counterfactual = is_counterfactual_cause(&d, &query, &c.tuple).unwrap();
            match &c.minimal_contingency {
                Some(g) => {
                    prop_assert!(c.is_actual_cause);
                    prop_assert_eq!(c.responsibility.clone(), ratio(1, 1 + g.len() as i64));
                }
                None => prop_assert!(c.responsibility.is_zero() && !c.is_actual_cause),
            }
            prop_assert_eq!(c.responsibility == Rational::one(), counterfactual);
            if counterfactual {
                prop_assert_eq!(c.minimal_contingency, Some(vec![]));
            }
        }
    }

    #[test]
    fn effect_matches_scaled_correlation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_instance(&mut r, 5, 0.25);
        let query = random_fo_query(&mut r, 3, true);
        let dl = d_lineage(&query, &d).unwrap();
        prop_assume!(dl.is_constant().is_none());
        let space = OutcomeSpace::for_lineage(&dl);
        let p = shannon_expectation(dl.store(), dl.root(), space.fixed());
        prop_assume!(!p.is_zero() && p != Rational::one());
        for c in correlate_all(&d, &query, &Options::default()).unwrap() {
            prop_assert!(c.identity_exact, "{}", c.tuple);
            prop_assert!(c.r.abs() <= 1.0 + 1e-12);
            prop_assert!(c.residual().abs() < 1e-9);
        }
    }

    #[test]
    fn sum_effect_is_the_column_value(values in proptest::collection::btree_set(-1000i64..1000, 1..=8)) {
        let schema = Schema::parse("R(A)").unwrap();
        let tuples: Vec<Tuple> = values.iter().map(|v| Tuple::new("R", &[v.to_string()])).collect();
        let d = Instance::endogenous_only(schema, tuples.clone()).unwrap();
        let Query::Aggregate(a) = parse_query("AGG SUM R.A", d.schema()).unwrap() else {
            unreachable!()
        };
        for (t, v) in tuples.iter().zip(&values) {
            let e = causal_effect_aggregate(&d, &a, t, &Options::default()).unwrap();
            prop_assert_eq!(e.effect, int(*v));
        }
    }
}
