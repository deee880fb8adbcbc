//! Causal effect, counterfactual and actual causes, responsibility, and the
//! Pearson normalization of the causal effect.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lineage::{d_lineage, DLineage, Polarity};
use crate::probability::{
    expectation, interventional_expectation, moments, shannon_expectation, AggregateVariable,
    Indicator, Intervention, Product, DEFAULT_ENUMERATION_CAP,
};
use crate::query::{evaluate_boolean, AggregateQuery, Query};
use crate::rational::{half, int, ratio, to_f64, Rational};
use crate::relational::{Assignment, Instance, Tuple};

pub const DEFAULT_CONTINGENCY_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    /// Largest number of free variables enumerated for aggregate expectations.
    pub enumeration_cap: usize,
    /// Largest `|D^n|` for the brute-force contingency search.
    pub contingency_cap: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            contingency_cap: DEFAULT_CONTINGENCY_CAP,
        }
    }
}

impl Options {
    pub fn with_cap(cap: usize) -> Self {
        Options {
            enumeration_cap: cap,
            contingency_cap: cap,
        }
    }
}

/// `E^D_{τ,Q}` together with the two interventional expectations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectResult {
    pub tuple: Tuple,
    pub polarity: Polarity,
    /// `true` iff `τ ∈ D`.
    pub v: bool,
    pub effect: Rational,
    /// `E(Q | do(X_τ = v))`
    pub e_do_v: Rational,
    /// `E(Q | do(X_τ = 1 − v))`
    pub e_do_not_v: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyResult {
    pub tuple: Tuple,
    pub is_actual_cause: bool,
    /// A smallest `Γ` making the tuple counterfactual.
    pub minimal_contingency: Option<Vec<Tuple>>,
    pub responsibility: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub tuple: Tuple,
    pub polarity: Polarity,
    pub r: f64,
    pub r_squared: Rational,
    pub cov: Rational,
    pub mu_q: Rational,
    pub mu_x: Rational,
    pub var_q: Rational,
    pub var_x: Rational,
    pub sigma_q: f64,
    pub sigma_x: f64,
    pub effect: Rational,
    /// `±r·σ_Q/σ_X`, signed by polarity.
    pub identity: f64,
    /// `effect² · σ_X² = r² · σ_Q²` over the rationals.
    pub identity_exact: bool,
}

impl CorrelationResult {
    /// `identity − effect`, with negative zero normalized away.
    pub fn residual(&self) -> f64 {
        let d = self.identity - to_f64(&self.effect);
        if d == 0.0 {
            0.0
        } else {
            d
        }
    }
}

/// What the expectations of a query are taken over.
enum Model<'a> {
    Lineage(DLineage),
    Aggregate(AggregateVariable<'a>),
}

impl<'a> Model<'a> {
    fn new(inst: &'a Instance, q: &'a Query) -> Result<Self> {
        match q {
            Query::Aggregate(a) => Ok(Model::Aggregate(aggregate_variable(inst, a)?)),
            _ => Ok(Model::Lineage(d_lineage(q, inst)?)),
        }
    }

    /// Endogenous tuples of `D` plus absent tuples occurring negatively.
    fn candidates(&self, inst: &Instance) -> Vec<Tuple> {
        let mut out: BTreeSet<Tuple> = inst.endogenous().clone();
        if let Model::Lineage(dl) = self {
            out.extend(
                dl.vars
                    .iter()
                    .filter(|(_, i)| i.endogenous && !i.in_instance)
                    .map(|(t, _)| t.clone()),
            );
        }
        out.into_iter().collect()
    }

    fn polarity(&self, inst: &Instance, tau: &Tuple) -> Polarity {
        match self {
            Model::Lineage(dl) => dl.vars.get(tau).map(|i| i.polarity),
            Model::Aggregate(_) => None,
        }
        .unwrap_or(if inst.contains(tau) {
            Polarity::Positive
        } else {
            Polarity::Negative
        })
    }

    fn contains(&self, tau: &Tuple) -> bool {
        match self {
            Model::Lineage(dl) => dl.vars.contains_key(tau),
            Model::Aggregate(rv) => rv.space().contains(tau),
        }
    }

    /// `E(Q | fixed)` with `fixed` added to the exogenous pinning.
    fn expect(&self, extra: Option<(&Tuple, bool)>, opts: &Options) -> Result<Rational> {
        match self {
            Model::Lineage(dl) => {
                let mut fixed: Assignment = crate::probability::exogenous_pinning(dl);
                if let Some((t, b)) = extra {
                    fixed.insert(t.clone(), b);
                }
                Ok(shannon_expectation(dl.store(), dl.root(), &fixed))
            }
            Model::Aggregate(rv) => {
                let iv = match extra {
                    Some((t, b)) => Intervention::single(t.clone(), b),
                    None => Intervention::none(),
                };
                interventional_expectation(rv, &rv.space(), &iv, opts.enumeration_cap)
            }
        }
    }

    fn effect(&self, inst: &Instance, tau: &Tuple, opts: &Options) -> Result<EffectResult> {
        if inst.is_exogenous(tau) {
            return Err(Error::ExogenousTuple(tau.clone()));
        }
        let v = inst.contains(tau);
        let (e_do_v, e_do_not_v) = if self.contains(tau) {
            (
                self.expect(Some((tau, v)), opts)?,
                self.expect(Some((tau, !v)), opts)?,
            )
        } else {
            let e = self.expect(None, opts)?;
            (e.clone(), e)
        };
        Ok(EffectResult {
            tuple: tau.clone(),
            polarity: self.polarity(inst, tau),
            v,
            effect: &e_do_v - &e_do_not_v,
            e_do_v,
            e_do_not_v,
        })
    }

    fn correlation(
        &self,
        inst: &Instance,
        tau: &Tuple,
        opts: &Options,
    ) -> Result<CorrelationResult> {
        let effect = self.effect(inst, tau, opts)?;
        let (mu_q, var_q) = match self {
            Model::Lineage(_) => {
                let p = self.expect(None, opts)?;
                let var = &p * (Rational::one() - &p);
                (p, var)
            }
            Model::Aggregate(rv) => moments(rv, &rv.space(), opts.enumeration_cap)?,
        };
        if var_q.is_zero() {
            return Err(Error::ZeroVariance);
        }
        let (mu_x, var_x) = (half(), ratio(1, 4));
        // an absent variable is an independent coin: Cov = 0
        let joint = if !self.contains(tau) {
            &mu_q * &mu_x
        } else {
            match self {
                Model::Lineage(_) => self.expect(Some((tau, true)), opts)? * half(),
                Model::Aggregate(rv) => {
                    let x = Indicator(tau.clone());
                    expectation(&Product(rv, &x), &rv.space(), opts.enumeration_cap)?
                }
            }
        };
        let cov = joint - &mu_q * &mu_x;
        let r_squared = &cov * &cov / (&var_q * &var_x);
        let r = to_f64(&r_squared).sqrt() * sign(&cov);
        let sigma_q = to_f64(&var_q).sqrt();
        let sigma_x = to_f64(&var_x).sqrt();
        let direction = if effect.v { 1.0 } else { -1.0 };
        let identity_exact = &effect.effect * &effect.effect * &var_x == &r_squared * &var_q;
        Ok(CorrelationResult {
            tuple: tau.clone(),
            polarity: effect.polarity,
            r,
            r_squared,
            cov,
            mu_q,
            mu_x,
            var_q,
            var_x,
            sigma_q,
            sigma_x,
            identity: direction * r * sigma_q / sigma_x,
            identity_exact,
            effect: effect.effect,
        })
    }
}

fn sign(r: &Rational) -> f64 {
    if r.is_negative() {
        -1.0
    } else {
        1.0
    }
}

/// The aggregate's variables are the tuples of the aggregated relation.
fn aggregate_variable<'a>(
    inst: &'a Instance,
    q: &'a AggregateQuery,
) -> Result<AggregateVariable<'a>> {
    let vars: Vec<Tuple> = inst.relation(&q.relation).cloned().collect();
    AggregateVariable::new(q, inst, vars)
}

pub fn causal_effect(
    inst: &Instance,
    q: &Query,
    tau: &Tuple,
    opts: &Options,
) -> Result<EffectResult> {
    Model::new(inst, q)?.effect(inst, tau, opts)
}

pub fn causal_effect_aggregate(
    inst: &Instance,
    q: &AggregateQuery,
    tau: &Tuple,
    opts: &Options,
) -> Result<EffectResult> {
    Model::Aggregate(aggregate_variable(inst, q)?).effect(inst, tau, opts)
}

fn by_effect<T>(items: &mut [(Rational, String, T)]) {
    items.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
}

/// Effects of every candidate tuple, highest first; ties by tuple text.
pub fn rank_by_effect(inst: &Instance, q: &Query, opts: &Options) -> Result<Vec<EffectResult>> {
    let model = Model::new(inst, q)?;
    let results = model
        .candidates(inst)
        .par_iter()
        .map(|t| model.effect(inst, t, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut keyed: Vec<_> = results
        .into_iter()
        .map(|e| (e.effect.clone(), e.tuple.to_string(), e))
        .collect();
    by_effect(&mut keyed);
    Ok(keyed.into_iter().map(|(_, _, e)| e).collect())
}

pub fn pearson(
    inst: &Instance,
    q: &Query,
    tau: &Tuple,
    opts: &Options,
) -> Result<CorrelationResult> {
    let model = Model::new(inst, q)?;
    if !model.contains(tau) {
        return Err(Error::NotInOutcomeSpace(tau.clone()));
    }
    model.correlation(inst, tau, opts)
}

/// Correlations of every candidate tuple, in effect order. Candidates
/// whose variable is absent from the outcome space get `r = 0`.
pub fn correlate_all(inst: &Instance, q: &Query, opts: &Options) -> Result<Vec<CorrelationResult>> {
    let model = Model::new(inst, q)?;
    let results = model
        .candidates(inst)
        .par_iter()
        .map(|t| model.correlation(inst, t, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut keyed: Vec<_> = results
        .into_iter()
        .map(|c| (c.effect.clone(), c.tuple.to_string(), c))
        .collect();
    by_effect(&mut keyed);
    Ok(keyed.into_iter().map(|(_, _, c)| c).collect())
}

fn require_monotone(q: &Query) -> Result<()> {
    if !q.is_boolean() {
        return Err(Error::WrongQueryKind {
            expected: "Boolean",
            found: q.kind_name(),
        });
    }
    if !q.is_monotone() {
        return Err(Error::NonMonotone);
    }
    Ok(())
}

pub fn is_counterfactual_cause(inst: &Instance, q: &Query, tau: &Tuple) -> Result<bool> {
    require_monotone(q)?;
    if inst.is_exogenous(tau) {
        return Err(Error::ExogenousTuple(tau.clone()));
    }
    Ok(inst.contains(tau)
        && evaluate_boolean(q, inst)?
        && !evaluate_boolean(q, &inst.without([tau]))?)
}

/// Brute-force smallest contingency sets for every endogenous tuple.
pub fn actual_causes(inst: &Instance, q: &Query, opts: &Options) -> Result<Vec<ContingencyResult>> {
    require_monotone(q)?;
    let n = inst.endogenous().len();
    if n > opts.contingency_cap {
        return Err(Error::CapExceeded {
            what: "endogenous tuples for contingency search",
            size: n,
            cap: opts.contingency_cap,
        });
    }
    if !evaluate_boolean(q, inst)? {
        return Err(Error::QueryFalse);
    }
    let endo: Vec<Tuple> = inst.endogenous().iter().cloned().collect();
    endo.par_iter()
        .map(|tau| {
            let others: Vec<&Tuple> = endo.iter().filter(|t| *t != tau).collect();
            let gamma = smallest_contingency(inst, q, tau, &others)?;
            Ok(match gamma {
                Some(g) => ContingencyResult {
                    tuple: tau.clone(),
                    is_actual_cause: true,
                    responsibility: Rational::one() / int(1 + g.len() as i64),
                    minimal_contingency: Some(g),
                },
                None => ContingencyResult {
                    tuple: tau.clone(),
                    is_actual_cause: false,
                    minimal_contingency: None,
                    responsibility: Rational::zero(),
                },
            })
        })
        .collect()
}

fn smallest_contingency(
    inst: &Instance,
    q: &Query,
    tau: &Tuple,
    others: &[&Tuple],
) -> Result<Option<Vec<Tuple>>> {
    for k in 0..=others.len() {
        let mut chosen = Vec::with_capacity(k);
        if let Some(g) = search_size(inst, q, tau, others, k, 0, &mut chosen)? {
            return Ok(Some(g));
        }
    }
    Ok(None)
}

/// Tries every `k`-subset of `others[start..]` extending `chosen`, in
/// lexicographic order.
fn search_size(
    inst: &Instance,
    q: &Query,
    tau: &Tuple,
    others: &[&Tuple],
    k: usize,
    start: usize,
    chosen: &mut Vec<usize>,
) -> Result<Option<Vec<Tuple>>> {
    if chosen.len() == k {
        let gamma: Vec<&Tuple> = chosen.iter().map(|&i| others[i]).collect();
        let rest = inst.without(gamma.iter().copied());
        if evaluate_boolean(q, &rest)? && !evaluate_boolean(q, &rest.without([tau]))? {
            return Ok(Some(gamma.into_iter().cloned().collect()));
        }
        return Ok(None);
    }
    for i in start..others.len() {
        if others.len() - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        let found = search_size(inst, q, tau, others, k, i + 1, chosen)?;
        chosen.pop();
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}
