//! Exact posterior computation by variable elimination, plus the
//! joint-enumeration oracle that every bounding property is tested
//! against. Both paths report zero-probability evidence as a first-class
//! outcome rather than a crash, since abstraction can shift mass and
//! callers must tell "impossible evidence" apart from bugs.

use crate::dominance::{cdf_from_pmf, Cdf, Pmf};
use crate::error::{Error, Result};
use crate::network::{BayesianNetwork, Evidence, VarId};
use crate::BRUTE_FORCE_CAP;

/// A nonnegative table over an ordered variable scope; the workhorse of
/// variable elimination. Values are stored row-major with the last scope
/// variable varying fastest.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn constant(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    fn from_cpt(net: &BayesianNetwork, child: VarId) -> Self {
        let cpt = net.cpt(child);
        let mut scope: Vec<VarId> = cpt.parents().to_vec();
        scope.push(child);
        let cards: Vec<usize> = scope.iter().map(|&v| net.state_count(v)).collect();
        let mut values = Vec::with_capacity(cpt.row_count() * cpt.child_card());
        for row in cpt.rows() {
            values.extend_from_slice(row);
        }
        Factor {
            scope,
            cards,
            values,
        }
    }

    fn index_of(&self, assignment: &[usize]) -> usize {
        let mut idx = 0;
        for (s, &card) in assignment.iter().zip(&self.cards) {
            idx = idx * card + s;
        }
        idx
    }

    /// Fixes every scope variable assigned in `e`, dropping it from the
    /// scope.
    fn reduce(&self, e: &Evidence) -> Factor {
        let keep: Vec<usize> = (0..self.scope.len())
            .filter(|&i| !e.contains(self.scope[i]))
            .collect();
        if keep.len() == self.scope.len() {
            return self.clone();
        }
        let new_scope: Vec<VarId> = keep.iter().map(|&i| self.scope[i]).collect();
        let new_cards: Vec<usize> = keep.iter().map(|&i| self.cards[i]).collect();
        let size: usize = new_cards.iter().product::<usize>().max(1);
        let mut values = vec![0.0; size];
        let mut assignment = vec![0usize; self.scope.len()];
        for (i, &v) in self.scope.iter().enumerate() {
            if let Some(s) = e.get(v) {
                assignment[i] = s;
            }
        }
        for (new_idx, slot) in values.iter_mut().enumerate() {
            let mut rest = new_idx;
            for pos in (0..keep.len()).rev() {
                assignment[keep[pos]] = rest % new_cards[pos];
                rest /= new_cards[pos];
            }
            *slot = self.values[self.index_of(&assignment)];
        }
        Factor {
            scope: new_scope,
            cards: new_cards,
            values,
        }
    }

    fn multiply(&self, other: &Factor) -> Factor {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (i, &v) in other.scope.iter().enumerate() {
            if !scope.contains(&v) {
                scope.push(v);
                cards.push(other.cards[i]);
            }
        }
        let size: usize = cards.iter().product::<usize>().max(1);
        let self_pos: Vec<usize> = self
            .scope
            .iter()
            .map(|v| scope.iter().position(|s| s == v).unwrap())
            .collect();
        let other_pos: Vec<usize> = other
            .scope
            .iter()
            .map(|v| scope.iter().position(|s| s == v).unwrap())
            .collect();
        let mut values = Vec::with_capacity(size);
        let mut assignment = vec![0usize; scope.len()];
        for idx in 0..size {
            let mut rest = idx;
            for pos in (0..scope.len()).rev() {
                assignment[pos] = rest % cards[pos];
                rest /= cards[pos];
            }
            let a: Vec<usize> = self_pos.iter().map(|&p| assignment[p]).collect();
            let b: Vec<usize> = other_pos.iter().map(|&p| assignment[p]).collect();
            values.push(self.values[self.index_of(&a)] * other.values[other.index_of(&b)]);
        }
        Factor {
            scope,
            cards,
            values,
        }
    }

    fn sum_out(&self, var: VarId) -> Factor {
        let pos = match self.scope.iter().position(|&v| v == var) {
            Some(p) => p,
            None => return self.clone(),
        };
        let keep: Vec<usize> = (0..self.scope.len()).filter(|&i| i != pos).collect();
        let new_scope: Vec<VarId> = keep.iter().map(|&i| self.scope[i]).collect();
        let new_cards: Vec<usize> = keep.iter().map(|&i| self.cards[i]).collect();
        let size: usize = new_cards.iter().product::<usize>().max(1);
        let mut values = vec![0.0; size];
        let mut assignment = vec![0usize; self.scope.len()];
        for (new_idx, slot) in values.iter_mut().enumerate() {
            let mut rest = new_idx;
            for p in (0..keep.len()).rev() {
                assignment[keep[p]] = rest % new_cards[p];
                rest /= new_cards[p];
            }
            let mut acc = 0.0;
            for s in 0..self.cards[pos] {
                assignment[pos] = s;
                acc += self.values[self.index_of(&assignment)];
            }
            *slot = acc;
        }
        Factor {
            scope: new_scope,
            cards: new_cards,
            values,
        }
    }

    fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Scales values to sum to 1, returning the previous total. Keeps
    /// long chains of small probabilities away from underflow; callers
    /// only ever need the normalized posterior, so the constant itself
    /// is discarded.
    fn normalize(&mut self) -> f64 {
        let t = self.total();
        if t > 0.0 {
            for v in &mut self.values {
                *v /= t;
            }
        }
        t
    }
}

/// Exact conditional PMF of `z` given `e`, by variable elimination with a
/// min-degree elimination order. The order never affects the result
/// beyond floating-point noise.
pub fn posterior(net: &BayesianNetwork, z: VarId, e: &Evidence) -> Result<Pmf> {
    let order = min_degree_order(net, z, e);
    posterior_with_order(net, z, e, &order)
}

/// Variable elimination with an explicit elimination order over the
/// non-query, non-evidence variables. Exposed for order-independence
/// tests.
pub fn posterior_with_order(
    net: &BayesianNetwork,
    z: VarId,
    e: &Evidence,
    order: &[VarId],
) -> Result<Pmf> {
    if e.contains(z) {
        return Err(Error::QueryAssigned(net.var(z).name.clone()));
    }
    for (v, s) in e.iter() {
        if s >= net.state_count(v) {
            return Err(Error::UnknownState {
                variable: net.var(v).name.clone(),
                state: format!("index {s}"),
            });
        }
    }

    let mut factors: Vec<Factor> = net
        .var_ids()
        .map(|v| Factor::from_cpt(net, v).reduce(e))
        .collect();

    for &var in order {
        debug_assert!(var != z && !e.contains(var));
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.scope.contains(&var));
        factors = rest;
        if touching.is_empty() {
            continue;
        }
        let mut product = Factor::constant(1.0);
        for f in &touching {
            product = product.multiply(f);
        }
        let mut summed = product.sum_out(var);
        if summed.normalize() == 0.0 {
            return Err(Error::ZeroProbabilityEvidence);
        }
        factors.push(summed);
    }

    let mut result = Factor::constant(1.0);
    for f in &factors {
        result = result.multiply(f);
    }
    for &v in result.scope.clone().iter() {
        if v != z {
            result = result.sum_out(v);
        }
    }
    if result.scope.is_empty() {
        // Every factor mentioning z was a constant, which cannot happen for
        // a valid network; defensive fallback to the reduced CPT of z.
        result = Factor::from_cpt(net, z).reduce(e);
        for &v in result.scope.clone().iter() {
            if v != z {
                result = result.sum_out(v);
            }
        }
    }
    if result.normalize() == 0.0 {
        return Err(Error::ZeroProbabilityEvidence);
    }
    Pmf::new(result.values)
}

/// Min-degree greedy elimination order over hidden variables: repeatedly
/// pick the variable with the fewest distinct neighbors in the current
/// factor graph, ties to the smallest id.
fn min_degree_order(net: &BayesianNetwork, z: VarId, e: &Evidence) -> Vec<VarId> {
    let mut scopes: Vec<Vec<VarId>> = net
        .var_ids()
        .map(|v| {
            let mut scope: Vec<VarId> = net
                .cpt(v)
                .parents()
                .iter()
                .copied()
                .chain(std::iter::once(v))
                .filter(|u| !e.contains(*u))
                .collect();
            scope.sort();
            scope
        })
        .collect();
    let mut hidden: Vec<VarId> = net
        .var_ids()
        .filter(|&v| v != z && !e.contains(v))
        .collect();
    let mut order = Vec::with_capacity(hidden.len());

    while !hidden.is_empty() {
        let degree = |v: VarId| {
            let mut neighbors = std::collections::BTreeSet::new();
            for scope in scopes.iter().filter(|s| s.contains(&v)) {
                neighbors.extend(scope.iter().copied());
            }
            neighbors.remove(&v);
            neighbors.len()
        };
        let (pos, &best) = hidden
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| (degree(v), v))
            .expect("hidden is nonempty");
        hidden.remove(pos);
        order.push(best);

        // Replace the scopes touching `best` with their merged scope.
        let mut merged: Vec<VarId> = Vec::new();
        scopes.retain(|scope| {
            if scope.contains(&best) {
                merged.extend(scope.iter().copied());
                false
            } else {
                true
            }
        });
        merged.sort();
        merged.dedup();
        merged.retain(|&u| u != best);
        scopes.push(merged);
    }
    order
}

/// Exact conditional PMF by enumerating every joint instantiation
/// consistent with the evidence. The independent oracle for all tests;
/// refuses joint spaces larger than `cap`.
pub fn brute_force_posterior_with_cap(
    net: &BayesianNetwork,
    z: VarId,
    e: &Evidence,
    cap: usize,
) -> Result<Pmf> {
    if e.contains(z) {
        return Err(Error::QueryAssigned(net.var(z).name.clone()));
    }
    let size = net.joint_size();
    if size > cap {
        return Err(Error::JointTooLarge { size, cap });
    }
    let n = net.var_count();
    let cards: Vec<usize> = net.var_ids().map(|v| net.state_count(v)).collect();
    let mut weights = vec![0.0; net.state_count(z)];
    let mut assignment = vec![0usize; n];
    loop {
        let consistent = e.iter().all(|(v, s)| assignment[v.0] == s);
        if consistent {
            let mut p = 1.0;
            for v in net.var_ids() {
                let cpt = net.cpt(v);
                let parent_states: Vec<usize> =
                    cpt.parents().iter().map(|&u| assignment[u.0]).collect();
                p *= cpt.row(&parent_states)[assignment[v.0]];
                if p == 0.0 {
                    break;
                }
            }
            weights[assignment[z.0]] += p;
        }
        // Mixed-radix increment; done when it wraps.
        let mut pos = n;
        loop {
            if pos == 0 {
                return finish_brute_force(weights);
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < cards[pos] {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

fn finish_brute_force(mut weights: Vec<f64>) -> Result<Pmf> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroProbabilityEvidence);
    }
    for w in &mut weights {
        *w /= total;
    }
    Pmf::new(weights)
}

/// [`brute_force_posterior_with_cap`] at the default cap.
pub fn brute_force_posterior(net: &BayesianNetwork, z: VarId, e: &Evidence) -> Result<Pmf> {
    brute_force_posterior_with_cap(net, z, e, BRUTE_FORCE_CAP)
}

/// Conditional CDF of `z` given an arbitrary (consistent) conditioning
/// assignment, which may include non-parents.
pub fn conditional_cdf_given(net: &BayesianNetwork, z: VarId, cond: &Evidence) -> Result<Cdf> {
    Ok(cdf_from_pmf(&posterior(net, z, cond)?))
}

/// True iff the evidence has positive probability in the network.
pub fn evidence_possible(net: &BayesianNetwork, e: &Evidence) -> Result<bool> {
    if e.is_empty() {
        return Ok(true);
    }
    match net.var_ids().find(|v| !e.contains(*v)) {
        Some(free) => match posterior(net, free, e) {
            Ok(_) => Ok(true),
            Err(Error::ZeroProbabilityEvidence) => Ok(false),
            Err(err) => Err(err),
        },
        None => {
            // Fully assigned: evaluate the joint product directly.
            let mut p = 1.0;
            for v in net.var_ids() {
                let cpt = net.cpt(v);
                let parent_states: Vec<usize> =
                    cpt.parents().iter().map(|&u| e.get(u).unwrap()).collect();
                p *= cpt.row(&parent_states)[e.get(v).unwrap()];
            }
            Ok(p > 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;

    fn approx_eq(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn prior_net() -> BayesianNetwork {
        parse_network(
            r#"{
              "variables": [{"name": "Z", "states": ["a", "b"]}],
              "arcs": [],
              "cpts": [{"child": "Z", "parents": [], "rows": [{"given": [], "p": [0.3, 0.7]}]}]
            }"#,
        )
        .unwrap()
    }

    fn copy_chain() -> BayesianNetwork {
        parse_network(
            r#"{
              "variables": [
                {"name": "X", "states": ["x0", "x1", "x2"]},
                {"name": "Z", "states": ["z0", "z1", "z2"]}
              ],
              "arcs": [{"from": "X", "to": "Z"}],
              "cpts": [
                {"child": "X", "parents": [], "rows": [{"given": [], "p": [0.2, 0.5, 0.3]}]},
                {"child": "Z", "parents": ["X"], "rows": [
                  {"given": [0], "p": [1.0, 0.0, 0.0]},
                  {"given": [1], "p": [0.0, 1.0, 0.0]},
                  {"given": [2], "p": [0.0, 0.0, 1.0]}
                ]}
              ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn posterior_of_parentless_variable_is_its_prior() {
        let net = prior_net();
        let z = net.var_id("Z").unwrap();
        let p = posterior(&net, z, &Evidence::new()).unwrap();
        assert_eq!(p.values(), &[0.3, 0.7]);
    }

    #[test]
    fn posterior_propagates_deterministic_copy() {
        let net = copy_chain();
        let (x, z) = (net.var_id("X").unwrap(), net.var_id("Z").unwrap());
        let e = Evidence::from_pairs([(x, 2)]);
        let p = posterior(&net, z, &e).unwrap();
        assert!(approx_eq(p.values(), &[0.0, 0.0, 1.0], 1e-12));
    }

    #[test]
    fn posterior_matches_brute_force_on_fan() {
        let net = parse_network(&crate::network::tests::fan_doc()).unwrap();
        let z = net.var_id("Z").unwrap();
        let e_var = net.var_id("E").unwrap();
        for state in 0..2 {
            let e = Evidence::from_pairs([(e_var, state)]);
            let ve = posterior(&net, z, &e).unwrap();
            let bf = brute_force_posterior(&net, z, &e).unwrap();
            assert!(
                approx_eq(ve.values(), bf.values(), 1e-9),
                "{ve:?} vs {bf:?}"
            );
        }
    }

    #[test]
    fn oracle_self_agreement_on_two_node_net() {
        let net = copy_chain();
        let (x, z) = (net.var_id("X").unwrap(), net.var_id("Z").unwrap());
        for s in 0..3 {
            let e = Evidence::from_pairs([(x, s)]);
            let a = posterior(&net, z, &e).unwrap();
            let b = brute_force_posterior(&net, z, &e).unwrap();
            assert!(approx_eq(a.values(), b.values(), 1e-12));
        }
    }

    #[test]
    fn query_assigned_in_evidence_is_an_error() {
        let net = copy_chain();
        let (x, z) = (net.var_id("X").unwrap(), net.var_id("Z").unwrap());
        let e = Evidence::from_pairs([(z, 0), (x, 1)]);
        assert!(matches!(
            posterior(&net, z, &e),
            Err(Error::QueryAssigned(_))
        ));
        assert!(matches!(
            brute_force_posterior(&net, z, &e),
            Err(Error::QueryAssigned(_))
        ));
    }

    #[test]
    fn impossible_evidence_errors_in_both_paths() {
        // X is pinned to x0 and Z copies X, so Z=z1 is impossible.
        let net = parse_network(
            r#"{
              "variables": [
                {"name": "X", "states": ["x0", "x1"]},
                {"name": "Y", "states": ["y0", "y1"]},
                {"name": "Z", "states": ["z0", "z1"]}
              ],
              "arcs": [{"from": "X", "to": "Z"}],
              "cpts": [
                {"child": "X", "parents": [], "rows": [{"given": [], "p": [1.0, 0.0]}]},
                {"child": "Y", "parents": [], "rows": [{"given": [], "p": [0.5, 0.5]}]},
                {"child": "Z", "parents": ["X"], "rows": [
                  {"given": [0], "p": [1.0, 0.0]},
                  {"given": [1], "p": [0.0, 1.0]}
                ]}
              ]
            }"#,
        )
        .unwrap();
        let (y, z) = (net.var_id("Y").unwrap(), net.var_id("Z").unwrap());
        let e = Evidence::from_pairs([(z, 1)]);
        assert!(matches!(
            posterior(&net, y, &e),
            Err(Error::ZeroProbabilityEvidence)
        ));
        assert!(matches!(
            brute_force_posterior(&net, y, &e),
            Err(Error::ZeroProbabilityEvidence)
        ));
        assert!(!evidence_possible(&net, &e).unwrap());
    }

    #[test]
    fn conditional_cdf_recovers_cpt_row() {
        let net = parse_network(&crate::network::tests::fan_doc()).unwrap();
        let (a, y1) = (net.var_id("A").unwrap(), net.var_id("Y1").unwrap());
        let cond = Evidence::from_pairs([(a, 1)]);
        let cdf = conditional_cdf_given(&net, y1, &cond).unwrap();
        assert!(approx_eq(cdf.values(), &[0.5, 1.0], 1e-12));
    }

    #[test]
    fn conditional_cdf_on_chain_reads_z_table() {
        let net = parse_network(crate::network::tests::chain_doc()).unwrap();
        let (y, z) = (net.var_id("Y").unwrap(), net.var_id("Z").unwrap());
        let cdf = conditional_cdf_given(&net, z, &Evidence::from_pairs([(y, 1)])).unwrap();
        assert!(approx_eq(cdf.values(), &[0.3, 1.0], 1e-12));
    }

    #[test]
    fn conditional_cdf_matches_oracle_with_mixed_conditioning() {
        let net = parse_network(&crate::network::tests::fan_doc()).unwrap();
        let ids = |n: &str| net.var_id(n).unwrap();
        let cond = Evidence::from_pairs([(ids("Y1"), 1), (ids("E"), 0)]);
        let cdf = conditional_cdf_given(&net, ids("Z"), &cond).unwrap();
        let oracle = cdf_from_pmf(&brute_force_posterior(&net, ids("Z"), &cond).unwrap());
        assert!(approx_eq(cdf.values(), oracle.values(), 1e-9));
    }
}
