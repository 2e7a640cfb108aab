//! Decides whether abstracting a candidate node is licensed for a given
//! query, and with which per-child signs.
//!
//! Two applicability routes exist. The general route requires every child
//! of the candidate to carry a decisive derived sign toward the query,
//! the query to be graphically independent of the candidate given the
//! evidence and children, an ancestral ordering placing evidence before
//! the candidate before its children, and no child descending from a
//! sibling. The parent route applies when the query itself is a child of
//! the candidate and needs only the ordering and sibling conditions.
//!
//! Derived signs between non-adjacent nodes use directed-path sign
//! algebra where that is provably safe and fall back to exhaustive
//! numeric FSD verification otherwise, so a decisive answer is always
//! sound.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dominance::{
    detect_generalized_sign, detect_sign, GeneralizedSign, GeneralizedSignResult, Sign,
};
use crate::error::{Error, Result};
use crate::inference::conditional_cdf_given;
use crate::network::{BayesianNetwork, Evidence, VarId};
use crate::{dominance, BRUTE_FORCE_CAP};

/// Which route licensed the abstraction: the general route for
/// non-parent candidates or the parent route when the query is a child
/// of the candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    T1,
    T2,
}

/// How a child's sign toward the query was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMethod {
    /// The child is adjacent to the query and the direct arc is the only
    /// active connection.
    DirectCpt,
    /// Sign algebra over directed paths.
    PathPropagation,
    /// Exhaustive FSD comparison of conditional CDFs.
    NumericVerification,
}

/// Sign of one child of the abstraction candidate toward the query,
/// conditioned on the evidence and all sibling instantiations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildSignReport {
    pub child: VarId,
    pub sign: Sign,
    pub method: SignMethod,
    /// Gap-n sign of the candidate-to-child arc, when decisive; enables
    /// the windowed envelope optimization.
    pub generalized: Option<GeneralizedSign>,
}

/// A candidate node cleared for abstraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eligibility {
    pub node: VarId,
    pub theorem: Theorem,
    /// Reports for children other than the query variable. Ambiguous
    /// signs never appear here; they disqualify the candidate instead.
    pub children: Vec<ChildSignReport>,
    pub z_in_children: bool,
}

impl Eligibility {
    /// True when every child sign was established structurally (direct
    /// CPT or path propagation). Structural signs are per-context facts
    /// that dominance envelopes preserve, so they keep holding while
    /// other, child-disjoint nodes are abstracted and refined.
    /// Numerically verified signs are marginal facts of the exact
    /// network and carry no such guarantee, which restricts how they
    /// may be combined (see node selection).
    pub fn signs_are_structural(&self) -> bool {
        self.children
            .iter()
            .all(|r| r.method != SignMethod::NumericVerification)
    }
}

/// Why a candidate was rejected. `condition` names the first failed
/// condition in the order they are stated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub node: String,
    pub condition: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EligibilityOutcome {
    Eligible(Eligibility),
    Rejected(Rejection),
}

impl EligibilityOutcome {
    pub fn is_eligible(&self) -> bool {
        matches!(self, EligibilityOutcome::Eligible(_))
    }

    pub fn eligibility(&self) -> Option<&Eligibility> {
        match self {
            EligibilityOutcome::Eligible(e) => Some(e),
            EligibilityOutcome::Rejected(_) => None,
        }
    }

    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            EligibilityOutcome::Eligible(_) => None,
            EligibilityOutcome::Rejected(r) => Some(r),
        }
    }
}

fn reject(
    net: &BayesianNetwork,
    node: VarId,
    condition: &str,
    detail: String,
) -> EligibilityOutcome {
    EligibilityOutcome::Rejected(Rejection {
        node: net.var(node).name.clone(),
        condition: condition.to_string(),
        detail,
    })
}

/// Finding of [`derived_sign`]: the sign plus how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignFinding {
    pub sign: Sign,
    pub method: SignMethod,
}

/// A sound qualitative sign for the influence of `y_i` on `z` given the
/// evidence and all instantiations of `siblings`.
///
/// Fast path: if `z` is d-separated from `y_i` the sign is `0`; otherwise
/// directed-path sign algebra applies when every active trail between the
/// two is a directed path and no conditioned variable descends from
/// `y_i` (both checked graphically). When the fast path is inconclusive
/// and the network is small enough, conditional CDFs are compared
/// exhaustively; zero-probability conditioning combinations are skipped
/// as vacuous. Returns `?` only when verification fails or is infeasible.
pub fn derived_sign(
    net: &BayesianNetwork,
    y_i: VarId,
    z: VarId,
    e: &Evidence,
    siblings: &BTreeSet<VarId>,
) -> Result<SignFinding> {
    if y_i == z {
        return Err(Error::InvalidArgument(
            "derived sign between a node and itself".into(),
        ));
    }
    let mut conditioning: BTreeSet<VarId> = e.variables().collect();
    conditioning.extend(siblings.iter().copied());
    conditioning.remove(&y_i);
    conditioning.remove(&z);

    if net.d_separated(y_i, z, &conditioning)? {
        return Ok(SignFinding {
            sign: Sign::Zero,
            method: SignMethod::PathPropagation,
        });
    }

    if path_algebra_is_safe(net, y_i, z, &conditioning) {
        let (sign, multi_arc) = directed_path_sign(net, y_i, z, &conditioning);
        if sign != Sign::Ambiguous {
            let direct_only = !multi_arc && net.children(y_i).contains(&z);
            let method = if direct_only {
                SignMethod::DirectCpt
            } else {
                SignMethod::PathPropagation
            };
            return Ok(SignFinding { sign, method });
        }
    }

    if net.joint_size() > BRUTE_FORCE_CAP {
        return Ok(SignFinding {
            sign: Sign::Ambiguous,
            method: SignMethod::NumericVerification,
        });
    }
    let sign = numeric_sign(net, y_i, z, e, siblings)?;
    Ok(SignFinding {
        sign,
        method: SignMethod::NumericVerification,
    })
}

/// Directed-path sign algebra is sound only when (a) every active trail
/// from `y_i` to `z` given the conditioning set is a directed path and
/// (b) no conditioned variable is a descendant of `y_i`. Together these
/// rule out back-door mixing and evidence-induced reweighting of the
/// causal pathway.
fn path_algebra_is_safe(
    net: &BayesianNetwork,
    y_i: VarId,
    z: VarId,
    conditioning: &BTreeSet<VarId>,
) -> bool {
    let desc = net.descendants(y_i);
    if conditioning.iter().any(|v| desc.contains(v)) {
        return false;
    }
    !nondirected_active_trail_exists(net, y_i, z, conditioning)
}

/// True iff some simple active trail from `from` to `to` given `s` takes
/// at least one step against the arc direction. Trails are simple
/// (no repeated nodes), matching the d-separation notion of a path, so a
/// plain directed connection never counts as deviated merely because a
/// walk could detour through it. Exhaustive path enumeration; fine at
/// the network sizes this library targets.
fn nondirected_active_trail_exists(
    net: &BayesianNetwork,
    from: VarId,
    to: VarId,
    s: &BTreeSet<VarId>,
) -> bool {
    let mut opens_collider = s.clone();
    for &v in s {
        for id in net.var_ids() {
            if !opens_collider.contains(&id) && net.descendants(id).contains(&v) {
                opens_collider.insert(id);
            }
        }
    }

    struct TrailSearch<'a> {
        net: &'a BayesianNetwork,
        to: VarId,
        s: &'a BTreeSet<VarId>,
        opens_collider: BTreeSet<VarId>,
        on_path: Vec<bool>,
    }

    impl TrailSearch<'_> {
        fn dfs(&mut self, node: VarId, arrived_from_parent: bool, deviated: bool) -> bool {
            if node == self.to {
                return deviated;
            }
            self.on_path[node.0] = true;
            let observed = self.s.contains(&node);
            let mut found = false;
            // Continue downward: needs this node open as a chain or fork.
            if !observed {
                for &c in self.net.children(node) {
                    if !self.on_path[c.0] && self.dfs(c, true, deviated) {
                        found = true;
                        break;
                    }
                }
            }
            // Continue upward: a collider turn needs an observed
            // descendant, an upward chain needs this node unobserved.
            // Either way the trail stops being a directed path.
            if !found {
                let open_upward = if arrived_from_parent {
                    self.opens_collider.contains(&node)
                } else {
                    !observed
                };
                if open_upward {
                    for &p in self.net.parents(node) {
                        if !self.on_path[p.0] && self.dfs(p, false, true) {
                            found = true;
                            break;
                        }
                    }
                }
            }
            self.on_path[node.0] = false;
            found
        }
    }

    let mut on_path = vec![false; net.var_count()];
    on_path[from.0] = true;
    let mut search = TrailSearch {
        net,
        to,
        s,
        opens_collider,
        on_path,
    };
    for &c in net.children(from) {
        if !search.on_path[c.0] && search.dfs(c, true, false) {
            return true;
        }
    }
    for &p in net.parents(from) {
        if !search.on_path[p.0] && search.dfs(p, false, true) {
            return true;
        }
    }
    false
}

/// Sign of the combined influence along all directed paths from `y_i` to
/// `z` that avoid conditioned intermediate nodes. Arc signs come from the
/// child CPTs. Also reports whether any influence flows through an
/// intermediate node.
fn directed_path_sign(
    net: &BayesianNetwork,
    y_i: VarId,
    z: VarId,
    conditioning: &BTreeSet<VarId>,
) -> (Sign, bool) {
    fn visit(
        net: &BayesianNetwork,
        v: VarId,
        z: VarId,
        conditioning: &BTreeSet<VarId>,
        memo: &mut Vec<Option<Sign>>,
        multi: &mut bool,
    ) -> Sign {
        if let Some(hit) = memo[v.0] {
            return hit;
        }
        // Zero is the additive identity: no path, no influence.
        let mut combined = Sign::Zero;
        for &c in net.children(v) {
            let arc_sign = detect_sign(net.cpt(c), v).unwrap_or(Sign::Ambiguous);
            if c == z {
                combined = combined.combine(arc_sign);
                continue;
            }
            if conditioning.contains(&c) {
                continue; // observed intermediate node blocks the chain
            }
            let tail = visit(net, c, z, conditioning, memo, multi);
            if tail != Sign::Zero {
                *multi = true;
            }
            combined = combined.combine(arc_sign.product(tail));
        }
        memo[v.0] = Some(combined);
        combined
    }

    let mut memo: Vec<Option<Sign>> = vec![None; net.var_count()];
    let mut multi = false;
    let sign = visit(net, y_i, z, conditioning, &mut memo, &mut multi);
    (sign, multi)
}

/// Exhaustive FSD verification of the sign, comparing conditional CDFs of
/// `z` across every pair of `y_i` states under every sibling
/// instantiation joined with the evidence.
fn numeric_sign(
    net: &BayesianNetwork,
    y_i: VarId,
    z: VarId,
    e: &Evidence,
    siblings: &BTreeSet<VarId>,
) -> Result<Sign> {
    let m = net.state_count(y_i);
    let sibling_list: Vec<VarId> = siblings
        .iter()
        .copied()
        .filter(|&v| v != y_i && v != z && !e.contains(v))
        .collect();

    let mut plus_all = true;
    let mut minus_all = true;
    let mut any_compared = false;

    let mut sib_states = vec![0usize; sibling_list.len()];
    loop {
        let cond_base = e.extended(sibling_list.iter().copied().zip(sib_states.iter().copied()));
        // Conditional CDFs of z per y_i state; None marks a
        // zero-probability context, which constrains nothing.
        let mut cdfs = Vec::with_capacity(m);
        for y_state in 0..m {
            let cond = cond_base.extended([(y_i, y_state)]);
            match conditional_cdf_given(net, z, &cond) {
                Ok(cdf) => cdfs.push(Some(cdf)),
                Err(Error::ZeroProbabilityEvidence) => cdfs.push(None),
                Err(err) => return Err(err),
            }
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let (Some(fi), Some(fj)) = (&cdfs[i], &cdfs[j]) else {
                    continue;
                };
                any_compared = true;
                if !dominance::fsd(fj, fi)? {
                    plus_all = false;
                }
                if !dominance::fsd(fi, fj)? {
                    minus_all = false;
                }
            }
        }
        if !plus_all && !minus_all {
            return Ok(Sign::Ambiguous);
        }
        // Advance the sibling instantiation counter.
        let mut pos = sibling_list.len();
        loop {
            if pos == 0 {
                if !any_compared {
                    // Every combination had zero probability: nothing to
                    // verify, nothing to license.
                    return Ok(Sign::Ambiguous);
                }
                return Ok(match (plus_all, minus_all) {
                    (true, true) => Sign::Zero,
                    (true, false) => Sign::Positive,
                    (false, true) => Sign::Negative,
                    (false, false) => unreachable!(),
                });
            }
            pos -= 1;
            sib_states[pos] += 1;
            if sib_states[pos] < net.state_count(sibling_list[pos]) {
                break;
            }
            sib_states[pos] = 0;
        }
    }
}

fn generalized_toward(net: &BayesianNetwork, a: VarId, child: VarId) -> Option<GeneralizedSign> {
    match detect_generalized_sign(net.cpt(child), a) {
        Ok(GeneralizedSignResult::Decisive(g)) => Some(g),
        _ => None,
    }
}

/// Applicability of the general (non-parent) route for abstracting `a`
/// when querying `z` under evidence `e`. The four conditions, in the
/// order rejections name them:
///
/// 1. every child of `a` has a decisive derived sign toward `z` given the
///    evidence and its siblings;
/// 2. `z` is d-separated from `a` by the evidence plus `a`'s children;
/// 3. an ancestral ordering places evidence, then `a`, then the children;
/// 4. no child of `a` descends from another child of `a`.
pub fn check_theorem1(
    net: &BayesianNetwork,
    a: VarId,
    z: VarId,
    e: &Evidence,
) -> Result<EligibilityOutcome> {
    if a == z {
        return Ok(reject(
            net,
            a,
            "precondition",
            "candidate equals the query".into(),
        ));
    }
    if e.contains(a) {
        return Ok(reject(
            net,
            a,
            "precondition",
            "candidate is an evidence node".into(),
        ));
    }
    if net.children(a).contains(&z) {
        return Ok(reject(
            net,
            a,
            "precondition",
            format!(
                "`{}` is a child of the candidate; use the parent route",
                net.var(z).name
            ),
        ));
    }

    let children: Vec<VarId> = net.children(a).to_vec();

    // Condition 1: decisive signs for every child.
    let mut reports = Vec::with_capacity(children.len());
    for &y in &children {
        let siblings: BTreeSet<VarId> = children.iter().copied().filter(|&s| s != y).collect();
        let finding = derived_sign(net, y, z, e, &siblings)?;
        if finding.sign == Sign::Ambiguous {
            return Ok(reject(
                net,
                a,
                "condition 1",
                format!(
                    "child `{}` has ambiguous sign toward `{}`",
                    net.var(y).name,
                    net.var(z).name
                ),
            ));
        }
        reports.push(ChildSignReport {
            child: y,
            sign: finding.sign,
            method: finding.method,
            generalized: generalized_toward(net, a, y),
        });
    }

    // Condition 2: query independent of the candidate given evidence and
    // children.
    let mut sep: BTreeSet<VarId> = e.variables().collect();
    sep.extend(children.iter().copied());
    if !net.d_separated(z, a, &sep)? {
        return Ok(reject(
            net,
            a,
            "condition 2",
            format!(
                "`{}` is not d-separated from `{}` by the evidence and children",
                net.var(z).name,
                net.var(a).name
            ),
        ));
    }

    // Condition 3: ancestral ordering evidence -> candidate -> children.
    let e_set: BTreeSet<VarId> = e.variables().collect();
    let y_set: BTreeSet<VarId> = children.iter().copied().collect();
    if !net.ancestral_order_exists(&e_set, a, &y_set)? {
        return Ok(reject(
            net,
            a,
            "condition 3",
            "no ancestral ordering places evidence before the candidate before its children".into(),
        ));
    }

    // Condition 4: children are pairwise non-descendant.
    if let Some(rejection) = sibling_descent(net, a, &children)? {
        return Ok(rejection);
    }

    Ok(EligibilityOutcome::Eligible(Eligibility {
        node: a,
        theorem: Theorem::T1,
        children: reports,
        z_in_children: false,
    }))
}

fn sibling_descent(
    net: &BayesianNetwork,
    a: VarId,
    children: &[VarId],
) -> Result<Option<EligibilityOutcome>> {
    for &y in children {
        for &sib in children {
            if y != sib && net.is_descendant(y, sib)? {
                return Ok(Some(reject(
                    net,
                    a,
                    "condition 4",
                    format!(
                        "child `{}` is a descendant of sibling `{}`",
                        net.var(y).name,
                        net.var(sib).name
                    ),
                )));
            }
        }
    }
    Ok(None)
}

/// Applicability of the parent route: the query is a child of the
/// candidate. Requires conditions 3 and 4 of the general route; when the
/// candidate has further children those need decisive signs so their
/// envelope directions can be coordinated with the query's. With
/// `strict`, additionally requires the query to be the candidate's only
/// descendant.
pub fn check_theorem2(
    net: &BayesianNetwork,
    a: VarId,
    z: VarId,
    e: &Evidence,
    strict: bool,
) -> Result<EligibilityOutcome> {
    if e.contains(a) {
        return Ok(reject(
            net,
            a,
            "precondition",
            "candidate is an evidence node".into(),
        ));
    }
    if !net.children(a).contains(&z) {
        return Ok(reject(
            net,
            a,
            "precondition",
            format!("`{}` is not a child of the candidate", net.var(z).name),
        ));
    }

    let children: Vec<VarId> = net.children(a).to_vec();

    // Condition 3: ancestral ordering evidence -> candidate -> children.
    let e_set: BTreeSet<VarId> = e.variables().collect();
    let y_set: BTreeSet<VarId> = children.iter().copied().collect();
    if !net.ancestral_order_exists(&e_set, a, &y_set)? {
        return Ok(reject(
            net,
            a,
            "condition 3",
            "no ancestral ordering places evidence before the candidate before its children".into(),
        ));
    }

    // Condition 4.
    if let Some(rejection) = sibling_descent(net, a, &children)? {
        return Ok(rejection);
    }

    // Coordinated directions for the other children need decisive signs.
    // The query is excluded from their sibling conditioning sets: its
    // value is what the signs are about.
    let mut reports = Vec::new();
    for &y in &children {
        if y == z {
            continue;
        }
        let siblings: BTreeSet<VarId> = children
            .iter()
            .copied()
            .filter(|&s| s != y && s != z)
            .collect();
        let finding = derived_sign(net, y, z, e, &siblings)?;
        if finding.sign == Sign::Ambiguous {
            return Ok(reject(
                net,
                a,
                "condition 1",
                format!(
                    "sibling child `{}` has ambiguous sign toward `{}`",
                    net.var(y).name,
                    net.var(z).name
                ),
            ));
        }
        reports.push(ChildSignReport {
            child: y,
            sign: finding.sign,
            method: finding.method,
            generalized: generalized_toward(net, a, y),
        });
    }

    if strict {
        let desc = net.descendants(a);
        if desc.len() != 1 || !desc.contains(&z) {
            return Ok(reject(
                net,
                a,
                "strict",
                format!(
                    "`{}` is not the candidate's only descendant",
                    net.var(z).name
                ),
            ));
        }
    }

    Ok(EligibilityOutcome::Eligible(Eligibility {
        node: a,
        theorem: Theorem::T2,
        children: reports,
        z_in_children: true,
    }))
}
