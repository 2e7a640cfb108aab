//! Construction of abstract networks under the dominance policy:
//! contiguous superstate partitions, strengthen/weaken direction
//! selection per child sign and target bound, aggregation of the
//! abstracted node's CPT, and envelope reassignment of its children's
//! CPTs (full-window or gap-n windowed).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dominance::{
    cdf_values_from_row, detect_generalized_sign, diff_cdf, GeneralizedSign, GeneralizedSignResult,
    Sign,
};
use crate::eligibility::Theorem;
use crate::error::{Error, Result};
use crate::network::{Arc, BayesianNetwork, Cpt, VarId, Variable};

/// Which side of the exact CDF an abstract network is built to bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Lower,
    Upper,
}

impl Bound {
    pub fn opposite(self) -> Bound {
        match self {
            Bound::Lower => Bound::Upper,
            Bound::Upper => Bound::Lower,
        }
    }
}

/// Envelope direction for one child CPT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Replace the member CDFs by their pointwise minimum (the
    /// dominating alternative).
    Strengthen,
    /// Replace the member CDFs by their pointwise maximum (the dominated
    /// alternative).
    Weaken,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Strengthen => Direction::Weaken,
            Direction::Weaken => Direction::Strengthen,
        }
    }
}

/// Direction choice for a child given its sign: fixed, or free when the
/// child's sign is zero (either envelope leaves the query untouched).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionChoice {
    Fixed(Direction),
    Either,
}

impl DirectionChoice {
    /// Resolves `Either` deterministically: strengthen for lower bounds,
    /// weaken for upper.
    pub fn resolve(self, target: Bound) -> Direction {
        match self {
            DirectionChoice::Fixed(d) => d,
            DirectionChoice::Either => match target {
                Bound::Lower => Direction::Strengthen,
                Bound::Upper => Direction::Weaken,
            },
        }
    }
}

/// Envelope direction that bounds the query CDF from the `target` side
/// for a child with sign `sigma`. For a positive sign, strengthening the
/// child lowers the query CDF; for a negative sign the roles flip; a
/// zero sign leaves the query CDF untouched either way. The query itself
/// as a child (parent route) takes the positive mapping.
pub fn direction_for_child(sigma: Sign, target: Bound) -> Result<DirectionChoice> {
    use DirectionChoice::*;
    match sigma {
        Sign::Positive => Ok(Fixed(match target {
            Bound::Lower => Direction::Strengthen,
            Bound::Upper => Direction::Weaken,
        })),
        Sign::Negative => Ok(Fixed(match target {
            Bound::Lower => Direction::Weaken,
            Bound::Upper => Direction::Strengthen,
        })),
        Sign::Zero => Ok(Either),
        Sign::Ambiguous => Err(Error::AmbiguousSign),
    }
}

/// An ordered, contiguous grouping of a variable's states into
/// superstates. Blocks are inclusive index ranges covering the whole
/// state space in order, without gaps or overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub variable: VarId,
    pub blocks: Vec<(usize, usize)>,
}

impl Partition {
    pub fn new(variable: VarId, blocks: Vec<(usize, usize)>, state_count: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        let mut expected_start = 0;
        for &(k, l) in &blocks {
            if k != expected_start || l < k {
                return Err(Error::InvalidPartition(format!(
                    "blocks must be contiguous and ordered; saw [{k}, {l}] expecting start {expected_start}"
                )));
            }
            expected_start = l + 1;
        }
        if expected_start != state_count {
            return Err(Error::InvalidPartition(format!(
                "blocks cover {expected_start} states, variable has {state_count}"
            )));
        }
        Ok(Partition { variable, blocks })
    }

    /// Coarsest partition: one superstate holding every state.
    pub fn single_block(variable: VarId, state_count: usize) -> Self {
        Partition {
            variable,
            blocks: vec![(0, state_count - 1)],
        }
    }

    /// Finest partition: one state per block.
    pub fn singletons(variable: VarId, state_count: usize) -> Self {
        Partition {
            variable,
            blocks: (0..state_count).map(|i| (i, i)).collect(),
        }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_all_singletons(&self) -> bool {
        self.blocks.iter().all(|&(k, l)| k == l)
    }

    /// True iff every block of `self` lies inside a block of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        self.variable == other.variable
            && self
                .blocks
                .iter()
                .all(|&(k, l)| other.blocks.iter().any(|&(ok, ol)| ok <= k && l <= ol))
    }
}

/// One node's entry in an abstraction plan: its partition, the envelope
/// direction for each of its children, and the route that licensed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub node: VarId,
    pub partition: Partition,
    pub directions: BTreeMap<VarId, Direction>,
    pub theorem: Theorem,
}

/// A full abstraction plan for one target bound. Planned nodes never
/// share children (and never abstract each other or a child), so the
/// construction order cannot matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionPlan {
    pub target: Bound,
    pub entries: Vec<PlanEntry>,
}

impl AbstractionPlan {
    pub fn empty(target: Bound) -> Self {
        AbstractionPlan {
            target,
            entries: Vec::new(),
        }
    }

    /// The same plan aimed at the opposite bound: every direction flips.
    pub fn flipped(&self) -> Self {
        AbstractionPlan {
            target: self.target.opposite(),
            entries: self
                .entries
                .iter()
                .map(|e| PlanEntry {
                    node: e.node,
                    partition: e.partition.clone(),
                    directions: e
                        .directions
                        .iter()
                        .map(|(&c, &d)| (c, d.opposite()))
                        .collect(),
                    theorem: e.theorem,
                })
                .collect(),
        }
    }

    /// Name-based JSON rendering for plan files and trace logs.
    pub fn to_json(&self, net: &BayesianNetwork) -> serde_json::Value {
        serde_json::json!({
            "target": match self.target { Bound::Lower => "lower", Bound::Upper => "upper" },
            "entries": self.entries.iter().map(|e| {
                serde_json::json!({
                    "node": net.var(e.node).name,
                    "blocks": e.partition.blocks.iter().map(|&(k, l)| [k, l]).collect::<Vec<_>>(),
                    "directions": e.directions.iter().map(|(&c, &d)| {
                        (net.var(c).name.clone(), match d {
                            Direction::Strengthen => "strengthen",
                            Direction::Weaken => "weaken",
                        })
                    }).collect::<BTreeMap<String, &str>>(),
                    "theorem": match e.theorem { Theorem::T1 => "T1", Theorem::T2 => "T2" },
                })
            }).collect::<Vec<_>>(),
        })
    }

    /// Parses the name-based JSON form against a concrete network.
    pub fn from_json(net: &BayesianNetwork, text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct PlanDoc {
            target: Bound,
            entries: Vec<EntryDoc>,
        }
        #[derive(Deserialize)]
        struct EntryDoc {
            node: String,
            blocks: Vec<(usize, usize)>,
            directions: BTreeMap<String, Direction>,
            theorem: Option<String>,
        }
        let doc: PlanDoc = serde_json::from_str(text)?;
        let mut entries = Vec::with_capacity(doc.entries.len());
        for e in doc.entries {
            let node = net
                .var_id(&e.node)
                .ok_or_else(|| Error::UnknownVariable(e.node.clone()))?;
            let partition = Partition::new(node, e.blocks, net.state_count(node))?;
            let mut directions = BTreeMap::new();
            for (name, d) in e.directions {
                let c = net.var_id(&name).ok_or(Error::UnknownVariable(name))?;
                directions.insert(c, d);
            }
            let theorem = match e.theorem.as_deref() {
                Some("T2") => Theorem::T2,
                _ => Theorem::T1,
            };
            entries.push(PlanEntry {
                node,
                partition,
                directions,
                theorem,
            });
        }
        Ok(AbstractionPlan {
            target: doc.target,
            entries,
        })
    }
}

/// Aggregates the abstracted node's own CPT: per parent context, a
/// superstate's probability is the sum of its member states'.
pub fn abstract_node_cpt(cpt_of_a: &Cpt, partition: &Partition) -> Result<Cpt> {
    if partition.blocks.last().map(|&(_, l)| l + 1) != Some(cpt_of_a.child_card()) {
        return Err(Error::InvalidPartition(format!(
            "partition covers {:?}, CPT has {} child states",
            partition.blocks,
            cpt_of_a.child_card()
        )));
    }
    let rows = cpt_of_a
        .rows()
        .iter()
        .map(|row| {
            partition
                .blocks
                .iter()
                .map(|&(k, l)| row[k..=l].iter().sum())
                .collect::<Vec<f64>>()
        })
        .collect();
    Cpt::new(
        cpt_of_a.child(),
        cpt_of_a.parents().to_vec(),
        cpt_of_a.parent_cards().to_vec(),
        partition.block_count(),
        rows,
    )
}

fn window_members(
    block: (usize, usize),
    direction: Direction,
    window: Option<GeneralizedSign>,
) -> (usize, usize) {
    let (k, l) = block;
    let Some(g) = window else { return (k, l) };
    let n = g.n;
    // Under a gap-n positive sign the member CDFs beyond the top window
    // are dominated by the top state's, so the pointwise min lives in the
    // top n members and the max in the bottom n; a negative sign mirrors
    // the windows.
    let top = ((l + 1).saturating_sub(n).max(k), l);
    let bottom = (k, (k + n - 1).min(l));
    match (g.sign, direction) {
        (Sign::Positive, Direction::Strengthen) => top,
        (Sign::Positive, Direction::Weaken) => bottom,
        (Sign::Negative, Direction::Strengthen) => bottom,
        (Sign::Negative, Direction::Weaken) => top,
        _ => (k, l),
    }
}

/// Reassigns a child's CPT over superstates of parent `a`: for each
/// superstate and context, the conditional CDF becomes the pointwise
/// minimum (strengthen) or maximum (weaken) over the member states'
/// CDFs. A verified gap-n sign shrinks the scanned members to the
/// endpoint window; the result is identical because the skipped members
/// cannot attain the extreme. Rows are recovered by differencing;
/// singleton blocks keep their original rows bit-exactly.
pub fn abstract_child_cpt(
    cpt_of_y: &Cpt,
    a: VarId,
    partition: &Partition,
    direction: Direction,
    window: Option<GeneralizedSign>,
) -> Result<Cpt> {
    let pos = cpt_of_y
        .parent_position(a)
        .ok_or_else(|| Error::NotAParent {
            variable: a.to_string(),
        })?;
    let m = cpt_of_y.parent_cards()[pos];
    if partition.blocks.last().map(|&(_, l)| l + 1) != Some(m) {
        return Err(Error::InvalidPartition(format!(
            "partition covers {:?}, parent has {m} states",
            partition.blocks
        )));
    }

    let mut new_cards = cpt_of_y.parent_cards().to_vec();
    new_cards[pos] = partition.block_count();
    let row_count: usize = new_cards.iter().product::<usize>().max(1);
    let mut new_rows = vec![Vec::new(); row_count];

    let template = Cpt::new(
        cpt_of_y.child(),
        cpt_of_y.parents().to_vec(),
        new_cards.clone(),
        cpt_of_y.child_card(),
        vec![vec![0.0; cpt_of_y.child_card()]; row_count],
    )?;

    let pick = match direction {
        Direction::Strengthen => f64::min,
        Direction::Weaken => f64::max,
    };

    for context in cpt_of_y.contexts_excluding(pos) {
        for (b, &block) in partition.blocks.iter().enumerate() {
            let mut new_states = context.clone();
            new_states[pos] = b;
            let idx = template.row_index(&new_states);
            let (k, l) = block;
            if k == l {
                new_rows[idx] = cpt_of_y.row_in_context(&context, pos, k).to_vec();
                continue;
            }
            let (wk, wl) = window_members(block, direction, window);
            let mut env = cdf_values_from_row(cpt_of_y.row_in_context(&context, pos, wk));
            for j in (wk + 1)..=wl {
                let cdf = cdf_values_from_row(cpt_of_y.row_in_context(&context, pos, j));
                for (slot, v) in env.iter_mut().zip(cdf) {
                    *slot = pick(*slot, v);
                }
            }
            new_rows[idx] = diff_cdf(&env);
        }
    }

    Cpt::new(
        cpt_of_y.child(),
        cpt_of_y.parents().to_vec(),
        new_cards,
        cpt_of_y.child_card(),
        new_rows,
    )
}

fn superstate_labels(var: &Variable, partition: &Partition) -> Vec<String> {
    partition
        .blocks
        .iter()
        .map(|&(k, l)| {
            if k == l {
                var.states[k].clone()
            } else {
                format!("{}..{}", var.states[k], var.states[l])
            }
        })
        .collect()
}

fn check_plan_shape(net: &BayesianNetwork, plan: &AbstractionPlan) -> Result<()> {
    let mut touched: BTreeSet<VarId> = BTreeSet::new();
    for entry in &plan.entries {
        let a = entry.node;
        if a.0 >= net.var_count() {
            return Err(Error::InvalidPlan(format!("unknown node {a}")));
        }
        if entry.partition.variable != a {
            return Err(Error::InvalidPlan(format!(
                "partition is over {} but the entry abstracts {}",
                entry.partition.variable, a
            )));
        }
        Partition::new(a, entry.partition.blocks.clone(), net.state_count(a))?;
        let children: BTreeSet<VarId> = net.children(a).iter().copied().collect();
        let direction_keys: BTreeSet<VarId> = entry.directions.keys().copied().collect();
        if direction_keys != children {
            return Err(Error::InvalidPlan(format!(
                "`{}` needs directions for exactly its children",
                net.var(a).name
            )));
        }
        // Modified CPTs are the node's own and its children's; entries
        // must not touch a CPT twice or the construction order would
        // matter.
        let mut modified = children;
        modified.insert(a);
        if !touched.is_disjoint(&modified) {
            return Err(Error::InvalidPlan(format!(
                "`{}` shares a modified CPT with another planned node",
                net.var(a).name
            )));
        }
        touched.extend(modified);
    }
    Ok(())
}

/// Builds the abstract network for a plan: abstracted nodes get
/// superstate spaces and aggregated CPTs, each of their children gets the
/// planned envelope CPT, everything else is copied unchanged. An empty
/// plan returns a structurally identical network.
pub fn build_abn(net: &BayesianNetwork, plan: &AbstractionPlan) -> Result<BayesianNetwork> {
    check_plan_shape(net, plan)?;

    let mut variables: Vec<Variable> = net.variables().to_vec();
    let mut cpts: Vec<Cpt> = net.cpts().to_vec();

    for entry in &plan.entries {
        let a = entry.node;
        variables[a.0] = Variable {
            name: net.var(a).name.clone(),
            states: superstate_labels(net.var(a), &entry.partition),
        };
        cpts[a.0] = abstract_node_cpt(net.cpt(a), &entry.partition)?;
        for (&child, &direction) in &entry.directions {
            // A verified gap-n sign on the arc licenses the windowed
            // envelope; it changes nothing numerically, so detection here
            // is just an internal shortcut.
            let window = match detect_generalized_sign(net.cpt(child), a) {
                Ok(GeneralizedSignResult::Decisive(g)) => Some(g),
                _ => None,
            };
            cpts[child.0] =
                abstract_child_cpt(net.cpt(child), a, &entry.partition, direction, window)?;
        }
    }

    let arcs: Vec<Arc> = net.arcs().to_vec();
    let abn = BayesianNetwork::from_parts(variables, arcs, cpts)?;
    debug_assert!(
        abn.validate().is_clean(),
        "abstract network failed validation"
    );
    Ok(abn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::brute_force_posterior;
    use crate::network::{parse_network, Evidence};

    fn ids(net: &BayesianNetwork, name: &str) -> VarId {
        net.var_id(name).unwrap()
    }

    #[test]
    fn direction_mapping_follows_signs() {
        use Direction::*;
        use DirectionChoice::*;
        assert_eq!(
            direction_for_child(Sign::Positive, Bound::Lower).unwrap(),
            Fixed(Strengthen)
        );
        assert_eq!(
            direction_for_child(Sign::Positive, Bound::Upper).unwrap(),
            Fixed(Weaken)
        );
        assert_eq!(
            direction_for_child(Sign::Negative, Bound::Lower).unwrap(),
            Fixed(Weaken)
        );
        assert_eq!(
            direction_for_child(Sign::Negative, Bound::Upper).unwrap(),
            Fixed(Strengthen)
        );
        assert_eq!(
            direction_for_child(Sign::Zero, Bound::Lower).unwrap(),
            Either
        );
        assert_eq!(
            direction_for_child(Sign::Zero, Bound::Upper).unwrap(),
            Either
        );
        assert!(direction_for_child(Sign::Ambiguous, Bound::Lower).is_err());
    }

    #[test]
    fn partition_invariants_are_enforced() {
        assert!(Partition::new(VarId(0), vec![(0, 1), (2, 2)], 3).is_ok());
        assert!(Partition::new(VarId(0), vec![(0, 1), (1, 2)], 3).is_err());
        assert!(Partition::new(VarId(0), vec![(1, 2)], 3).is_err());
        assert!(Partition::new(VarId(0), vec![(0, 1)], 3).is_err());
        let fine = Partition::singletons(VarId(0), 3);
        let coarse = Partition::single_block(VarId(0), 3);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
    }

    #[test]
    fn abstract_node_cpt_sums_blocks() {
        let cpt = Cpt::new(VarId(0), vec![], vec![], 3, vec![vec![0.3, 0.5, 0.2]]).unwrap();
        let p = Partition::new(VarId(0), vec![(0, 1), (2, 2)], 3).unwrap();
        let out = abstract_node_cpt(&cpt, &p).unwrap();
        assert_eq!(out.rows(), &[vec![0.8, 0.2]]);
    }

    #[test]
    fn abstract_node_cpt_singleton_partition_is_identity() {
        let cpt = Cpt::new(VarId(0), vec![], vec![], 3, vec![vec![0.3, 0.5, 0.2]]).unwrap();
        let p = Partition::singletons(VarId(0), 3);
        assert_eq!(abstract_node_cpt(&cpt, &p).unwrap().rows(), cpt.rows());
    }

    #[test]
    fn abstract_node_cpt_one_block_collapses_to_certainty() {
        let cpt = Cpt::new(VarId(0), vec![], vec![], 3, vec![vec![0.3, 0.5, 0.2]]).unwrap();
        let p = Partition::single_block(VarId(0), 3);
        let out = abstract_node_cpt(&cpt, &p).unwrap();
        assert_eq!(out.child_card(), 1);
        assert!((out.rows()[0][0] - 1.0).abs() < 1e-12);
    }

    fn monotone_child() -> Cpt {
        // Pr(true | a0, a1, a2) = 0.2, 0.5, 0.9.
        Cpt::new(
            VarId(1),
            vec![VarId(0)],
            vec![3],
            2,
            vec![vec![0.8, 0.2], vec![0.5, 0.5], vec![0.1, 0.9]],
        )
        .unwrap()
    }

    #[test]
    fn abstract_child_strengthen_takes_pointwise_min() {
        let cpt = monotone_child();
        let p = Partition::single_block(VarId(0), 3);
        let out = abstract_child_cpt(&cpt, VarId(0), &p, Direction::Strengthen, None).unwrap();
        assert!((out.rows()[0][1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn abstract_child_weaken_takes_pointwise_max() {
        let cpt = monotone_child();
        let p = Partition::single_block(VarId(0), 3);
        let out = abstract_child_cpt(&cpt, VarId(0), &p, Direction::Weaken, None).unwrap();
        assert!((out.rows()[0][1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn abstract_child_singleton_blocks_return_original() {
        let cpt = monotone_child();
        let p = Partition::singletons(VarId(0), 3);
        for dir in [Direction::Strengthen, Direction::Weaken] {
            let out = abstract_child_cpt(&cpt, VarId(0), &p, dir, None).unwrap();
            assert_eq!(out.rows(), cpt.rows());
        }
    }

    #[test]
    fn windowed_envelope_matches_full_envelope_under_gap_sign() {
        // Gap-2 positive CPT from the dominance tests.
        let cpt = Cpt::new(
            VarId(1),
            vec![VarId(0)],
            vec![3],
            3,
            vec![
                vec![0.2, 0.5, 0.3],
                vec![0.3, 0.3, 0.4],
                vec![0.1, 0.4, 0.5],
            ],
        )
        .unwrap();
        let g = match detect_generalized_sign(&cpt, VarId(0)).unwrap() {
            GeneralizedSignResult::Decisive(g) => g,
            other => panic!("expected a decisive gap sign, got {other:?}"),
        };
        assert_eq!(g.n, 2);
        let p = Partition::single_block(VarId(0), 3);
        for dir in [Direction::Strengthen, Direction::Weaken] {
            let full = abstract_child_cpt(&cpt, VarId(0), &p, dir, None).unwrap();
            let windowed = abstract_child_cpt(&cpt, VarId(0), &p, dir, Some(g)).unwrap();
            assert_eq!(full.rows(), windowed.rows());
        }
    }

    #[test]
    fn build_abn_empty_plan_is_identity() {
        let net = parse_network(&crate::network::tests::fan_doc()).unwrap();
        let abn = build_abn(&net, &AbstractionPlan::empty(Bound::Lower)).unwrap();
        assert_eq!(net, abn);
    }

    #[test]
    fn build_abn_fan_single_superstate_bounds_posterior() {
        let net = parse_network(&crate::network::tests::fan_doc()).unwrap();
        let a = ids(&net, "A");
        let z = ids(&net, "Z");
        let e = Evidence::from_pairs([(ids(&net, "E"), 0)]);
        // Y1 is positive toward Z, Y2 negative; coordinate for a lower
        // bound: strengthen Y1, weaken Y2.
        let plan = AbstractionPlan {
            target: Bound::Lower,
            entries: vec![PlanEntry {
                node: a,
                partition: Partition::single_block(a, 3),
                directions: BTreeMap::from([
                    (ids(&net, "Y1"), Direction::Strengthen),
                    (ids(&net, "Y2"), Direction::Weaken),
                ]),
                theorem: Theorem::T1,
            }],
        };
        let lower_abn = build_abn(&net, &plan).unwrap();
        assert!(lower_abn.validate().is_clean());
        let upper_abn = build_abn(&net, &plan.flipped()).unwrap();

        let exact = crate::dominance::cdf_from_pmf(&brute_force_posterior(&net, z, &e).unwrap());
        let lo = crate::dominance::cdf_from_pmf(&brute_force_posterior(&lower_abn, z, &e).unwrap());
        let hi = crate::dominance::cdf_from_pmf(&brute_force_posterior(&upper_abn, z, &e).unwrap());
        for i in 0..exact.len() {
            assert!(
                lo.values()[i] <= exact.values()[i] + 1e-9,
                "lower bound violated at {i}"
            );
            assert!(
                exact.values()[i] <= hi.values()[i] + 1e-9,
                "upper bound violated at {i}"
            );
        }
    }

    #[test]
    fn build_abn_order_independent_for_disjoint_nodes() {
        // A -> Y and B -> W: two abstracted nodes with disjoint children.
        let net = parse_network(
            r#"{
              "variables": [
                {"name": "A", "states": ["a0", "a1", "a2"]},
                {"name": "B", "states": ["b0", "b1", "b2"]},
                {"name": "Y", "states": ["y0", "y1"]},
                {"name": "W", "states": ["w0", "w1"]}
              ],
              "arcs": [
                {"from": "A", "to": "Y"},
                {"from": "B", "to": "W"}
              ],
              "cpts": [
                {"child": "A", "parents": [], "rows": [{"given": [], "p": [0.2, 0.3, 0.5]}]},
                {"child": "B", "parents": [], "rows": [{"given": [], "p": [0.6, 0.3, 0.1]}]},
                {"child": "Y", "parents": ["A"], "rows": [
                  {"given": [0], "p": [0.9, 0.1]},
                  {"given": [1], "p": [0.5, 0.5]},
                  {"given": [2], "p": [0.2, 0.8]}
                ]},
                {"child": "W", "parents": ["B"], "rows": [
                  {"given": [0], "p": [0.3, 0.7]},
                  {"given": [1], "p": [0.6, 0.4]},
                  {"given": [2], "p": [0.8, 0.2]}
                ]}
              ]
            }"#,
        )
        .unwrap();
        let a = ids(&net, "A");
        let b = ids(&net, "B");
        let entry_a = PlanEntry {
            node: a,
            partition: Partition::single_block(a, 3),
            directions: BTreeMap::from([(ids(&net, "Y"), Direction::Strengthen)]),
            theorem: Theorem::T1,
        };
        let entry_b = PlanEntry {
            node: b,
            partition: Partition::single_block(b, 3),
            directions: BTreeMap::from([(ids(&net, "W"), Direction::Weaken)]),
            theorem: Theorem::T1,
        };
        let simultaneous = build_abn(
            &net,
            &AbstractionPlan {
                target: Bound::Lower,
                entries: vec![entry_a.clone(), entry_b.clone()],
            },
        )
        .unwrap();
        let a_then_b = build_abn(
            &build_abn(
                &net,
                &AbstractionPlan {
                    target: Bound::Lower,
                    entries: vec![entry_a.clone()],
                },
            )
            .unwrap(),
            &AbstractionPlan {
                target: Bound::Lower,
                entries: vec![entry_b.clone()],
            },
        )
        .unwrap();
        let b_then_a = build_abn(
            &build_abn(
                &net,
                &AbstractionPlan {
                    target: Bound::Lower,
                    entries: vec![entry_b],
                },
            )
            .unwrap(),
            &AbstractionPlan {
                target: Bound::Lower,
                entries: vec![entry_a],
            },
        )
        .unwrap();
        for (x, y) in [(&simultaneous, &a_then_b), (&simultaneous, &b_then_a)] {
            for (c1, c2) in x.cpts().iter().zip(y.cpts()) {
                for (r1, r2) in c1.rows().iter().zip(c2.rows()) {
                    for (v1, v2) in r1.iter().zip(r2) {
                        assert_eq!(v1.to_bits(), v2.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn build_abn_rejects_shared_modified_cpts() {
        let net = parse_network(&crate::network::tests::fan_doc()).unwrap();
        let a = ids(&net, "A");
        let y1 = ids(&net, "Y1");
        let plan = AbstractionPlan {
            target: Bound::Lower,
            entries: vec![
                PlanEntry {
                    node: a,
                    partition: Partition::single_block(a, 3),
                    directions: BTreeMap::from([
                        (y1, Direction::Strengthen),
                        (ids(&net, "Y2"), Direction::Weaken),
                    ]),
                    theorem: Theorem::T1,
                },
                PlanEntry {
                    node: y1,
                    partition: Partition::single_block(y1, 2),
                    directions: BTreeMap::from([(ids(&net, "Z"), Direction::Strengthen)]),
                    theorem: Theorem::T2,
                },
            ],
        };
        assert!(matches!(build_abn(&net, &plan), Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn plan_json_round_trip() {
        let net = parse_network(&crate::network::tests::fan_doc()).unwrap();
        let a = ids(&net, "A");
        let plan = AbstractionPlan {
            target: Bound::Upper,
            entries: vec![PlanEntry {
                node: a,
                partition: Partition::new(a, vec![(0, 1), (2, 2)], 3).unwrap(),
                directions: BTreeMap::from([
                    (ids(&net, "Y1"), Direction::Weaken),
                    (ids(&net, "Y2"), Direction::Strengthen),
                ]),
                theorem: Theorem::T1,
            }],
        };
        let text = serde_json::to_string(&plan.to_json(&net)).unwrap();
        let back = AbstractionPlan::from_json(&net, &text).unwrap();
        assert_eq!(plan, back);
    }
}
