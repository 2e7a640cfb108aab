//! The anytime refinement loop: select abstraction nodes, start from the
//! coarsest superstate partitions, evaluate a lower-target and an
//! upper-target abstract network per iteration, then split one superstate
//! and repeat. Bounds tighten monotonically and reach the exact posterior
//! at full refinement.
//!
//! Every emitted prefix of a trace is a valid result on its own; that is
//! the anytime contract, and the line-oriented serialization below
//! preserves it across truncation.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::abstraction::{
    build_abn, direction_for_child, AbstractionPlan, Bound, Direction, Partition, PlanEntry,
};
use crate::dominance::{cdf_from_pmf, fsd, Cdf, Sign};
use crate::eligibility::{
    check_theorem1, check_theorem2, Eligibility, EligibilityOutcome, Theorem,
};
use crate::error::{Error, Result};
use crate::inference::{evidence_possible, posterior};
use crate::network::{BayesianNetwork, Evidence, VarId};
use crate::PROB_TOL;

/// How the next superstate to split is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitStrategy {
    /// Split the widest block at its midpoint, ties to the lowest start
    /// index.
    #[default]
    WidestMidpoint,
    /// Split the first non-singleton block at its midpoint.
    FirstSplittable,
}

/// Splits exactly one block of the partition per the strategy, or `None`
/// when every block is already a singleton.
pub fn split(partition: &Partition, strategy: SplitStrategy) -> Option<Partition> {
    let candidates = partition
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, &(k, l))| l > k);
    let chosen = match strategy {
        SplitStrategy::WidestMidpoint => candidates.max_by(|(ia, &(ka, la)), (ib, &(kb, lb))| {
            (la - ka + 1).cmp(&(lb - kb + 1)).then(ib.cmp(ia))
        }),
        SplitStrategy::FirstSplittable => candidates.min_by_key(|(i, _)| *i),
    };
    let (pos, &(k, l)) = chosen?;
    let mid = (k + l) / 2;
    let mut blocks = partition.blocks.clone();
    blocks.splice(pos..=pos, [(k, mid), (mid + 1, l)]);
    Some(Partition {
        variable: partition.variable,
        blocks,
    })
}

/// Greedy maximal set of eligible abstraction nodes whose modified CPTs
/// (the node's own plus its children's) are pairwise disjoint, ordered by
/// descending state count so the largest savings come first; ties break
/// on declaration order. Deterministic given the network. An empty
/// result means no bounding is possible and callers fall back to exact
/// evaluation.
///
/// Nodes whose signs needed numeric verification are never combined with
/// other abstracted nodes: refining one node's partition while another
/// stays abstracted applies the tightening argument inside the other
/// node's abstract network, where only structural signs are guaranteed
/// to keep holding. Such a node is selected only when it would be the
/// sole abstraction.
pub fn select_abstraction_nodes(
    net: &BayesianNetwork,
    z: VarId,
    e: &Evidence,
    strict_t2: bool,
) -> Result<Vec<Eligibility>> {
    if e.contains(z) {
        return Err(Error::QueryAssigned(net.var(z).name.clone()));
    }
    let mut candidates: Vec<VarId> = net
        .var_ids()
        .filter(|&v| {
            v != z && !e.contains(v) && net.state_count(v) >= 2 && !net.children(v).is_empty()
        })
        .collect();
    candidates.sort_by_key(|&v| (std::cmp::Reverse(net.state_count(v)), v));

    let mut selected: Vec<Eligibility> = Vec::new();
    let mut touched: std::collections::BTreeSet<VarId> = std::collections::BTreeSet::new();
    let mut numeric_fallback: Option<Eligibility> = None;
    for a in candidates {
        let mut modified: std::collections::BTreeSet<VarId> =
            net.children(a).iter().copied().collect();
        modified.insert(a);
        if !touched.is_disjoint(&modified) {
            continue;
        }
        let outcome = if net.children(a).contains(&z) {
            check_theorem2(net, a, z, e, strict_t2)?
        } else {
            check_theorem1(net, a, z, e)?
        };
        if let EligibilityOutcome::Eligible(elig) = outcome {
            if elig.signs_are_structural() {
                touched.extend(modified);
                selected.push(elig);
            } else if numeric_fallback.is_none() {
                numeric_fallback = Some(elig);
            }
        }
    }
    if selected.is_empty() {
        if let Some(elig) = numeric_fallback {
            selected.push(elig);
        }
    }
    Ok(selected)
}

/// Lower and upper probabilities of the event "X lies in (x_i, x_j]"
/// derived from bracketing CDFs; `from` is exclusive and `None` stands
/// for the lower tail (F(-inf) = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalProbability {
    pub from: Option<usize>,
    pub to: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Interval probability of `x_i < X <= x_j` from a bracketing CDF pair.
/// Both endpoints land in [0, 1] by construction.
pub fn interval_probability(
    lower: &Cdf,
    upper: &Cdf,
    from: Option<usize>,
    to: usize,
) -> Result<IntervalProbability> {
    if !fsd(lower, upper)? {
        return Err(Error::NonBracketing);
    }
    let m = lower.len();
    if to >= m {
        return Err(Error::InvalidArgument(format!(
            "event endpoint {to} out of range"
        )));
    }
    if let Some(i) = from {
        if i >= to {
            return Err(Error::InvalidArgument(
                "event needs from < to on the state order".into(),
            ));
        }
    }
    let upper_at_from = from.map_or(0.0, |i| upper.values()[i]);
    let lower_at_from = from.map_or(0.0, |i| lower.values()[i]);
    let lo = (lower.values()[to] - upper_at_from)
        .max(0.0)
        .clamp(0.0, 1.0);
    let hi = (upper.values()[to] - lower_at_from).clamp(0.0, 1.0);
    debug_assert!(lo <= hi + PROB_TOL);
    Ok(IntervalProbability {
        from,
        to,
        lower: lo,
        upper: hi,
    })
}

/// Partition state of one abstracted node at some iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSnapshot {
    pub node: String,
    pub blocks: Vec<(usize, usize)>,
}

/// One evaluated iteration: the bracketing CDFs, the partitions that
/// produced them, and wall time since the run started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub lower: Cdf,
    pub upper: Cdf,
    pub partitions: Vec<PartitionSnapshot>,
    pub wall_ms: f64,
}

/// The anytime output stream: per-iteration bound pairs for one query.
/// Wall times are informational; every probabilistic field is a
/// deterministic function of the inputs and options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsTrace {
    pub query: String,
    pub evidence: BTreeMap<String, String>,
    /// Names of the abstracted nodes; empty means the run fell back to a
    /// single exact evaluation.
    pub abstracted: Vec<String>,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl BoundsTrace {
    pub fn exact_fallback(&self) -> bool {
        self.abstracted.is_empty()
    }

    /// Final bound pair, if any iteration ran.
    pub fn last_bounds(&self) -> Option<(&Cdf, &Cdf)> {
        self.iterations.last().map(|it| (&it.lower, &it.upper))
    }

    /// Line-oriented JSON: one head line, one line per iteration, one
    /// summary line. Any prefix that includes the head line parses back.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        out.push_str(
            &serde_json::to_string(&TraceHead {
                query: self.query.clone(),
                evidence: self.evidence.clone(),
                abstracted: self.abstracted.clone(),
            })
            .expect("head serialization cannot fail"),
        );
        out.push('\n');
        for it in &self.iterations {
            out.push_str(&serde_json::to_string(it).expect("iteration serialization cannot fail"));
            out.push('\n');
        }
        out.push_str(
            &serde_json::to_string(&TraceSummary {
                converged: self.converged,
            })
            .expect("summary serialization cannot fail"),
        );
        out.push('\n');
        out
    }

    /// Parses the line-oriented form, accepting truncated streams: a
    /// missing summary line yields `converged = false` with the
    /// iterations seen so far.
    pub fn from_ndjson(text: &str) -> Result<BoundsTrace> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let head_line = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
        let head: TraceHead = serde_json::from_str(head_line)?;
        let mut iterations = Vec::new();
        let mut converged = false;
        for line in lines {
            if let Ok(it) = serde_json::from_str::<IterationRecord>(line) {
                iterations.push(it);
            } else {
                let summary: TraceSummary = serde_json::from_str(line)?;
                converged = summary.converged;
                break;
            }
        }
        Ok(BoundsTrace {
            query: head.query,
            evidence: head.evidence,
            abstracted: head.abstracted,
            iterations,
            converged,
        })
    }
}

/// First line of the trace stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceHead {
    pub query: String,
    pub evidence: BTreeMap<String, String>,
    pub abstracted: Vec<String>,
}

/// Last line of a completed trace stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSummary {
    pub converged: bool,
}

/// Options for [`run_issa`].
#[derive(Debug, Clone)]
pub struct IssaOptions {
    /// Evaluate at most this many iterations.
    pub max_iterations: Option<usize>,
    /// Stop before starting an iteration once this much wall time passed.
    pub deadline: Option<Duration>,
    /// Abstract exactly these nodes with these starting partitions and
    /// directions instead of selecting automatically. Validated against
    /// the applicability conditions before use.
    pub plan: Option<AbstractionPlan>,
    pub strategy: SplitStrategy,
    /// Stop once lower and upper agree pointwise within this gap. `None`
    /// runs to full refinement.
    pub early_stop_gap: Option<f64>,
    /// Require the stricter parent-route check (query must be the
    /// candidate's only descendant).
    pub strict_t2: bool,
}

impl Default for IssaOptions {
    fn default() -> Self {
        IssaOptions {
            max_iterations: None,
            deadline: None,
            plan: None,
            strategy: SplitStrategy::default(),
            early_stop_gap: Some(PROB_TOL),
            strict_t2: false,
        }
    }
}

struct RunState {
    nodes: Vec<VarId>,
    partitions: Vec<Partition>,
    lower_directions: Vec<BTreeMap<VarId, Direction>>,
}

fn directions_from_eligibility(
    elig: &Eligibility,
    z: VarId,
    target: Bound,
) -> Result<BTreeMap<VarId, Direction>> {
    let mut directions = BTreeMap::new();
    for report in &elig.children {
        directions.insert(
            report.child,
            direction_for_child(report.sign, target)?.resolve(target),
        );
    }
    if elig.z_in_children {
        // The query's own CPT takes the positive mapping: strengthen for a
        // lower bound, weaken for an upper.
        directions.insert(
            z,
            direction_for_child(Sign::Positive, target)?.resolve(target),
        );
    }
    Ok(directions)
}

fn state_from_selection(
    net: &BayesianNetwork,
    selected: &[Eligibility],
    z: VarId,
) -> Result<RunState> {
    let mut nodes = Vec::new();
    let mut partitions = Vec::new();
    let mut lower_directions = Vec::new();
    for elig in selected {
        nodes.push(elig.node);
        partitions.push(Partition::single_block(
            elig.node,
            net.state_count(elig.node),
        ));
        lower_directions.push(directions_from_eligibility(elig, z, Bound::Lower)?);
    }
    Ok(RunState {
        nodes,
        partitions,
        lower_directions,
    })
}

/// Re-checks a user-supplied plan: every planned node must still satisfy
/// its route's conditions and every fixed direction must match the sign
/// mapping for the plan's target.
fn state_from_plan(
    net: &BayesianNetwork,
    plan: &AbstractionPlan,
    z: VarId,
    e: &Evidence,
    strict_t2: bool,
) -> Result<RunState> {
    let mut nodes = Vec::new();
    let mut partitions = Vec::new();
    let mut lower_directions = Vec::new();
    for entry in &plan.entries {
        let a = entry.node;
        let outcome = match entry.theorem {
            Theorem::T1 => check_theorem1(net, a, z, e)?,
            Theorem::T2 => check_theorem2(net, a, z, e, strict_t2)?,
        };
        let elig = match outcome {
            EligibilityOutcome::Eligible(elig) => elig,
            EligibilityOutcome::Rejected(r) => {
                return Err(Error::InvalidPlan(format!(
                    "`{}` fails {}: {}",
                    r.node, r.condition, r.detail
                )))
            }
        };
        // Direction consistency against the plan's own target.
        for report in elig.children.iter() {
            let choice = direction_for_child(report.sign, plan.target)?;
            let planned = entry.directions.get(&report.child).copied();
            let name = &net.var(report.child).name;
            match (choice, planned) {
                (_, None) => {
                    return Err(Error::InvalidPlan(format!(
                        "missing direction for `{name}`"
                    )))
                }
                (crate::abstraction::DirectionChoice::Fixed(d), Some(p)) if p != d => {
                    return Err(Error::InvalidPlan(format!(
                        "direction for `{name}` contradicts its sign under the {:?} target",
                        plan.target
                    )));
                }
                _ => {}
            }
        }
        if elig.z_in_children {
            let required = direction_for_child(Sign::Positive, plan.target)?.resolve(plan.target);
            if entry.directions.get(&z) != Some(&required) {
                return Err(Error::InvalidPlan(format!(
                    "the query's direction must be {required:?} under the {:?} target",
                    plan.target
                )));
            }
        }
        if plan.entries.len() > 1 && !elig.signs_are_structural() {
            return Err(Error::InvalidPlan(format!(
                "`{}` relies on numerically verified signs; such a node can only be abstracted alone",
                net.var(a).name
            )));
        }
        nodes.push(a);
        partitions.push(Partition::new(
            a,
            entry.partition.blocks.clone(),
            net.state_count(a),
        )?);
        let lower_entry = match plan.target {
            Bound::Lower => entry.directions.clone(),
            Bound::Upper => entry
                .directions
                .iter()
                .map(|(&c, &d)| (c, d.opposite()))
                .collect(),
        };
        lower_directions.push(lower_entry);
    }
    Ok(RunState {
        nodes,
        partitions,
        lower_directions,
    })
}

fn plan_for(state: &RunState, target: Bound, net: &BayesianNetwork, z: VarId) -> AbstractionPlan {
    let entries = state
        .nodes
        .iter()
        .zip(&state.partitions)
        .zip(&state.lower_directions)
        .map(|((&node, partition), lower_dirs)| {
            let directions: BTreeMap<VarId, Direction> = match target {
                Bound::Lower => lower_dirs.clone(),
                Bound::Upper => lower_dirs
                    .iter()
                    .map(|(&c, &d)| (c, d.opposite()))
                    .collect(),
            };
            let theorem = if net.children(node).contains(&z) {
                Theorem::T2
            } else {
                Theorem::T1
            };
            PlanEntry {
                node,
                partition: partition.clone(),
                directions,
                theorem,
            }
        })
        .collect();
    AbstractionPlan { target, entries }
}

fn vacuous_bound(target: Bound, m: usize) -> Cdf {
    let values = match target {
        Bound::Lower => {
            let mut v = vec![0.0; m];
            v[m - 1] = 1.0;
            v
        }
        Bound::Upper => vec![1.0; m],
    };
    Cdf::new(values).expect("vacuous bound is a valid CDF")
}

/// Evaluates one side: builds the abstract network and reads the query's
/// conditional CDF off it. Evidence rendered impossible by abstraction
/// degrades to the vacuous bound so the anytime contract stays total.
fn evaluate_bound(
    net: &BayesianNetwork,
    plan: &AbstractionPlan,
    z: VarId,
    e: &Evidence,
) -> Result<Cdf> {
    let abn = build_abn(net, plan)?;
    match posterior(&abn, z, e) {
        Ok(pmf) => Ok(cdf_from_pmf(&pmf)),
        Err(Error::ZeroProbabilityEvidence) => Ok(vacuous_bound(plan.target, net.state_count(z))),
        Err(err) => Err(err),
    }
}

/// Progress event stream of a run, for consumers that must emit rows as
/// they are produced rather than waiting for the full trace.
#[derive(Debug, Clone)]
pub enum IssaEvent {
    /// Abstraction nodes are fixed; nothing has been evaluated yet.
    Selected(TraceHead),
    /// One iteration has been evaluated and appended to the trace.
    Iteration(IterationRecord),
}

/// Runs the anytime loop and returns the full trace. Iteration 0
/// evaluates the starting partitions (coarsest by default); each further
/// iteration refines exactly one superstate, round-robin across nodes.
/// The trace ends converged when partitions are fully refined or the
/// bound gap closes below the early-stop tolerance; hitting the
/// iteration or deadline budget ends it unconverged.
pub fn run_issa(
    net: &BayesianNetwork,
    z: VarId,
    e: &Evidence,
    options: &IssaOptions,
) -> Result<BoundsTrace> {
    run_issa_with(net, z, e, options, |_| {})
}

/// [`run_issa`] with a progress callback invoked on node selection and
/// after every evaluated iteration.
pub fn run_issa_with<F: FnMut(IssaEvent)>(
    net: &BayesianNetwork,
    z: VarId,
    e: &Evidence,
    options: &IssaOptions,
    mut on_event: F,
) -> Result<BoundsTrace> {
    if e.contains(z) {
        return Err(Error::QueryAssigned(net.var(z).name.clone()));
    }
    if !evidence_possible(net, e)? {
        return Err(Error::ZeroProbabilityEvidence);
    }
    if let Some(max) = options.max_iterations {
        if max == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
    }

    let start = Instant::now();
    let evidence_labels: BTreeMap<String, String> = e
        .iter()
        .map(|(v, s)| (net.var(v).name.clone(), net.var(v).states[s].clone()))
        .collect();

    let mut state = match &options.plan {
        Some(plan) => state_from_plan(net, plan, z, e, options.strict_t2)?,
        None => {
            let selected = select_abstraction_nodes(net, z, e, options.strict_t2)?;
            state_from_selection(net, &selected, z)?
        }
    };

    let mut trace = BoundsTrace {
        query: net.var(z).name.clone(),
        evidence: evidence_labels,
        abstracted: state
            .nodes
            .iter()
            .map(|&n| net.var(n).name.clone())
            .collect(),
        iterations: Vec::new(),
        converged: false,
    };
    on_event(IssaEvent::Selected(TraceHead {
        query: trace.query.clone(),
        evidence: trace.evidence.clone(),
        abstracted: trace.abstracted.clone(),
    }));

    if state.nodes.is_empty() {
        // Nothing to abstract: one exact evaluation is both bounds.
        let exact = cdf_from_pmf(&posterior(net, z, e)?);
        let record = IterationRecord {
            index: 0,
            lower: exact.clone(),
            upper: exact,
            partitions: Vec::new(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        on_event(IssaEvent::Iteration(record.clone()));
        trace.iterations.push(record);
        trace.converged = true;
        return Ok(trace);
    }

    let mut round_robin = 0usize;
    loop {
        let index = trace.iterations.len();
        let lower_plan = plan_for(&state, Bound::Lower, net, z);
        let upper_plan = plan_for(&state, Bound::Upper, net, z);
        // The two evaluations are independent; run them concurrently.
        let (lower, upper) = std::thread::scope(|scope| {
            let lower_handle = scope.spawn(|| evaluate_bound(net, &lower_plan, z, e));
            let upper_handle = scope.spawn(|| evaluate_bound(net, &upper_plan, z, e));
            (
                lower_handle.join().expect("lower evaluation panicked"),
                upper_handle.join().expect("upper evaluation panicked"),
            )
        });
        let (lower, upper) = (lower?, upper?);
        let gap = lower
            .values()
            .iter()
            .zip(upper.values())
            .map(|(lo, hi)| (hi - lo).abs())
            .fold(0.0f64, f64::max);
        let record = IterationRecord {
            index,
            lower,
            upper,
            partitions: state
                .partitions
                .iter()
                .map(|p| PartitionSnapshot {
                    node: net.var(p.variable).name.clone(),
                    blocks: p.blocks.clone(),
                })
                .collect(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        on_event(IssaEvent::Iteration(record.clone()));
        trace.iterations.push(record);

        if state.partitions.iter().all(Partition::is_all_singletons) {
            trace.converged = true;
            break;
        }
        if let Some(tol) = options.early_stop_gap {
            if gap <= tol {
                trace.converged = true;
                break;
            }
        }
        if let Some(max) = options.max_iterations {
            if trace.iterations.len() >= max {
                break;
            }
        }
        if let Some(deadline) = options.deadline {
            if start.elapsed() >= deadline {
                break;
            }
        }

        // Refine exactly one node, round-robin over those still coarse.
        let n = state.partitions.len();
        for step in 0..n {
            let i = (round_robin + step) % n;
            if let Some(refined) = split(&state.partitions[i], options.strategy) {
                state.partitions[i] = refined;
                round_robin = (i + 1) % n;
                break;
            }
        }
    }
    Ok(trace)
}
