//! Network representation, validation, the JSON text format, and the
//! structural graph queries (descendants, ancestral orderings,
//! d-separation) that the bounding theorems' conditions are built from.
//!
//! A [`BayesianNetwork`] is immutable after construction and safe to share
//! across threads; every operation in this module is a pure function of
//! its inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dominance::{detect_sign, Sign};
use crate::error::{Error, Result};
use crate::PROB_TOL;

/// Index of a variable within its network. Stable across clones of the
/// same network; never valid across different networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A discrete variable with a totally ordered state space. State order is
/// exactly the declared order: index 0 is the smallest state. Boolean
/// variables follow the modeling convention false < true, but the order is
/// never inferred from labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// A directed arc, optionally annotated with a declared qualitative sign.
/// Declared signs are hints; the sign derived from the child's CPT is
/// authoritative and the two are checked for consistency at validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: VarId,
    pub to: VarId,
    pub sign: Option<Sign>,
}

/// Conditional probability table of one variable given its parents.
///
/// Rows are stored densely in row-major order over the declared parent
/// order, last parent varying fastest. Each row is a probability vector
/// over the child's states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    child: VarId,
    parents: Vec<VarId>,
    parent_cards: Vec<usize>,
    child_card: usize,
    rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(
        child: VarId,
        parents: Vec<VarId>,
        parent_cards: Vec<usize>,
        child_card: usize,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if parents.len() != parent_cards.len() {
            return Err(Error::MalformedCpt {
                child: child.to_string(),
                detail: "parent list and cardinality list differ in length".into(),
            });
        }
        let expected: usize = parent_cards.iter().product();
        if rows.len() != expected {
            return Err(Error::MalformedCpt {
                child: child.to_string(),
                detail: format!("{} rows, expected {}", rows.len(), expected),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != child_card) {
            return Err(Error::MalformedCpt {
                child: child.to_string(),
                detail: format!("row of length {}, expected {}", bad.len(), child_card),
            });
        }
        Ok(Cpt {
            child,
            parents,
            parent_cards,
            child_card,
            rows,
        })
    }

    pub fn child(&self) -> VarId {
        self.child
    }

    pub fn parents(&self) -> &[VarId] {
        &self.parents
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn child_card(&self) -> usize {
        self.child_card
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Position of `x` in the parent list, if it is a parent.
    pub fn parent_position(&self, x: VarId) -> Option<usize> {
        self.parents.iter().position(|&p| p == x)
    }

    /// Row index for a full parent instantiation (declared order).
    pub fn row_index(&self, parent_states: &[usize]) -> usize {
        debug_assert_eq!(parent_states.len(), self.parents.len());
        let mut idx = 0;
        for (s, &card) in parent_states.iter().zip(&self.parent_cards) {
            debug_assert!(*s < card);
            idx = idx * card + s;
        }
        idx
    }

    /// Inverse of [`Cpt::row_index`].
    pub fn decode_row_index(&self, mut idx: usize) -> Vec<usize> {
        let mut states = vec![0; self.parents.len()];
        for (slot, &card) in states.iter_mut().zip(&self.parent_cards).rev() {
            *slot = idx % card;
            idx /= card;
        }
        states
    }

    pub fn row(&self, parent_states: &[usize]) -> &[f64] {
        &self.rows[self.row_index(parent_states)]
    }

    /// Enumerates instantiations of every parent except the one at
    /// `skip_pos`, as full-length vectors with that slot left 0.
    pub fn contexts_excluding(&self, skip_pos: usize) -> Vec<Vec<usize>> {
        let mut contexts = vec![vec![0; self.parents.len()]];
        for (pos, &card) in self.parent_cards.iter().enumerate() {
            if pos == skip_pos {
                continue;
            }
            let mut next = Vec::with_capacity(contexts.len() * card);
            for ctx in &contexts {
                for s in 0..card {
                    let mut c = ctx.clone();
                    c[pos] = s;
                    next.push(c);
                }
            }
            contexts = next;
        }
        contexts
    }

    /// Row for a context with the distinguished parent set to `x_state`.
    pub fn row_in_context(&self, context: &[usize], pos: usize, x_state: usize) -> &[f64] {
        let mut full = context.to_vec();
        full[pos] = x_state;
        self.row(&full)
    }
}

/// Hard evidence: an assignment of states to a set of variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    assignments: BTreeMap<VarId, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, usize)>) -> Self {
        Evidence {
            assignments: pairs.into_iter().collect(),
        }
    }

    pub fn assign(&mut self, var: VarId, state: usize) {
        self.assignments.insert(var, state);
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.assignments.get(&var).copied()
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.assignments.contains_key(&var)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.assignments.iter().map(|(&v, &s)| (v, s))
    }

    pub fn variables(&self) -> impl Iterator<Item = VarId> + '_ {
        self.assignments.keys().copied()
    }

    /// Union with another assignment set; later entries win on overlap.
    pub fn extended(&self, extra: impl IntoIterator<Item = (VarId, usize)>) -> Self {
        let mut out = self.clone();
        for (v, s) in extra {
            out.assign(v, s);
        }
        out
    }
}

/// One validation finding. Findings are data, not errors: `validate`
/// reports all of them at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Cycle {
        involving: String,
    },
    DuplicateStateLabel {
        variable: String,
        label: String,
    },
    EmptyStateSpace {
        variable: String,
    },
    CptParentMismatch {
        child: String,
        detail: String,
    },
    NonNormalizedRow {
        child: String,
        row: usize,
        sum: f64,
    },
    EntryOutOfRange {
        child: String,
        row: usize,
        value: f64,
    },
    SignInconsistency {
        from: String,
        to: String,
        declared: Sign,
        detected: Sign,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { involving } => write!(f, "cycle involving {involving}"),
            Violation::DuplicateStateLabel { variable, label } => {
                write!(f, "duplicate state label `{label}` in `{variable}`")
            }
            Violation::EmptyStateSpace { variable } => {
                write!(f, "variable `{variable}` has no states")
            }
            Violation::CptParentMismatch { child, detail } => {
                write!(
                    f,
                    "CPT of `{child}` does not match its incoming arcs: {detail}"
                )
            }
            Violation::NonNormalizedRow { child, row, sum } => {
                write!(f, "CPT row {row} of `{child}` sums to {sum}")
            }
            Violation::EntryOutOfRange { child, row, value } => {
                write!(
                    f,
                    "CPT row {row} of `{child}` has entry {value} outside [0, 1]"
                )
            }
            Violation::SignInconsistency {
                from,
                to,
                declared,
                detected,
            } => {
                write!(
                    f,
                    "arc {from} -> {to} declared `{declared}` but its CPT shows `{detected}`"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// A discrete Bayesian network: DAG of ordered-state variables with one
/// CPT per variable and optional qualitative sign annotations on arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetwork {
    variables: Vec<Variable>,
    arcs: Vec<Arc>,
    cpts: Vec<Cpt>,
    children: Vec<Vec<VarId>>,
}

impl BayesianNetwork {
    /// Builds and validates a network. Fails with [`Error::Invalid`] when
    /// the validation report is nonempty.
    pub fn new(variables: Vec<Variable>, arcs: Vec<Arc>, cpts: Vec<Cpt>) -> Result<Self> {
        let net = Self::from_parts(variables, arcs, cpts)?;
        let report = net.validate();
        if report.is_clean() {
            Ok(net)
        } else {
            Err(Error::Invalid(report))
        }
    }

    /// Builds a network without semantic validation, checking only shape
    /// (id bounds, one CPT per variable). Used to construct a value that
    /// `validate` can then report on.
    pub fn from_parts(
        variables: Vec<Variable>,
        arcs: Vec<Arc>,
        mut cpts: Vec<Cpt>,
    ) -> Result<Self> {
        let n = variables.len();
        let in_bounds = |id: VarId| id.0 < n;
        if let Some(arc) = arcs.iter().find(|a| !in_bounds(a.from) || !in_bounds(a.to)) {
            return Err(Error::UnknownVariable(format!("{}", arc.from)));
        }
        if cpts.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} CPTs for {} variables",
                cpts.len(),
                n
            )));
        }
        cpts.sort_by_key(|c| c.child().0);
        for (i, cpt) in cpts.iter().enumerate() {
            if cpt.child().0 != i {
                return Err(Error::MalformedCpt {
                    child: format!("#{i}"),
                    detail: "missing or duplicate CPT".into(),
                });
            }
        }
        let mut children = vec![Vec::new(); n];
        for arc in &arcs {
            children[arc.from.0].push(arc.to);
        }
        for ch in &mut children {
            ch.sort();
            ch.dedup();
        }
        Ok(BayesianNetwork {
            variables,
            arcs,
            cpts,
            children,
        })
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(VarId)
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.variables.len()).map(VarId)
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn cpt(&self, id: VarId) -> &Cpt {
        &self.cpts[id.0]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn children(&self, id: VarId) -> &[VarId] {
        &self.children[id.0]
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        self.cpts[id.0].parents()
    }

    pub fn state_count(&self, id: VarId) -> usize {
        self.variables[id.0].state_count()
    }

    /// Total joint state-space size, saturating on overflow.
    pub fn joint_size(&self) -> usize {
        self.variables
            .iter()
            .fold(1usize, |acc, v| acc.saturating_mul(v.state_count()))
    }

    /// Topological order of the DAG, or `None` when the arcs contain a
    /// cycle.
    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.var_count();
        let mut indegree = vec![0usize; n];
        for arc in &self.arcs {
            indegree[arc.to.0] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        queue.sort_unstable();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            order.push(VarId(u));
            for &c in &self.children[u] {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    queue.push(c.0);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// True iff a directed path `v -> ... -> u` exists, i.e. `u` is a
    /// descendant of `v`. A node is not its own descendant.
    pub fn is_descendant(&self, u: VarId, v: VarId) -> Result<bool> {
        self.check_id(u)?;
        self.check_id(v)?;
        Ok(self.descendants(v).contains(&u))
    }

    /// All strict descendants of `v`.
    pub fn descendants(&self, v: VarId) -> BTreeSet<VarId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<VarId> = self.children[v.0].to_vec();
        while let Some(node) = stack.pop() {
            if seen.insert(node) {
                stack.extend(self.children[node.0].iter().copied());
            }
        }
        seen
    }

    /// True iff some ancestral ordering of `E ∪ {a} ∪ Y` places every
    /// member of `E` before `a` and `a` before every member of `Y`.
    ///
    /// Equivalent graphical test: no member of `E` descends from `a` or
    /// from any member of `Y`, and `a` descends from no member of `Y`.
    pub fn ancestral_order_exists(
        &self,
        evidence_vars: &BTreeSet<VarId>,
        a: VarId,
        y: &BTreeSet<VarId>,
    ) -> Result<bool> {
        self.check_id(a)?;
        for &v in evidence_vars.iter().chain(y.iter()) {
            self.check_id(v)?;
        }
        if evidence_vars.contains(&a) || y.contains(&a) || !evidence_vars.is_disjoint(y) {
            return Err(Error::InvalidArgument(
                "ancestral ordering sets must be disjoint".into(),
            ));
        }
        let desc_a = self.descendants(a);
        if evidence_vars.iter().any(|e| desc_a.contains(e)) {
            return Ok(false);
        }
        for &yv in y {
            let desc_y = self.descendants(yv);
            if desc_y.contains(&a) || evidence_vars.iter().any(|e| desc_y.contains(e)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Standard d-separation of `x` from `w` given `s`, by reachability
    /// over active trails. Chains and forks are blocked by an observed
    /// midpoint; a collider is open iff it or one of its descendants is
    /// observed.
    pub fn d_separated(&self, x: VarId, w: VarId, s: &BTreeSet<VarId>) -> Result<bool> {
        self.check_id(x)?;
        self.check_id(w)?;
        for &v in s {
            self.check_id(v)?;
        }
        if x == w {
            return Err(Error::InvalidArgument(
                "d-separation endpoints must differ".into(),
            ));
        }
        if s.contains(&x) || s.contains(&w) {
            return Err(Error::InvalidArgument(
                "d-separation endpoints must not be conditioned on".into(),
            ));
        }
        // Nodes that are in s or have a descendant in s open colliders.
        let mut opens_collider = s.clone();
        for &v in s {
            for id in self.var_ids() {
                if opens_collider.contains(&id) {
                    continue;
                }
                if self.descendants(id).contains(&v) {
                    opens_collider.insert(id);
                }
            }
        }

        // Reachability over (node, arrived-from-child?) states. The start
        // node behaves as if entered from a child, which permits leaving
        // through both parents and children.
        const FROM_CHILD: usize = 0;
        const FROM_PARENT: usize = 1;
        let n = self.var_count();
        let mut visited = vec![[false; 2]; n];
        let mut stack = vec![(x, FROM_CHILD)];
        while let Some((node, dir)) = stack.pop() {
            if visited[node.0][dir] {
                continue;
            }
            visited[node.0][dir] = true;
            if node == w {
                return Ok(false);
            }
            let observed = s.contains(&node);
            match dir {
                FROM_CHILD => {
                    if !observed {
                        for &p in self.parents(node) {
                            stack.push((p, FROM_CHILD));
                        }
                        for &c in self.children(node) {
                            stack.push((c, FROM_PARENT));
                        }
                    }
                }
                _ => {
                    if !observed {
                        for &c in self.children(node) {
                            stack.push((c, FROM_PARENT));
                        }
                    }
                    if opens_collider.contains(&node) {
                        for &p in self.parents(node) {
                            stack.push((p, FROM_CHILD));
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// Checks every structural and numeric invariant, returning all
    /// findings. An empty report means the network is well-formed.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        for v in &self.variables {
            if v.states.is_empty() {
                violations.push(Violation::EmptyStateSpace {
                    variable: v.name.clone(),
                });
            }
            let mut seen = BTreeSet::new();
            for label in &v.states {
                if !seen.insert(label) {
                    violations.push(Violation::DuplicateStateLabel {
                        variable: v.name.clone(),
                        label: label.clone(),
                    });
                }
            }
        }

        if self.topological_order().is_none() {
            let in_cycle = self
                .var_ids()
                .find(|&v| self.descendants(v).contains(&v))
                .map(|v| self.var(v).name.clone())
                .unwrap_or_else(|| "<unknown>".into());
            violations.push(Violation::Cycle {
                involving: in_cycle,
            });
        }

        for id in self.var_ids() {
            let cpt = self.cpt(id);
            let name = &self.var(id).name;
            let mut arc_parents: Vec<VarId> = self
                .arcs
                .iter()
                .filter(|a| a.to == id)
                .map(|a| a.from)
                .collect();
            arc_parents.sort();
            arc_parents.dedup();
            let mut cpt_parents = cpt.parents().to_vec();
            cpt_parents.sort();
            if arc_parents != cpt_parents {
                violations.push(Violation::CptParentMismatch {
                    child: name.clone(),
                    detail: format!(
                        "arcs give {:?}, CPT lists {:?}",
                        arc_parents
                            .iter()
                            .map(|&p| &self.var(p).name)
                            .collect::<Vec<_>>(),
                        cpt.parents()
                            .iter()
                            .map(|&p| &self.var(p).name)
                            .collect::<Vec<_>>(),
                    ),
                });
            }
            for (card, &p) in cpt.parent_cards().iter().zip(cpt.parents()) {
                if p.0 < self.var_count() && *card != self.state_count(p) {
                    violations.push(Violation::CptParentMismatch {
                        child: name.clone(),
                        detail: format!(
                            "cardinality {} recorded for parent `{}` with {} states",
                            card,
                            self.var(p).name,
                            self.state_count(p)
                        ),
                    });
                }
            }
            if cpt.child_card() != self.state_count(id) {
                violations.push(Violation::CptParentMismatch {
                    child: name.clone(),
                    detail: format!(
                        "rows of length {}, variable has {} states",
                        cpt.child_card(),
                        self.state_count(id)
                    ),
                });
            }
            for (i, row) in cpt.rows().iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    violations.push(Violation::NonNormalizedRow {
                        child: name.clone(),
                        row: i,
                        sum,
                    });
                }
                for &v in row {
                    if !(-crate::NEG_TOL..=1.0 + PROB_TOL).contains(&v) {
                        violations.push(Violation::EntryOutOfRange {
                            child: name.clone(),
                            row: i,
                            value: v,
                        });
                    }
                }
            }
        }

        // Declared arc signs must agree with the CPT-derived sign. A
        // detected 0 satisfies any declaration (dominance holds both
        // ways); `?` declarations claim nothing.
        for arc in &self.arcs {
            let Some(declared) = arc.sign else { continue };
            if declared == Sign::Ambiguous {
                continue;
            }
            let cpt = self.cpt(arc.to);
            if cpt.parent_position(arc.from).is_none() {
                continue; // already reported as a parent mismatch
            }
            if let Ok(detected) = detect_sign(cpt, arc.from) {
                let consistent = detected == declared || detected == Sign::Zero;
                if !consistent {
                    violations.push(Violation::SignInconsistency {
                        from: self.var(arc.from).name.clone(),
                        to: self.var(arc.to).name.clone(),
                        declared,
                        detected,
                    });
                }
            }
        }

        ValidationReport { violations }
    }

    /// Parses evidence given by state labels, e.g. from `A=a2,E=true`.
    pub fn evidence_from_labels<'a>(
        &self,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Evidence> {
        let mut e = Evidence::new();
        for (var, state) in pairs {
            let id = self
                .var_id(var)
                .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
            let s = self
                .var(id)
                .state_index(state)
                .ok_or_else(|| Error::UnknownState {
                    variable: var.to_string(),
                    state: state.to_string(),
                })?;
            e.assign(id, s);
        }
        Ok(e)
    }

    fn check_id(&self, id: VarId) -> Result<()> {
        if id.0 < self.var_count() {
            Ok(())
        } else {
            Err(Error::UnknownVariable(id.to_string()))
        }
    }
}

// ---------------------------------------------------------------------------
// JSON document format

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    variables: Vec<Variable>,
    #[serde(default)]
    arcs: Vec<ArcDoc>,
    cpts: Vec<CptDoc>,
}

#[derive(Serialize, Deserialize)]
struct ArcDoc {
    from: String,
    to: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sign: Option<Sign>,
}

#[derive(Serialize, Deserialize)]
struct CptDoc {
    child: String,
    parents: Vec<String>,
    rows: Vec<RowDoc>,
}

#[derive(Serialize, Deserialize)]
struct RowDoc {
    given: Vec<usize>,
    p: Vec<f64>,
}

/// Parses the JSON network format and validates the result. Declared
/// state order is preserved exactly; nothing is inferred from labels.
pub fn parse_network(text: &str) -> Result<BayesianNetwork> {
    let net = parse_network_unchecked(text)?;
    let report = net.validate();
    if report.is_clean() {
        Ok(net)
    } else {
        Err(Error::Invalid(report))
    }
}

/// Parses the JSON network format without running semantic validation.
/// Structural defects (unknown references, malformed tables) still fail;
/// the result may carry violations that [`BayesianNetwork::validate`]
/// will report.
pub fn parse_network_unchecked(text: &str) -> Result<BayesianNetwork> {
    let doc: NetworkDoc = serde_json::from_str(text)?;

    let mut names = BTreeSet::new();
    for v in &doc.variables {
        if !names.insert(v.name.clone()) {
            return Err(Error::DuplicateVariable(v.name.clone()));
        }
    }
    let lookup = |name: &str| -> Result<VarId> {
        doc.variables
            .iter()
            .position(|v| v.name == name)
            .map(VarId)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    };

    let mut arcs = Vec::with_capacity(doc.arcs.len());
    for a in &doc.arcs {
        arcs.push(Arc {
            from: lookup(&a.from)?,
            to: lookup(&a.to)?,
            sign: a.sign,
        });
    }

    let mut cpts = Vec::with_capacity(doc.cpts.len());
    for c in &doc.cpts {
        let child = lookup(&c.child)?;
        let child_card = doc.variables[child.0].state_count();
        let parents: Vec<VarId> = c.parents.iter().map(|p| lookup(p)).collect::<Result<_>>()?;
        let parent_cards: Vec<usize> = parents
            .iter()
            .map(|&p| doc.variables[p.0].state_count())
            .collect();
        let row_count: usize = parent_cards.iter().product();
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; row_count];
        let template = Cpt::new(
            child,
            parents.clone(),
            parent_cards.clone(),
            child_card,
            vec![vec![0.0; child_card]; row_count],
        )?;
        for row in &c.rows {
            if row.given.len() != parents.len() {
                return Err(Error::MalformedCpt {
                    child: c.child.clone(),
                    detail: format!(
                        "`given` lists {} indices for {} parents",
                        row.given.len(),
                        parents.len()
                    ),
                });
            }
            for (g, &card) in row.given.iter().zip(&parent_cards) {
                if *g >= card {
                    return Err(Error::MalformedCpt {
                        child: c.child.clone(),
                        detail: format!(
                            "`given` index {g} out of range (parent has {card} states)"
                        ),
                    });
                }
            }
            let idx = template.row_index(&row.given);
            if rows[idx].is_some() {
                return Err(Error::MalformedCpt {
                    child: c.child.clone(),
                    detail: format!("duplicate row for parent states {:?}", row.given),
                });
            }
            if row.p.len() != child_card {
                return Err(Error::MalformedCpt {
                    child: c.child.clone(),
                    detail: format!(
                        "probability vector of length {}, child has {} states",
                        row.p.len(),
                        child_card
                    ),
                });
            }
            rows[idx] = Some(row.p.clone());
        }
        let mut dense = Vec::with_capacity(row_count);
        for (idx, row) in rows.into_iter().enumerate() {
            match row {
                Some(r) => dense.push(r),
                None => {
                    return Err(Error::MalformedCpt {
                        child: c.child.clone(),
                        detail: format!(
                            "missing row for parent states {:?}",
                            template.decode_row_index(idx)
                        ),
                    })
                }
            }
        }
        cpts.push(Cpt::new(child, parents, parent_cards, child_card, dense)?);
    }

    BayesianNetwork::from_parts(doc.variables, arcs, cpts)
}

/// Serializes a network back to the JSON document format. Rows are
/// emitted in row-index order; reparsing reproduces the network with
/// bit-identical CPT values.
pub fn network_to_json(net: &BayesianNetwork) -> String {
    let doc = NetworkDoc {
        variables: net.variables().to_vec(),
        arcs: net
            .arcs()
            .iter()
            .map(|a| ArcDoc {
                from: net.var(a.from).name.clone(),
                to: net.var(a.to).name.clone(),
                sign: a.sign,
            })
            .collect(),
        cpts: net
            .var_ids()
            .map(|id| {
                let cpt = net.cpt(id);
                CptDoc {
                    child: net.var(id).name.clone(),
                    parents: cpt
                        .parents()
                        .iter()
                        .map(|&p| net.var(p).name.clone())
                        .collect(),
                    rows: (0..cpt.row_count())
                        .map(|i| RowDoc {
                            given: cpt.decode_row_index(i),
                            p: cpt.rows()[i].clone(),
                        })
                        .collect(),
                }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("network serialization cannot fail")
}
