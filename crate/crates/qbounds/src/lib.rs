//! Guaranteed lower/upper bounds on conditional CDFs in discrete Bayesian
//! networks, computed anytime-style by iterative state-space abstraction.
//!
//! The library works on networks whose variables have totally ordered state
//! spaces. When a node's children relate to the query variable through
//! decisive qualitative (first-order stochastic dominance) relationships,
//! the node's states can be aggregated into superstates and the child CPTs
//! replaced by dominance envelopes. Evaluating the resulting abstract
//! network yields a CDF that brackets the exact posterior from one side;
//! refining the aggregation tightens the bracket monotonically until it
//! converges to the exact distribution.
//!
//! Module map:
//! - [`network`]: network representation, JSON format, validation, and graph
//!   queries (descendants, ancestral orderings, d-separation).
//! - [`dominance`]: PMFs/CDFs, the FSD relation, CDF envelopes, qualitative
//!   sign detection (plain and gap-n generalized), and the monotonizing
//!   CPT transform.
//! - [`inference`]: exact posteriors by variable elimination plus the
//!   joint-enumeration oracle used in tests.
//! - [`eligibility`]: per-node applicability checks for bounding, with
//!   derived signs between non-adjacent nodes.
//! - [`abstraction`]: partitions, direction selection, and abstract-network
//!   construction under the dominance policy.
//! - [`issa`]: the anytime refinement loop and its bounds trace.
//! - [`decision`]: expected-value intervals and admissible-decision pruning
//!   under supermodular utilities.
//! - [`generator`]: seeded random networks with controllable sign structure.

pub mod abstraction;
pub mod decision;
pub mod dominance;
pub mod eligibility;
mod error;
pub mod generator;
pub mod inference;
pub mod issa;
pub mod network;

pub use abstraction::{
    abstract_child_cpt, abstract_node_cpt, build_abn, direction_for_child, AbstractionPlan, Bound,
    Direction, DirectionChoice, Partition, PlanEntry,
};
pub use decision::{
    admissible_decisions, expected_value, expected_value_interval, is_supermodular,
    supermodularity_witness, DecisionSet, UtilityTable,
};
pub use dominance::{
    cdf_from_pmf, cdf_max_envelope, cdf_min_envelope, detect_generalized_sign, detect_sign, fsd,
    monotonize_cpt, Cdf, GeneralizedSign, GeneralizedSignResult, MonotonizeDirection, Pmf, Sign,
};
pub use eligibility::{
    check_theorem1, check_theorem2, derived_sign, ChildSignReport, Eligibility, EligibilityOutcome,
    Rejection, SignFinding, SignMethod, Theorem,
};
pub use error::{Error, Result};
pub use generator::{generate_network, GeneratorConfig};
pub use inference::{brute_force_posterior, conditional_cdf_given, posterior};
pub use issa::{
    interval_probability, run_issa, run_issa_with, select_abstraction_nodes, split, BoundsTrace,
    IntervalProbability, IssaEvent, IssaOptions, IterationRecord, SplitStrategy,
};
pub use network::{
    parse_network, Arc, BayesianNetwork, Cpt, Evidence, ValidationReport, VarId, Variable,
    Violation,
};

/// Absolute tolerance for probability comparisons (row sums, posteriors,
/// FSD checks). One regime across all modules.
pub const PROB_TOL: f64 = 1e-9;

/// Slack allowed for CDF monotonicity and monotone-tightening checks.
pub const STRICT_TOL: f64 = 1e-12;

/// Most negative value a probability entry may take before it is treated
/// as a real defect rather than floating-point dust.
pub const NEG_TOL: f64 = 1e-12;

/// Row-sum drift budget after clamping envelope differencing noise.
pub const DRIFT_BUDGET: f64 = 1e-11;

/// Default cap on joint state-space size for brute-force enumeration.
pub const BRUTE_FORCE_CAP: usize = 10_000_000;
