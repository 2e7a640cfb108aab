//! Expected-value intervals from bracketing CDFs and admissible-decision
//! pruning under supermodular utilities.
//!
//! For a nondecreasing value assignment, the pointwise-larger CDF is
//! stochastically smaller and therefore yields the smaller expectation,
//! so a bracketing pair of CDFs produces a guaranteed interval for the
//! expected value. Supermodularity makes the optimal decision monotone in
//! the outcome, which turns that interval into a contiguous range of
//! decisions that can still be optimal; everything outside is pruned.

use serde::{Deserialize, Serialize};

use crate::dominance::{fsd, Cdf};
use crate::error::{Error, Result};
use crate::{PROB_TOL, STRICT_TOL};

/// A finite utility table u(d, x) over ordered decision and outcome
/// grids. Grid values must be strictly increasing: the supermodularity
/// inequality quantifies over value order, and the order is the table
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UtilityTableDoc")]
pub struct UtilityTable {
    decisions: Vec<f64>,
    outcomes: Vec<f64>,
    /// Row-major by decision: `values[d][x]`.
    values: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct UtilityTableDoc {
    decisions: Vec<f64>,
    outcomes: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<UtilityTableDoc> for UtilityTable {
    type Error = Error;
    fn try_from(doc: UtilityTableDoc) -> Result<Self> {
        UtilityTable::new(doc.decisions, doc.outcomes, doc.values)
    }
}

impl UtilityTable {
    pub fn new(decisions: Vec<f64>, outcomes: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if decisions.is_empty() || outcomes.is_empty() {
            return Err(Error::InvalidArgument(
                "empty decision or outcome grid".into(),
            ));
        }
        for grid in [&decisions, &outcomes] {
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidArgument(
                    "decision and outcome grids must be strictly increasing".into(),
                ));
            }
        }
        if values.len() != decisions.len() || values.iter().any(|row| row.len() != outcomes.len()) {
            return Err(Error::InvalidArgument(format!(
                "utility table must be {} x {}",
                decisions.len(),
                outcomes.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "utility values must be finite".into(),
            ));
        }
        Ok(UtilityTable {
            decisions,
            outcomes,
            values,
        })
    }

    /// Squared-error utility u(d, x) = -(d - x)^2 on the given grids.
    pub fn squared_error(decisions: Vec<f64>, outcomes: Vec<f64>) -> Result<Self> {
        let values = decisions
            .iter()
            .map(|&d| outcomes.iter().map(|&x| -(d - x) * (d - x)).collect())
            .collect();
        UtilityTable::new(decisions, outcomes, values)
    }

    pub fn decisions(&self) -> &[f64] {
        &self.decisions
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn value(&self, d: usize, x: usize) -> f64 {
        self.values[d][x]
    }

    /// Smallest maximizer index of u(., x_idx).
    pub fn min_argmax(&self, x_idx: usize) -> usize {
        let best = self
            .values
            .iter()
            .map(|row| row[x_idx])
            .fold(f64::NEG_INFINITY, f64::max);
        self.values
            .iter()
            .position(|row| row[x_idx] >= best - STRICT_TOL)
            .unwrap()
    }

    /// Largest maximizer index of u(., x_idx).
    pub fn max_argmax(&self, x_idx: usize) -> usize {
        let best = self
            .values
            .iter()
            .map(|row| row[x_idx])
            .fold(f64::NEG_INFINITY, f64::max);
        self.values
            .iter()
            .rposition(|row| row[x_idx] >= best - STRICT_TOL)
            .unwrap()
    }
}

/// Expected value of a per-state value assignment under a CDF: the sum
/// of `values[i]` weighted by the probability mass of state i.
pub fn expected_value(cdf: &Cdf, values: &[f64]) -> Result<f64> {
    if values.len() != cdf.len() {
        return Err(Error::MismatchedSpaces {
            left: cdf.len(),
            right: values.len(),
        });
    }
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (&v, &c) in values.iter().zip(cdf.values()) {
        acc += v * (c - prev);
        prev = c;
    }
    Ok(acc)
}

/// Guaranteed interval for the expected value of a nondecreasing value
/// assignment from a bracketing CDF pair. The upper CDF is
/// stochastically smaller, so it supplies the low end.
pub fn expected_value_interval(lower: &Cdf, upper: &Cdf, values: &[f64]) -> Result<(f64, f64)> {
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::DecreasingValues);
    }
    if !fsd(lower, upper)? {
        return Err(Error::NonBracketing);
    }
    let lo = expected_value(upper, values)?;
    let hi = expected_value(lower, values)?;
    debug_assert!(lo <= hi + PROB_TOL);
    Ok((lo.min(hi), hi))
}

/// Full-pair supermodularity check: for all d1 <= d2 and x1 <= x2,
/// u(d1,x2) + u(d2,x1) <= u(d1,x1) + u(d2,x2). Adjacent pairs would
/// suffice by the standard lattice argument; the full scan keeps the
/// check independent of that argument at these table sizes.
pub fn is_supermodular(u: &UtilityTable) -> bool {
    supermodularity_witness(u).is_none()
}

/// First quadruple (d1, d2, x1, x2) violating supermodularity, if any.
pub fn supermodularity_witness(u: &UtilityTable) -> Option<(usize, usize, usize, usize)> {
    let nd = u.decisions.len();
    let nx = u.outcomes.len();
    for d1 in 0..nd {
        for d2 in (d1 + 1)..nd {
            for x1 in 0..nx {
                for x2 in (x1 + 1)..nx {
                    if u.value(d1, x2) + u.value(d2, x1)
                        > u.value(d1, x1) + u.value(d2, x2) + STRICT_TOL
                    {
                        return Some((d1, d2, x1, x2));
                    }
                }
            }
        }
    }
    None
}

/// Contiguous range of decision indices that may still be optimal.
/// Contiguity is what supermodularity buys: the optimal decision is
/// monotone in the outcome, so an outcome interval maps to a decision
/// interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSet {
    pub lo: usize,
    pub hi: usize,
}

impl DecisionSet {
    pub fn contains(&self, d: usize) -> bool {
        self.lo <= d && d <= self.hi
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false // lo <= hi by construction
    }

    pub fn is_subset_of(&self, other: &DecisionSet) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

/// Admissible decisions for an expected-outcome interval under a
/// supermodular utility: from the smallest maximizer at the nearest grid
/// outcome at-or-below the interval's low end to the largest maximizer at
/// the nearest grid outcome at-or-above its high end. Non-grid endpoints
/// use the enclosing grid outcomes (never interpolation); endpoints
/// within 1e-9 of a grid value snap to it; endpoints beyond the grid
/// clamp to it. The result contains every maximizer attainable at grid
/// outcomes inside the interval.
pub fn admissible_decisions(u: &UtilityTable, x_interval: (f64, f64)) -> Result<DecisionSet> {
    if let Some((d1, d2, x1, x2)) = supermodularity_witness(u) {
        return Err(Error::NotSupermodular { d1, d2, x1, x2 });
    }
    let (mut lo, mut hi) = x_interval;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidArgument(format!(
            "bad outcome interval ({lo}, {hi})"
        )));
    }
    let first = *u.outcomes.first().unwrap();
    let last = *u.outcomes.last().unwrap();
    lo = lo.clamp(first, last);
    hi = hi.clamp(first, last);

    let floor_idx = grid_at_or_below(&u.outcomes, lo);
    let ceil_idx = grid_at_or_above(&u.outcomes, hi);
    let d_lo = u.min_argmax(floor_idx);
    let d_hi = u.max_argmax(ceil_idx);
    debug_assert!(d_lo <= d_hi, "argmax monotonicity violated");
    Ok(DecisionSet {
        lo: d_lo.min(d_hi),
        hi: d_hi.max(d_lo),
    })
}

fn grid_at_or_below(grid: &[f64], x: f64) -> usize {
    // Snap near-grid values so converged (width ~1e-9) intervals around a
    // grid outcome behave like exact hits.
    if let Some(i) = grid.iter().position(|&g| (g - x).abs() <= PROB_TOL) {
        return i;
    }
    grid.iter().rposition(|&g| g <= x).unwrap_or(0)
}

fn grid_at_or_above(grid: &[f64], x: f64) -> usize {
    if let Some(i) = grid.iter().position(|&g| (g - x).abs() <= PROB_TOL) {
        return i;
    }
    grid.iter().position(|&g| g >= x).unwrap_or(grid.len() - 1)
}
