//! First-order stochastic dominance (FSD) over discrete ordered state
//! spaces: the dominance relation itself, pointwise CDF envelopes,
//! qualitative sign detection on CPTs (plain and gap-n generalized), and
//! the monotonizing transform that forces a decisive sign onto a CPT.
//!
//! Everything here is a pure, stateless function; all comparisons use the
//! crate-wide absolute tolerance [`crate::PROB_TOL`] unless noted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Cpt, VarId};
use crate::{DRIFT_BUDGET, NEG_TOL, PROB_TOL, STRICT_TOL};

/// Qualitative sign of an influence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "?")]
    Ambiguous,
}

impl Sign {
    pub fn is_decisive(self) -> bool {
        matches!(self, Sign::Positive | Sign::Negative)
    }

    /// Sign product along a serial composition of influences.
    pub fn product(self, other: Sign) -> Sign {
        use Sign::*;
        match (self, other) {
            (Zero, _) | (_, Zero) => Zero,
            (Ambiguous, _) | (_, Ambiguous) => Ambiguous,
            (Positive, Positive) | (Negative, Negative) => Positive,
            _ => Negative,
        }
    }

    /// Sign combination across parallel influences.
    pub fn combine(self, other: Sign) -> Sign {
        use Sign::*;
        match (self, other) {
            (Zero, s) | (s, Zero) => s,
            (Ambiguous, _) | (_, Ambiguous) => Ambiguous,
            (a, b) if a == b => a,
            _ => Ambiguous,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
            Sign::Zero => "0",
            Sign::Ambiguous => "?",
        };
        f.write_str(s)
    }
}

/// A decisive sign that holds only between parent states at least `n`
/// apart. `n = 1` coincides with the plain decisive sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralizedSign {
    pub sign: Sign,
    pub n: usize,
}

/// Outcome of generalized sign detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneralizedSignResult {
    Decisive(GeneralizedSign),
    /// Dominance holds in both directions at gap 1: the rows are
    /// identical per context up to tolerance.
    Zero,
    /// No gap up to m-1 yields dominance in either direction.
    Ambiguous,
}

/// Probability mass function over an ordered state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        if let Some(&bad) = values.iter().find(|v| **v < -NEG_TOL || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("probability entry {bad}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::NonNormalized { sum });
        }
        Ok(Pmf(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Cumulative distribution function over an ordered state space; entry i
/// is the probability of the first i+1 states. The last entry is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cdf(Vec<f64>);

impl Cdf {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty CDF".into()));
        }
        for w in values.windows(2) {
            if w[1] < w[0] - STRICT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "CDF decreases from {} to {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&bad) = values
            .iter()
            .find(|v| **v < -NEG_TOL || **v > 1.0 + NEG_TOL || !v.is_finite())
        {
            return Err(Error::InvalidArgument(format!("CDF entry {bad}")));
        }
        let last = *values.last().unwrap();
        if (last - 1.0).abs() > PROB_TOL {
            return Err(Error::NonNormalized { sum: last });
        }
        Ok(Cdf(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Recovers the PMF by differencing. Negative dust above `-NEG_TOL`
    /// is clamped to zero and the row renormalized; anything more
    /// negative is a defect upstream and panics.
    pub fn to_pmf(&self) -> Pmf {
        Pmf(diff_cdf(&self.0))
    }
}

pub(crate) fn diff_cdf(cdf: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(cdf.len());
    let mut clamped = false;
    for &c in cdf {
        let d = c - prev;
        assert!(d >= -NEG_TOL, "CDF differencing produced {d}");
        if d < 0.0 {
            clamped = true;
        }
        out.push(d.max(0.0));
        prev = c;
    }
    if clamped {
        let sum: f64 = out.iter().sum();
        assert!(
            (sum - 1.0).abs() <= PROB_TOL + DRIFT_BUDGET,
            "row drifted to {sum}"
        );
        for v in &mut out {
            *v /= sum;
        }
    }
    out
}

/// Prefix sums of a PMF. The final entry is clamped to exactly 1.
pub fn cdf_from_pmf(p: &Pmf) -> Cdf {
    Cdf(cdf_values_from_row(p.values()))
}

pub(crate) fn cdf_values_from_row(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(row.len());
    for &v in row {
        acc += v;
        // Prefix sums may poke above 1 by accumulated rounding; probability
        // semantics cap them there.
        if acc > 1.0 && acc - 1.0 <= PROB_TOL {
            acc = 1.0;
        }
        out.push(acc);
    }
    if let Some(last) = out.last_mut() {
        if (*last - 1.0).abs() <= PROB_TOL {
            *last = 1.0;
        }
    }
    out
}

/// True iff `f` first-order stochastically dominates `g`: `f` lies
/// pointwise at or below `g` (within tolerance) at every state.
pub fn fsd(f: &Cdf, g: &Cdf) -> Result<bool> {
    if f.len() != g.len() {
        return Err(Error::MismatchedSpaces {
            left: f.len(),
            right: g.len(),
        });
    }
    Ok(fsd_values(f.values(), g.values()))
}

pub(crate) fn fsd_values(f: &[f64], g: &[f64]) -> bool {
    f.iter().zip(g).all(|(a, b)| *a <= *b + PROB_TOL)
}

/// Pointwise minimum of a family of CDFs over one space. The result
/// dominates every member.
pub fn cdf_min_envelope(family: &[Cdf]) -> Result<Cdf> {
    envelope(family, f64::min)
}

/// Pointwise maximum of a family of CDFs over one space. Every member
/// dominates the result.
pub fn cdf_max_envelope(family: &[Cdf]) -> Result<Cdf> {
    envelope(family, f64::max)
}

fn envelope(family: &[Cdf], pick: fn(f64, f64) -> f64) -> Result<Cdf> {
    let first = family.first().ok_or(Error::EmptyFamily)?;
    let mut out = first.values().to_vec();
    for cdf in &family[1..] {
        if cdf.len() != out.len() {
            return Err(Error::MismatchedSpaces {
                left: out.len(),
                right: cdf.len(),
            });
        }
        for (slot, &v) in out.iter_mut().zip(cdf.values()) {
            *slot = pick(*slot, v);
        }
    }
    // Pointwise min/max of nondecreasing-to-1 vectors is nondecreasing-to-1.
    Ok(Cdf(out))
}

fn cdf_columns(cpt: &Cpt, pos: usize, context: &[usize]) -> Vec<Vec<f64>> {
    (0..cpt.parent_cards()[pos])
        .map(|x| cdf_values_from_row(cpt.row_in_context(context, pos, x)))
        .collect()
}

/// Qualitative sign of parent `x` on the child of `cpt`: `+` when every
/// higher parent state yields an FSD-dominating conditional CDF in every
/// context of the other parents, `-` for the reverse, `0` when both hold
/// (identical rows up to tolerance), `?` otherwise.
pub fn detect_sign(cpt: &Cpt, x: VarId) -> Result<Sign> {
    let pos = cpt.parent_position(x).ok_or_else(|| Error::NotAParent {
        variable: x.to_string(),
    })?;
    let m = cpt.parent_cards()[pos];
    let mut plus_all = true;
    let mut minus_all = true;
    for context in cpt.contexts_excluding(pos) {
        let cdfs = cdf_columns(cpt, pos, &context);
        for i in 0..m {
            for j in (i + 1)..m {
                if !fsd_values(&cdfs[j], &cdfs[i]) {
                    plus_all = false;
                }
                if !fsd_values(&cdfs[i], &cdfs[j]) {
                    minus_all = false;
                }
                if !plus_all && !minus_all {
                    return Ok(Sign::Ambiguous);
                }
            }
        }
    }
    Ok(match (plus_all, minus_all) {
        (true, true) => Sign::Zero,
        (true, false) => Sign::Positive,
        (false, true) => Sign::Negative,
        (false, false) => unreachable!(),
    })
}

/// Smallest gap `n` at which dominance between parent states holds in one
/// direction across every context, searching upward from 1 so the
/// returned `n` is minimal. Gap n requires, for all contexts and all
/// index pairs at distance >= n, the higher state's CDF to dominate (for
/// `+`) or be dominated (for `-`).
pub fn detect_generalized_sign(cpt: &Cpt, x: VarId) -> Result<GeneralizedSignResult> {
    let pos = cpt.parent_position(x).ok_or_else(|| Error::NotAParent {
        variable: x.to_string(),
    })?;
    let m = cpt.parent_cards()[pos];
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "generalized sign needs >= 2 parent states, `{x}` has {m}"
        )));
    }
    let contexts = cpt.contexts_excluding(pos);
    let all_cdfs: Vec<Vec<Vec<f64>>> = contexts
        .iter()
        .map(|ctx| cdf_columns(cpt, pos, ctx))
        .collect();

    for n in 1..m {
        let mut plus_ok = true;
        let mut minus_ok = true;
        for cdfs in &all_cdfs {
            for i in 0..m {
                for j in (i + n)..m {
                    if !fsd_values(&cdfs[j], &cdfs[i]) {
                        plus_ok = false;
                    }
                    if !fsd_values(&cdfs[i], &cdfs[j]) {
                        minus_ok = false;
                    }
                    if !plus_ok && !minus_ok {
                        break;
                    }
                }
            }
        }
        match (plus_ok, minus_ok) {
            (true, true) if n == 1 => return Ok(GeneralizedSignResult::Zero),
            // Both directions at a gap > 1 means the constrained pairs are
            // all FSD-equal; report the positive reading deterministically.
            (true, _) => {
                return Ok(GeneralizedSignResult::Decisive(GeneralizedSign {
                    sign: Sign::Positive,
                    n,
                }))
            }
            (false, true) => {
                return Ok(GeneralizedSignResult::Decisive(GeneralizedSign {
                    sign: Sign::Negative,
                    n,
                }))
            }
            (false, false) => {}
        }
    }
    Ok(GeneralizedSignResult::Ambiguous)
}

/// Which way the monotonizing transform may move the CDFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonotonizeDirection {
    /// New CDFs lie pointwise at or above the originals.
    Raise,
    /// New CDFs lie pointwise at or below the originals.
    Lower,
}

/// Replaces each conditional CDF along parent `x` by a running
/// prefix/suffix envelope so the result carries the decisive
/// `target_sign`, moving every CDF only in `direction`. Rows are
/// re-derived from the transformed CDFs by differencing. Already-conforming
/// CPTs come back unchanged, which also makes the transform idempotent.
pub fn monotonize_cpt(
    cpt: &Cpt,
    x: VarId,
    target_sign: Sign,
    direction: MonotonizeDirection,
) -> Result<Cpt> {
    if !target_sign.is_decisive() {
        return Err(Error::AmbiguousSign);
    }
    let pos = cpt.parent_position(x).ok_or_else(|| Error::NotAParent {
        variable: x.to_string(),
    })?;
    let m = cpt.parent_cards()[pos];
    let mut rows = cpt.rows().to_vec();

    for context in cpt.contexts_excluding(pos) {
        let originals = cdf_columns(cpt, pos, &context);
        let mut cdfs = originals.clone();
        // A `+` sign needs CDFs pointwise nonincreasing in the parent
        // index, `-` needs nondecreasing. Raising takes the running max
        // from the side that leaves the extreme state fixed; lowering
        // mirrors with the running min.
        use MonotonizeDirection::*;
        use Sign::*;
        match (target_sign, direction) {
            (Positive, Raise) => running_envelope_rev(&mut cdfs, f64::max),
            (Positive, Lower) => running_envelope_fwd(&mut cdfs, f64::min),
            (Negative, Raise) => running_envelope_fwd(&mut cdfs, f64::max),
            (Negative, Lower) => running_envelope_rev(&mut cdfs, f64::min),
            _ => unreachable!(),
        }
        for (x_state, cdf) in cdfs.iter().enumerate().take(m) {
            if *cdf == originals[x_state] {
                continue; // untouched CDF keeps its original row bit-exactly
            }
            let mut full = context.clone();
            full[pos] = x_state;
            let idx = cpt.row_index(&full);
            rows[idx] = diff_cdf(cdf);
        }
    }

    let out = Cpt::new(
        cpt.child(),
        cpt.parents().to_vec(),
        cpt.parent_cards().to_vec(),
        cpt.child_card(),
        rows,
    )?;
    debug_assert!(detect_postcondition(&out, x, target_sign));
    Ok(out)
}

fn running_envelope_fwd(cdfs: &mut [Vec<f64>], pick: fn(f64, f64) -> f64) {
    for i in 1..cdfs.len() {
        for s in 0..cdfs[i].len() {
            cdfs[i][s] = pick(cdfs[i][s], cdfs[i - 1][s]);
        }
    }
}

fn running_envelope_rev(cdfs: &mut [Vec<f64>], pick: fn(f64, f64) -> f64) {
    for i in (0..cdfs.len().saturating_sub(1)).rev() {
        for s in 0..cdfs[i].len() {
            cdfs[i][s] = pick(cdfs[i][s], cdfs[i + 1][s]);
        }
    }
}

fn detect_postcondition(cpt: &Cpt, x: VarId, target: Sign) -> bool {
    match detect_sign(cpt, x) {
        // Zero satisfies either decisive pattern vacuously.
        Ok(s) => s == target || s == Sign::Zero,
        Err(_) => false,
    }
}
