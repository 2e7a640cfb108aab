//! Seeded random networks for tests and demos. The same seed and
//! configuration always produce the byte-identical network.
//!
//! Arcs can be forced to carry decisive qualitative signs: after sampling
//! a child's CPT, the conditional CDFs along a flagged parent are sorted
//! per coordinate so the rows become totally FSD-ordered in that parent,
//! per context of the other parents. Sorting one parent's axis preserves
//! the order already installed on another's, so several parents of the
//! same child can be made decisive in sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dominance::{cdf_values_from_row, diff_cdf, Sign};
use crate::error::Result;
use crate::network::{Arc, BayesianNetwork, Cpt, VarId, Variable};

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub nodes: usize,
    /// States per variable are drawn uniformly from 2..=max_states.
    pub max_states: usize,
    pub max_parents: usize,
    /// Probability that an arc is forced to carry a decisive sign.
    pub monotone_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            nodes: 5,
            max_states: 4,
            max_parents: 2,
            monotone_fraction: 0.8,
        }
    }
}

/// Deterministic random DAG with sampled CPTs. Declared signs are written
/// on the arcs that were forced monotone; validation always passes.
pub fn generate_network(seed: u64, cfg: &GeneratorConfig) -> Result<BayesianNetwork> {
    assert!(
        cfg.nodes >= 1 && cfg.max_states >= 2,
        "degenerate generator configuration"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let variables: Vec<Variable> = (0..cfg.nodes)
        .map(|i| {
            let m = rng.gen_range(2..=cfg.max_states);
            Variable {
                name: format!("N{i}"),
                states: (0..m).map(|s| format!("s{s}")).collect(),
            }
        })
        .collect();

    let mut arcs: Vec<Arc> = Vec::new();
    let mut cpts: Vec<Cpt> = Vec::new();
    for j in 0..cfg.nodes {
        let child = VarId(j);
        let child_card = variables[j].states.len();
        let cap = j.min(cfg.max_parents);
        let parent_count = if cap == 0 { 0 } else { rng.gen_range(0..=cap) };
        let mut pool: Vec<usize> = (0..j).collect();
        // Partial Fisher-Yates keeps the draw order seed-stable.
        for k in 0..parent_count {
            let pick = rng.gen_range(k..pool.len());
            pool.swap(k, pick);
        }
        let mut parents: Vec<VarId> = pool[..parent_count].iter().map(|&i| VarId(i)).collect();
        parents.sort();
        let parent_cards: Vec<usize> = parents
            .iter()
            .map(|&p| variables[p.0].states.len())
            .collect();

        let row_count: usize = parent_cards.iter().product();
        let rows: Vec<Vec<f64>> = (0..row_count)
            .map(|_| sample_row(&mut rng, child_card))
            .collect();
        let mut cpt = Cpt::new(child, parents.clone(), parent_cards, child_card, rows)?;

        for (pos, &p) in parents.iter().enumerate() {
            let sign = if rng.gen_bool(cfg.monotone_fraction.clamp(0.0, 1.0)) {
                let s = if rng.gen_bool(0.5) {
                    Sign::Positive
                } else {
                    Sign::Negative
                };
                cpt = sort_along_parent(&cpt, pos, s)?;
                Some(s)
            } else {
                None
            };
            arcs.push(Arc {
                from: p,
                to: child,
                sign,
            });
        }
        cpts.push(cpt);
    }

    BayesianNetwork::new(variables, arcs, cpts)
}

fn sample_row(rng: &mut ChaCha8Rng, card: usize) -> Vec<f64> {
    // Bounded away from zero so sampled evidence stays possible.
    let mut row: Vec<f64> = (0..card).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = row.iter().sum();
    for v in &mut row {
        *v /= sum;
    }
    row
}

/// Installs a decisive sign along one parent axis by sorting the CDF
/// coordinates across that parent's states, per context of the other
/// parents. Order statistics of pointwise-ordered vectors stay ordered,
/// so each sorted row remains a valid CDF and previously installed
/// orders along other parents survive.
fn sort_along_parent(cpt: &Cpt, pos: usize, sign: Sign) -> Result<Cpt> {
    let m = cpt.parent_cards()[pos];
    let mut rows = cpt.rows().to_vec();
    for context in cpt.contexts_excluding(pos) {
        let mut cdfs: Vec<Vec<f64>> = (0..m)
            .map(|x| cdf_values_from_row(cpt.row_in_context(&context, pos, x)))
            .collect();
        for s in 0..cpt.child_card() {
            let mut column: Vec<f64> = cdfs.iter().map(|c| c[s]).collect();
            // A positive sign needs CDFs decreasing in the parent index.
            match sign {
                Sign::Positive => column.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap()),
                _ => column.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap()),
            }
            for (cdf, v) in cdfs.iter_mut().zip(column) {
                cdf[s] = v;
            }
        }
        for (x, cdf) in cdfs.iter().enumerate() {
            let mut full = context.clone();
            full[pos] = x;
            let idx = cpt.row_index(&full);
            rows[idx] = diff_cdf(cdf);
        }
    }
    Cpt::new(
        cpt.child(),
        cpt.parents().to_vec(),
        cpt.parent_cards().to_vec(),
        cpt.child_card(),
        rows,
    )
}
