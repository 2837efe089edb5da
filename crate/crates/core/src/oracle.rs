//! Permutation-based Shapley oracle.
//!
//! Shares nothing with the ledger path beyond the table type: coalition
//! entropies are recomputed by bucketing bottom rows on the coalition's
//! premises, and attributions average marginal gains over all `n!` orderings.

use std::collections::BTreeMap;

use itertools::Itertools;

use crate::coalition::Coalition;
use crate::distribution::ClusterDistribution;
use crate::error::{GameError, Result};
use crate::table::BottomTable;

/// Largest span count the oracle accepts (`8! = 40320` orderings).
pub const BRUTE_FORCE_CAP: usize = 8;

pub fn brute_force_shapley(table: &BottomTable) -> Result<Vec<f64>> {
    let n = table.span_count();
    if n > BRUTE_FORCE_CAP {
        return Err(GameError::Capacity {
            spans: n,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut cache: Vec<Option<f64>> = vec![None; 1 << n];
    let mut expected = |a: Coalition| -> f64 {
        *cache[a.bits() as usize].get_or_insert_with(|| bucketed_expected_entropy(table, a))
    };
    let root = expected(Coalition::empty());
    let mut value = |a: Coalition| root - expected(a);

    let mut totals = vec![0.0; n];
    let mut orderings = 0usize;
    for order in (0..n).permutations(n) {
        let mut prefix = Coalition::empty();
        for k in order {
            let grown = prefix.with(k);
            totals[k] += value(grown) - value(prefix);
            prefix = grown;
        }
        orderings += 1;
    }
    Ok(totals.into_iter().map(|t| t / orderings as f64).collect())
}

fn bucketed_expected_entropy(table: &BottomTable, coalition: Coalition) -> f64 {
    let mut buckets: BTreeMap<Vec<usize>, (Vec<f64>, usize)> = BTreeMap::new();
    for (assignment, row) in table.assignments().zip(table.rows()) {
        let key: Vec<usize> = coalition.members().map(|k| assignment[k]).collect();
        let (sum, count) = buckets
            .entry(key)
            .or_insert_with(|| (vec![0.0; table.cluster_count()], 0));
        for (s, p) in sum.iter_mut().zip(row.probs()) {
            *s += p;
        }
        *count += 1;
    }
    let groups = buckets.len() as f64;
    buckets
        .into_values()
        .map(|(sum, count)| {
            let mix = sum.into_iter().map(|s| s / count as f64).collect();
            ClusterDistribution::from_mixture(mix).entropy()
        })
        .sum::<f64>()
        / groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn single_span_equals_total() {
        let t = BottomTable::from_fn(vec![2], |a| {
            ClusterDistribution::point_mass(a[0], 2).unwrap()
        })
        .unwrap();
        let phi = brute_force_shapley(&t).unwrap();
        assert!((phi[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn xor_fixture() {
        let phi = brute_force_shapley(&fixtures::xor()).unwrap();
        assert!((phi[0] - 0.346574).abs() < 1e-6);
        assert!((phi[1] - 0.346574).abs() < 1e-6);
    }

    #[test]
    fn rejects_oversized_tables() {
        let t = BottomTable::from_fn(vec![1; 9], |_| {
            ClusterDistribution::point_mass(0, 1).unwrap()
        })
        .unwrap();
        assert!(matches!(
            brute_force_shapley(&t),
            Err(GameError::Capacity { spans: 9, cap: 8 })
        ));
    }
}
