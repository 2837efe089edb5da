//! Bottom-up marginalization.
//!
//! Every coalition distribution `p(Y | x, c_A)` is the uniform average of the
//! bottom rows consistent with `c_A`, computed directly from the table. The
//! expected conditional entropy of a coalition is the uniform average of
//! `H(p(Y | x, c_A))` over its premise combinations.

use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, MAX_SPANS};
use crate::distribution::ClusterDistribution;
use crate::error::{GameError, Result};
use crate::table::{Assignments, BottomTable};

/// Cached expected conditional entropies for all `2^n` coalitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionLedger {
    premise_counts: Vec<usize>,
    /// Indexed by coalition bitmask.
    expected_entropy: Vec<f64>,
    /// Indexed by coalition bitmask, then by the row-major index of the
    /// members' premise combination.
    assignment_entropy: Vec<Vec<f64>>,
}

impl CoalitionLedger {
    pub fn span_count(&self) -> usize {
        self.premise_counts.len()
    }

    pub fn premise_counts(&self) -> &[usize] {
        &self.premise_counts
    }

    /// `H(Y | x)`, the empty-coalition entry.
    pub fn root_entropy(&self) -> f64 {
        self.expected_entropy[0]
    }

    /// `E[H(Y | x, c_N)]`, the grand-coalition entry.
    pub fn residual_entropy(&self) -> f64 {
        self.expected_entropy[Coalition::full(self.span_count()).bits() as usize]
    }

    pub fn expected_entropy(&self, coalition: Coalition) -> Result<f64> {
        self.check(coalition)?;
        Ok(self.expected_entropy[coalition.bits() as usize])
    }

    /// `H(Y | x, c_A)` for the members' premise indices, in ascending member order.
    pub fn assignment_entropy(&self, coalition: Coalition, member_premises: &[usize]) -> Result<f64> {
        self.check(coalition)?;
        let members: Vec<usize> = coalition.members().collect();
        if member_premises.len() != members.len() {
            return Err(GameError::InvalidAssignment(format!(
                "coalition has {} members, got {} premise indices",
                members.len(),
                member_premises.len()
            )));
        }
        let mut index = 0;
        for (&k, &j) in members.iter().zip(member_premises) {
            let m = self.premise_counts[k];
            if j >= m {
                return Err(GameError::InvalidAssignment(format!(
                    "premise {j} out of range for span {k} with {m} premises"
                )));
            }
            index = index * m + j;
        }
        Ok(self.assignment_entropy[coalition.bits() as usize][index])
    }

    /// `v(A) = H(Y|x) − E[H(Y | x, c_A)]`, the information the coalition's
    /// clarifications carry about the answer.
    pub fn value(&self, coalition: Coalition) -> Result<f64> {
        Ok(self.root_entropy() - self.expected_entropy(coalition)?)
    }

    /// `E[H|A] − E[H|A∪{k}]` for `k ∉ A`.
    pub fn marginal(&self, coalition: Coalition, k: usize) -> Result<f64> {
        self.check_span(k)?;
        if coalition.contains(k) {
            return Err(GameError::InvalidAssignment(format!(
                "span {k} already belongs to {coalition:?}"
            )));
        }
        Ok(self.expected_entropy(coalition)? - self.expected_entropy(coalition.with(k))?)
    }

    pub(crate) fn check_span(&self, k: usize) -> Result<()> {
        if k >= self.span_count() {
            return Err(GameError::SpanOutOfRange {
                index: k,
                spans: self.span_count(),
            });
        }
        Ok(())
    }

    fn check(&self, coalition: Coalition) -> Result<()> {
        if !coalition.fits(self.span_count()) {
            return Err(GameError::InvalidAssignment(format!(
                "{coalition:?} is not a coalition over {} spans",
                self.span_count()
            )));
        }
        Ok(())
    }
}

/// `p(Y | x, c_A)`: the uniform average of all bottom rows that agree with
/// `assignment` on the coalition members.
///
/// `assignment` has one entry per span, `Some(premise)` exactly for members.
pub fn marginalize(
    table: &BottomTable,
    coalition: Coalition,
    assignment: &[Option<usize>],
) -> Result<ClusterDistribution> {
    let n = table.span_count();
    if !coalition.fits(n) {
        return Err(GameError::InvalidAssignment(format!(
            "{coalition:?} is not a coalition over {n} spans"
        )));
    }
    if assignment.len() != n {
        return Err(GameError::InvalidAssignment(format!(
            "assignment covers {} spans, table has {n}",
            assignment.len()
        )));
    }
    let mut fixed = vec![0; n];
    for (k, slot) in assignment.iter().enumerate() {
        match (coalition.contains(k), slot) {
            (true, Some(j)) if *j < table.premise_counts()[k] => fixed[k] = *j,
            (true, Some(j)) => {
                return Err(GameError::InvalidAssignment(format!(
                    "premise {j} out of range for span {k} with {} premises",
                    table.premise_counts()[k]
                )))
            }
            (true, None) => {
                return Err(GameError::InvalidAssignment(format!(
                    "coalition member {k} has no premise"
                )))
            }
            (false, Some(_)) => {
                return Err(GameError::InvalidAssignment(format!(
                    "span {k} is not a coalition member but was assigned"
                )))
            }
            (false, None) => {}
        }
    }
    Ok(Marginalizer::new(table).mixture(coalition, &fixed))
}

/// Runs the bottom-up marginalization for every coalition.
pub fn build_ledger(table: &BottomTable) -> Result<CoalitionLedger> {
    let n = table.span_count();
    if n > MAX_SPANS {
        return Err(GameError::Capacity {
            spans: n,
            cap: MAX_SPANS,
        });
    }
    let counts = table.premise_counts();
    let marginalizer = Marginalizer::new(table);
    let mut expected_entropy = Vec::with_capacity(1 << n);
    let mut assignment_entropy = Vec::with_capacity(1 << n);

    for coalition in Coalition::all(n) {
        let members: Vec<usize> = coalition.members().collect();
        let radices: Vec<usize> = members.iter().map(|&k| counts[k]).collect();
        let mut fixed = vec![0; n];
        let mut entropies = Vec::new();
        for combo in Assignments::new(&radices) {
            for (&k, &j) in members.iter().zip(&combo) {
                fixed[k] = j;
            }
            entropies.push(marginalizer.mixture(coalition, &fixed).entropy());
        }
        let mean = entropies.iter().sum::<f64>() / entropies.len() as f64;
        expected_entropy.push(mean);
        assignment_entropy.push(entropies);
    }

    Ok(CoalitionLedger {
        premise_counts: counts.to_vec(),
        expected_entropy,
        assignment_entropy,
    })
}

/// `v(A)` read from a ledger.
pub fn value(ledger: &CoalitionLedger, coalition: Coalition) -> Result<f64> {
    ledger.value(coalition)
}

struct Marginalizer<'a> {
    table: &'a BottomTable,
    strides: Vec<usize>,
}

impl<'a> Marginalizer<'a> {
    fn new(table: &'a BottomTable) -> Self {
        let counts = table.premise_counts();
        let mut strides = vec![1; counts.len()];
        for k in (0..counts.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Self { table, strides }
    }

    /// Sums consistent rows in row-major order of the free spans, then
    /// divides by their count.
    fn mixture(&self, coalition: Coalition, fixed: &[usize]) -> ClusterDistribution {
        let counts = self.table.premise_counts();
        let n = counts.len();
        let base: usize = (0..n)
            .filter(|&k| coalition.contains(k))
            .map(|k| fixed[k] * self.strides[k])
            .sum();
        let free: Vec<usize> = (0..n).filter(|&k| !coalition.contains(k)).collect();
        let radices: Vec<usize> = free.iter().map(|&k| counts[k]).collect();

        let mut acc = vec![0.0; self.table.cluster_count()];
        let mut rows = 0usize;
        for combo in Assignments::new(&radices) {
            let offset: usize = free
                .iter()
                .zip(&combo)
                .map(|(&k, &j)| j * self.strides[k])
                .sum();
            for (a, p) in acc.iter_mut().zip(self.table.rows()[base + offset].probs()) {
                *a += p;
            }
            rows += 1;
        }
        let rows = rows as f64;
        ClusterDistribution::from_mixture(acc.into_iter().map(|a| a / rows).collect())
    }
}
