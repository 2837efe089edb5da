//! Shapley and leave-one-out attribution over a coalition ledger.

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::Result;
use crate::ledger::{build_ledger, CoalitionLedger};
use crate::table::BottomTable;

/// `|A|!(n−|A|−1)!/n!` indexed by `|A|`.
pub fn shapley_weights(n: usize) -> Vec<f64> {
    let factorial = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let total = factorial(n);
    (0..n)
        .map(|s| factorial(s) * factorial(n - s - 1) / total)
        .collect()
}

/// `φ_k = Σ_{A ⊆ N∖{k}} w(|A|) · (E[H|A] − E[H|A∪{k}])` for every span.
pub fn shapley(ledger: &CoalitionLedger) -> Vec<f64> {
    let n = ledger.span_count();
    let weights = shapley_weights(n);
    (0..n)
        .map(|k| {
            Coalition::all(n)
                .filter(|a| !a.contains(k))
                .map(|a| {
                    let gain = ledger.marginal(a, k).expect("ledger covers all coalitions");
                    weights[a.len()] * gain
                })
                .sum()
        })
        .collect()
}

/// `E[H | N∖{k}] − E[H | N]`: the information span `k` adds once every other
/// span is already clarified.
pub fn loo(ledger: &CoalitionLedger, k: usize) -> Result<f64> {
    ledger.check_span(k)?;
    let rest = Coalition::full(ledger.span_count()).without(k);
    ledger.marginal(rest, k)
}

/// Per-span attribution of the input-induced uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    /// Shapley value per span, nats.
    pub shapley: Vec<f64>,
    /// Leave-one-out value per span, nats.
    pub loo: Vec<f64>,
    /// `v(N) = I(Y; C | x)`, nats.
    pub total: f64,
    /// Smallest index attaining the largest Shapley value; `None` without spans.
    pub max_index: Option<usize>,
    /// `H(Y | x)`, nats.
    pub root_entropy: f64,
    /// `E[H(Y | x, c_N)]`, nats.
    pub residual_entropy: f64,
}

impl AttributionReport {
    /// The report for an input with no located spans.
    pub fn empty() -> Self {
        Self {
            shapley: Vec::new(),
            loo: Vec::new(),
            total: 0.0,
            max_index: None,
            root_entropy: 0.0,
            residual_entropy: 0.0,
        }
    }

    pub fn from_ledger(ledger: &CoalitionLedger) -> Self {
        let n = ledger.span_count();
        let shapley = shapley(ledger);
        let loo = (0..n)
            .map(|k| loo(ledger, k).expect("span index in range"))
            .collect();
        let max_index = argmax_first(&shapley);
        Self {
            shapley,
            loo,
            total: ledger.value(Coalition::full(n)).expect("grand coalition"),
            max_index,
            root_entropy: ledger.root_entropy(),
            residual_entropy: ledger.residual_entropy(),
        }
    }

    pub fn span_count(&self) -> usize {
        self.shapley.len()
    }

    pub fn shapley_sum(&self) -> f64 {
        self.shapley.iter().sum()
    }

    pub fn max_shapley(&self) -> f64 {
        self.max_index.map_or(0.0, |k| self.shapley[k])
    }

    pub fn loo_sum(&self) -> f64 {
        self.loo.iter().sum()
    }

    pub fn max_loo(&self) -> f64 {
        self.loo.iter().copied().fold(0.0, f64::max)
    }

    /// Share of the total carried by span `k`; zero when the total is zero.
    pub fn share(&self, k: usize) -> f64 {
        if self.total > 0.0 {
            self.shapley[k] / self.total
        } else {
            0.0
        }
    }
}

fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(k),
        }
    }
    best
}

pub fn attribution_report(table: &BottomTable) -> Result<AttributionReport> {
    Ok(AttributionReport::from_ledger(&build_ledger(table)?))
}
