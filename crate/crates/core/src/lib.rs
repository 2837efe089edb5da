//! Exact Shapley attribution of input-induced (aleatoric) uncertainty.
//!
//! A language model's answer `Y` to an input `x` is uncertain partly because
//! `x` contains ambiguous spans. Each span `k` gets a small set of premises
//! (clarifications); answers sampled under every joint clarification form a
//! [`BottomTable`]. Treating spans as players whose coalition value is the
//! mutual information `I(Y; C_A | x)`, this crate:
//!
//! * marginalizes the bottom table up to every coalition ([`build_ledger`]),
//! * computes exact Shapley and leave-one-out attributions ([`shapley`],
//!   [`loo`], [`attribution_report`]),
//! * provides an independent permutation oracle ([`brute_force_shapley`]),
//! * scores detection runs ([`metrics`]) and measures clarification effort
//!   ([`word_edit_distance`], [`uncertainty_context`]).
//!
//! All entropies are in nats.

pub mod coalition;
pub mod context;
pub mod distribution;
pub mod edit;
pub mod error;
pub mod fixtures;
pub mod ledger;
pub mod metrics;
pub mod oracle;
pub mod shapley;
pub mod table;

pub use coalition::{Coalition, MAX_SPANS};
pub use context::{uncertainty_context, ContextMode, ReferenceScores, ScoreStats, UncertaintyContext};
pub use distribution::{entropy, entropy_of, ClusterDistribution};
pub use edit::{levenshtein, word_edit_distance};
pub use error::GameError;
pub use ledger::{build_ledger, marginalize, value, CoalitionLedger};
pub use metrics::{auprc, auroc, best_f1, score_example, BestF1, MetricsError, Scorer};
pub use oracle::{brute_force_shapley, BRUTE_FORCE_CAP};
pub use shapley::{attribution_report, loo, shapley, shapley_weights, AttributionReport};
pub use table::BottomTable;
