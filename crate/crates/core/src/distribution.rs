//! Discrete distributions over the shared semantic cluster space and their
//! Shannon entropy (natural log).

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Allowed deviation of `Σ p` from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A probability vector over `K ≥ 1` semantic clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClusterDistribution(Vec<f64>);

impl ClusterDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate(&probs)?;
        Ok(Self(probs))
    }

    /// Empirical distribution from per-cluster counts.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if counts.is_empty() {
            return Err(GameError::InvalidDistribution("no clusters".into()));
        }
        if total == 0 {
            return Err(GameError::InvalidDistribution("all counts are zero".into()));
        }
        let total = total as f64;
        Ok(Self(counts.iter().map(|&c| c as f64 / total).collect()))
    }

    /// All mass on `cluster` out of `cluster_count`.
    pub fn point_mass(cluster: usize, cluster_count: usize) -> Result<Self> {
        if cluster >= cluster_count {
            return Err(GameError::InvalidDistribution(format!(
                "cluster {cluster} outside 0..{cluster_count}"
            )));
        }
        let mut probs = vec![0.0; cluster_count];
        probs[cluster] = 1.0;
        Ok(Self(probs))
    }

    /// Wraps a vector produced by averaging already-valid distributions.
    /// Clamps round-off negatives to zero.
    pub(crate) fn from_mixture(mut probs: Vec<f64>) -> Self {
        for p in &mut probs {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn cluster_count(&self) -> usize {
        self.0.len()
    }

    pub fn entropy(&self) -> f64 {
        shannon(&self.0)
    }
}

impl TryFrom<Vec<f64>> for ClusterDistribution {
    type Error = GameError;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<ClusterDistribution> for Vec<f64> {
    fn from(dist: ClusterDistribution) -> Self {
        dist.0
    }
}

fn validate(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(GameError::InvalidDistribution("no clusters".into()));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(GameError::InvalidDistribution(format!(
                "entry {i} = {p} is not a probability"
            )));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(GameError::InvalidDistribution(format!(
            "entries sum to {sum}, not 1"
        )));
    }
    Ok(())
}

/// `−Σ p ln p` with `0 · ln 0 = 0`.
fn shannon(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    // -0.0 and tiny negative round-off from p slightly above 1
    h.max(0.0)
}

/// Shannon entropy in nats of a validated distribution.
pub fn entropy(dist: &ClusterDistribution) -> f64 {
    dist.entropy()
}

/// Validates a raw probability vector and returns its entropy in nats.
pub fn entropy_of(probs: &[f64]) -> Result<f64> {
    validate(probs)?;
    Ok(shannon(probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_distribution_has_zero_entropy() {
        assert_eq!(entropy_of(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_distribution_reaches_log_k() {
        let h = entropy_of(&[0.25; 4]).unwrap();
        assert!((h - 4f64.ln()).abs() < 1e-15);
        assert!((h - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn three_to_one_split() {
        // -(0.75 ln 0.75 + 0.25 ln 0.25)
        let h = entropy_of(&[0.75, 0.25]).unwrap();
        assert!((h - 0.562335).abs() < 1e-6);
    }

    #[test]
    fn rejects_unnormalized_and_negative() {
        assert!(entropy_of(&[0.5, 0.4]).is_err());
        assert!(entropy_of(&[1.2, -0.2]).is_err());
        assert!(entropy_of(&[f64::NAN, 1.0]).is_err());
        assert!(entropy_of(&[]).is_err());
    }

    #[test]
    fn counts_become_frequencies() {
        let d = ClusterDistribution::from_counts(&[3, 2]).unwrap();
        assert_eq!(d.probs(), &[0.6, 0.4]);
        assert!(ClusterDistribution::from_counts(&[0, 0]).is_err());
    }

    #[test]
    fn deserialization_validates() {
        let ok: ClusterDistribution = serde_json::from_str("[0.5,0.5]").unwrap();
        assert_eq!(ok.cluster_count(), 2);
        assert!(serde_json::from_str::<ClusterDistribution>("[0.5,0.6]").is_err());
    }
}
