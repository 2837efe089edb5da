use serde::{Deserialize, Serialize};
use spanshap_core::MAX_SPANS;

use crate::error::{PipelineError, Result};

/// Sampling and orchestration settings for one attribution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Upper bound on premises per span (`m`).
    pub premises_per_span: usize,
    /// Answers sampled per joint clarification (`ℓ`).
    pub answers_per_assignment: usize,
    pub answerer_temperature: f64,
    pub generator_temperature: f64,
    pub localizer_temperature: f64,
    pub clusterer_temperature: f64,
    pub clarifier_temperature: f64,
    /// Concurrent backend calls.
    pub max_workers: usize,
    /// Retries per backend call after the first attempt.
    pub max_retries: usize,
    /// Located spans beyond this abort the run with a capacity error.
    pub max_spans: usize,
    pub max_tokens: u32,
    /// Built-in prompt set name or a directory of templates.
    pub prompt_set: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            premises_per_span: 3,
            answers_per_assignment: 5,
            answerer_temperature: 0.7,
            generator_temperature: 0.9,
            localizer_temperature: 0.7,
            clusterer_temperature: 0.7,
            clarifier_temperature: 0.7,
            max_workers: 5,
            max_retries: 3,
            max_spans: MAX_SPANS,
            max_tokens: 1024,
            prompt_set: "qa".to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("premises_per_span", self.premises_per_span),
            ("answers_per_assignment", self.answers_per_assignment),
            ("max_workers", self.max_workers),
            ("max_spans", self.max_spans),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(PipelineError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.max_spans > MAX_SPANS {
            return Err(PipelineError::Config(format!(
                "max_spans {} exceeds the exact-enumeration cap of {MAX_SPANS}",
                self.max_spans
            )));
        }
        let temperatures = [
            ("answerer_temperature", self.answerer_temperature),
            ("generator_temperature", self.generator_temperature),
            ("localizer_temperature", self.localizer_temperature),
            ("clusterer_temperature", self.clusterer_temperature),
            ("clarifier_temperature", self.clarifier_temperature),
        ];
        for (name, t) in temperatures {
            if !(0.0..=2.0).contains(&t) {
                return Err(PipelineError::Config(format!("{name} {t} outside [0, 2]")));
            }
        }
        if self.max_tokens == 0 {
            return Err(PipelineError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.premises_per_span, 3);
        assert_eq!(c.answers_per_assignment, 5);
        assert_eq!(c.answerer_temperature, 0.7);
        assert_eq!(c.generator_temperature, 0.9);
        assert_eq!(c.max_workers, 5);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            PipelineConfig { premises_per_span: 0, ..Default::default() },
            PipelineConfig { answerer_temperature: 2.5, ..Default::default() },
            PipelineConfig { max_spans: 9, ..Default::default() },
            PipelineConfig { max_workers: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn partial_toml_style_json_fills_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"answers_per_assignment": 7}"#).unwrap();
        assert_eq!(c.answers_per_assignment, 7);
        assert_eq!(c.premises_per_span, 3);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
