//! Versioned prompt templates.
//!
//! A prompt set is six `<kind>.txt` templates, each with an optional
//! `<kind>.examples.txt` substituted for `{examples}`. Placeholders are
//! `{name}` for names in [`PLACEHOLDERS`]; any other braces are literal.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::sha256_hex;

pub const PLACEHOLDERS: &[&str] = &[
    "x",
    "context",
    "examples",
    "m",
    "clean_sentence",
    "span_id",
    "span_text",
    "reason",
    "premises",
    "question",
    "answers_numbered_list",
    "original_question",
    "uncertainty_context",
    "fine_grained_context",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Localizer,
    Generator,
    Answerer,
    Clusterer,
    ClarifyBaseline,
    ClarifyLocalized,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::Localizer,
        PromptKind::Generator,
        PromptKind::Answerer,
        PromptKind::Clusterer,
        PromptKind::ClarifyBaseline,
        PromptKind::ClarifyLocalized,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            PromptKind::Localizer => "localizer",
            PromptKind::Generator => "generator",
            PromptKind::Answerer => "answerer",
            PromptKind::Clusterer => "clusterer",
            PromptKind::ClarifyBaseline => "clarify_baseline",
            PromptKind::ClarifyLocalized => "clarify_localized",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown prompt set {0:?} (expected qa, nli, or a directory)")]
    UnknownSet(String),
    #[error("prompt set {set}: missing template {kind}")]
    MissingTemplate { set: String, kind: PromptKind },
    #[error("prompt {kind}: no value for placeholder {{{name}}}")]
    MissingValue { kind: PromptKind, name: String },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Template {
    body: String,
    examples: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    name: String,
    version: String,
    templates: BTreeMap<PromptKind, Template>,
}

macro_rules! builtin {
    ($dir:literal) => {
        [
            (
                include_str!(concat!("../prompts/", $dir, "/localizer.txt")),
                include_str!(concat!("../prompts/", $dir, "/localizer.examples.txt")),
            ),
            (
                include_str!(concat!("../prompts/", $dir, "/generator.txt")),
                include_str!(concat!("../prompts/", $dir, "/generator.examples.txt")),
            ),
            (
                include_str!(concat!("../prompts/", $dir, "/answerer.txt")),
                include_str!(concat!("../prompts/", $dir, "/answerer.examples.txt")),
            ),
            (
                include_str!(concat!("../prompts/", $dir, "/clusterer.txt")),
                include_str!(concat!("../prompts/", $dir, "/clusterer.examples.txt")),
            ),
            (include_str!(concat!("../prompts/", $dir, "/clarify_baseline.txt")), ""),
            (include_str!(concat!("../prompts/", $dir, "/clarify_localized.txt")), ""),
        ]
    };
}

impl PromptSet {
    /// `qa`, `nli`, or a path to a directory of templates.
    pub fn load(name: &str) -> Result<Self, PromptError> {
        match name {
            "qa" => Ok(Self::from_pairs("qa", builtin!("qa"))),
            "nli" => Ok(Self::from_pairs("nli", builtin!("nli"))),
            other if Path::new(other).is_dir() => Self::from_dir(Path::new(other)),
            other => Err(PromptError::UnknownSet(other.to_string())),
        }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |path: &Path| {
            std::fs::read_to_string(path).map_err(|e| PromptError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        };
        let name = dir.display().to_string();
        let mut pairs = Vec::new();
        for kind in PromptKind::ALL {
            let body_path = dir.join(format!("{}.txt", kind.file_stem()));
            if !body_path.is_file() {
                return Err(PromptError::MissingTemplate { set: name, kind });
            }
            let examples_path = dir.join(format!("{}.examples.txt", kind.file_stem()));
            let examples = if examples_path.is_file() {
                read(&examples_path)?
            } else {
                String::new()
            };
            pairs.push((read(&body_path)?, examples));
        }
        let pairs: [(String, String); 6] = pairs.try_into().expect("six kinds");
        Ok(Self::from_pairs(&name, pairs))
    }

    fn from_pairs<S: Into<String>>(name: &str, pairs: [(S, S); 6]) -> Self {
        let templates: BTreeMap<PromptKind, Template> = PromptKind::ALL
            .into_iter()
            .zip(pairs)
            .map(|(kind, (body, examples))| {
                let examples: String = examples.into();
                let template = Template {
                    body: body.into(),
                    examples: examples.trim_end().to_string(),
                };
                (kind, template)
            })
            .collect();
        let mut digest_input = String::new();
        for (kind, t) in &templates {
            digest_input.push_str(kind.file_stem());
            digest_input.push('\0');
            digest_input.push_str(&t.body);
            digest_input.push('\0');
            digest_input.push_str(&t.examples);
            digest_input.push('\0');
        }
        Self {
            name: name.to_string(),
            version: sha256_hex(&digest_input),
            templates,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Content digest; changes whenever any template changes.
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Fills the template for `kind`. `{examples}` is supplied from the set.
    pub fn render(&self, kind: PromptKind, vars: &[(&str, &str)]) -> Result<String, PromptError> {
        let template = &self.templates[&kind];
        let lookup = |name: &str| -> Option<&str> {
            if name == "examples" {
                return Some(template.examples.as_str());
            }
            vars.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
        };
        let body = template.body.as_str();
        let mut out = String::with_capacity(body.len() + 256);
        let mut rest = body;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let placeholder = after
                .find('}')
                .map(|close| &after[..close])
                .filter(|name| PLACEHOLDERS.contains(name));
            match placeholder {
                Some(name) => {
                    let value = lookup(name).ok_or_else(|| PromptError::MissingValue {
                        kind,
                        name: name.to_string(),
                    })?;
                    out.push_str(value);
                    rest = &after[name.len() + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load_with_distinct_versions() {
        let qa = PromptSet::load("qa").unwrap();
        let nli = PromptSet::load("nli").unwrap();
        assert_ne!(qa.version(), nli.version());
        assert_eq!(qa.version(), PromptSet::load("qa").unwrap().version());
        assert!(PromptSet::load("nope").is_err());
    }

    #[test]
    fn render_substitutes_known_names_only() {
        let qa = PromptSet::load("qa").unwrap();
        let out = qa
            .render(PromptKind::Localizer, &[("x", "who won the world cup"), ("context", "")])
            .unwrap();
        assert!(out.ends_with("Input question: who won the world cup\n"));
        assert!(out.contains(r#"{"tagged_sentence": "#));
        assert!(!out.contains("{examples}"));
    }

    #[test]
    fn values_are_not_rescanned() {
        let qa = PromptSet::load("qa").unwrap();
        let out = qa
            .render(PromptKind::Localizer, &[("x", "what is {m}?"), ("context", "")])
            .unwrap();
        assert!(out.contains("Input question: what is {m}?"));
    }

    #[test]
    fn missing_value_is_an_error() {
        let qa = PromptSet::load("qa").unwrap();
        let err = qa.render(PromptKind::Localizer, &[("x", "q")]).unwrap_err();
        assert!(matches!(err, PromptError::MissingValue { ref name, .. } if name == "context"));
    }

    #[test]
    fn directory_sets() {
        let dir = tempfile::tempdir().unwrap();
        for kind in PromptKind::ALL {
            std::fs::write(dir.path().join(format!("{kind}.txt")), format!("{kind}: {{x}} {{json}}"))
                .unwrap();
        }
        let set = PromptSet::load(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(set.render(PromptKind::Answerer, &[("x", "hi")]).unwrap(), "answerer: hi {json}");

        std::fs::remove_file(dir.path().join("clusterer.txt")).unwrap();
        assert!(matches!(
            PromptSet::from_dir(dir.path()),
            Err(PromptError::MissingTemplate { kind: PromptKind::Clusterer, .. })
        ));
    }
}
