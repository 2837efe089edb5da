//! Ambiguous spans and the tagged-sentence format that carries them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse;

pub const INSERTION_POINT_TEXT: &str = "[insertion point]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanKind {
    TextSpan,
    InsertionPoint,
}

/// A located span. `start..end` are byte offsets into the input; insertion
/// points have `start == end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    /// 1-based, consecutive in input order.
    pub id: usize,
    pub kind: SpanKind,
    pub start: usize,
    pub end: usize,
    pub surface_text: String,
    #[serde(default)]
    pub reason: String,
}

impl Span {
    /// Text shown to the generator and in feedback blocks.
    pub fn display_text(&self) -> &str {
        match self.kind {
            SpanKind::InsertionPoint => INSERTION_POINT_TEXT,
            SpanKind::TextSpan => &self.surface_text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("nested <ambig> tag at byte {0}")]
    Nested(usize),
    #[error("unclosed <ambig> tag at byte {0}")]
    Unclosed(usize),
    #[error("stray </ambig> at byte {0}")]
    StrayClose(usize),
    #[error("malformed <ambig> tag at byte {0}")]
    MalformedTag(usize),
    #[error("duplicate span id {0}")]
    DuplicateId(String),
    #[error("tagged sentence does not reproduce the input after removing tags")]
    Mismatch,
}

const CLOSE: &str = "</ambig>";

struct RawTag<'a> {
    id: String,
    content: &'a str,
}

/// Splits `tagged` into literal pieces interleaved with tags:
/// `pieces[i]` precedes `tags[i]`, and there is one more piece than tags.
fn scan(tagged: &str) -> Result<(Vec<&str>, Vec<RawTag<'_>>), SpanError> {
    let mut pieces = Vec::new();
    let mut tags = Vec::new();
    let mut segment = 0;
    let mut pos = 0;
    while let Some(rel) = tagged[pos..].find('<') {
        let at = pos + rel;
        let rest = &tagged[at..];
        if rest.starts_with(CLOSE) {
            return Err(SpanError::StrayClose(at));
        }
        if !is_open_tag(rest) {
            // a literal '<' in the input
            pos = at + 1;
            continue;
        }
        pieces.push(&tagged[segment..at]);
        let gt = rest.find('>').ok_or(SpanError::MalformedTag(at))?;
        let id = parse_id(&rest[..gt]).ok_or(SpanError::MalformedTag(at))?;
        let body_start = at + gt + 1;
        let body = &tagged[body_start..];
        let close = body.find(CLOSE).ok_or(SpanError::Unclosed(at))?;
        if let Some(inner) = body[..close].find('<') {
            if is_open_tag(&body[inner..]) {
                return Err(SpanError::Nested(body_start + inner));
            }
        }
        tags.push(RawTag {
            id,
            content: &body[..close],
        });
        pos = body_start + close + CLOSE.len();
        segment = pos;
    }
    pieces.push(&tagged[segment..]);
    Ok((pieces, tags))
}

fn is_open_tag(s: &str) -> bool {
    s.strip_prefix("<ambig")
        .and_then(|r| r.chars().next())
        .is_some_and(|c| c == '>' || c.is_whitespace())
}

fn parse_id(tag: &str) -> Option<String> {
    let attrs = tag.strip_prefix("<ambig")?;
    let value = attrs.trim().strip_prefix("id")?.trim_start().strip_prefix('=')?.trim();
    let value = value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .or_else(|| value.strip_prefix('\'').and_then(|v| v.strip_suffix('\'')))
        .unwrap_or(value);
    (!value.is_empty()).then(|| value.to_string())
}

/// Extracts spans from a localizer's tagged copy of `original`.
///
/// Whitespace-only tags are insertion points. Their content is normally
/// dropped; if that does not reproduce the input, it is kept instead.
/// Spans are renumbered 1.. in input order; `reasons` is keyed by the ids
/// used in `tagged`.
pub fn parse_tagged(
    original: &str,
    tagged: &str,
    reasons: &BTreeMap<String, String>,
) -> Result<Vec<Span>, SpanError> {
    let (pieces, tags) = scan(tagged)?;
    let mut seen = std::collections::HashSet::new();
    for t in &tags {
        if !seen.insert(t.id.as_str()) {
            return Err(SpanError::DuplicateId(t.id.clone()));
        }
    }
    for keep_blank in [false, true] {
        if let Some(spans) = assemble(original, &pieces, &tags, reasons, keep_blank) {
            return Ok(spans);
        }
    }
    Err(SpanError::Mismatch)
}

fn assemble(
    original: &str,
    pieces: &[&str],
    tags: &[RawTag<'_>],
    reasons: &BTreeMap<String, String>,
    keep_blank: bool,
) -> Option<Vec<Span>> {
    let mut text = String::with_capacity(original.len());
    let mut spans = Vec::with_capacity(tags.len());
    for (i, piece) in pieces.iter().enumerate() {
        text.push_str(piece);
        let Some(tag) = tags.get(i) else { break };
        let start = text.len();
        let blank = tag.content.trim().is_empty();
        let kind = if blank {
            SpanKind::InsertionPoint
        } else {
            SpanKind::TextSpan
        };
        if !blank || keep_blank {
            text.push_str(tag.content);
        }
        let end = if blank { start } else { text.len() };
        spans.push(Span {
            id: i + 1,
            kind,
            start,
            end,
            surface_text: if blank { String::new() } else { tag.content.to_string() },
            reason: reasons.get(&tag.id).cloned().unwrap_or_default(),
        });
    }
    (text == original).then_some(spans)
}

#[derive(Deserialize)]
struct LocalizerJson {
    tagged_sentence: String,
    #[serde(default)]
    spans: Vec<SpanReason>,
}

#[derive(Deserialize)]
struct SpanReason {
    id: serde_json::Value,
    #[serde(default)]
    reason: String,
}

/// Reads a localizer completion: either the requested JSON object or the
/// bare tagged sentence.
pub fn parse_localizer_output(original: &str, completion: &str) -> Result<Vec<Span>, SpanError> {
    if let Some(json) = parse::json_object::<LocalizerJson>(completion) {
        let reasons = json
            .spans
            .into_iter()
            .map(|s| {
                let id = match s.id {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                (id, s.reason)
            })
            .collect();
        return parse_tagged(original, &json.tagged_sentence, &reasons);
    }
    let raw = parse::strip_fence(completion);
    parse_tagged(original, raw, &BTreeMap::new())
        .or_else(|e| parse_tagged(original, completion, &BTreeMap::new()).map_err(|_| e))
}
