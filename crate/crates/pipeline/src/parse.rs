use serde::de::DeserializeOwned;

/// Drops a surrounding Markdown code fence, if any.
pub(crate) fn strip_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(inner) = t.strip_prefix("```") else {
        return t;
    };
    let inner = inner.strip_suffix("```").unwrap_or(inner);
    // language tag on the opening fence line
    match inner.find('\n') {
        Some(nl) if !inner[..nl].contains(['{', '<']) => inner[nl + 1..].trim(),
        _ => inner.trim(),
    }
}

/// Parses the outermost JSON object embedded in free text.
pub(crate) fn json_object<T: DeserializeOwned>(text: &str) -> Option<T> {
    let t = strip_fence(text);
    if let Ok(v) = serde_json::from_str(t) {
        return Some(v);
    }
    let start = t.find('{')?;
    let end = t.rfind('}')?;
    (start < end)
        .then(|| serde_json::from_str(&t[start..=end]).ok())
        .flatten()
}
