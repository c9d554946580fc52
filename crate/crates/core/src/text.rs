//! Shared text normalization and tokenization.
//!
//! Concept grounding, the sentence index and the lexical scorer all use
//! [`tokenize`], so a token produced in one stage compares equal to the
//! same word seen by another.

/// Lowercase, map `_` to a space and collapse whitespace runs.
///
/// This is the canonical form of a concept surface.
pub fn normalize_surface(raw: &str) -> String {
    let replaced = raw.replace('_', " ");
    collapse_whitespace(&replaced).to_lowercase()
}

/// Collapse internal whitespace runs to single spaces and trim the ends.
pub fn collapse_whitespace(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Split on whitespace, strip non-alphanumeric characters at token edges
/// and lowercase. Tokens that become empty are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

/// Uppercase the first character and make sure the text ends with a period
/// (or another sentence terminator).
pub fn as_sentence(text: &str) -> String {
    let text = text.trim();
    let mut out = String::with_capacity(text.len() + 1);
    let mut chars = text.chars();
    if let Some(first) = chars.next() {
        out.extend(first.to_uppercase());
        out.push_str(chars.as_str());
    }
    if !out.is_empty() && !out.ends_with(['.', '!', '?']) {
        out.push('.');
    }
    out
}
