use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical concept name: lowercase, underscores for spaces, no URI prefix.
///
/// `/c/en/Peanut Butter/n` and `peanut butter` both normalize to
/// `peanut_butter`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(raw: &str) -> Result<Self> {
        let name = normalize(raw);
        if name.is_empty() {
            return Err(Error::InvalidConcept(raw.to_string()));
        }
        Ok(ConceptId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Language tag of a `/c/<lang>/...` URI, if `raw` is one.
pub fn uri_language(raw: &str) -> Option<&str> {
    let rest = strip_uri_prefix(raw.trim())?;
    rest.split('/').next()
}

fn normalize(raw: &str) -> String {
    let mut text = raw.trim();
    if let Some(rest) = strip_uri_prefix(text) {
        // /c/<lang>/<term>[/<pos>/...]
        let mut parts = rest.splitn(3, '/');
        let _lang = parts.next();
        text = parts.next().unwrap_or("");
    }
    let mut out = String::with_capacity(text.len());
    let mut pending_sep = false;
    for ch in text.chars() {
        if ch.is_whitespace() || ch == '_' {
            pending_sep = !out.is_empty();
            continue;
        }
        if pending_sep {
            out.push('_');
            pending_sep = false;
        }
        out.extend(ch.to_lowercase());
    }
    out
}

fn strip_uri_prefix(text: &str) -> Option<&str> {
    match text.get(..3) {
        Some(head) if head.eq_ignore_ascii_case("/c/") => Some(&text[3..]),
        _ => None,
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for ConceptId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for ConceptId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ConceptId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        ConceptId::new(&value)
    }
}

impl TryFrom<&str> for ConceptId {
    type Error = Error;

    fn try_from(value: &str) -> Result<Self> {
        ConceptId::new(value)
    }
}

impl From<ConceptId> for String {
    fn from(value: ConceptId) -> Self {
        value.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_uri_prefix_and_part_of_speech() {
        assert_eq!(ConceptId::new("/c/en/knife").unwrap().as_str(), "knife");
        assert_eq!(
            ConceptId::new("/c/en/peanut_butter/n/wn/food").unwrap().as_str(),
            "peanut_butter"
        );
        assert_eq!(uri_language("/c/fr/couteau"), Some("fr"));
        assert_eq!(uri_language("knife"), None);
    }

    #[test]
    fn lowercases_and_joins_words() {
        assert_eq!(
            ConceptId::new("  Peanut   Butter ").unwrap().as_str(),
            "peanut_butter"
        );
        assert_eq!(ConceptId::new("__a__b_").unwrap().as_str(), "a_b");
    }

    #[test]
    fn rejects_empty_names() {
        assert!(ConceptId::new("").is_err());
        assert!(ConceptId::new("   ").is_err());
        assert!(ConceptId::new("/c/en/").is_err());
        assert!(ConceptId::new("___").is_err());
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "\\PC{0,24}") {
            if let Ok(id) = ConceptId::new(&raw) {
                let again = ConceptId::new(id.as_str()).unwrap();
                prop_assert_eq!(again, id);
            }
        }
    }
}
