//! Word-vector table loaded from word2vec-style text files (the format
//! ConceptNet Numberbatch ships in).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::concept::{uri_language, ConceptId};
use crate::error::{Error, RecordError, Result};
use crate::knowledge::Ingested;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<ConceptId, Vec<f64>>,
    norms: HashMap<ConceptId, f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
            norms: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, concept: &ConceptId) -> bool {
        self.vectors.contains_key(concept)
    }

    pub fn get(&self, concept: &ConceptId) -> Option<&[f64]> {
        self.vectors.get(concept).map(Vec::as_slice)
    }

    /// Adds a vector. Returns `false` (and leaves the table alone) if the
    /// dimension is wrong, a component is not finite or the norm is zero.
    pub fn insert(&mut self, concept: ConceptId, vector: Vec<f64>) -> bool {
        if vector.len() != self.dim || vector.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return false;
        }
        self.norms.insert(concept.clone(), norm);
        self.vectors.insert(concept, vector);
        true
    }

    /// Cosine similarity, clamped to `[-1, 1]`.
    pub fn cosine(&self, a: &ConceptId, b: &ConceptId) -> Result<f64> {
        let va = self.get(a).ok_or_else(|| Error::MissingEmbedding(a.clone()))?;
        let vb = self.get(b).ok_or_else(|| Error::MissingEmbedding(b.clone()))?;
        if a == b {
            return Ok(1.0);
        }
        let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        Ok((dot / (self.norms[a] * self.norms[b])).clamp(-1.0, 1.0))
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Ingested<EmbeddingTable>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_embeddings(BufReader::new(file))
}

pub fn parse_embeddings(text: &str) -> Result<Ingested<EmbeddingTable>> {
    ingest_embeddings(text.as_bytes())
}

/// Reads `token v1 ... vd` rows, with an optional leading `count dim`
/// header. Without a header the first accepted row fixes the dimension.
/// Later rows of another dimension, zero vectors, and repeated tokens are
/// skipped with a warning.
pub fn ingest_embeddings<R: BufRead>(mut reader: R) -> Result<Ingested<EmbeddingTable>> {
    let mut table: Option<EmbeddingTable> = None;
    let mut rejected = Vec::new();
    let mut skipped = 0;
    let mut buf = Vec::new();
    let mut line_no = 0;
    let mut seen_content = false;

    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io("<embeddings>", e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let Ok(line) = std::str::from_utf8(&buf) else {
            reject(&mut rejected, line_no, "line is not valid UTF-8".into());
            continue;
        };
        let mut tokens = line.split_whitespace();
        let Some(token) = tokens.next() else {
            continue;
        };
        let rest: Vec<&str> = tokens.collect();

        if !seen_content {
            seen_content = true;
            if rest.len() == 1 {
                if let (Ok(_count), Ok(dim)) = (token.parse::<usize>(), rest[0].parse::<usize>()) {
                    if dim == 0 {
                        return Err(Error::Config("embedding header declares dimension 0".into()));
                    }
                    table = Some(EmbeddingTable::new(dim));
                    continue;
                }
            }
        }

        if matches!(uri_language(token), Some(lang) if lang != "en") {
            skipped += 1;
            continue;
        }
        let concept = match ConceptId::new(token) {
            Ok(c) => c,
            Err(e) => {
                reject(&mut rejected, line_no, e.to_string());
                continue;
            }
        };
        let values: Result<Vec<f64>, _> = rest.iter().map(|v| v.parse::<f64>()).collect();
        let Ok(values) = values else {
            reject(&mut rejected, line_no, format!("non-numeric component for `{concept}`"));
            continue;
        };
        if values.is_empty() {
            reject(&mut rejected, line_no, format!("no components for `{concept}`"));
            continue;
        }
        let table = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.len() != table.dim {
            reject(
                &mut rejected,
                line_no,
                format!("`{concept}` has {} components, expected {}", values.len(), table.dim),
            );
            continue;
        }
        if table.contains(&concept) {
            reject(&mut rejected, line_no, format!("duplicate vector for `{concept}`"));
            continue;
        }
        if !table.insert(concept.clone(), values) {
            reject(&mut rejected, line_no, format!("zero-norm or non-finite vector for `{concept}`"));
        }
    }

    match table {
        Some(table) if !table.is_empty() => Ok(Ingested {
            value: table,
            rejected,
            skipped,
        }),
        _ => Err(Error::Config("no usable embedding vectors".into())),
    }
}

fn reject(rejected: &mut Vec<RecordError>, line: usize, message: String) {
    let err = RecordError::new(line, message);
    log::warn!("skipping embedding record, {err}");
    rejected.push(err);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(name: &str) -> ConceptId {
        ConceptId::new(name).unwrap()
    }

    #[test]
    fn single_row() {
        let t = parse_embeddings("knife 1.0 0.0\n").unwrap().value;
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get(&c("knife")).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn header_sets_dimension() {
        let t = parse_embeddings("2 2\nknife 1 0\nfork 0.8 0.6\n").unwrap().value;
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 2);
    }

    #[test]
    fn mismatched_dimension_is_skipped() {
        let got = parse_embeddings("knife 1 0\nfork 0.8 0.6 0.1\n").unwrap();
        assert_eq!(got.value.len(), 1);
        assert_eq!(got.rejected.len(), 1);
        assert_eq!(got.rejected[0].line, 2);
    }

    #[test]
    fn zero_vector_is_skipped() {
        let got = parse_embeddings("knife 1 0\nnothing 0 0\n").unwrap();
        assert!(!got.value.contains(&c("nothing")));
        assert_eq!(got.rejected.len(), 1);
    }

    #[test]
    fn uri_tokens_are_normalized_and_foreign_skipped() {
        let got = parse_embeddings("/c/en/peanut_butter 1 0\n/c/fr/beurre 0 1\n").unwrap();
        assert!(got.value.contains(&c("peanut_butter")));
        assert_eq!(got.value.len(), 1);
        assert_eq!(got.skipped, 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(parse_embeddings("").is_err());
        assert!(parse_embeddings("3 2\n").is_err());
        assert!(parse_embeddings("zero 0 0\n").is_err());
    }

    #[test]
    fn cosine_values() {
        let t = parse_embeddings("knife 1 0\nfork 0.8 0.6\nspread 0 1\n").unwrap().value;
        assert_eq!(t.cosine(&c("knife"), &c("knife")).unwrap(), 1.0);
        assert!((t.cosine(&c("knife"), &c("fork")).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(t.cosine(&c("spread"), &c("knife")).unwrap(), 0.0);
        assert!(matches!(
            t.cosine(&c("knife"), &c("spoon")),
            Err(Error::MissingEmbedding(_))
        ));
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(
            a in prop::collection::vec(-10.0f64..10.0, 3),
            b in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let mut t = EmbeddingTable::new(3);
            prop_assume!(t.insert(c("a"), a));
            prop_assume!(t.insert(c("b"), b));
            let ab = t.cosine(&c("a"), &c("b")).unwrap();
            let ba = t.cosine(&c("b"), &c("a")).unwrap();
            prop_assert!((-1.0..=1.0).contains(&ab));
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }
}
