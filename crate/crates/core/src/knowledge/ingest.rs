use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{Assertion, GraphBuilder, KnowledgeGraph, Relation};
use crate::concept::{uri_language, ConceptId};
use crate::error::{Error, RecordError, Result};

/// Which assertion dialect a stream uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssertionFormat {
    /// Decide per line: rows whose first field is an `/a/` edge URI are
    /// read as ConceptNet dump rows, everything else as 4-column TSV.
    #[default]
    Auto,
    /// `relation<TAB>start<TAB>end<TAB>weight`
    Tsv,
    /// Official ConceptNet 5 CSV dump (tab separated, 5 columns).
    ConceptNet,
}

/// An ingestion result together with the records that were passed over.
#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub value: T,
    /// Malformed records, with 1-based line numbers.
    pub rejected: Vec<RecordError>,
    /// Well-formed records left out on purpose (non-English concepts,
    /// relations outside the registered set in dumps).
    pub skipped: usize,
}

enum Row {
    Edge(Assertion),
    Skip,
}

pub fn load_assertions(path: impl AsRef<Path>, format: AssertionFormat) -> Result<Ingested<KnowledgeGraph>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_assertions(BufReader::new(file), format)
}

pub fn parse_assertions(text: &str, format: AssertionFormat) -> Result<Ingested<KnowledgeGraph>> {
    ingest_assertions(text.as_bytes(), format)
}

/// Reads assertions line by line. Bad rows are logged, collected and
/// skipped; the call only fails on I/O errors or when no row survives.
pub fn ingest_assertions<R: BufRead>(mut reader: R, format: AssertionFormat) -> Result<Ingested<KnowledgeGraph>> {
    let mut builder = GraphBuilder::new();
    let mut rejected = Vec::new();
    let mut skipped = 0;
    let mut buf = Vec::new();
    let mut line_no = 0;

    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io("<assertions>", e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line = match std::str::from_utf8(&buf) {
            Ok(s) => s.trim_end_matches(['\n', '\r']),
            Err(_) => {
                reject(&mut rejected, line_no, "line is not valid UTF-8".into());
                continue;
            }
        };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = match format {
            AssertionFormat::Tsv => parse_tsv_row(line),
            AssertionFormat::ConceptNet => parse_dump_row(line),
            AssertionFormat::Auto if line.starts_with("/a/") => parse_dump_row(line),
            AssertionFormat::Auto => parse_tsv_row(line),
        };
        match parsed {
            Ok(Row::Edge(a)) => builder.insert(a),
            Ok(Row::Skip) => skipped += 1,
            Err(msg) => reject(&mut rejected, line_no, msg),
        }
    }

    if builder.is_empty() {
        return Err(Error::EmptyGraph {
            skipped: rejected.len() + skipped,
        });
    }
    Ok(Ingested {
        value: builder.build(),
        rejected,
        skipped,
    })
}

fn reject(rejected: &mut Vec<RecordError>, line: usize, message: String) {
    let err = RecordError::new(line, message);
    log::warn!("skipping assertion record, {err}");
    rejected.push(err);
}

fn parse_weight(raw: &str) -> Result<f64, String> {
    let w: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("weight {raw:?} is not a number"))?;
    if !w.is_finite() {
        return Err(format!("weight {raw:?} is not finite"));
    }
    Ok(w)
}

fn concept(raw: &str) -> Result<ConceptId, String> {
    ConceptId::new(raw).map_err(|e| e.to_string())
}

fn parse_tsv_row(line: &str) -> Result<Row, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    }
    let relation: Relation = fields[0].parse().map_err(|e: super::UnknownRelation| e.to_string())?;
    Ok(Row::Edge(Assertion::new(
        relation,
        concept(fields[1])?,
        concept(fields[2])?,
        parse_weight(fields[3])?,
    )))
}

fn parse_dump_row(line: &str) -> Result<Row, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 tab-separated fields, found {}", fields.len()));
    }
    let (rel_uri, start_uri, end_uri, meta) = (fields[1], fields[2], fields[3], fields[4]);

    let Some(rel_name) = rel_uri.strip_prefix("/r/") else {
        return Err(format!("relation {rel_uri:?} is not a /r/ URI"));
    };
    let relation = match rel_name.parse::<Relation>() {
        Ok(r) => r,
        Err(_) if rel_name.starts_with("dbpedia/") || rel_name == "ExternalURL" => {
            return Ok(Row::Skip)
        }
        Err(e) => return Err(e.to_string()),
    };
    for uri in [start_uri, end_uri] {
        match uri_language(uri) {
            Some("en") => {}
            Some(_) => return Ok(Row::Skip),
            None => return Err(format!("concept {uri:?} is not a /c/ URI")),
        }
    }

    let meta: serde_json::Value =
        serde_json::from_str(meta).map_err(|e| format!("metadata is not JSON: {e}"))?;
    let weight = match meta.get("weight") {
        Some(serde_json::Value::Number(n)) => n.as_f64().filter(|w| w.is_finite()),
        _ => None,
    }
    .ok_or_else(|| "metadata has no numeric \"weight\"".to_string())?;

    Ok(Row::Edge(Assertion::new(
        relation,
        concept(start_uri)?,
        concept(end_uri)?,
        weight,
    )))
}
