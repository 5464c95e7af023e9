//! Line-oriented input files: ground truth, vocabularies and detection
//! evaluation boxes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::metrics::{DetectionEvalRecord, GtBox, PredBox};
use crate::attention::BBox;
use crate::concept::ConceptId;
use crate::error::{Error, RecordError, Result};
use crate::knowledge::Ingested;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub noun: ConceptId,
    pub verb: ConceptId,
}

/// Segment id to its annotated noun and verb.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub segments: BTreeMap<String, Annotation>,
}

impl GroundTruth {
    pub fn get(&self, segment: &str) -> Option<&Annotation> {
        self.segments.get(segment)
    }

    pub fn nouns(&self) -> BTreeSet<ConceptId> {
        self.segments.values().map(|a| a.noun.clone()).collect()
    }

    pub fn verbs(&self) -> BTreeSet<ConceptId> {
        self.segments.values().map(|a| a.verb.clone()).collect()
    }
}

fn read(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
}

fn reject(rejected: &mut Vec<RecordError>, what: &str, line: usize, message: String) {
    let err = RecordError::new(line, message);
    log::warn!("{what}: {err}");
    rejected.push(err);
}

/// Non-blank, non-comment lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Ingested<GroundTruth>> {
    parse_ground_truth(&read(path.as_ref())?)
}

/// `segment<TAB>verb<TAB>noun` per line. A repeated segment keeps its
/// first annotation.
pub fn parse_ground_truth(text: &str) -> Result<Ingested<GroundTruth>> {
    let mut gt = GroundTruth::default();
    let mut rejected = Vec::new();
    for (line, row) in content_lines(text) {
        let fields: Vec<&str> = row.split('\t').map(str::trim).collect();
        let [segment, verb, noun] = fields[..] else {
            reject(&mut rejected, "ground truth", line, format!("expected 3 fields, found {}", fields.len()));
            continue;
        };
        if segment.is_empty() {
            reject(&mut rejected, "ground truth", line, "empty segment id".into());
            continue;
        }
        let parsed = ConceptId::new(verb).and_then(|v| Ok((v, ConceptId::new(noun)?)));
        let (verb, noun) = match parsed {
            Ok(p) => p,
            Err(e) => {
                reject(&mut rejected, "ground truth", line, e.to_string());
                continue;
            }
        };
        if gt.segments.contains_key(segment) {
            reject(&mut rejected, "ground truth", line, format!("duplicate segment `{segment}`"));
            continue;
        }
        gt.segments.insert(segment.to_string(), Annotation { noun, verb });
    }
    Ok(Ingested {
        value: gt,
        rejected,
        skipped: 0,
    })
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Ingested<BTreeSet<ConceptId>>> {
    parse_vocabulary(&read(path.as_ref())?)
}

/// One concept per line.
pub fn parse_vocabulary(text: &str) -> Result<Ingested<BTreeSet<ConceptId>>> {
    let mut vocab = BTreeSet::new();
    let mut rejected = Vec::new();
    let mut skipped = 0;
    for (line, row) in content_lines(text) {
        match ConceptId::new(row) {
            Ok(c) => {
                if !vocab.insert(c) {
                    skipped += 1;
                }
            }
            Err(e) => reject(&mut rejected, "vocabulary", line, e.to_string()),
        }
    }
    Ok(Ingested {
        value: vocab,
        rejected,
        skipped,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxRecord {
    image: String,
    bbox: [f64; 4],
    class: String,
    #[serde(default)]
    score: Option<f64>,
}

fn image_entry(images: &mut BTreeMap<String, DetectionEvalRecord>, id: String) -> &mut DetectionEvalRecord {
    images.entry(id.clone()).or_insert_with(|| DetectionEvalRecord {
        image_id: id,
        ..Default::default()
    })
}

fn parse_boxes(text: &str, scored: bool, what: &str, rejected: &mut Vec<RecordError>) -> Vec<(String, BBox, String, f64)> {
    let mut out = Vec::new();
    for (line, row) in content_lines(text) {
        let rec: BoxRecord = match serde_json::from_str(row) {
            Ok(r) => r,
            Err(e) => {
                reject(rejected, what, line, format!("bad box record: {e}"));
                continue;
            }
        };
        let [x, y, w, h] = rec.bbox;
        let bbox = BBox::new(x, y, w, h);
        if !bbox.is_valid() {
            reject(rejected, what, line, format!("degenerate box {:?}", rec.bbox));
            continue;
        }
        let class = rec.class.trim().to_string();
        if class.is_empty() {
            reject(rejected, what, line, "empty class".into());
            continue;
        }
        let score = match (scored, rec.score) {
            (true, Some(s)) if s.is_finite() => s,
            (true, _) => {
                reject(rejected, what, line, "prediction needs a finite score".into());
                continue;
            }
            (false, _) => 0.0,
        };
        out.push((rec.image, bbox, class, score));
    }
    out
}

/// Merges ground-truth and prediction JSON lines into per-image records,
/// ordered by image id. Each line holds one box:
/// `{"image": "id", "bbox": [x, y, w, h], "class": "cup", "score": 0.7}`,
/// with `score` only on predictions.
pub fn parse_detection_eval(ground_truth: &str, predictions: &str) -> Result<Ingested<Vec<DetectionEvalRecord>>> {
    let mut rejected_gt = Vec::new();
    let mut rejected_pred = Vec::new();
    let mut images: BTreeMap<String, DetectionEvalRecord> = BTreeMap::new();
    for (image, bbox, class, _) in parse_boxes(ground_truth, false, "ground-truth boxes", &mut rejected_gt) {
        image_entry(&mut images, image).ground_truth.push(GtBox { bbox, class });
    }
    for (image, bbox, class, score) in parse_boxes(predictions, true, "predicted boxes", &mut rejected_pred) {
        image_entry(&mut images, image).predictions.push(PredBox { bbox, class, score });
    }
    rejected_gt.extend(rejected_pred);
    Ok(Ingested {
        value: images.into_values().collect(),
        rejected: rejected_gt,
        skipped: 0,
    })
}

pub fn load_detection_eval(
    ground_truth: impl AsRef<Path>,
    predictions: impl AsRef<Path>,
) -> Result<Ingested<Vec<DetectionEvalRecord>>> {
    parse_detection_eval(&read(ground_truth.as_ref())?, &read(predictions.as_ref())?)
}
