//! Detection input: JSON lines, one frame per line.
//!
//! ```text
//! {"segment": "s1", "frame": 0, "size": [W, H], "gaze": [x, y] | null,
//!  "regions": [{"bbox": [x, y, w, h], "labels": [{"concept": "knife", "conf": 0.8}]}]}
//! ```
//!
//! `segment` is optional; frames without it belong to [`DEFAULT_SEGMENT`].

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::{BBox, DetectionFrame, GazePoint, Label, RegionProposal};
use crate::concept::ConceptId;
use crate::error::{Error, RecordError, Result};
use crate::knowledge::Ingested;

pub const DEFAULT_SEGMENT: &str = "default";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    #[serde(default)]
    segment: Option<String>,
    frame: u64,
    size: [f64; 2],
    #[serde(default)]
    gaze: Option<[f64; 2]>,
    #[serde(default)]
    regions: Vec<RegionRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRecord {
    bbox: [f64; 4],
    #[serde(default)]
    labels: Vec<LabelRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRecord {
    concept: String,
    conf: f64,
}

/// Frames of one video segment in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: String,
    pub frames: Vec<DetectionFrame>,
}

pub fn load_detections(path: impl AsRef<Path>, threshold: f64) -> Result<Ingested<Vec<DetectionFrame>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_detections(BufReader::new(file), threshold)
}

pub fn parse_detections(text: &str, threshold: f64) -> Result<Ingested<Vec<DetectionFrame>>> {
    read_detections(text.as_bytes(), threshold)
}

/// Parses frames, dropping labels under `threshold`, clipping boxes to the
/// frame and discarding regions left without labels or area. Lines that
/// fail to parse are reported and skipped.
fn read_detections<R: BufRead>(reader: R, threshold: f64) -> Result<Ingested<Vec<DetectionFrame>>> {
    let mut frames = Vec::new();
    let mut rejected = Vec::new();
    let mut skipped = 0;
    for (i, line) in reader.split(b'\n').enumerate() {
        let line_no = i + 1;
        let bytes = line.map_err(|e| Error::io("<detections>", e))?;
        let Ok(text) = std::str::from_utf8(&bytes) else {
            warn(&mut rejected, line_no, "line is not valid UTF-8".into());
            continue;
        };
        if text.trim().is_empty() {
            continue;
        }
        let record: FrameRecord = match serde_json::from_str(text) {
            Ok(r) => r,
            Err(e) => {
                warn(&mut rejected, line_no, format!("bad frame record: {e}"));
                continue;
            }
        };
        match convert(record, threshold, line_no, &mut rejected, &mut skipped) {
            Ok(frame) => frames.push(frame),
            Err(msg) => warn(&mut rejected, line_no, msg),
        }
    }
    Ok(Ingested {
        value: frames,
        rejected,
        skipped,
    })
}

fn warn(rejected: &mut Vec<RecordError>, line: usize, message: String) {
    let err = RecordError::new(line, message);
    log::warn!("detections: {err}");
    rejected.push(err);
}

fn convert(
    record: FrameRecord,
    threshold: f64,
    line_no: usize,
    rejected: &mut Vec<RecordError>,
    skipped: &mut usize,
) -> Result<DetectionFrame, String> {
    let [width, height] = record.size;
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(format!("frame size {:?} must be positive", record.size));
    }
    let segment = record.segment.unwrap_or_else(|| DEFAULT_SEGMENT.to_string());
    let frame_index = record.frame;

    let gaze = match record.gaze {
        Some([x, y]) if x.is_finite() && y.is_finite() && (0.0..=width).contains(&x) && (0.0..=height).contains(&y) => {
            GazePoint::at(x, y, frame_index)
        }
        _ => GazePoint::missing(frame_index),
    };

    let mut regions = Vec::with_capacity(record.regions.len());
    for region in record.regions {
        let [x, y, w, h] = region.bbox;
        let bbox = BBox::new(x, y, w, h);
        if !bbox.is_valid() {
            warn(rejected, line_no, format!("degenerate box {:?}", region.bbox));
            continue;
        }
        let Some(bbox) = bbox.clip(width, height) else {
            *skipped += 1;
            continue;
        };
        let mut labels = Vec::with_capacity(region.labels.len());
        for label in region.labels {
            if !(0.0..=1.0).contains(&label.conf) {
                warn(rejected, line_no, format!("confidence {} outside [0, 1]", label.conf));
                continue;
            }
            if label.conf < threshold {
                continue;
            }
            match ConceptId::new(&label.concept) {
                Ok(concept) => labels.push(Label {
                    concept,
                    confidence: label.conf,
                }),
                Err(e) => warn(rejected, line_no, e.to_string()),
            }
        }
        if labels.is_empty() {
            *skipped += 1;
            continue;
        }
        labels.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        regions.push(RegionProposal {
            bbox,
            labels,
            frame_index,
        });
    }

    Ok(DetectionFrame {
        segment,
        frame_index,
        frame_size: (width, height),
        regions,
        gaze,
    })
}

/// Groups frames by segment in order of first appearance and sorts each
/// segment's frames by index (stable for repeated indices).
pub fn group_segments(frames: Vec<DetectionFrame>) -> Vec<Segment> {
    let mut segments: Vec<Segment> = Vec::new();
    for frame in frames {
        match segments.iter_mut().find(|s| s.id == frame.segment) {
            Some(s) => s.frames.push(frame),
            None => segments.push(Segment {
                id: frame.segment.clone(),
                frames: vec![frame],
            }),
        }
    }
    for s in &mut segments {
        s.frames.sort_by_key(|f| f.frame_index);
    }
    segments
}
