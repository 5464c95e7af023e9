//! Gaze-driven region selection and target-object probabilities.
//!
//! Region energy is `w_alpha * phi + w_t * delta`, where `phi` is the
//! distance from the box center to the gaze point and `delta` the distance
//! to the nearest box selected in the previous frame, both divided by the
//! frame diagonal. The `k` lowest-energy regions of a frame are kept.

mod detections;

use serde::{Deserialize, Serialize};

use crate::concept::ConceptId;
use crate::correspondence::VocabularyMapping;
use crate::error::{Error, Result};

pub use detections::{group_segments, load_detections, parse_detections, Segment, DEFAULT_SEGMENT};

/// Gaze term used when a frame has no usable gaze point.
pub const NEUTRAL_GAZE_TERM: f64 = 0.5;

/// Axis-aligned box `(x, y, w, h)` in pixels, `(x, y)` the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::DegenerateBox([self.x, self.y, self.w, self.h]))
        }
    }

    /// Intersection with the frame `[0, width] x [0, height]`, `None` if empty.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(width);
        let y1 = (self.y + self.h).min(height);
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub concept: ConceptId,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProposal {
    pub bbox: BBox,
    /// Source-vocabulary labels, most confident first.
    pub labels: Vec<Label>,
    pub frame_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePoint {
    pub x: f64,
    pub y: f64,
    pub frame_index: u64,
    pub valid: bool,
}

impl GazePoint {
    pub fn at(x: f64, y: f64, frame_index: u64) -> Self {
        Self {
            x,
            y,
            frame_index,
            valid: true,
        }
    }

    pub fn missing(frame_index: u64) -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            frame_index,
            valid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub segment: String,
    pub frame_index: u64,
    pub frame_size: (f64, f64),
    pub regions: Vec<RegionProposal>,
    pub gaze: GazePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionParams {
    pub w_alpha: f64,
    pub w_t: f64,
    /// Regions kept per frame.
    pub k: usize,
    /// Floor on region energy when it divides a score.
    pub e_floor: f64,
}

impl Default for AttentionParams {
    fn default() -> Self {
        Self {
            w_alpha: 0.75,
            w_t: 1.0,
            k: 10,
            e_floor: 0.05,
        }
    }
}

impl AttentionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.w_alpha) || !positive(self.w_t) || !positive(self.e_floor) || self.k == 0 {
            return Err(Error::Config(format!("attention parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// A region that survived selection, with its energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedRegion {
    pub region: RegionProposal,
    pub energy: f64,
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

pub fn region_energy(
    region: &RegionProposal,
    gaze: &GazePoint,
    prev_selected: &[RegionProposal],
    frame_size: (f64, f64),
    params: &AttentionParams,
) -> f64 {
    let diagonal = frame_size.0.hypot(frame_size.1);
    let center = region.bbox.center();
    let gaze_term = if gaze.valid {
        distance(center, (gaze.x, gaze.y)) / diagonal
    } else {
        NEUTRAL_GAZE_TERM
    };
    let temporal_term = prev_selected
        .iter()
        .map(|p| distance(center, p.bbox.center()))
        .min_by(f64::total_cmp)
        .map_or(0.0, |d| d / diagonal);
    params.w_alpha * gaze_term + params.w_t * temporal_term
}

/// The `k` lowest-energy regions, ascending; ties keep detection order.
pub fn select_regions(
    frame: &DetectionFrame,
    prev_selected: &[RegionProposal],
    params: &AttentionParams,
) -> Vec<SelectedRegion> {
    let mut scored: Vec<SelectedRegion> = frame
        .regions
        .iter()
        .map(|r| SelectedRegion {
            energy: region_energy(r, &frame.gaze, prev_selected, frame.frame_size, params),
            region: r.clone(),
        })
        .collect();
    scored.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    scored.truncate(params.k);
    scored
}

/// Unnormalized probability of `target` in a region: the best over the
/// region's labels of `confidence * f_k(target, label) / max(E(r), e_floor)`.
/// Labels the mapping has no score for contribute nothing.
pub fn object_probability(
    target: &ConceptId,
    region: &RegionProposal,
    energy: f64,
    mapping: &VocabularyMapping,
    e_floor: f64,
) -> f64 {
    let denom = energy.max(e_floor);
    region
        .labels
        .iter()
        .filter_map(|l| mapping.score(target, &l.concept).map(|f| l.confidence * f / denom))
        .fold(0.0, f64::max)
}

/// Normalized probabilities of every mapped target for one region.
/// Sums to one; an all-zero region falls back to a uniform distribution.
pub fn target_distribution(
    region: &RegionProposal,
    energy: f64,
    mapping: &VocabularyMapping,
    e_floor: f64,
) -> Vec<(ConceptId, f64)> {
    let raw: Vec<(ConceptId, f64)> = mapping
        .targets()
        .map(|t| (t.clone(), object_probability(t, region, energy, mapping, e_floor)))
        .collect();
    let total: f64 = raw.iter().map(|r| r.1).sum();
    let n = raw.len() as f64;
    raw.into_iter()
        .map(|(t, p)| (t, if total > 0.0 { p / total } else { 1.0 / n }))
        .collect()
}

/// The `k` most probable targets for a region, descending, ties by name.
pub fn top_k_targets(
    region: &RegionProposal,
    energy: f64,
    mapping: &VocabularyMapping,
    k: usize,
    e_floor: f64,
) -> Vec<(ConceptId, f64)> {
    let mut dist = target_distribution(region, energy, mapping, e_floor);
    dist.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    dist.truncate(k.max(1));
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{expand_vocabulary, MappingParams};
    use crate::fixture;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn c(name: &str) -> ConceptId {
        ConceptId::new(name).unwrap()
    }

    fn region_at(cx: f64, cy: f64, labels: &[(&str, f64)]) -> RegionProposal {
        RegionProposal {
            bbox: BBox::new(cx - 10.0, cy - 10.0, 20.0, 20.0),
            labels: labels
                .iter()
                .map(|(n, p)| Label {
                    concept: c(n),
                    confidence: *p,
                })
                .collect(),
            frame_index: 0,
        }
    }

    const FRAME: (f64, f64) = (640.0, 480.0);

    #[test]
    fn energy_examples() {
        let p = AttentionParams::default();
        let gaze = GazePoint::at(100.0, 100.0, 0);
        assert_eq!(region_energy(&region_at(100.0, 100.0, &[]), &gaze, &[], FRAME, &p), 0.0);
        let r = region_at(160.0, 180.0, &[]);
        assert!((region_energy(&r, &gaze, &[], FRAME, &p) - 0.09375).abs() < 1e-12);
        let prev = [region_at(160.0, 180.0, &[])];
        assert!((region_energy(&r, &gaze, &prev, FRAME, &p) - 0.09375).abs() < 1e-12);
    }

    #[test]
    fn missing_gaze_uses_neutral_term_and_keeps_temporal_term() {
        let p = AttentionParams::default();
        let gaze = GazePoint::missing(0);
        let r = region_at(160.0, 180.0, &[]);
        assert_eq!(region_energy(&r, &gaze, &[], FRAME, &p), 0.75 * 0.5);
        let prev = [region_at(160.0, 280.0, &[])];
        assert!((region_energy(&r, &gaze, &prev, FRAME, &p) - (0.375 + 100.0 / 800.0)).abs() < 1e-12);
    }

    fn frame_with(regions: Vec<RegionProposal>) -> DetectionFrame {
        DetectionFrame {
            segment: "s".into(),
            frame_index: 0,
            frame_size: FRAME,
            regions,
            gaze: GazePoint::at(320.0, 240.0, 0),
        }
    }

    #[test]
    fn selection_sorts_and_truncates() {
        let p = AttentionParams::default();
        let few = frame_with(vec![
            region_at(500.0, 400.0, &[]),
            region_at(320.0, 240.0, &[]),
            region_at(300.0, 240.0, &[]),
        ]);
        let got = select_regions(&few, &[], &p);
        assert_eq!(got.len(), 3);
        assert!(got.windows(2).all(|w| w[0].energy <= w[1].energy));
        assert_eq!(got[0].region.bbox.center(), (320.0, 240.0));

        let many = frame_with((0..15).map(|i| region_at(20.0 + 40.0 * i as f64, 240.0, &[])).collect());
        assert_eq!(select_regions(&many, &[], &p).len(), 10);
        assert!(select_regions(&frame_with(vec![]), &[], &p).is_empty());
    }

    #[test]
    fn selection_ties_keep_detection_order() {
        let p = AttentionParams::default();
        let mut a = region_at(300.0, 240.0, &[("knife", 0.9)]);
        let mut b = region_at(340.0, 240.0, &[("fork", 0.9)]);
        a.frame_index = 1;
        b.frame_index = 2;
        let got = select_regions(&frame_with(vec![a, b]), &[], &p);
        assert_eq!(got[0].region.frame_index, 1);
    }

    fn fixture_mapping(targets: &[&str]) -> VocabularyMapping {
        let kg = fixture::knowledge_graph();
        let emb = fixture::embeddings();
        let source: BTreeSet<ConceptId> = [c("knife")].into();
        let target: BTreeSet<ConceptId> = targets.iter().map(|t| c(t)).collect();
        expand_vocabulary(&kg, &emb, &source, &target, &MappingParams::default(), 10).unwrap()
    }

    #[test]
    fn object_probability_examples() {
        let mapping = fixture_mapping(&["fork"]);
        let r = region_at(160.0, 180.0, &[("knife", 0.8)]);
        let raw = object_probability(&c("fork"), &r, 0.09375, &mapping, 0.05);
        assert!((raw - 8.174_184_721_786_72).abs() < 1e-9);

        let zero = region_at(160.0, 180.0, &[("knife", 0.0)]);
        assert_eq!(object_probability(&c("fork"), &zero, 0.09375, &mapping, 0.05), 0.0);

        let floored = object_probability(&c("fork"), &r, 0.0, &mapping, 0.05);
        assert!((floored - 0.8 * 0.957_912_272_084_381 / 0.05).abs() < 1e-9);

        assert_eq!(object_probability(&c("bread"), &r, 0.1, &mapping, 0.05), 0.0);
    }

    #[test]
    fn top_k_examples() {
        let r = region_at(160.0, 180.0, &[("knife", 0.8)]);
        let single = top_k_targets(&r, 0.1, &fixture_mapping(&["fork"]), 5, 0.05);
        assert_eq!(single, vec![(c("fork"), 1.0)]);

        let two = top_k_targets(&r, 0.1, &fixture_mapping(&["fork", "utensil"]), 5, 0.05);
        assert_eq!(two.len(), 2);
        // f_k(knife -> fork) = 0.9579 beats f_k(knife -> utensil) = 0.8917
        assert_eq!(two[0].0.as_str(), "fork");
        let expect = 0.957_912_272_084_381 / (0.957_912_272_084_381 + 0.891_694_040_150_285);
        assert!((two[0].1 - expect).abs() < 1e-6);
        assert!((two[0].1 + two[1].1 - 1.0).abs() < 1e-12);

        let truncated = top_k_targets(&r, 0.1, &fixture_mapping(&["fork", "utensil", "bread"]), 2, 0.05);
        assert_eq!(truncated.len(), 2);
    }

    #[test]
    fn bbox_clip() {
        let b = BBox::new(-10.0, 470.0, 30.0, 30.0);
        assert_eq!(b.clip(640.0, 480.0), Some(BBox::new(0.0, 470.0, 20.0, 10.0)));
        assert_eq!(BBox::new(700.0, 0.0, 10.0, 10.0).clip(640.0, 480.0), None);
    }

    proptest! {
        #[test]
        fn energy_is_nonnegative_and_translation_covariant(
            bx in 0.0f64..600.0, by in 0.0f64..440.0,
            gx in 0.0f64..640.0, gy in 0.0f64..480.0,
            px in 0.0f64..600.0, py in 0.0f64..440.0,
            dx in -200.0f64..200.0, dy in -200.0f64..200.0,
            with_prev in any::<bool>(),
        ) {
            let p = AttentionParams::default();
            let shift = |r: &RegionProposal| {
                let mut r = r.clone();
                r.bbox.x += dx;
                r.bbox.y += dy;
                r
            };
            let r = region_at(bx, by, &[]);
            let prev: Vec<RegionProposal> = if with_prev { vec![region_at(px, py, &[])] } else { vec![] };
            let e = region_energy(&r, &GazePoint::at(gx, gy, 0), &prev, FRAME, &p);
            prop_assert!(e >= 0.0);
            let moved_prev: Vec<RegionProposal> = prev.iter().map(shift).collect();
            let e2 = region_energy(&shift(&r), &GazePoint::at(gx + dx, gy + dy, 0), &moved_prev, FRAME, &p);
            prop_assert!((e - e2).abs() < 1e-9);
        }

        #[test]
        fn lower_energy_never_lowers_raw_score(e1 in 0.0f64..2.0, e2 in 0.0f64..2.0, conf in 0.0f64..1.0) {
            let mapping = fixture_mapping(&["fork", "utensil"]);
            let r = region_at(100.0, 100.0, &[("knife", conf)]);
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            for t in mapping.targets() {
                prop_assert!(object_probability(t, &r, lo, &mapping, 0.05) >= object_probability(t, &r, hi, &mapping, 0.05));
            }
        }

        #[test]
        fn normalized_targets_sum_to_one_and_scale_invariant(conf in 0.01f64..1.0, energy in 0.0f64..1.0, scale in 0.01f64..0.99) {
            let mapping = fixture_mapping(&["fork", "utensil", "bread", "cheese"]);
            let r = region_at(100.0, 100.0, &[("knife", conf)]);
            let d = target_distribution(&r, energy, &mapping, 0.05);
            prop_assert!((d.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-9);
            // Scaling the confidence scales every raw score by the same factor.
            let scaled = region_at(100.0, 100.0, &[("knife", conf * scale)]);
            let d2 = target_distribution(&scaled, energy, &mapping, 0.05);
            for (a, b) in d.iter().zip(&d2) {
                prop_assert!((a.1 - b.1).abs() < 1e-9);
            }
        }
    }
}
