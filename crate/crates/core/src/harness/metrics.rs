//! Recognition accuracy and detection metrics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attention::BBox;
use crate::error::{Error, Result};

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::Config("metrics need at least one sample".into()));
    }
    Ok(())
}

/// Per-sample indicator of the label appearing in the first `k` predictions.
pub fn hits_at_k<T: PartialEq>(preds: &[Vec<T>], gt: &[T], k: usize) -> Result<Vec<bool>> {
    check_lengths(preds.len(), gt.len())?;
    Ok(preds
        .iter()
        .zip(gt)
        .map(|(ranked, label)| ranked.iter().take(k).any(|p| p == label))
        .collect())
}

/// Percentage of samples whose label is among the first `k` predictions.
pub fn topk_accuracy<T: PartialEq>(preds: &[Vec<T>], gt: &[T], k: usize) -> Result<f64> {
    let hits = hits_at_k(preds, gt, k)?;
    Ok(percentage(hits.iter().filter(|&&h| h).count(), hits.len()))
}

/// Mean over samples of the harmonic mean of the two `{0, 100}` scores,
/// which is 100 exactly when both hit.
pub fn activity_accuracy(noun_hit: &[bool], verb_hit: &[bool]) -> Result<f64> {
    check_lengths(noun_hit.len(), verb_hit.len())?;
    let both = noun_hit.iter().zip(verb_hit).filter(|(n, v)| **n && **v).count();
    Ok(percentage(both, noun_hit.len()))
}

fn percentage(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    let inter = ix.max(0.0) * iy.max(0.0);
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub bbox: BBox,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredBox {
    pub bbox: BBox,
    pub class: String,
    pub score: f64,
}

/// Ground truth and predictions for one image.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionEvalRecord {
    pub image_id: String,
    pub ground_truth: Vec<GtBox>,
    pub predictions: Vec<PredBox>,
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

pub const MAX_DETECTIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMap {
    pub iou: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub per_threshold: Vec<ThresholdMap>,
    pub map_50: f64,
    pub map_75: f64,
    /// Mean of `per_threshold`.
    pub map_mean: f64,
    /// Class-averaged recall at IoU 0.5 keeping the 100 best predictions
    /// per image.
    pub recall_100: f64,
    pub classes: Vec<String>,
    /// Classes seen only in predictions.
    pub excluded_classes: Vec<String>,
}

/// A prediction flattened out of its image.
struct Flat<'a> {
    image: usize,
    pred: &'a PredBox,
}

/// Score descending, then image id, then box coordinates. Equal-score
/// predictions therefore get the same order however the input is arranged.
fn canonical(records: &[DetectionEvalRecord], a: &Flat, b: &Flat) -> Ordering {
    b.pred
        .score
        .total_cmp(&a.pred.score)
        .then_with(|| records[a.image].image_id.cmp(&records[b.image].image_id))
        .then_with(|| box_order(&a.pred.bbox, &b.pred.bbox))
}

fn box_order(a: &BBox, b: &BBox) -> Ordering {
    [a.x, a.y, a.w, a.h]
        .iter()
        .zip([b.x, b.y, b.w, b.h].iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Greedy matching in canonical order: each prediction takes the unmatched
/// ground-truth box of its class and image with the highest IoU, if that
/// IoU reaches `threshold` (equal IoU goes to the smaller box coordinates).
/// Returns the true-positive flag per prediction.
fn match_class(records: &[DetectionEvalRecord], preds: &[Flat], class: &str, threshold: f64) -> Result<Vec<bool>> {
    let mut taken: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut tp = Vec::with_capacity(preds.len());
    for p in preds {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in records[p.image].ground_truth.iter().enumerate() {
            if gt.class != class || taken.contains(&(p.image, g)) {
                continue;
            }
            let overlap = iou(&p.pred.bbox, &gt.bbox)?;
            let better = best.is_none_or(|(b, o)| {
                overlap > o || (overlap == o && box_order(&gt.bbox, &records[p.image].ground_truth[b].bbox).is_lt())
            });
            if overlap >= threshold && better {
                best = Some((g, overlap));
            }
        }
        if let Some((g, _)) = best {
            taken.insert((p.image, g));
        }
        tp.push(best.is_some());
    }
    Ok(tp)
}

/// All-point interpolated AP. The curve is sampled once per distinct score.
fn average_precision(preds: &[Flat], tp: &[bool], n_gt: usize) -> f64 {
    let mut points: Vec<(f64, f64)> = Vec::new();
    let (mut hits, mut seen) = (0usize, 0usize);
    for (i, p) in preds.iter().enumerate() {
        seen += 1;
        hits += tp[i] as usize;
        let last_of_score = preds.get(i + 1).is_none_or(|next| next.pred.score != p.pred.score);
        if last_of_score {
            points.push((hits as f64 / n_gt as f64, hits as f64 / seen as f64));
        }
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..points.len() {
        let envelope = points[i..].iter().map(|p| p.1).fold(0.0, f64::max);
        ap += (points[i].0 - prev_recall) * envelope;
        prev_recall = points[i].0;
    }
    ap
}

pub fn detection_map(records: &[DetectionEvalRecord], iou_thresholds: &[f64]) -> Result<DetectionReport> {
    if records.is_empty() {
        return Err(Error::Config("detection evaluation needs at least one image".into()));
    }
    for r in records {
        for g in &r.ground_truth {
            g.bbox.validate()?;
        }
        for p in &r.predictions {
            p.bbox.validate()?;
            if !p.score.is_finite() {
                return Err(Error::Config(format!("non-finite score in image `{}`", r.image_id)));
            }
        }
    }
    let mut gt_count: BTreeMap<&str, usize> = BTreeMap::new();
    for g in records.iter().flat_map(|r| &r.ground_truth) {
        *gt_count.entry(g.class.as_str()).or_default() += 1;
    }
    let predicted: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| &r.predictions)
        .map(|p| p.class.as_str())
        .collect();
    let excluded: Vec<String> = predicted
        .iter()
        .filter(|c| !gt_count.contains_key(*c))
        .map(|c| c.to_string())
        .collect();
    for c in &excluded {
        log::warn!("class `{c}` has no ground-truth boxes and is left out of mAP");
    }

    let mut by_class: BTreeMap<&str, Vec<Flat>> = BTreeMap::new();
    let mut capped: BTreeMap<&str, Vec<Flat>> = BTreeMap::new();
    for (image, r) in records.iter().enumerate() {
        let mut flat: Vec<Flat> = r.predictions.iter().map(|pred| Flat { image, pred }).collect();
        flat.sort_by(|a, b| canonical(records, a, b));
        for (i, f) in flat.into_iter().enumerate() {
            if !gt_count.contains_key(f.pred.class.as_str()) {
                continue;
            }
            if i < MAX_DETECTIONS {
                capped.entry(f.pred.class.as_str()).or_default().push(Flat { image, pred: f.pred });
            }
            by_class.entry(f.pred.class.as_str()).or_default().push(f);
        }
    }
    for preds in by_class.values_mut().chain(capped.values_mut()) {
        preds.sort_by(|a, b| canonical(records, a, b));
    }

    let map_at = |threshold: f64| -> Result<f64> {
        let mut total = 0.0;
        for (&class, &n_gt) in &gt_count {
            let preds = by_class.get(class).map(Vec::as_slice).unwrap_or(&[]);
            let tp = match_class(records, preds, class, threshold)?;
            total += average_precision(preds, &tp, n_gt);
        }
        Ok(total / gt_count.len() as f64)
    };

    let mut recall = 0.0;
    for (&class, &n_gt) in &gt_count {
        let preds = capped.get(class).map(Vec::as_slice).unwrap_or(&[]);
        let tp = match_class(records, preds, class, 0.5)?;
        recall += tp.iter().filter(|&&t| t).count() as f64 / n_gt as f64;
    }

    if gt_count.is_empty() {
        log::warn!("no ground-truth boxes; detection metrics are zero");
        return Ok(DetectionReport {
            per_threshold: iou_thresholds.iter().map(|&iou| ThresholdMap { iou, map: 0.0 }).collect(),
            map_50: 0.0,
            map_75: 0.0,
            map_mean: 0.0,
            recall_100: 0.0,
            classes: Vec::new(),
            excluded_classes: excluded,
        });
    }

    let per_threshold = iou_thresholds
        .iter()
        .map(|&iou| Ok(ThresholdMap { iou, map: map_at(iou)? }))
        .collect::<Result<Vec<_>>>()?;
    let map_mean = if per_threshold.is_empty() {
        0.0
    } else {
        per_threshold.iter().map(|t| t.map).sum::<f64>() / per_threshold.len() as f64
    };
    Ok(DetectionReport {
        map_50: map_at(0.5)?,
        map_75: map_at(0.75)?,
        map_mean,
        per_threshold,
        recall_100: recall / gt_count.len() as f64,
        classes: gt_count.keys().map(|c| c.to_string()).collect(),
        excluded_classes: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gt(x: f64, y: f64, w: f64, h: f64, class: &str) -> GtBox {
        GtBox {
            bbox: BBox::new(x, y, w, h),
            class: class.into(),
        }
    }

    fn pred(x: f64, y: f64, w: f64, h: f64, class: &str, score: f64) -> PredBox {
        PredBox {
            bbox: BBox::new(x, y, w, h),
            class: class.into(),
            score,
        }
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &BBox::new(5.0, 5.0, 1.0, 1.0)).unwrap(), 0.0);
        let third = iou(&a, &BBox::new(1.0, 0.0, 2.0, 2.0)).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-12);
        assert!(iou(&a, &BBox::new(0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn topk_examples() {
        let preds: Vec<Vec<u32>> = vec![vec![1, 2, 3]; 4];
        assert_eq!(topk_accuracy(&preds, &[1, 1, 1, 1], 1).unwrap(), 100.0);
        let deep: Vec<Vec<u32>> = vec![(0..10).collect(); 3];
        assert_eq!(topk_accuracy(&deep, &[7, 7, 7], 5).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&deep, &[7, 7, 7], 10).unwrap(), 100.0);
        assert!(matches!(
            topk_accuracy(&deep, &[7], 1),
            Err(Error::LengthMismatch { left: 3, right: 1 })
        ));
    }

    #[test]
    fn topk_hand_count() {
        // ten samples, label at these ranks (None = absent); six within 5
        let ranks = [Some(0), Some(4), None, Some(2), Some(9), Some(1), Some(5), Some(3), None, Some(0)];
        let preds: Vec<Vec<u32>> = ranks
            .iter()
            .map(|r| (0..10).map(|i| if Some(i as usize) == *r { 99 } else { i }).collect())
            .collect();
        assert_eq!(topk_accuracy(&preds, &[99; 10], 5).unwrap(), 60.0);
    }

    #[test]
    fn activity_examples() {
        assert_eq!(activity_accuracy(&[true; 3], &[true; 3]).unwrap(), 100.0);
        assert_eq!(activity_accuracy(&[true; 3], &[false; 3]).unwrap(), 0.0);
        let nouns = [true, true, true, true, true, false, true, false, false, true];
        let verbs = [true, false, true, true, false, true, true, false, false, false];
        assert_eq!(activity_accuracy(&nouns, &verbs).unwrap(), 40.0);
    }

    #[test]
    fn single_match_geometry() {
        // IoU of these two boxes is 0.6
        let rec = DetectionEvalRecord {
            image_id: "a".into(),
            ground_truth: vec![gt(0.0, 0.0, 4.0, 1.0, "cup")],
            predictions: vec![pred(1.0, 0.0, 4.0, 1.0, "cup", 0.9)],
        };
        assert!((iou(&rec.ground_truth[0].bbox, &rec.predictions[0].bbox).unwrap() - 0.6).abs() < 1e-12);
        let r = detection_map(&[rec], &[0.5, 0.7]).unwrap();
        assert_eq!(r.per_threshold[0].map, 1.0);
        assert_eq!(r.per_threshold[1].map, 0.0);
        assert_eq!(r.recall_100, 1.0);
    }

    #[test]
    fn wrong_class_scores_zero() {
        let rec = DetectionEvalRecord {
            image_id: "a".into(),
            ground_truth: vec![gt(0.0, 0.0, 2.0, 2.0, "cup")],
            predictions: vec![pred(0.0, 0.0, 2.0, 2.0, "bowl", 0.9)],
        };
        let r = detection_map(&[rec], &coco_thresholds()).unwrap();
        assert_eq!(r.map_50, 0.0);
        assert_eq!(r.map_mean, 0.0);
        assert_eq!(r.excluded_classes, vec!["bowl".to_string()]);
    }

    #[test]
    fn precision_envelope() {
        // tp, fp, tp over two ground-truth boxes: AP = 0.5 * 1 + 0.5 * 2/3
        let rec = DetectionEvalRecord {
            image_id: "a".into(),
            ground_truth: vec![gt(0.0, 0.0, 1.0, 1.0, "c"), gt(10.0, 0.0, 1.0, 1.0, "c")],
            predictions: vec![
                pred(0.0, 0.0, 1.0, 1.0, "c", 0.9),
                pred(5.0, 5.0, 1.0, 1.0, "c", 0.8),
                pred(10.0, 0.0, 1.0, 1.0, "c", 0.7),
            ],
        };
        let r = detection_map(&[rec], &[0.5]).unwrap();
        assert!((r.map_50 - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn recall_caps_predictions_per_image() {
        let mut predictions: Vec<PredBox> = (0..100).map(|i| pred(50.0 + i as f64, 50.0, 1.0, 1.0, "c", 0.9)).collect();
        predictions.push(pred(0.0, 0.0, 1.0, 1.0, "c", 0.1));
        let rec = DetectionEvalRecord {
            image_id: "a".into(),
            ground_truth: vec![gt(0.0, 0.0, 1.0, 1.0, "c")],
            predictions,
        };
        let r = detection_map(&[rec], &[0.5]).unwrap();
        assert_eq!(r.recall_100, 0.0);
        assert!(r.map_50 > 0.0);
    }

    #[test]
    fn thresholds_are_exact() {
        let t = coco_thresholds();
        assert_eq!(t.len(), 10);
        assert_eq!(t[5], 0.75);
        assert_eq!(t[9], 0.95);
    }

    proptest! {
        #[test]
        fn topk_monotone_in_k(
            data in prop::collection::vec((prop::collection::vec(0u8..6, 0..8), 0u8..6), 1..30),
            k in 0usize..8,
        ) {
            let (preds, gt): (Vec<Vec<u8>>, Vec<u8>) = data.into_iter().unzip();
            let a = topk_accuracy(&preds, &gt, k).unwrap();
            let b = topk_accuracy(&preds, &gt, k + 1).unwrap();
            prop_assert!(a <= b);
        }

        #[test]
        fn activity_bounded_by_components(
            hits in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40),
        ) {
            let (n, v): (Vec<bool>, Vec<bool>) = hits.into_iter().unzip();
            let act = activity_accuracy(&n, &v).unwrap();
            let pct = |h: &[bool]| 100.0 * h.iter().filter(|&&x| x).count() as f64 / h.len() as f64;
            prop_assert!(act <= pct(&n).min(pct(&v)));
        }

        #[test]
        fn iou_in_unit_interval(
            a in (0.0f64..10.0, 0.0f64..10.0, 0.1f64..10.0, 0.1f64..10.0),
            b in (0.0f64..10.0, 0.0f64..10.0, 0.1f64..10.0, 0.1f64..10.0),
        ) {
            let x = BBox::new(a.0, a.1, a.2, a.3);
            let y = BBox::new(b.0, b.1, b.2, b.3);
            let v = iou(&x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - iou(&y, &x).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn map_invariant_to_reordering(
            boxes in prop::collection::vec((0u8..3, 0u8..4, 0u8..4, 0u8..2, prop::option::of(0u8..3)), 1..25),
        ) {
            let mut records: Vec<DetectionEvalRecord> = (0..3)
                .map(|i| DetectionEvalRecord { image_id: format!("img{i}"), ..Default::default() })
                .collect();
            for (img, x, y, class, score) in &boxes {
                let class = if *class == 0 { "a" } else { "b" };
                let (x, y) = (*x as f64, *y as f64);
                match score {
                    Some(s) => records[*img as usize].predictions.push(pred(x, y, 2.0, 2.0, class, *s as f64 / 3.0)),
                    None => records[*img as usize].ground_truth.push(gt(x, y, 2.0, 2.0, class)),
                }
            }
            let forward = detection_map(&records, &coco_thresholds()).unwrap();
            let mut shuffled = records.clone();
            shuffled.reverse();
            for r in &mut shuffled {
                r.predictions.reverse();
                r.ground_truth.reverse();
            }
            let backward = detection_map(&shuffled, &coco_thresholds()).unwrap();
            prop_assert_eq!(forward, backward);
        }
    }
}
