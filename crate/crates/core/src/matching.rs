//! Box matching protocols.
//!
//! Attribute evaluation matches each ground truth independently to the
//! prediction of maximum IoU, class-agnostically; detection evaluation uses
//! the standard score-ordered greedy assignment within one category.

use crate::dataset::{AnnotatedInstance, PredictedInstance};
use crate::error::{Error, Result};

/// Per-ground-truth match: prediction index and the achieved IoU.
///
/// Every recorded IoU is at least the threshold the match was made with.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub per_gt: Vec<Option<(usize, f64)>>,
}

/// Matches each ground truth to the prediction with maximum IoU, ignoring
/// class labels. A prediction may serve several ground truths; IoU ties go
/// to the lowest prediction index. Matches below `iou_thresh` are dropped.
pub fn match_for_attributes(
    gts: &[AnnotatedInstance],
    preds: &[PredictedInstance],
    iou_thresh: f64,
) -> Result<MatchResult> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(Error::input(format!(
            "iou threshold must lie in (0, 1], got {iou_thresh}"
        )));
    }
    let per_gt = gts
        .iter()
        .map(|gt| {
            let mut best: Option<(usize, f64)> = None;
            for (pi, pred) in preds.iter().enumerate() {
                let iou = gt.bbox.iou(&pred.bbox);
                // strict > keeps the lowest index on ties
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((pi, iou));
                }
            }
            best.filter(|&(_, iou)| iou >= iou_thresh)
        })
        .collect();
    Ok(MatchResult { per_gt })
}

/// TP/FP outcome for one scored detection of a single category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionFlag {
    /// Index into the prediction list the detection came from.
    pub pred_index: usize,
    pub score: f64,
    pub true_positive: bool,
}

/// Score-ordered greedy matching for detection AP, one category at a time.
///
/// Predictions are ranked by descending score for `category_index` (ties by
/// input order); each claims the unclaimed ground truth of that category
/// with maximum IoU >= `iou_thresh`, otherwise counts as a false positive.
pub fn match_for_detection(
    gts: &[AnnotatedInstance],
    preds: &[PredictedInstance],
    category_id: u32,
    category_index: usize,
    iou_thresh: f64,
) -> Result<Vec<DetectionFlag>> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(Error::input(format!(
            "iou threshold must lie in (0, 1], got {iou_thresh}"
        )));
    }
    for pred in preds {
        if category_index >= pred.object_scores.len() {
            return Err(Error::input(format!(
                "prediction carries {} category scores, index {category_index} requested",
                pred.object_scores.len()
            )));
        }
    }

    let gt_indices: Vec<usize> = gts
        .iter()
        .enumerate()
        .filter(|(_, g)| g.category_id == category_id)
        .map(|(i, _)| i)
        .collect();

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b].object_scores[category_index]
            .partial_cmp(&preds[a].object_scores[category_index])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut claimed = vec![false; gts.len()];
    let mut flags = Vec::with_capacity(order.len());
    for pi in order {
        let mut best: Option<(usize, f64)> = None;
        for &gi in &gt_indices {
            if claimed[gi] {
                continue;
            }
            let iou = preds[pi].bbox.iou(&gts[gi].bbox);
            if iou >= iou_thresh && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        let true_positive = match best {
            Some((gi, _)) => {
                claimed[gi] = true;
                true
            }
            None => false,
        };
        flags.push(DetectionFlag {
            pred_index: pi,
            score: preds[pi].object_scores[category_index],
            true_positive,
        });
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::taxonomy::TriState;

    fn gt(x: f64, y: f64, w: f64, h: f64, category_id: u32) -> AnnotatedInstance {
        AnnotatedInstance {
            bbox: BoundingBox::new(x, y, w, h).unwrap(),
            category_id,
            labels: vec![TriState::Positive],
        }
    }

    fn pred(x: f64, y: f64, w: f64, h: f64, score: f64) -> PredictedInstance {
        PredictedInstance {
            bbox: BoundingBox::new(x, y, w, h).unwrap(),
            object_scores: vec![score],
            attribute_scores: vec![score],
        }
    }

    #[test]
    fn single_overlapping_prediction_matches() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 0)];
        // offset by 2: IoU = 64 / 136 ≈ 0.47 < 0.5, offset by 1: 81/119 ≈ 0.68
        let preds = [pred(1.0, 1.0, 10.0, 10.0, 0.9)];
        let m = match_for_attributes(&gts, &preds, 0.5).unwrap();
        let (pi, iou) = m.per_gt[0].unwrap();
        assert_eq!(pi, 0);
        assert!(iou > 0.5);
    }

    #[test]
    fn argmax_prediction_wins() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 0)];
        let preds = [
            pred(3.0, 0.0, 10.0, 10.0, 0.9), // IoU 70/130
            pred(1.0, 0.0, 10.0, 10.0, 0.1), // IoU 90/110
        ];
        let m = match_for_attributes(&gts, &preds, 0.5).unwrap();
        assert_eq!(m.per_gt[0].unwrap().0, 1);
    }

    #[test]
    fn below_threshold_stays_unmatched() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 0)];
        let preds = [pred(8.0, 8.0, 10.0, 10.0, 0.9)];
        let m = match_for_attributes(&gts, &preds, 0.5).unwrap();
        assert!(m.per_gt[0].is_none());
    }

    #[test]
    fn one_prediction_may_serve_multiple_gts() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 0), gt(1.0, 1.0, 10.0, 10.0, 1)];
        let preds = [pred(0.5, 0.5, 10.0, 10.0, 0.9)];
        let m = match_for_attributes(&gts, &preds, 0.5).unwrap();
        assert_eq!(m.per_gt[0].unwrap().0, 0);
        assert_eq!(m.per_gt[1].unwrap().0, 0);
    }

    #[test]
    fn empty_predictions_leave_all_unmatched() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 0)];
        let m = match_for_attributes(&gts, &[], 0.5).unwrap();
        assert_eq!(m.per_gt, vec![None]);
    }

    #[test]
    fn iou_ties_go_to_lowest_prediction_index() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 0)];
        // mirror-image offsets produce identical IoU
        let preds = [pred(1.0, 0.0, 10.0, 10.0, 0.5), pred(-1.0, 0.0, 10.0, 10.0, 0.5)];
        let m = match_for_attributes(&gts, &preds, 0.5).unwrap();
        assert_eq!(m.per_gt[0].unwrap().0, 0);
    }

    #[test]
    fn perfect_detections_are_all_tp() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 0), gt(50.0, 50.0, 10.0, 10.0, 0)];
        let preds = [pred(0.0, 0.0, 10.0, 10.0, 0.9), pred(50.0, 50.0, 10.0, 10.0, 0.8)];
        let flags = match_for_detection(&gts, &preds, 0, 0, 0.5).unwrap();
        assert!(flags.iter().all(|f| f.true_positive));
    }

    #[test]
    fn duplicate_detection_is_fp() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 0)];
        let preds = [pred(0.0, 0.0, 10.0, 10.0, 0.6), pred(1.0, 1.0, 10.0, 10.0, 0.9)];
        let flags = match_for_detection(&gts, &preds, 0, 0, 0.5).unwrap();
        // higher-scored prediction (index 1) claims the gt
        assert_eq!(flags[0].pred_index, 1);
        assert!(flags[0].true_positive);
        assert!(!flags[1].true_positive);
    }

    #[test]
    fn detection_ignores_other_categories() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, 7)];
        let preds = [pred(0.0, 0.0, 10.0, 10.0, 0.9)];
        let flags = match_for_detection(&gts, &preds, 0, 0, 0.5).unwrap();
        assert!(!flags[0].true_positive); // gt belongs to category 7
    }
}
