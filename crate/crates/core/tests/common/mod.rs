//! Shared test oracles and synthetic-data builders.
//!
//! Everything here recomputes results from first principles, independently
//! of the library's implementation paths, so the integration suites can
//! check the real code against a second derivation.

#![allow(dead_code)]

use rand::Rng;

use ovad_eval::dataset::{Dataset, PredictionSet};
use ovad_eval::taxonomy::TriState;

// ---------------------------------------------------------------------------
// Average-precision oracle: exhaustive threshold sweep

/// All-point AP by brute force: for every distinct score threshold, recount
/// true and false positives over the whole entry list, then integrate the
/// precision envelope computed by explicit maxima.
pub fn oracle_ap(entries: &[(f64, bool)], ghost_positives: usize) -> f64 {
    let total_pos = entries.iter().filter(|(_, p)| *p).count() + ghost_positives;
    assert!(total_pos > 0, "oracle needs at least one positive");

    let mut thresholds: Vec<f64> = entries.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    // one operating point per distinct threshold
    let mut points: Vec<(f64, f64)> = Vec::new();
    for &t in &thresholds {
        let tp = entries.iter().filter(|(s, p)| *p && *s >= t).count();
        let fp = entries.iter().filter(|(s, p)| !*p && *s >= t).count();
        points.push((tp as f64 / total_pos as f64, tp as f64 / (tp + fp) as f64));
    }

    let envelope_at = |recall: f64| -> f64 {
        points
            .iter()
            .filter(|(r, _)| *r >= recall)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max)
    };

    let mut ap = 0.0;
    let mut prev = 0.0;
    for &(recall, _) in &points {
        ap += (recall - prev) * envelope_at(recall);
        prev = recall;
    }
    ap
}

// ---------------------------------------------------------------------------
// IoU oracle: unit-grid cell counting for integer boxes

/// IoU of two integer-coordinate boxes by counting unit grid cells whose
/// center falls inside each box.
pub fn oracle_iou_cells(a: (i64, i64, i64, i64), b: (i64, i64, i64, i64)) -> f64 {
    let inside = |bx: (i64, i64, i64, i64), cx: i64, cy: i64| {
        cx >= bx.0 && cx < bx.0 + bx.2 && cy >= bx.1 && cy < bx.1 + bx.3
    };
    let min_x = a.0.min(b.0);
    let max_x = (a.0 + a.2).max(b.0 + b.2);
    let min_y = a.1.min(b.1);
    let max_y = (a.1 + a.3).max(b.1 + b.3);
    let mut inter = 0u64;
    let mut union = 0u64;
    for cx in min_x..max_x {
        for cy in min_y..max_y {
            let in_a = inside(a, cx, cy);
            let in_b = inside(b, cx, cy);
            if in_a && in_b {
                inter += 1;
            }
            if in_a || in_b {
                union += 1;
            }
        }
    }
    inter as f64 / union as f64
}

// ---------------------------------------------------------------------------
// End-to-end attribute-evaluation oracle

/// Corner-form IoU written independently of the library's geometry code.
fn corner_iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> f64 {
    let (ax1, ay1, ax2, ay2) = (a.0, a.1, a.0 + a.2, a.1 + a.3);
    let (bx1, by1, bx2, by2) = (b.0, b.1, b.0 + b.2, b.1 + b.3);
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    let area_a = (ax2 - ax1) * (ay2 - ay1);
    let area_b = (bx2 - bx1) * (by2 - by1);
    inter / (area_a + area_b - inter)
}

/// mAP over all attributes recomputed from scratch: per ground truth, the
/// max-IoU prediction (lowest index on ties, threshold applied afterwards),
/// per attribute the sample set with ghost positives for unmatched positive
/// labels, AP via [`oracle_ap`], unweighted mean over defined attributes.
pub fn oracle_detection_map(d: &Dataset, preds: &PredictionSet, iou_thresh: f64) -> f64 {
    let n_attrs = d.taxonomy.len();
    let mut entries: Vec<Vec<(f64, bool)>> = vec![Vec::new(); n_attrs];
    let mut ghosts = vec![0usize; n_attrs];

    for img in &d.images {
        let image_preds = preds.for_image(img.image_id);
        for gt in &img.instances {
            let gt_box = (gt.bbox.x, gt.bbox.y, gt.bbox.w, gt.bbox.h);
            let mut best: Option<(usize, f64)> = None;
            for (pi, pred) in image_preds.iter().enumerate() {
                let iou = corner_iou(gt_box, (pred.bbox.x, pred.bbox.y, pred.bbox.w, pred.bbox.h));
                let better = match best {
                    None => true,
                    Some((_, b)) => iou > b,
                };
                if better {
                    best = Some((pi, iou));
                }
            }
            let matched = best.filter(|&(_, iou)| iou >= iou_thresh);
            for a in 0..n_attrs {
                match gt.labels[a] {
                    TriState::Unknown => {}
                    TriState::Positive => match matched {
                        Some((pi, _)) => {
                            entries[a].push((image_preds[pi].attribute_scores[a], true))
                        }
                        None => ghosts[a] += 1,
                    },
                    TriState::Negative => {
                        if let Some((pi, _)) = matched {
                            entries[a].push((image_preds[pi].attribute_scores[a], false));
                        }
                    }
                }
            }
        }
    }

    let mut aps = Vec::new();
    for a in 0..n_attrs {
        let positives = entries[a].iter().filter(|(_, p)| *p).count() + ghosts[a];
        if positives > 0 {
            aps.push(oracle_ap(&entries[a], ghosts[a]));
        }
    }
    assert!(!aps.is_empty());
    aps.iter().sum::<f64>() / aps.len() as f64
}

/// Greedy detection matching recomputed independently: detections of one
/// category ordered by descending score (input order on ties), each taking
/// the unclaimed ground truth of maximal IoU at or above the threshold.
pub fn oracle_greedy_flags(
    gt_boxes: &[(f64, f64, f64, f64)],
    det_boxes: &[(f64, f64, f64, f64)],
    det_scores: &[f64],
    iou_thresh: f64,
) -> Vec<(usize, bool)> {
    let mut order: Vec<usize> = (0..det_boxes.len()).collect();
    order.sort_by(|&a, &b| {
        det_scores[b]
            .partial_cmp(&det_scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut claimed = vec![false; gt_boxes.len()];
    let mut flags = Vec::new();
    for di in order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gt_boxes.iter().enumerate() {
            if claimed[gi] {
                continue;
            }
            let iou = corner_iou(*gt, det_boxes[di]);
            if iou >= iou_thresh {
                let better = match best {
                    None => true,
                    Some((_, b)) => iou > b,
                };
                if better {
                    best = Some((gi, iou));
                }
            }
        }
        match best {
            Some((gi, _)) => {
                claimed[gi] = true;
                flags.push((di, true));
            }
            None => flags.push((di, false)),
        }
    }
    flags
}

// ---------------------------------------------------------------------------
// Synthetic fixture files

/// Five-attribute taxonomy covering all three exclusivity kinds, small
/// enough for hand-checked end-to-end runs.
pub fn toy5_taxonomy_json() -> String {
    r#"{
        "types": ["pose", "state", "color"],
        "attributes": [
            {"id": 0, "name": "vertical", "synonyms": ["vertical"], "type": "pose",
             "exclusivity": "exclusive"},
            {"id": 1, "name": "horizontal", "synonyms": ["horizontal"], "type": "pose",
             "exclusivity": "exclusive"},
            {"id": 2, "name": "open", "synonyms": ["open"], "type": "state",
             "exclusivity": "antonym_pairs", "antonym_of": 3},
            {"id": 3, "name": "closed", "synonyms": ["closed"], "type": "state",
             "exclusivity": "antonym_pairs", "antonym_of": 2},
            {"id": 4, "name": "red", "synonyms": ["red", "crimson"], "type": "color",
             "exclusivity": "color_multi_select"}
        ],
        "feasibility": {
            "human": ["pose", "state", "color"],
            "animal": ["pose", "state", "color"],
            "food": ["state", "color"],
            "object": ["pose", "state", "color"]
        }
    }"#
    .to_string()
}

/// Four categories spanning both splits and two groups.
pub fn toy_categories_json() -> String {
    r#"[
        {"id": 0, "name": "crate", "synonyms": ["crate", "box"], "split": "base", "group": "object"},
        {"id": 1, "name": "barrel", "synonyms": ["barrel"], "split": "base", "group": "object"},
        {"id": 2, "name": "melon", "synonyms": ["melon"], "split": "novel", "group": "food"},
        {"id": 3, "name": "lantern", "synonyms": ["lantern"], "split": "novel", "group": "object"}
    ]"#
    .to_string()
}

/// Draws a random synthetic benchmark: `n_images` images with 1..=4
/// instances each, tri-state labels over `n_attrs` attributes, and for each
/// image a prediction list with jittered copies of the ground-truth boxes
/// plus decoys, scored uniformly at random.
pub struct SyntheticSpec {
    pub n_images: usize,
    pub n_attrs: usize,
    pub n_categories: usize,
}

pub fn synthetic_annotation_json(rng: &mut impl Rng, spec: &SyntheticSpec) -> String {
    let mut images = Vec::new();
    let mut instances = Vec::new();
    for img in 0..spec.n_images {
        images.push(format!(
            r#"{{"id": {img}, "width": 200, "height": 200}}"#
        ));
        let n_inst = rng.random_range(1..=4);
        for _ in 0..n_inst {
            let x = rng.random_range(0.0..120.0);
            let y = rng.random_range(0.0..120.0);
            let w = rng.random_range(20.0..60.0);
            let h = rng.random_range(20.0..60.0);
            let cat = rng.random_range(0..spec.n_categories);
            let labels: Vec<String> = (0..spec.n_attrs)
                .map(|_| match rng.random_range(0..4) {
                    0 => "1".to_string(),
                    1 | 2 => "0".to_string(),
                    _ => "-1".to_string(),
                })
                .collect();
            instances.push(format!(
                r#"{{"image_id": {img}, "bbox": [{x:.3}, {y:.3}, {w:.3}, {h:.3}], "category_id": {cat}, "att_vec": [{}]}}"#,
                labels.join(",")
            ));
        }
    }
    format!(
        r#"{{"images": [{}], "instances": [{}]}}"#,
        images.join(","),
        instances.join(",")
    )
}

/// Prediction file for a dataset produced by [`synthetic_annotation_json`]:
/// every ground truth gets a jittered detection, plus one random decoy box
/// per image; all scores are uniform draws.
pub fn synthetic_prediction_json(rng: &mut impl Rng, d: &Dataset) -> String {
    let n_cats = d.categories.len();
    let n_attrs = d.taxonomy.len();
    let mut per_image = Vec::new();
    for img in &d.images {
        let mut preds = Vec::new();
        for inst in &img.instances {
            let dx = rng.random_range(-8.0..8.0);
            let dy = rng.random_range(-8.0..8.0);
            let x = (inst.bbox.x + dx).max(0.0);
            let y = (inst.bbox.y + dy).max(0.0);
            preds.push(prediction_record(rng, x, y, inst.bbox.w, inst.bbox.h, n_cats, n_attrs));
        }
        // a decoy box that may or may not overlap anything
        let x = rng.random_range(0.0..150.0);
        let y = rng.random_range(0.0..150.0);
        preds.push(prediction_record(rng, x, y, 30.0, 30.0, n_cats, n_attrs));
        per_image.push(format!(
            r#"{{"image_id": {}, "predictions": [{}]}}"#,
            img.image_id,
            preds.join(",")
        ));
    }
    format!("[{}]", per_image.join(","))
}

fn prediction_record(
    rng: &mut impl Rng,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    n_cats: usize,
    n_attrs: usize,
) -> String {
    let object_scores: Vec<String> = (0..n_cats)
        .map(|_| format!("{:.6}", rng.random_range(0.0..1.0)))
        .collect();
    let attribute_scores: Vec<String> = (0..n_attrs)
        .map(|_| format!("{:.6}", rng.random_range(0.0..1.0)))
        .collect();
    format!(
        r#"{{"bbox": [{x:.3}, {y:.3}, {w:.3}, {h:.3}], "object_scores": [{}], "attribute_scores": [{}]}}"#,
        object_scores.join(","),
        attribute_scores.join(",")
    )
}
