//! Benchmark evaluation: attribute AP/mAP and generalized detection AP.

use rayon::prelude::*;

use crate::ap::{average_precision, RankedSamples, SampleLabel};
use crate::dataset::{Dataset, OracleScores, PredictionSet};
use crate::error::{Error, Result};
use crate::matching::{match_for_attributes, match_for_detection};
use crate::splits::{frequency_splits, positive_frequencies, FrequencySplits};
use crate::taxonomy::{CategorySplit, TriState};

/// How attribute scores are associated with ground-truth objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Scores come from detected boxes matched to ground truths by IoU.
    Detection,
    /// Scores are given directly on ground-truth boxes.
    BoxOracle,
}

/// Scored input for [`attribute_eval`].
#[derive(Debug, Clone, Copy)]
pub enum EvalInput<'a> {
    Detection {
        predictions: &'a PredictionSet,
        iou_thresh: f64,
    },
    BoxOracle {
        scores: &'a OracleScores,
    },
}

impl EvalInput<'_> {
    pub fn mode(&self) -> EvalMode {
        match self {
            EvalInput::Detection { .. } => EvalMode::Detection,
            EvalInput::BoxOracle { .. } => EvalMode::BoxOracle,
        }
    }
}

/// Detection AP at IoU 0.5 over novel, base and all categories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ovd80Scores {
    pub ap50_novel: Option<f64>,
    pub ap50_base: Option<f64>,
    pub ap50_all: Option<f64>,
}

/// Per-attribute APs and their aggregates. Values are fractions in [0, 1];
/// rendering multiplies by 100.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    /// AP per attribute id; `None` when the attribute had no positives
    /// after unknown-exclusion and was skipped.
    pub per_attribute_ap: Vec<Option<f64>>,
    pub map_all: Option<f64>,
    pub map_head: Option<f64>,
    pub map_medium: Option<f64>,
    pub map_tail: Option<f64>,
    pub splits: FrequencySplits,
    /// Attribute ids skipped from the means.
    pub skipped: Vec<usize>,
    pub ovd80: Option<Ovd80Scores>,
}

fn mean_of_defined(aps: &[Option<f64>], ids: &[usize]) -> Option<f64> {
    let defined: Vec<f64> = ids.iter().filter_map(|&id| aps.get(id).copied().flatten()).collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

fn assemble_report(
    mode: EvalMode,
    per_attribute_ap: Vec<Option<f64>>,
    splits: FrequencySplits,
) -> EvalReport {
    let all_ids: Vec<usize> = (0..per_attribute_ap.len()).collect();
    let skipped = all_ids
        .iter()
        .copied()
        .filter(|&id| per_attribute_ap[id].is_none())
        .collect();
    EvalReport {
        mode,
        map_all: mean_of_defined(&per_attribute_ap, &all_ids),
        map_head: mean_of_defined(&per_attribute_ap, &splits.head),
        map_medium: mean_of_defined(&per_attribute_ap, &splits.medium),
        map_tail: mean_of_defined(&per_attribute_ap, &splits.tail),
        per_attribute_ap,
        splits,
        skipped,
        ovd80: None,
    }
}

fn check_labels(d: &Dataset) -> Result<()> {
    for img in &d.images {
        for (idx, inst) in img.instances.iter().enumerate() {
            if inst.labels.len() != d.taxonomy.len() {
                return Err(Error::invalid(format!(
                    "image {} instance {idx}: label vector has length {}, expected {}",
                    img.image_id,
                    inst.labels.len(),
                    d.taxonomy.len()
                )));
            }
        }
    }
    Ok(())
}

/// Evaluates attribute AP for every attribute and aggregates per split.
///
/// Ground truths with an unknown label for an attribute are excluded from
/// that attribute's sample set. In detection mode each ground truth takes
/// the attribute scores of its max-IoU match; unmatched positives become
/// ghost positives (recall hits with no retrievable score) and unmatched
/// negatives are dropped. Box-oracle mode requires one score vector per
/// ground-truth instance.
pub fn attribute_eval(d: &Dataset, input: EvalInput<'_>) -> Result<EvalReport> {
    check_labels(d)?;
    let per_attribute_ap = attribute_eval_images(d.taxonomy.len(), &d.images, input)?;
    let splits = frequency_splits(&positive_frequencies(d));
    Ok(assemble_report(input.mode(), per_attribute_ap, splits))
}

/// Per-attribute APs over an arbitrary image subset; the building block of
/// [`attribute_eval`] and the subset-stability analysis.
pub fn attribute_eval_images(
    n_attrs: usize,
    images: &[crate::dataset::AnnotatedImage],
    input: EvalInput<'_>,
) -> Result<Vec<Option<f64>>> {
    // Per image, the matched score vector for each ground truth (None for
    // unmatched). Images are independent; matching runs in parallel.
    let per_image: Vec<Vec<Option<Vec<f64>>>> = images
        .par_iter()
        .map(|img| -> Result<Vec<Option<Vec<f64>>>> {
            match input {
                EvalInput::Detection {
                    predictions,
                    iou_thresh,
                } => {
                    let preds = predictions.for_image(img.image_id);
                    for p in preds {
                        if p.attribute_scores.len() != n_attrs {
                            return Err(Error::invalid(format!(
                                "image {}: prediction attribute scores have length {}, expected {n_attrs}",
                                img.image_id,
                                p.attribute_scores.len()
                            )));
                        }
                    }
                    let matches = match_for_attributes(&img.instances, preds, iou_thresh)?;
                    Ok(matches
                        .per_gt
                        .iter()
                        .map(|m| m.map(|(pi, _)| preds[pi].attribute_scores.clone()))
                        .collect())
                }
                EvalInput::BoxOracle { scores } => img
                    .instances
                    .iter()
                    .enumerate()
                    .map(|(idx, _)| {
                        let v = scores
                            .by_instance
                            .get(&(img.image_id, idx))
                            .ok_or_else(|| {
                                Error::input(format!(
                                    "no oracle scores for image {} instance {idx}",
                                    img.image_id
                                ))
                            })?;
                        if v.len() != n_attrs {
                            return Err(Error::invalid(format!(
                                "oracle scores for image {} instance {idx} have length {}, expected {n_attrs}",
                                img.image_id,
                                v.len()
                            )));
                        }
                        Ok(Some(v.clone()))
                    })
                    .collect(),
            }
        })
        .collect::<Result<_>>()?;

    let mut samples: Vec<RankedSamples> = vec![RankedSamples::default(); n_attrs];
    for (img, matched) in images.iter().zip(&per_image) {
        for (inst, scores) in img.instances.iter().zip(matched) {
            if inst.labels.len() != n_attrs {
                return Err(Error::invalid(format!(
                    "image {}: label vector has length {}, expected {n_attrs}",
                    img.image_id,
                    inst.labels.len()
                )));
            }
            match scores {
                Some(scores) => {
                    for (a, &label) in inst.labels.iter().enumerate() {
                        let sample_label = match label {
                            TriState::Positive => SampleLabel::Positive,
                            TriState::Negative => SampleLabel::Negative,
                            TriState::Unknown => continue,
                        };
                        samples[a].entries.push((scores[a], sample_label));
                    }
                }
                None => {
                    for (a, &label) in inst.labels.iter().enumerate() {
                        if label == TriState::Positive {
                            samples[a].ghost_positives += 1;
                        }
                    }
                }
            }
        }
    }

    samples
        .par_iter()
        .map(|s| {
            if s.positives() == 0 {
                Ok(None)
            } else {
                average_precision(s).map(Some)
            }
        })
        .collect::<Result<_>>()
}

/// AP of a constant scorer per attribute: the positive prevalence over
/// non-unknown labels. Attributes without positives are skipped.
pub fn chance_report(d: &Dataset, splits: &FrequencySplits) -> Result<EvalReport> {
    check_labels(d)?;
    let n_attrs = d.taxonomy.len();
    let mut pos = vec![0u64; n_attrs];
    let mut neg = vec![0u64; n_attrs];
    for img in &d.images {
        for inst in &img.instances {
            for (a, &label) in inst.labels.iter().enumerate() {
                match label {
                    TriState::Positive => pos[a] += 1,
                    TriState::Negative => neg[a] += 1,
                    TriState::Unknown => {}
                }
            }
        }
    }
    let per_attribute_ap: Vec<Option<f64>> = (0..n_attrs)
        .map(|a| {
            if pos[a] == 0 {
                None
            } else {
                Some(pos[a] as f64 / (pos[a] + neg[a]) as f64)
            }
        })
        .collect();
    Ok(assemble_report(
        EvalMode::BoxOracle,
        per_attribute_ap,
        splits.clone(),
    ))
}

/// Generalized detection AP at the given IoU threshold over all categories,
/// averaged over the novel, base and full category sets. Categories without
/// ground-truth instances have no defined AP and are skipped.
pub fn ovd80_eval(
    d: &Dataset,
    predictions: &PredictionSet,
    iou_thresh: f64,
) -> Result<Ovd80Scores> {
    let n_cats = d.categories.len();
    for preds in predictions.by_image.values() {
        for p in preds {
            if p.object_scores.len() != n_cats {
                return Err(Error::input(format!(
                    "prediction carries {} category scores, expected {n_cats}",
                    p.object_scores.len()
                )));
            }
        }
    }

    let per_category_ap: Vec<Option<f64>> = d
        .categories
        .par_iter()
        .enumerate()
        .map(|(ci, cat)| -> Result<Option<f64>> {
            let mut samples = RankedSamples::default();
            let mut total_gts = 0usize;
            let mut matched_gts = 0usize;
            for img in &d.images {
                total_gts += img
                    .instances
                    .iter()
                    .filter(|g| g.category_id == cat.id)
                    .count();
                let preds = predictions.for_image(img.image_id);
                let flags = match_for_detection(&img.instances, preds, cat.id, ci, iou_thresh)?;
                for f in &flags {
                    let label = if f.true_positive {
                        matched_gts += 1;
                        SampleLabel::Positive
                    } else {
                        SampleLabel::Negative
                    };
                    samples.entries.push((f.score, label));
                }
            }
            if total_gts == 0 {
                return Ok(None);
            }
            samples.ghost_positives = total_gts - matched_gts;
            average_precision(&samples).map(Some)
        })
        .collect::<Result<_>>()?;

    let mean_over = |split: Option<CategorySplit>| -> Option<f64> {
        let vals: Vec<f64> = d
            .categories
            .iter()
            .zip(&per_category_ap)
            .filter(|(c, _)| split.is_none_or(|s| c.split == s))
            .filter_map(|(_, ap)| *ap)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };

    Ok(Ovd80Scores {
        ap50_novel: mean_over(Some(CategorySplit::Novel)),
        ap50_base: mean_over(Some(CategorySplit::Base)),
        ap50_all: mean_over(None),
    })
}
