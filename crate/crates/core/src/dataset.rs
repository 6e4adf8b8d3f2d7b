//! Annotated datasets and model predictions.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::taxonomy::{AttributeTaxonomy, ObjectCategory, TriState};

pub type ImageId = i64;

/// A ground-truth object: box, category and tri-state attribute labels.
#[derive(Debug, Clone)]
pub struct AnnotatedInstance {
    pub bbox: BoundingBox,
    pub category_id: u32,
    /// One label per taxonomy attribute, indexed by attribute id.
    pub labels: Vec<TriState>,
}

/// One annotated image; pixel data is never loaded.
#[derive(Debug, Clone)]
pub struct AnnotatedImage {
    pub image_id: ImageId,
    pub width: f64,
    pub height: f64,
    pub instances: Vec<AnnotatedInstance>,
}

/// A full benchmark dataset: taxonomy, category vocabulary and images.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub taxonomy: AttributeTaxonomy,
    pub categories: Vec<ObjectCategory>,
    pub images: Vec<AnnotatedImage>,
}

impl Dataset {
    pub fn category(&self, id: u32) -> Option<&ObjectCategory> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn instance_count(&self) -> usize {
        self.images.iter().map(|img| img.instances.len()).sum()
    }
}

/// A model output for one box: per-category and per-attribute scores.
#[derive(Debug, Clone)]
pub struct PredictedInstance {
    pub bbox: BoundingBox,
    /// One score per object category, in category-file order.
    pub object_scores: Vec<f64>,
    /// One score per attribute, in taxonomy order.
    pub attribute_scores: Vec<f64>,
}

impl PredictedInstance {
    /// Checks vector lengths and score finiteness against a dataset.
    pub fn check_against(&self, d: &Dataset) -> Result<()> {
        if self.object_scores.len() != d.categories.len() {
            return Err(Error::invalid(format!(
                "object score vector has length {}, expected {}",
                self.object_scores.len(),
                d.categories.len()
            )));
        }
        if self.attribute_scores.len() != d.taxonomy.len() {
            return Err(Error::invalid(format!(
                "attribute score vector has length {}, expected {}",
                self.attribute_scores.len(),
                d.taxonomy.len()
            )));
        }
        if self
            .object_scores
            .iter()
            .chain(self.attribute_scores.iter())
            .any(|s| !s.is_finite())
        {
            return Err(Error::invalid("prediction scores must be finite"));
        }
        Ok(())
    }
}

/// Predictions grouped per image, aligned with the annotation file by id.
#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    pub by_image: HashMap<ImageId, Vec<PredictedInstance>>,
}

impl PredictionSet {
    pub fn for_image(&self, id: ImageId) -> &[PredictedInstance] {
        self.by_image.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Attribute scores evaluated directly on ground-truth boxes, keyed by
/// `(image_id, instance index within the image)`.
#[derive(Debug, Clone, Default)]
pub struct OracleScores {
    pub by_instance: HashMap<(ImageId, usize), Vec<f64>>,
}

/// One invariant violation found by [`validate_dataset`], with its locus.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub image_id: ImageId,
    /// Index of the offending instance within the image, if instance-level.
    pub instance: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.instance {
            Some(i) => write!(f, "image {} instance {}: {}", self.image_id, i, self.message),
            None => write!(f, "image {}: {}", self.image_id, self.message),
        }
    }
}

/// Reports every structural violation in the dataset without mutating it.
///
/// An empty result means the dataset satisfies all invariants: boxes are
/// valid and within image bounds, label vectors match the taxonomy size and
/// referenced category ids exist.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let known_ids: Vec<u32> = d.categories.iter().map(|c| c.id).collect();
    let mut violations = Vec::new();

    let positive_extent = |v: f64| v.is_finite() && v > 0.0;
    for img in &d.images {
        if !positive_extent(img.width) || !positive_extent(img.height) {
            violations.push(Violation {
                image_id: img.image_id,
                instance: None,
                message: format!("image extents must be positive, got {}x{}", img.width, img.height),
            });
        }
        for (idx, inst) in img.instances.iter().enumerate() {
            let b = &inst.bbox;
            if !(b.w > 0.0 && b.h > 0.0 && b.x.is_finite() && b.y.is_finite()) {
                violations.push(Violation {
                    image_id: img.image_id,
                    instance: Some(idx),
                    message: format!("degenerate box ({}, {}, {}, {})", b.x, b.y, b.w, b.h),
                });
            } else if b.x < 0.0 || b.y < 0.0 || b.right() > img.width || b.bottom() > img.height {
                violations.push(Violation {
                    image_id: img.image_id,
                    instance: Some(idx),
                    message: "box extends past image bounds".to_string(),
                });
            }
            if inst.labels.len() != d.taxonomy.len() {
                violations.push(Violation {
                    image_id: img.image_id,
                    instance: Some(idx),
                    message: format!(
                        "label vector has length {}, expected {}",
                        inst.labels.len(),
                        d.taxonomy.len()
                    ),
                });
            }
            if !known_ids.contains(&inst.category_id) {
                violations.push(Violation {
                    image_id: img.image_id,
                    instance: Some(idx),
                    message: format!("unknown category id {}", inst.category_id),
                });
            }
        }
    }

    violations
}
