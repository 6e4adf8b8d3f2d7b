//! Average precision over ranked samples.
//!
//! AP here is the all-point (precision-envelope) area under the
//! precision-recall curve, with one operating point per distinct score, so
//! tied scores collapse into a single point. Ghost positives are positives
//! that never received a score (unmatched ground truths): they enlarge the
//! recall denominator and are never retrieved.

use crate::error::{Error, Result};

/// Label of one scored sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Positive,
    Negative,
}

/// Scored samples of one attribute plus unretrievable positives.
#[derive(Debug, Clone, Default)]
pub struct RankedSamples {
    pub entries: Vec<(f64, SampleLabel)>,
    pub ghost_positives: usize,
}

impl RankedSamples {
    /// Total positives, counting ghosts.
    pub fn positives(&self) -> usize {
        self.entries
            .iter()
            .filter(|(_, l)| *l == SampleLabel::Positive)
            .count()
            + self.ghost_positives
    }
}

/// All-point average precision of the sample set.
///
/// Returns an error when there is no positive to recall (counting ghosts),
/// in which case the attribute has no defined AP and is skipped upstream.
pub fn average_precision(samples: &RankedSamples) -> Result<f64> {
    if samples.entries.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::input("sample scores must be finite"));
    }
    let total_positives = samples.positives();
    if total_positives == 0 {
        return Err(Error::input(
            "average precision is undefined without positives",
        ));
    }

    let mut sorted = samples.entries.clone();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    // One (recall, precision) point per distinct score value.
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            match sorted[i].1 {
                SampleLabel::Positive => tp += 1,
                SampleLabel::Negative => fp += 1,
            }
            i += 1;
        }
        points.push((
            tp as f64 / total_positives as f64,
            tp as f64 / (tp + fp) as f64,
        ));
    }

    // Suffix-max precision envelope, integrated stepwise over recall.
    let mut envelope = vec![0.0; points.len()];
    let mut max_p = 0.0f64;
    for (k, &(_, precision)) in points.iter().enumerate().rev() {
        max_p = max_p.max(precision);
        envelope[k] = max_p;
    }

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (k, &(recall, _)) in points.iter().enumerate() {
        ap += (recall - prev_recall) * envelope[k];
        prev_recall = recall;
    }
    Ok(ap)
}
