//! Head/medium/tail attribute splits from positive-annotation frequencies.

use crate::dataset::Dataset;
use crate::taxonomy::TriState;

/// Partition of attribute ids by annotation frequency.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrequencySplits {
    pub head: Vec<usize>,
    pub medium: Vec<usize>,
    pub tail: Vec<usize>,
}

/// Which split an attribute landed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Head,
    Medium,
    Tail,
}

impl FrequencySplits {
    pub fn split_of(&self, attribute_id: usize) -> Option<Split> {
        if self.head.contains(&attribute_id) {
            Some(Split::Head)
        } else if self.medium.contains(&attribute_id) {
            Some(Split::Medium)
        } else if self.tail.contains(&attribute_id) {
            Some(Split::Tail)
        } else {
            None
        }
    }
}

/// Splits attributes by positive-annotation count.
///
/// Thresholds are `t_high = median(f) + std(f)` and
/// `t_low = median(f) - std(f) / 10` with the population standard
/// deviation; head holds frequencies strictly above `t_high`, tail strictly
/// below `t_low`, and boundary values fall into medium.
pub fn frequency_splits(frequencies: &[u64]) -> FrequencySplits {
    if frequencies.is_empty() {
        return FrequencySplits::default();
    }
    let f: Vec<f64> = frequencies.iter().map(|&c| c as f64).collect();
    let med = median(&f);
    let std = population_std(&f);
    let t_high = med + std;
    let t_low = med - std / 10.0;

    let mut splits = FrequencySplits::default();
    for (id, &freq) in f.iter().enumerate() {
        if freq > t_high {
            splits.head.push(id);
        } else if freq < t_low {
            splits.tail.push(id);
        } else {
            splits.medium.push(id);
        }
    }
    splits
}

/// Positive-annotation count per attribute over the whole dataset.
pub fn positive_frequencies(d: &Dataset) -> Vec<u64> {
    let mut counts = vec![0u64; d.taxonomy.len()];
    for img in &d.images {
        for inst in &img.instances {
            for (a, &label) in inst.labels.iter().enumerate() {
                if label == TriState::Positive {
                    if let Some(c) = counts.get_mut(a) {
                        *c += 1;
                    }
                }
            }
        }
    }
    counts
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}
