//! Dataset statistics and subset-stability analysis.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{attribute_eval_images, EvalInput};
use crate::splits::{frequency_splits, positive_frequencies};
use crate::taxonomy::TriState;

/// Benchmark scale at which computed statistics are compared against the
/// published reference figures.
const REFERENCE_IMAGE_COUNT: usize = 2000;
const REFERENCE_INSTANCE_COUNT: usize = 14_300;

/// Raw counts and per-image/per-box means of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub images: usize,
    pub instances: usize,
    pub positives: u64,
    pub negatives: u64,
    pub unknowns: u64,
    /// Positive + negative labels; unknowns are excluded from this total.
    pub annotations: u64,
    pub instances_per_image: Option<f64>,
    pub annotations_per_image: Option<f64>,
    pub annotations_per_box: Option<f64>,
    pub positives_per_box: Option<f64>,
    pub negatives_per_box: Option<f64>,
    /// Flagged comparisons against published benchmark figures; filled only
    /// when the dataset matches the reference scale.
    pub notes: Vec<String>,
}

/// Counts images, instances and tri-state labels, with derived means.
pub fn dataset_stats(d: &Dataset) -> DatasetStats {
    let images = d.images.len();
    let instances = d.instance_count();
    let mut positives = 0u64;
    let mut negatives = 0u64;
    let mut unknowns = 0u64;
    for img in &d.images {
        for inst in &img.instances {
            for label in &inst.labels {
                match label {
                    TriState::Positive => positives += 1,
                    TriState::Negative => negatives += 1,
                    TriState::Unknown => unknowns += 1,
                }
            }
        }
    }
    let annotations = positives + negatives;
    let per = |num: f64, den: usize| {
        if den == 0 {
            None
        } else {
            Some(num / den as f64)
        }
    };

    let mut notes = Vec::new();
    if images == REFERENCE_IMAGE_COUNT && instances == REFERENCE_INSTANCE_COUNT {
        let per_box = annotations as f64 / instances as f64;
        notes.push(format!(
            "computed {:.1} annotations per box vs 96.8 in the published benchmark table \
             (the benchmark text also cites 98 per instance; computed agrees with the latter)",
            per_box
        ));
        notes.push(format!(
            "computed {:.2} instances per image vs 7.2 published (rounded)",
            instances as f64 / images as f64
        ));
    }

    DatasetStats {
        images,
        instances,
        positives,
        negatives,
        unknowns,
        annotations,
        instances_per_image: per(instances as f64, images),
        annotations_per_image: per(annotations as f64, images),
        annotations_per_box: per(annotations as f64, instances),
        positives_per_box: per(positives as f64, instances),
        negatives_per_box: per(negatives as f64, instances),
        notes,
    }
}

/// Maximum non-overlapping subsets evaluated per shuffle.
const MAX_SUBSETS: usize = 6;

/// Stability of the mAP on subsets of one size.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub fraction: f64,
    pub subset_images: usize,
    pub subsets_per_trial: usize,
    /// Standard deviations of the subset mAPs, averaged over trials.
    pub std_all: Option<f64>,
    pub std_head: Option<f64>,
    pub std_medium: Option<f64>,
    pub std_tail: Option<f64>,
}

/// Measures how stable the mAP is on non-overlapping image subsets.
///
/// For every fraction, each trial shuffles the image list with a dedicated
/// ChaCha8 stream derived from `seed`, cuts it into up to six
/// non-overlapping subsets of `floor(fraction * n)` images, evaluates the
/// per-split mAP on each subset (split membership stays fixed to the full
/// dataset) and takes the population standard deviation across subsets.
/// Standard deviations are averaged over trials. Fractions above 1/3 are
/// rejected: fewer than three subsets make the deviation unreliable.
pub fn subset_stability(
    d: &Dataset,
    input: EvalInput<'_>,
    fractions: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<StabilityRow>> {
    if trials == 0 {
        return Err(Error::input("at least one trial is required"));
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0 / 3.0) {
            return Err(Error::input(format!(
                "fraction {f} cannot form at least three non-overlapping subsets"
            )));
        }
    }
    let n_images = d.images.len();
    let splits = frequency_splits(&positive_frequencies(d));

    let mut rows = Vec::with_capacity(fractions.len());
    for (fi, &fraction) in fractions.iter().enumerate() {
        let subset_images = (fraction * n_images as f64).floor() as usize;
        if subset_images == 0 {
            return Err(Error::input(format!(
                "fraction {fraction} selects zero images from a {n_images}-image dataset"
            )));
        }
        let n_subsets = MAX_SUBSETS.min(n_images / subset_images);

        let mut sums = [0.0f64; 4];
        let mut defined = [0usize; 4];
        for trial in 0..trials {
            let mut order: Vec<usize> = (0..n_images).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ ((fi as u64) << 32) ^ (trial as u64).wrapping_mul(0x9E37_79B9),
            );
            order.shuffle(&mut rng);

            let mut maps: [Vec<f64>; 4] = Default::default();
            for s in 0..n_subsets {
                let chosen = &order[s * subset_images..(s + 1) * subset_images];
                let images: Vec<_> = chosen.iter().map(|&i| d.images[i].clone()).collect();
                let aps = attribute_eval_images(d.taxonomy.len(), &images, input)?;
                let ids_all: Vec<usize> = (0..aps.len()).collect();
                for (k, ids) in [
                    &ids_all,
                    &splits.head,
                    &splits.medium,
                    &splits.tail,
                ]
                .into_iter()
                .enumerate()
                {
                    if let Some(m) = mean_defined(&aps, ids) {
                        maps[k].push(m);
                    }
                }
            }
            for k in 0..4 {
                if !maps[k].is_empty() {
                    sums[k] += population_std(&maps[k]);
                    defined[k] += 1;
                }
            }
        }

        let avg = |k: usize| {
            if defined[k] == 0 {
                None
            } else {
                Some(sums[k] / defined[k] as f64)
            }
        };
        rows.push(StabilityRow {
            fraction,
            subset_images,
            subsets_per_trial: n_subsets,
            std_all: avg(0),
            std_head: avg(1),
            std_medium: avg(2),
            std_tail: avg(3),
        });
    }
    Ok(rows)
}

fn mean_defined(aps: &[Option<f64>], ids: &[usize]) -> Option<f64> {
    let vals: Vec<f64> = ids.iter().filter_map(|&id| aps.get(id).copied().flatten()).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}
