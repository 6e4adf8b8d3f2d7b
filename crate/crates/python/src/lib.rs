//! Python bindings for the benchmark-evaluation engine.
//!
//! The extension module `_ovad_eval` exposes the numeric kernels directly
//! (IoU, average precision, matching scores, losses, gradient check,
//! caption decomposition, frequency splits) and file-based evaluation entry
//! points that return report JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ovad_eval::annotation::{InfeasiblePolicy, SelectionChoice, TypeSelection};
use ovad_eval::ap::{average_precision as ap_impl, RankedSamples, SampleLabel};
use ovad_eval::eval::{attribute_eval, ovd80_eval, EvalInput};
use ovad_eval::geometry::BoundingBox;
use ovad_eval::parts;
use ovad_eval::report::report_to_json;
use ovad_eval::scoring::{self, Embedding, EmbeddingTable, GradCheckPoint, Temperature};
use ovad_eval::taxonomy::{AttributeTaxonomy, CategoryGroup, CategorySplit, ObjectCategory};

fn to_py_err(e: ovad_eval::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bbox(b: (f64, f64, f64, f64)) -> PyResult<BoundingBox> {
    BoundingBox::new(b.0, b.1, b.2, b.3).map_err(to_py_err)
}

/// IoU of two `(x, y, w, h)` boxes.
#[pyfunction]
fn iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> PyResult<f64> {
    Ok(bbox(a)?.iou(&bbox(b)?))
}

/// All-point average precision over `(score, is_positive)` entries with
/// `ghost_positives` unretrievable positives.
#[pyfunction]
#[pyo3(signature = (entries, ghost_positives = 0))]
fn average_precision(entries: Vec<(f64, bool)>, ghost_positives: usize) -> PyResult<f64> {
    let samples = RankedSamples {
        entries: entries
            .into_iter()
            .map(|(s, p)| {
                (
                    s,
                    if p {
                        SampleLabel::Positive
                    } else {
                        SampleLabel::Negative
                    },
                )
            })
            .collect(),
        ghost_positives,
    };
    ap_impl(&samples).map_err(to_py_err)
}

/// Sigmoid of the temperature-scaled cosine between two embeddings.
#[pyfunction]
#[pyo3(signature = (f, g, tau = 50.0))]
fn match_score(f: Vec<f64>, g: Vec<f64>, tau: f64) -> PyResult<f64> {
    scoring::match_score(
        &Embedding(f),
        &Embedding(g),
        Temperature::new(tau).map_err(to_py_err)?,
    )
    .map_err(to_py_err)
}

/// Binary cross-entropy of a matching score against a pair label.
#[pyfunction]
fn itc_loss(score: f64, positive_pair: bool) -> PyResult<f64> {
    scoring::itc_loss(score, positive_pair).map_err(to_py_err)
}

/// Synonym-averaged class embedding from a `{text: vector}` table.
#[pyfunction]
fn class_embedding(
    synonyms: Vec<String>,
    table: Vec<(String, Vec<f64>)>,
) -> PyResult<Vec<f64>> {
    let dim = table.first().map(|(_, v)| v.len()).unwrap_or(0);
    let mut t = EmbeddingTable::new(dim);
    for (name, values) in table {
        t.insert(name, values).map_err(to_py_err)?;
    }
    scoring::class_embedding(&synonyms, &t)
        .map(|e| e.0)
        .map_err(to_py_err)
}

/// Matching-score matrix: rows are boxes, columns are named classes.
#[pyfunction]
#[pyo3(signature = (boxes, classes, tau = 50.0))]
fn score_all(
    boxes: Vec<Vec<f64>>,
    classes: Vec<(String, Vec<f64>)>,
    tau: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let boxes: Vec<Embedding> = boxes.into_iter().map(Embedding).collect();
    let classes: Vec<(String, Embedding)> = classes
        .into_iter()
        .map(|(n, v)| (n, Embedding(v)))
        .collect();
    scoring::score_all(&boxes, &classes, Temperature::new(tau).map_err(to_py_err)?)
        .map_err(to_py_err)
}

/// Maximum relative error between the analytic and central-difference
/// gradients of the mean BCE loss at one point.
#[pyfunction]
#[pyo3(signature = (box_embedding, targets, tau = 50.0, epsilon = 1e-5))]
fn grad_check(
    box_embedding: Vec<f64>,
    targets: Vec<(Vec<f64>, bool)>,
    tau: f64,
    epsilon: f64,
) -> PyResult<f64> {
    let point = GradCheckPoint {
        box_embedding: Embedding(box_embedding),
        targets: targets
            .into_iter()
            .map(|(v, y)| (Embedding(v), y))
            .collect(),
        temperature: Temperature::new(tau).map_err(to_py_err)?,
    };
    scoring::grad_check(&point, epsilon).map_err(to_py_err)
}

/// Percentage of positions two annotation passes agree on; labels are
/// tri-state codes (1 positive, 0 negative, -1 unknown).
#[pyfunction]
fn annotation_consistency(a: Vec<Vec<i8>>, b: Vec<Vec<i8>>) -> PyResult<f64> {
    let decode = |vectors: Vec<Vec<i8>>| -> PyResult<Vec<Vec<ovad_eval::TriState>>> {
        vectors
            .into_iter()
            .map(|v| {
                v.into_iter()
                    .map(|c| ovad_eval::TriState::from_code(c).map_err(to_py_err))
                    .collect()
            })
            .collect()
    };
    ovad_eval::annotation::annotation_consistency(&decode(a)?, &decode(b)?).map_err(to_py_err)
}

/// Head/medium/tail attribute ids from positive-annotation frequencies.
#[pyfunction]
fn frequency_splits(frequencies: Vec<u64>) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let s = ovad_eval::frequency_splits(&frequencies);
    (s.head, s.medium, s.tail)
}

/// Nouns, noun phrases and noun complements of one tagged caption.
#[pyclass(name = "CaptionParts")]
struct PyCaptionParts {
    #[pyo3(get)]
    nouns: Vec<String>,
    #[pyo3(get)]
    noun_phrases: Vec<Vec<String>>,
    #[pyo3(get)]
    noun_complements: Vec<Vec<String>>,
}

/// Decomposes `(text, tag)` tokens; tags follow the universal POS set
/// (NOUN, PROPN, ADJ, DET, NUM, ADP, VERB; everything else is OTHER).
#[pyfunction]
fn extract_parts(tokens: Vec<(String, String)>) -> PyCaptionParts {
    let caption: Vec<parts::TaggedToken> = tokens
        .into_iter()
        .map(|(text, tag)| parts::TaggedToken::new(text, parts::PosTag::parse(&tag)))
        .collect();
    let p = parts::extract_parts(&caption);
    PyCaptionParts {
        nouns: p.nouns,
        noun_phrases: p.noun_phrases,
        noun_complements: p.noun_complements,
    }
}

/// A loaded attribute taxonomy.
#[pyclass(name = "Taxonomy")]
struct PyTaxonomy {
    inner: AttributeTaxonomy,
}

#[pymethods]
impl PyTaxonomy {
    /// Loads a taxonomy file, enforcing the reference counts (117/19).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyTaxonomy {
            inner: ovad_eval::io::load_taxonomy(path).map_err(to_py_err)?,
        })
    }

    /// Loads a taxonomy of any size.
    #[staticmethod]
    fn load_lenient(path: &str) -> PyResult<Self> {
        Ok(PyTaxonomy {
            inner: ovad_eval::io::load_taxonomy_lenient(path).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn attribute_count(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn types(&self) -> Vec<String> {
        self.inner.types().to_vec()
    }

    fn attribute_names(&self) -> Vec<String> {
        self.inner
            .attributes()
            .iter()
            .map(|a| a.name.clone())
            .collect()
    }

    fn synonyms(&self, attribute_id: usize) -> PyResult<Vec<String>> {
        self.inner
            .attribute(attribute_id)
            .map(|a| a.synonyms.clone())
            .ok_or_else(|| PyValueError::new_err(format!("no attribute {attribute_id}")))
    }

    fn feasible_types(&self, group: &str) -> PyResult<Vec<String>> {
        let group = parse_group(group)?;
        Ok(self.inner.feasible_types(group).iter().cloned().collect())
    }

    /// Expands per-type selections into tri-state codes. Selections are
    /// `(type_name, chosen_ids_or_None)` pairs; `None` marks the type
    /// unknown. `infeasible` is "neg" or "unk".
    #[pyo3(signature = (selections, group, infeasible = "neg"))]
    fn propagate(
        &self,
        selections: Vec<(String, Option<Vec<usize>>)>,
        group: &str,
        infeasible: &str,
    ) -> PyResult<Vec<i8>> {
        let group = parse_group(group)?;
        let policy = match infeasible {
            "neg" => InfeasiblePolicy::Negative,
            "unk" => InfeasiblePolicy::Unknown,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown infeasible policy '{other}'"
                )))
            }
        };
        let selections: Vec<TypeSelection> = selections
            .into_iter()
            .map(|(attr_type, chosen)| TypeSelection {
                attr_type,
                choice: match chosen {
                    Some(ids) => SelectionChoice::Chosen(ids),
                    None => SelectionChoice::Unknown,
                },
            })
            .collect();
        let category = ObjectCategory {
            id: 0,
            name: String::new(),
            synonyms: vec![],
            split: CategorySplit::Base,
            group,
        };
        ovad_eval::annotation::propagate_labels(&selections, &category, &self.inner, policy)
            .map(|labels| labels.iter().map(|l| l.code()).collect())
            .map_err(to_py_err)
    }
}

fn parse_group(group: &str) -> PyResult<CategoryGroup> {
    CategoryGroup::ALL
        .into_iter()
        .find(|g| g.as_str() == group)
        .ok_or_else(|| {
            PyValueError::new_err(format!(
                "unknown category group '{group}' (expected human, animal, food or object)"
            ))
        })
}

fn load_dataset(
    ann: &str,
    taxonomy: &str,
    categories: &str,
    lenient: bool,
) -> PyResult<ovad_eval::Dataset> {
    let tax = if lenient {
        ovad_eval::io::load_taxonomy_lenient(taxonomy)
    } else {
        ovad_eval::io::load_taxonomy(taxonomy)
    }
    .map_err(to_py_err)?;
    let cats = if lenient {
        ovad_eval::io::load_categories_lenient(categories)
    } else {
        ovad_eval::io::load_categories(categories)
    }
    .map_err(to_py_err)?;
    Ok(ovad_eval::io::load_annotations(ann, tax, cats)
        .map_err(to_py_err)?
        .dataset)
}

/// Detection-setting evaluation (attribute mAP + OVD-80 AP50) over files;
/// returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (ann, taxonomy, categories, predictions, iou_thresh = 0.5, lenient = false))]
fn eval_detection_json(
    ann: &str,
    taxonomy: &str,
    categories: &str,
    predictions: &str,
    iou_thresh: f64,
    lenient: bool,
) -> PyResult<String> {
    let dataset = load_dataset(ann, taxonomy, categories, lenient)?;
    let preds = ovad_eval::io::load_predictions(
        predictions,
        dataset.categories.len(),
        dataset.taxonomy.len(),
    )
    .map_err(to_py_err)?;
    let mut report = attribute_eval(
        &dataset,
        EvalInput::Detection {
            predictions: &preds,
            iou_thresh,
        },
    )
    .map_err(to_py_err)?;
    report.ovd80 = Some(ovd80_eval(&dataset, &preds, iou_thresh).map_err(to_py_err)?);
    Ok(report_to_json(&report, &dataset.taxonomy, &[]))
}

/// Box-oracle evaluation over files; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (ann, taxonomy, categories, oracle_scores, lenient = false))]
fn eval_box_oracle_json(
    ann: &str,
    taxonomy: &str,
    categories: &str,
    oracle_scores: &str,
    lenient: bool,
) -> PyResult<String> {
    let dataset = load_dataset(ann, taxonomy, categories, lenient)?;
    let scores = ovad_eval::io::load_oracle_scores(oracle_scores, dataset.taxonomy.len())
        .map_err(to_py_err)?;
    let report = attribute_eval(&dataset, EvalInput::BoxOracle { scores: &scores })
        .map_err(to_py_err)?;
    Ok(report_to_json(&report, &dataset.taxonomy, &[]))
}

#[pymodule]
fn _ovad_eval(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(match_score, m)?)?;
    m.add_function(wrap_pyfunction!(itc_loss, m)?)?;
    m.add_function(wrap_pyfunction!(class_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(score_all, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(annotation_consistency, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_splits, m)?)?;
    m.add_function(wrap_pyfunction!(extract_parts, m)?)?;
    m.add_function(wrap_pyfunction!(eval_detection_json, m)?)?;
    m.add_function(wrap_pyfunction!(eval_box_oracle_json, m)?)?;
    m.add_class::<PyTaxonomy>()?;
    m.add_class::<PyCaptionParts>()?;
    Ok(())
}
