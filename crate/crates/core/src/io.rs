//! File formats: taxonomy, categories, annotations, predictions, box-oracle
//! scores, embedding tables, tagged captions and selection files.
//!
//! All structured formats are JSON. Embedding tables additionally support a
//! compact binary layout (chosen by file extension: `.json` is JSON,
//! anything else is binary).

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::TypeSelection;
use crate::dataset::{AnnotatedImage, AnnotatedInstance, Dataset, OracleScores, PredictionSet};
use crate::dataset::PredictedInstance;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::parts::TaggedToken;
use crate::scoring::EmbeddingTable;
use crate::taxonomy::{
    check_reference_category_counts, AttributeDef, AttributeTaxonomy, CategoryGroup,
    ObjectCategory, TriState,
};

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::json(path, e))
}

// ---------------------------------------------------------------------------
// Taxonomy file

#[derive(Serialize, Deserialize)]
struct TaxonomyFile {
    types: Vec<String>,
    attributes: Vec<AttributeDef>,
    feasibility: BTreeMap<CategoryGroup, Vec<String>>,
}

fn taxonomy_from_file(file: TaxonomyFile) -> Result<AttributeTaxonomy> {
    let feasibility = file
        .feasibility
        .into_iter()
        .map(|(g, ts)| (g, ts.into_iter().collect()))
        .collect();
    AttributeTaxonomy::new(file.attributes, file.types, feasibility)
}

/// Loads a taxonomy file and checks the reference cardinalities
/// (117 attributes, 19 types) on top of the structural invariants.
pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<AttributeTaxonomy> {
    let taxonomy = load_taxonomy_lenient(path)?;
    taxonomy.check_reference_counts()?;
    Ok(taxonomy)
}

/// Loads a taxonomy file of any size; structural invariants still apply.
pub fn load_taxonomy_lenient(path: impl AsRef<Path>) -> Result<AttributeTaxonomy> {
    let path = path.as_ref();
    let file: TaxonomyFile = parse_json(path, &read_file(path)?)?;
    taxonomy_from_file(file)
}

/// Serializes a taxonomy back to its file form.
pub fn taxonomy_to_json(taxonomy: &AttributeTaxonomy) -> String {
    let file = TaxonomyFile {
        types: taxonomy.types().to_vec(),
        attributes: taxonomy.attributes().to_vec(),
        feasibility: taxonomy
            .feasibility()
            .iter()
            .map(|(g, ts)| (*g, ts.iter().cloned().collect()))
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("taxonomy serialization cannot fail")
}

/// Parses a taxonomy from a JSON string (structural checks only).
pub fn taxonomy_from_json(text: &str) -> Result<AttributeTaxonomy> {
    let file: TaxonomyFile =
        serde_json::from_str(text).map_err(|e| Error::json("<string>", e))?;
    taxonomy_from_file(file)
}

pub fn save_taxonomy(path: impl AsRef<Path>, taxonomy: &AttributeTaxonomy) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, taxonomy_to_json(taxonomy)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Category file

/// Loads the category file and checks the reference split sizes
/// (80 categories: 48 base + 32 novel).
pub fn load_categories(path: impl AsRef<Path>) -> Result<Vec<ObjectCategory>> {
    let categories = load_categories_lenient(path)?;
    check_reference_category_counts(&categories)?;
    Ok(categories)
}

/// Loads a category file of any size.
pub fn load_categories_lenient(path: impl AsRef<Path>) -> Result<Vec<ObjectCategory>> {
    let path = path.as_ref();
    let categories: Vec<ObjectCategory> = parse_json(path, &read_file(path)?)?;
    let mut ids: Vec<u32> = categories.iter().map(|c| c.id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != categories.len() {
        return Err(Error::invalid("duplicate category ids"));
    }
    Ok(categories)
}

// ---------------------------------------------------------------------------
// Annotation file

#[derive(Deserialize)]
struct AnnotationFile {
    images: Vec<RawImage>,
    #[serde(alias = "annotations")]
    instances: Vec<RawInstance>,
}

#[derive(Deserialize)]
struct RawImage {
    id: i64,
    width: f64,
    height: f64,
}

#[derive(Deserialize)]
struct RawInstance {
    image_id: i64,
    bbox: [f64; 4],
    category_id: u32,
    att_vec: Vec<f64>,
}

/// A loaded dataset together with load-time warnings (clamped boxes).
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Loads an annotation file against an already-loaded taxonomy and category
/// vocabulary. Boxes reaching past the image bounds are clamped with a
/// warning; boxes entirely outside are rejected.
pub fn load_annotations(
    path: impl AsRef<Path>,
    taxonomy: AttributeTaxonomy,
    categories: Vec<ObjectCategory>,
) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let file: AnnotationFile = parse_json(path, &read_file(path)?)?;

    let mut images: Vec<AnnotatedImage> = Vec::with_capacity(file.images.len());
    let mut index: std::collections::HashMap<i64, usize> = std::collections::HashMap::new();
    for raw in file.images {
        if index.contains_key(&raw.id) {
            return Err(Error::invalid(format!("duplicate image id {}", raw.id)));
        }
        index.insert(raw.id, images.len());
        images.push(AnnotatedImage {
            image_id: raw.id,
            width: raw.width,
            height: raw.height,
            instances: Vec::new(),
        });
    }

    let mut warnings = Vec::new();
    for raw in file.instances {
        let &slot = index.get(&raw.image_id).ok_or_else(|| {
            Error::invalid(format!("instance references unknown image id {}", raw.image_id))
        })?;
        let img = &mut images[slot];
        let [x, y, w, h] = raw.bbox;
        let bbox = BoundingBox::new(x, y, w, h).map_err(|e| {
            Error::invalid(format!("image {}: {e}", raw.image_id))
        })?;
        let bbox = match bbox.clamped_to(img.width, img.height) {
            Some(clamped) => {
                if clamped != bbox {
                    warnings.push(format!(
                        "image {}: box ({x}, {y}, {w}, {h}) clamped to image bounds",
                        raw.image_id
                    ));
                }
                clamped
            }
            None => {
                return Err(Error::invalid(format!(
                    "image {}: box ({x}, {y}, {w}, {h}) lies entirely outside the image",
                    raw.image_id
                )))
            }
        };
        let labels = raw
            .att_vec
            .iter()
            .map(|&v| {
                let code = v as i8;
                if (code as f64 - v).abs() > 0.0 {
                    return Err(Error::invalid(format!(
                        "image {}: attribute label {v} is not one of 1, 0, -1",
                        raw.image_id
                    )));
                }
                TriState::from_code(code)
            })
            .collect::<Result<Vec<TriState>>>()?;
        img.instances.push(AnnotatedInstance {
            bbox,
            category_id: raw.category_id,
            labels,
        });
    }

    Ok(LoadedDataset {
        dataset: Dataset {
            taxonomy,
            categories,
            images,
        },
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Prediction files

#[derive(Serialize, Deserialize)]
struct RawImagePredictions {
    image_id: i64,
    predictions: Vec<RawPrediction>,
}

#[derive(Serialize, Deserialize)]
struct RawPrediction {
    bbox: [f64; 4],
    object_scores: Vec<f64>,
    attribute_scores: Vec<f64>,
}

/// Loads detection-mode predictions, checking score-vector lengths.
pub fn load_predictions(
    path: impl AsRef<Path>,
    n_categories: usize,
    n_attributes: usize,
) -> Result<PredictionSet> {
    let path = path.as_ref();
    let file: Vec<RawImagePredictions> = parse_json(path, &read_file(path)?)?;
    let mut set = PredictionSet::default();
    for raw in file {
        if set.by_image.contains_key(&raw.image_id) {
            return Err(Error::invalid(format!(
                "duplicate prediction entry for image {}",
                raw.image_id
            )));
        }
        let mut preds = Vec::with_capacity(raw.predictions.len());
        for p in raw.predictions {
            if p.object_scores.len() != n_categories {
                return Err(Error::invalid(format!(
                    "image {}: object score vector has length {}, expected {n_categories}",
                    raw.image_id,
                    p.object_scores.len()
                )));
            }
            if p.attribute_scores.len() != n_attributes {
                return Err(Error::invalid(format!(
                    "image {}: attribute score vector has length {}, expected {n_attributes}",
                    raw.image_id,
                    p.attribute_scores.len()
                )));
            }
            if p.object_scores
                .iter()
                .chain(p.attribute_scores.iter())
                .any(|s| !s.is_finite())
            {
                return Err(Error::invalid(format!(
                    "image {}: prediction scores must be finite",
                    raw.image_id
                )));
            }
            let [x, y, w, h] = p.bbox;
            preds.push(PredictedInstance {
                bbox: BoundingBox::new(x, y, w, h)
                    .map_err(|e| Error::invalid(format!("image {}: {e}", raw.image_id)))?,
                object_scores: p.object_scores,
                attribute_scores: p.attribute_scores,
            });
        }
        set.by_image.insert(raw.image_id, preds);
    }
    Ok(set)
}

#[derive(Serialize, Deserialize)]
struct RawOracleRecord {
    image_id: i64,
    instance_index: usize,
    attribute_scores: Vec<f64>,
}

/// Loads box-oracle attribute scores keyed by ground-truth instance.
pub fn load_oracle_scores(path: impl AsRef<Path>, n_attributes: usize) -> Result<OracleScores> {
    let path = path.as_ref();
    let file: Vec<RawOracleRecord> = parse_json(path, &read_file(path)?)?;
    let mut scores = OracleScores::default();
    for raw in file {
        if raw.attribute_scores.len() != n_attributes {
            return Err(Error::invalid(format!(
                "image {} instance {}: score vector has length {}, expected {n_attributes}",
                raw.image_id,
                raw.instance_index,
                raw.attribute_scores.len()
            )));
        }
        if raw.attribute_scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid(format!(
                "image {} instance {}: scores must be finite",
                raw.image_id, raw.instance_index
            )));
        }
        let key = (raw.image_id, raw.instance_index);
        if scores.by_instance.insert(key, raw.attribute_scores).is_some() {
            return Err(Error::invalid(format!(
                "duplicate oracle record for image {} instance {}",
                raw.image_id, raw.instance_index
            )));
        }
    }
    Ok(scores)
}

/// Writes box-oracle records; the inverse of [`load_oracle_scores`].
pub fn save_oracle_scores(
    path: impl AsRef<Path>,
    records: &[(i64, usize, Vec<f64>)],
) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<RawOracleRecord> = records
        .iter()
        .map(|(image_id, instance_index, attribute_scores)| RawOracleRecord {
            image_id: *image_id,
            instance_index: *instance_index,
            attribute_scores: attribute_scores.clone(),
        })
        .collect();
    let text = serde_json::to_string_pretty(&raw).expect("oracle serialization cannot fail");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Embedding tables

#[derive(Serialize, Deserialize)]
struct EmbeddingJsonFile {
    dimension: usize,
    entries: Vec<EmbeddingJsonEntry>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingJsonEntry {
    name: String,
    values: Vec<f64>,
}

/// Loads an embedding table; `.json` files use the JSON layout, everything
/// else the binary layout (u32 dimension, u32 count, then per record a
/// u16-length-prefixed UTF-8 name and `dimension` little-endian f32 values).
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let file: EmbeddingJsonFile = parse_json(path, &read_file(path)?)?;
        let mut table = EmbeddingTable::new(file.dimension);
        for entry in file.entries {
            table.insert(entry.name, entry.values)?;
        }
        Ok(table)
    } else {
        load_embeddings_binary(path)
    }
}

fn load_embeddings_binary(path: &Path) -> Result<EmbeddingTable> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;

    let mut offset = 0usize;
    let take = |offset: &mut usize, n: usize| -> Result<&[u8]> {
        let slice = buf
            .get(*offset..*offset + n)
            .ok_or_else(|| Error::invalid("truncated embedding file"))?;
        *offset += n;
        Ok(slice)
    };

    let dim = u32::from_le_bytes(take(&mut offset, 4)?.try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(take(&mut offset, 4)?.try_into().unwrap()) as usize;
    let mut table = EmbeddingTable::new(dim);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut offset, 2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(&mut offset, name_len)?)
            .map_err(|_| Error::invalid("embedding name is not valid utf-8"))?
            .to_string();
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            let v = f32::from_le_bytes(take(&mut offset, 4)?.try_into().unwrap());
            values.push(v as f64);
        }
        table.insert(name, values)?;
    }
    if offset != buf.len() {
        return Err(Error::invalid("trailing bytes after embedding records"));
    }
    Ok(table)
}

/// Writes an embedding table in the layout implied by the extension.
pub fn save_embeddings(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    let path = path.as_ref();
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let file = EmbeddingJsonFile {
            dimension: table.dim(),
            entries: table
                .iter()
                .map(|(name, emb)| EmbeddingJsonEntry {
                    name: name.to_string(),
                    values: emb.0.clone(),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file).expect("embedding serialization");
        return fs::write(path, text).map_err(|e| Error::io(path, e));
    }
    let mut out = Vec::new();
    out.extend_from_slice(&(table.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (name, emb) in table.iter() {
        let bytes = name.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::input(format!("embedding name too long: '{name}'")));
        }
        out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(bytes);
        for v in &emb.0 {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Tagged captions

/// Parses one caption line of `text_TAG` tokens. `_` is reserved as the
/// separator; the last `_` splits text from tag.
pub fn parse_tagged_line(line: &str) -> Result<Vec<TaggedToken>> {
    line.split_whitespace()
        .map(|token| {
            let (text, tag) = token.rsplit_once('_').ok_or_else(|| {
                Error::invalid(format!("token '{token}' is missing its _TAG suffix"))
            })?;
            if text.is_empty() {
                return Err(Error::invalid(format!("token '{token}' has empty text")));
            }
            Ok(TaggedToken::new(text, crate::parts::PosTag::parse(tag)))
        })
        .collect()
}

/// Loads a tagged-caption file: one caption per line, blank lines skipped.
pub fn load_tagged_captions(path: impl AsRef<Path>) -> Result<Vec<Vec<TaggedToken>>> {
    let path = path.as_ref();
    read_file(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_tagged_line)
        .collect()
}

// ---------------------------------------------------------------------------
// Selection files

/// One object's per-type selections, as consumed by the `propagate` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub category_id: u32,
    pub selections: Vec<TypeSelection>,
}

pub fn load_selections(path: impl AsRef<Path>) -> Result<Vec<SelectionRecord>> {
    let path = path.as_ref();
    parse_json(path, &read_file(path)?)
}

// ---------------------------------------------------------------------------
// Fixtures shared by the crate's unit tests
