//! Attribute taxonomy and object-category definitions.
//!
//! The taxonomy groups attributes into types (superclasses) whose members
//! are mutually exclusive except for multi-select color types and the
//! antonym-pair state type. A feasibility map restricts which attribute
//! types apply to each object-category group.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attribute count of the reference benchmark taxonomy.
pub const REFERENCE_ATTRIBUTE_COUNT: usize = 117;
/// Attribute-type count of the reference benchmark taxonomy.
pub const REFERENCE_TYPE_COUNT: usize = 19;
/// Object-category count of the reference benchmark (base + novel).
pub const REFERENCE_CATEGORY_COUNT: usize = 80;
/// Base (seen) object categories in the reference benchmark.
pub const REFERENCE_BASE_COUNT: usize = 48;
/// Novel (unseen) object categories in the reference benchmark.
pub const REFERENCE_NOVEL_COUNT: usize = 32;

/// Tri-state annotation value for one (instance, attribute) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TriState {
    Positive,
    Negative,
    Unknown,
}

impl TriState {
    /// Numeric encoding used by annotation files: 1 / 0 / -1.
    pub fn from_code(code: i8) -> Result<Self> {
        match code {
            1 => Ok(TriState::Positive),
            0 => Ok(TriState::Negative),
            -1 => Ok(TriState::Unknown),
            other => Err(Error::invalid(format!(
                "attribute label code must be 1, 0 or -1, got {other}"
            ))),
        }
    }

    pub fn code(self) -> i8 {
        match self {
            TriState::Positive => 1,
            TriState::Negative => 0,
            TriState::Unknown => -1,
        }
    }
}

/// How the members of one attribute type exclude each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusivity {
    /// Exactly one member can hold; selecting one negates all siblings.
    Exclusive,
    /// Colors: several members can hold at once.
    ColorMultiSelect,
    /// States: only the declared antonym of a selection is negated.
    AntonymPairs,
}

/// One attribute with its synonym set and exclusivity behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    /// Index assigned by taxonomy-file order; score vectors use this order.
    pub id: usize,
    pub name: String,
    pub synonyms: Vec<String>,
    #[serde(rename = "type")]
    pub attr_type: String,
    pub exclusivity: Exclusivity,
    /// Declared antonym, only meaningful for `AntonymPairs` members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antonym_of: Option<usize>,
}

/// Coarse object grouping that drives attribute-type feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryGroup {
    Human,
    Animal,
    Food,
    Object,
}

impl CategoryGroup {
    pub const ALL: [CategoryGroup; 4] = [
        CategoryGroup::Human,
        CategoryGroup::Animal,
        CategoryGroup::Food,
        CategoryGroup::Object,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryGroup::Human => "human",
            CategoryGroup::Animal => "animal",
            CategoryGroup::Food => "food",
            CategoryGroup::Object => "object",
        }
    }
}

/// Whether an object category had box supervision available at training time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategorySplit {
    Base,
    Novel,
}

/// An object category of the detection vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectCategory {
    pub id: u32,
    pub name: String,
    pub synonyms: Vec<String>,
    pub split: CategorySplit,
    pub group: CategoryGroup,
}

/// The full attribute taxonomy: definitions, type list and feasibility map.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTaxonomy {
    attributes: Vec<AttributeDef>,
    types: Vec<String>,
    feasibility: BTreeMap<CategoryGroup, BTreeSet<String>>,
    members_by_type: HashMap<String, Vec<usize>>,
}

impl AttributeTaxonomy {
    /// Builds a taxonomy and checks every structural invariant:
    /// ids are the positions 0..n, synonym sets are non-empty, every
    /// attribute's type is declared, antonym references are symmetric and
    /// the feasibility keys cover exactly the four category groups.
    ///
    /// Reference-benchmark cardinalities (117 attributes, 19 types) are
    /// checked separately by [`AttributeTaxonomy::check_reference_counts`]
    /// so that small synthetic taxonomies remain expressible.
    pub fn new(
        attributes: Vec<AttributeDef>,
        types: Vec<String>,
        feasibility: BTreeMap<CategoryGroup, BTreeSet<String>>,
    ) -> Result<Self> {
        let type_set: BTreeSet<&str> = types.iter().map(String::as_str).collect();
        if type_set.len() != types.len() {
            return Err(Error::invalid("duplicate attribute-type names"));
        }

        for (idx, attr) in attributes.iter().enumerate() {
            if attr.id != idx {
                return Err(Error::invalid(format!(
                    "attribute ids must follow file order: position {idx} holds id {}",
                    attr.id
                )));
            }
            if attr.synonyms.is_empty() {
                return Err(Error::invalid(format!(
                    "attribute '{}' has an empty synonym set",
                    attr.name
                )));
            }
            if !type_set.contains(attr.attr_type.as_str()) {
                return Err(Error::invalid(format!(
                    "attribute '{}' references undeclared type '{}'",
                    attr.name, attr.attr_type
                )));
            }
            if let Some(ant) = attr.antonym_of {
                if attr.exclusivity != Exclusivity::AntonymPairs {
                    return Err(Error::invalid(format!(
                        "attribute '{}' declares an antonym but is not an antonym-pair member",
                        attr.name
                    )));
                }
                let back = attributes.get(ant).ok_or_else(|| {
                    Error::invalid(format!(
                        "attribute '{}' references missing antonym id {ant}",
                        attr.name
                    ))
                })?;
                if back.antonym_of != Some(attr.id) {
                    return Err(Error::invalid(format!(
                        "dangling antonym: '{}' lists '{}' but not vice versa",
                        attr.name, back.name
                    )));
                }
                if back.attr_type != attr.attr_type {
                    return Err(Error::invalid(format!(
                        "antonyms '{}' and '{}' belong to different types",
                        attr.name, back.name
                    )));
                }
            }
        }

        let feas_keys: BTreeSet<CategoryGroup> = feasibility.keys().copied().collect();
        let expected: BTreeSet<CategoryGroup> = CategoryGroup::ALL.into_iter().collect();
        if feas_keys != expected {
            return Err(Error::invalid(
                "feasibility keys must be exactly {human, animal, food, object}",
            ));
        }
        for (group, feasible) in &feasibility {
            for t in feasible {
                if !type_set.contains(t.as_str()) {
                    return Err(Error::invalid(format!(
                        "feasibility for '{}' references undeclared type '{t}'",
                        group.as_str()
                    )));
                }
            }
        }

        let mut members_by_type: HashMap<String, Vec<usize>> = HashMap::new();
        for attr in &attributes {
            members_by_type
                .entry(attr.attr_type.clone())
                .or_default()
                .push(attr.id);
        }

        Ok(AttributeTaxonomy {
            attributes,
            types,
            feasibility,
            members_by_type,
        })
    }

    /// Checks the reference-benchmark cardinalities (117 attributes, 19 types).
    pub fn check_reference_counts(&self) -> Result<()> {
        if self.attributes.len() != REFERENCE_ATTRIBUTE_COUNT {
            return Err(Error::invalid(format!(
                "expected {REFERENCE_ATTRIBUTE_COUNT} attributes, found {}",
                self.attributes.len()
            )));
        }
        if self.types.len() != REFERENCE_TYPE_COUNT {
            return Err(Error::invalid(format!(
                "expected {REFERENCE_TYPE_COUNT} attribute types, found {}",
                self.types.len()
            )));
        }
        Ok(())
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn attribute(&self, id: usize) -> Option<&AttributeDef> {
        self.attributes.get(id)
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    /// Attribute ids belonging to `attr_type`, in id order.
    pub fn members_of_type(&self, attr_type: &str) -> &[usize] {
        self.members_by_type
            .get(attr_type)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Attribute types annotatable for a category group.
    pub fn feasible_types(&self, group: CategoryGroup) -> &BTreeSet<String> {
        // feasibility keys are validated to cover all groups at construction
        &self.feasibility[&group]
    }

    pub fn feasibility(&self) -> &BTreeMap<CategoryGroup, BTreeSet<String>> {
        &self.feasibility
    }
}

/// Checks the reference category-file cardinalities (80 = 48 base + 32 novel).
pub fn check_reference_category_counts(categories: &[ObjectCategory]) -> Result<()> {
    let base = categories
        .iter()
        .filter(|c| c.split == CategorySplit::Base)
        .count();
    let novel = categories.len() - base;
    if categories.len() != REFERENCE_CATEGORY_COUNT
        || base != REFERENCE_BASE_COUNT
        || novel != REFERENCE_NOVEL_COUNT
    {
        return Err(Error::invalid(format!(
            "expected {REFERENCE_CATEGORY_COUNT} categories ({REFERENCE_BASE_COUNT} base + \
             {REFERENCE_NOVEL_COUNT} novel), found {} ({base} base + {novel} novel)",
            categories.len()
        )));
    }
    Ok(())
}
