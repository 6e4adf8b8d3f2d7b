//! Annotation-time label semantics.
//!
//! Annotators pick at most one attribute per type (several for colors) or
//! mark the type unknown; the exclusivity rules of the taxonomy then expand
//! those selections into a dense tri-state vector over all attributes.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{AttributeTaxonomy, Exclusivity, ObjectCategory, TriState};

/// Name of the attribute type whose selection caps how many colors an
/// object has. Member names starting with "single"/"two" cap the count at
/// 1/2; any other member (or no selection) leaves the count open.
pub const COLOR_QUANTITY_TYPE: &str = "color quantity";

/// What an annotator picked for one attribute type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSelection {
    #[serde(rename = "type")]
    pub attr_type: String,
    pub choice: SelectionChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionChoice {
    /// Chosen attribute ids; a singleton except for multi-select color types.
    Chosen(Vec<usize>),
    /// The whole type was marked unknown.
    Unknown,
}

/// How attributes of types infeasible for the object's group are labeled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfeasiblePolicy {
    #[default]
    Negative,
    Unknown,
}

/// Attribute types annotatable for `category`, per the taxonomy's
/// feasibility map.
pub fn feasible_types<'t>(
    category: &ObjectCategory,
    taxonomy: &'t AttributeTaxonomy,
) -> &'t BTreeSet<String> {
    taxonomy.feasible_types(category.group)
}

/// Expands per-type selections into a dense tri-state label vector.
///
/// Rules, applied per attribute type:
/// - exclusive type with a chosen attribute: chosen positive, siblings negative;
/// - type marked unknown: all members unknown;
/// - multi-select color type: chosen colors positive; the rest negative only
///   when the color-quantity selection caps the count at exactly the number
///   chosen, otherwise unknown;
/// - antonym-pair type: chosen positive, its declared antonym negative,
///   remaining members unknown;
/// - types infeasible for the category's group: `infeasible_policy`;
/// - feasible types without a selection: unknown.
pub fn propagate_labels(
    selections: &[TypeSelection],
    category: &ObjectCategory,
    taxonomy: &AttributeTaxonomy,
    infeasible_policy: InfeasiblePolicy,
) -> Result<Vec<TriState>> {
    let feasible = taxonomy.feasible_types(category.group);

    let mut by_type: HashMap<&str, &TypeSelection> = HashMap::new();
    for sel in selections {
        if !taxonomy.types().iter().any(|t| t == &sel.attr_type) {
            return Err(Error::input(format!(
                "selection references undeclared type '{}'",
                sel.attr_type
            )));
        }
        if !feasible.contains(&sel.attr_type) {
            return Err(Error::input(format!(
                "type '{}' is not feasible for category group '{}'",
                sel.attr_type,
                category.group.as_str()
            )));
        }
        if by_type.insert(sel.attr_type.as_str(), sel).is_some() {
            return Err(Error::input(format!(
                "two selections for type '{}'",
                sel.attr_type
            )));
        }
        if let SelectionChoice::Chosen(ids) = &sel.choice {
            let members = taxonomy.members_of_type(&sel.attr_type);
            for id in ids {
                if !members.contains(id) {
                    return Err(Error::input(format!(
                        "attribute id {id} does not belong to type '{}'",
                        sel.attr_type
                    )));
                }
            }
            let multi = ids
                .first()
                .and_then(|id| taxonomy.attribute(*id))
                .map(|a| a.exclusivity == Exclusivity::ColorMultiSelect)
                .unwrap_or(false);
            if !multi && ids.len() > 1 {
                return Err(Error::input(format!(
                    "type '{}' allows at most one chosen attribute",
                    sel.attr_type
                )));
            }
        }
    }

    let color_cap = color_count_cap(&by_type, taxonomy);

    let infeasible_state = match infeasible_policy {
        InfeasiblePolicy::Negative => TriState::Negative,
        InfeasiblePolicy::Unknown => TriState::Unknown,
    };

    let mut labels = vec![TriState::Unknown; taxonomy.len()];
    for type_name in taxonomy.types() {
        let members = taxonomy.members_of_type(type_name);
        if !feasible.contains(type_name) {
            for &id in members {
                labels[id] = infeasible_state;
            }
            continue;
        }
        let Some(sel) = by_type.get(type_name.as_str()) else {
            continue; // unselected feasible type stays unknown
        };
        let chosen = match &sel.choice {
            SelectionChoice::Unknown => continue,
            SelectionChoice::Chosen(ids) => ids,
        };
        if chosen.is_empty() {
            continue;
        }
        let exclusivity = taxonomy
            .attribute(chosen[0])
            .map(|a| a.exclusivity)
            .unwrap_or(Exclusivity::Exclusive);
        match exclusivity {
            Exclusivity::Exclusive => {
                for &id in members {
                    labels[id] = if chosen.contains(&id) {
                        TriState::Positive
                    } else {
                        TriState::Negative
                    };
                }
            }
            Exclusivity::ColorMultiSelect => {
                let capped = color_cap == Some(chosen.len());
                for &id in members {
                    labels[id] = if chosen.contains(&id) {
                        TriState::Positive
                    } else if capped {
                        TriState::Negative
                    } else {
                        TriState::Unknown
                    };
                }
            }
            Exclusivity::AntonymPairs => {
                for &id in chosen {
                    labels[id] = TriState::Positive;
                    if let Some(ant) = taxonomy.attribute(id).and_then(|a| a.antonym_of) {
                        labels[ant] = TriState::Negative;
                    }
                }
            }
        }
    }

    Ok(labels)
}

/// Color-count cap implied by the color-quantity selection, if any.
fn color_count_cap(
    by_type: &HashMap<&str, &TypeSelection>,
    taxonomy: &AttributeTaxonomy,
) -> Option<usize> {
    let sel = by_type.get(COLOR_QUANTITY_TYPE)?;
    let SelectionChoice::Chosen(ids) = &sel.choice else {
        return None;
    };
    let name = taxonomy.attribute(*ids.first()?)?.name.to_lowercase();
    if name.starts_with("single") {
        Some(1)
    } else if name.starts_with("two") {
        Some(2)
    } else {
        None
    }
}

/// Percentage of (instance, attribute) positions on which two annotation
/// passes agree. Unknown-vs-unknown counts as agreement.
pub fn annotation_consistency(a: &[Vec<TriState>], b: &[Vec<TriState>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "annotation sets have {} and {} instances",
            a.len(),
            b.len()
        )));
    }
    let mut total = 0usize;
    let mut agree = 0usize;
    for (i, (va, vb)) in a.iter().zip(b).enumerate() {
        if va.len() != vb.len() {
            return Err(Error::input(format!(
                "instance {i} has label vectors of length {} and {}",
                va.len(),
                vb.len()
            )));
        }
        total += va.len();
        agree += va.iter().zip(vb).filter(|(x, y)| x == y).count();
    }
    if total == 0 {
        return Err(Error::input(
            "consistency is undefined for an empty position set",
        ));
    }
    Ok(100.0 * agree as f64 / total as f64)
}
