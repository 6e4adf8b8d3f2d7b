//! Rule-based decomposition of tagged captions into nouns, noun phrases and
//! noun complements, plus the adjective-vocabulary selection pipeline.
//!
//! Tagging happens upstream; the module consumes (text, tag) tokens. Noun
//! phrases are maximal contiguous chunks matching `DET? (ADJ|NUM)* NOUN+`
//! (proper nouns count as nouns) that carry at least one modifier or two
//! nouns; the leading determiner is dropped on emission. Complements are
//! phrases with their noun tokens removed.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

/// Part-of-speech tag of one token. Tags outside the recognized set map to
/// [`PosTag::Other`], which never participates in a chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Propn,
    Adj,
    Det,
    Num,
    Adp,
    Verb,
    Other,
}

impl PosTag {
    pub fn parse(tag: &str) -> PosTag {
        match tag.to_ascii_uppercase().as_str() {
            "NOUN" => PosTag::Noun,
            "PROPN" => PosTag::Propn,
            "ADJ" => PosTag::Adj,
            "DET" => PosTag::Det,
            "NUM" => PosTag::Num,
            "ADP" => PosTag::Adp,
            "VERB" => PosTag::Verb,
            _ => PosTag::Other,
        }
    }

    fn is_noun(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Propn)
    }

    fn is_modifier(self) -> bool {
        matches!(self, PosTag::Adj | PosTag::Num)
    }
}

/// One lowercased token with its tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub text: String,
    pub tag: PosTag,
}

impl TaggedToken {
    pub fn new(text: impl Into<String>, tag: PosTag) -> TaggedToken {
        TaggedToken {
            text: text.into().to_lowercase(),
            tag,
        }
    }
}

/// Nouns, noun phrases and noun complements of one caption.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaptionParts {
    pub nouns: Vec<String>,
    pub noun_phrases: Vec<Vec<String>>,
    pub noun_complements: Vec<Vec<String>>,
}

/// Decomposes a tagged caption into its parts.
pub fn extract_parts(caption: &[TaggedToken]) -> CaptionParts {
    let mut parts = CaptionParts::default();

    for tok in caption {
        if tok.tag.is_noun() {
            parts.nouns.push(tok.text.clone());
        }
    }

    let mut i = 0;
    while i < caption.len() {
        let start = i;
        let mut j = i;
        if caption[j].tag == PosTag::Det {
            j += 1;
        }
        let modifiers_from = j;
        while j < caption.len() && caption[j].tag.is_modifier() {
            j += 1;
        }
        let nouns_from = j;
        while j < caption.len() && caption[j].tag.is_noun() {
            j += 1;
        }
        let noun_count = j - nouns_from;
        if noun_count == 0 {
            i = start + 1;
            continue;
        }
        let modifier_count = nouns_from - modifiers_from;
        if modifier_count >= 1 || noun_count >= 2 {
            // emit without the leading determiner
            let phrase: Vec<String> = caption[modifiers_from..j]
                .iter()
                .map(|t| t.text.clone())
                .collect();
            let complement: Vec<String> = caption[modifiers_from..j]
                .iter()
                .filter(|t| !t.tag.is_noun())
                .map(|t| t.text.clone())
                .collect();
            parts.noun_phrases.push(phrase);
            if !complement.is_empty() {
                parts.noun_complements.push(complement);
            }
        }
        i = j;
    }

    parts
}

/// Occurrence counts of adjective tokens over a caption stream, case-folded.
pub fn count_adjectives<'a, I>(corpus: I) -> HashMap<String, u64>
where
    I: IntoIterator<Item = &'a [TaggedToken]>,
{
    let mut counts = HashMap::new();
    for caption in corpus {
        for tok in caption {
            if tok.tag == PosTag::Adj {
                *counts.entry(tok.text.to_lowercase()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// A synonym group surviving vocabulary selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymGroup {
    /// Members in alphabetical order.
    pub members: Vec<String>,
    pub total_count: u64,
}

/// Selects the attribute vocabulary from adjective counts: keeps adjectives
/// that occur at least `min_count` times and are not blocklisted, merges
/// them by lexicon group (adjectives absent from the lexicon stay alone)
/// and orders groups by total count descending.
pub fn select_attribute_vocabulary(
    adjective_counts: &HashMap<String, u64>,
    synonym_lexicon: &HashMap<String, String>,
    blocklist: &HashSet<String>,
    min_count: u64,
) -> Vec<SynonymGroup> {
    #[derive(PartialEq, Eq, Hash)]
    enum GroupKey {
        Lexicon(String),
        Singleton(String),
    }

    let mut groups: HashMap<GroupKey, (Vec<String>, u64)> = HashMap::new();
    for (word, &count) in adjective_counts {
        if count < min_count || blocklist.contains(word) {
            continue;
        }
        let key = match synonym_lexicon.get(word) {
            Some(group) => GroupKey::Lexicon(group.clone()),
            None => GroupKey::Singleton(word.clone()),
        };
        let entry = groups.entry(key).or_default();
        entry.0.push(word.clone());
        entry.1 += count;
    }

    let mut out: Vec<SynonymGroup> = groups
        .into_values()
        .map(|(mut members, total_count)| {
            members.sort();
            SynonymGroup {
                members,
                total_count,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.total_count
            .cmp(&a.total_count)
            .then_with(|| a.members[0].cmp(&b.members[0]))
    });
    out
}
