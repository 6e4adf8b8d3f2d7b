//! Similarity scores and contrastive losses over text/region embeddings.
//!
//! Embeddings come from files; no text or image encoder lives here. The
//! matching score is the sigmoid of the temperature-scaled cosine between a
//! box-region embedding and a class-text embedding; class embeddings are
//! synonym-averaged.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A real-valued embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Named embeddings of a uniform dimension, in file order.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    names: Vec<String>,
    vectors: Vec<Embedding>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::invalid(format!(
                "embedding has dimension {}, table holds {}",
                values.len(),
                self.dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding values must be finite"));
        }
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate embedding name '{name}'")));
        }
        self.index.insert(name.clone(), self.vectors.len());
        self.names.push(name);
        self.vectors.push(Embedding(values));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Embedding> {
        self.index.get(name).map(|&i| &self.vectors[i])
    }

    /// Entries in insertion (file) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.vectors.iter())
    }
}

/// Temperature of the sigmoid-cosine matching score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::input(format!("temperature must be positive, got {tau}")));
        }
        Ok(Temperature(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Temperature(50.0)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn cosine(f: &Embedding, g: &Embedding) -> Result<f64> {
    if f.dim() != g.dim() {
        return Err(Error::input(format!(
            "embedding dimensions differ: {} vs {}",
            f.dim(),
            g.dim()
        )));
    }
    let nf = f.norm();
    let ng = g.norm();
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::input("cosine is undefined for zero-norm embeddings"));
    }
    Ok(f.dot(g) / (nf * ng))
}

/// Matching score between a box-region embedding and a text embedding:
/// the sigmoid of their cosine scaled by the temperature.
pub fn match_score(f: &Embedding, g: &Embedding, t: Temperature) -> Result<f64> {
    Ok(sigmoid(cosine(f, g)? * t.value()))
}

/// Synonym-averaged class embedding: the arithmetic mean of the synonym
/// vectors, not re-normalized (the cosine normalizes downstream).
///
/// Synonyms are summed in sorted order so the result does not depend on the
/// order the set is supplied in.
pub fn class_embedding(synonyms: &[String], table: &EmbeddingTable) -> Result<Embedding> {
    if synonyms.is_empty() {
        return Err(Error::input("class embedding needs at least one synonym"));
    }
    let mut ordered: Vec<&String> = synonyms.iter().collect();
    ordered.sort();
    ordered.dedup();

    let mut sum = vec![0.0; table.dim()];
    for name in &ordered {
        let emb = table
            .get(name)
            .ok_or_else(|| Error::input(format!("synonym '{name}' missing from embedding table")))?;
        for (acc, v) in sum.iter_mut().zip(&emb.0) {
            *acc += v;
        }
    }
    let n = ordered.len() as f64;
    for v in &mut sum {
        *v /= n;
    }
    Ok(Embedding(sum))
}

/// Matching scores of every box against every class; rows are boxes,
/// columns are classes. No normalization couples the columns. Rows are
/// independent and computed in parallel; the output order is fixed.
pub fn score_all(
    boxes: &[Embedding],
    classes: &[(String, Embedding)],
    t: Temperature,
) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    boxes
        .par_iter()
        .map(|b| {
            classes
                .iter()
                .map(|(_, c)| match_score(b, c, t))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Score saturation guard for the losses; keeps log() finite.
pub const LOSS_EPSILON: f64 = 1e-7;

fn clamp_score(s: f64) -> f64 {
    s.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON)
}

/// Binary cross-entropy of a matching score against a pair label.
///
/// Scores at the ends of (0, 1) are clamped by [`LOSS_EPSILON`].
pub fn itc_loss(s: f64, positive_pair: bool) -> Result<f64> {
    if !(s.is_finite() && (0.0..=1.0).contains(&s)) {
        return Err(Error::input(format!("score must lie in [0, 1], got {s}")));
    }
    let s = clamp_score(s);
    Ok(if positive_pair {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    })
}

/// Mean contrastive loss of one positive caption and a set of negative
/// captions against a whole-image box embedding.
pub fn caption_batch_loss(
    image_emb: &Embedding,
    pos_caption: &str,
    neg_captions: &[String],
    table: &EmbeddingTable,
    t: Temperature,
) -> Result<f64> {
    let lookup = |name: &str| {
        table
            .get(name)
            .ok_or_else(|| Error::input(format!("caption '{name}' missing from embedding table")))
    };
    let mut total = itc_loss(match_score(image_emb, lookup(pos_caption)?, t)?, true)?;
    for neg in neg_captions {
        total += itc_loss(match_score(image_emb, lookup(neg)?, t)?, false)?;
    }
    Ok(total / (1 + neg_captions.len()) as f64)
}

/// Mean binary cross-entropy of positive and negative parts-of-caption
/// scored against the maximum-area box embedding (the caller decides which
/// box that is).
pub fn proxy_parts_loss(
    max_area_box_emb: &Embedding,
    pos_parts: &[String],
    neg_parts: &[String],
    table: &EmbeddingTable,
    t: Temperature,
) -> Result<f64> {
    if pos_parts.is_empty() {
        return Err(Error::input("proxy-parts loss needs at least one positive part"));
    }
    let lookup = |name: &str| {
        table
            .get(name)
            .ok_or_else(|| Error::input(format!("part '{name}' missing from embedding table")))
    };
    let mut total = 0.0;
    for part in pos_parts {
        total += itc_loss(match_score(max_area_box_emb, lookup(part)?, t)?, true)?;
    }
    for part in neg_parts {
        total += itc_loss(match_score(max_area_box_emb, lookup(part)?, t)?, false)?;
    }
    Ok(total / (pos_parts.len() + neg_parts.len()) as f64)
}

/// A point at which the loss gradient is checked: one box embedding scored
/// against labeled text embeddings.
#[derive(Debug, Clone)]
pub struct GradCheckPoint {
    pub box_embedding: Embedding,
    /// (text embedding, is positive pair) targets; the loss is their mean BCE.
    pub targets: Vec<(Embedding, bool)>,
    pub temperature: Temperature,
}

fn mean_bce_loss(f: &Embedding, point: &GradCheckPoint) -> Result<f64> {
    let mut total = 0.0;
    for (g, y) in &point.targets {
        total += itc_loss(match_score(f, g, point.temperature)?, *y)?;
    }
    Ok(total / point.targets.len() as f64)
}

/// Closed-form gradient of the mean clamped-BCE loss with respect to the
/// box-embedding coordinates.
///
/// Per target, d(loss)/d(cosine) collapses to `tau * (s - y)`; the cosine
/// gradient is `(g_hat - cos * f_hat) / |f|`. Targets whose score sits in
/// the clamped saturation region contribute zero, matching the flat
/// clamped loss there.
pub fn analytic_gradient(point: &GradCheckPoint) -> Result<Vec<f64>> {
    let f = &point.box_embedding;
    let nf = f.norm();
    if nf == 0.0 {
        return Err(Error::input("gradient is undefined at a zero-norm embedding"));
    }
    if point.targets.is_empty() {
        return Err(Error::input("gradient check needs at least one target"));
    }
    let tau = point.temperature.value();
    let dim = f.dim();
    let mut grad = vec![0.0; dim];
    for (g, y) in &point.targets {
        let c = cosine(f, g)?;
        let s = sigmoid(c * tau);
        if s <= LOSS_EPSILON || s >= 1.0 - LOSS_EPSILON {
            continue;
        }
        let coeff = tau * (s - if *y { 1.0 } else { 0.0 });
        let ng = g.norm();
        for ((acc, gv), fv) in grad.iter_mut().zip(&g.0).zip(&f.0) {
            let dc = (gv / ng - c * fv / nf) / nf;
            *acc += coeff * dc;
        }
    }
    for v in &mut grad {
        *v /= point.targets.len() as f64;
    }
    Ok(grad)
}

/// Central-difference gradient of the same loss.
pub fn numeric_gradient(point: &GradCheckPoint, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 1e-8 && epsilon < 1e-2) {
        return Err(Error::input(format!(
            "finite-difference step must lie in (1e-8, 1e-2), got {epsilon}"
        )));
    }
    let dim = point.box_embedding.dim();
    let mut grad = Vec::with_capacity(dim);
    let mut shifted = point.box_embedding.clone();
    for i in 0..dim {
        let orig = point.box_embedding.0[i];
        shifted.0[i] = orig + epsilon;
        let plus = mean_bce_loss(&shifted, point)?;
        shifted.0[i] = orig - epsilon;
        let minus = mean_bce_loss(&shifted, point)?;
        shifted.0[i] = orig;
        grad.push((plus - minus) / (2.0 * epsilon));
    }
    Ok(grad)
}

/// Compares the analytic and central-difference gradients and returns the
/// largest per-coordinate relative error, with magnitudes floored at one so
/// vanishing coordinates do not inflate the ratio.
pub fn grad_check(point: &GradCheckPoint, epsilon: f64) -> Result<f64> {
    let analytic = analytic_gradient(point)?;
    let numeric = numeric_gradient(point, epsilon)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max))
}
