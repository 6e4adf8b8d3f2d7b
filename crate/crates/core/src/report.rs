//! Report rendering: console tables, JSON documents and CSV exports.
//!
//! Internal metric values are fractions in [0, 1]; rendered percentages are
//! multiplied by 100 and rounded to one decimal. The JSON document carries
//! full-precision values under a versioned schema.

use serde::Serialize;

use crate::eval::{EvalMode, EvalReport};
use crate::splits::Split;
use crate::stats::{DatasetStats, StabilityRow};
use crate::taxonomy::AttributeTaxonomy;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.1}", v * 100.0),
        None => "-".to_string(),
    }
}

/// Renders the summary table, mirroring the benchmark's column order:
/// attribute mAP over all/head/medium/tail, then detection AP50 over
/// novel/base/all when present.
pub fn render_report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let mode = match report.mode {
        EvalMode::Detection => "detection",
        EvalMode::BoxOracle => "box-oracle",
    };
    out.push_str(&format!("attribute mAP (x100, {mode} mode)\n"));
    out.push_str(&format!(
        "{:>8} {:>8} {:>8} {:>8}",
        "all", "head", "medium", "tail"
    ));
    if report.ovd80.is_some() {
        out.push_str(&format!(
            "   | {:>8} {:>8} {:>8}  (OVD-80 AP50)",
            "novel", "base", "all"
        ));
    }
    out.push('\n');
    out.push_str(&format!(
        "{:>8} {:>8} {:>8} {:>8}",
        pct(report.map_all),
        pct(report.map_head),
        pct(report.map_medium),
        pct(report.map_tail)
    ));
    if let Some(ovd) = &report.ovd80 {
        out.push_str(&format!(
            "   | {:>8} {:>8} {:>8}",
            pct(ovd.ap50_novel),
            pct(ovd.ap50_base),
            pct(ovd.ap50_all)
        ));
    }
    out.push('\n');
    if !report.skipped.is_empty() {
        out.push_str(&format!(
            "note: {} attribute(s) without positives skipped from the means\n",
            report.skipped.len()
        ));
    }
    out
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    schema_version: u32,
    mode: &'a str,
    map_all: Option<f64>,
    map_head: Option<f64>,
    map_medium: Option<f64>,
    map_tail: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ovd80: Option<Ovd80Doc>,
    split_sizes: SplitSizes,
    per_attribute: Vec<AttributeDoc<'a>>,
    skipped: &'a [usize],
    notes: &'a [String],
}

#[derive(Serialize)]
struct Ovd80Doc {
    ap50_novel: Option<f64>,
    ap50_base: Option<f64>,
    ap50_all: Option<f64>,
}

#[derive(Serialize)]
struct SplitSizes {
    head: usize,
    medium: usize,
    tail: usize,
}

#[derive(Serialize)]
struct AttributeDoc<'a> {
    id: usize,
    name: &'a str,
    #[serde(rename = "type")]
    attr_type: &'a str,
    split: &'a str,
    ap: Option<f64>,
}

fn split_name(split: Option<Split>) -> &'static str {
    match split {
        Some(Split::Head) => "head",
        Some(Split::Medium) => "medium",
        Some(Split::Tail) => "tail",
        None => "-",
    }
}

/// Serializes the full report (per-attribute APs included) as JSON.
pub fn report_to_json(
    report: &EvalReport,
    taxonomy: &AttributeTaxonomy,
    notes: &[String],
) -> String {
    let per_attribute = taxonomy
        .attributes()
        .iter()
        .map(|attr| AttributeDoc {
            id: attr.id,
            name: &attr.name,
            attr_type: &attr.attr_type,
            split: split_name(report.splits.split_of(attr.id)),
            ap: report.per_attribute_ap.get(attr.id).copied().flatten(),
        })
        .collect();
    let doc = ReportDoc {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: match report.mode {
            EvalMode::Detection => "detection",
            EvalMode::BoxOracle => "box_oracle",
        },
        map_all: report.map_all,
        map_head: report.map_head,
        map_medium: report.map_medium,
        map_tail: report.map_tail,
        ovd80: report.ovd80.as_ref().map(|o| Ovd80Doc {
            ap50_novel: o.ap50_novel,
            ap50_base: o.ap50_base,
            ap50_all: o.ap50_all,
        }),
        split_sizes: SplitSizes {
            head: report.splits.head.len(),
            medium: report.splits.medium.len(),
            tail: report.splits.tail.len(),
        },
        per_attribute,
        skipped: &report.skipped,
        notes,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("report serialization");
    text.push('\n');
    text
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV export: one row per attribute, then per-type means and the summary
/// rows. Values are percentages rounded to one decimal.
pub fn report_to_csv(report: &EvalReport, taxonomy: &AttributeTaxonomy) -> String {
    let mut out = String::from("kind,id,name,type,split,ap\n");
    for attr in taxonomy.attributes() {
        let ap = report.per_attribute_ap.get(attr.id).copied().flatten();
        out.push_str(&format!(
            "attribute,{},{},{},{},{}\n",
            attr.id,
            csv_field(&attr.name),
            csv_field(&attr.attr_type),
            split_name(report.splits.split_of(attr.id)),
            pct(ap)
        ));
    }
    for attr_type in taxonomy.types() {
        let aps: Vec<f64> = taxonomy
            .members_of_type(attr_type)
            .iter()
            .filter_map(|&id| report.per_attribute_ap.get(id).copied().flatten())
            .collect();
        let mean = if aps.is_empty() {
            None
        } else {
            Some(aps.iter().sum::<f64>() / aps.len() as f64)
        };
        out.push_str(&format!(
            "type_mean,,,{},,{}\n",
            csv_field(attr_type),
            pct(mean)
        ));
    }
    out.push_str(&format!("summary,,,,all,{}\n", pct(report.map_all)));
    out.push_str(&format!("summary,,,,head,{}\n", pct(report.map_head)));
    out.push_str(&format!("summary,,,,medium,{}\n", pct(report.map_medium)));
    out.push_str(&format!("summary,,,,tail,{}\n", pct(report.map_tail)));
    if let Some(ovd) = &report.ovd80 {
        out.push_str(&format!("summary,,,,ovd80_novel,{}\n", pct(ovd.ap50_novel)));
        out.push_str(&format!("summary,,,,ovd80_base,{}\n", pct(ovd.ap50_base)));
        out.push_str(&format!("summary,,,,ovd80_all,{}\n", pct(ovd.ap50_all)));
    }
    out
}

/// Console rendering of dataset statistics, flagged notes included.
pub fn render_stats(stats: &DatasetStats) -> String {
    let opt = |v: Option<f64>| match v {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    };
    let mut out = String::new();
    out.push_str(&format!("images                {}\n", stats.images));
    out.push_str(&format!("instances             {}\n", stats.instances));
    out.push_str(&format!("positive labels       {}\n", stats.positives));
    out.push_str(&format!("negative labels       {}\n", stats.negatives));
    out.push_str(&format!("unknown labels        {}\n", stats.unknowns));
    out.push_str(&format!("annotations (pos+neg) {}\n", stats.annotations));
    out.push_str(&format!(
        "instances / image     {}\n",
        opt(stats.instances_per_image)
    ));
    out.push_str(&format!(
        "annotations / image   {}\n",
        opt(stats.annotations_per_image)
    ));
    out.push_str(&format!(
        "annotations / box     {}\n",
        opt(stats.annotations_per_box)
    ));
    out.push_str(&format!(
        "positives / box       {}\n",
        opt(stats.positives_per_box)
    ));
    out.push_str(&format!(
        "negatives / box       {}\n",
        opt(stats.negatives_per_box)
    ));
    for note in &stats.notes {
        out.push_str(&format!("flag: {note}\n"));
    }
    out
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    schema_version: u32,
    images: usize,
    instances: usize,
    positives: u64,
    negatives: u64,
    unknowns: u64,
    annotations: u64,
    instances_per_image: Option<f64>,
    annotations_per_image: Option<f64>,
    annotations_per_box: Option<f64>,
    positives_per_box: Option<f64>,
    negatives_per_box: Option<f64>,
    notes: &'a [String],
}

pub fn stats_to_json(stats: &DatasetStats) -> String {
    let doc = StatsDoc {
        schema_version: REPORT_SCHEMA_VERSION,
        images: stats.images,
        instances: stats.instances,
        positives: stats.positives,
        negatives: stats.negatives,
        unknowns: stats.unknowns,
        annotations: stats.annotations,
        instances_per_image: stats.instances_per_image,
        annotations_per_image: stats.annotations_per_image,
        annotations_per_box: stats.annotations_per_box,
        positives_per_box: stats.positives_per_box,
        negatives_per_box: stats.negatives_per_box,
        notes: &stats.notes,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("stats serialization");
    text.push('\n');
    text
}

/// Console rendering of the subset-stability rows.
pub fn render_stability(rows: &[StabilityRow]) -> String {
    let opt = |v: Option<f64>| match v {
        Some(v) => format!("{:.3}", v * 100.0),
        None => "-".to_string(),
    };
    let mut out = String::from(
        "fraction  images  subsets  std_all  std_head  std_medium  std_tail  (mAP std, x100)\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{:>8.3} {:>7} {:>8} {:>8} {:>9} {:>11} {:>9}\n",
            row.fraction,
            row.subset_images,
            row.subsets_per_trial,
            opt(row.std_all),
            opt(row.std_head),
            opt(row.std_medium),
            opt(row.std_tail)
        ));
    }
    out
}
