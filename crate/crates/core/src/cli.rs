//! Batch command-line front end.
//!
//! Every subcommand is a pure function of its input files, flags and seed:
//! no hidden state, no network access. Reports go to stdout; warnings and
//! errors to stderr. Exit codes: 0 success, 1 data error, 2 usage error
//! (the latter raised by argument parsing).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::annotation::{annotation_consistency, propagate_labels, InfeasiblePolicy};
use crate::dataset::{validate_dataset, Dataset};
use crate::error::{Error, Result};
use crate::eval::{attribute_eval, chance_report, ovd80_eval, EvalInput};
use crate::io;
use crate::parts::extract_parts;
use crate::report;
use crate::scoring::{class_embedding, score_all, Temperature};
use crate::splits::{frequency_splits, positive_frequencies};
use crate::stats::{dataset_stats, subset_stability};
use crate::taxonomy::{AttributeTaxonomy, ObjectCategory, TriState};

#[derive(Parser)]
#[command(
    name = "ovad-eval",
    version,
    about = "Benchmark evaluation for open-vocabulary attribute detection"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    /// Annotation file (images + instances with tri-state label vectors).
    #[arg(long)]
    ann: PathBuf,
    /// Taxonomy file.
    #[arg(long)]
    taxonomy: PathBuf,
    /// Object-category file.
    #[arg(long)]
    categories: PathBuf,
    /// Accept taxonomies/categories of any size (reference counts are
    /// enforced otherwise).
    #[arg(long)]
    lenient: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Detection-setting attribute evaluation plus OVD-80 detection AP50.
    EvalOvad {
        #[command(flatten)]
        data: DataArgs,
        /// Prediction file (per-image boxes with object and attribute scores).
        #[arg(long)]
        pred: PathBuf,
        /// IoU threshold for matching.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the per-attribute table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Box-oracle attribute evaluation on ground-truth boxes.
    EvalBox {
        #[command(flatten)]
        data: DataArgs,
        /// Box-oracle score file (one attribute-score vector per instance).
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Chance baseline: the AP of a constant scorer per attribute.
    Chance {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Dataset statistics with flagged comparisons to published figures.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Head/medium/tail attribute splits from positive frequencies.
    Splits {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Stability of the mAP over non-overlapping image subsets.
    Stability {
        #[command(flatten)]
        data: DataArgs,
        /// Score file; its format follows --mode.
        #[arg(long)]
        pred: PathBuf,
        /// Evaluation mode: "box" (oracle scores) or "det" (detections).
        #[arg(long, default_value = "box")]
        mode: String,
        /// Comma-separated subset fractions, each in (0, 1/3].
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.33])]
        fractions: Vec<f64>,
        /// Reshuffle trials to average over.
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// PRNG seed (ChaCha8) driving the reshuffles.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Score region embeddings against synonym-averaged attribute
    /// embeddings and write a box-oracle prediction file.
    Score {
        /// Region embedding table; entry names are "<image_id>#<instance>".
        #[arg(long)]
        boxes: PathBuf,
        /// Text embedding table covering every attribute synonym.
        #[arg(long)]
        texts: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        lenient: bool,
        /// Sigmoid temperature.
        #[arg(long, default_value_t = 50.0)]
        tau: f64,
        /// Output box-oracle prediction file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decompose tagged captions into nouns, phrases and complements.
    ExtractParts {
        /// Tagged-caption file: one caption per line, tokens as text_TAG.
        #[arg(long)]
        captions: PathBuf,
        /// Write the parts as JSON (otherwise printed to stdout).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Expand per-type selections into dense tri-state label vectors.
    Propagate {
        /// Selection file (category id + per-type choices per record).
        #[arg(long)]
        selections: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        categories: PathBuf,
        #[arg(long)]
        lenient: bool,
        /// Label for attributes of infeasible types: "neg" or "unk".
        #[arg(long, default_value = "neg")]
        infeasible: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Validate a dataset, or measure consistency between two annotation
    /// passes when --against is given.
    Validate {
        #[command(flatten)]
        data: DataArgs,
        /// Second annotation file to compare against.
        #[arg(long)]
        against: Option<PathBuf>,
    },
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(workers) = cli.workers {
        // ignore failure when a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_tax_and_cats(
    taxonomy: &Path,
    categories: &Path,
    lenient: bool,
) -> Result<(AttributeTaxonomy, Vec<ObjectCategory>)> {
    let tax = if lenient {
        io::load_taxonomy_lenient(taxonomy)?
    } else {
        io::load_taxonomy(taxonomy)?
    };
    let cats = if lenient {
        io::load_categories_lenient(categories)?
    } else {
        io::load_categories(categories)?
    };
    Ok((tax, cats))
}

fn load_dataset(data: &DataArgs) -> Result<Dataset> {
    let (tax, cats) = load_tax_and_cats(&data.taxonomy, &data.categories, data.lenient)?;
    let loaded = io::load_annotations(&data.ann, tax, cats)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let violations = validate_dataset(&loaded.dataset);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return Err(Error::invalid(format!(
            "dataset has {} invariant violation(s)",
            violations.len()
        )));
    }
    Ok(loaded.dataset)
}

fn write_if(path: &Option<PathBuf>, content: &str) -> Result<()> {
    if let Some(path) = path {
        std::fs::write(path, content).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn emit_report(
    report: &crate::eval::EvalReport,
    taxonomy: &AttributeTaxonomy,
    notes: &[String],
    json: &Option<PathBuf>,
    csv: &Option<PathBuf>,
) -> Result<()> {
    print!("{}", report::render_report_table(report));
    for note in notes {
        println!("note: {note}");
    }
    write_if(json, &report::report_to_json(report, taxonomy, notes))?;
    write_if(csv, &report::report_to_csv(report, taxonomy))?;
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::EvalOvad {
            data,
            pred,
            iou,
            json,
            csv,
        } => {
            let dataset = load_dataset(&data)?;
            let predictions =
                io::load_predictions(&pred, dataset.categories.len(), dataset.taxonomy.len())?;
            let mut report = attribute_eval(
                &dataset,
                EvalInput::Detection {
                    predictions: &predictions,
                    iou_thresh: iou,
                },
            )?;
            report.ovd80 = Some(ovd80_eval(&dataset, &predictions, iou)?);
            emit_report(&report, &dataset.taxonomy, &[], &json, &csv)
        }
        Command::EvalBox {
            data,
            pred,
            json,
            csv,
        } => {
            let dataset = load_dataset(&data)?;
            let scores = io::load_oracle_scores(&pred, dataset.taxonomy.len())?;
            let report = attribute_eval(&dataset, EvalInput::BoxOracle { scores: &scores })?;
            emit_report(&report, &dataset.taxonomy, &[], &json, &csv)
        }
        Command::Chance { data, json, csv } => {
            let dataset = load_dataset(&data)?;
            let splits = frequency_splits(&positive_frequencies(&dataset));
            let report = chance_report(&dataset, &splits)?;
            emit_report(&report, &dataset.taxonomy, &[], &json, &csv)
        }
        Command::Stats { data, json } => {
            let dataset = load_dataset(&data)?;
            let stats = dataset_stats(&dataset);
            print!("{}", report::render_stats(&stats));
            write_if(&json, &report::stats_to_json(&stats))
        }
        Command::Splits { data, json } => {
            let dataset = load_dataset(&data)?;
            let freqs = positive_frequencies(&dataset);
            let splits = frequency_splits(&freqs);
            println!(
                "head {} / medium {} / tail {} (of {} attributes)",
                splits.head.len(),
                splits.medium.len(),
                splits.tail.len(),
                dataset.taxonomy.len()
            );
            println!(
                "note: the published benchmark reports split sizes 16/55/46 in its main \
                 results and 15/53/49 in its appendix; computed sizes are authoritative here"
            );
            let name = |id: &usize| {
                dataset
                    .taxonomy
                    .attribute(*id)
                    .map(|a| a.name.as_str())
                    .unwrap_or("?")
            };
            for (label, ids) in [
                ("head", &splits.head),
                ("medium", &splits.medium),
                ("tail", &splits.tail),
            ] {
                let names: Vec<&str> = ids.iter().map(name).collect();
                println!("{label}: {}", names.join(", "));
            }
            if json.is_some() {
                #[derive(serde::Serialize)]
                struct SplitsDoc<'a> {
                    schema_version: u32,
                    frequencies: &'a [u64],
                    head: &'a [usize],
                    medium: &'a [usize],
                    tail: &'a [usize],
                }
                let doc = SplitsDoc {
                    schema_version: report::REPORT_SCHEMA_VERSION,
                    frequencies: &freqs,
                    head: &splits.head,
                    medium: &splits.medium,
                    tail: &splits.tail,
                };
                let mut text =
                    serde_json::to_string_pretty(&doc).expect("splits serialization");
                text.push('\n');
                write_if(&json, &text)?;
            }
            Ok(())
        }
        Command::Stability {
            data,
            pred,
            mode,
            fractions,
            trials,
            seed,
            iou,
        } => {
            let dataset = load_dataset(&data)?;
            let rows = match mode.as_str() {
                "box" => {
                    let scores = io::load_oracle_scores(&pred, dataset.taxonomy.len())?;
                    subset_stability(
                        &dataset,
                        EvalInput::BoxOracle { scores: &scores },
                        &fractions,
                        trials,
                        seed,
                    )?
                }
                "det" => {
                    let predictions = io::load_predictions(
                        &pred,
                        dataset.categories.len(),
                        dataset.taxonomy.len(),
                    )?;
                    subset_stability(
                        &dataset,
                        EvalInput::Detection {
                            predictions: &predictions,
                            iou_thresh: iou,
                        },
                        &fractions,
                        trials,
                        seed,
                    )?
                }
                other => {
                    return Err(Error::input(format!(
                        "unknown stability mode '{other}' (expected box or det)"
                    )))
                }
            };
            print!("{}", report::render_stability(&rows));
            Ok(())
        }
        Command::Score {
            boxes,
            texts,
            taxonomy,
            lenient,
            tau,
            out,
        } => {
            let tax = if lenient {
                io::load_taxonomy_lenient(&taxonomy)?
            } else {
                io::load_taxonomy(&taxonomy)?
            };
            let box_table = io::load_embeddings(&boxes)?;
            let text_table = io::load_embeddings(&texts)?;
            let temperature = Temperature::new(tau)?;

            let classes: Vec<(String, crate::scoring::Embedding)> = tax
                .attributes()
                .iter()
                .map(|attr| {
                    class_embedding(&attr.synonyms, &text_table)
                        .map(|e| (attr.name.clone(), e))
                        .map_err(|e| Error::input(format!("attribute '{}': {e}", attr.name)))
                })
                .collect::<Result<_>>()?;

            let mut keys: Vec<(i64, usize)> = Vec::new();
            let mut box_embs = Vec::new();
            for (name, emb) in box_table.iter() {
                let (img, idx) = name.split_once('#').ok_or_else(|| {
                    Error::invalid(format!(
                        "region name '{name}' is not of the form <image_id>#<instance>"
                    ))
                })?;
                let img: i64 = img
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad image id in '{name}'")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad instance index in '{name}'")))?;
                keys.push((img, idx));
                box_embs.push(emb.clone());
            }

            let matrix = score_all(&box_embs, &classes, temperature)?;
            let records: Vec<(i64, usize, Vec<f64>)> = keys
                .into_iter()
                .zip(matrix)
                .map(|((img, idx), row)| (img, idx, row))
                .collect();
            io::save_oracle_scores(&out, &records)?;
            println!(
                "scored {} regions against {} attributes -> {}",
                records.len(),
                tax.len(),
                out.display()
            );
            Ok(())
        }
        Command::ExtractParts { captions, json } => {
            let tagged = io::load_tagged_captions(&captions)?;
            let parts: Vec<crate::parts::CaptionParts> =
                tagged.iter().map(|c| extract_parts(c)).collect();
            let mut text = serde_json::to_string_pretty(&parts).expect("parts serialization");
            text.push('\n');
            match &json {
                Some(_) => write_if(&json, &text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Propagate {
            selections,
            taxonomy,
            categories,
            lenient,
            infeasible,
            json,
        } => {
            let (tax, cats) = load_tax_and_cats(&taxonomy, &categories, lenient)?;
            let policy = match infeasible.as_str() {
                "neg" => InfeasiblePolicy::Negative,
                "unk" => InfeasiblePolicy::Unknown,
                other => {
                    return Err(Error::input(format!(
                        "unknown infeasible policy '{other}' (expected neg or unk)"
                    )))
                }
            };
            let records = io::load_selections(&selections)?;
            let by_id: HashMap<u32, &ObjectCategory> = cats.iter().map(|c| (c.id, c)).collect();

            #[derive(serde::Serialize)]
            struct PropagatedDoc {
                category_id: u32,
                att_vec: Vec<i8>,
            }
            let mut out = Vec::with_capacity(records.len());
            for record in &records {
                let category = by_id.get(&record.category_id).ok_or_else(|| {
                    Error::input(format!("unknown category id {}", record.category_id))
                })?;
                let labels = propagate_labels(&record.selections, category, &tax, policy)?;
                out.push(PropagatedDoc {
                    category_id: record.category_id,
                    att_vec: labels.iter().map(|l| l.code()).collect(),
                });
            }
            let mut text = serde_json::to_string_pretty(&out).expect("propagation serialization");
            text.push('\n');
            match &json {
                Some(_) => write_if(&json, &text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Validate { data, against } => {
            let (tax, cats) = load_tax_and_cats(&data.taxonomy, &data.categories, data.lenient)?;
            match against {
                None => {
                    let loaded = io::load_annotations(&data.ann, tax, cats)?;
                    for w in &loaded.warnings {
                        eprintln!("warning: {w}");
                    }
                    let violations = validate_dataset(&loaded.dataset);
                    if violations.is_empty() {
                        println!("dataset is valid: no violations");
                        Ok(())
                    } else {
                        for v in &violations {
                            println!("violation: {v}");
                        }
                        Err(Error::invalid(format!(
                            "dataset has {} invariant violation(s)",
                            violations.len()
                        )))
                    }
                }
                Some(other) => {
                    let first = io::load_annotations(&data.ann, tax.clone(), cats.clone())?;
                    let second = io::load_annotations(&other, tax, cats)?;
                    let a = flatten_labels(&first.dataset)?;
                    let b = flatten_labels(&second.dataset)?;
                    let consistency = annotation_consistency(&a, &b)?;
                    println!("consistency: {consistency:.2}%");
                    Ok(())
                }
            }
        }
    }
}

/// Flattens instance label vectors in image-file order for consistency
/// comparison between two passes over the same images.
fn flatten_labels(d: &Dataset) -> Result<Vec<Vec<TriState>>> {
    let mut out = Vec::with_capacity(d.instance_count());
    for img in &d.images {
        for inst in &img.instances {
            out.push(inst.labels.clone());
        }
    }
    Ok(out)
}
