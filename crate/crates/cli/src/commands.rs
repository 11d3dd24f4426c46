//! Standalone subcommand implementations behind the thin clap front-end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use repdiv::clustering::{kmeans, Clustering, Metric};
use repdiv::corpus_metrics::{corpus_stats, load_corpus, rouge_l, rouge_n, tokenize, RougeScore};
use repdiv::distill::{
    distill_with, random_baseline_sample_with, CentersMode, DistillOptions,
};
use repdiv::flowmap::{compute_flow, top_targets, Direction, FlowMatrix};
use repdiv::model_selection::sweep_k;
use repdiv::projection::{export_scatter, pca_fit};
use repdiv::vectorstore::{
    align_spaces, detect_format, load_vector_set, save_vector_set, Format, Space, VectorSet,
};

use crate::pipeline::load_space_checked;
use crate::{created_at, CliError};

fn load_set(path: &Path, format: Option<Format>) -> Result<VectorSet, CliError> {
    let format = match format {
        Some(f) => f,
        None => detect_format(path)?,
    };
    Ok(load_vector_set(path, format)?)
}

fn load_clustering(path: &Path) -> Result<Clustering, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: not a clustering file: {e}", path.display())))
}

fn ensure_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path, e.into()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn ingest(
    input: &Path,
    format: Option<Format>,
    convert_to: Option<Format>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let set = load_set(input, format)?;
    println!(
        "valid {} set: {} records, dim {}, epoch {}, model_tag {:?}",
        set.space(),
        set.len(),
        set.dim(),
        set.epoch(),
        set.model_tag()
    );
    if let Some(target) = convert_to {
        let output = output.ok_or_else(|| {
            CliError::Config("--output is required together with --convert-to".into())
        })?;
        save_vector_set(&set, output, target)?;
        println!("wrote {} copy to {}", format_name(target), output.display());
    }
    Ok(())
}

fn format_name(format: Format) -> &'static str {
    match format {
        Format::Jsonl => "jsonl",
        Format::Binary => "binary",
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    input: &Path,
    format: Option<Format>,
    k_min: usize,
    k_max: usize,
    seeds: &[u64],
    metric: Metric,
    out: &Path,
) -> Result<(), CliError> {
    let set = load_set(input, format)?;
    let report = sweep_k(&set, k_min, k_max, metric, seeds)?;
    ensure_out(out)?;
    let space = set.space();
    write_json(out, &format!("ksweep_{space}.json"), &report)?;
    write_text(out, &format!("ksweep_{space}.csv"), &report.to_csv())?;
    println!(
        "selected_k={} agreement={} (elbow={}, db={}, second_best={:?})",
        report.selected_k, report.agreement, report.elbow_k, report.db_k, report.second_best_k
    );
    Ok(())
}

pub fn cluster(
    input: &Path,
    format: Option<Format>,
    k: usize,
    metric: Metric,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let set = load_set(input, format)?;
    let clustering = kmeans(&set, k, metric, seed)?;
    ensure_out(out)?;
    let path = write_json(out, &format!("clusters_{}.json", set.space()), &clustering)?;
    println!(
        "k={} wcss={:.6} iterations={} -> {}",
        clustering.k,
        clustering.wcss,
        clustering.iterations,
        path.display()
    );
    Ok(())
}

/// Serialized projection summary (the per-point coordinates live in the
/// scatter CSV).
#[derive(Serialize)]
struct ProjectionSummary<'a> {
    components: &'a [Vec<f64>; 2],
    explained_variance_ratio: &'a [f64; 2],
    mean: &'a [f64],
}

pub fn project(
    input: &Path,
    format: Option<Format>,
    clusters: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let set = load_set(input, format)?;
    let clustering = load_clustering(clusters)?;
    let proj = pca_fit(&set)?;
    ensure_out(out)?;
    let space = set.space();
    let scatter = out.join(format!("scatter_{space}.csv"));
    export_scatter(&proj, &clustering, &scatter)?;
    write_json(
        out,
        &format!("projection_{space}.json"),
        &ProjectionSummary {
            components: &proj.components,
            explained_variance_ratio: &proj.explained_variance_ratio,
            mean: &proj.mean,
        },
    )?;
    println!(
        "explained variance {:.4}/{:.4} -> {}",
        proj.explained_variance_ratio[0],
        proj.explained_variance_ratio[1],
        scatter.display()
    );
    Ok(())
}

fn print_flow(flow: &FlowMatrix, top: usize) -> Result<(), CliError> {
    println!(
        "{} ({} pairs over {}x{} clusters):",
        flow.direction,
        flow.n,
        flow.k_src(),
        flow.k_tgt()
    );
    for row in 0..flow.k_src() {
        let targets = top_targets(flow, row, top)?;
        let rendered: Vec<String> = targets
            .iter()
            .map(|(j, pct)| format!("#{j} at {pct:.2}%"))
            .collect();
        if rendered.is_empty() {
            println!("  cluster #{row}: (empty)");
        } else {
            println!("  cluster #{row}: {}", rendered.join(", "));
        }
    }
    Ok(())
}

pub fn flow(
    embedding: &Path,
    encoder: &Path,
    emb_clusters: &Path,
    enc_clusters: &Path,
    top: usize,
    out: &Path,
) -> Result<(), CliError> {
    let emb = load_space_checked(embedding, Space::Embedding)?;
    let enc = load_space_checked(encoder, Space::Encoder)?;
    let emb_clustering = load_clustering(emb_clusters)?;
    let enc_clustering = load_clustering(enc_clusters)?;
    let alignment = align_spaces(&emb, &enc)?;
    if !alignment.only_emb.is_empty() || !alignment.only_enc.is_empty() {
        println!(
            "unmatched ids: {} embedding-only, {} encoder-only",
            alignment.only_emb.len(),
            alignment.only_enc.len()
        );
    }
    ensure_out(out)?;
    for (src, tgt, direction) in [
        (&emb_clustering, &enc_clustering, Direction::EmbeddingToEncoder),
        (&enc_clustering, &emb_clustering, Direction::EncoderToEmbedding),
    ] {
        let matrix = compute_flow(&alignment.pairs, src, tgt, direction)?;
        write_json(out, &format!("flow_{direction}.json"), &matrix)?;
        write_text(out, &format!("flow_{direction}.csv"), &matrix.to_csv())?;
        print_flow(&matrix, top)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn distill(
    input: &Path,
    format: Option<Format>,
    clusters: &Path,
    space: Option<Space>,
    k_neighbors: usize,
    budget: usize,
    seed: u64,
    centers: CentersMode,
    out: &Path,
) -> Result<(), CliError> {
    let set = load_set(input, format)?;
    if let Some(expected) = space {
        if set.space() != expected {
            return Err(CliError::Config(format!(
                "--space {expected} but {} holds {} vectors",
                input.display(),
                set.space()
            )));
        }
    }
    let clustering = load_clustering(clusters)?;
    let manifest = distill_with(
        &set,
        &clustering,
        k_neighbors,
        budget,
        seed,
        DistillOptions {
            centers,
            created_at: created_at(),
        },
    )?;
    ensure_out(out)?;
    let path = write_json(out, "manifest_distill.json", &manifest)?;
    println!(
        "selected {} of {} ids from {} centers{} -> {}",
        manifest.selected_ids.len(),
        set.len(),
        manifest.n_centers,
        if manifest.infeasible { " (budget infeasible)" } else { "" },
        path.display()
    );
    Ok(())
}

pub fn sample_random(
    input: &Path,
    format: Option<Format>,
    budget: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let set = load_set(input, format)?;
    let manifest = random_baseline_sample_with(&set, budget, seed, created_at())?;
    ensure_out(out)?;
    let path = write_json(out, "manifest_random.json", &manifest)?;
    println!(
        "selected {} of {} ids uniformly -> {}",
        manifest.selected_ids.len(),
        set.len(),
        path.display()
    );
    Ok(())
}

pub fn metrics_stats(corpus_path: &Path, out: &Path) -> Result<(), CliError> {
    let corpus = load_corpus(corpus_path)?;
    let stats = corpus_stats(&corpus)?;
    let tag = corpus_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    ensure_out(out)?;
    let csv = stats.to_csv(&tag);
    write_text(out, "corpus_stats.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

#[derive(Deserialize)]
struct RougePairLine {
    id: String,
    candidate: String,
    reference: String,
}

pub fn metrics_rouge(pairs_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(pairs_path).map_err(|e| CliError::io(pairs_path, e))?;
    let mut csv = String::from("id,variant,precision,recall,f1\n");
    let mut n_pairs = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: RougePairLine = serde_json::from_str(line).map_err(|e| {
            CliError::Config(format!(
                "{}: line {}: {e}",
                pairs_path.display(),
                lineno + 1
            ))
        })?;
        let cand = tokenize(&pair.candidate);
        let reference = tokenize(&pair.reference);
        let scores = [
            rouge_n(&cand, &reference, 1),
            rouge_n(&cand, &reference, 2),
            rouge_l(&cand, &reference),
        ];
        for score in scores {
            csv.push_str(&rouge_row(&pair.id, &score));
        }
        n_pairs += 1;
    }
    ensure_out(out)?;
    let path = write_text(out, "rouge_scores.csv", &csv)?;
    println!("scored {n_pairs} pairs -> {}", path.display());
    Ok(())
}

fn rouge_row(id: &str, score: &RougeScore) -> String {
    format!(
        "{},{},{:.2},{:.2},{:.2}\n",
        id,
        score.variant.label(),
        score.precision,
        score.recall,
        score.f1
    )
}
