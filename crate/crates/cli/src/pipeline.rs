//! The full analysis pipeline: ingest -> sweep -> cluster -> project ->
//! flow -> distill -> metrics, emitting fixed-name artifacts plus a hashed
//! run record.
//!
//! The first failing stage aborts the run; artifacts written so far are
//! retained and a `FAILED` marker (stage name + error) is left in the
//! output directory. Reruns with identical config and inputs reproduce
//! identical artifact hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use repdiv::clustering::{kmeans, Clustering};
use repdiv::corpus_metrics::{corpus_stats, load_corpus};
use repdiv::distill::{distill_with, random_baseline_sample_with, DistillOptions};
use repdiv::flowmap::{compute_flow, Direction};
use repdiv::model_selection::sweep_k;
use repdiv::projection::{export_scatter, pca_fit};
use repdiv::vectorstore::{align_spaces, detect_format, load_vector_set, Space, VectorSet};

use crate::config::RunConfig;
use crate::record::{sha256_file, ArtifactRecord, RunRecord};
use crate::{created_at, CliError};

pub const RUN_RECORD_NAME: &str = "run_record.json";
pub const FAILED_MARKER_NAME: &str = "FAILED";

struct Emitter {
    out_dir: PathBuf,
    names: Vec<String>,
}

impl Emitter {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::io(self.path(name), e.into()))?;
        text.push('\n');
        self.write_text(name, &text)
    }
}

/// Loads a vector set of a required space, sniffing the on-disk format.
pub fn load_space_checked(path: &Path, expected: Space) -> Result<VectorSet, repdiv::Error> {
    let format = detect_format(path)?;
    let set = load_vector_set(path, format)?;
    if set.space() != expected {
        return Err(repdiv::Error::SpaceMismatch {
            expected,
            got: set.space(),
        });
    }
    Ok(set)
}

pub fn run_pipeline(config: &RunConfig, config_echo: &str) -> Result<RunRecord, CliError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::io(&config.out_dir, e))?;

    let mut emitter = Emitter {
        out_dir: config.out_dir.clone(),
        names: Vec::new(),
    };

    match run_stages(config, &mut emitter) {
        Ok(selected_k) => {
            let artifacts = hash_artifacts(&emitter)?;
            let record = RunRecord {
                status: "ok".into(),
                config_echo: config_echo.to_string(),
                parameters: parameter_echo(config),
                selected_k,
                artifacts,
            };
            let mut text = serde_json::to_string_pretty(&record)
                .map_err(|e| CliError::io(emitter.path(RUN_RECORD_NAME), e.into()))?;
            text.push('\n');
            let path = emitter.path(RUN_RECORD_NAME);
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            Ok(record)
        }
        Err((stage, source)) => {
            // retain partial outputs; drop a marker and a failed record
            let marker = format!("stage: {stage}\nerror: {source}\n");
            let _ = std::fs::write(emitter.path(FAILED_MARKER_NAME), marker);
            if let Ok(artifacts) = hash_artifacts(&emitter) {
                let record = RunRecord {
                    status: format!("failed:{stage}"),
                    config_echo: config_echo.to_string(),
                    parameters: parameter_echo(config),
                    selected_k: BTreeMap::new(),
                    artifacts,
                };
                if let Ok(mut text) = serde_json::to_string_pretty(&record) {
                    text.push('\n');
                    let _ = std::fs::write(emitter.path(RUN_RECORD_NAME), text);
                }
            }
            Err(CliError::Stage {
                stage,
                source: Box::new(source),
            })
        }
    }
}

type StageResult<T> = Result<T, (&'static str, CliError)>;

fn run_stages(config: &RunConfig, emitter: &mut Emitter) -> StageResult<BTreeMap<String, usize>> {
    let seed = config.selection_seed();
    let stamp = created_at();

    // ingest
    let (emb, enc, corpus) = (|| -> Result<_, CliError> {
        let emb = load_space_checked(&config.embedding, Space::Embedding)?;
        let enc = load_space_checked(&config.encoder, Space::Encoder)?;
        let corpus = load_corpus(&config.corpus)?;
        Ok((emb, enc, corpus))
    })()
    .map_err(|e| ("ingest", e))?;
    println!(
        "[ingest] embedding: {} x {}, encoder: {} x {}, corpus: {} docs",
        emb.len(),
        emb.dim(),
        enc.len(),
        enc.dim(),
        corpus.len()
    );

    // sweep per space, then cluster per space
    let mut selected_k = BTreeMap::new();
    for (space, set) in [(Space::Embedding, &emb), (Space::Encoder, &enc)] {
        let report = (|| -> Result<_, CliError> {
            let k_max = config.k_max.min(set.len());
            if config.k_min >= k_max {
                return Err(CliError::Config(format!(
                    "{space} set of {} vectors cannot sweep k in [{}, {}]",
                    set.len(),
                    config.k_min,
                    config.k_max
                )));
            }
            let report = sweep_k(set, config.k_min, k_max, config.metric, &config.seeds)?;
            emitter.write_json(&format!("ksweep_{space}.json"), &report)?;
            Ok(report)
        })()
        .map_err(|e| ("sweep", e))?;
        println!(
            "[sweep] {space}: selected_k={} (elbow={}, db={}, agreement={})",
            report.selected_k, report.elbow_k, report.db_k, report.agreement
        );
        selected_k.insert(space.to_string(), report.selected_k);
    }

    let mut clusterings: BTreeMap<Space, Clustering> = BTreeMap::new();
    for (space, set) in [(Space::Embedding, &emb), (Space::Encoder, &enc)] {
        let clustering = (|| -> Result<_, CliError> {
            let clustering = kmeans(set, selected_k[&space.to_string()], config.metric, seed)?;
            emitter.write_json(&format!("clusters_{space}.json"), &clustering)?;
            Ok(clustering)
        })()
        .map_err(|e| ("cluster", e))?;
        println!(
            "[cluster] {space}: k={}, wcss={:.6}, iterations={}",
            clustering.k, clustering.wcss, clustering.iterations
        );
        clusterings.insert(space, clustering);
    }

    // project
    for (space, set) in [(Space::Embedding, &emb), (Space::Encoder, &enc)] {
        (|| -> Result<_, CliError> {
            let proj = pca_fit(set)?;
            let name = format!("scatter_{space}.csv");
            export_scatter(&proj, &clusterings[&space], emitter.path(&name))?;
            emitter.names.push(name);
            println!(
                "[project] {space}: explained variance {:.4}/{:.4}",
                proj.explained_variance_ratio[0], proj.explained_variance_ratio[1]
            );
            Ok(())
        })()
        .map_err(|e| ("project", e))?;
    }

    // flow
    (|| -> Result<_, CliError> {
        let alignment = align_spaces(&emb, &enc)?;
        if !alignment.only_emb.is_empty() || !alignment.only_enc.is_empty() {
            println!(
                "[flow] unmatched ids: {} embedding-only, {} encoder-only",
                alignment.only_emb.len(),
                alignment.only_enc.len()
            );
        }
        let fwd = compute_flow(
            &alignment.pairs,
            &clusterings[&Space::Embedding],
            &clusterings[&Space::Encoder],
            Direction::EmbeddingToEncoder,
        )?;
        let rev = compute_flow(
            &alignment.pairs,
            &clusterings[&Space::Encoder],
            &clusterings[&Space::Embedding],
            Direction::EncoderToEmbedding,
        )?;
        emitter.write_json(&format!("flow_{}.json", Direction::EmbeddingToEncoder), &fwd)?;
        emitter.write_json(&format!("flow_{}.json", Direction::EncoderToEmbedding), &rev)?;
        println!("[flow] {} aligned pairs tallied in both directions", fwd.n);
        Ok(())
    })()
    .map_err(|e| ("flow", e))?;

    // distill + random baseline
    (|| -> Result<_, CliError> {
        let (set, clustering) = match config.distill_space {
            Space::Embedding => (&emb, &clusterings[&Space::Embedding]),
            Space::Encoder => (&enc, &clusterings[&Space::Encoder]),
        };
        let manifest = distill_with(
            set,
            clustering,
            config.k_neighbors,
            config.budget,
            seed,
            DistillOptions {
                centers: config.centers,
                created_at: stamp,
            },
        )?;
        emitter.write_json("manifest_distill.json", &manifest)?;
        println!(
            "[distill] {} of {} ids selected from {} centers{}",
            manifest.selected_ids.len(),
            set.len(),
            manifest.n_centers,
            if manifest.infeasible { " (budget infeasible)" } else { "" }
        );
        let random = random_baseline_sample_with(set, config.budget.min(set.len()), seed, stamp)?;
        emitter.write_json("manifest_random.json", &random)?;
        Ok(())
    })()
    .map_err(|e| ("distill", e))?;

    // metrics
    (|| -> Result<_, CliError> {
        let stats = corpus_stats(&corpus)?;
        let tag = config
            .corpus
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into());
        emitter.write_text("corpus_stats.csv", &stats.to_csv(&tag))?;
        println!(
            "[metrics] {} docs: compr={:.2}, abstr={:.2}, inter_sim={:.2}",
            stats.n_docs, stats.compression, stats.abstractness_3gram, stats.inter_sim
        );
        Ok(())
    })()
    .map_err(|e| ("metrics", e))?;

    Ok(selected_k)
}

fn hash_artifacts(emitter: &Emitter) -> Result<Vec<ArtifactRecord>, CliError> {
    emitter
        .names
        .iter()
        .map(|name| {
            Ok(ArtifactRecord {
                name: name.clone(),
                sha256: sha256_file(emitter.path(name))?,
            })
        })
        .collect()
}

fn parameter_echo(config: &RunConfig) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("embedding".into(), config.embedding.display().to_string());
    map.insert("encoder".into(), config.encoder.display().to_string());
    map.insert("corpus".into(), config.corpus.display().to_string());
    map.insert("k_min".into(), config.k_min.to_string());
    map.insert("k_max".into(), config.k_max.to_string());
    map.insert(
        "seeds".into(),
        config
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    map.insert("metric".into(), config.metric.to_string());
    map.insert("k_neighbors".into(), config.k_neighbors.to_string());
    map.insert("budget".into(), config.budget.to_string());
    map.insert("distill_space".into(), config.distill_space.to_string());
    map.insert("centers".into(), config.centers.to_string());
    map.insert("seed".into(), config.selection_seed().to_string());
    map
}
