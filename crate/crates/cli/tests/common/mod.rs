//! Shared fixtures: seeded Gaussian blob sets and a small synthetic corpus.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use repdiv::vectorstore::{save_vector_set, Format, Space, VectorRecord, VectorSet};

/// Standard normal via Box-Muller over the seeded stream.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Blobs centered on scaled axis directions (pairwise center distance
/// spacing * sqrt(2)), sigma noise per coordinate. Ids are blob-major:
/// `doc{index:03}` with blob = index / per_blob.
pub fn blob_set(
    space: Space,
    n_blobs: usize,
    per_blob: usize,
    spacing: f64,
    sigma: f64,
    seed: u64,
    tag: &str,
) -> VectorSet {
    let dim = n_blobs.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_blobs * per_blob);
    for blob in 0..n_blobs {
        for i in 0..per_blob {
            let idx = blob * per_blob + i;
            let mut vec = vec![0.0; dim];
            vec[blob] = spacing;
            for v in vec.iter_mut() {
                *v += sigma * gaussian(&mut rng);
            }
            records.push(VectorRecord {
                id: format!("doc{idx:03}"),
                vec,
            });
        }
    }
    VectorSet::new(space, tag, 1, dim, records).unwrap()
}

pub fn blob_of(id: &str, per_blob: usize) -> usize {
    id.trim_start_matches("doc").parse::<usize>().unwrap() / per_blob
}

/// 90 vectors per space in 3 blobs, plus a 10-doc corpus, on disk.
pub struct SynthBundle {
    pub embedding: PathBuf,
    pub encoder: PathBuf,
    pub corpus: PathBuf,
}

pub fn write_synth_bundle(dir: &Path) -> SynthBundle {
    let emb = blob_set(Space::Embedding, 3, 30, 10.0, 0.05, 71, "synth");
    let enc = blob_set(Space::Encoder, 3, 30, 8.0, 0.05, 72, "synth");
    let embedding = dir.join("emb.jsonl");
    let encoder = dir.join("enc.bin");
    save_vector_set(&emb, &embedding, Format::Jsonl).unwrap();
    save_vector_set(&enc, &encoder, Format::Binary).unwrap();

    let corpus = dir.join("corpus.jsonl");
    std::fs::write(&corpus, synth_corpus_jsonl()).unwrap();
    SynthBundle {
        embedding,
        encoder,
        corpus,
    }
}

pub fn synth_corpus_jsonl() -> String {
    let topics = [
        "river flood plain water level rose sharply overnight",
        "market index futures traded lower on light volume",
        "telescope array captured faint signals from deep space",
        "city council approved the new transit budget plan",
        "vaccine trial reported strong immune response in adults",
    ];
    let mut lines = String::new();
    for i in 0..10 {
        let a = topics[i % topics.len()];
        let b = topics[(i + 2) % topics.len()];
        let reference = format!(
            "summary {} covers {} and more context",
            i,
            &a[..a.find(' ').unwrap()]
        );
        lines.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "id": format!("doc{i:03}"),
                "sources": [
                    format!("{a} according to officials. {a} again later."),
                    format!("{b} while observers watched. {b} in detail."),
                ],
                "reference": reference,
            })
        ));
    }
    lines
}

pub fn write_config(dir: &Path, bundle: &SynthBundle, out_dir: &Path) -> PathBuf {
    let config = format!(
        r#"embedding = {:?}
encoder = {:?}
corpus = {:?}
out_dir = {:?}
k_min = 2
k_max = 10
seeds = [1, 2, 3]
metric = "cosine"
k_neighbors = 29
budget = 9
distill_space = "encoder"
centers = "medoid"
seed = 1
"#,
        bundle.embedding.display().to_string(),
        bundle.encoder.display().to_string(),
        bundle.corpus.display().to_string(),
        out_dir.display().to_string(),
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    path
}
