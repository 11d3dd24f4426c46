//! End-to-end pipeline behavior: artifact emission, failure handling, and
//! the standalone subcommand surfaces.

mod common;

use std::collections::BTreeSet;

use repdiv_cli::config::load_config;
use repdiv_cli::pipeline::{run_pipeline, FAILED_MARKER_NAME, RUN_RECORD_NAME};
use repdiv_cli::CliError;

const EXPECTED_ARTIFACTS: [&str; 11] = [
    "ksweep_embedding.json",
    "ksweep_encoder.json",
    "clusters_embedding.json",
    "clusters_encoder.json",
    "scatter_embedding.csv",
    "scatter_encoder.csv",
    "flow_emb_to_enc.json",
    "flow_enc_to_emb.json",
    "manifest_distill.json",
    "manifest_random.json",
    "corpus_stats.csv",
];

#[test]
fn full_pipeline_emits_every_artifact_without_orphans() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = common::write_synth_bundle(dir.path());
    let out = dir.path().join("out");
    let config_path = common::write_config(dir.path(), &bundle, &out);

    let (config, echo) = load_config(&config_path).unwrap();
    let record = run_pipeline(&config, &echo).unwrap();

    assert_eq!(record.status, "ok");
    assert_eq!(record.selected_k["embedding"], 3);
    assert_eq!(record.selected_k["encoder"], 3);

    let recorded: Vec<&str> = record.artifacts.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(recorded, EXPECTED_ARTIFACTS);

    // no orphan outputs: everything on disk is either listed or the record
    let on_disk: BTreeSet<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    let mut expected: BTreeSet<String> =
        EXPECTED_ARTIFACTS.iter().map(|s| s.to_string()).collect();
    expected.insert(RUN_RECORD_NAME.to_string());
    assert_eq!(on_disk, expected);

    // the distilled manifest drains the budget with unique ids
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest_distill.json")).unwrap())
            .unwrap();
    let ids = manifest["selected_ids"].as_array().unwrap();
    assert_eq!(ids.len(), 9);
    let unique: BTreeSet<&str> = ids.iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(unique.len(), 9);
}

#[test]
fn missing_encoder_aborts_with_stage_and_marker() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = common::write_synth_bundle(dir.path());
    std::fs::remove_file(&bundle.encoder).unwrap();
    let out = dir.path().join("out");
    let config_path = common::write_config(dir.path(), &bundle, &out);

    let (config, echo) = load_config(&config_path).unwrap();
    let err = run_pipeline(&config, &echo).unwrap_err();
    match err {
        CliError::Stage { stage, .. } => assert_eq!(stage, "ingest"),
        other => panic!("expected stage failure, got {other}"),
    }

    let marker = std::fs::read_to_string(out.join(FAILED_MARKER_NAME)).unwrap();
    assert!(marker.contains("stage: ingest"), "marker: {marker}");
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(RUN_RECORD_NAME)).unwrap())
            .unwrap();
    assert_eq!(record["status"], "failed:ingest");
}

#[test]
fn wrong_space_input_is_a_space_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = common::write_synth_bundle(dir.path());
    // point the encoder at the embedding-space file
    let config = format!(
        "embedding = {:?}\nencoder = {:?}\ncorpus = {:?}\nout_dir = {:?}\nk_neighbors = 29\nbudget = 9\n",
        bundle.embedding.display().to_string(),
        bundle.embedding.display().to_string(),
        bundle.corpus.display().to_string(),
        dir.path().join("out").display().to_string(),
    );
    let config_path = dir.path().join("bad.toml");
    std::fs::write(&config_path, config).unwrap();

    let (config, echo) = load_config(&config_path).unwrap();
    let err = run_pipeline(&config, &echo).unwrap_err();
    let rendered = format!("{err}");
    assert!(rendered.contains("ingest"), "got: {rendered}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn subcommands_cover_the_artifact_surface() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = common::write_synth_bundle(dir.path());
    let out = dir.path().join("cmd-out");

    use repdiv::clustering::Metric;
    use repdiv_cli::commands;

    commands::ingest(&bundle.embedding, None, None, None).unwrap();
    commands::sweep(&bundle.encoder, None, 2, 6, &[1, 2], Metric::Cosine, &out).unwrap();
    commands::cluster(&bundle.encoder, None, 3, Metric::Cosine, 1, &out).unwrap();
    commands::project(
        &bundle.encoder,
        None,
        &out.join("clusters_encoder.json"),
        &out,
    )
    .unwrap();
    commands::cluster(&bundle.embedding, None, 3, Metric::Cosine, 1, &out).unwrap();
    commands::flow(
        &bundle.embedding,
        &bundle.encoder,
        &out.join("clusters_embedding.json"),
        &out.join("clusters_encoder.json"),
        3,
        &out,
    )
    .unwrap();
    commands::distill(
        &bundle.encoder,
        None,
        &out.join("clusters_encoder.json"),
        Some(repdiv::vectorstore::Space::Encoder),
        29,
        9,
        1,
        repdiv::distill::CentersMode::Medoid,
        &out,
    )
    .unwrap();
    commands::sample_random(&bundle.encoder, None, 9, 1, &out).unwrap();
    commands::metrics_stats(&bundle.corpus, &out).unwrap();

    let pairs = dir.path().join("pairs.jsonl");
    std::fs::write(
        &pairs,
        concat!(
            r#"{"id": "p1", "candidate": "the cat sat", "reference": "the cat"}"#,
            "\n",
            r#"{"id": "p2", "candidate": "a b c d", "reference": "a c d"}"#,
            "\n",
        ),
    )
    .unwrap();
    commands::metrics_rouge(&pairs, &out).unwrap();

    let rouge = std::fs::read_to_string(out.join("rouge_scores.csv")).unwrap();
    assert!(rouge.starts_with("id,variant,precision,recall,f1\n"));
    assert!(rouge.contains("p1,R1,66.67,100.00,80.00"));
    assert!(rouge.contains("p2,RL,75.00,100.00,85.71"));

    for name in [
        "ksweep_encoder.json",
        "ksweep_encoder.csv",
        "clusters_encoder.json",
        "scatter_encoder.csv",
        "projection_encoder.json",
        "flow_emb_to_enc.json",
        "flow_emb_to_enc.csv",
        "flow_enc_to_emb.json",
        "manifest_distill.json",
        "manifest_random.json",
        "corpus_stats.csv",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = common::write_synth_bundle(dir.path());
    let bin = env!("CARGO_BIN_EXE_repdiv");

    // 0: success
    let out = dir.path().join("ok");
    let config = common::write_config(dir.path(), &bundle, &out);
    let status = std::process::Command::new(bin)
        .args(["run", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // 2: validation error (budget = 0)
    let bad_config = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("budget = 9", "budget = 0");
    std::fs::write(&bad_config, text).unwrap();
    let status = std::process::Command::new(bin)
        .args(["run", "--config"])
        .arg(&bad_config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // 3: stage failure (encoder file gone)
    std::fs::remove_file(&bundle.encoder).unwrap();
    let status = std::process::Command::new(bin)
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("fail"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn convert_round_trips_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = common::write_synth_bundle(dir.path());
    let converted = dir.path().join("enc.jsonl");
    repdiv_cli::commands::ingest(
        &bundle.encoder,
        None,
        Some(repdiv::vectorstore::Format::Jsonl),
        Some(&converted),
    )
    .unwrap();
    let via_jsonl =
        repdiv::vectorstore::load_vector_set(&converted, repdiv::vectorstore::Format::Jsonl)
            .unwrap();
    let via_binary =
        repdiv::vectorstore::load_vector_set(&bundle.encoder, repdiv::vectorstore::Format::Binary)
            .unwrap();
    assert_eq!(via_jsonl, via_binary);
}
