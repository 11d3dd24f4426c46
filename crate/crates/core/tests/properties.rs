//! Property tests for the serialization, metric, flow, and selection
//! invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use repdiv::clustering::{Clustering, Metric};
use repdiv::corpus_metrics::rouge_n;
use repdiv::distill::{uniform_stride_sample, SubCluster};
use repdiv::flowmap::{compute_flow, saturation_index, Direction};
use repdiv::model_selection::{davies_bouldin, elbow_k};
use repdiv::vectorstore::{
    align_spaces, load_vector_set, save_vector_set, AlignedPair, Format, Space, VectorRecord,
    VectorSet,
};

fn arb_set(space: Space, f32_payload: bool) -> impl Strategy<Value = VectorSet> {
    (1usize..4, prop::collection::btree_set("[a-z]{1,6}", 1..10)).prop_flat_map(
        move |(dim, ids)| {
            let n = ids.len();
            let value = if f32_payload {
                (-1e6f32..1e6f32).prop_map(f64::from).boxed()
            } else {
                (-1e12f64..1e12f64).boxed()
            };
            let tag = if f32_payload { "" } else { "prop" };
            prop::collection::vec(prop::collection::vec(value, dim..=dim), n..=n).prop_map(
                move |vecs| {
                    let records = ids
                        .iter()
                        .cloned()
                        .zip(vecs)
                        .map(|(id, vec)| VectorRecord { id, vec })
                        .collect();
                    VectorSet::new(space, tag, 3, dim, records).unwrap()
                },
            )
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jsonl_round_trip_identity(set in arb_set(Space::Embedding, false)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.jsonl");
        save_vector_set(&set, &path, Format::Jsonl).unwrap();
        let loaded = load_vector_set(&path, Format::Jsonl).unwrap();
        prop_assert_eq!(set, loaded);
    }

    #[test]
    fn binary_round_trip_identity(set in arb_set(Space::Encoder, true)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.bin");
        save_vector_set(&set, &path, Format::Binary).unwrap();
        let loaded = load_vector_set(&path, Format::Binary).unwrap();
        for (a, b) in set.records().iter().zip(loaded.records()) {
            for (x, y) in a.vec.iter().zip(&b.vec) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        prop_assert_eq!(set, loaded);
    }

    #[test]
    fn align_size_is_intersection_size(
        emb in arb_set(Space::Embedding, false),
        enc in arb_set(Space::Encoder, false),
    ) {
        let expected = emb.ids().filter(|id| enc.contains(id)).count();
        match align_spaces(&emb, &enc) {
            Ok(alignment) => {
                prop_assert_eq!(alignment.pairs.len(), expected);
                for w in alignment.pairs.windows(2) {
                    prop_assert!(w[0].id < w[1].id);
                }
            }
            Err(repdiv::Error::EmptyIntersection) => prop_assert_eq!(expected, 0),
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error: {e}"))),
        }
    }
}

fn arb_tokens() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["a", "b", "c", "dd", "ee"]).prop_map(str::to_string),
        0..12,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rouge_precision_recall_symmetry(
        a in arb_tokens(),
        b in arb_tokens(),
        n in 1usize..4,
    ) {
        let ab = rouge_n(&a, &b, n);
        let ba = rouge_n(&b, &a, n);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
    }

    #[test]
    fn rouge_recall_monotone_under_matching_append(
        mut cand in arb_tokens(),
        reference in arb_tokens(),
        n in 1usize..3,
        pick in 0usize..16,
    ) {
        prop_assume!(!reference.is_empty());
        let before = rouge_n(&cand, &reference, n).recall;
        cand.push(reference[pick % reference.len()].clone());
        let after = rouge_n(&cand, &reference, n).recall;
        prop_assert!(after >= before);
    }

    #[test]
    fn stride_ranks_spread_uniformly(len in 1usize..200, quota_fraction in 0.0f64..1.0) {
        let quota = 1 + (quota_fraction * (len + 1) as f64) as usize;
        let quota = quota.min(len + 1);
        let sub = SubCluster {
            center_id: "center".into(),
            member_ids: (0..len).map(|i| format!("m{i:03}")).collect(),
            similarities: (0..len).map(|i| 1.0 - i as f64 * 1e-3).collect(),
        };
        let picked = uniform_stride_sample(&sub, quota).unwrap();
        prop_assert_eq!(picked.len(), quota);
        let ranks: Vec<usize> = picked[1..]
            .iter()
            .map(|id| id[1..].parse::<usize>().unwrap())
            .collect();
        let q = quota - 1;
        if q >= 2 {
            let min_gap = (len / q).saturating_sub(1);
            for w in ranks.windows(2) {
                prop_assert!(
                    w[1] - w[0] >= min_gap,
                    "ranks {:?} gap below floor({len}/{q}) - 1",
                    w
                );
            }
        }
    }
}

fn labeling(k: usize, labels: &[usize], ids: &[String]) -> Clustering {
    Clustering {
        k,
        metric: Metric::Euclidean,
        seed: 0,
        iterations: 0,
        wcss: 0.0,
        centroids: vec![vec![0.0]; k],
        assignments: ids
            .iter()
            .cloned()
            .zip(labels.iter().copied())
            .collect::<BTreeMap<_, _>>(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn flow_rows_sum_and_transpose(
        (n, k_src, k_tgt) in (2usize..40, 1usize..6, 1usize..6),
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let mut next = move |m: usize| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % m as u64) as usize
        };
        let ids: Vec<String> = (0..n).map(|i| format!("id{i:03}")).collect();
        let src_labels: Vec<usize> = (0..n).map(|_| next(k_src)).collect();
        let tgt_labels: Vec<usize> = (0..n).map(|_| next(k_tgt)).collect();
        let pairs: Vec<AlignedPair> = ids
            .iter()
            .map(|id| AlignedPair {
                id: id.clone(),
                emb: VectorRecord { id: id.clone(), vec: vec![0.0] },
                enc: VectorRecord { id: id.clone(), vec: vec![0.0] },
            })
            .collect();
        let src = labeling(k_src, &src_labels, &ids);
        let tgt = labeling(k_tgt, &tgt_labels, &ids);

        let fwd = compute_flow(&pairs, &src, &tgt, Direction::EmbeddingToEncoder).unwrap();
        let rev = compute_flow(&pairs, &tgt, &src, Direction::EncoderToEmbedding).unwrap();

        for (i, row) in fwd.row_pct.iter().enumerate() {
            if fwd.empty_rows.contains(&i) {
                prop_assert!(row.iter().all(|&v| v == 0.0));
            } else {
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 100.0).abs() < 1e-6, "row {i} sums to {sum}");
            }
        }
        for i in 0..fwd.counts.len() {
            for j in 0..fwd.counts[i].len() {
                prop_assert_eq!(fwd.counts[i][j], rev.counts[j][i]);
            }
        }

        let mut prev = 0.0;
        for m in 1..=k_tgt + 1 {
            let s = saturation_index(&fwd, m);
            prop_assert!(s >= prev - 1e-12);
            prop_assert!((0.0..=100.0 + 1e-9).contains(&s));
            prev = s;
        }
    }

    #[test]
    fn elbow_invariant_under_affine_wcss_rescale(
        deltas in prop::collection::vec(0.1f64..50.0, 4..9),
        scale in 0.01f64..100.0,
        shift in -1000.0f64..1000.0,
    ) {
        // build a strictly decreasing curve from the positive deltas
        let mut curve = Vec::with_capacity(deltas.len() + 1);
        let mut acc: f64 = deltas.iter().sum::<f64>() + 1.0;
        curve.push(acc);
        for d in &deltas {
            acc -= d;
            curve.push(acc);
        }
        let k_values: Vec<usize> = (1..=curve.len()).collect();
        let base = elbow_k(&k_values, &curve).unwrap();
        let rescaled: Vec<f64> = curve.iter().map(|w| w * scale + shift).collect();
        let transformed = elbow_k(&k_values, &rescaled).unwrap();
        prop_assert_eq!(base.k, transformed.k);
    }

    #[test]
    fn davies_bouldin_scale_covariant(
        coords in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 4..10),
        scale in 0.001f64..1000.0,
    ) {
        let records: Vec<VectorRecord> = coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| VectorRecord {
                id: format!("p{i}"),
                vec: vec![x, y],
            })
            .collect();
        let set = VectorSet::new(Space::Embedding, "t", 0, 2, records).unwrap();
        let base = repdiv::clustering::kmeans(&set, 2, Metric::Euclidean, 1).unwrap();
        let db1 = match davies_bouldin(&set, &base) {
            Ok(v) => v,
            // coincident centroids can happen on degenerate draws
            Err(_) => return Ok(()),
        };

        let scaled_records: Vec<VectorRecord> = coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| VectorRecord {
                id: format!("p{i}"),
                vec: vec![x * scale, y * scale],
            })
            .collect();
        let scaled_set = VectorSet::new(Space::Embedding, "t", 0, 2, scaled_records).unwrap();
        let scaled_clustering = Clustering {
            centroids: base
                .centroids
                .iter()
                .map(|c| c.iter().map(|v| v * scale).collect())
                .collect(),
            ..base
        };
        let db2 = davies_bouldin(&scaled_set, &scaled_clustering).unwrap();
        prop_assert!(
            (db1 - db2).abs() <= 1e-9 * db1.abs().max(1.0),
            "db {db1} vs scaled {db2}"
        );
    }
}
