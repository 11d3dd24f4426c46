//! Cluster-label flow between two representation spaces.
//!
//! Given the same samples clustered in the embedding space and in the
//! encoder space, the flow matrix tallies how source-cluster members land in
//! target clusters. Row percentages are derived from the integer counts at
//! the moment of use (and rounded to two decimals only when rendering), so
//! the stored matrix never accumulates rounding.

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::vectorstore::{AlignedPair, Space};

/// Which space plays the source role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    EmbeddingToEncoder,
    EncoderToEmbedding,
}

impl Direction {
    pub fn source_space(self) -> Space {
        match self {
            Direction::EmbeddingToEncoder => Space::Embedding,
            Direction::EncoderToEmbedding => Space::Encoder,
        }
    }

    pub fn target_space(self) -> Space {
        match self {
            Direction::EmbeddingToEncoder => Space::Encoder,
            Direction::EncoderToEmbedding => Space::Embedding,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::EmbeddingToEncoder => Direction::EncoderToEmbedding,
            Direction::EncoderToEmbedding => Direction::EmbeddingToEncoder,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::EmbeddingToEncoder => f.write_str("emb_to_enc"),
            Direction::EncoderToEmbedding => f.write_str("enc_to_emb"),
        }
    }
}

/// Row-normalized mapping of cluster labels between two spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub direction: Direction,
    pub source_space: Space,
    pub target_space: Space,
    /// counts[i][j] = samples in source cluster i landing in target cluster j.
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized counts in percent; empty rows stay all-zero.
    pub row_pct: Vec<Vec<f64>>,
    /// Total paired samples.
    pub n: u64,
    /// Source clusters with no paired samples (possible when the clustering
    /// was fit on a superset).
    pub empty_rows: Vec<usize>,
}

impl FlowMatrix {
    pub fn k_src(&self) -> usize {
        self.counts.len()
    }

    pub fn k_tgt(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    /// Row percentages rendered to two decimals, one source cluster per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("src_cluster");
        for j in 0..self.k_tgt() {
            out.push_str(&format!(",tgt_{j}"));
        }
        out.push('\n');
        for (i, row) in self.row_pct.iter().enumerate() {
            out.push_str(&i.to_string());
            for pct in row {
                out.push_str(&format!(",{pct:.2}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Tallies source-to-target cluster membership over aligned pairs. The
/// clustering whose labels index rows is `src`; `direction` records which
/// space that is.
pub fn compute_flow(
    pairs: &[AlignedPair],
    src: &Clustering,
    tgt: &Clustering,
    direction: Direction,
) -> Result<FlowMatrix> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    let k_src = src.k;
    let k_tgt = tgt.k;
    let mut counts = vec![vec![0u64; k_tgt]; k_src];
    for pair in pairs {
        let i = src
            .cluster_of(&pair.id)
            .ok_or_else(|| Error::MissingAssignment(pair.id.clone()))?;
        let j = tgt
            .cluster_of(&pair.id)
            .ok_or_else(|| Error::MissingAssignment(pair.id.clone()))?;
        counts[i][j] += 1;
    }

    let mut row_pct = vec![vec![0.0f64; k_tgt]; k_src];
    let mut empty_rows = Vec::new();
    for (i, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            empty_rows.push(i);
            continue;
        }
        for (j, &c) in row.iter().enumerate() {
            row_pct[i][j] = 100.0 * c as f64 / total as f64;
        }
    }

    Ok(FlowMatrix {
        direction,
        source_space: direction.source_space(),
        target_space: direction.target_space(),
        counts,
        row_pct,
        n: pairs.len() as u64,
        empty_rows,
    })
}

/// The `m` largest row percentages, descending, ties toward the smaller
/// target index. An empty (flagged) row yields an empty list.
pub fn top_targets(flow: &FlowMatrix, row: usize, m: usize) -> Result<Vec<(usize, f64)>> {
    if row >= flow.k_src() {
        return Err(Error::RowOutOfRange {
            row,
            rows: flow.k_src(),
        });
    }
    if flow.empty_rows.contains(&row) {
        return Ok(Vec::new());
    }
    let mut entries: Vec<(usize, f64)> = flow.row_pct[row].iter().copied().enumerate().collect();
    entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    entries.truncate(m);
    Ok(entries)
}

/// Percentage of all samples whose target cluster is among the `m` globally
/// largest target columns. Non-decreasing in `m`.
pub fn saturation_index(flow: &FlowMatrix, m: usize) -> f64 {
    if flow.n == 0 || m == 0 {
        return 0.0;
    }
    let mut column_totals: Vec<(usize, u64)> = (0..flow.k_tgt())
        .map(|j| (j, flow.counts.iter().map(|row| row[j]).sum()))
        .collect();
    column_totals.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let covered: u64 = column_totals.iter().take(m).map(|&(_, c)| c).sum();
    100.0 * covered as f64 / flow.n as f64
}
