//! Budgeted, diversity-preserving subset selection.
//!
//! For each cluster center the cosine-KNN neighborhood becomes a sub-cluster
//! ranked by similarity to the center; the global budget is split across
//! sub-clusters (floor plus largest-remainder, clipped to capacity) and each
//! sub-cluster is sampled uniformly by rank, center first. Overlapping
//! selections are deduplicated and the shortfall refilled from the largest
//! sub-cluster's next-ranked unselected members, folding over centers in id
//! order so the result is a pure function of its inputs.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cosine_similarity, knn_neighbors, Clustering};
use crate::error::{Error, Result};
use crate::vectorstore::{Space, VectorSet};

/// A center's similarity-ranked KNN neighborhood (center excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubCluster {
    pub center_id: String,
    /// Ranked by similarity to the center, descending (equivalently by
    /// distance from minimum to maximum).
    pub member_ids: Vec<String>,
    pub similarities: Vec<f64>,
}

impl SubCluster {
    /// Members plus the always-eligible center.
    pub fn capacity(&self) -> usize {
        self.member_ids.len() + 1
    }
}

/// Per-center share of the global sample budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub total: usize,
    pub per_center_quota: BTreeMap<String, usize>,
    pub seed: u64,
}

/// How centers are picked: one medoid per top-level cluster, or every
/// sample as its own center (union-dedup semantics).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentersMode {
    Medoid,
    All,
}

impl std::fmt::Display for CentersMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CentersMode::Medoid => f.write_str("medoid"),
            CentersMode::All => f.write_str("all"),
        }
    }
}

impl std::str::FromStr for CentersMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "medoid" => Ok(CentersMode::Medoid),
            "all" => Ok(CentersMode::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown centers mode `{other}` (expected `medoid` or `all`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Distill,
    Random,
}

/// The distilled subset: ids, quotas, and a full parameter echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub dataset_tag: String,
    pub space: Space,
    pub method: SelectionMethod,
    pub k_neighbors: usize,
    pub n_centers: usize,
    pub budget: Budget,
    /// Unique, sorted by id ascending.
    pub selected_ids: Vec<String>,
    pub parameters: BTreeMap<String, String>,
    /// Unix seconds; callers inject it (0 unless overridden) so manifests
    /// stay byte-reproducible.
    pub created_at: u64,
    /// Set when the sub-cluster universe could not supply the whole budget
    /// (selection was topped up from the rest of the set, or the budget
    /// exceeds the set itself). Raising k_neighbors usually clears it.
    pub infeasible: bool,
}

/// Options beyond the core distill signature.
#[derive(Debug, Clone, Copy)]
pub struct DistillOptions {
    pub centers: CentersMode,
    pub created_at: u64,
}

impl Default for DistillOptions {
    fn default() -> Self {
        DistillOptions {
            centers: CentersMode::Medoid,
            created_at: 0,
        }
    }
}

/// One center per cluster: the member with the highest cosine similarity to
/// its centroid, ties toward the smaller id. Output is indexed by cluster.
pub fn choose_centers(set: &VectorSet, clustering: &Clustering) -> Result<Vec<String>> {
    let k = clustering.k;
    let mut best: Vec<Option<(f64, &str)>> = vec![None; k];
    for rec in set.records() {
        let cluster = clustering
            .cluster_of(&rec.id)
            .ok_or_else(|| Error::MissingAssignment(rec.id.clone()))?;
        // undefined cosine (zero-norm member or centroid) ranks below
        // everything; id order alone then decides
        let sim = cosine_similarity(&rec.vec, &clustering.centroids[cluster])
            .unwrap_or(f64::NEG_INFINITY);
        let better = match &best[cluster] {
            None => true,
            Some((best_sim, best_id)) => {
                sim > *best_sim || (sim == *best_sim && rec.id.as_str() < *best_id)
            }
        };
        if better {
            best[cluster] = Some((sim, &rec.id));
        }
    }
    best.into_iter()
        .enumerate()
        .map(|(cluster, slot)| {
            slot.map(|(_, id)| id.to_string())
                .ok_or(Error::EmptyCluster(cluster))
        })
        .collect()
}

/// The similarity-ranked KNN sub-cluster around `center`.
pub fn build_subcluster(center: &str, set: &VectorSet, k: usize) -> Result<SubCluster> {
    let neighbors = knn_neighbors(center, set, k)?;
    Ok(SubCluster {
        center_id: neighbors.center_id,
        member_ids: neighbors.neighbor_ids,
        similarities: neighbors.similarities,
    })
}

/// Takes `quota` ids from a sub-cluster: the center first, then members at
/// ranked indices floor(t*L/q) for t in 0..q over the L ranked members
/// (duplicate indices fill forward). Output stays in rank order.
pub fn uniform_stride_sample(sub: &SubCluster, quota: usize) -> Result<Vec<String>> {
    if quota > sub.capacity() {
        return Err(Error::QuotaTooLarge {
            quota,
            capacity: sub.capacity(),
        });
    }
    if quota == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(quota);
    out.push(sub.center_id.clone());
    let q = quota - 1;
    if q == 0 {
        return Ok(out);
    }
    let len = sub.member_ids.len();
    let mut used = vec![false; len];
    for t in 0..q {
        let mut idx = t * len / q;
        while used[idx] {
            idx += 1;
        }
        used[idx] = true;
    }
    for (idx, taken) in used.iter().enumerate() {
        if *taken {
            out.push(sub.member_ids[idx].clone());
        }
    }
    Ok(out)
}

/// Splits `total` across sub-clusters: floor(total/n) each, the remainder
/// one-by-one to the largest sub-clusters (ties by center id), quotas
/// clipped to capacity with overflow redistributed by the same rule. The
/// quotas always sum to min(total, sum of capacities).
pub fn allocate_budget(subclusters: &[SubCluster], total: usize, seed: u64) -> Budget {
    let n = subclusters.len();
    let mut quotas = vec![0usize; n];
    if n > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            subclusters[b]
                .capacity()
                .cmp(&subclusters[a].capacity())
                .then_with(|| subclusters[a].center_id.cmp(&subclusters[b].center_id))
        });

        let base = total / n;
        let remainder = total % n;
        for (rank, &i) in order.iter().enumerate() {
            quotas[i] = base + usize::from(rank < remainder);
        }

        let capacity_sum: usize = subclusters.iter().map(SubCluster::capacity).sum();
        let target = total.min(capacity_sum);
        loop {
            for (i, quota) in quotas.iter_mut().enumerate() {
                *quota = (*quota).min(subclusters[i].capacity());
            }
            let assigned: usize = quotas.iter().sum();
            if assigned >= target {
                break;
            }
            let mut leftover = target - assigned;
            for &i in &order {
                if leftover == 0 {
                    break;
                }
                if quotas[i] < subclusters[i].capacity() {
                    quotas[i] += 1;
                    leftover -= 1;
                }
            }
        }
    }

    Budget {
        total,
        per_center_quota: subclusters
            .iter()
            .zip(&quotas)
            .map(|(sub, &q)| (sub.center_id.clone(), q))
            .collect(),
        seed,
    }
}

/// End-to-end distillation with medoid centers; see [`distill_with`].
pub fn distill(
    set: &VectorSet,
    clustering: &Clustering,
    k_neighbors: usize,
    total: usize,
    seed: u64,
) -> Result<SelectionManifest> {
    distill_with(set, clustering, k_neighbors, total, seed, DistillOptions::default())
}

/// Composes center choice, per-center sub-clusters, budget allocation, and
/// uniform stride sampling, then deduplicates across centers and refills any
/// shortfall from the largest sub-clusters' next-ranked unselected members
/// (falling back to the rest of the set, flagged infeasible, when the
/// sub-clusters cannot cover the budget). Deterministic for fixed inputs.
pub fn distill_with(
    set: &VectorSet,
    clustering: &Clustering,
    k_neighbors: usize,
    total: usize,
    seed: u64,
    opts: DistillOptions,
) -> Result<SelectionManifest> {
    if total == 0 {
        return Err(Error::InvalidParameter("budget total must be >= 1".into()));
    }

    let mut centers = match opts.centers {
        CentersMode::Medoid => choose_centers(set, clustering)?,
        CentersMode::All => set.ids().map(str::to_string).collect(),
    };
    centers.sort_unstable();

    let mut subclusters: Vec<SubCluster> = centers
        .par_iter()
        .map(|center| build_subcluster(center, set, k_neighbors))
        .collect::<Result<_>>()?;

    let budget = allocate_budget(&subclusters, total, seed);

    // union of per-center samples, folding over centers in id order
    let mut selected: Vec<String> = Vec::with_capacity(total);
    let mut seen: HashSet<String> = HashSet::with_capacity(total);
    for sub in &subclusters {
        let quota = budget.per_center_quota[&sub.center_id];
        for id in uniform_stride_sample(sub, quota)? {
            if seen.insert(id.clone()) {
                selected.push(id);
            }
        }
    }

    // refill: largest sub-cluster first (ties by center id), walking center
    // then members in rank order
    if selected.len() < total {
        subclusters.sort_by(|a, b| {
            b.capacity()
                .cmp(&a.capacity())
                .then_with(|| a.center_id.cmp(&b.center_id))
        });
        'refill: for sub in &subclusters {
            for id in std::iter::once(&sub.center_id).chain(&sub.member_ids) {
                if selected.len() == total {
                    break 'refill;
                }
                if seen.insert(id.clone()) {
                    selected.push(id.clone());
                }
            }
        }
    }

    // the sub-cluster universe could not honor the budget: flag it, then
    // top up from the remaining ids (ascending) so |selected| == total
    // whenever total <= |set|
    let infeasible = selected.len() < total;
    if infeasible {
        let mut remaining: Vec<&str> = set.ids().filter(|id| !seen.contains(*id)).collect();
        remaining.sort_unstable();
        for id in remaining {
            if selected.len() == total {
                break;
            }
            selected.push(id.to_string());
        }
    }
    selected.sort_unstable();

    let mut parameters = BTreeMap::new();
    parameters.insert("centers".into(), opts.centers.to_string());
    parameters.insert("clustering_k".into(), clustering.k.to_string());
    parameters.insert("k_neighbors".into(), k_neighbors.to_string());
    parameters.insert("metric".into(), clustering.metric.to_string());
    parameters.insert("n_vectors".into(), set.len().to_string());
    parameters.insert("seed".into(), seed.to_string());
    parameters.insert("total".into(), total.to_string());

    Ok(SelectionManifest {
        dataset_tag: set.model_tag().to_string(),
        space: set.space(),
        method: SelectionMethod::Distill,
        k_neighbors,
        n_centers: centers.len(),
        budget,
        selected_ids: selected,
        parameters,
        created_at: opts.created_at,
        infeasible,
    })
}

/// Seeded uniform sample without replacement, for baselining selections.
pub fn random_baseline_sample(set: &VectorSet, total: usize, seed: u64) -> Result<SelectionManifest> {
    random_baseline_sample_with(set, total, seed, 0)
}

pub fn random_baseline_sample_with(
    set: &VectorSet,
    total: usize,
    seed: u64,
    created_at: u64,
) -> Result<SelectionManifest> {
    if total > set.len() {
        return Err(Error::TotalTooLarge {
            total,
            available: set.len(),
        });
    }
    let mut ids: Vec<String> = set.ids().map(str::to_string).collect();
    ids.sort_unstable();

    // partial Fisher-Yates on the sorted id list
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ids.len();
    for i in 0..total {
        let j = rng.gen_range(i..n);
        ids.swap(i, j);
    }
    let mut selected: Vec<String> = ids.into_iter().take(total).collect();
    selected.sort_unstable();

    let mut parameters = BTreeMap::new();
    parameters.insert("n_vectors".into(), set.len().to_string());
    parameters.insert("seed".into(), seed.to_string());
    parameters.insert("total".into(), total.to_string());

    Ok(SelectionManifest {
        dataset_tag: set.model_tag().to_string(),
        space: set.space(),
        method: SelectionMethod::Random,
        k_neighbors: 0,
        n_centers: 0,
        budget: Budget {
            total,
            per_center_quota: BTreeMap::new(),
            seed,
        },
        selected_ids: selected,
        parameters,
        created_at,
        infeasible: false,
    })
}
