//! Cosine/euclidean k-means and exact cosine KNN over a vector set.
//!
//! Cosine mode runs the euclidean algorithm on L2-normalized copies of the
//! inputs (spherical k-means), so cosine assignments are identical by
//! construction to euclidean assignments on normalized data. All distances
//! and WCSS values for a cosine clustering therefore live in the normalized
//! space.
//!
//! Determinism: seeding is k-means++ driven by a ChaCha8 stream from the
//! explicit seed; the assignment step is parallelized per point (each point
//! is independent) and the centroid update reduces sequentially in ascending
//! record order, so results are bit-identical regardless of worker count.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorstore::VectorSet;

/// Distance space used by [`kmeans`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Euclidean,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Cosine => f.write_str("cosine"),
            Metric::Euclidean => f.write_str("euclidean"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric `{other}` (expected `cosine` or `euclidean`)"
            ))),
        }
    }
}

/// A fitted k-means run: centroids plus a full id-to-cluster mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub metric: Metric,
    pub seed: u64,
    pub iterations: usize,
    pub wcss: f64,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: BTreeMap<String, usize>,
}

impl Clustering {
    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine arguments".into(),
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 {
        return Err(Error::ZeroNorm("left argument".into()));
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm("right argument".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// The k nearest neighbors of one sample, by cosine similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub center_id: String,
    /// Sorted by similarity descending, ties by id ascending (byte order).
    pub neighbor_ids: Vec<String>,
    /// Similarities matching `neighbor_ids`, descending.
    pub similarities: Vec<f64>,
}

/// Exact cosine KNN of `center` within `set`. The center itself is excluded;
/// ties break by id byte order ascending.
pub fn knn_neighbors(center: &str, set: &VectorSet, k: usize) -> Result<NeighborList> {
    let center_rec = set
        .get(center)
        .ok_or_else(|| Error::UnknownId(center.to_string()))?;
    if k > set.len().saturating_sub(1) {
        return Err(Error::KTooLarge {
            k,
            limit: set.len().saturating_sub(1),
        });
    }

    let mut scored: Vec<(&str, f64)> = Vec::with_capacity(set.len() - 1);
    for rec in set.records() {
        if rec.id == center {
            continue;
        }
        let sim = match cosine_similarity(&center_rec.vec, &rec.vec) {
            Ok(s) => s,
            Err(Error::ZeroNorm(_)) => return Err(Error::ZeroNorm(rec.id.clone())),
            Err(e) => return Err(e),
        };
        scored.push((&rec.id, sim));
    }
    scored.sort_unstable_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("similarities are finite")
            .then_with(|| a.0.cmp(b.0))
    });
    scored.truncate(k);

    Ok(NeighborList {
        center_id: center.to_string(),
        neighbor_ids: scored.iter().map(|(id, _)| id.to_string()).collect(),
        similarities: scored.iter().map(|&(_, s)| s).collect(),
    })
}

/// Points in the clustering's metric space: raw copies for euclidean,
/// L2-normalized copies for cosine.
pub(crate) fn metric_points(set: &VectorSet, metric: Metric) -> Result<Vec<Vec<f64>>> {
    set.records()
        .iter()
        .map(|rec| match metric {
            Metric::Euclidean => Ok(rec.vec.clone()),
            Metric::Cosine => {
                let norm = rec.vec.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::ZeroNorm(rec.id.clone()));
                }
                Ok(rec.vec.iter().map(|v| v / norm).collect())
            }
        })
        .collect()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (idx, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = idx;
        }
    }
    (best, best_d)
}

/// Greedy k-means++ seeding: first centroid uniform, then each next
/// centroid drawn as the best of `2 + ln k` candidates sampled with
/// probability proportional to the squared distance to the nearest chosen
/// centroid (the candidate minimizing the resulting potential wins).
fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let n_candidates = 2 + (k as f64).ln().floor() as usize;
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());

    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut best: Option<(usize, f64)> = None;
            for _ in 0..n_candidates {
                let mut u = rng.gen::<f64>() * total;
                let mut candidate = n - 1;
                for (i, &w) in min_d2.iter().enumerate() {
                    if u < w {
                        candidate = i;
                        break;
                    }
                    u -= w;
                }
                let potential: f64 = points
                    .iter()
                    .zip(&min_d2)
                    .map(|(p, &d)| d.min(sq_dist(p, &points[candidate])))
                    .sum();
                if best.is_none_or(|(_, p)| potential < p) {
                    best = Some((candidate, potential));
                }
            }
            best.expect("at least one candidate").0
        } else {
            // all remaining mass at the chosen centroids (duplicate-heavy
            // data): fall back to the first point not yet used
            let used: Vec<&Vec<f64>> = centroids.iter().collect();
            points
                .iter()
                .position(|p| !used.contains(&p))
                .unwrap_or(0)
        };
        centroids.push(points[chosen].clone());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, centroids.last().unwrap());
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }
    centroids
}

/// Moves the point farthest from its assigned centroid into each empty
/// cluster. Only points from clusters with more than one member are
/// eligible; ties break at the lowest record index.
fn repair_empty_clusters(
    points: &[Vec<f64>],
    centroids: &[Vec<f64>],
    labels: &mut [usize],
    k: usize,
) -> Result<()> {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return Ok(());
        };
        let mut donor: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] <= 1 {
                continue;
            }
            let d = sq_dist(p, &centroids[labels[i]]);
            if donor.is_none_or(|(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        match donor {
            Some((i, _)) => labels[i] = empty,
            // every non-empty cluster is a singleton: k exceeds the number
            // of distinguishable points
            None => {
                return Err(Error::KTooLarge {
                    k,
                    limit: k - 1,
                })
            }
        }
    }
}

fn update_centroids(points: &[Vec<f64>], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    // sequential, in ascending record order
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, &v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
        }
    }
    sums
}

fn total_wcss(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum()
}

const POLISH_MAX_PASSES: usize = 100;

/// Hartigan-style polish: single-point moves with exact WCSS deltas,
/// first-improvement in ascending record order, until no move improves.
/// Escapes Lloyd fixpoints that are not single-move optimal; never empties
/// a cluster.
fn hartigan_polish(points: &[Vec<f64>], labels: &mut [usize], k: usize, dim: usize) {
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels.iter()) {
        counts[l] += 1;
        for (s, &v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }

    let dist_to_mean = |p: &[f64], sum: &[f64], count: usize| -> f64 {
        let inv = 1.0 / count as f64;
        p.iter()
            .zip(sum)
            .map(|(&x, &s)| {
                let d = x - s * inv;
                d * d
            })
            .sum()
    };

    for _ in 0..POLISH_MAX_PASSES {
        let mut improved = false;
        for (i, p) in points.iter().enumerate() {
            let from = labels[i];
            if counts[from] <= 1 {
                continue;
            }
            let nc = counts[from] as f64;
            let removal_gain = nc / (nc - 1.0) * dist_to_mean(p, &sums[from], counts[from]);
            let mut best: Option<(usize, f64)> = None;
            for to in 0..k {
                if to == from {
                    continue;
                }
                let nd = counts[to] as f64;
                let insertion_cost = nd / (nd + 1.0) * dist_to_mean(p, &sums[to], counts[to]);
                let delta = insertion_cost - removal_gain;
                if delta < -1e-12 && best.is_none_or(|(_, d)| delta < d) {
                    best = Some((to, delta));
                }
            }
            if let Some((to, _)) = best {
                counts[from] -= 1;
                counts[to] += 1;
                for (s, &v) in sums[from].iter_mut().zip(p) {
                    *s -= v;
                }
                for (s, &v) in sums[to].iter_mut().zip(p) {
                    *s += v;
                }
                labels[i] = to;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

const WCSS_REL_TOL: f64 = 1e-6;
const MAX_ITERATIONS: usize = 300;
const N_INIT: usize = 4;

/// Lloyd's algorithm with greedy k-means++ seeding, iterated until the
/// relative WCSS change drops below 1e-6 or 300 iterations, then polished
/// with Hartigan single-point moves. Each call runs four seeding restarts
/// off the one seed's stream and keeps the best run. Deterministic for
/// fixed (record order, k, metric, seed).
pub fn kmeans(set: &VectorSet, k: usize, metric: Metric, seed: u64) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::KTooSmall { k, need: 1 });
    }
    if k > set.len() {
        return Err(Error::KTooLarge { k, limit: set.len() });
    }
    let points = metric_points(set, metric)?;
    let dim = set.dim();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<LloydRun> = None;
    for _ in 0..N_INIT {
        let run = lloyd_run(&points, k, dim, &mut rng)?;
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let run = best.expect("N_INIT > 0");

    let assignments = set
        .ids()
        .zip(&run.labels)
        .map(|(id, &l)| (id.to_string(), l))
        .collect();

    Ok(Clustering {
        k,
        metric,
        seed,
        iterations: run.iterations,
        wcss: run.wcss,
        centroids: run.centroids,
        assignments,
    })
}

struct LloydRun {
    wcss: f64,
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    iterations: usize,
}

fn lloyd_run(
    points: &[Vec<f64>],
    k: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LloydRun> {
    let mut centroids = kmeans_pp_init(points, k, rng);
    let mut labels = vec![0usize; points.len()];
    let mut prev_wcss = f64::INFINITY;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        labels = points
            .par_iter()
            .map(|p| nearest_centroid(p, &centroids).0)
            .collect();
        repair_empty_clusters(points, &centroids, &mut labels, k)?;
        centroids = update_centroids(points, &labels, k, dim);
        let wcss = total_wcss(points, &centroids, &labels);

        if prev_wcss.is_finite() {
            let change = (prev_wcss - wcss).abs();
            let rel = if prev_wcss > 0.0 { change / prev_wcss } else { 0.0 };
            if rel < WCSS_REL_TOL {
                break;
            }
        }
        prev_wcss = wcss;
    }

    hartigan_polish(points, &mut labels, k, dim);
    let centroids = update_centroids(points, &labels, k, dim);
    let wcss = total_wcss(points, &centroids, &labels);
    Ok(LloydRun {
        wcss,
        labels,
        centroids,
        iterations,
    })
}

/// Recomputes the within-cluster sum of squares for `clustering` over `set`,
/// in the clustering's metric space.
pub fn wcss(set: &VectorSet, clustering: &Clustering) -> Result<f64> {
    let points = metric_points(set, clustering.metric)?;
    let mut total = 0.0;
    for (rec, point) in set.records().iter().zip(&points) {
        let cluster = clustering
            .cluster_of(&rec.id)
            .ok_or_else(|| Error::MissingAssignment(rec.id.clone()))?;
        total += sq_dist(point, &clustering.centroids[cluster]);
    }
    Ok(total)
}
