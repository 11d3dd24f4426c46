//! Cluster-count selection: WCSS elbow and Davies-Bouldin sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans, metric_points, sq_dist, Clustering, Metric};
use crate::error::{Error, Result};
use crate::vectorstore::VectorSet;

/// Davies-Bouldin index: mean over clusters of the worst ratio of summed
/// dispersions to centroid separation, in the clustering's metric space.
/// Lower is better.
pub fn davies_bouldin(set: &VectorSet, clustering: &Clustering) -> Result<f64> {
    let k = clustering.k;
    if k < 2 {
        return Err(Error::KTooSmall { k, need: 2 });
    }
    let points = metric_points(set, clustering.metric)?;

    let mut dispersion_sum = vec![0.0f64; k];
    let mut counts = vec![0usize; k];
    for (rec, point) in set.records().iter().zip(&points) {
        let cluster = clustering
            .cluster_of(&rec.id)
            .ok_or_else(|| Error::MissingAssignment(rec.id.clone()))?;
        dispersion_sum[cluster] += sq_dist(point, &clustering.centroids[cluster]).sqrt();
        counts[cluster] += 1;
    }
    let sigma: Vec<f64> = dispersion_sum
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (&sum, &count))| {
            if count == 0 {
                Err(Error::EmptyCluster(i))
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect::<Result<_>>()?;

    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = sq_dist(&clustering.centroids[i], &clustering.centroids[j]).sqrt();
            if d == 0.0 {
                return Err(Error::CoincidentCentroids { a: i.min(j), b: i.max(j) });
            }
            let ratio = (sigma[i] + sigma[j]) / d;
            if ratio > worst {
                worst = ratio;
            }
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Result of knee detection on a WCSS curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elbow {
    pub k: usize,
    /// Set when the curve is (numerically) a straight line, where the chord
    /// distance is zero everywhere and the tie rule picks the first
    /// candidate.
    pub degenerate: bool,
}

/// Knee of a WCSS curve: both axes are min-max normalized to [0, 1] and the
/// returned k maximizes the perpendicular distance to the chord joining the
/// first and last curve points. Ties break toward the smallest k.
pub fn elbow_k(k_values: &[usize], wcss_curve: &[f64]) -> Result<Elbow> {
    if k_values.len() != wcss_curve.len() {
        return Err(Error::CurveLengthMismatch {
            k_values: k_values.len(),
            curve: wcss_curve.len(),
        });
    }
    if k_values.len() < 3 {
        return Err(Error::TooFewCandidates {
            got: k_values.len(),
            need: 3,
        });
    }

    let xs: Vec<f64> = normalize_axis(&k_values.iter().map(|&k| k as f64).collect::<Vec<_>>());
    let ys: Vec<f64> = normalize_axis(wcss_curve);

    let (x0, y0) = (xs[0], ys[0]);
    let (x1, y1) = (*xs.last().unwrap(), *ys.last().unwrap());
    let dx = x1 - x0;
    let dy = y1 - y0;
    let chord_len = (dx * dx + dy * dy).sqrt();

    let mut best_idx = 0;
    let mut best_dist = -1.0f64;
    for i in 0..xs.len() {
        let dist = if chord_len > 0.0 {
            (dy * xs[i] - dx * ys[i] + x1 * y0 - y1 * x0).abs() / chord_len
        } else {
            0.0
        };
        if dist > best_dist {
            best_dist = dist;
            best_idx = i;
        }
    }

    Ok(Elbow {
        k: k_values[best_idx],
        degenerate: best_dist < 1e-12,
    })
}

fn normalize_axis(values: &[f64]) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    values
        .iter()
        .map(|&v| if span > 0.0 { (v - min) / span } else { 0.0 })
        .collect()
}

/// One sweep over candidate cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepReport {
    pub k_values: Vec<usize>,
    /// Best-of-seeds WCSS per k.
    pub wcss_curve: Vec<f64>,
    /// Davies-Bouldin of the best-WCSS run per k.
    pub db_curve: Vec<f64>,
    pub elbow_k: usize,
    pub elbow_degenerate: bool,
    pub db_k: usize,
    pub selected_k: usize,
    /// k at the second-smallest local minimum of the DB curve, when one
    /// exists.
    pub second_best_k: Option<usize>,
    /// True when the elbow and Davies-Bouldin criteria name the same k.
    pub agreement: bool,
}

impl KSweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,wcss,db\n");
        for ((k, w), d) in self.k_values.iter().zip(&self.wcss_curve).zip(&self.db_curve) {
            out.push_str(&format!("{k},{w},{d}\n"));
        }
        out
    }
}

/// Runs kmeans for every k in [k_min, k_max] across all seeds, keeps the
/// best-WCSS run per k, and selects the cluster count: the elbow k when both
/// criteria agree, the Davies-Bouldin argmin otherwise.
pub fn sweep_k(
    set: &VectorSet,
    k_min: usize,
    k_max: usize,
    metric: Metric,
    seeds: &[u64],
) -> Result<KSweepReport> {
    if k_min < 2 || k_min >= k_max || k_max > set.len() {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= k_min < k_max <= {} (got k_min={k_min}, k_max={k_max})",
            set.len()
        )));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seeds must be non-empty".into()));
    }

    let k_values: Vec<usize> = (k_min..=k_max).collect();
    // per-(k, seed) runs are independent; the fold below is ordered by k,
    // and within a k the first seed of equal-WCSS runs wins
    let runs: Vec<Result<(f64, Clustering)>> = k_values
        .par_iter()
        .map(|&k| {
            let mut best: Option<Clustering> = None;
            for &seed in seeds {
                let c = kmeans(set, k, metric, seed)?;
                if best.as_ref().is_none_or(|b| c.wcss < b.wcss) {
                    best = Some(c);
                }
            }
            let best = best.expect("seeds non-empty");
            Ok((best.wcss, best))
        })
        .collect();

    let mut wcss_curve = Vec::with_capacity(k_values.len());
    let mut db_curve = Vec::with_capacity(k_values.len());
    for run in runs {
        let (w, clustering) = run?;
        wcss_curve.push(w);
        db_curve.push(davies_bouldin(set, &clustering)?);
    }

    let elbow = elbow_k(&k_values, &wcss_curve)?;
    let db_k = argmin_k(&k_values, &db_curve);
    let agreement = elbow.k == db_k;
    let selected_k = if agreement { elbow.k } else { db_k };
    let second_best_k = second_local_minimum(&k_values, &db_curve, db_k);

    Ok(KSweepReport {
        k_values,
        wcss_curve,
        db_curve,
        elbow_k: elbow.k,
        elbow_degenerate: elbow.degenerate,
        db_k,
        selected_k,
        second_best_k,
        agreement,
    })
}

fn argmin_k(k_values: &[usize], curve: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..curve.len() {
        if curve[i] < curve[best] {
            best = i;
        }
    }
    k_values[best]
}

/// Second-best k: local minima of the DB curve (endpoints count when
/// strictly below their single neighbor) ranked by value, skipping the
/// overall argmin.
fn second_local_minimum(k_values: &[usize], curve: &[f64], db_k: usize) -> Option<usize> {
    let n = curve.len();
    let mut minima: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let below_prev = i == 0 || curve[i] < curve[i - 1];
        let below_next = i == n - 1 || curve[i] < curve[i + 1];
        if below_prev && below_next {
            minima.push((curve[i], k_values[i]));
        }
    }
    minima.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    minima.into_iter().map(|(_, k)| k).find(|&k| k != db_k)
}
