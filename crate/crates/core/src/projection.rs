//! PCA to two components for cluster scatter export.
//!
//! The covariance is eigen-decomposed directly up to dimension 4096; above
//! that the top two components come from power iteration on the covariance
//! operator (tolerance 1e-10) without materializing the d x d matrix.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::vectorstore::VectorSet;

const DENSE_EIGEN_MAX_DIM: usize = 4096;
const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 10_000;

/// A fitted 2-component PCA with the projected coordinates of every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    /// Two orthonormal direction vectors, variance-ordered. The
    /// largest-magnitude coordinate of each is non-negative so exports are
    /// comparable across runs.
    pub components: [Vec<f64>; 2],
    /// Fraction of total variance captured by each component,
    /// non-increasing.
    pub explained_variance_ratio: [f64; 2],
    /// Projected (x, y) per sample id.
    pub points: BTreeMap<String, (f64, f64)>,
    /// Per-dimension mean removed before projecting.
    pub mean: Vec<f64>,
}

/// Fits a 2-component PCA on the mean-centered set. Rank-deficient data is
/// not an error: the second ratio simply comes out 0.
pub fn pca_fit(set: &VectorSet) -> Result<Projection2D> {
    let n = set.len();
    let dim = set.dim();
    if n < 3 {
        return Err(Error::TooFewPoints { got: n, need: 3 });
    }
    if dim < 2 {
        return Err(Error::DimensionTooSmall { dim, need: 2 });
    }

    let mut mean = vec![0.0f64; dim];
    for rec in set.records() {
        for (m, &v) in mean.iter_mut().zip(&rec.vec) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let centered: Vec<Vec<f64>> = set
        .records()
        .iter()
        .map(|rec| rec.vec.iter().zip(&mean).map(|(&v, &m)| v - m).collect())
        .collect();

    let total_variance: f64 = centered
        .iter()
        .flat_map(|row| row.iter().map(|v| v * v))
        .sum::<f64>()
        / (n - 1) as f64;

    let (mut components, eigenvalues) = if dim <= DENSE_EIGEN_MAX_DIM {
        top2_dense(&centered, dim, n)
    } else {
        top2_power_iteration(&centered, dim, n)
    };

    for component in components.iter_mut() {
        apply_sign_convention(component);
    }

    let ratio = |lambda: f64| {
        if total_variance > 0.0 {
            (lambda.max(0.0) / total_variance).min(1.0)
        } else {
            0.0
        }
    };
    let explained_variance_ratio = [ratio(eigenvalues[0]), ratio(eigenvalues[1])];

    let points = set
        .records()
        .iter()
        .zip(&centered)
        .map(|(rec, row)| {
            let x = dot(row, &components[0]);
            let y = dot(row, &components[1]);
            (rec.id.clone(), (x, y))
        })
        .collect();

    Ok(Projection2D {
        components,
        explained_variance_ratio,
        points,
        mean,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Largest-magnitude coordinate made non-negative (first such coordinate on
/// magnitude ties).
fn apply_sign_convention(component: &mut [f64]) {
    let mut pivot = 0;
    for (i, &v) in component.iter().enumerate() {
        if v.abs() > component[pivot].abs() {
            pivot = i;
        }
    }
    if component[pivot] < 0.0 {
        for v in component.iter_mut() {
            *v = -*v;
        }
    }
}

fn top2_dense(centered: &[Vec<f64>], dim: usize, n: usize) -> ([Vec<f64>; 2], [f64; 2]) {
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for row in centered {
        for i in 0..dim {
            let vi = row[i];
            if vi == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[(i, j)] += vi * row[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let take = |idx: usize| -> Vec<f64> {
        eigen.eigenvectors.column(order[idx]).iter().copied().collect()
    };
    (
        [take(0), take(1)],
        [eigen.eigenvalues[order[0]], eigen.eigenvalues[order[1]]],
    )
}

/// Top-2 eigenpairs of the covariance operator via power iteration with
/// deflation, using matrix-vector products through the centered data.
fn top2_power_iteration(centered: &[Vec<f64>], dim: usize, n: usize) -> ([Vec<f64>; 2], [f64; 2]) {
    let denom = (n - 1) as f64;
    let cov_apply = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::<f64>::zeros(dim);
        for row in centered {
            let proj = dot(row.as_slice(), v.as_slice());
            for (o, &r) in out.iter_mut().zip(row) {
                *o += proj * r;
            }
        }
        out / denom
    };

    let mut components: Vec<DVector<f64>> = Vec::with_capacity(2);
    let mut eigenvalues = [0.0f64; 2];
    for (slot, eigenvalue) in eigenvalues.iter_mut().enumerate() {
        // deterministic start vector
        let mut v = DVector::<f64>::from_fn(dim, |i, _| {
            let x = (i as f64 + 1.0) * 0.754_877_666 + slot as f64 * 0.5;
            (x - x.floor()) - 0.5
        });
        orthogonalize(&mut v, &components);
        if v.norm() == 0.0 {
            v = DVector::from_element(dim, 1.0);
            orthogonalize(&mut v, &components);
        }
        v /= v.norm();

        let mut lambda = 0.0f64;
        for _ in 0..POWER_ITER_MAX {
            let mut w = cov_apply(&v);
            orthogonalize(&mut w, &components);
            let norm = w.norm();
            if norm == 0.0 {
                lambda = 0.0;
                break;
            }
            let next = w / norm;
            let next_lambda = norm;
            let done = (next_lambda - lambda).abs() <= POWER_ITER_TOL * next_lambda.max(1.0);
            v = next;
            lambda = next_lambda;
            if done {
                break;
            }
        }
        if lambda == 0.0 {
            v = orthonormal_complement(dim, &components);
        }
        *eigenvalue = lambda;
        components.push(v);
    }

    let second = components.pop().unwrap();
    let first = components.pop().unwrap();
    (
        [
            first.iter().copied().collect(),
            second.iter().copied().collect(),
        ],
        eigenvalues,
    )
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for b in basis {
        let proj = v.dot(b);
        *v -= b * proj;
    }
}

/// Deterministic unit vector orthogonal to `basis`: Gram-Schmidt over the
/// standard basis, first success wins.
fn orthonormal_complement(dim: usize, basis: &[DVector<f64>]) -> DVector<f64> {
    for axis in 0..dim {
        let mut v = DVector::<f64>::zeros(dim);
        v[axis] = 1.0;
        orthogonalize(&mut v, basis);
        let norm = v.norm();
        if norm > 1e-9 {
            return v / norm;
        }
    }
    DVector::from_element(dim, 0.0)
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Writes `id,x,y,cluster` rows sorted by id. Re-exporting identical inputs
/// produces a byte-identical file.
pub fn export_scatter(
    proj: &Projection2D,
    clustering: &Clustering,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("id,x,y,cluster\n");
    for (id, &(x, y)) in &proj.points {
        let cluster = clustering
            .cluster_of(id)
            .ok_or_else(|| Error::MissingAssignment(id.clone()))?;
        out.push_str(&format!("{},{x},{y},{cluster}\n", csv_field(id)));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Metric;
    use crate::vectorstore::{Space, VectorRecord, VectorSet};
    use approx::assert_relative_eq;

    fn set_from(pairs: &[(&str, &[f64])]) -> VectorSet {
        let dim = pairs[0].1.len();
        let records = pairs
            .iter()
            .map(|(id, v)| VectorRecord {
                id: id.to_string(),
                vec: v.to_vec(),
            })
            .collect();
        VectorSet::new(Space::Embedding, "test", 0, dim, records).unwrap()
    }

    #[test]
    fn collinear_data_is_rank_one() {
        let set = set_from(&[
            ("a", &[3.0, 4.0]),
            ("b", &[-3.0, -4.0]),
            ("c", &[6.0, 8.0]),
            ("d", &[1.5, 2.0]),
        ]);
        let proj = pca_fit(&set).unwrap();
        assert_relative_eq!(proj.explained_variance_ratio[0], 1.0, epsilon = 1e-9);
        assert!(proj.explained_variance_ratio[1].abs() < 1e-9);
    }

    #[test]
    fn axis_aligned_three_points() {
        let set = set_from(&[
            ("a", &[1.0, 0.0, 0.0]),
            ("b", &[-1.0, 0.0, 0.0]),
            ("c", &[0.0, 0.0, 0.0]),
        ]);
        let proj = pca_fit(&set).unwrap();
        assert_relative_eq!(proj.components[0][0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(proj.components[0][1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(proj.components[0][2], 0.0, epsilon = 1e-12);
        let xs: Vec<f64> = ["a", "b", "c"].iter().map(|id| proj.points[*id].0).collect();
        assert_relative_eq!(xs[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(xs[1], -1.0, epsilon = 1e-12);
        assert_relative_eq!(xs[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(proj.explained_variance_ratio[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn two_d_projection_preserves_distances() {
        let set = set_from(&[
            ("a", &[0.7, -1.2]),
            ("b", &[3.3, 0.4]),
            ("c", &[-2.0, 2.5]),
            ("d", &[1.1, 1.9]),
        ]);
        let proj = pca_fit(&set).unwrap();
        let ids = ["a", "b", "c", "d"];
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let ri = set.get(ids[i]).unwrap();
                let rj = set.get(ids[j]).unwrap();
                let orig = ((ri.vec[0] - rj.vec[0]).powi(2) + (ri.vec[1] - rj.vec[1]).powi(2)).sqrt();
                let (xi, yi) = proj.points[ids[i]];
                let (xj, yj) = proj.points[ids[j]];
                let projected = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                assert_relative_eq!(orig, projected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn components_are_orthonormal() {
        let set = set_from(&[
            ("a", &[1.0, 2.0, 0.5, -1.0]),
            ("b", &[0.0, 1.0, 2.0, 0.3]),
            ("c", &[2.0, -1.0, 1.0, 0.8]),
            ("d", &[1.5, 0.5, -0.5, 2.0]),
            ("e", &[-1.0, 1.5, 0.2, 0.1]),
        ]);
        let proj = pca_fit(&set).unwrap();
        let c0 = &proj.components[0];
        let c1 = &proj.components[1];
        assert_relative_eq!(dot(c0, c0), 1.0, epsilon = 1e-9);
        assert_relative_eq!(dot(c1, c1), 1.0, epsilon = 1e-9);
        assert!(dot(c0, c1).abs() < 1e-9);
        assert!(proj.explained_variance_ratio[0] >= proj.explained_variance_ratio[1]);
        assert!(
            proj.explained_variance_ratio[0] + proj.explained_variance_ratio[1] <= 1.0 + 1e-9
        );
    }

    #[test]
    fn x_variance_dominates_y_variance() {
        let set = set_from(&[
            ("a", &[10.0, 0.1, 0.2]),
            ("b", &[-9.0, 0.3, -0.1]),
            ("c", &[4.0, -0.2, 0.4]),
            ("d", &[-3.0, 0.0, -0.3]),
        ]);
        let proj = pca_fit(&set).unwrap();
        let var = |sel: fn(&(f64, f64)) -> f64| {
            let vals: Vec<f64> = proj.points.values().map(sel).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        };
        assert!(var(|p| p.0) >= var(|p| p.1));
    }

    #[test]
    fn power_iteration_agrees_with_dense_path() {
        let data: Vec<(String, Vec<f64>)> = (0..12)
            .map(|i| {
                let t = i as f64;
                (
                    format!("p{i:02}"),
                    vec![t * 2.0, (t * 0.7).sin() * 3.0, t * -0.5, (t * 1.3).cos()],
                )
            })
            .collect();
        let records: Vec<VectorRecord> = data
            .iter()
            .map(|(id, v)| VectorRecord {
                id: id.clone(),
                vec: v.clone(),
            })
            .collect();
        let set = VectorSet::new(Space::Embedding, "t", 0, 4, records).unwrap();
        let centered: Vec<Vec<f64>> = {
            let mut mean = vec![0.0; 4];
            for (_, v) in &data {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x;
                }
            }
            for m in mean.iter_mut() {
                *m /= data.len() as f64;
            }
            data.iter()
                .map(|(_, v)| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
                .collect()
        };
        let (dense_comps, dense_vals) = top2_dense(&centered, 4, data.len());
        let (power_comps, power_vals) = top2_power_iteration(&centered, 4, data.len());
        let _ = pca_fit(&set).unwrap();
        for i in 0..2 {
            assert_relative_eq!(dense_vals[i], power_vals[i], max_relative = 1e-6);
            // components match up to sign
            let alignment = dot(&dense_comps[i], &power_comps[i]).abs();
            assert_relative_eq!(alignment, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn too_few_points_rejected() {
        let set = set_from(&[("a", &[1.0, 2.0]), ("b", &[2.0, 1.0])]);
        assert!(matches!(
            pca_fit(&set).unwrap_err(),
            Error::TooFewPoints { got: 2, need: 3 }
        ));
    }

    #[test]
    fn scatter_export_is_deterministic_and_sorted() {
        let set = set_from(&[
            ("b", &[1.0, 0.0]),
            ("a", &[0.0, 1.0]),
            ("c", &[1.0, 1.0]),
        ]);
        let proj = pca_fit(&set).unwrap();
        let clustering = Clustering {
            k: 2,
            metric: Metric::Euclidean,
            seed: 0,
            iterations: 0,
            wcss: 0.0,
            centroids: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            assignments: [("a", 0), ("b", 0), ("c", 1)]
                .into_iter()
                .map(|(id, c)| (id.to_string(), c))
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("s1.csv");
        let p2 = dir.path().join("s2.csv");
        export_scatter(&proj, &clustering, &p1).unwrap();
        export_scatter(&proj, &clustering, &p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        let text = String::from_utf8(b1).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "id,x,y,cluster");
        assert!(lines[1].starts_with("a,"));
        assert!(lines[2].starts_with("b,"));
        assert!(lines[3].starts_with("c,"));
    }

    #[test]
    fn scatter_export_missing_assignment() {
        let set = set_from(&[("a", &[0.0, 1.0]), ("b", &[1.0, 0.0]), ("c", &[1.0, 1.0])]);
        let proj = pca_fit(&set).unwrap();
        let clustering = Clustering {
            k: 1,
            metric: Metric::Euclidean,
            seed: 0,
            iterations: 0,
            wcss: 0.0,
            centroids: vec![vec![0.5, 0.5]],
            assignments: [("a".to_string(), 0)].into_iter().collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let err = export_scatter(&proj, &clustering, dir.path().join("x.csv")).unwrap_err();
        assert!(matches!(err, Error::MissingAssignment(_)));
    }
}
