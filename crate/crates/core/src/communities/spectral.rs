//! Spectral clustering on the symmetric normalized Laplacian.
//!
//! Pipeline: embed nodes with the k smallest nontrivial eigenvectors of
//! `L = I - D^{-1/2} A D^{-1/2}` (orthogonalized subspace iteration with
//! Rayleigh-Ritz extraction, tolerance 1e-6), row-normalize the embedding,
//! then run seeded k-means with 10 restarts. The known trivial direction
//! `D^{1/2} 1` is deflated away whenever `k < n`; with `k = n` the full
//! spectrum is used since only n-1 nontrivial directions exist. Zero-degree
//! nodes take identity rows in `L`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::communities::Cover;
use crate::error::{Error, Result};
use crate::graph::Graph;

const EIG_TOL: f64 = 1e-6;
const MAX_POWER_ITERS: usize = 3000;
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 100;

/// Spectral community detection into (at most) `k` parts. Directed inputs
/// are symmetrized; weights enter the Laplacian. Errors when `k` is 0 or
/// exceeds the node count.
pub fn spectral(g: &Graph, k: usize, seed: u64) -> Result<Cover> {
    if k == 0 {
        return Err(Error::validation("spectral clustering needs k >= 1"));
    }
    if k > g.n() {
        return Err(Error::validation(format!(
            "k = {k} exceeds the node count {}",
            g.n()
        )));
    }
    let und = g.undirected();
    let n = und.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rows = embedding(&und, k, &mut rng);
    for row in rows.iter_mut() {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
    }
    let labels = kmeans(&rows, k, &mut rng);
    debug_assert_eq!(labels.len(), n);
    Ok(Cover::from_partition(&labels))
}

/// Eigen-embedding: returns n rows of k coordinates, the columns being the
/// k lowest nontrivial eigenvectors of the normalized Laplacian.
fn embedding(und: &Graph, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = und.n();
    let inv_sqrt_deg: Vec<f64> = (0..n as u32)
        .map(|v| {
            let d = und.weighted_degree(v);
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();

    // known eigenvector of eigenvalue 0: D^{1/2} 1, deflated when k < n
    let trivial: Option<Vec<f64>> = if k < n {
        let mut t: Vec<f64> = (0..n as u32)
            .map(|v| und.weighted_degree(v).sqrt())
            .collect();
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in t.iter_mut() {
                *x /= norm;
            }
            Some(t)
        } else {
            None
        }
    } else {
        None
    };

    // y = (I + N) x: power iteration on 2I - L keeps the smallest
    // eigenvalues of L dominant after deflation.
    let apply_m = |x: &[f64], out: &mut [f64]| {
        for v in 0..n {
            let mut acc = x[v];
            let sv = inv_sqrt_deg[v];
            if sv > 0.0 {
                for e in und.neighbors(v as u32) {
                    acc += e.weight * sv * inv_sqrt_deg[e.to as usize] * x[e.to as usize];
                }
            }
            out[v] = acc;
        }
    };
    let apply_l = |x: &[f64], out: &mut [f64]| {
        apply_m(x, out);
        for v in 0..n {
            out[v] = 2.0 * x[v] - out[v];
        }
    };

    let mut cols: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut cols, trivial.as_deref(), rng);

    let mut scratch = vec![0.0; n];
    for iter in 0..MAX_POWER_ITERS {
        for col in cols.iter_mut() {
            apply_m(col, &mut scratch);
            std::mem::swap(col, &mut scratch);
        }
        orthonormalize(&mut cols, trivial.as_deref(), rng);

        if iter % 10 == 9 || iter == MAX_POWER_ITERS - 1 {
            let lambdas = rayleigh_ritz(&mut cols, &apply_l);
            let mut worst = 0.0f64;
            for (j, col) in cols.iter().enumerate() {
                apply_l(col, &mut scratch);
                let resid: f64 = scratch
                    .iter()
                    .zip(col)
                    .map(|(lv, xv)| (lv - lambdas[j] * xv).powi(2))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(resid);
            }
            if worst <= EIG_TOL {
                break;
            }
        }
    }

    (0..n).map(|v| cols.iter().map(|c| c[v]).collect()).collect()
}

/// Modified Gram-Schmidt against an optional fixed vector and the earlier
/// columns. Columns that collapse numerically are re-randomized.
fn orthonormalize(cols: &mut [Vec<f64>], fixed: Option<&[f64]>, rng: &mut ChaCha8Rng) {
    let n = cols.first().map_or(0, Vec::len);
    for j in 0..cols.len() {
        for _attempt in 0..6 {
            if let Some(t) = fixed {
                let d = dot(&cols[j], t);
                for (x, tv) in cols[j].iter_mut().zip(t) {
                    *x -= d * tv;
                }
            }
            for i in 0..j {
                let d = dot(&cols[j], &cols[i]);
                let (head, tail) = cols.split_at_mut(j);
                for (x, ov) in tail[0].iter_mut().zip(&head[i]) {
                    *x -= d * ov;
                }
            }
            let norm = dot(&cols[j], &cols[j]).sqrt();
            if norm > 1e-12 {
                for x in cols[j].iter_mut() {
                    *x /= norm;
                }
                break;
            }
            cols[j] = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects L onto the current subspace, diagonalizes the small projection
/// with Jacobi rotations, rotates the columns to Ritz vectors (ascending
/// eigenvalue) and returns the Ritz values.
fn rayleigh_ritz(cols: &mut Vec<Vec<f64>>, apply_l: &dyn Fn(&[f64], &mut [f64])) -> Vec<f64> {
    let k = cols.len();
    let n = cols.first().map_or(0, Vec::len);
    let mut lx: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    for (j, col) in cols.iter().enumerate() {
        apply_l(col, &mut lx[j]);
    }
    let mut b = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = dot(&cols[i], &lx[j]);
            b[i][j] = v;
            b[j][i] = v;
        }
    }
    let (mut vals, vecs) = jacobi_eigen(&mut b);
    // rotate: new_j = sum_i vecs[i][j] * cols[i]
    let mut rotated: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    for j in 0..k {
        for i in 0..k {
            let c = vecs[i][j];
            if c != 0.0 {
                for v in 0..n {
                    rotated[j][v] += c * cols[i][v];
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b_| vals[a].partial_cmp(&vals[b_]).unwrap());
    *cols = idx.iter().map(|&i| std::mem::take(&mut rotated[i])).collect();
    vals = idx.iter().map(|&i| vals[i]).collect();
    vals
}

/// Cyclic Jacobi diagonalization of a small symmetric matrix. Returns
/// (eigenvalues, eigenvector columns), unsorted.
fn jacobi_eigen(a: &mut Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = a.len();
    let mut v = vec![vec![0.0; k]; k];
    for i in 0..k {
        v[i][i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..k {
            for q in (p + 1)..k {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..k {
                    let (aip, aiq) = (a[i][p], a[i][q]);
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..k {
                    let (api, aqi) = (a[p][i], a[q][i]);
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for i in 0..k {
                    let (vip, viq) = (v[i][p], v[i][q]);
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }
    ((0..k).map(|i| a[i][i]).collect(), v)
}

/// Seeded k-means with k-means++ initialization, Lloyd iterations and a
/// fixed number of restarts; returns per-point cluster labels of the best
/// (lowest inertia) run. Empty clusters are re-seeded at the point
/// farthest from its assigned center.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = points[0].len();
    let d2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };

    let mut best_labels: Vec<usize> = vec![0; n];
    let mut best_inertia = f64::INFINITY;

    for _restart in 0..KMEANS_RESTARTS {
        // k-means++ seeding
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        centers.push(points[rng.random_range(0..n)].clone());
        let mut mind2: Vec<f64> = points.iter().map(|p| d2(p, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = mind2.iter().sum();
            let next = if total > 0.0 {
                let mut r = rng.random::<f64>() * total;
                let mut chosen = n - 1;
                for (i, &w) in mind2.iter().enumerate() {
                    if r < w {
                        chosen = i;
                        break;
                    }
                    r -= w;
                }
                chosen
            } else {
                rng.random_range(0..n)
            };
            centers.push(points[next].clone());
            for (i, p) in points.iter().enumerate() {
                let d = d2(p, centers.last().unwrap());
                if d < mind2[i] {
                    mind2[i] = d;
                }
            }
        }

        let mut labels = vec![0usize; n];
        for _it in 0..KMEANS_MAX_ITERS {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let mut best_c = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = d2(p, center);
                    if d < best_d {
                        best_d = d;
                        best_c = c;
                    }
                }
                if labels[i] != best_c {
                    labels[i] = best_c;
                    changed = true;
                }
            }
            // recompute centers; re-seed any empty cluster at the point
            // farthest from its current center
            let mut counts = vec![0usize; k];
            let mut sums = vec![vec![0.0; dim]; k];
            for (i, p) in points.iter().enumerate() {
                counts[labels[i]] += 1;
                for (s, x) in sums[labels[i]].iter_mut().zip(p) {
                    *s += x;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    for s in sums[c].iter_mut() {
                        *s /= counts[c] as f64;
                    }
                    centers[c] = std::mem::take(&mut sums[c]);
                } else {
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            d2(&points[a], &centers[labels[a]])
                                .partial_cmp(&d2(&points[b], &centers[labels[b]]))
                                .unwrap()
                        })
                        .unwrap_or(0);
                    centers[c] = points[far].clone();
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let inertia: f64 = points
            .iter()
            .enumerate()
            .map(|(i, p)| d2(p, &centers[labels[i]]))
            .sum();
        if inertia < best_inertia {
            best_inertia = inertia;
            best_labels = labels;
        }
    }
    best_labels
}
