//! Overlapping community detection by nonnegative affiliation factorization
//! (the BIGCLAM model).
//!
//! Each node u carries a nonnegative affiliation row `F_u` of length k; an
//! edge (u,v) is observed with probability `1 - exp(-F_u . F_v)`. Fitting
//! maximises the affiliation log-likelihood
//!
//! ```text
//! l(F) = sum_{(u,v) in E} log(1 - exp(-F_u.F_v)) - sum_{(u,v) not in E} F_u.F_v
//! ```
//!
//! by row-wise projected gradient ascent with backtracking line search, so
//! the likelihood never decreases. Rows are initialised from neighborhoods
//! whose conductance is locally minimal (uniform-random columns fill in
//! when fewer than k such neighborhoods exist). After fitting, node u joins
//! community c iff `F_uc >= delta` with `delta = sqrt(-log(1 - 1/n))`; a
//! node left empty by the threshold falls back to its strongest column so
//! the cover spans every node.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::communities::Cover;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Guard for `log(1 - exp(-x))` and its gradient as x -> 0.
const X_FLOOR: f64 = 1e-8;
/// Affiliation values are capped to keep exponentials finite.
const F_CAP: f64 = 1e4;

/// Result of a BIGCLAM fit: the thresholded cover plus the raw affiliation
/// rows (kept for downstream weighting schemes) and the likelihood trace.
#[derive(Debug, Clone)]
pub struct BigclamFit {
    pub cover: Cover,
    /// n rows of k nonnegative affiliation strengths.
    pub affiliations: Vec<Vec<f64>>,
    /// Total log-likelihood after each sweep; non-decreasing.
    pub ll_trace: Vec<f64>,
}

/// Convenience wrapper returning only the cover.
pub fn bigclam(g: &Graph, k: usize, iters: usize, seed: u64) -> Result<Cover> {
    bigclam_fit(g, k, iters, seed).map(|fit| fit.cover)
}

/// Fits the affiliation model with `k` communities for at most `iters`
/// sweeps. Directed inputs are symmetrized and weights are ignored (the
/// model is over edge presence). Deterministic for fixed inputs.
pub fn bigclam_fit(g: &Graph, k: usize, iters: usize, seed: u64) -> Result<BigclamFit> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::validation(format!(
            "bigclam needs 1 <= k <= n, got k={k} with n={n}"
        )));
    }
    let und = g.undirected();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if n == 1 {
        return Ok(BigclamFit {
            cover: Cover::single_community(1),
            affiliations: vec![vec![0.0; k]],
            ll_trace: vec![0.0],
        });
    }

    let mut f = init_affiliations(&und, k, &mut rng);
    let mut ll_trace = Vec::with_capacity(iters);
    let mut order: Vec<usize> = (0..n).collect();

    let mut prev_ll = f64::NEG_INFINITY;
    let mut stalled = 0;
    for _sweep in 0..iters {
        let mut s_sum = column_sums(&f, k);
        order.shuffle(&mut rng);
        let mut max_change = 0.0f64;
        for &u in &order {
            max_change = max_change.max(update_row(&und, &mut f, u, k, &mut s_sum));
        }
        let ll = total_likelihood(&und, &f);
        ll_trace.push(ll);
        if max_change < 1e-8 {
            break;
        }
        if ll - prev_ll < 1e-6 * (1.0 + ll.abs()) {
            stalled += 1;
            if stalled >= 2 {
                break;
            }
        } else {
            stalled = 0;
        }
        prev_ll = ll;
    }
    if ll_trace.is_empty() {
        ll_trace.push(total_likelihood(&und, &f));
    }

    let cover = threshold_cover(&f, n, k);
    Ok(BigclamFit { cover, affiliations: f, ll_trace })
}

/// Seeds affiliation rows from closed neighborhoods whose conductance is
/// locally minimal (no neighbor has a strictly smaller one), skipping
/// neighborhoods already covered by an earlier seed; leftover communities
/// are filled with uniform-random columns.
fn init_affiliations(und: &Graph, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = und.n();
    let mut f = vec![vec![0.0f64; k]; n];
    let two_m = 2.0 * und.m() as f64;

    let mut filled = 0;
    if two_m > 0.0 {
        let phi: Vec<f64> = (0..n as u32).map(|v| neighborhood_conductance(und, v, two_m)).collect();
        let mut candidates: Vec<u32> = (0..n as u32)
            .filter(|&v| {
                und.degree(v) > 0
                    && und.neighbors(v).iter().all(|e| phi[v as usize] <= phi[e.to as usize])
            })
            .collect();
        candidates.sort_by(|&a, &b| {
            phi[a as usize]
                .partial_cmp(&phi[b as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut covered = vec![false; n];
        for &u in &candidates {
            if filled == k {
                break;
            }
            if covered[u as usize] {
                continue;
            }
            f[u as usize][filled] = 1.0;
            covered[u as usize] = true;
            for e in und.neighbors(u) {
                f[e.to as usize][filled] = 1.0;
                covered[e.to as usize] = true;
            }
            filled += 1;
        }
    }
    for c in filled..k {
        for row in f.iter_mut() {
            row[c] = rng.random::<f64>();
        }
    }
    f
}

/// Conductance of the closed neighborhood of `v`: cut over the smaller
/// volume side. Cut-free sets score 0; empty-volume sets are worst.
fn neighborhood_conductance(und: &Graph, v: u32, two_m: f64) -> f64 {
    let mut set: Vec<u32> = und.neighbors(v).iter().map(|e| e.to).collect();
    set.push(v);
    set.sort_unstable();
    let inside = |x: u32| set.binary_search(&x).is_ok();
    let mut vol = 0.0f64;
    let mut within2 = 0.0f64; // internal edge endpoints, counts each edge twice
    for &u in &set {
        vol += und.degree(u) as f64;
        within2 += und.neighbors(u).iter().filter(|e| inside(e.to)).count() as f64;
    }
    let cut = vol - within2;
    if cut == 0.0 {
        return 0.0;
    }
    let denom = vol.min(two_m - vol);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        cut / denom
    }
}

fn column_sums(f: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut s = vec![0.0f64; k];
    for row in f {
        for (si, x) in s.iter_mut().zip(row) {
            *si += x;
        }
    }
    s
}

/// Row-local slice of the likelihood: edge terms incident to `u` plus the
/// non-edge inner products against `rest` (all rows but u and neighbors).
fn row_likelihood(f_u: &[f64], neigh_rows: &[&[f64]], rest: &[f64]) -> f64 {
    let mut l = 0.0;
    for row in neigh_rows {
        let x = dot(f_u, row).max(X_FLOOR);
        l += (-(-x).exp_m1()).ln();
    }
    l - dot(f_u, rest)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient-ascent step on row `u` with backtracking so the
/// total likelihood never decreases. Returns the largest absolute change.
fn update_row(und: &Graph, f: &mut [Vec<f64>], u: usize, k: usize, s_sum: &mut [f64]) -> f64 {
    let neigh: Vec<usize> = und.neighbors(u as u32).iter().map(|e| e.to as usize).collect();
    let f_u = f[u].clone();

    let mut n_sum = vec![0.0f64; k];
    for &v in &neigh {
        for (s, x) in n_sum.iter_mut().zip(&f[v]) {
            *s += x;
        }
    }
    // rows not adjacent to u and not u itself
    let rest: Vec<f64> = (0..k)
        .map(|c| (s_sum[c] - f_u[c] - n_sum[c]).max(0.0))
        .collect();

    let mut grad = vec![0.0f64; k];
    for &v in &neigh {
        let x = dot(&f_u, &f[v]).max(X_FLOOR);
        let coef = 1.0 / x.exp_m1();
        for (gi, fv) in grad.iter_mut().zip(&f[v]) {
            *gi += coef * fv;
        }
    }
    for c in 0..k {
        grad[c] -= rest[c];
    }

    let neigh_rows: Vec<&[f64]> = neigh.iter().map(|&v| f[v].as_slice()).collect();
    let l_old = row_likelihood(&f_u, &neigh_rows, &rest);

    let mut eta = 0.1;
    let mut accepted: Option<Vec<f64>> = None;
    for _ in 0..16 {
        let cand: Vec<f64> = f_u
            .iter()
            .zip(&grad)
            .map(|(x, g)| (x + eta * g).clamp(0.0, F_CAP))
            .collect();
        if row_likelihood(&cand, &neigh_rows, &rest) >= l_old {
            accepted = Some(cand);
            break;
        }
        eta *= 0.5;
    }

    let mut max_change = 0.0f64;
    if let Some(new_row) = accepted {
        for c in 0..k {
            let delta = new_row[c] - f_u[c];
            s_sum[c] += delta;
            max_change = max_change.max(delta.abs());
        }
        f[u] = new_row;
    }
    max_change
}

/// Full affiliation log-likelihood of the current rows.
fn total_likelihood(und: &Graph, f: &[Vec<f64>]) -> f64 {
    let k = f.first().map_or(0, Vec::len);
    let s = column_sums(f, k);
    let mut edge_ll = 0.0;
    let mut edge_dot = 0.0;
    for (u, v, _) in und.edges() {
        let x = dot(&f[u as usize], &f[v as usize]);
        edge_dot += x;
        edge_ll += (-(-x.max(X_FLOOR)).exp_m1()).ln();
    }
    let sq_rows: f64 = f.iter().map(|r| dot(r, r)).sum();
    let all_pairs = (dot(&s, &s) - sq_rows) / 2.0;
    edge_ll - (all_pairs - edge_dot)
}

/// Threshold memberships at `delta = sqrt(-log(1 - 1/n))`; empty nodes
/// fall back to their strongest affiliation column.
fn threshold_cover(f: &[Vec<f64>], n: usize, k: usize) -> Cover {
    let delta = (-(1.0 - 1.0 / n as f64).ln()).sqrt();
    let mut memberships: Vec<Vec<usize>> = Vec::with_capacity(n);
    for row in f {
        let mut cs: Vec<usize> = (0..k).filter(|&c| row[c] >= delta).collect();
        if cs.is_empty() {
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            cs.push(best);
        }
        memberships.push(cs);
    }
    Cover::from_memberships(memberships)
}
