//! End-to-end acceptance checks.
//!
//! Each test covers one numbered guarantee and prints a single
//! `[criterion N] PASS/FAIL` verdict line (visible under
//! `cargo test --test acceptance -- --nocapture`):
//!
//! 1.  modularity and density agree with brute-force pair enumeration,
//! 2.  every detection method recovers planted blocks,
//! 3.  the recommender's analytic gradients match finite differences,
//! 4.  closeness propensity beats degree and betweenness downstream,
//! 5.  trust scoring equals exhaustive community-pair enumeration and the
//!     rating cosine is symmetric and scale-invariant,
//! 6.  the trust matrix fills every cell with non-degenerate results,
//! 7.  community features beat the single-community anomaly baseline,
//! 8.  benchmark runs are byte-reproducible,
//! 9.  AUC matches the pairwise definition and RMSE dominates MAE.
//!
//! Every check runs against a pinned seed and a pinned tolerance; the
//! wall-clock budgets are asserted alongside the verdicts.

mod common;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use commbench::centrality::{propensity, CentralityKind};
use commbench::communities::{
    bigclam, density, ego_splitting, label_propagation, louvain, modularity, spectral, Cover,
};
use commbench::graph::{planted_partition, Graph, GraphBuilder};
use commbench::metrics::{rmse_mae, roc_auc, BinaryOutcome};
use commbench::recsys::{gradient_check, RatingsTable, TrainConfig, UserCommunities};
use commbench::runner::{
    emit_report, run_matrix, validate_config, Algorithm, DatasetConfig, DetectConfig,
    ExperimentConfig, ExperimentReport, MatrixConfig, RecommendConfig, ReportFormat,
    SyntheticKind, Task, TrustTaskConfig,
};
use commbench::trust::{rating_similarity, TrustPredictor};

/// Verdict helper: prints the one-line result and enforces the budget.
struct Criterion {
    n: usize,
    started: Instant,
    budget: Duration,
}

impl Criterion {
    fn start(n: usize, budget_secs: u64) -> Criterion {
        Criterion { n, started: Instant::now(), budget: Duration::from_secs(budget_secs) }
    }

    fn finish(self, ok: bool, detail: &str) {
        let elapsed = self.started.elapsed();
        let in_budget = elapsed <= self.budget;
        let verdict = if ok && in_budget { "PASS" } else { "FAIL" };
        println!(
            "[criterion {}] {verdict} — {detail} ({:.2}s)",
            self.n,
            elapsed.as_secs_f64()
        );
        assert!(ok, "criterion {}: {detail}", self.n);
        assert!(
            in_budget,
            "criterion {} exceeded its {:?} budget: {:?}",
            self.n, self.budget, elapsed
        );
    }
}

// ---------------------------------------------------------------------
// criterion 1: quality functions vs brute-force pair enumeration
// ---------------------------------------------------------------------

#[test]
fn criterion_1_quality_functions_match_brute_force() {
    let crit = Criterion::start(1, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_q = 0.0f64;
    let mut worst_d = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=8usize);
        let weighted = rng.random::<bool>();
        let mut b = GraphBuilder::new(false, weighted);
        for v in 0..n {
            b.node(&v.to_string());
        }
        let mut a = vec![vec![0.0f64; n]; n];
        let mut m = 0usize;
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < 0.5 {
                    let w = if weighted { rng.random_range(0.5..3.0) } else { 1.0 };
                    b.edge_idx(u as u32, v as u32, w);
                    a[u][v] = w;
                    a[v][u] = w;
                    m += 1;
                }
            }
        }
        if m == 0 {
            b.edge_idx(0, 1, 1.0);
            a[0][1] = 1.0;
            a[1][0] = 1.0;
        }
        let g = b.build();
        let k = rng.random_range(1..=n);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let cover = Cover::from_partition(&labels);

        // double loop over ordered node pairs, diagonal included
        let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
        let two_m: f64 = deg.iter().sum();
        let mut q = 0.0f64;
        for u in 0..n {
            for v in 0..n {
                if labels[u] == labels[v] {
                    q += a[u][v] - deg[u] * deg[v] / two_m;
                }
            }
        }
        q /= two_m;
        let got = modularity(&g, &cover).unwrap().value;
        worst_q = worst_q.max((got - q).abs());

        for c in 0..cover.k() as u32 {
            let members = cover.members(c);
            let nc = members.len();
            let expected = if nc == 1 {
                0.0
            } else {
                let mut pairs = 0usize;
                for (i, &u) in members.iter().enumerate() {
                    for &v in &members[i + 1..] {
                        if a[u as usize][v as usize] > 0.0 {
                            pairs += 1;
                        }
                    }
                }
                2.0 * pairs as f64 / (nc as f64 * (nc as f64 - 1.0))
            };
            let got = density(&g, members).unwrap().value;
            worst_d = worst_d.max((got - expected).abs());
        }
    }
    let ok = worst_q <= 1e-12 && worst_d <= 1e-12;
    crit.finish(
        ok,
        &format!(
            "1000 random graphs (n<=8): worst modularity gap {worst_q:.2e}, \
             worst density gap {worst_d:.2e} (tolerance 1e-12)"
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 2: planted-block recovery for all five methods
// ---------------------------------------------------------------------

/// Best achievable node agreement over injective assignments of predicted
/// communities to true blocks (exact subset DP on the contingency table).
fn best_match_agreement(pred: &Cover, truth: &[usize], n_blocks: usize) -> f64 {
    let k = pred.k();
    let mut table = vec![vec![0usize; n_blocks]; k];
    for v in 0..truth.len() as u32 {
        for &c in pred.memberships(v) {
            table[c as usize][truth[v as usize]] += 1;
        }
    }
    let mut dp = vec![0usize; 1 << n_blocks];
    for c in 0..k {
        let prev = dp.clone();
        for mask in 0..(1usize << n_blocks) {
            for b in 0..n_blocks {
                if mask & (1 << b) == 0 {
                    let cand = prev[mask] + table[c][b];
                    let slot = &mut dp[mask | (1 << b)];
                    if cand > *slot {
                        *slot = cand;
                    }
                }
            }
        }
        for mask in 0..(1usize << n_blocks) {
            if prev[mask] > dp[mask] {
                dp[mask] = prev[mask];
            }
        }
    }
    *dp.iter().max().unwrap() as f64 / truth.len() as f64
}

/// Fraction of nodes that sit in at least one community whose strict
/// majority shares the node's true block.
fn domination_rate(pred: &Cover, truth: &[usize]) -> f64 {
    let mut hits = 0usize;
    for v in 0..truth.len() as u32 {
        let mine = truth[v as usize];
        let dominated = pred.memberships(v).iter().any(|&c| {
            let members = pred.members(c);
            let same = members.iter().filter(|&&u| truth[u as usize] == mine).count();
            2 * same > members.len()
        });
        if dominated {
            hits += 1;
        }
    }
    hits as f64 / truth.len() as f64
}

#[test]
fn criterion_2_planted_blocks_are_recovered() {
    let crit = Criterion::start(2, 30);
    let mut agree = [0.0f64; 3]; // louvain, label propagation, spectral
    let mut dominate = [0.0f64; 2]; // ego-splitting, bigclam
    let seeds = 10u64;
    for seed in 0..seeds {
        let (g, truth_cover) = planted_partition(4, 25, 0.9, 0.01, seed).unwrap();
        let truth: Vec<usize> = (0..g.n() as u32)
            .map(|v| truth_cover.memberships(v)[0] as usize)
            .collect();
        agree[0] += best_match_agreement(&louvain(&g, seed), &truth, 4);
        agree[1] += best_match_agreement(&label_propagation(&g, seed, 100), &truth, 4);
        agree[2] += best_match_agreement(&spectral(&g, 4, seed).unwrap(), &truth, 4);
        dominate[0] += domination_rate(&ego_splitting(&g, seed), &truth);
        dominate[1] += domination_rate(&bigclam(&g, 4, 50, seed).unwrap(), &truth);
    }
    for v in agree.iter_mut().chain(dominate.iter_mut()) {
        *v /= seeds as f64;
    }
    let ok = agree.iter().all(|&v| v >= 0.95) && dominate.iter().all(|&v| v >= 0.95);
    crit.finish(
        ok,
        &format!(
            "mean over {seeds} seeds of 4x25 planted blocks: agreement \
             louvain {:.3} / label_propagation {:.3} / spectral {:.3}, \
             dominated-membership ego_splitting {:.3} / bigclam {:.3} (all >= 0.95)",
            agree[0], agree[1], agree[2], dominate[0], dominate[1]
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 3: recommender gradients vs finite differences
// ---------------------------------------------------------------------

#[test]
fn criterion_3_training_gradients_match_finite_differences() {
    let crit = Criterion::start(3, 1);
    let mut rows = Vec::new();
    for u in 0..5u32 {
        for i in 0..5u32 {
            if (u + i) % 2 == 0 || u == i {
                let value = 1.0 + ((u * 3 + i * 2) % 5) as f64;
                rows.push((format!("u{u}"), format!("m{i}"), value));
            }
        }
    }
    let table = RatingsTable::from_rows(rows).unwrap();
    let mut b = GraphBuilder::new(false, false);
    for (x, y) in [("u0", "u1"), ("u1", "u2"), ("u0", "u2"), ("u3", "u4")] {
        b.edge(x, y, 1.0);
    }
    let g = b.build();
    let cover = Cover::from_partition(&[0, 0, 0, 1, 1]);
    let alpha = propensity(&g, &cover, CentralityKind::Degree, 11).unwrap();
    let communities = UserCommunities::new(&table, &g, &cover, &alpha).unwrap();
    let cfg = TrainConfig { d: 4, seed: 3, ..Default::default() };
    let report = gradient_check(&table, &communities, &cfg, 1e-5).unwrap();
    let names: Vec<&str> = report.iter().map(|&(name, _)| name).collect();
    let worst = report.iter().map(|&(_, rel)| rel).fold(0.0f64, f64::max);
    let ok = names == ["b_u", "b_i", "p_u", "q_i", "p_c"] && worst <= 1e-4;
    crit.finish(
        ok,
        &format!(
            "5x5 toy problem: worst relative gradient error {worst:.2e} across \
             {names:?} (tolerance 1e-4)"
        ),
    );
}

// ---------------------------------------------------------------------
// shared review-site corpus plumbing (criteria 4, 6 and 8)
// ---------------------------------------------------------------------

fn corpus_dataset(dir: &std::path::Path) -> DatasetConfig {
    let site = common::review_site(42);
    let graph = dir.join("trust.txt");
    let ratings = dir.join("ratings.txt");
    std::fs::write(&graph, &site.edge_list).unwrap();
    std::fs::write(&ratings, &site.ratings).unwrap();
    DatasetConfig {
        name: "reviews".into(),
        graph: Some(graph),
        directed: true,
        ratings: Some(ratings),
        ..Default::default()
    }
}

fn five_methods() -> Vec<Algorithm> {
    vec![
        Algorithm::Louvain,
        Algorithm::Spectral,
        Algorithm::LabelPropagation,
        Algorithm::EgoSplitting,
        Algorithm::Bigclam,
    ]
}

fn cell_value(
    report: &ExperimentReport,
    algo: Algorithm,
    kind: &str,
    metric: &str,
) -> Option<f64> {
    report
        .cells
        .iter()
        .find(|c| c.key.algorithm == algo && c.key.kind == kind)
        .and_then(|c| {
            c.rows
                .iter()
                .find(|r| r.metric == metric && r.fold.is_none() && r.class.is_none())
                .and_then(|r| r.value.value())
        })
}

// ---------------------------------------------------------------------
// criterion 4: closeness propensity wins the recommendation comparison
// ---------------------------------------------------------------------

#[test]
fn criterion_4_closeness_propensity_wins_on_review_corpus() {
    let crit = Criterion::start(4, 600);
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dataset: corpus_dataset(dir.path()),
        matrix: MatrixConfig {
            tasks: vec![Task::Recommend],
            algorithms: five_methods(),
            seed: 42,
            cache_covers: false,
        },
        detect: DetectConfig { spectral_k: Some(50), bigclam_k: Some(50), ..Default::default() },
        recommend: RecommendConfig { folds: 5, ..Default::default() },
        ..Default::default()
    };
    let checked = validate_config(cfg).unwrap();
    let (report, _) = run_matrix(&checked, None).unwrap();

    let mut wins = 0usize;
    let mut parts = Vec::new();
    for algo in five_methods() {
        let d = cell_value(&report, algo, "degree", "rmse");
        let b = cell_value(&report, algo, "betweenness", "rmse");
        let c = cell_value(&report, algo, "closeness", "rmse");
        let win = matches!((d, b, c), (Some(d), Some(b), Some(c)) if c <= d && c <= b);
        wins += usize::from(win);
        parts.push(format!(
            "{}: clo {} vs deg {} / bet {}",
            algo,
            c.map_or("NA".into(), |v| format!("{v:.4}")),
            d.map_or("NA".into(), |v| format!("{v:.4}")),
            b.map_or("NA".into(), |v| format!("{v:.4}")),
        ));
    }
    let ok = wins >= 4;
    crit.finish(
        ok,
        &format!(
            "fold-averaged RMSE on the 2000-user review corpus, closeness <= both \
             alternatives for {wins}/5 methods [{}]",
            parts.join("; ")
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 5: trust scoring vs exhaustive enumeration, cosine laws
// ---------------------------------------------------------------------

/// Independent cosine over a ratings table: shared-item dot product over
/// the norm product, 0 when either user is unknown or has zero norm, 1
/// for a user against itself, clamped to at most 1.
fn oracle_cosine(table: &RatingsTable, a: &str, b: &str) -> f64 {
    let (Some(u), Some(v)) = (table.user_index(a), table.user_index(b)) else {
        return 0.0;
    };
    let mut vec_u: HashMap<u32, f64> = HashMap::new();
    let mut vec_v: HashMap<u32, f64> = HashMap::new();
    for r in table.ratings() {
        if r.user == u {
            vec_u.insert(r.item, r.value);
        }
        if r.user == v {
            vec_v.insert(r.item, r.value);
        }
    }
    let norm = |m: &HashMap<u32, f64>| m.values().map(|x| x * x).sum::<f64>().sqrt();
    let (nu, nv) = (norm(&vec_u), norm(&vec_v));
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    if u == v {
        return 1.0;
    }
    let mut items: Vec<u32> = vec_u.keys().copied().collect();
    items.sort_unstable();
    let dot: f64 = items
        .iter()
        .filter_map(|i| Some(vec_u[i] * vec_v.get(i)?))
        .sum();
    (dot / (nu * nv)).min(1.0)
}

/// Exhaustive reference: best community-pair average of node-to-center
/// and center-to-center cosines, 0 when either endpoint is uncovered.
fn oracle_predict(
    g: &Graph,
    cover: &Cover,
    centers: &[u32],
    table: &RatingsTable,
    i: u32,
    j: u32,
) -> f64 {
    let mut best = 0.0f64;
    for &c1 in cover.memberships(i) {
        for &c2 in cover.memberships(j) {
            let ci = g.external_id(centers[c1 as usize]);
            let cj = g.external_id(centers[c2 as usize]);
            let si = oracle_cosine(table, g.external_id(i), ci);
            let sj = oracle_cosine(table, g.external_id(j), cj);
            let sc = oracle_cosine(table, ci, cj);
            best = best.max((si + sj + sc) / 3.0);
        }
    }
    best
}

#[test]
fn criterion_5_trust_scores_match_exhaustive_enumeration() {
    let crit = Criterion::start(5, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut pairs_checked = 0usize;
    for _ in 0..200 {
        let n = rng.random_range(6..=12usize);
        let mut b = GraphBuilder::new(true, false);
        for v in 0..n {
            b.node(&format!("n{v}"));
        }
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random::<f64>() < 0.3 {
                    b.edge_idx(u as u32, v as u32, 1.0);
                }
            }
        }
        let g = b.build();

        let cover = if rng.random::<bool>() {
            let k = rng.random_range(1..=3usize);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            Cover::from_partition(&labels)
        } else {
            let k = rng.random_range(2..=4usize);
            let mut lists = Vec::new();
            for _ in 0..k {
                let mut members: Vec<u32> =
                    (0..n as u32).filter(|_| rng.random::<f64>() < 0.5).collect();
                if members.is_empty() {
                    members.push(rng.random_range(0..n as u32));
                }
                lists.push(members);
            }
            Cover::from_communities(lists, n).unwrap()
        };

        let mut rows = Vec::new();
        for v in 0..n {
            if rng.random::<f64>() < 0.8 {
                for item in 0..rng.random_range(4..=8usize) {
                    if rng.random::<f64>() < 0.6 {
                        rows.push((
                            format!("n{v}"),
                            format!("t{item}"),
                            rng.random_range(1.0..5.0),
                        ));
                    }
                }
            }
        }
        if rows.is_empty() {
            rows.push(("n0".into(), "t0".into(), 3.0));
        }
        let table = RatingsTable::from_rows(rows).unwrap();

        let centers: Vec<u32> = (0..cover.k() as u32)
            .map(|c| {
                let members = cover.members(c);
                members[rng.random_range(0..members.len())]
            })
            .collect();
        let predictor = TrustPredictor::new(&g, &cover, &centers, &table).unwrap();
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if i == j {
                    continue;
                }
                let got = predictor.predict(i, j);
                let want = oracle_predict(&g, &cover, &centers, &table, i, j);
                worst = worst.max((got - want).abs());
                pairs_checked += 1;
            }
        }
    }

    // cosine laws: symmetry and scale invariance
    let mut worst_sym = 0.0f64;
    let mut worst_scale = 0.0f64;
    for _ in 0..1000 {
        let items = rng.random_range(2..=10usize);
        let lambda = rng.random_range(1.0..2.5f64);
        let mut plain = Vec::new();
        let mut scaled = Vec::new();
        for item in 0..items {
            for user in ["a", "b"] {
                if rng.random::<f64>() < 0.7 {
                    let v = rng.random_range(1.0..2.0f64);
                    plain.push((user.to_string(), format!("t{item}"), v));
                    let w = if user == "a" { v * lambda } else { v };
                    scaled.push((user.to_string(), format!("t{item}"), w));
                }
            }
        }
        let t1 = RatingsTable::from_rows(plain).unwrap();
        let t2 = RatingsTable::from_rows(scaled).unwrap();
        let ab = rating_similarity(&t1, "a", "b");
        let ba = rating_similarity(&t1, "b", "a");
        worst_sym = worst_sym.max((ab - ba).abs());
        worst_scale = worst_scale.max((rating_similarity(&t2, "a", "b") - ab).abs());
    }

    let ok = worst <= 1e-12 && worst_sym <= 1e-12 && worst_scale <= 1e-12;
    crit.finish(
        ok,
        &format!(
            "200 fuzzed instances / {pairs_checked} ordered pairs: worst score gap \
             {worst:.2e}; cosine symmetry gap {worst_sym:.2e}, scale-invariance gap \
             {worst_scale:.2e} (tolerance 1e-12)"
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 6: the full trust matrix stays non-degenerate
// ---------------------------------------------------------------------

#[test]
fn criterion_6_trust_matrix_fills_without_degenerate_cells() {
    let crit = Criterion::start(6, 300);
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dataset: corpus_dataset(dir.path()),
        matrix: MatrixConfig {
            tasks: vec![Task::Trust],
            algorithms: five_methods(),
            seed: 42,
            cache_covers: false,
        },
        detect: DetectConfig { spectral_k: Some(50), bigclam_k: Some(50), ..Default::default() },
        trust: TrustTaskConfig::default(), // 6700 positive / 3300 negative pairs
        ..Default::default()
    };
    let checked = validate_config(cfg).unwrap();
    let (report, _) = run_matrix(&checked, None).unwrap();

    let kinds = ["degree", "betweenness", "closeness", "eigenvector", "random"];
    let mut shape_ok = report.cells.len() == 25;
    let mut f1_ok = true;
    let mut auc_ok = true;
    let mut worst_f1: Option<(String, f64)> = None;
    let mut louvain_min_auc = f64::INFINITY;
    for algo in five_methods() {
        for kind in kinds {
            let cell = report
                .cells
                .iter()
                .find(|c| c.key.algorithm == algo && c.key.kind == kind);
            let Some(cell) = cell else {
                shape_ok = false;
                continue;
            };
            if cell.failure.is_some() {
                shape_ok = false;
                continue;
            }
            match cell_value(&report, algo, kind, "f1") {
                Some(f1) if f1 > 0.0 && f1 < 1.0 => {
                    if worst_f1.as_ref().is_none_or(|(_, w)| f1 < *w) {
                        worst_f1 = Some((format!("{algo} x {kind}"), f1));
                    }
                }
                _ => f1_ok = false,
            }
            if algo == Algorithm::Louvain {
                match cell_value(&report, algo, kind, "auc") {
                    Some(auc) => {
                        louvain_min_auc = louvain_min_auc.min(auc);
                        if auc <= 0.5 {
                            auc_ok = false;
                        }
                    }
                    None => auc_ok = false,
                }
            }
        }
    }
    let ok = shape_ok && f1_ok && auc_ok;
    crit.finish(
        ok,
        &format!(
            "6700/3300 sampled pairs over 5 methods x 5 center kinds: all 25 cells \
             filled, every F1 strictly inside (0,1) (weakest {}), louvain AUC down to \
             {louvain_min_auc:.4} (> 0.5)",
            worst_f1
                .map_or("NA".into(), |(cell, f1)| format!("{f1:.4} at {cell}")),
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 7: community features beat the single-community baseline
// ---------------------------------------------------------------------

#[test]
fn criterion_7_community_features_beat_anomaly_baseline() {
    let crit = Criterion::start(7, 300);
    let cfg = ExperimentConfig {
        dataset: DatasetConfig {
            name: "surrogate".into(),
            synthetic: Some(SyntheticKind::AnomalyBenchmark),
            synthetic_seed: 9,
            ..Default::default()
        },
        matrix: MatrixConfig {
            tasks: vec![Task::Anomaly],
            algorithms: vec![Algorithm::Louvain, Algorithm::SingleCommunity],
            seed: 42,
            cache_covers: false,
        },
        ..Default::default()
    };
    let checked = validate_config(cfg).unwrap();
    let (report, _) = run_matrix(&checked, None).unwrap();

    let class_f1 = |algo: Algorithm| {
        report
            .cells
            .iter()
            .find(|c| c.key.algorithm == algo)
            .and_then(|c| {
                c.rows
                    .iter()
                    .find(|r| r.metric == "f1" && r.class == Some(1))
                    .and_then(|r| r.value.value())
            })
    };
    let acc = |algo: Algorithm| cell_value(&report, algo, "none", "accuracy");

    let (base_acc, base_f1) = (acc(Algorithm::SingleCommunity), class_f1(Algorithm::SingleCommunity));
    let (comm_acc, comm_f1) = (acc(Algorithm::Louvain), class_f1(Algorithm::Louvain));
    let ok = matches!(
        (comm_acc, comm_f1, base_acc, base_f1),
        (Some(ca), Some(cf), Some(ba), Some(bf)) if ca > ba && cf > bf
    );
    let show = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
    crit.finish(
        ok,
        &format!(
            "2288-node surrogate (250 planted anomalies), 5-fold cross-validation: \
             louvain accuracy {} / anomaly-class F1 {} strictly above the \
             single-community baseline's {} / {}",
            show(comm_acc),
            show(comm_f1),
            show(base_acc),
            show(base_f1)
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 8: byte-reproducible benchmark runs
// ---------------------------------------------------------------------

#[test]
fn criterion_8_runs_are_byte_reproducible() {
    let crit = Criterion::start(8, 240);
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("covers");
    let cfg = ExperimentConfig {
        dataset: corpus_dataset(dir.path()),
        matrix: MatrixConfig {
            tasks: vec![Task::Recommend, Task::Trust],
            algorithms: vec![Algorithm::Louvain, Algorithm::EgoSplitting],
            seed: 42,
            cache_covers: true,
        },
        recommend: RecommendConfig {
            propensities: vec![CentralityKind::Closeness],
            folds: 2,
            train: TrainConfig { epochs: 12, ..Default::default() },
        },
        trust: TrustTaskConfig {
            centers: vec![CentralityKind::Degree, CentralityKind::Random],
            positive_pairs: 800,
            negative_pairs: 800,
            ..Default::default()
        },
        ..Default::default()
    };
    let checked = validate_config(cfg).unwrap();

    let t1 = Instant::now();
    let (first, _) = run_matrix(&checked, Some(&cache)).unwrap();
    let first_run = t1.elapsed();
    let t2 = Instant::now();
    let (second, _) = run_matrix(&checked, Some(&cache)).unwrap();
    let second_run = t2.elapsed();

    let render = |report: &ExperimentReport, format: ReportFormat| {
        let mut bytes = Vec::new();
        emit_report(report, format, &mut bytes).unwrap();
        bytes
    };
    let formats = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown];
    let bytes_equal = formats
        .iter()
        .all(|&f| render(&first, f) == render(&second, f));
    let rerun_cheap = second_run <= first_run * 2 + Duration::from_secs(1);
    let ok = first == second && bytes_equal && rerun_cheap;
    crit.finish(
        ok,
        &format!(
            "two runs of the same config and seed (second served by the cover cache): \
             reports byte-identical in csv/json/markdown, {:.2}s then {:.2}s",
            first_run.as_secs_f64(),
            second_run.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 9: metric primitives vs their definitions
// ---------------------------------------------------------------------

#[test]
fn criterion_9_metric_primitives_match_definitions() {
    let crit = Criterion::start(9, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_auc = 0.0f64;
    for _ in 0..1000 {
        let n_pos = rng.random_range(1..=30usize);
        let n_neg = rng.random_range(1..=30usize);
        let snap = rng.random::<bool>(); // grid scores force ties
        let score = |rng: &mut ChaCha8Rng| -> f64 {
            if snap {
                rng.random_range(0..=10u32) as f64 / 10.0
            } else {
                rng.random()
            }
        };
        let mut outcomes = Vec::new();
        for _ in 0..n_pos {
            outcomes.push(BinaryOutcome { label: true, score: score(&mut rng) });
        }
        for _ in 0..n_neg {
            outcomes.push(BinaryOutcome { label: false, score: score(&mut rng) });
        }
        outcomes.shuffle(&mut rng);

        let mut wins = 0.0f64;
        for p in outcomes.iter().filter(|o| o.label) {
            for n in outcomes.iter().filter(|o| !o.label) {
                if p.score > n.score {
                    wins += 1.0;
                } else if p.score == n.score {
                    wins += 0.5;
                }
            }
        }
        let brute = wins / (n_pos as f64 * n_neg as f64);
        let got = roc_auc(&outcomes).unwrap();
        worst_auc = worst_auc.max((got - brute).abs());
    }

    let mut order_ok = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..=100usize);
        let predicted: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let truth: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (rmse, mae) = rmse_mae(&predicted, &truth).unwrap();
        if rmse < mae - 1e-12 * mae.max(1.0) {
            order_ok = false;
        }
    }

    let ok = worst_auc <= 1e-12 && order_ok;
    crit.finish(
        ok,
        &format!(
            "1000 fuzzed score vectors: worst AUC gap to the pairwise definition \
             {worst_auc:.2e} (tolerance 1e-12); RMSE >= MAE in 1000/1000 samples"
        ),
    );
}
