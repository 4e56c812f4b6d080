//! Matrix execution: dataset loading, cover detection (with an optional
//! on-disk cache), and parallel evaluation of every (task × algorithm ×
//! kind) cell.
//!
//! Determinism: cells are laid out in configured order, each one draws its
//! sub-seed from the master seed and its own key string, shared inputs
//! (fold splits, sampled pairs) are computed once from named streams, and
//! the parallel map preserves ordering — so the report is a pure function
//! of (config, master seed) regardless of thread count or cache state.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::anomaly;
use crate::centrality::{self, derive_seed, CentralityKind};
use crate::communities::{self, auxiliary_communities, Cover};
use crate::error::{Error, Result};
use crate::graph::{self, Graph};
use crate::metrics::{mean_defined, MetricRow, MetricValue};
use crate::recsys::{self, RatingsTable, TrainConfig, UserCommunities};
use crate::runner::report::{CellKey, CellResult, CoverRecord, ExperimentReport, RunMeta};
use crate::runner::{
    stable_seed, Algorithm, CheckedConfig, DatasetConfig, DetectConfig, ExperimentConfig,
    SyntheticKind, Task,
};
use crate::trust::{self, TrustPair};

/// A loaded dataset: the graph plus whatever side data the tasks need.
#[derive(Debug)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub ratings: Option<RatingsTable>,
    /// Dense per-node class labels (graph index order). File labels are
    /// remapped to 0..k by sorted distinct value.
    pub labels: Option<Vec<usize>>,
}

/// Loads or generates the dataset a config describes. An explicit labels
/// file wins over generated labels.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    let (graph, mut labels) = match (cfg.synthetic, &cfg.graph) {
        (Some(kind), None) => match kind {
            SyntheticKind::AnomalyBenchmark => {
                let (g, labels) = anomaly::synthetic_benchmark(cfg.synthetic_seed);
                (g, Some(labels))
            }
            SyntheticKind::PlantedPartition => {
                let (g, _truth) = graph::planted_partition(
                    cfg.blocks,
                    cfg.block_size,
                    cfg.p_in,
                    cfg.p_out,
                    cfg.synthetic_seed,
                )?;
                (g, None)
            }
        },
        (None, Some(path)) => {
            (graph::load_edge_list(path, cfg.directed, cfg.weighted)?, None)
        }
        _ => {
            return Err(Error::validation(
                "dataset needs exactly one of a graph path or a synthetic kind",
            ))
        }
    };

    if let Some(path) = &cfg.labels {
        labels = Some(read_labels(path, &graph)?);
    }
    let ratings = match &cfg.ratings {
        Some(path) => Some(recsys::load_ratings(path)?),
        None => None,
    };
    Ok(Dataset { name: cfg.name.clone(), graph, ratings, labels })
}

/// Reads a node-label file and densifies it: every graph node must be
/// covered, and the distinct label values map to classes 0..k in sorted
/// order.
fn read_labels(path: &Path, g: &Graph) -> Result<Vec<usize>> {
    let pairs = graph::load_node_labels(path)?;
    let mut raw: Vec<Option<i64>> = vec![None; g.n()];
    for (id, label) in pairs {
        let v = g.node_index(&id).ok_or_else(|| {
            Error::validation(format!("label file names unknown node \"{id}\""))
        })?;
        if raw[v as usize].is_some() {
            return Err(Error::validation(format!("node \"{id}\" is labeled twice")));
        }
        raw[v as usize] = Some(label);
    }
    let mut distinct: Vec<i64> = raw.iter().filter_map(|&l| l).collect();
    distinct.sort_unstable();
    distinct.dedup();
    raw.iter()
        .enumerate()
        .map(|(v, l)| match l {
            Some(value) => {
                Ok(distinct.binary_search(value).expect("value was collected"))
            }
            None => Err(Error::validation(format!(
                "no label for node \"{}\"",
                g.external_id(v as u32)
            ))),
        })
        .collect()
}

/// Fills the data-driven detection defaults: an unset spectral or
/// affiliation-model community count becomes the number of communities
/// Louvain finds on the same graph (under Louvain's own detection
/// stream), so both parameterized methods default to a scale the graph
/// itself suggests. A no-op when the counts are set or unused.
pub fn resolve_detect(
    g: &Graph,
    master: u64,
    algorithms: &[Algorithm],
    d: &DetectConfig,
) -> DetectConfig {
    let needs_k = (algorithms.contains(&Algorithm::Spectral) && d.spectral_k.is_none())
        || (algorithms.contains(&Algorithm::Bigclam) && d.bigclam_k.is_none());
    if !needs_k {
        return d.clone();
    }
    let k = communities::louvain(g, algorithm_seed(master, Algorithm::Louvain)).k().max(1);
    DetectConfig {
        spectral_k: d.spectral_k.or(Some(k)),
        bigclam_k: d.bigclam_k.or(Some(k)),
        ..d.clone()
    }
}

/// Runs the detection method an algorithm names, with its parameters.
/// Unset community counts are an error here; [`resolve_detect`] fills
/// them against the graph first.
pub fn detect_cover(g: &Graph, algo: Algorithm, d: &DetectConfig, seed: u64) -> Result<Cover> {
    let unresolved = |what: &str| {
        Error::validation(format!(
            "{what} has no community count; set it in the config or resolve the \
             defaults against the graph first"
        ))
    };
    match algo {
        Algorithm::Louvain => Ok(communities::louvain(g, seed)),
        Algorithm::Spectral => {
            let k = d.spectral_k.ok_or_else(|| unresolved("spectral clustering"))?;
            communities::spectral(g, k, seed)
        }
        Algorithm::LabelPropagation => {
            Ok(communities::label_propagation(g, seed, d.label_propagation_iters))
        }
        Algorithm::EgoSplitting => Ok(communities::ego_splitting(g, seed)),
        Algorithm::Bigclam => {
            let k = d.bigclam_k.ok_or_else(|| unresolved("the affiliation model"))?;
            communities::bigclam(g, k, d.bigclam_iters, seed)
        }
        Algorithm::SingleCommunity => Ok(Cover::single_community(g.n())),
    }
}

/// The detection stream of one algorithm under a master seed; the same
/// stream no matter which tasks ride on the cover.
pub fn algorithm_seed(master: u64, algo: Algorithm) -> u64 {
    stable_seed(master, &format!("detect|{algo}"))
}

/// The detection parameters that feed an algorithm, for the cache key.
/// Callers pass a resolved config, so derived counts key the cache the
/// same way as the equal explicit setting.
fn detect_params(algo: Algorithm, d: &DetectConfig) -> String {
    let count = |k: Option<usize>| k.map_or("?".to_string(), |k| k.to_string());
    match algo {
        Algorithm::Spectral => format!("k={}", count(d.spectral_k)),
        Algorithm::Bigclam => {
            format!("k={} iters={}", count(d.bigclam_k), d.bigclam_iters)
        }
        Algorithm::LabelPropagation => format!("iters={}", d.label_propagation_iters),
        _ => String::new(),
    }
}

fn cache_path(dir: &Path, g: &Graph, algo: Algorithm, d: &DetectConfig, seed: u64) -> PathBuf {
    let key = format!("{}|{}|{}|{}", g.content_hash(), algo, detect_params(algo, d), seed);
    let digest = Sha256::digest(key.as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("{algo}-{hex}.cover"))
}

fn read_cached_cover(g: &Graph, path: &Path) -> Option<Cover> {
    let file = File::open(path).ok()?;
    communities::parse_cover(g, BufReader::new(file)).ok()
}

fn write_cached_cover(g: &Graph, cover: &Cover, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    communities::write_cover(g, cover, BufWriter::new(file))
}

/// One detected cover plus how the cache behaved for it.
struct Detected {
    algorithm: Algorithm,
    seed: u64,
    outcome: std::result::Result<Cover, String>,
    cache_note: String,
}

/// Detects the cover of every configured algorithm, consulting the cache
/// when enabled. The first cache hit of the run is verified against a
/// fresh detection; a stale entry is replaced and the fresh cover used, so
/// results never depend on cache contents.
fn detect_all(g: &Graph, cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Vec<Detected> {
    let detect = resolve_detect(g, cfg.matrix.seed, &cfg.matrix.algorithms, &cfg.detect);
    let mut detected = Vec::with_capacity(cfg.matrix.algorithms.len());
    let mut verified_one = false;
    for &algo in &cfg.matrix.algorithms {
        let seed = algorithm_seed(cfg.matrix.seed, algo);
        let cache = if cfg.matrix.cache_covers && algo != Algorithm::SingleCommunity {
            cache_dir.map(|dir| cache_path(dir, g, algo, &detect, seed))
        } else {
            None
        };

        let (outcome, cache_note) = match &cache {
            None => (detect_cover(g, algo, &detect, seed), "disabled".to_string()),
            Some(path) => match read_cached_cover(g, path) {
                Some(cached) if !verified_one => {
                    // spot-check the first hit per run against a recompute
                    verified_one = true;
                    match detect_cover(g, algo, &detect, seed) {
                        Ok(fresh) if fresh == cached => (Ok(fresh), "hit (verified)".into()),
                        Ok(fresh) => {
                            let _ = write_cached_cover(g, &fresh, path);
                            (Ok(fresh), "hit (stale, replaced)".into())
                        }
                        Err(e) => (Err(e), "hit (recompute failed)".into()),
                    }
                }
                Some(cached) => (Ok(cached), "hit".into()),
                None => {
                    let fresh = detect_cover(g, algo, &detect, seed);
                    if let Ok(cover) = &fresh {
                        let _ = write_cached_cover(g, cover, path);
                    }
                    (fresh, "miss".into())
                }
            },
        };
        detected.push(Detected {
            algorithm: algo,
            seed,
            outcome: outcome.map_err(|e| e.to_string()),
            cache_note,
        });
    }
    detected
}

/// Shape and quality record of one detected cover.
fn cover_record(g: &Graph, d: &Detected, quality: &[String]) -> CoverRecord {
    let mut record = CoverRecord {
        algorithm: d.algorithm,
        seed: d.seed,
        communities: 0,
        min_size: 0,
        median_size: 0,
        max_size: 0,
        overlap_rate: 0.0,
        quality: Vec::new(),
        failure: None,
    };
    let cover = match &d.outcome {
        Ok(cover) => cover,
        Err(e) => {
            record.failure = Some(e.clone());
            return record;
        }
    };
    let mut sizes = cover.sizes();
    sizes.sort_unstable();
    record.communities = cover.k();
    record.min_size = sizes.first().copied().unwrap_or(0);
    record.median_size = sizes.get(sizes.len() / 2).copied().unwrap_or(0);
    record.max_size = sizes.last().copied().unwrap_or(0);
    record.overlap_rate = cover.overlap_rate();
    for q in quality {
        match q.as_str() {
            "modularity" => {
                let value: MetricValue =
                    communities::modularity(g, cover).map(|s| s.value).ok().into();
                record.quality.push(MetricRow::new("modularity", value));
            }
            "density" => {
                let per_community: Vec<MetricValue> = (0..cover.k() as u32)
                    .map(|c| {
                        communities::density(g, cover.members(c)).map(|s| s.value).ok().into()
                    })
                    .collect();
                record
                    .quality
                    .push(MetricRow::new("mean_density", mean_defined(&per_community)));
            }
            _ => {}
        }
    }
    record
}

/// Everything the cell runners share, borrowed for the parallel phase.
struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    graph: &'a Graph,
    ratings: Option<&'a RatingsTable>,
    labels: Option<&'a [usize]>,
    /// (train, test) pairs, split once for all recommend cells.
    folds: Option<std::result::Result<Vec<(RatingsTable, RatingsTable)>, String>>,
    /// Labeled user pairs, sampled once for all trust cells.
    pairs: Option<std::result::Result<Vec<TrustPair>, String>>,
}

/// One scheduled cell: its identity plus the cover it evaluates.
struct CellSpec<'a> {
    key: CellKey,
    seed: u64,
    kind: Option<CentralityKind>,
    cover: std::result::Result<&'a Cover, &'a str>,
}

/// Runs the whole experiment matrix and returns the report (byte-stable
/// across reruns) alongside the run's wall-clock metadata. Fails hard only
/// when the dataset cannot be loaded; detection and cell errors are
/// recorded in the report instead.
pub fn run_matrix(
    cfg: &CheckedConfig,
    cache_dir: Option<&Path>,
) -> Result<(ExperimentReport, RunMeta)> {
    let started = Instant::now();
    let c = cfg.get();
    let dataset = load_dataset(&c.dataset)?;
    let g = &dataset.graph;
    let master = c.matrix.seed;
    let mut meta = RunMeta::default();

    let detected = detect_all(g, c, cache_dir);
    for d in &detected {
        meta.cover_cache.push((d.algorithm.name().into(), d.cache_note.clone()));
    }
    let covers: Vec<CoverRecord> =
        detected.iter().map(|d| cover_record(g, d, &c.detect.quality)).collect();

    let shared = Shared {
        cfg: c,
        graph: g,
        ratings: dataset.ratings.as_ref(),
        labels: dataset.labels.as_deref(),
        folds: c.matrix.tasks.contains(&Task::Recommend).then(|| {
            let ratings = dataset.ratings.as_ref().expect("validated");
            recsys::kfold_split(
                ratings,
                c.recommend.folds,
                stable_seed(master, "recommend|folds"),
            )
            .map_err(|e| e.to_string())
        }),
        pairs: c.matrix.tasks.contains(&Task::Trust).then(|| {
            trust::sample_pairs(
                g,
                c.trust.positive_pairs,
                c.trust.negative_pairs,
                stable_seed(master, "trust|pairs"),
            )
            .map_err(|e| e.to_string())
        }),
    };

    // lay the matrix out in configured order; each cell owns a named seed
    let mut specs = Vec::new();
    for &task in &c.matrix.tasks {
        let kinds: Vec<Option<CentralityKind>> = match task {
            Task::Recommend => c.recommend.propensities.iter().copied().map(Some).collect(),
            Task::Trust => c.trust.centers.iter().copied().map(Some).collect(),
            Task::Anomaly => vec![None],
        };
        for d in &detected {
            for &kind in &kinds {
                let kind_name = kind.map_or("none".to_string(), |k| k.to_string());
                let seed =
                    stable_seed(master, &format!("{task}|{}|{kind_name}", d.algorithm));
                specs.push(CellSpec {
                    key: CellKey {
                        dataset: dataset.name.clone(),
                        task,
                        algorithm: d.algorithm,
                        kind: kind_name,
                    },
                    seed,
                    kind,
                    cover: d.outcome.as_ref().map_err(String::as_str),
                });
            }
        }
    }

    let outcomes: Vec<(CellResult, u128)> = specs
        .par_iter()
        .map(|spec| {
            let cell_started = Instant::now();
            let result = match spec.cover {
                Ok(cover) => run_cell(&shared, spec, cover),
                Err(e) => Err(Error::validation(format!("community detection failed: {e}"))),
            };
            let cell = match result {
                Ok(rows) => CellResult {
                    key: spec.key.clone(),
                    seed: spec.seed,
                    rows,
                    failure: None,
                },
                Err(e) => CellResult {
                    key: spec.key.clone(),
                    seed: spec.seed,
                    rows: Vec::new(),
                    failure: Some(e.to_string()),
                },
            };
            (cell, cell_started.elapsed().as_millis())
        })
        .collect();

    let mut cells = Vec::with_capacity(outcomes.len());
    for (cell, ms) in outcomes {
        meta.cell_ms.push((cell.key.to_string(), ms));
        cells.push(cell);
    }
    meta.total_ms = started.elapsed().as_millis();

    let report = ExperimentReport {
        dataset: dataset.name,
        master_seed: master,
        config_hash: cfg.hash(),
        covers,
        cells,
    };
    Ok((report, meta))
}

fn run_cell(shared: &Shared, spec: &CellSpec, cover: &Cover) -> Result<Vec<MetricRow>> {
    match spec.key.task {
        Task::Recommend => recommend_cell(shared, spec, cover),
        Task::Trust => trust_cell(shared, spec, cover),
        Task::Anomaly => anomaly_cell(shared, spec, cover),
    }
}

/// Trains and scores the rating model once per fold with this cell's
/// propensity centrality, reporting per-fold and fold-averaged RMSE/MAE.
fn recommend_cell(shared: &Shared, spec: &CellSpec, cover: &Cover) -> Result<Vec<MetricRow>> {
    let ratings = shared.ratings.expect("validated");
    let folds = match shared.folds.as_ref().expect("task selected") {
        Ok(folds) => folds,
        Err(e) => return Err(Error::validation(format!("fold split failed: {e}"))),
    };
    let kind = spec.kind.expect("recommend cells carry a centrality");
    let alpha = centrality::propensity(shared.graph, cover, kind, derive_seed(spec.seed, 0))?;
    let communities = UserCommunities::new(ratings, shared.graph, cover, &alpha)?;

    let mut rows = Vec::new();
    let mut rmse_folds = Vec::with_capacity(folds.len());
    let mut mae_folds = Vec::with_capacity(folds.len());
    for (fold, (train, test)) in folds.iter().enumerate() {
        let train_cfg = TrainConfig {
            seed: derive_seed(spec.seed, 1 + fold as u64),
            ..shared.cfg.recommend.train
        };
        let model = recsys::fit_consvd(train, &communities, &train_cfg)?;
        let (rmse, mae) = recsys::evaluate_ratings(&model, test)?;
        rows.push(MetricRow::new("rmse", MetricValue::Value(rmse)).with_fold(fold));
        rows.push(MetricRow::new("mae", MetricValue::Value(mae)).with_fold(fold));
        rmse_folds.push(MetricValue::Value(rmse));
        mae_folds.push(MetricValue::Value(mae));
    }
    rows.push(MetricRow::new("rmse", mean_defined(&rmse_folds)));
    rows.push(MetricRow::new("mae", mean_defined(&mae_folds)));
    Ok(rows)
}

/// Picks community centers with this cell's centrality, scores the shared
/// pair sample, and evaluates at the algorithm's configured threshold.
fn trust_cell(shared: &Shared, spec: &CellSpec, cover: &Cover) -> Result<Vec<MetricRow>> {
    let ratings = shared.ratings.expect("validated");
    let pairs = match shared.pairs.as_ref().expect("task selected") {
        Ok(pairs) => pairs,
        Err(e) => return Err(Error::validation(format!("pair sampling failed: {e}"))),
    };
    let kind = spec.kind.expect("trust cells carry a centrality");
    let centers =
        trust::compute_centers(shared.graph, cover, kind, derive_seed(spec.seed, 0))?;
    let predictor = trust::TrustPredictor::new(shared.graph, cover, &centers, ratings)?;
    let scored = predictor.score_pairs(pairs);
    let threshold = shared.cfg.trust.thresholds.for_algorithm(spec.key.algorithm.name());
    let eval = trust::evaluate_trust(&scored, threshold)?;
    Ok(vec![
        MetricRow::new("auc", MetricValue::Value(eval.auc)),
        MetricRow::new("precision", eval.precision),
        MetricRow::new("recall", eval.recall),
        MetricRow::new("f1", eval.f1),
        MetricRow::new("threshold", MetricValue::Value(threshold)),
    ])
}

/// Extracts community features against this cell's cover (partitions via
/// auxiliary border communities) and cross-validates the boosted
/// classifier, reporting per-fold accuracy/AUC and per-class aggregates.
fn anomaly_cell(shared: &Shared, spec: &CellSpec, cover: &Cover) -> Result<Vec<MetricRow>> {
    let labels = shared.labels.expect("validated");
    let augmented;
    let feature_cover = if cover.is_partition() {
        augmented = auxiliary_communities(shared.graph, cover)?;
        &augmented
    } else {
        cover
    };
    let features = anomaly::feature_matrix(shared.graph, feature_cover)?;
    let evals = anomaly::cross_validate_anomaly(
        &features,
        labels,
        shared.cfg.anomaly.folds,
        shared.cfg.anomaly.rounds,
        spec.seed,
    )?;

    let mut rows = Vec::new();
    let mut accuracy = Vec::with_capacity(evals.len());
    let mut auc = Vec::with_capacity(evals.len());
    for (fold, eval) in evals.iter().enumerate() {
        rows.push(
            MetricRow::new("accuracy", MetricValue::Value(eval.accuracy)).with_fold(fold),
        );
        rows.push(MetricRow::new("auc", eval.auc).with_fold(fold));
        accuracy.push(MetricValue::Value(eval.accuracy));
        auc.push(eval.auc);
    }
    rows.push(MetricRow::new("accuracy", mean_defined(&accuracy)));
    rows.push(MetricRow::new("auc", mean_defined(&auc)));

    // classes aggregate across folds: mean of the defined fold metrics,
    // supports summed
    let mut classes: Vec<usize> = evals
        .iter()
        .flat_map(|e| e.per_class.iter().map(|c| c.class))
        .collect();
    classes.sort_unstable();
    classes.dedup();
    for class in classes {
        let of_class: Vec<&anomaly::ClassReport> = evals
            .iter()
            .flat_map(|e| e.per_class.iter().filter(|c| c.class == class))
            .collect();
        let precision: Vec<MetricValue> = of_class.iter().map(|c| c.precision).collect();
        let recall: Vec<MetricValue> = of_class.iter().map(|c| c.recall).collect();
        let f1: Vec<MetricValue> = of_class.iter().map(|c| c.f1).collect();
        let support: usize = of_class.iter().map(|c| c.support).sum();
        rows.push(MetricRow::new("precision", mean_defined(&precision)).with_class(class));
        rows.push(MetricRow::new("recall", mean_defined(&recall)).with_class(class));
        rows.push(MetricRow::new("f1", mean_defined(&f1)).with_class(class));
        rows.push(
            MetricRow::new("support", MetricValue::Value(support as f64)).with_class(class),
        );
    }
    Ok(rows)
}
