//! Experiment orchestration: validated configuration, deterministic
//! execution of the (algorithm × kind × task) matrix, cover caching, and
//! report emission.
//!
//! A run is described by one TOML document ([`ExperimentConfig`]). The same
//! detected cover feeds every downstream kind, and every cell derives its
//! own sub-seed from the master seed and its position in the matrix, so a
//! rerun with the same config and seed reproduces the report body byte for
//! byte. Timings and cache notes live in a separate [`RunMeta`] so they
//! never perturb that guarantee.

mod matrix;
mod report;

pub use matrix::{
    algorithm_seed, detect_cover, load_dataset, resolve_detect, run_matrix, Dataset,
};
pub use report::{
    emit_report, render_value, CellKey, CellResult, CoverRecord, ExperimentReport, ReportFormat,
    RunMeta,
};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::centrality::{derive_seed, CentralityKind};
use crate::error::{Error, Result};
use crate::recsys::TrainConfig;
use crate::trust::ThresholdConfig;

/// Community detection methods selectable in the matrix; the whole-graph
/// single community rides along as a pseudo-algorithm so ablation baselines
/// fall out of the same machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Louvain,
    Spectral,
    LabelPropagation,
    EgoSplitting,
    Bigclam,
    SingleCommunity,
}

impl Algorithm {
    /// All algorithms in canonical report order: partition-valued methods,
    /// then overlapping methods, then the baseline.
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Louvain,
        Algorithm::Spectral,
        Algorithm::LabelPropagation,
        Algorithm::EgoSplitting,
        Algorithm::Bigclam,
        Algorithm::SingleCommunity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Louvain => "louvain",
            Algorithm::Spectral => "spectral",
            Algorithm::LabelPropagation => "label_propagation",
            Algorithm::EgoSplitting => "ego_splitting",
            Algorithm::Bigclam => "bigclam",
            Algorithm::SingleCommunity => "single_community",
        }
    }

    /// Whether the method can place a node in several communities.
    pub fn is_overlapping(self) -> bool {
        matches!(self, Algorithm::EgoSplitting | Algorithm::Bigclam)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown algorithm \"{s}\"")))
    }
}

/// Downstream tasks the matrix can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Recommend,
    Trust,
    Anomaly,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Recommend, Task::Trust, Task::Anomaly];

    pub fn name(self) -> &'static str {
        match self {
            Task::Recommend => "recommend",
            Task::Trust => "trust",
            Task::Anomaly => "anomaly",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown task \"{s}\"")))
    }
}

/// Built-in datasets generated on the fly instead of loaded from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Planted blocks plus hub stars and injected cross-community
    /// anomalies, with binary node labels (see the anomaly module).
    AnomalyBenchmark,
    /// Plain planted-partition blocks, unlabeled.
    PlantedPartition,
}

/// Where the graph (and any side data) comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Name used in report rows.
    pub name: String,
    /// Edge-list path; mutually exclusive with `synthetic`.
    pub graph: Option<PathBuf>,
    pub directed: bool,
    pub weighted: bool,
    /// Ratings table path (user item value), needed by recommend and trust.
    pub ratings: Option<PathBuf>,
    /// Node-label path (node label), needed by anomaly on file datasets.
    pub labels: Option<PathBuf>,
    /// Generate the graph instead of loading it.
    pub synthetic: Option<SyntheticKind>,
    pub synthetic_seed: u64,
    /// Planted-partition shape, used when `synthetic = "planted_partition"`.
    pub blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            name: "dataset".into(),
            graph: None,
            directed: false,
            weighted: false,
            ratings: None,
            labels: None,
            synthetic: None,
            synthetic_seed: 0,
            blocks: 4,
            block_size: 25,
            p_in: 0.9,
            p_out: 0.01,
        }
    }
}

/// Which cells the matrix spans and how runs are seeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixConfig {
    pub tasks: Vec<Task>,
    pub algorithms: Vec<Algorithm>,
    /// Master seed; every cell derives its own stream from it.
    pub seed: u64,
    /// Reuse covers from the cache directory when one is provided.
    pub cache_covers: bool,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            tasks: Vec::new(),
            algorithms: Algorithm::ALL.to_vec(),
            seed: 0,
            cache_covers: true,
        }
    }
}

/// Detection parameters and which cover quality functions to report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Cluster count for spectral clustering. Unset means "derive it from
    /// the graph": the number of communities Louvain finds becomes k.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_k: Option<usize>,
    /// Community count for the affiliation model; unset derives it the
    /// same way as `spectral_k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bigclam_k: Option<usize>,
    pub bigclam_iters: usize,
    pub label_propagation_iters: usize,
    /// Subset of {"modularity", "density"}; modularity is only valid when
    /// no overlapping algorithm is selected.
    pub quality: Vec<String>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            spectral_k: None,
            bigclam_k: None,
            bigclam_iters: 500,
            label_propagation_iters: 100,
            quality: vec!["density".into()],
        }
    }
}

/// Rating-prediction task settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommendConfig {
    /// Propensity centralities to compare (degree, betweenness, closeness).
    pub propensities: Vec<CentralityKind>,
    pub folds: usize,
    pub train: TrainConfig,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            propensities: vec![
                CentralityKind::Degree,
                CentralityKind::Betweenness,
                CentralityKind::Closeness,
            ],
            folds: 5,
            train: TrainConfig::default(),
        }
    }
}

/// Trust-prediction task settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustTaskConfig {
    /// Center-selection centralities to compare.
    pub centers: Vec<CentralityKind>,
    pub positive_pairs: usize,
    pub negative_pairs: usize,
    pub thresholds: ThresholdConfig,
}

impl Default for TrustTaskConfig {
    fn default() -> Self {
        TrustTaskConfig {
            centers: vec![
                CentralityKind::Degree,
                CentralityKind::Betweenness,
                CentralityKind::Closeness,
                CentralityKind::Eigenvector,
                CentralityKind::Random,
            ],
            positive_pairs: 6700,
            negative_pairs: 3300,
            thresholds: ThresholdConfig::default(),
        }
    }
}

/// Anomaly-detection task settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyTaskConfig {
    pub folds: usize,
    pub rounds: usize,
}

impl Default for AnomalyTaskConfig {
    fn default() -> Self {
        AnomalyTaskConfig { folds: 5, rounds: 200 }
    }
}

/// One experiment: a dataset, a cell matrix, and per-task parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub matrix: MatrixConfig,
    pub detect: DetectConfig,
    pub recommend: RecommendConfig,
    pub trust: TrustTaskConfig,
    pub anomaly: AnomalyTaskConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::Serde(format!("config: {e}")))
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(&path)?;
        ExperimentConfig::from_toml(&text)
    }
}

/// A config that passed [`validate_config`]; the only way to run a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedConfig(ExperimentConfig);

impl CheckedConfig {
    pub fn get(&self) -> &ExperimentConfig {
        &self.0
    }

    /// The config echoed back with all defaults filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.0).expect("config serializes")
    }

    /// Stable 16-hex-digit digest of the echoed config; stamped on reports.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Checks every cross-field constraint and returns either the checked
/// config or the complete list of violations, each tagged with the path of
/// the offending field.
pub fn validate_config(cfg: ExperimentConfig) -> Result<CheckedConfig> {
    let errors = validation_errors(&cfg);
    if errors.is_empty() {
        Ok(CheckedConfig(cfg))
    } else {
        Err(Error::Config(errors))
    }
}

/// All validation problems in `cfg`, empty when it is runnable.
pub fn validation_errors(cfg: &ExperimentConfig) -> Vec<String> {
    let mut errors = Vec::new();
    let mut err = |path: &str, msg: String| errors.push(format!("{path}: {msg}"));

    // --- matrix ---------------------------------------------------------
    if cfg.matrix.tasks.is_empty() {
        err("matrix.tasks", "select at least one task".into());
    }
    if has_duplicates(&cfg.matrix.tasks) {
        err("matrix.tasks", "tasks are listed more than once".into());
    }
    if cfg.matrix.algorithms.is_empty() {
        err("matrix.algorithms", "select at least one algorithm".into());
    }
    if has_duplicates(&cfg.matrix.algorithms) {
        err("matrix.algorithms", "algorithms are listed more than once".into());
    }
    let task = |t: Task| cfg.matrix.tasks.contains(&t);
    let algorithm = |a: Algorithm| cfg.matrix.algorithms.contains(&a);

    // --- dataset --------------------------------------------------------
    match (&cfg.dataset.graph, cfg.dataset.synthetic) {
        (Some(_), Some(_)) => err(
            "dataset",
            "choose either a graph path or a synthetic dataset, not both".into(),
        ),
        (None, None) => err(
            "dataset",
            "no input: set dataset.graph or dataset.synthetic".into(),
        ),
        (Some(path), None) => {
            if !path.is_file() {
                err("dataset.graph", format!("no such file: {}", path.display()));
            }
        }
        (None, Some(kind)) => {
            if kind == SyntheticKind::PlantedPartition {
                if cfg.dataset.blocks == 0 || cfg.dataset.block_size == 0 {
                    err(
                        "dataset.blocks",
                        "planted partitions need blocks >= 1 and block_size >= 1".into(),
                    );
                }
                let (p_in, p_out) = (cfg.dataset.p_in, cfg.dataset.p_out);
                if !(0.0..=1.0).contains(&p_out) || !(p_out..=1.0).contains(&p_in) {
                    err(
                        "dataset.p_in",
                        format!("need 0 <= p_out <= p_in <= 1, got p_in={p_in} p_out={p_out}"),
                    );
                }
            }
            if cfg.dataset.directed {
                err(
                    "dataset.directed",
                    "synthetic datasets are undirected".into(),
                );
            }
        }
    }
    match &cfg.dataset.ratings {
        Some(path) if !path.is_file() => {
            err("dataset.ratings", format!("no such file: {}", path.display()));
        }
        None if task(Task::Recommend) => err(
            "dataset.ratings",
            "the recommend task needs a ratings file".into(),
        ),
        None if task(Task::Trust) => err(
            "dataset.ratings",
            "the trust task needs a ratings file for user similarity".into(),
        ),
        _ => {}
    }
    if task(Task::Trust) && !cfg.dataset.directed {
        err(
            "dataset.directed",
            "the trust task samples ordered pairs and needs a directed graph".into(),
        );
    }
    let has_labels = cfg.dataset.labels.is_some()
        || cfg.dataset.synthetic == Some(SyntheticKind::AnomalyBenchmark);
    match &cfg.dataset.labels {
        Some(path) if !path.is_file() => {
            err("dataset.labels", format!("no such file: {}", path.display()));
        }
        None if task(Task::Anomaly) && !has_labels => err(
            "dataset.labels",
            "the anomaly task needs node labels (or the anomaly_benchmark dataset)".into(),
        ),
        _ => {}
    }

    // --- detect ---------------------------------------------------------
    if algorithm(Algorithm::Spectral) && cfg.detect.spectral_k == Some(0) {
        err("detect.spectral_k", "spectral clustering needs k >= 1".into());
    }
    if algorithm(Algorithm::Bigclam) {
        if cfg.detect.bigclam_k == Some(0) {
            err("detect.bigclam_k", "the affiliation model needs k >= 1".into());
        }
        if cfg.detect.bigclam_iters == 0 {
            err("detect.bigclam_iters", "need at least one sweep".into());
        }
    }
    if algorithm(Algorithm::LabelPropagation) && cfg.detect.label_propagation_iters == 0 {
        err("detect.label_propagation_iters", "need at least one sweep".into());
    }
    for q in &cfg.detect.quality {
        match q.as_str() {
            "density" => {}
            "modularity" => {
                let overlapping: Vec<&str> = cfg
                    .matrix
                    .algorithms
                    .iter()
                    .filter(|a| a.is_overlapping())
                    .map(|a| a.name())
                    .collect();
                if !overlapping.is_empty() {
                    err(
                        "detect.quality",
                        format!(
                            "modularity is defined for partitions only; drop it or remove \
                             the overlapping algorithms ({})",
                            overlapping.join(", ")
                        ),
                    );
                }
            }
            other => err("detect.quality", format!("unknown quality function \"{other}\"")),
        }
    }

    // --- recommend ------------------------------------------------------
    if task(Task::Recommend) {
        if cfg.recommend.propensities.is_empty() {
            err("recommend.propensities", "select at least one centrality".into());
        }
        if has_duplicates(&cfg.recommend.propensities) {
            err("recommend.propensities", "kinds are listed more than once".into());
        }
        for kind in &cfg.recommend.propensities {
            if !matches!(
                kind,
                CentralityKind::Degree | CentralityKind::Betweenness | CentralityKind::Closeness
            ) {
                err(
                    "recommend.propensities",
                    format!("{kind} is not a propensity centrality (use degree, betweenness or closeness)"),
                );
            }
        }
        if cfg.recommend.folds < 2 {
            err("recommend.folds", "cross-validation needs at least 2 folds".into());
        }
        if let Err(e) = cfg.recommend.train.validate() {
            err("recommend.train", e.to_string());
        }
    }

    // --- trust ----------------------------------------------------------
    if task(Task::Trust) {
        if cfg.trust.centers.is_empty() {
            err("trust.centers", "select at least one centrality".into());
        }
        if has_duplicates(&cfg.trust.centers) {
            err("trust.centers", "kinds are listed more than once".into());
        }
        for kind in &cfg.trust.centers {
            if matches!(kind, CentralityKind::Indegree | CentralityKind::Outdegree)
                && !cfg.dataset.directed
            {
                err("trust.centers", format!("{kind} needs a directed graph"));
            }
        }
        if cfg.trust.positive_pairs == 0 || cfg.trust.negative_pairs == 0 {
            err("trust.positive_pairs", "sample at least one pair of each label".into());
        }
        if let Err(e) = cfg.trust.thresholds.validate() {
            err("trust.thresholds", e.to_string());
        }
    }

    // --- anomaly --------------------------------------------------------
    if task(Task::Anomaly) && cfg.anomaly.folds < 2 {
        err("anomaly.folds", "cross-validation needs at least 2 folds".into());
    }

    errors
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items
        .iter()
        .enumerate()
        .any(|(i, x)| items[..i].contains(x))
}

/// Seed for one named stream (a matrix cell, a fold set, a pair sample),
/// derived from the master seed and a stable hash of the key string.
pub(crate) fn stable_seed(master: u64, key: &str) -> u64 {
    let digest = Sha256::digest(key.as_bytes());
    let stream = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    derive_seed(master, stream)
}
