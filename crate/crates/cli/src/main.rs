//! `commbench` — command-line driver for the benchmark matrix.
//!
//! `bench` runs the full task × algorithm matrix of a TOML config and
//! writes `report.{csv,json,md}` plus `meta.json` into the output
//! directory; `recommend`, `trust` and `anomaly` do the same for a single
//! task. `detect` only detects and writes cover files, `centrality` prints
//! per-node scores, and `report` re-renders an existing JSON report.
//!
//! Exit codes: 0 on success, 1 when the config or dataset is unusable,
//! 2 when individual cells failed (the report is still written).

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commbench::centrality::{centrality_scores, CentralityKind};
use commbench::communities::write_cover;
use commbench::error::{Error, Result};
use commbench::runner::{
    algorithm_seed, detect_cover, emit_report, load_dataset, resolve_detect, run_matrix,
    validate_config,
    CheckedConfig, ExperimentConfig, ExperimentReport, ReportFormat, Task,
};

#[derive(Parser)]
#[command(name = "commbench", version, about = "Community-detection benchmark matrix")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full task × algorithm matrix and write reports
    Bench(RunArgs),
    /// Run only the rating-prediction task
    Recommend(RunArgs),
    /// Run only the trust-prediction task
    Trust(RunArgs),
    /// Run only the anomaly-detection task
    Anomaly(RunArgs),
    /// Detect communities with every configured algorithm and write covers
    Detect(RunArgs),
    /// Print per-node centrality scores as CSV
    Centrality {
        #[command(flatten)]
        args: RunArgs,
        /// Score to compute (degree, betweenness, closeness, eigenvector,
        /// indegree, outdegree, random)
        #[arg(long, default_value = "degree")]
        kind: CentralityKind,
    },
    /// Re-render an existing JSON report in another format
    Report {
        /// Report written by a previous run
        #[arg(default_value = "report.json")]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: one per core)
    #[arg(long)]
    jobs: Option<usize>,
    /// Where report files, covers and the cover cache go
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Additionally print the report to stdout in this format
    #[arg(long)]
    format: Option<ReportFormat>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(Error::Config(errors)) => {
            eprintln!("invalid config:");
            for e in errors {
                eprintln!("  - {e}");
            }
            1
        }
        // stdout closed mid-stream (e.g. piped into `head`): not a failure
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Bench(args) => run_tasks(&args, None),
        Command::Recommend(args) => run_tasks(&args, Some(Task::Recommend)),
        Command::Trust(args) => run_tasks(&args, Some(Task::Trust)),
        Command::Anomaly(args) => run_tasks(&args, Some(Task::Anomaly)),
        Command::Detect(args) => run_detect(&args),
        Command::Centrality { args, kind } => run_centrality(&args, kind),
        Command::Report { input, format } => run_report(&input, format),
    }
}

/// Loads the config, applies CLI overrides, and validates it.
fn load_checked(args: &RunArgs, force_task: Option<Task>) -> Result<CheckedConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.matrix.seed = seed;
    }
    if let Some(task) = force_task {
        cfg.matrix.tasks = vec![task];
    }
    validate_config(cfg)
}

fn init_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::validation(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn run_tasks(args: &RunArgs, force_task: Option<Task>) -> Result<i32> {
    init_jobs(args.jobs)?;
    let cfg = load_checked(args, force_task)?;
    fs::create_dir_all(&args.out_dir)?;
    let cache_dir = if cfg.get().matrix.cache_covers {
        let dir = args.out_dir.join("covers");
        fs::create_dir_all(&dir)?;
        Some(dir)
    } else {
        None
    };

    let (report, meta) = run_matrix(&cfg, cache_dir.as_deref())?;

    for format in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown] {
        let mut bytes = Vec::new();
        emit_report(&report, format, &mut bytes)?;
        fs::write(args.out_dir.join(format!("report.{}", format.extension())), bytes)?;
    }
    fs::write(args.out_dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;

    if let Some(format) = args.format {
        let mut stdout = std::io::stdout().lock();
        emit_report(&report, format, &mut stdout)?;
    }

    let failed = report.cells.iter().filter(|c| c.failure.is_some()).count();
    eprintln!(
        "{}: {} covers, {} cells ({} failed), {} ms -> {}",
        report.dataset,
        report.covers.len(),
        report.cells.len(),
        failed,
        meta.total_ms,
        args.out_dir.display()
    );
    Ok(if report.has_failures() { 2 } else { 0 })
}

fn run_detect(args: &RunArgs) -> Result<i32> {
    init_jobs(args.jobs)?;
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.matrix.seed = seed;
    }
    if cfg.matrix.algorithms.is_empty() {
        return Err(Error::validation("matrix.algorithms: select at least one algorithm"));
    }
    let dataset = load_dataset(&cfg.dataset)?;
    fs::create_dir_all(&args.out_dir)?;

    let detect =
        resolve_detect(&dataset.graph, cfg.matrix.seed, &cfg.matrix.algorithms, &cfg.detect);
    let mut failed = false;
    for &algo in &cfg.matrix.algorithms {
        let seed = algorithm_seed(cfg.matrix.seed, algo);
        match detect_cover(&dataset.graph, algo, &detect, seed) {
            Ok(cover) => {
                let path = args.out_dir.join(format!("{algo}.cover"));
                let mut bytes = Vec::new();
                write_cover(&dataset.graph, &cover, &mut bytes)?;
                fs::write(&path, bytes)?;
                let sizes = cover.sizes();
                println!(
                    "{algo}: {} communities (sizes {}..{}), overlap {:.2} -> {}",
                    cover.k(),
                    sizes.iter().min().copied().unwrap_or(0),
                    sizes.iter().max().copied().unwrap_or(0),
                    cover.overlap_rate(),
                    path.display()
                );
            }
            Err(e) => {
                eprintln!("{algo}: {e}");
                failed = true;
            }
        }
    }
    Ok(if failed { 2 } else { 0 })
}

fn run_centrality(args: &RunArgs, kind: CentralityKind) -> Result<i32> {
    init_jobs(args.jobs)?;
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.matrix.seed = seed;
    }
    let dataset = load_dataset(&cfg.dataset)?;
    let scores = centrality_scores(&dataset.graph, kind, cfg.matrix.seed)?;
    println!("node,{kind}");
    for (v, score) in scores.iter().enumerate() {
        println!("{},{}", dataset.graph.external_id(v as u32), score);
    }
    Ok(0)
}

fn run_report(input: &PathBuf, format: ReportFormat) -> Result<i32> {
    let bytes = fs::read(input)?;
    let report: ExperimentReport = serde_json::from_slice(&bytes)?;
    let mut stdout = std::io::stdout().lock();
    emit_report(&report, format, &mut stdout)?;
    Ok(if report.has_failures() { 2 } else { 0 })
}
