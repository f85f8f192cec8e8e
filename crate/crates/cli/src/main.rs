//! `vad`: validate datasets, score test videos, report ROCAUC.
//!
//! Exit codes: 0 success, 1 data or protocol error, 2 usage error.

mod scores_file;

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use vad_core::window::{self, WindowConfig};
use vad_core::{build_report, load_manifest, render_report, video_scorer, PoolingMode, ReportFormat, ScoringConfig};

use crate::scores_file::{read_scores, write_scores, Header};

#[derive(Parser)]
#[command(name = "vad", version, about = "kNN anomaly scoring for video embeddings")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "VAD_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest and every embedding file it references.
    Validate { manifest: PathBuf },
    /// Score the test videos of a manifest.
    Score(ScoreArgs),
    /// Print per-class ROCAUC for a scores file.
    Report {
        scores: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(clap::Args)]
struct ScoreArgs {
    manifest: PathBuf,

    /// Only score these classes (comma separated).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,

    #[arg(long, value_enum, default_value_t = Pooling::Avg)]
    pooling: Pooling,

    /// Neighbors averaged into each score.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,

    /// L2-normalize train and query vectors.
    #[arg(long)]
    normalize: bool,

    /// Evenly subsample each video to at most N frames before pooling.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    frames: Option<u32>,

    /// Score per frame through overlapping windows of this length.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    window_len: Option<u32>,

    /// Window stride; implies window mode. Defaults to 1.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    window_stride: Option<u32>,

    /// Write scores.jsonl (or frame_scores.jsonl) here instead of stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pooling {
    Avg,
    Max,
    Identity,
}

impl From<Pooling> for PoolingMode {
    fn from(p: Pooling) -> Self {
        match p {
            Pooling::Avg => PoolingMode::Average,
            Pooling::Max => PoolingMode::Maximum,
            Pooling::Identity => PoolingMode::Identity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let window = match &cli.command {
        Command::Score(args) => window_config(args),
        _ => None,
    };

    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.into()).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        log::warn!("built without the parallel feature; --threads is ignored");
    }

    let result = match cli.command {
        Command::Validate { manifest } => cmd_validate(&manifest),
        Command::Score(args) => cmd_score(&args, window),
        Command::Report { scores, format } => cmd_report(&scores, format.into()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Resolves window flags, exiting with a usage error on bad combinations.
fn window_config(args: &ScoreArgs) -> Option<WindowConfig> {
    if args.window_len.is_none() && args.window_stride.is_none() {
        return None;
    }
    if args.frames.is_some() {
        usage_error(ErrorKind::ArgumentConflict, "--frames applies to per-video scoring and cannot be combined with window flags");
    }
    let defaults = WindowConfig::default();
    let len = args.window_len.map_or(defaults.length(), |v| v as usize);
    let stride = args.window_stride.map_or(defaults.stride(), |v| v as usize);
    match WindowConfig::new(len, stride) {
        Ok(cfg) => Some(cfg),
        Err(e) => usage_error(ErrorKind::ValueValidation, e),
    }
}

fn cmd_validate(manifest_path: &Path) -> Result<ExitCode> {
    let manifest = match load_manifest(manifest_path) {
        Ok(m) => m,
        Err(e) => {
            println!("{}: {e}", manifest_path.display());
            return Ok(ExitCode::FAILURE);
        }
    };
    let problems = manifest.check_files();
    if problems.is_empty() {
        println!("{} entries OK", manifest.len());
        return Ok(ExitCode::SUCCESS);
    }
    for p in &problems {
        println!("{p}");
    }
    println!("{} of {} entries failed", problems.len(), manifest.len());
    Ok(ExitCode::FAILURE)
}

fn cmd_score(args: &ScoreArgs, window: Option<WindowConfig>) -> Result<ExitCode> {
    let manifest = load_manifest(&args.manifest).context("loading manifest")?;
    let classes = args.classes.clone().unwrap_or_else(|| manifest.class_names());
    let cfg = ScoringConfig {
        pooling: args.pooling.into(),
        k: args.k as usize,
        normalize: args.normalize,
        frames: args.frames.map(|f| f as usize),
    };
    let header = Header {
        tool_version: env!("CARGO_PKG_VERSION"),
        mode: if window.is_some() { "window" } else { "video" },
        manifest: args.manifest.display().to_string(),
        classes: &classes,
        pooling: cfg.pooling.to_string(),
        k: cfg.k,
        normalize: cfg.normalize,
        frames: cfg.frames,
        window_len: window.map(|w| w.length()),
        window_stride: window.map(|w| w.stride()),
    };

    let (file_name, buf) = match window {
        None => {
            let records = video_scorer::run_classes(&manifest, &classes, &cfg).context("scoring")?;
            let mut buf = Vec::new();
            write_scores(&mut buf, &header, &records)?;
            ("scores.jsonl", buf)
        }
        Some(w) => {
            let records = window::run_classes_windows(&manifest, &classes, w, &cfg).context("window scoring")?;
            let mut buf = Vec::new();
            write_scores(&mut buf, &header, &records)?;
            ("frame_scores.jsonl", buf)
        }
    };

    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(file_name);
            fs::write(&path, &buf).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => io::stdout().lock().write_all(&buf).context("writing scores")?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(scores_path: &Path, format: ReportFormat) -> Result<ExitCode> {
    let file = fs::File::open(scores_path).with_context(|| format!("opening {}", scores_path.display()))?;
    let records = read_scores(BufReader::new(file)).with_context(|| format!("reading {}", scores_path.display()))?;
    let report = build_report(&records)?;
    print!("{}", render_report(&report, format));
    Ok(ExitCode::SUCCESS)
}
