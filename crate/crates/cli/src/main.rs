//! `gpp` — ground-plane polling toolkit.
//!
//! Subcommands: `build-db` (RANSAC plane database from labeled clouds),
//! `synth` (synthetic scenes with ground truth), `poll` (plane selection and
//! 3D box construction per detection), `eval` (metric report), `ablate`
//! (metrics as a function of database size).
//!
//! Exit codes: 0 success, 1 validation error (arguments or inconsistent
//! inputs), 2 I/O error (missing or malformed files). Failures print a
//! single machine-readable line `error: <category>: <message>` on stderr.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<gpp_core::io::IoError> for CliError {
    fn from(err: gpp_core::io::IoError) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

#[derive(Parser)]
#[command(name = "gpp", version, about = "Ground-plane polling toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a ranked plane database from point-cloud frames.
    ///
    /// The frames directory holds `<stem>.bin` clouds with matching
    /// `<stem>.pgm` semantic rasters and `<stem>.txt` calibrations, plus an
    /// optional `classes.txt` side-car mapping `class_id name`.
    BuildDb {
        /// Directory of frames.
        #[arg(long)]
        frames: PathBuf,
        /// Output database file.
        #[arg(long)]
        out: PathBuf,
        /// Semantic classes to keep: numeric ids or names from classes.txt.
        #[arg(long, default_value = "ground,road,sidewalk,parking")]
        classes: String,
        /// Calibration entry holding the projection matrix.
        #[arg(long, default_value = "P2")]
        calib_entry: String,
        /// RANSAC inlier threshold in meters.
        #[arg(long, default_value_t = 0.02)]
        threshold: f64,
        /// RANSAC success probability.
        #[arg(long, default_value_t = 0.999)]
        success_prob: f64,
        /// Minimum points per extracted plane.
        #[arg(long, default_value_t = 3)]
        min_points: usize,
        /// Iteration cap per extraction.
        #[arg(long, default_value_t = 10_000)]
        max_iterations: usize,
        /// Keep raw 3-point sample planes instead of least-squares refits.
        #[arg(long)]
        no_refit: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate synthetic scenes: calibration, plane database, per-scene
    /// detection and ground-truth files.
    Synth {
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        scenes: usize,
        /// Keypoint jitter sigma in pixels.
        #[arg(long, default_value_t = 2.0)]
        noise_kp: f64,
        /// Dimension jitter sigma in meters.
        #[arg(long, default_value_t = 0.05)]
        noise_dim: f64,
        /// Probability of corrupting the orientation sign split.
        #[arg(long, default_value_t = 0.01)]
        flip_prob: f64,
        /// Extra pool planes appended to the plane database.
        #[arg(long, default_value_t = 0)]
        extra_planes: usize,
        #[arg(long, default_value_t = 3)]
        max_objects: usize,
        /// Ground tilt bound (x/z normal components). Note that the
        /// label-format ground truth is gravity-aligned, so tilted scenes
        /// carry an irreducible truth quantization of about tilt * h / 2.
        #[arg(long, default_value_t = 0.04)]
        plane_tilt: f64,
    },
    /// Select the best-fit plane per detection and write 3D boxes.
    Poll {
        /// Detections file or directory of per-scene files.
        #[arg(long)]
        dets: PathBuf,
        /// Plane database file.
        #[arg(long)]
        db: PathBuf,
        /// Calibration file.
        #[arg(long)]
        calib: PathBuf,
        /// Calibration entry holding the projection matrix.
        #[arg(long, default_value = "P2")]
        calib_entry: String,
        /// Poll only the top-k ranked planes.
        #[arg(long)]
        top_k: Option<usize>,
        /// Output file (for a dets file) or directory (for a dets dir).
        #[arg(long)]
        out: PathBuf,
    },
    /// Score results against ground truth and emit metric tables.
    Eval {
        /// Results file or directory (from `poll`).
        #[arg(long)]
        results: PathBuf,
        /// Detections file or directory (pairs line-for-line with results).
        #[arg(long)]
        dets: PathBuf,
        /// Ground-truth label file or directory.
        #[arg(long)]
        truth: PathBuf,
        /// 2D IoU gate for matching.
        #[arg(long, default_value_t = 0.7)]
        iou: f64,
        /// Recall sampling: 40 or 11 points.
        #[arg(long, default_value_t = 40)]
        recall_points: usize,
        /// Distance bin edges in meters, comma separated.
        #[arg(long, default_value = "0,10,20,30,40,50")]
        bins: String,
        /// Ground-truth difficulty filter: easy, moderate, hard or all.
        #[arg(long, default_value = "all")]
        difficulty: String,
        /// Optional report file (also printed to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the evaluation across database sizes.
    Ablate {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long, default_value = "P2")]
        calib_entry: String,
        /// Database sizes to test (capped at the database length).
        #[arg(long, default_value = "10,100,1000,10000,22000")]
        sizes: String,
        #[arg(long, default_value_t = 0.7)]
        iou: f64,
        #[arg(long, default_value = "0,10,20,30,40,50")]
        bins: String,
        /// Output directory for per-size curve files.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::BuildDb {
            frames,
            out,
            classes,
            calib_entry,
            threshold,
            success_prob,
            min_points,
            max_iterations,
            no_refit,
            seed,
        } => commands::build_db(
            &frames,
            &out,
            &classes,
            &calib_entry,
            threshold,
            success_prob,
            min_points,
            max_iterations,
            !no_refit,
            seed,
        ),
        Command::Synth {
            out,
            seed,
            scenes,
            noise_kp,
            noise_dim,
            flip_prob,
            extra_planes,
            max_objects,
            plane_tilt,
        } => commands::synth(
            &out,
            seed,
            scenes,
            noise_kp,
            noise_dim,
            flip_prob,
            extra_planes,
            max_objects,
            plane_tilt,
        ),
        Command::Poll {
            dets,
            db,
            calib,
            calib_entry,
            top_k,
            out,
        } => commands::poll(&dets, &db, &calib, &calib_entry, top_k, &out),
        Command::Eval {
            results,
            dets,
            truth,
            iou,
            recall_points,
            bins,
            difficulty,
            out,
        } => commands::eval(
            &results,
            &dets,
            &truth,
            iou,
            recall_points,
            &bins,
            &difficulty,
            out.as_deref(),
        ),
        Command::Ablate {
            dets,
            truth,
            db,
            calib,
            calib_entry,
            sizes,
            iou,
            bins,
            out,
        } => commands::ablate(&dets, &truth, &db, &calib, &calib_entry, &sizes, iou, &bins, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: validation: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: io: {msg}");
            ExitCode::from(2)
        }
    }
}
