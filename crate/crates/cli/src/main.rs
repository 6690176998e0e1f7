mod commands;
mod config;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pipefit_core::Error;

use config::RunConfig;

/// Pipe documentation from photogrammetric reconstructions: frame-set
/// planning, metric scale from circular targets, cylinder detection,
/// classification, and progress reports.
#[derive(Parser)]
#[command(name = "pipefit", version, about)]
struct Cli {
    /// Emit errors as JSON lines on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    /// JSON settings file; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan or optimize the frame set of a video reconstruction.
    Frames {
        #[command(subcommand)]
        cmd: FramesCommand,
    },
    /// Recover the metric scale factor from circular-target images.
    Scale(ScaleArgs),
    /// Detect pipe cylinders in a point cloud.
    Detect(DetectArgs),
    /// Assign detected cylinders to planned pipe classes.
    Classify(ClassifyArgs),
    /// Aggregate classified pipes into a progress report.
    Report(ReportArgs),
    /// Generate synthetic inputs with exact ground truth.
    Synth {
        #[command(subcommand)]
        cmd: SynthCommand,
    },
    /// Run a predefined parameter sweep.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCommand,
    },
}

#[derive(Subcommand)]
enum FramesCommand {
    /// One planning pass over an existing reconstruction.
    Plan(FramesPlanArgs),
    /// Iterate a reconstruction backend until the overlap band is met.
    Optimize(FramesOptimizeArgs),
}

#[derive(Args)]
struct FramesPlanArgs {
    /// Sparse reconstruction directory (views/intrinsics/points/features).
    #[arg(long, value_name = "DIR")]
    bundle: PathBuf,
    /// Frame timestamps in seconds, one per line.
    #[arg(long, value_name = "FILE")]
    timestamps: PathBuf,
    #[arg(long)]
    ov_min: Option<f64>,
    #[arg(long)]
    ov_max: Option<f64>,
    /// Native frame rate of the source video.
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct FramesOptimizeArgs {
    /// Video manifest JSON.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Simulated-backend spec JSON standing in for the reconstruction tool.
    #[arg(long, value_name = "FILE")]
    backend: PathBuf,
    #[arg(long)]
    ov_min: Option<f64>,
    #[arg(long)]
    ov_max: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    initial_fps: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct ScaleArgs {
    /// Sparse reconstruction directory.
    #[arg(long, value_name = "DIR")]
    bundle: PathBuf,
    /// Directory of `view_<id>.pgm` rasters, one per registered view.
    #[arg(long, value_name = "DIR")]
    images: PathBuf,
    /// Target board definition JSON.
    #[arg(long, value_name = "FILE")]
    board: PathBuf,
    /// Skip the projective center-eccentricity correction.
    #[arg(long)]
    no_eccentricity: bool,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Point cloud (PLY).
    #[arg(long, value_name = "FILE")]
    cloud: PathBuf,
    /// Seed plane as "nx,ny,nz,d" for the plane nx*x+ny*y+nz*z+d=0.
    #[arg(long, value_name = "SPEC")]
    plane: String,
    /// Treat the cloud as not yet metric (radii reported in cloud units).
    #[arg(long)]
    arbitrary_units: bool,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Cylinder list JSON produced by `detect`.
    #[arg(long, value_name = "FILE")]
    cylinders: PathBuf,
    /// Pipe class table JSON.
    #[arg(long, value_name = "FILE")]
    classes: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Cylinder list JSON (classified or not; unclassified input is
    /// classified against the table first).
    #[arg(long, value_name = "FILE")]
    cylinders: PathBuf,
    /// Pipe class table JSON.
    #[arg(long, value_name = "FILE")]
    classes: PathBuf,
    /// Ground-truth CSV; enables error metrics and detection quality.
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    /// Stamp the report with this timestamp string (omitted by default so
    /// identical inputs produce identical bytes).
    #[arg(long, value_name = "TS")]
    timestamp: Option<String>,
    #[arg(long, value_name = "FILE")]
    out_json: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Sample a labeled cylinder scene to PLY + ground-truth CSV.
    Scene(SynthSceneArgs),
    /// Render target-board views to PGM rasters plus a camera bundle.
    Board(SynthBoardArgs),
}

#[derive(Args)]
struct SynthSceneArgs {
    /// Scene spec JSON.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_cloud: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_truth: Option<PathBuf>,
    /// Write ASCII PLY instead of binary.
    #[arg(long)]
    ascii: bool,
}

#[derive(Args)]
struct SynthBoardArgs {
    /// Board camera-network spec JSON.
    #[arg(long, value_name = "FILE")]
    scene: PathBuf,
    /// Output directory (rasters, bundle/, board.json, centers.json).
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Scale accuracy versus number of views observing the board.
    ScaleViews(ExperimentArgs),
    /// Detection quality versus image-overlap level (cloud completeness).
    OverlapDetection(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DegenerateGeometry(_) => "degenerate_geometry",
        Error::InsufficientPoints { .. } => "insufficient_points",
        Error::NotAnEllipse => "not_an_ellipse",
        Error::EmptySlab { .. } => "empty_slab",
        Error::InsufficientSupport { .. } => "insufficient_support",
        Error::NoConvergence { .. } => "no_convergence",
        Error::AlreadyMetric => "already_metric",
        Error::ZeroTruth => "zero_truth",
        Error::InsufficientViews { .. } => "insufficient_views",
        Error::AmbiguousMatch { .. } => "ambiguous_match",
        Error::BehindCamera { .. } => "behind_camera",
        Error::IllConditioned { .. } => "ill_conditioned",
        Error::NoTargetsFound => "no_targets_found",
        Error::OutOfFrustum(_) => "out_of_frustum",
        Error::Unregistered { .. } => "unregistered",
        Error::BandUnreachable(_) => "band_unreachable",
        Error::BackendFailure { .. } => "backend_failure",
        Error::Parse { .. } => "parse",
        Error::InvalidInput(_) => "invalid_input",
        Error::Io(_) => "io",
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Frames { cmd: FramesCommand::Plan(args) } => {
            commands::frames::plan(args, &config)
        }
        Command::Frames { cmd: FramesCommand::Optimize(args) } => {
            commands::frames::optimize(args, &config)
        }
        Command::Scale(args) => commands::scale::run(args, &config),
        Command::Detect(args) => commands::detect::run(args, &config),
        Command::Classify(args) => commands::report::classify(args, &config),
        Command::Report(args) => commands::report::report(args, &config),
        Command::Synth { cmd: SynthCommand::Scene(args) } => {
            commands::synth::scene(args, &config)
        }
        Command::Synth { cmd: SynthCommand::Board(args) } => {
            commands::synth::board(args, &config)
        }
        Command::Experiment { cmd: ExperimentCommand::ScaleViews(args) } => {
            commands::experiment::scale_views(args, &config)
        }
        Command::Experiment { cmd: ExperimentCommand::OverlapDetection(args) } => {
            commands::experiment::overlap_detection(args, &config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if cli.json_errors {
                let line = serde_json::json!({
                    "error": e.to_string(),
                    "kind": error_kind(&e),
                });
                eprintln!("{line}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(1)
        }
    }
}
