//! `skillcell` command-line front end.
//!
//! Two workflows are wired together here: CAD-based programming
//! (`plan`/`annotate`/`extract`/`locgen`, then `run`) and collaborative
//! teaching (`calibrate`, `teach`, then `run`). `serve-cell` hosts the
//! simulated cell; `verify-trace` checks a run afterwards.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod output;

pub use error::{exit_code, CliError};

const FILE_CONVENTIONS: &str = "\
File conventions (all UTF-8 JSON):
  *.asm.json      assembly model: parts, instances, skill annotations
  *.plan.json     task plan: ordered skills, targets, parameters
  *.rules.json    compilation rules: approach/departure offsets, speed, spacing
  *.recipe.json   control recipe (version \"1\")
  *.loc.json      localization recipe of one part; referenced from recipes by
                  file name, resolved next to the recipe
  *.cell.json     cell configuration: robot base, tool, camera and tracker frames
  *.scene.json    scene: parts with true camera-frame poses, noise, seeds;
                  localization recipes resolved next to the scene
  *.pairs.json    calibration point pairs (robot_points, tracker_points)
  *.xf.json       rigid transform {\"t\":[x,y,z],\"q\":[qx,qy,qz,qw]}
  *.taught.json   taught points: part, frame (tracker|object), points
  *.trace.json    execution trace: event array

On failure nothing is written and a single line `error[Category]: message`
is printed to stderr; each category has its own exit code.";

#[derive(Debug, Parser)]
#[command(name = "skillcell", version, about = "Skill-based robot task programming", after_help = FILE_CONVENTIONS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile an assembly and a task plan into a control recipe and the
    /// localization recipes it references.
    Plan(PlanArgs),
    /// Embed a task plan's skill sequence into an assembly file.
    Annotate(AnnotateArgs),
    /// Read the skill sequence embedded in an assembly file as a task plan.
    Extract(ExtractArgs),
    /// Generate the localization recipe of one part.
    Locgen(LocgenArgs),
    /// Serve a simulated cell over TCP until interrupted.
    ServeCell(ServeArgs),
    /// Execute a control recipe and write the execution trace.
    Run(RunArgs),
    /// Compute the robot ← tracker transform from point pairs.
    Calibrate(CalibrateArgs),
    /// Turn taught points into a scan-localized task.
    Teach(TeachArgs),
    /// Check a trace against the recipe it executed.
    VerifyTrace(VerifyArgs),
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Assembly model (*.asm.json).
    #[arg(long)]
    assembly: PathBuf,
    /// Task plan (*.plan.json).
    #[arg(long)]
    plan: PathBuf,
    /// Compilation rules (*.rules.json); defaults apply when absent.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Control recipe to write; localization recipes go next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnnotateArgs {
    #[arg(long)]
    assembly: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Annotated assembly to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    assembly: PathBuf,
    /// Task plan to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LocgenArgs {
    #[arg(long)]
    assembly: PathBuf,
    /// Part id `part/instance|assembly`.
    #[arg(long)]
    part: String,
    /// Comma-separated wire names (at least three).
    #[arg(long, value_delimiter = ',', required = true)]
    wires: Vec<String>,
    /// Sampling spacing in metres.
    #[arg(long, default_value_t = skillcell_core::features::DEFAULT_SPACING)]
    spacing: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Scene options shared by `serve-cell` and `run`.
#[derive(Debug, Args)]
struct SimArgs {
    /// Noise sigma (metres) overriding every scene object's own value.
    #[arg(long)]
    sigma: Option<f64>,
    /// Seed mixed into every random draw of the simulator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Scene (*.scene.json); an empty cell when absent.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    /// Port overriding the configured endpoint's port (0 picks a free one).
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    recipe: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Cell endpoint `host:port`; defaults to the configured endpoint.
    #[arg(long, conflicts_with = "scene")]
    endpoint: Option<String>,
    /// Run against an in-process simulated cell with this scene instead of
    /// connecting to an endpoint.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    /// Reuse an earlier localization of the same part within the run.
    #[arg(long)]
    reuse_localization: bool,
    /// Feature length tolerance for matching (metres).
    #[arg(long, default_value_t = skillcell_core::localizer::DEFAULT_TOL_LEN)]
    tol_length: f64,
    /// Pairwise distance tolerance for matching (metres).
    #[arg(long, default_value_t = skillcell_core::localizer::DEFAULT_TOL_DIST)]
    tol_distance: f64,
    /// Trace to write (*.trace.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// Transform to write (*.xf.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TeachArgs {
    /// Taught points (*.taught.json).
    #[arg(long)]
    points: PathBuf,
    /// Robot ← tracker transform (*.xf.json); the configured one when absent.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    /// Scene giving the object's camera-frame pose during teaching.
    #[arg(long)]
    scene: PathBuf,
    /// Localization recipe of the taught part; defaults to the one the
    /// scene references.
    #[arg(long)]
    localization: Option<PathBuf>,
    /// Tool orientation at every path point, object frame (*.xf.json);
    /// tool-down when absent.
    #[arg(long)]
    orientation: Option<PathBuf>,
    #[arg(long, default_value_t = skillcell_core::planner::DEFAULT_SPEED)]
    speed: f64,
    #[arg(long, default_value = "taught_scan")]
    name: String,
    /// Control recipe to write; the localization recipe is copied next to it.
    #[arg(long)]
    out: PathBuf,
    /// Also write the equivalent task plan.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    recipe: PathBuf,
}

/// Parse `argv` (including the program name), run the command and return
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            let err = CliError::new("UsageError", first.trim_start_matches("error: "));
            eprintln!("{err}");
            return err.exit_code();
        }
    };
    let result = match cli.command {
        Command::Plan(a) => commands::plan(a),
        Command::Annotate(a) => commands::annotate(a),
        Command::Extract(a) => commands::extract(a),
        Command::Locgen(a) => commands::locgen(a),
        Command::ServeCell(a) => commands::serve_cell(a),
        Command::Run(a) => commands::run(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Teach(a) => commands::teach(a),
        Command::VerifyTrace(a) => commands::verify_trace(a),
    };
    match result {
        Ok(lines) => {
            let mut out = std::io::stdout().lock();
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
