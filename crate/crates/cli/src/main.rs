//! Command-line front end: scans, distributions, Bell tests, film tools.
//!
//! Every command resolves its flags and optional `--config` file into a
//! fully explicit settings object, runs, and writes CSV + JSON + a run
//! manifest next to `--out`. `rerun --manifest` replays a recorded run
//! bit-identically; `ANTIHOM_THREADS` caps internal parallelism without
//! affecting any output.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Print a line to stdout, exiting quietly if the reader went away
/// (e.g. piped into `head`).  Output files are always written before
/// any summary line, so nothing is lost.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let mut out = std::io::stdout().lock();
        if out
            .write_fmt(std::format_args!($($arg)*))
            .and_then(|()| out.write_all(b"\n"))
            .is_err()
        {
            std::process::exit(0);
        }
    }};
}
pub(crate) use say;

#[derive(Parser)]
#[command(
    name = "antihom",
    version,
    about = "Few-photon interference on lossy beamsplitters: scans, distributions, Bell tests, film design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mirror-position coincidence scan through a two-port sample
    HomScan(HomScanArgs),
    /// Output photon-number distribution at a fixed overlap
    Distribution(DistributionArgs),
    /// Polarization fringes and the Bell parameter
    BellScan(BellScanArgs),
    /// Thin-film sample tools
    Stack(StackArgs),
    /// Evolve an occupation through an arbitrary mode map
    Fock(FockArgs),
    /// Re-execute a recorded run manifest
    Rerun(RerunArgs),
}

#[derive(Args)]
struct HomScanArgs {
    /// Pair phase in radians; also accepts "pi", "-pi", "0.5pi"
    #[arg(long)]
    phi: Option<String>,
    /// Preset (lossless50, sin100nm, lossy-eq6-plus, lossy-eq6-minus,
    /// identity, qsw) or a JSON sample file
    #[arg(long)]
    sample: Option<String>,
    /// Cosine-mode amplitude "re[,im]" for the qsw preset
    #[arg(long)]
    sc: Option<String>,
    /// Sine-mode amplitude "re[,im]" for the qsw preset
    #[arg(long)]
    ss: Option<String>,
    /// First mirror position in um
    #[arg(long = "from")]
    from_um: Option<f64>,
    /// Last mirror position in um
    #[arg(long = "to")]
    to_um: Option<f64>,
    /// Number of scan points
    #[arg(long)]
    points: Option<usize>,
    /// Source center wavelength in nm
    #[arg(long)]
    wavelength: Option<f64>,
    /// Filter bandwidth (FWHM) in nm
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Mean coincidence counts at the distinguishable baseline
    #[arg(long)]
    reference_counts: Option<f64>,
    /// Synthesize Poisson counts per point
    #[arg(long)]
    noise: bool,
    /// Noise stream seed
    #[arg(long)]
    seed: Option<u64>,
    /// Materials table for stack files that name materials
    #[arg(long)]
    materials: Option<PathBuf>,
    /// Output path; the stem also names the JSON and manifest
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON settings file merged under explicit flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DistributionArgs {
    /// Pair phase in radians; also accepts "pi", "-pi", "0.5pi"
    #[arg(long)]
    phi: Option<String>,
    /// Preset or JSON sample file (see hom-scan)
    #[arg(long)]
    sample: Option<String>,
    /// Cosine-mode amplitude "re[,im]" for the qsw preset
    #[arg(long)]
    sc: Option<String>,
    /// Sine-mode amplitude "re[,im]" for the qsw preset
    #[arg(long)]
    ss: Option<String>,
    /// Temporal overlap g in [0, 1]
    #[arg(long)]
    g: Option<f64>,
    /// Wavelength in nm used to resolve stack samples
    #[arg(long)]
    wavelength: Option<f64>,
    /// Materials table for stack files that name materials
    #[arg(long)]
    materials: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct BellScanArgs {
    /// Pair phase in radians; also accepts "pi", "-pi", "0.5pi"
    #[arg(long)]
    phi: Option<String>,
    /// Unpolarized background fraction in [0, 1]
    #[arg(long)]
    mix: Option<f64>,
    /// Analyzer grid size over one fringe period
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct StackArgs {
    #[command(subcommand)]
    action: StackAction,
}

#[derive(Subcommand)]
enum StackAction {
    /// Complex response and power budget of a layer stack
    Response(StackResponseArgs),
    /// Fit a stack template's free thicknesses to target amplitudes
    Design(StackDesignArgs),
}

#[derive(Args)]
struct StackResponseArgs {
    /// Stack file: JSON list of layers, or {"layers": [...], ...}
    #[arg(long)]
    file: Option<PathBuf>,
    /// Wavelength in nm
    #[arg(long)]
    wavelength: Option<f64>,
    /// Refractive index on the input side
    #[arg(long)]
    ambient_in: Option<f64>,
    /// Refractive index on the output side
    #[arg(long)]
    ambient_out: Option<f64>,
    /// Materials table for files that name materials
    #[arg(long)]
    materials: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct StackDesignArgs {
    /// Design template JSON file
    #[arg(long)]
    template: Option<PathBuf>,
    /// Target amplitudes: eq6-plus, eq6-minus, or lossless50
    #[arg(long)]
    target: Option<String>,
    /// Materials table for templates that name materials
    #[arg(long)]
    materials: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FockArgs {
    /// JSON file {"matrix": [[[re, im], ...], ...]}
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Input occupation per mode, e.g. "1,1" or "1,1,0"
    #[arg(long)]
    occupation: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RerunArgs {
    /// Manifest file of an earlier run
    #[arg(long)]
    manifest: PathBuf,
    /// Redirect outputs to a new stem instead of the recorded paths
    #[arg(long)]
    out: Option<PathBuf>,
}

fn setup_threads() -> antihom::Result<()> {
    let Ok(raw) = std::env::var("ANTIHOM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().map_err(|_| {
        antihom::Error::Config(format!("ANTIHOM_THREADS must be a positive integer, got {raw:?}"))
    })?;
    if threads == 0 {
        return Err(antihom::Error::Config(
            "ANTIHOM_THREADS must be a positive integer, got 0".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| antihom::Error::Config(format!("thread pool setup failed: {e}")))
}

fn run(cli: Cli) -> antihom::Result<()> {
    match cli.command {
        Command::HomScan(args) => commands::hom_scan_cmd(args),
        Command::Distribution(args) => commands::distribution_cmd(args),
        Command::BellScan(args) => commands::bell_scan_cmd(args),
        Command::Stack(args) => match args.action {
            StackAction::Response(args) => commands::stack_response_cmd(args),
            StackAction::Design(args) => commands::stack_design_cmd(args),
        },
        Command::Fock(args) => commands::fock_cmd(args),
        Command::Rerun(args) => commands::rerun_cmd(args),
    }
}

fn main() -> ExitCode {
    if let Err(e) = setup_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                antihom::Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
