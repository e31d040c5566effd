use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use clipvis_cli::commands::{self, Outcome};
use clipvis_core::PropagationMode;

/// Clip-track propagation, linking, and video-instance evaluation toolkit.
#[derive(Parser)]
#[command(name = "clipvis", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// How simulated tracks treat frames without a detection.
#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    /// Tracks carry ground-truth masks at every frame the object occupies.
    Perfect,
    /// Tracks carry empty masks at frames where the object went undetected.
    Strict,
}

impl From<Mode> for PropagationMode {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Perfect => PropagationMode::Perfect,
            Mode::Strict => PropagationMode::Strict,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene: ground truth plus simulated clip tracks.
    Synth {
        /// Scene description file.
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Directory for gt.txt and tracks.txt.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overrides the seed in the scene file.
        #[arg(long)]
        seed: Option<u64>,
        /// Clip half-window T (clips span 2T+1 frames).
        #[arg(long, default_value_t = 6)]
        half_window: usize,
        #[arg(long, value_enum, default_value_t = Mode::Perfect)]
        mode: Mode,
    },
    /// Propagate center-frame masks across a clip and write the tracks.
    Propagate {
        /// Per-frame feature tensors for the whole video.
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        /// Center-frame instance masks and class scores.
        #[arg(long, value_name = "FILE")]
        masks: PathBuf,
        /// Convolution parameters; mutually exclusive with --seed.
        #[arg(long, value_name = "FILE")]
        params: Option<PathBuf>,
        /// Seed for random parameters (default 0 when --params is absent).
        #[arg(long)]
        seed: Option<u64>,
        /// Clip half-window T (clips span 2T+1 frames).
        #[arg(long, default_value_t = 6)]
        half_window: usize,
        /// Output track file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Link clip tracks into video-level instances.
    Link {
        /// Input track file.
        #[arg(long, value_name = "FILE")]
        tracks: PathBuf,
        /// Minimum id score for joining an existing identity.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output result file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score predictions against ground truth.
    Eval {
        /// Predicted instances.
        #[arg(long, value_name = "FILE")]
        results: PathBuf,
        /// Ground-truth instances.
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
        /// Optional key-value report file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Render predicted instances as one graymap image per frame.
    Render {
        /// Predicted instances.
        #[arg(long, value_name = "FILE")]
        results: PathBuf,
        /// Directory for the .pgm frames.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Write ASCII (P2) graymaps instead of binary (P5).
        #[arg(long)]
        ascii: bool,
    },
    /// Tabulate identity linking across clip half-windows and detection gaps.
    Sweep {
        /// Single-object scene description file.
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Half-windows 1..=N to test.
        #[arg(long, default_value_t = 8, value_name = "N")]
        max_half_window: usize,
        /// Detection gaps 1..=N to test.
        #[arg(long, default_value_t = 12, value_name = "N")]
        max_gap: usize,
        /// First frame of the forced detection gap.
        #[arg(long, default_value_t = 2)]
        gap_start: usize,
        /// Minimum id score for joining an existing identity.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = Mode::Perfect)]
        mode: Mode,
        /// Optional sweep table file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn run(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Synth {
            config,
            out,
            seed,
            half_window,
            mode,
        } => commands::synth(&config, &out, seed, half_window, mode.into()),
        Command::Propagate {
            features,
            masks,
            params,
            seed,
            half_window,
            out,
        } => commands::propagate(
            &features,
            &masks,
            params.as_deref(),
            seed,
            half_window,
            &out,
        ),
        Command::Link {
            tracks,
            threshold,
            out,
        } => commands::link(&tracks, threshold, &out),
        Command::Eval { results, gt, out } => commands::eval(&results, &gt, out.as_deref()),
        Command::Render {
            results,
            out,
            ascii,
        } => commands::render(&results, &out, ascii),
        Command::Sweep {
            config,
            max_half_window,
            max_gap,
            gap_start,
            threshold,
            mode,
            out,
        } => commands::sweep(
            &config,
            max_half_window,
            max_gap,
            gap_start,
            threshold,
            mode.into(),
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            err.exit()
        }
        Err(err) => {
            // Reduce clap's multi-line usage text to the single-line contract.
            let text = err.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(outcome) => {
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            print!("{}", outcome.stdout);
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
