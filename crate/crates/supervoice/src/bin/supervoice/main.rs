//! Batch front end for the toolkit. Every consumer is a script or a test
//! harness, so output is tab-separated, deterministic for a given seed, and
//! the exit code carries the verdict: 0 success or accept, 1 usage or
//! runtime error, 2 spoof or rejected claim.

mod eval;
mod ops;
mod settings;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::Settings;

const LAYERING_HELP: &str = "\
Configuration:
  Tunable options resolve in this order: command-line flag, then the
  environment variable SUPERVOICE_<KEY> (key uppercased), then a `key=value`
  line in the config file (./supervoice.conf unless --config points
  elsewhere), then the built-in default. Recognized keys: epochs, batch,
  lr, seed, windows, gamma, jobs, enroll_n. Lines starting with # are
  comments; unknown keys are ignored.

Exit codes:
  0  success / accept / live
  1  usage or runtime error
  2  spoof verdict or rejected claim";

#[derive(Parser)]
#[command(
    name = "supervoice",
    version,
    about = "Ultrasound-aware speaker verification and replay detection",
    after_help = LAYERING_HELP
)]
struct Cli {
    /// key=value config file (default: ./supervoice.conf when present)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for file-level parallelism (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus of genuine and replayed utterances
    Synth(SynthArgs),
    /// Trim silence from WAV files and optionally downsample them
    Preprocess(PreprocessArgs),
    /// Export a spectrogram as a binary file
    Spectrogram(SpectrogramArgs),
    /// Replay-gate report per file: r1, r2, verdict
    Liveness(LivenessArgs),
    /// Train the two-stream embedding model from a corpus manifest
    Train(TrainArgs),
    /// Add a speaker's utterances to an enrollment store
    Enroll(EnrollArgs),
    /// Check claimed utterances against an enrolled speaker
    Verify(VerifyArgs),
    /// Score a whole corpus: verification DET/EER plus liveness CER/EER
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of speakers
    #[arg(long)]
    speakers: usize,

    /// Utterances per speaker (each also rendered through both replay chains)
    #[arg(long = "utt")]
    utt: usize,

    /// Corpus seed; the same seed reproduces the corpus byte for byte
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,

    /// Utterance length in seconds
    #[arg(long, default_value_t = 1.5)]
    duration: f64,

    /// Capture sample rate in Hz
    #[arg(long, default_value_t = 192_000)]
    rate: u32,
}

#[derive(Args)]
struct PreprocessArgs {
    /// WAV files to process
    files: Vec<PathBuf>,

    /// Also process every file listed in this corpus manifest
    #[arg(long, value_name = "TSV")]
    manifest: Option<PathBuf>,

    /// Directory the processed files are written to
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,

    /// Downsample to this rate after trimming (must divide the input rate)
    #[arg(long, value_name = "HZ")]
    target_rate: Option<u32>,
}

#[derive(Args)]
struct SpectrogramArgs {
    /// Input WAV file
    input: PathBuf,

    /// Output path for the binary spectrogram
    #[arg(long)]
    out: PathBuf,

    /// Keep only bins at or above this frequency (pairs with --band-high)
    #[arg(long, value_name = "HZ")]
    band_low: Option<f64>,

    /// Keep only bins below this frequency (pairs with --band-low)
    #[arg(long, value_name = "HZ")]
    band_high: Option<f64>,

    /// Use the fine-time analysis preset instead of the default window
    #[arg(long)]
    fine_time: bool,
}

#[derive(Args)]
struct LivenessArgs {
    /// WAV files to judge
    files: Vec<PathBuf>,

    /// Also judge every file listed in this corpus manifest
    #[arg(long, value_name = "TSV")]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus manifest; only its genuine utterances are used
    #[arg(long, value_name = "TSV")]
    manifest: PathBuf,

    /// Where the trained checkpoint is written
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    /// Passes over the training windows
    #[arg(long)]
    epochs: Option<usize>,

    /// Windows per optimization step
    #[arg(long)]
    batch: Option<usize>,

    /// RMSprop learning rate
    #[arg(long)]
    lr: Option<f64>,

    /// Seed for parameter init and epoch shuffling
    #[arg(long)]
    seed: Option<u64>,

    /// Windows kept per utterance, evenly spaced; 0 keeps all of them
    #[arg(long)]
    windows: Option<usize>,
}

#[derive(Args)]
struct EnrollArgs {
    /// Enrollment store, created if missing
    #[arg(long, value_name = "FILE")]
    store: PathBuf,

    /// Model checkpoint the embeddings come from
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    /// Speaker the utterances belong to
    #[arg(long)]
    speaker: String,

    /// Windows embedded per utterance; 0 embeds all of them
    #[arg(long)]
    windows: Option<usize>,

    /// Enrollment WAV files (all must pass the replay gate)
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Enrollment store to check against
    #[arg(long, value_name = "FILE")]
    store: PathBuf,

    /// Model checkpoint; must match the one the store was built with
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    /// Claimed speaker
    #[arg(long)]
    speaker: String,

    /// Acceptance threshold on mean cosine similarity (no built-in default;
    /// supply it here, via SUPERVOICE_GAMMA, or in the config file)
    #[arg(long)]
    gamma: Option<f64>,

    /// Windows embedded per utterance; 0 embeds all of them
    #[arg(long)]
    windows: Option<usize>,

    /// Query WAV files
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus manifest to evaluate on
    #[arg(long, value_name = "TSV")]
    manifest: PathBuf,

    /// Trained model checkpoint
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    /// Genuine utterances enrolled per speaker; the rest become trials
    #[arg(long)]
    enroll_n: Option<usize>,

    /// Report FAR/FRR at this threshold instead of the EER point
    #[arg(long)]
    gamma: Option<f64>,

    /// Windows embedded per utterance; 0 embeds all of them
    #[arg(long)]
    windows: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own usage-error exit code is 2, which this tool
            // reserves for spoof verdicts; remap usage errors to 1.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    let settings = Settings::load(cli.config.as_deref())?;
    if let Some(jobs) = settings.resolve("jobs", cli.jobs)? {
        if jobs == 0 {
            return Err("jobs must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| format!("setting up {jobs} workers: {e}"))?;
    }
    match cli.cmd {
        Cmd::Synth(args) => ops::synth(&args, &settings),
        Cmd::Preprocess(args) => ops::preprocess(&args),
        Cmd::Spectrogram(args) => ops::spectrogram(&args),
        Cmd::Liveness(args) => ops::liveness(&args),
        Cmd::Train(args) => train::train(&args, &settings),
        Cmd::Enroll(args) => ops::enroll(&args, &settings),
        Cmd::Verify(args) => ops::verify(&args, &settings),
        Cmd::Eval(args) => eval::eval(&args, &settings),
    }
}
