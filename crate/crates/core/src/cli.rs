//! The `lgs` command-line driver.
//!
//! Five subcommands, one per pipeline stage, each reading and writing
//! inspectable files: `simulate`, `temporalize`, `train`, `generate`,
//! `evaluate`. Progress goes to stderr; output paths go to stdout.
//!
//! Exit codes: 0 success, 1 validation or config error, 2 I/O error,
//! 3 numeric abort during training.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::codec::{fit_codec, Codec};
use crate::evaluate::{build_report, AgeGroup};
use crate::fsutil::write_atomic;
use crate::ingest::{awake_fraction_at, parse_events, write_events_csv, IngestOptions, DEFAULT_SLEEP_ACTIVITY};
use crate::simulate::{default_population, simulate_population, PopulationConfig};
use crate::temporalize::{build_feature_matrix, FeatureMatrix};
use crate::wgan::{
    encode_training_matrix, load_checkpoint, loss_log_csv, sample, save_checkpoint, GanConfig, Trainer, WganError,
};
use crate::WINDOW_MINUTES;

#[derive(Debug, Parser)]
#[command(
    name = "lgs",
    version,
    about = "Sleep-diary temporalization, WGAN synthesis and evaluation"
)]
pub struct Cli {
    /// Seed for the stage's random draws; overrides any seed in --config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config for `simulate` (population) or `train` (GAN).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Report errors on stderr as one JSON object.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic population as an event CSV.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// Override the configured population size.
        #[arg(long)]
        n_persons: Option<usize>,
    },
    /// Convert an event CSV into the 34-column feature matrix CSV.
    Temporalize {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = DEFAULT_SLEEP_ACTIVITY)]
        sleep_activity: String,
    },
    /// Train the WGAN on a feature matrix CSV.
    Train {
        #[arg(long)]
        matrix: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Loss log CSV (`iteration,wasserstein_estimate`).
        #[arg(long)]
        loss_log: Option<PathBuf>,
        /// Codec JSON output; defaults to `<out>.codec.json`.
        #[arg(long)]
        codec_out: Option<PathBuf>,
        /// Override the configured number of generator iterations.
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Sample synthetic rows from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Codec JSON; defaults to `<checkpoint>.codec.json`.
        #[arg(long)]
        codec: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a real and a synthetic feature matrix.
    Evaluate {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Age groups for quantile curves, e.g. `15-24`.
        #[arg(long = "group", default_values_t = vec!["15-24".to_string()])]
        groups: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Io => 2,
            ErrorKind::Numeric => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Io => "io",
            ErrorKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: ErrorKind,
    pub messages: Vec<String>,
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            messages: vec![msg.into()],
        }
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Io,
            messages: vec![format!("{}: {e}", path.display())],
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.messages.join("\n"))
    }
}

impl From<WganError> for CliError {
    fn from(e: WganError) -> Self {
        let kind = match &e {
            WganError::NonFiniteGradient { .. } => ErrorKind::Numeric,
            WganError::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        };
        Self {
            kind,
            messages: vec![e.to_string()],
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_matrix(path: &Path) -> Result<FeatureMatrix, CliError> {
    FeatureMatrix::from_csv(&read_input(path)?).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

// Progress and path reporting is best-effort; a closed pipe must not turn
// a successful run into a failure.
macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{ let _ = writeln!($w, $($arg)*); }};
}

fn cmd_simulate(cli: &Cli, io: &mut Io, out: &Path, n_persons: Option<usize>) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(p) => PopulationConfig::from_json(&read_config(p)?)
            .map_err(|e| CliError::validation(format!("config {}: {e}", p.display())))?,
        None => default_population(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = n_persons {
        config.n_persons = n;
    }
    let persons = simulate_population(&config).map_err(|e| CliError::validation(e.to_string()))?;
    let csv = write_events_csv(&persons);
    write_output(out, csv.as_bytes())?;
    let rows = csv.lines().count() - 1;
    say!(io.err, "simulated {} persons, {rows} event rows", persons.len());
    say!(io.out, "{}", out.display());
    Ok(())
}

fn cmd_temporalize(io: &mut Io, events: &Path, out: &Path, sleep_activity: &str) -> Result<(), CliError> {
    let text = read_input(events)?;
    let opts = IngestOptions {
        sleep_activity: sleep_activity.to_string(),
    };
    let parsed = parse_events(&text, &opts).map_err(|errs| CliError {
        kind: ErrorKind::Validation,
        messages: errs.0.iter().map(|e| format!("{}: {e}", events.display())).collect(),
    })?;
    let matrix = build_feature_matrix(&parsed.persons).map_err(|e| CliError::validation(e.to_string()))?;
    write_output(out, matrix.to_csv().as_bytes())?;
    let awake = awake_fraction_at(&parsed.persons, WINDOW_MINUTES).map_err(|e| CliError::validation(e.to_string()))?;
    say!(
        io.err,
        "{} persons, {} non-sleep rows dropped, awake at window end: {awake:.4}",
        parsed.persons.len(),
        parsed.dropped_rows
    );
    say!(io.out, "{}", out.display());
    Ok(())
}

fn cmd_train(
    cli: &Cli,
    io: &mut Io,
    matrix_path: &Path,
    out: &Path,
    loss_log: Option<&Path>,
    codec_out: Option<&Path>,
    iterations: Option<u64>,
) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(p) => serde_json::from_str::<GanConfig>(&read_config(p)?)
            .map_err(|e| CliError::validation(format!("config {}: {e}", p.display())))?,
        None => GanConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = iterations {
        config.iterations = n;
    }
    let matrix = read_matrix(matrix_path)?;
    let codec = fit_codec(&matrix).map_err(|e| CliError::validation(e.to_string()))?;
    let data = encode_training_matrix(&codec, &matrix)?;

    let mut trainer = Trainer::new(&data, &config, &codec.hash())?;
    let mut log = Vec::with_capacity(config.iterations as usize);
    let report_every = (config.iterations / 10).max(1);
    while trainer.iteration() < config.iterations {
        let entry = trainer.step()?;
        if (entry.iteration + 1) % report_every == 0 {
            say!(
                io.err,
                "iteration {}/{}: wasserstein estimate {:.6}",
                entry.iteration + 1,
                config.iterations,
                entry.wasserstein_estimate
            );
        }
        log.push(entry);
    }
    let checkpoint = trainer.into_checkpoint();

    let codec_path = codec_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| sibling(out, ".codec.json"));
    write_output(&codec_path, codec.to_json().as_bytes())?;
    if let Some(p) = loss_log {
        write_output(p, loss_log_csv(&log).as_bytes())?;
    }
    save_checkpoint(&checkpoint, out).map_err(|e| match e {
        WganError::Io(io_err) => CliError::io(out, io_err),
        other => other.into(),
    })?;
    say!(io.out, "{}", out.display());
    say!(io.out, "{}", codec_path.display());
    if let Some(p) = loss_log {
        say!(io.out, "{}", p.display());
    }
    Ok(())
}

fn cmd_generate(
    cli: &Cli,
    io: &mut Io,
    checkpoint: &Path,
    codec: Option<&Path>,
    n: usize,
    out: &Path,
) -> Result<(), CliError> {
    let cp = load_checkpoint(checkpoint).map_err(|e| match e {
        WganError::Io(io_err) => CliError::io(checkpoint, io_err),
        other => CliError::validation(format!("{}: {other}", checkpoint.display())),
    })?;
    let codec_path = codec
        .map(Path::to_path_buf)
        .unwrap_or_else(|| sibling(checkpoint, ".codec.json"));
    let codec = Codec::from_json(&read_input(&codec_path)?)
        .map_err(|e| CliError::validation(format!("{}: {e}", codec_path.display())))?;
    let matrix = sample(&cp, &codec, n, cli.seed.unwrap_or(0))?;
    write_output(out, matrix.to_csv().as_bytes())?;
    say!(io.err, "generated {} rows", matrix.len());
    say!(io.out, "{}", out.display());
    Ok(())
}

fn cmd_evaluate(io: &mut Io, real: &Path, synth: &Path, out_dir: &Path, groups: &[String]) -> Result<(), CliError> {
    let groups = groups
        .iter()
        .map(|g| g.parse::<AgeGroup>().map_err(|e| CliError::validation(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let real = read_matrix(real)?;
    let synth = read_matrix(synth)?;
    let report = build_report(&real, &synth, &groups).map_err(|e| CliError::validation(e.to_string()))?;
    let files = report.write_to_dir(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    say!(
        io.err,
        "mean-per-hour MAE {:.4} min, max covariate deviation {:.4}",
        report.metrics.mean_per_hour_mae,
        report.metrics.max_covariate_deviation
    );
    for f in files {
        say!(io.out, "{}", out_dir.join(f).display());
    }
    Ok(())
}

/// Execute one parsed invocation.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut io = Io { out, err };
    match &cli.command {
        Command::Simulate { out, n_persons } => cmd_simulate(cli, &mut io, out, *n_persons),
        Command::Temporalize {
            events,
            out,
            sleep_activity,
        } => cmd_temporalize(&mut io, events, out, sleep_activity),
        Command::Train {
            matrix,
            out,
            loss_log,
            codec_out,
            iterations,
        } => cmd_train(
            cli,
            &mut io,
            matrix,
            out,
            loss_log.as_deref(),
            codec_out.as_deref(),
            *iterations,
        ),
        Command::Generate {
            checkpoint,
            codec,
            n,
            out,
        } => cmd_generate(cli, &mut io, checkpoint, codec.as_deref(), *n, out),
        Command::Evaluate {
            real,
            synth,
            out_dir,
            groups,
        } => cmd_evaluate(&mut io, real, synth, out_dir, groups),
    }
}

/// Execute and report errors; returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            if cli.json_errors {
                let doc = serde_json::json!({
                    "error": {
                        "kind": e.kind.name(),
                        "exit_code": e.kind.exit_code(),
                        "messages": e.messages,
                    }
                });
                let _ = writeln!(err, "{doc}");
            } else {
                for m in &e.messages {
                    let _ = writeln!(err, "error: {m}");
                }
            }
            e.kind.exit_code()
        }
    }
}
