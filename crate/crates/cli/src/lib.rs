//! The `uniar` command line: metric evaluation, the scanpath codec, training,
//! prediction and the mixture sampler check.

mod eval;
mod model_cmds;
pub mod overlay;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use uniar::codec::{decode_robust, encode_scanpath};
use uniar::data::io::read_scanpaths;
use uniar::{Frame, Point, Scanpath};

pub use report::{report_table, Metric};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] uniar::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "uniar", version, about = "Attention and preference prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score predicted saliency maps against ground truth.
    EvalHeatmap(eval::HeatmapArgs),
    /// Score predicted scanpaths against ground truth.
    EvalScanpath(eval::ScanpathArgs),
    /// Correlate predicted and observed ratings.
    EvalRating(eval::RatingArgs),
    /// Convert between scanpaths and token strings.
    Codec {
        #[command(subcommand)]
        op: CodecOp,
    },
    /// Train a model and write checkpoints plus a loss log.
    Train(model_cmds::TrainArgs),
    /// Run a checkpoint on one image.
    Predict(model_cmds::PredictArgs),
    /// Histogram of mixture draws with a chi-square uniformity test.
    MixtureCheck(model_cmds::MixtureArgs),
}

#[derive(Debug, Subcommand)]
enum CodecOp {
    /// Points `x,y` (or a scanpath JSONL file) to token strings.
    Encode(EncodeArgs),
    /// Token string to fixations as JSON, or `INVALID`.
    Decode(DecodeArgs),
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Frame as WIDTHxHEIGHT; required with positional points.
    #[arg(long, value_parser = parse_frame)]
    frame: Option<Frame>,
    /// Scanpath JSONL; one token string is printed per line.
    #[arg(long, conflicts_with = "points")]
    input: Option<PathBuf>,
    points: Vec<String>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long, value_parser = parse_frame)]
    frame: Frame,
    /// File with one token string per line.
    #[arg(long, conflicts_with = "tokens")]
    input: Option<PathBuf>,
    /// Token string, possibly split across several arguments.
    #[arg(allow_hyphen_values = true)]
    tokens: Vec<String>,
}

fn parse_frame(s: &str) -> Result<Frame, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w = w.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let h = h.trim().parse::<usize>().map_err(|e| e.to_string())?;
    Frame::new(w, h).map_err(|e| e.to_string())
}

fn parse_point(s: &str) -> CliResult<Point> {
    let bad = || usage(format!("point `{s}` is not `x,y`"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    let x = x.trim().parse::<f64>().map_err(|_| bad())?;
    let y = y.trim().parse::<f64>().map_err(|_| bad())?;
    Ok(Point::new(x, y))
}

fn codec(op: CodecOp) -> CliResult<String> {
    let mut out = String::new();
    match op {
        CodecOp::Encode(a) => {
            let paths: Vec<Scanpath> = match a.input {
                Some(p) => read_scanpaths(&p)?.into_iter().map(|(s, _)| s).collect(),
                None => {
                    let frame = a.frame.ok_or_else(|| usage("--frame is required with positional points"))?;
                    let pts = a.points.iter().map(|s| parse_point(s)).collect::<CliResult<Vec<_>>>()?;
                    vec![Scanpath::new(pts, frame)?]
                }
            };
            for p in &paths {
                out.push_str(&encode_scanpath(p)?.to_string());
                out.push('\n');
            }
        }
        CodecOp::Decode(a) => {
            let lines: Vec<String> = match a.input {
                Some(p) => std::fs::read_to_string(p)?.lines().map(str::to_string).collect(),
                None => vec![a.tokens.join(" ")],
            };
            for line in &lines {
                match decode_robust(line, a.frame).scanpath() {
                    Some(p) => {
                        let pts: Vec<[f64; 2]> = p.fixations().iter().map(|q| [q.x, q.y]).collect();
                        out.push_str(&serde_json::json!({ "fixations": pts }).to_string());
                    }
                    None => out.push_str("INVALID"),
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::EvalHeatmap(a) => eval::heatmap(a),
        Command::EvalScanpath(a) => eval::scanpath(a),
        Command::EvalRating(a) => eval::rating(a),
        Command::Codec { op } => codec(op),
        Command::Train(a) => model_cmds::train(a),
        Command::Predict(a) => model_cmds::predict(a),
        Command::MixtureCheck(a) => model_cmds::mixture_check(a),
    }
}

/// Runs one invocation, returning standard output text or the error.
pub fn execute<I, T>(argv: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
    dispatch(cli)
}

/// Honours `UNIAR_LOG` (error, info or debug); later calls are no-ops.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("UNIAR_LOG", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Full entry point: prints results and diagnostics and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error: {}", msg.lines().next().unwrap_or(""));
            e.exit_code()
        }
    }
}
