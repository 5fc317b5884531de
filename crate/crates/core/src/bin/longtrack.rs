//! `longtrack track | eval | synth`
//!
//! Exit codes: 0 ok, 1 internal error, 2 input error, 3 evaluation mismatch.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use longtrack::bbox::BoundingBox;
use longtrack::config::TrackerConfig;
use longtrack::eval::evaluate;
use longtrack::sequence::{parse_box, synthesize, Scenario, Sequence, SynthParams};
use longtrack::tracker::run_sequence;
use longtrack::{results, Error};

#[derive(Parser)]
#[command(name = "longtrack", version, about = "Long-term visual tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a target through an OTB-layout sequence and write results.csv.
    Track(TrackArgs),
    /// Compare tracked boxes with ground truth and write curve CSVs.
    Eval {
        /// results.csv, or any x,y,w,h box file.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        groundtruth: PathBuf,
        /// Directory for precision.csv, success.csv and summary.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate a synthetic sequence with exact ground truth.
    Synth {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrackArgs {
    /// Sequence directory containing img/ and optionally groundtruth_rect.txt.
    #[arg(long)]
    seq: PathBuf,
    /// Initial box x,y,w,h; defaults to the first ground-truth row.
    #[arg(long, value_parser = parse_init)]
    init: Option<BoundingBox>,
    /// Output file; defaults to <seq>/results.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. --set t_rd=0.2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory of per-frame .mlhf deep-feature files (enables 4-layer mode).
    #[arg(long)]
    deep_features: Option<PathBuf>,
    #[arg(long)]
    no_redetection: bool,
    #[arg(long)]
    no_scale: bool,
}

fn parse_init(s: &str) -> Result<BoundingBox, String> {
    let b = parse_box(s)?;
    if !b.is_valid() {
        return Err(format!("box {s:?} must have positive width and height"));
    }
    Ok(b)
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AtFrame { source, .. } => exit_code(source),
        Error::Input(_) | Error::Resource { .. } | Error::Format(_) | Error::Config(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn track(args: TrackArgs) -> Result<(), Error> {
    let TrackArgs { seq, init, out, config, overrides, seed, deep_features, no_redetection, no_scale } = args;
    let mut cfg = match config {
        Some(path) => TrackerConfig::load(path)?,
        None => TrackerConfig::default(),
    };
    for o in &overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override {o:?} is not KEY=VALUE")))?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.enable_redetection &= !no_redetection;
    cfg.enable_scale &= !no_scale;
    cfg.validate()?;

    let sequence = Sequence::open(&seq)?;
    let init = match init {
        Some(b) => b,
        None => *sequence
            .groundtruth()?
            .first()
            .ok_or_else(|| Error::Input("ground truth is empty; pass --init".into()))?,
    };
    let out = out.unwrap_or_else(|| seq.join("results.csv"));
    let tracked = run_sequence(sequence.iter_frames(), init, cfg, deep_features.as_deref())?;
    results::write_csv(&out, &tracked)?;
    println!("tracked {} frames -> {}", tracked.len(), out.display());
    Ok(())
}

fn eval(results_path: PathBuf, groundtruth: PathBuf, out: PathBuf) -> Result<ExitCode, Error> {
    let preds = results::read_boxes(&results_path)?;
    let gts = longtrack::sequence::read_groundtruth(&groundtruth)?;
    if preds.len() != gts.len() {
        eprintln!("error: {} has {} rows but {} has {}", results_path.display(), preds.len(), groundtruth.display(), gts.len());
        return Ok(ExitCode::from(3));
    }
    let e = evaluate(&preds, &gts)?;
    e.write_csv(&out)?;
    println!("precision@20={:.3} auc={:.3}", e.precision_score, e.auc);
    if e.frames_skipped > 0 {
        println!("skipped {} frames with absent ground truth", e.frames_skipped);
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(scenario: Scenario, frames: Option<usize>, seed: u64, out: PathBuf) -> Result<(), Error> {
    let mut params = SynthParams::new(scenario);
    params.seed = seed;
    if let Some(n) = frames {
        if n == 0 {
            return Err(Error::Input("--frames must be positive".into()));
        }
        params.frames = n;
    }
    let s = synthesize(&params);
    s.write(&out)?;
    println!("wrote {} {} frames to {}", s.frames.len(), scenario, out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Track(args) => track(args).map(|_| ExitCode::SUCCESS),
        Command::Eval { results, groundtruth, out } => eval(results, groundtruth, out),
        Command::Synth { scenario, frames, seed, out } => synth(scenario, frames, seed, out).map(|_| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit_code(&e))
    })
}
