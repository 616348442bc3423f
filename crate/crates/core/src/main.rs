//! `flowlabel` — command-line front end for the auto-labeling pipeline.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 internal error. Logging is controlled by the `FLOWLABEL_LOG`
//! environment variable (`error`, `warn`, `info`, `debug`, `trace`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use flowlabel::pipeline::{load_config, run_eval, run_flow, run_gen, run_label, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "flowlabel", version, about = "Unsupervised auto labeling of LiDAR sequences")]
struct Cli {
    /// Pipeline configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Sequence directory (frames, poses, metadata).
    #[arg(long, global = true)]
    seq: Option<PathBuf>,

    /// Output directory; falls back to `out` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic scene described by the `[scene]` block.
    Gen,
    /// Run the full pipeline: preprocess, flow, proposals, tracks, boxes.
    Label,
    /// Run preprocessing and flow estimation only.
    Flow,
    /// Score a labeling run against the sequence's ground truth.
    Eval,
}

fn require<T>(value: Option<T>, what: &str) -> Result<T, PipelineError> {
    value.ok_or_else(|| PipelineError::Usage(format!("{what} is required for this command")))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| PipelineError::Usage(format!("thread pool: {e}")))?;
    }
    let out = cli.out.or_else(|| cfg.out.clone());

    match cli.command {
        Command::Gen => {
            let out = require(out, "--out (or `out` in the configuration)")?;
            run_gen(&cfg, &out)?;
            println!("wrote sequence to {}", out.display());
        }
        Command::Label => {
            let seq = require(cli.seq, "--seq")?;
            let out = require(out, "--out (or `out` in the configuration)")?;
            let manifest = run_label(&cfg, &seq, &out)?;
            println!(
                "labeled {} frames: {} tracks, {} rows -> {}",
                manifest.frames,
                manifest.tracks,
                manifest.label_rows,
                out.display()
            );
        }
        Command::Flow => {
            let seq = require(cli.seq, "--seq")?;
            let out = require(out, "--out (or `out` in the configuration)")?;
            let manifest = run_flow(&cfg, &seq, &out)?;
            println!("estimated flow for {} frames -> {}", manifest.frames, out.display());
        }
        Command::Eval => {
            let seq = require(cli.seq, "--seq")?;
            let run_dir = require(out, "--out (the directory of a labeling run)")?;
            let report = run_eval(&cfg, &seq, &run_dir, true)?;
            let flow_note = match &report.flow {
                Some(f) => format!(", EPE3D {:.4} m, mIoU {:.3}", f.epe3d_m, f.miou),
                None => String::new(),
            };
            println!(
                "AP {:.3}, precision {:.3}, recall {:.3}{} -> {}",
                report.detection.ap,
                report.detection.precision,
                report.detection.recall,
                flow_note,
                run_dir.join("report.json").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLOWLABEL_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
