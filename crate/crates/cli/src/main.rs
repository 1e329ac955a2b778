use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qmlab_cli::config::{parse_config, ConfigErrors};
use qmlab_cli::pipeline::{run_pipeline, Command, Status};

#[derive(Parser)]
#[command(name = "qmlab", version, about = "Quasimode lab for integrable model operators on tori")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Evaluate the structural hypotheses on omega and the Hessian.
    CheckHypotheses(Opts),
    /// Compute the unimodular splitting and the resonant mode.
    Split(Opts),
    /// Build the factory quasimode family and write it to disk.
    BuildQuasimode(Opts),
    /// Run every quasimode, Galerkin and partial-inverse check.
    Verify(Opts),
    /// Compute the coherent-state mass map and wavefront verdicts.
    Wavefront(Opts),
    /// Run all stages.
    All(Opts),
}

#[derive(Args)]
struct Opts {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dyadic ladder `a..b` (overrides `ladder`).
    #[arg(long)]
    ladder: Option<String>,
    /// RNG seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, opts) = match cli.command {
        Sub::CheckHypotheses(o) => (Command::CheckHypotheses, o),
        Sub::Split(o) => (Command::Split, o),
        Sub::BuildQuasimode(o) => (Command::BuildQuasimode, o),
        Sub::Verify(o) => (Command::Verify, o),
        Sub::Wavefront(o) => (Command::Wavefront, o),
        Sub::All(o) => (Command::All, o),
    };
    match run(command, opts) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command, opts: Opts) -> Result<u8, String> {
    let text = std::fs::read_to_string(&opts.config)
        .map_err(|e| format!("cannot read {}: {e}", opts.config.display()))?;
    let mut cfg = parse_config(&text).map_err(|e: ConfigErrors| format!("invalid configuration:\n{e}"))?;
    if let Some(l) = opts.ladder {
        cfg.ladder = l;
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let out = opts.out.unwrap_or_else(|| PathBuf::from(&cfg.out));
    cfg.out = out.display().to_string();
    let summary = run_pipeline(&cfg, command, &out).map_err(|e| e.to_string())?;
    for f in &summary.failures {
        match &f.hypothesis {
            Some(h) => eprintln!("FAIL {} {}: {}", h, f.check, f.message),
            None => eprintln!("FAIL {}: {}", f.check, f.message),
        }
    }
    let word = match summary.status {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::NoChecks => "no checks requested",
    };
    println!("{}: {word} (report in {})", command.name(), out.join("report.json").display());
    Ok(summary.exit_code() as u8)
}
