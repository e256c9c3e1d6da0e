//! `fgsum` command line: list targets, verify one, or run the suite.

use clap::{Args, Parser, Subcommand};
use fgsum::runner::{list_text, run_suite, run_target, suite_json, suite_text, RunConfig};
use fgsum::FgError;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fgsum", version, about = "Numerical verification of (f,g)-orthogonal pairs, inversions and summations")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List every registered target.
    List,
    /// Run one target.
    Verify { target: String },
    /// Run every target.
    Suite,
}

#[derive(Args)]
struct Opts {
    /// Base seed (default 42, or FG_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Random samples per pair check.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Relative tolerance for every target (replaces per-target defaults).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Factors kept in infinite products.
    #[arg(long, global = true)]
    trunc_products: Option<usize>,
    /// Bilateral sums run over -N..=N.
    #[arg(long, global = true)]
    trunc_series: Option<usize>,
    /// Tail bound for truncated products.
    #[arg(long, global = true)]
    tail_tol: Option<f64>,
    /// Side length of inversion matrices.
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Parameter override, e.g. catalog.gosper.x=1.4 or pair.S2.d=3,0.5.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// key=value configuration file.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// JSON output.
    #[arg(long, global = true, conflicts_with = "text")]
    json: bool,
    /// Text output (default).
    #[arg(long, global = true)]
    text: bool,
    /// Also register the non-orthogonal negative control.
    #[arg(long, global = true)]
    adversarial: bool,
}

fn build_config(o: &Opts) -> Result<RunConfig, FgError> {
    let mut cfg = RunConfig::default();
    if let Ok(s) = std::env::var("FG_SEED") {
        cfg.apply("seed", &s)?;
    }
    if let Some(path) = &o.config {
        let text = std::fs::read_to_string(path).map_err(|e| FgError::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_file(&text)?;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.samples {
        cfg.samples = v;
    }
    if let Some(v) = o.tol {
        cfg.tol = Some(v);
    }
    if let Some(v) = o.trunc_products {
        cfg.truncation.product_terms = v;
    }
    if let Some(v) = o.trunc_series {
        cfg.truncation.series_terms = v;
    }
    if let Some(v) = o.tail_tol {
        cfg.truncation.tail_tol = v;
    }
    if let Some(v) = o.window {
        cfg.window = v;
    }
    cfg.adversarial |= o.adversarial;
    for kv in &o.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| FgError::Config(format!("--set expects key=value, got {kv}")))?;
        cfg.apply(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(o: &Opts, body: &str) -> Result<(), FgError> {
    match &o.out {
        Some(p) => std::fs::write(p, body).map_err(|e| FgError::Config(format!("{}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<bool, FgError> {
    let o = &cli.opts;
    let cfg = build_config(o)?;
    match &cli.cmd {
        Cmd::List => {
            emit(o, &list_text(&cfg))?;
            Ok(true)
        }
        Cmd::Verify { target } => {
            let rep = run_target(target, &cfg)?;
            let body = if o.json {
                serde_json::to_string_pretty(&rep).expect("report serializes") + "\n"
            } else {
                rep.to_line() + "\n"
            };
            emit(o, &body)?;
            Ok(rep.passed())
        }
        Cmd::Suite => {
            let reports = run_suite(&cfg)?;
            let body = if o.json { suite_json(&reports) + "\n" } else { suite_text(&reports) };
            emit(o, &body)?;
            Ok(reports.iter().all(|r| r.passed()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
