use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use qlbe_sim::{parse_config_for, run, Scenario};

/// Run one scenario and write `<scenario>.csv` and `summary.json`.
#[derive(Debug, Parser)]
#[command(name = "qlbe-sim", version)]
struct Args {
    /// dsf, fdt, xsec, kinetic, brownian, friction or covariance
    scenario: Scenario,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("QLBE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("QLBE_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .context("configuring the worker pool")
}

fn main_inner(args: Args) -> Result<bool> {
    init_threads()?;
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = parse_config_for(&text, Some(args.scenario))
        .or_else(|e| match (e.key.as_deref(), args.seed) {
            // a seed on the command line satisfies a missing run.seed
            (Some("run.seed"), Some(seed)) if e.line.is_none() => {
                parse_config_for(&format!("{text}\nrun.seed = {seed}\n"), Some(args.scenario))
            }
            _ => Err(e),
        })
        .with_context(|| format!("invalid config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    let summary = run(&cfg, &text, &args.out)?;
    for c in &summary.checks {
        let mark = if c.pass { "pass" } else { "FAIL" };
        eprintln!("{mark} {}: {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
    }
    Ok(summary.passed)
}

fn main() -> ExitCode {
    match main_inner(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
