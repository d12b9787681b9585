use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use covloss::config::{CdoRunConfig, RunConfig};
use covloss::orchestrator::{check_monotonicity, risk_report, run_cdo_sweep, run_sweep};
use covloss::{output, properties};

#[derive(Parser)]
#[command(name = "covloss", version, about = "Credit-loss Monte Carlo sweeps and property checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CECL/EC over the (rho_cr, rho_wwr) grid plus the monotonicity report.
    CcpSweep(CcpArgs),
    /// CDO tranche legs over the correlation grid.
    CdoSweep(CdoArgs),
    /// CECL/EC/VaR at a single correlation cell, printed as JSON.
    RiskReport(RiskArgs),
    /// Increasing-differences certificates.
    CheckProperties(PropArgs),
}

#[derive(Args)]
struct RunOverrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
}

#[derive(Args)]
struct CcpArgs {
    #[command(flatten)]
    run: RunOverrides,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated reference member ids.
    #[arg(long, value_delimiter = ',')]
    members: Option<Vec<usize>>,
    #[arg(long, default_value_t = 3.0)]
    k_sigma: f64,
}

#[derive(Args)]
struct CdoArgs {
    #[command(flatten)]
    run: RunOverrides,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    k_sigma: f64,
}

#[derive(Args)]
struct RiskArgs {
    #[command(flatten)]
    run: RunOverrides,
    #[arg(long)]
    rho_cr: f64,
    #[arg(long)]
    rho_wwr: f64,
    #[arg(long, value_delimiter = ',')]
    members: Option<Vec<usize>>,
    /// Also write risk_report.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PropArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Outcome {
    Ok,
    PropertyFailed,
}

fn load_run(o: &RunOverrides, members: &Option<Vec<usize>>) -> Result<RunConfig> {
    check_exists(&o.config)?;
    let mut cfg = RunConfig::load(&o.config)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(p) = o.paths {
        cfg.n_paths = p;
    }
    if let Some(b) = o.batches {
        cfg.n_batches = b;
    }
    if let Some(m) = members {
        cfg.reference_members = m.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_exists(path: &Path) -> Result<()> {
    if !path.is_file() {
        anyhow::bail!("config file not found: {}", path.display());
    }
    Ok(())
}

fn ccp_sweep(args: &CcpArgs) -> Result<Outcome> {
    let cfg = load_run(&args.run, &args.members)?;
    eprintln!(
        "ccp-sweep: {} paths in {} batches, seed {}, members {:?}",
        cfg.n_paths, cfg.n_batches, cfg.seed, cfg.reference_members
    );
    let sweep = run_sweep(&cfg)?;
    let valid = sweep.cells.iter().filter(|c| c.verdict.is_valid()).count();
    eprintln!("ccp-sweep: {valid} of {} cells valid", sweep.cells.len());
    let report = check_monotonicity(&sweep, args.k_sigma)?;
    for path in output::write_ccp_outputs(&args.out, &sweep, &report)? {
        eprintln!("wrote {}", path.display());
    }
    for e in &report.entries {
        println!(
            "member {:>2} {:?} {:?}: min increment {:.6e} (se {:.3e}) {}",
            e.member,
            e.axis,
            e.metric,
            e.min_increment,
            e.min_increment_stderr,
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(if report.pass { Outcome::Ok } else { Outcome::PropertyFailed })
}

fn cdo_sweep(args: &CdoArgs) -> Result<Outcome> {
    check_exists(&args.run.config)?;
    let mut cfg = CdoRunConfig::load(&args.run.config)?;
    if let Some(s) = args.run.seed {
        cfg.seed = s;
    }
    if let Some(p) = args.run.paths {
        cfg.n_paths = p;
    }
    if let Some(b) = args.run.batches {
        cfg.n_batches = b;
    }
    cfg.validate()?;
    eprintln!("cdo-sweep: {} paths in {} batches, seed {}", cfg.n_paths, cfg.n_batches, cfg.seed);
    let (hash, result) = run_cdo_sweep(&cfg, args.k_sigma)?;
    for path in output::write_cdo_outputs(&args.out, &result, &hash)? {
        eprintln!("wrote {}", path.display());
    }
    for c in &result.report.checks {
        println!(
            "{:?} {:?} leg along {:?}: expected {:?}, worst increment {:.6e} (se {:.3e}) {}",
            c.kind,
            c.leg,
            c.direction,
            c.expected,
            c.worst_increment,
            c.worst_se,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(if result.report.pass { Outcome::Ok } else { Outcome::PropertyFailed })
}

fn single_cell(args: &RiskArgs) -> Result<Outcome> {
    let cfg = load_run(&args.run, &args.members)?;
    let reports = risk_report(&cfg, args.rho_cr, args.rho_wwr)?;
    let text = output::to_json(&reports);
    print!("{text}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("risk_report.json");
        std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Outcome::Ok)
}

fn check_properties(args: &PropArgs) -> Result<Outcome> {
    let outcomes = properties::run_suite(args.seed)?;
    for o in &outcomes {
        println!(
            "{:<40} {:>8} checks, min difference {:+.3e}: {}",
            o.name,
            o.checks,
            o.min_difference,
            match (o.passed, o.as_expected()) {
                (true, true) => "pass",
                (false, true) => "fails as expected",
                _ => "UNEXPECTED",
            }
        );
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("properties.json");
        std::fs::write(&path, output::to_json(&outcomes)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if outcomes.iter().all(|o| o.as_expected()) { Outcome::Ok } else { Outcome::PropertyFailed })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::CcpSweep(a) => ccp_sweep(a),
        Command::CdoSweep(a) => cdo_sweep(a),
        Command::RiskReport(a) => single_cell(a),
        Command::CheckProperties(a) => check_properties(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::PropertyFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
