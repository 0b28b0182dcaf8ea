//! Command-line front end: case-study reproduction, randomized sweeps and
//! Monte Carlo batches, single-instance solves, and convergence traces.
//!
//! Exit codes: 0 when every requested run completes (and `--verify` checks
//! pass), 2 for usage or configuration problems, 1 for runtime or
//! verification failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qos_select::config::{load_config, ExperimentConfig, Mode, Strategy};
use qos_select::error::{Error, Result};
use qos_select::experiment::{
    run_case_study, run_monte_carlo, run_solve, run_sweep, run_trace, verify_case_study,
    verify_records, RunOutput,
};
use qos_select::output::{read_trial_csv, write_results, write_trace_csv};
use qos_select::sca::ScaConfig;

#[derive(Parser)]
#[command(
    name = "qos-select",
    version,
    about = "Sensor selection for remote state estimation over a shared wireless uplink"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the built-in case studies and print their reports.
    CaseStudy(CaseStudyArgs),
    /// Bandwidth sweep over randomized deployments, from a config file.
    Sweep(RunArgs),
    /// Fixed-bandwidth Monte Carlo batch, from a config file.
    MonteCarlo(RunArgs),
    /// Run the strategies once on the literal instance in a config file.
    Solve(RunArgs),
    /// Emit the relaxation's per-iteration convergence trace as CSV.
    Trace(TraceArgs),
}

#[derive(Args)]
struct CaseStudyArgs {
    /// Which case to run (1 or 2); both when omitted.
    #[arg(long)]
    case: Option<u8>,
    /// Output directory.
    #[arg(long, default_value = "runs/case-study")]
    out: PathBuf,
    /// Check the written results against the reference tables.
    #[arg(long)]
    verify: bool,
    /// Record wall-clock times (breaks byte determinism).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated strategy override (snm,pmf,proposed,brute).
    #[arg(long)]
    strategies: Option<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Re-derive every persisted record from its seed and fail on mismatch.
    #[arg(long)]
    verify: bool,
    /// Record wall-clock times (breaks byte determinism).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct TraceArgs {
    /// Solve-mode config describing the instance to trace.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (default: <out_dir>/trace.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::Domain(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::CaseStudy(args) => cmd_case_study(args),
        Cmd::Sweep(args) => cmd_run(Mode::Sweep, args),
        Cmd::MonteCarlo(args) => cmd_run(Mode::MonteCarlo, args),
        Cmd::Solve(args) => cmd_run(Mode::Solve, args),
        Cmd::Trace(args) => cmd_trace(args),
    }
}

fn cmd_case_study(args: CaseStudyArgs) -> Result<()> {
    let cases: &[u8] = match args.case {
        Some(1) => &[1],
        Some(2) => &[2],
        Some(c) => return Err(Error::Config(format!("case must be 1 or 2, got {c}"))),
        None => &[1, 2],
    };
    let sca = ScaConfig::default();
    for &which in cases {
        let out = run_case_study(which, &sca, args.timing)?;
        let stem = format!("case{which}");
        let paths =
            write_results(&args.out, &stem, &out.records, &out.removals, &out.summary)?;
        print_case_report(which, &out);
        if args.verify {
            let loaded = read_trial_csv(&paths[0])?;
            if loaded != out.records {
                return Err(Error::Verification(format!(
                    "case {which}: reloaded records differ from the run"
                )));
            }
            verify_case_study(which, &out)?;
            println!("case {which}: verified against the reference tables");
        }
        println!("wrote {}", paths[0].display());
    }
    Ok(())
}

fn cmd_run(mode: Mode, args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if cfg.mode != mode {
        return Err(Error::Config(format!(
            "config mode is {}, but the {} command was invoked",
            cfg.mode.name(),
            mode.name()
        )));
    }
    apply_overrides(&mut cfg, &args)?;
    cfg.validate()?;

    let out = match mode {
        Mode::Sweep => run_sweep(&cfg, args.jobs, args.timing)?,
        Mode::MonteCarlo => run_monte_carlo(&cfg, args.jobs, args.timing)?,
        Mode::Solve => run_solve(&cfg, args.timing)?,
        Mode::CaseStudy => unreachable!("dispatched separately"),
    };
    let paths = write_results(
        &cfg.out_dir,
        mode.name(),
        &out.records,
        &out.removals,
        &out.summary,
    )?;
    print_summary(&out);
    for p in &paths {
        println!("wrote {}", p.display());
    }
    if args.verify {
        let loaded = read_trial_csv(&paths[0])?;
        let n = verify_records(&cfg, &loaded)?;
        println!("verified {n} persisted records against re-runs");
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    if cfg.mode != Mode::Solve {
        return Err(Error::Config(format!(
            "trace needs a solve-mode config, got mode {}",
            cfg.mode.name()
        )));
    }
    let points = run_trace(&cfg)?;
    let path = args.out.unwrap_or_else(|| cfg.out_dir.join("trace.csv"));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_trace_csv(&path, &points)?;
    println!(
        "wrote {} ({} outer iterations)",
        path.display(),
        points.len().saturating_sub(1)
    );
    Ok(())
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<()> {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(list) = &args.strategies {
        let strategies: Vec<Strategy> =
            list.split(',').map(Strategy::parse).collect::<Result<_>>()?;
        if strategies.is_empty() {
            return Err(Error::Config("--strategies must not be empty".into()));
        }
        cfg.strategies = strategies;
    }
    Ok(())
}

fn braced(selected: &[usize]) -> String {
    let inner: Vec<String> = selected.iter().map(|&i| (i + 1).to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

fn print_case_report(which: u8, out: &RunOutput) {
    println!("case {which}");
    println!("{:<10} {:<12} objective", "strategy", "selected");
    for r in &out.records {
        println!("{:<10} {:<12} {:.6}", r.strategy, braced(&r.selected), r.objective);
    }
    let order: Vec<String> = out
        .removals
        .iter()
        .filter_map(|l| l.removed)
        .map(|s| s.to_string())
        .collect();
    if order.is_empty() {
        println!("heuristic removals: none (kept the full set)");
    } else {
        println!("heuristic removals: {}", order.join(", "));
    }
    println!();
}

fn print_summary(out: &RunOutput) {
    println!(
        "{:>14} {:<10} {:>6} {:>12} {:>12} {:>8} {:>12}",
        "bandwidth_hz", "strategy", "trials", "mean_obj", "std_obj", "mean_n", "gap_vs_brute"
    );
    for s in &out.summary {
        let bw = s
            .bandwidth_hz
            .map(|b| format!("{b}"))
            .unwrap_or_else(|| "-".into());
        let gap = s
            .mean_gap_vs_brute
            .map(|g| format!("{g:.6}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:>14} {:<10} {:>6} {:>12.6} {:>12.6} {:>8.3} {:>12}",
            bw, s.strategy, s.trials, s.mean_objective, s.std_objective, s.mean_n_selected, gap
        );
    }
}
