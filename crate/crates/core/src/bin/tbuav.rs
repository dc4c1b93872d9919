use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use tbuav::experiment::{
    convergence, emit_outputs, snapshot, snapshot_to_csv, sweep, trace_to_csv, write_atomic,
    HarnessConfig, RunRecord, Strategy, SweepVar,
};
use tbuav::geometry::generate_scenario;
use tbuav::oracles::{reports_to_csv, verify_suite};
use tbuav::seeding::derive_seed;

#[derive(Parser)]
#[command(name = "tbuav", version, about = "UAV placement, association, and power for balloon-backhauled cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when absent
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per sweep point
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// proposed | assoc_uniform_power | random_assoc_uniform_power
    #[arg(long, global = true)]
    strategy: Option<Strategy>,
    /// Worker threads; all available cores by default
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Every strategy on the configured scenario
    Run,
    /// Sweep the UAV peak power
    SweepPower,
    /// Sweep the backhaul bandwidth
    SweepBandwidth,
    /// Placement search traces
    Convergence,
    /// Positions, association, and powers of one run
    Snapshot,
    /// Oracle cross-checks
    Verify,
}

fn print_summary(record: &RunRecord) {
    println!("{:>14} {:>28} {:>14} {:>12}", record.spec.sweep_var.name(), "strategy", "mean_bps", "stderr_bps");
    for p in &record.summary {
        println!("{:>14} {:>28} {:>14.1} {:>12.1}", p.sweep_value, p.strategy, p.mean_bps, p.stderr_bps);
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => HarnessConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => HarnessConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(s) = c.strategy {
        cfg.strategies = vec![s];
    }
    let workers = match c.workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };

    match cli.command {
        Command::Run | Command::SweepPower | Command::SweepBandwidth => {
            let (stem, spec) = match cli.command {
                Command::Run => {
                    if c.trials.is_none() {
                        cfg.trials = 1;
                    }
                    let v = cfg.scenario.peak_power_dbm;
                    ("run", cfg.spec(SweepVar::PeakPowerDbm, vec![v]))
                }
                Command::SweepPower => ("sweep_power", cfg.spec(SweepVar::PeakPowerDbm, cfg.power_sweep_dbm.clone())),
                _ => (
                    "sweep_bandwidth",
                    cfg.spec(SweepVar::BackhaulBandwidthHz, cfg.bandwidth_sweep_hz.clone()),
                ),
            };
            let record = sweep(&spec, workers)?;
            let (csv, json) = emit_outputs(&record, &c.out, stem)?;
            print_summary(&record);
            println!("wrote {} and {}", csv.display(), json.display());
        }
        Command::Convergence => {
            let trials = c.trials.unwrap_or(cfg.convergence_trials);
            let traces = convergence(&cfg.scenario, &cfg.placement, cfg.seed, trials, workers)?;
            let path = c.out.join("convergence.csv");
            write_atomic(&path, trace_to_csv(&traces).as_bytes())?;
            for (trial, (seed, converged, rows)) in traces.iter().enumerate() {
                let last = rows.last().expect("trace has the initial row");
                println!(
                    "trial {trial:>3} seed {seed:>20} iterations {:>2} converged {converged} objective {:.1}",
                    last.iteration, last.objective
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Snapshot => {
            let strategy = c.strategy.unwrap_or(Strategy::Proposed);
            let s = generate_scenario::<f64>(&cfg.scenario, derive_seed(cfg.seed, 0))?;
            let snap = snapshot(&s, strategy, &cfg.placement.settings())?;
            let csv = c.out.join("snapshot.csv");
            let json = c.out.join("snapshot.json");
            write_atomic(&csv, snapshot_to_csv(&snap).as_bytes())?;
            write_atomic(&json, serde_json::to_string_pretty(&snap)?.as_bytes())?;
            println!("{strategy}: {:.1} bps, {} users served", snap.objective_bps, snap.links.len());
            println!("wrote {} and {}", csv.display(), json.display());
        }
        Command::Verify => {
            let reports = verify_suite(cfg.seed)?;
            let path = c.out.join("verify.csv");
            write_atomic(&path, reports_to_csv(&reports).as_bytes())?;
            let mut failed = 0;
            for check in ["association", "association_staged", "power", "water_level", "backhaul_rate", "placement"] {
                let rows: Vec<_> = reports.iter().filter(|r| r.check == check).collect();
                let bad = rows.iter().filter(|r| !r.pass).count();
                let worst = rows.iter().map(|r| r.rel_gap).fold(0.0, f64::max);
                println!("{check:>20}: {}/{} pass, worst rel gap {worst:.3e}", rows.len() - bad, rows.len());
                failed += bad;
            }
            println!("wrote {}", path.display());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
