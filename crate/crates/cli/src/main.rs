//! `tunnel-lab`: ground-state check, single points and (E₀, γ) sweeps.
//!
//! Exit codes: 0 success, 1 runtime failure or missing results (including a
//! skipped over-barrier point), 2 usage or configuration error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use tunnel_core::atom::AtomFieldModel;
use tunnel_core::output::{upsert_sweep, write_sweep, write_trace};
use tunnel_core::pipeline::{point_model, run_point, symmetric_grid, sweep, Prepared, SweepEntry};
use tunnel_core::spectrum::{ground_momentum_width, ground_state};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "tunnel-lab", version, about = "1D TDSE tunnel-ionization delay lab")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Field-free ground state: energy and momentum width.
    Ground,
    /// One parameter point: trace file plus a row in sweep.csv.
    Run {
        /// Peak field in units of Z³.
        #[arg(long)]
        e0: f64,
        /// Keldysh parameter.
        #[arg(long)]
        gamma: f64,
        /// Dump ψ at these instants (t₀ = 0) as binary snapshots.
        #[arg(long, value_delimiter = ',')]
        snapshot: Vec<f64>,
    },
    /// Every (E₀, γ) combination of the configuration.
    Sweep,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// `Ok(false)` means the command finished but some results are missing.
fn run(cli: Cli) -> Result<bool, Failure> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    config.validate_numerics().map_err(Failure::Usage)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating {}", cli.out.display()))?;

    match cli.command {
        Command::Ground => cmd_ground(&config, &cli.out),
        Command::Run { e0, gamma, snapshot } => {
            config.validate_run(e0, gamma).map_err(Failure::Usage)?;
            cmd_run(&config, &cli.out, e0, gamma, snapshot)
        }
        Command::Sweep => {
            config.validate_sweep().map_err(Failure::Usage)?;
            cmd_sweep(&config, &cli.out)
        }
    }
}

fn cmd_ground(config: &RunConfig, out: &Path) -> Result<bool, Failure> {
    let model = AtomFieldModel::new(config.z, 0.0, 1.0, 0.0);
    let grid = symmetric_grid(config.delay.half_width, config.delay.dx).context("grid")?;
    let pair = ground_state(&model, grid).context("ground state")?;
    let width = ground_momentum_width(&pair);
    println!("Z = {}", config.z);
    println!("ground energy      {:.10}", pair.energy);
    println!("expected -Z^2/2    {:.10}", -config.z * config.z / 2.0);
    println!("momentum width     {width:.6}");
    let path = out.join("ground.csv");
    std::fs::write(&path, format!("Z,energy,momentum_width\n{:.16e},{:.16e},{:.16e}\n", config.z, pair.energy, width))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(true)
}

fn print_entry(entry: &SweepEntry) {
    match &entry.outcome {
        Ok(p) => {
            let r = &p.report;
            println!(
                "E0/Z^3={:<6} gamma={:<5} tau_A={:>9.4} tau_MT={:>9.4} p0={:.4}/{:.4} p_fq={:.4} tau_2={:>9.4} tau_sub={:.4}{}",
                entry.e0_ratio,
                entry.gamma,
                r.tau_a,
                r.tau_mt,
                r.p0_method1,
                r.p0_method2,
                r.p_fq,
                r.tau_2,
                r.tau_sub_1d,
                if r.bound_violated { "  [tau_A < tau_MT]" } else { "" }
            );
            for n in &p.notes {
                println!("    note: {n}");
            }
        }
        Err(e) => println!("E0/Z^3={:<6} gamma={:<5} FAILED: {e}", entry.e0_ratio, entry.gamma),
    }
}

/// A point counts as complete when it ran and no observable is missing.
fn complete(entry: &SweepEntry) -> bool {
    match &entry.outcome {
        Ok(p) => {
            let r = &p.report;
            let needed = [r.tau_a, r.tau_mt, r.p0_method1, r.p0_method2, r.tau_sub_1d];
            let asymptotic = [r.p_fq, r.tau_2];
            needed.iter().all(|v| v.is_finite()) && (p.asymptotic.is_none() || asymptotic.iter().all(|v| v.is_finite()))
        }
        Err(_) => false,
    }
}

fn cmd_run(config: &RunConfig, out: &Path, e0: f64, gamma: f64, snapshots: Vec<f64>) -> Result<bool, Failure> {
    if let Err(e) = point_model(config.z, e0, gamma) {
        log::warn!("skipping E0/Z^3={e0} gamma={gamma}: {e}");
        let entry = SweepEntry { e0_ratio: e0, gamma, outcome: Err(e) };
        print_entry(&entry);
        upsert_sweep(out, &entry, config.z).context("writing sweep.csv")?;
        return Ok(false);
    }
    let mut settings = config.settings();
    if !snapshots.is_empty() {
        settings.delay.snapshot_times = snapshots;
        settings.delay.snapshot_dir = Some(out.to_path_buf());
    }
    let prepared = Prepared::new(&settings).context("preparing field-free states")?;
    let outcome = run_point(&prepared, e0, gamma);
    if let Ok(p) = &outcome {
        let path = write_trace(out, e0, gamma, &p.delay.records).context("writing trace")?;
        log::info!("trace written to {}", path.display());
    }
    let entry = SweepEntry { e0_ratio: e0, gamma, outcome };
    print_entry(&entry);
    upsert_sweep(out, &entry, config.z).context("writing sweep.csv")?;
    Ok(complete(&entry))
}

fn cmd_sweep(config: &RunConfig, out: &Path) -> Result<bool, Failure> {
    let prepared = Prepared::new(&config.settings()).context("preparing field-free states")?;
    let entries = sweep(&prepared, &config.e0_over_z3, &config.gamma);
    for entry in &entries {
        print_entry(entry);
        if let Ok(p) = &entry.outcome {
            write_trace(out, entry.e0_ratio, entry.gamma, &p.delay.records).context("writing trace")?;
        }
    }
    let path = write_sweep(out, &entries, config.z).context("writing sweep.csv")?;
    log::info!("sweep written to {}", path.display());
    Ok(entries.iter().all(complete))
}
