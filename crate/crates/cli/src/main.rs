//! `relaybf`: robust relay beamforming designs and Monte-Carlo sweeps.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 infeasible design.

mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use relaybf_core::conic::SolveStatus;
use relaybf_core::linalg::CMatrix;
use relaybf_core::matrices::{build_matrices, sinr_all};
use relaybf_core::model::{generate_channels, linear_to_db};
use relaybf_core::sim::{self, SweepPoint, SweepReport};
use relaybf_core::solvers::{design, Method};
use relaybf_core::uncertainty::derive_bounds;
use serde::Serialize;

use config::{Experiment, RunConfig};
use manifest::{write_atomic, Reproducible, RunManifest, MANIFEST_FILE};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRIALS_FILE: &str = "trials.csv";

#[derive(Debug, Parser)]
#[command(name = "relaybf", version, about = "Robust beamforming for amplify-and-forward relay networks")]
struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and write the weights and relaxed solution as JSON.
    Design(DesignArgs),
    /// Run a power or SEP sweep and write CSVs plus a manifest.
    Sweep(SweepArgs),
    /// Re-run a sweep from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct DesignArgs {
    config: PathBuf,
    #[arg(long, default_value = "AccurateRobust")]
    method: Method,
    /// Channel and randomization seed (default: the config's sweep seed).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    config: PathBuf,
    #[arg(long)]
    experiment: Option<Experiment>,
    /// Comma-separated SINR targets in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gamma_grid: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write one row per trial.
    #[arg(long)]
    per_trial: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot start worker pool")?;
    }
    match cli.command {
        Command::Design(a) => cmd_design(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

#[derive(Serialize)]
struct DesignOutput {
    method: Method,
    status: SolveStatus,
    seed: u64,
    rho: f64,
    objective_relaxed: Option<f64>,
    power: Option<f64>,
    nominal_power: Option<f64>,
    rank: usize,
    sinr: Vec<f64>,
    /// `[re, im]` pairs.
    w: Option<Vec<[f64; 2]>>,
    /// Row-major `[re, im]` pairs.
    x: Option<Vec<Vec<[f64; 2]>>>,
}

fn pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn cmd_design(a: DesignArgs) -> Result<ExitCode> {
    let mut cfg = config::load(&a.config)?;
    config::apply_env(&mut cfg.sweep.solver)?;
    let seed = a.seed.unwrap_or(cfg.sweep.seed);
    let rho = a.rho.unwrap_or(cfg.sweep.rho);
    if !(rho.is_finite() && rho >= 0.0) {
        bail!("--rho must be a nonnegative number");
    }
    let channels = match cfg.fixed_channels.take() {
        Some(ch) => ch,
        None => generate_channels(&cfg.channels, &cfg.network, seed),
    };
    let m = build_matrices(&channels, &cfg.network)?;
    let bounds = derive_bounds(&m, rho)?;
    let sol = design(a.method, &m, &bounds, &cfg.network, cfg.sweep.randomization, seed, &cfg.sweep.solver)?;

    let sinr = match &sol.w {
        Some(w) => sinr_all(w, &m, &cfg.network)?,
        None => Vec::new(),
    };
    let out = DesignOutput {
        method: a.method,
        status: sol.status,
        seed,
        rho,
        objective_relaxed: finite(sol.objective_relaxed),
        power: finite(sol.objective_rank1),
        nominal_power: finite(sol.nominal_power),
        rank: sol.rank_numeric,
        sinr: sinr.clone(),
        w: sol.w.as_ref().map(|w| w.as_vector().iter().map(|z| [z.re, z.im]).collect()),
        x: sol.x.as_ref().map(pairs),
    };
    let mut json = serde_json::to_string_pretty(&out)?;
    json.push('\n');
    write_atomic(&a.out, json.as_bytes())?;

    println!("method: {}", a.method);
    if !sol.is_optimal() {
        println!("status: infeasible");
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }
    println!("status: optimal");
    println!("relaxed objective: {:.6}", sol.objective_relaxed);
    println!("power: {:.6}", sol.objective_rank1);
    if a.method.is_robust() {
        println!("nominal power: {:.6}", sol.nominal_power);
    }
    println!("rank: {}", sol.rank_numeric);
    for (k, s) in sinr.iter().enumerate() {
        println!("sinr[{k}]: {s:.6} ({:.3} dB)", linear_to_db(*s));
    }
    Ok(ExitCode::SUCCESS)
}

fn progress_line(points: &[SweepPoint]) {
    let Some(first) = points.first() else { return };
    let cells: Vec<String> = points
        .iter()
        .map(|p| {
            let power = if p.feasible > 0 { format!("{:.4}", p.mean_power) } else { "-".into() };
            format!("{} {}/{} feasible, power {power}", p.method, p.feasible, p.trials)
        })
        .collect();
    eprintln!("gamma {} dB: {}", first.gamma_db, cells.join("; "));
}

fn execute(run: &Reproducible, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let probe = tempfile::NamedTempFile::new_in(out_dir)
        .with_context(|| format!("output directory {} is not writable", out_dir.display()))?;
    drop(probe);

    let start = Instant::now();
    let mut progress = |p: &[SweepPoint]| progress_line(p);
    let report: SweepReport = match run.experiment()? {
        Experiment::Power => sim::power_sweep_with_progress(&run.network, &run.channels, &run.sweep, &mut progress)?,
        Experiment::Sep => sim::sep_sweep_with_progress(&run.network, &run.channels, &run.sweep, &mut progress)?,
    };
    let hash = run.hash();

    let mut outputs = Vec::new();
    let mut buf = Vec::new();
    sim::write_summary_csv(&report, &hash, &mut buf)?;
    let summary = out_dir.join(SUMMARY_FILE);
    write_atomic(&summary, &buf)?;
    outputs.push(summary);
    if run.per_trial {
        buf.clear();
        sim::write_trials_csv(&report, &hash, &mut buf)?;
        let trials = out_dir.join(TRIALS_FILE);
        write_atomic(&trials, &buf)?;
        outputs.push(trials);
    }
    let manifest = RunManifest::new(run.clone(), start.elapsed().as_secs_f64(), outputs.clone());
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_atomic(&out_dir.join(MANIFEST_FILE), json.as_bytes())?;
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let RunConfig {
        network,
        channels,
        fixed_channels,
        experiment,
        mut sweep,
    } = config::load(&a.config)?;
    if fixed_channels.is_some() {
        eprintln!("note: explicit channels are ignored by sweeps");
    }
    config::apply_env(&mut sweep.solver)?;
    if let Some(g) = a.gamma_grid {
        sweep.gamma_grid_db = g;
    }
    if let Some(t) = a.trials {
        sweep.trials = t;
    }
    if let Some(r) = a.rho {
        sweep.rho = r;
    }
    if let Some(s) = a.seed {
        sweep.seed = s;
    }
    let experiment = a.experiment.unwrap_or(experiment);
    let run = Reproducible::new(experiment, a.per_trial, &network, &channels, &sweep);
    execute(&run, &a.out_dir)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(a: ReplayArgs) -> Result<ExitCode> {
    let m = RunManifest::load(&a.manifest)?;
    if m.run.tool_version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "note: manifest written by version {}, replaying with {}",
            m.run.tool_version,
            env!("CARGO_PKG_VERSION")
        );
    }
    execute(&m.run, &a.out_dir)?;
    Ok(ExitCode::SUCCESS)
}
