//! Monte-Carlo experiments: average minimum power against the SINR target, and
//! symbol error probability of BPSK over the two-hop link against power.
//!
//! Every trial draws its channels from `(seed, trial)` only, so all SINR
//! targets and methods see the same realizations and the report does not
//! depend on the number of worker threads.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{SolveStatus, SolverSettings};
use crate::linalg::{self, CMatrix, C64};
use crate::matrices::{build_matrices, sinr_all, BeamformingMatrices, MatrixError, WeightVector};
use crate::model::{
    complex_gaussian, db_to_linear, derive_seed, generate_channels, seeded_rng, ChannelRealization,
    ChannelStatistics, ModelError, NetworkConfig,
};
use crate::solvers::{design, DesignError, Method, RandomizationSettings};
use crate::uncertainty::{
    check_admissible, derive_bounds, perturbed_sinr, sample_perturbations, PerturbationSet, SamplingMode,
    UncertaintyBounds, UncertaintyError, UserPerturbation,
};

/// Stream tags for `derive_seed`.
const STREAM_CHANNELS: u64 = 1;
const STREAM_DESIGN: u64 = 2;
const STREAM_PERTURB: u64 = 3;
const STREAM_SYMBOLS: u64 = 4;
const STREAM_SINR: u64 = 5;

/// Halvings tried before a channel perturbation direction is given up.
const MAX_SHRINK: usize = 60;
/// Bisection steps pushing an admissible channel perturbation towards the ball boundary.
const BOUNDARY_STEPS: usize = 20;

/// Smallest number of symbols per trial accepted by [`sep_sweep`].
pub const MIN_SYMBOLS: usize = 1000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid sweep settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error("trial {trial}, {method} at {gamma_db} dB: {source}")]
    Design {
        trial: usize,
        method: Method,
        gamma_db: f64,
        source: DesignError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Relative perturbation level `ρ`.
    pub rho: f64,
    pub gamma_grid_db: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub randomization: RandomizationSettings,
    pub solver: SolverSettings,
    /// Symbols per user and per channel perturbation (SEP sweeps only).
    pub symbols_per_trial: usize,
    /// Channel perturbations per trial (SEP sweeps only); the trial SEP is
    /// their mean and the worst-case SEP their maximum.
    pub perturbations_per_trial: usize,
    /// Matrix perturbations sampled per design to record the worst SINR; 0 disables.
    pub sinr_samples: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            rho: 0.01,
            gamma_grid_db: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            trials: 100,
            methods: Method::ALL.to_vec(),
            seed: 1,
            randomization: RandomizationSettings::default(),
            solver: SolverSettings::default(),
            symbols_per_trial: 10_000,
            perturbations_per_trial: 4,
            sinr_samples: 0,
        }
    }
}

impl SweepSettings {
    fn validate(&self, sep: bool) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Settings(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.gamma_grid_db.is_empty() {
            return bad("the SINR grid is empty");
        }
        if self.gamma_grid_db.iter().any(|g| !g.is_finite()) {
            return bad("SINR grid values must be finite");
        }
        if self.methods.is_empty() {
            return bad("no methods selected");
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return bad("rho must be a nonnegative number");
        }
        if sep && self.symbols_per_trial < MIN_SYMBOLS {
            return Err(SimError::Settings(format!("symbols_per_trial must be at least {MIN_SYMBOLS}")));
        }
        if sep && self.perturbations_per_trial == 0 {
            return bad("perturbations_per_trial must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Seed the trial's channels were drawn from.
    pub seed: u64,
    pub method: Method,
    pub gamma_db: f64,
    pub status: SolveStatus,
    pub relaxed_power: f64,
    /// Nominal transmit power `w^H D w` of the extracted weights.
    pub rank1_power: f64,
    pub rank: usize,
    pub nominal_sinr: Vec<f64>,
    /// Per-user minimum SINR over the sampled matrix perturbations.
    pub worst_sampled_sinr: Vec<f64>,
    pub sep: Option<f64>,
    pub sep_worst: Option<f64>,
    /// Symbols simulated per user.
    pub symbols: usize,
}

impl TrialRecord {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Aggregates of one `(method, γ)` cell over the feasible trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub method: Method,
    pub gamma_db: f64,
    pub trials: usize,
    pub feasible: usize,
    pub feasibility: f64,
    pub mean_power: f64,
    pub mean_relaxed_power: f64,
    pub rank_one_fraction: f64,
    pub sep_mean: Option<f64>,
    /// `√(p(1−p)/n)` with `n` the symbols behind `sep_mean`.
    pub sep_stderr: Option<f64>,
    pub sep_worst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: NetworkConfig,
    pub stats: ChannelStatistics,
    pub settings: SweepSettings,
    /// Ordered by method, then by grid position.
    pub points: Vec<SweepPoint>,
    /// Ordered by grid position, then trial, then method.
    pub records: Vec<TrialRecord>,
}

impl SweepReport {
    pub fn point(&self, method: Method, gamma_db: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.method == method && p.gamma_db == gamma_db)
    }

    /// `(mean power, SEP)` pairs of one method along the grid, feasible points only.
    pub fn sep_curve(&self, method: Method) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.method == method && p.feasible > 0)
            .filter_map(|p| p.sep_mean.map(|s| (p.mean_power, s)))
            .collect()
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn aggregate_cell(records: &[TrialRecord], method: Method, gamma_db: f64) -> SweepPoint {
    let cell: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.method == method && r.gamma_db == gamma_db)
        .collect();
    let ok: Vec<&TrialRecord> = cell.iter().copied().filter(|r| r.is_feasible()).collect();
    let seps: Vec<f64> = ok.iter().filter_map(|r| r.sep).collect();
    let symbols: usize = ok.iter().filter(|r| r.sep.is_some()).map(|r| r.symbols).sum();
    let sep_mean = (!seps.is_empty()).then(|| mean(seps.iter().copied()));
    SweepPoint {
        method,
        gamma_db,
        trials: cell.len(),
        feasible: ok.len(),
        feasibility: ok.len() as f64 / cell.len().max(1) as f64,
        mean_power: mean(ok.iter().map(|r| r.rank1_power)),
        mean_relaxed_power: mean(ok.iter().map(|r| r.relaxed_power)),
        rank_one_fraction: mean(ok.iter().map(|r| if r.rank == 1 { 1.0 } else { 0.0 })),
        sep_mean,
        sep_stderr: sep_mean.map(|p| (p * (1.0 - p) / symbols.max(1) as f64).sqrt()),
        sep_worst: (!seps.is_empty()).then(|| mean(ok.iter().filter_map(|r| r.sep_worst))),
    }
}

/// Design of one method on one trial, with optional SINR sampling.
#[allow(clippy::too_many_arguments)]
fn run_design(
    trial: usize,
    method: Method,
    gamma_db: f64,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
    settings: &SweepSettings,
    trial_seed: u64,
) -> Result<(TrialRecord, Option<WeightVector>), SimError> {
    let sol = design(
        method,
        m,
        bounds,
        config,
        settings.randomization,
        derive_seed(trial_seed, &[STREAM_DESIGN]),
        &settings.solver,
    )
    .map_err(|source| SimError::Design {
        trial,
        method,
        gamma_db,
        source,
    })?;
    let mut rec = TrialRecord {
        trial,
        seed: trial_seed,
        method,
        gamma_db,
        status: sol.status,
        relaxed_power: sol.objective_relaxed,
        rank1_power: sol.nominal_power,
        rank: sol.rank_numeric,
        nominal_sinr: Vec::new(),
        worst_sampled_sinr: Vec::new(),
        sep: None,
        sep_worst: None,
        symbols: 0,
    };
    if let Some(w) = &sol.w {
        rec.nominal_sinr = sinr_all(w, m, config)?;
        if settings.sinr_samples > 0 {
            let sets = sample_perturbations(
                bounds,
                m,
                SamplingMode::BoundaryNorm,
                derive_seed(trial_seed, &[STREAM_SINR]),
                settings.sinr_samples,
            );
            rec.worst_sampled_sinr = (0..m.num_users())
                .map(|k| {
                    sets.iter()
                        .map(|s| perturbed_sinr(w, m, config, &s.users[k], k))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
        }
    }
    Ok((rec, sol.w))
}

/// Perturbation of `m` induced by replacing the nominal channels with `perturbed`.
pub fn induced_perturbation(
    m: &BeamformingMatrices,
    perturbed: &ChannelRealization,
    config: &NetworkConfig,
) -> Result<PerturbationSet, MatrixError> {
    let mt = build_matrices(perturbed, config)?;
    Ok(PerturbationSet {
        delta_d: mt.d() - m.d(),
        users: (0..m.num_users())
            .map(|k| UserPerturbation {
                delta_q: linalg::hermitize(&(mt.qk(k) - m.qk(k))),
                delta_dk: mt.dk(k) - m.dk(k),
                delta_rh: linalg::hermitize(&(mt.rh(k) - m.rh(k))),
            })
            .collect(),
    })
}

/// Channels `F + t δF`, `G + t δG` for a random direction `(δF, δG)` with the
/// largest `t` found whose induced matrix perturbations stay inside `bounds`.
/// The same seed gives the same channels.
pub fn perturb_channels(
    channels: &ChannelRealization,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
    stats: &ChannelStatistics,
    seed: u64,
) -> Result<ChannelRealization, MatrixError> {
    let mut rng = seeded_rng(seed);
    let (r, d) = (channels.num_relays(), channels.num_users());
    let df = CMatrix::from_fn(r, d, |_, _| complex_gaussian(&mut rng, stats.var_f()));
    let dg = CMatrix::from_fn(r, d, |_, _| complex_gaussian(&mut rng, stats.var_g()));
    let at = |t: f64| -> Result<Option<ChannelRealization>, MatrixError> {
        let ch = ChannelRealization::new(channels.f() + df.scale(t), channels.g() + dg.scale(t))?;
        let set = induced_perturbation(m, &ch, config)?;
        Ok(check_admissible(&set, bounds, m).is_ok().then_some(ch))
    };
    let level = bounds.relative_level.unwrap_or(0.0);
    if level == 0.0 || bounds.is_zero() {
        return Ok(channels.clone());
    }
    // halve until admissible, then bisect between the last admissible and rejected scales
    let mut hi = level;
    let mut lo = None;
    for _ in 0..MAX_SHRINK {
        if let Some(ch) = at(hi)? {
            lo = Some((hi, ch));
            break;
        }
        hi *= 0.5;
    }
    let Some((mut lo_t, mut best)) = lo else {
        return Ok(channels.clone());
    };
    let mut hi_t = 2.0 * lo_t;
    if let Some(ch) = at(hi_t)? {
        // the starting scale was already admissible; keep it
        return Ok(if hi_t > level { best } else { ch });
    }
    for _ in 0..BOUNDARY_STEPS {
        let mid = 0.5 * (lo_t + hi_t);
        match at(mid)? {
            Some(ch) => {
                lo_t = mid;
                best = ch;
            }
            None => hi_t = mid,
        }
    }
    Ok(best)
}

/// BPSK symbol errors of every user over `symbols` transmissions through the
/// two-hop link with weights `w` and true channels `channels`. Detection
/// divides by the true effective gain `g_k^T W^H f_k`. Returns per-user error counts.
pub fn simulate_bpsk(
    w: &WeightVector,
    channels: &ChannelRealization,
    config: &NetworkConfig,
    symbols: usize,
    seed: u64,
) -> Vec<usize> {
    let (f, g) = (channels.f(), channels.g());
    let d = channels.num_users();
    let wc = w.as_vector().map(|z| z.conj());
    let powers: Vec<f64> = config.source_powers().iter().map(|p| p.sqrt()).collect();
    // y_k = Σ_p a_kp s_p + b_k^T v + n_k with a_kp = g_k^T W^H f_p, b_k = g_k ∘ conj(w)
    let a: Vec<Vec<C64>> = (0..d)
        .map(|k| {
            (0..d)
                .map(|p| g.column(k).iter().zip(wc.iter()).zip(f.column(p).iter()).map(|((gi, wi), fi)| gi * wi * fi).sum())
                .collect()
        })
        .collect();
    // b_k^T v + n_k is circular Gaussian with this variance
    let noise_std: Vec<f64> = (0..d)
        .map(|k| {
            let b2: f64 = g.column(k).iter().zip(wc.iter()).map(|(gi, wi)| (gi * wi).norm_sqr()).sum();
            ((config.relay_noise_var() * b2 + config.dest_noise_var()) / 2.0).sqrt()
        })
        .collect();
    let mut rng = seeded_rng(seed);
    let mut errors = vec![0usize; d];
    let mut s = vec![0.0f64; d];
    for _ in 0..symbols {
        for (p, sp) in s.iter_mut().enumerate() {
            *sp = if rng.random::<bool>() { powers[p] } else { -powers[p] };
        }
        for k in 0..d {
            let nr: f64 = StandardNormal.sample(&mut rng);
            let ni: f64 = StandardNormal.sample(&mut rng);
            let mut y = C64::new(noise_std[k] * nr, noise_std[k] * ni);
            for (p, &sp) in s.iter().enumerate() {
                y += a[k][p] * sp;
            }
            let z = y / a[k][k];
            if z.re.is_nan() || (z.re >= 0.0) != (s[k] > 0.0) {
                errors[k] += 1;
            }
        }
    }
    errors
}

/// Called once per grid point, in grid order, with that point's aggregates.
pub type Progress<'a> = &'a mut dyn FnMut(&[SweepPoint]);

/// Per-trial state shared by all grid points.
struct TrialSetup {
    seed: u64,
    channels: ChannelRealization,
    bounds: UncertaintyBounds,
    /// True channels for the robust designs (SEP sweeps only).
    perturbed: Vec<ChannelRealization>,
}

fn setup_trial(
    config: &NetworkConfig,
    stats: &ChannelStatistics,
    settings: &SweepSettings,
    trial: usize,
    sep: bool,
) -> Result<TrialSetup, SimError> {
    let seed = derive_seed(settings.seed, &[trial as u64]);
    let channels = generate_channels(stats, config, derive_seed(seed, &[STREAM_CHANNELS]));
    let base = build_matrices(&channels, config)?;
    let bounds = derive_bounds(&base, settings.rho)?;
    let perturbed = if sep {
        (0..settings.perturbations_per_trial)
            .map(|j| {
                perturb_channels(&channels, &base, &bounds, config, stats, derive_seed(seed, &[STREAM_PERTURB, j as u64]))
            })
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    Ok(TrialSetup {
        seed,
        channels,
        bounds,
        perturbed,
    })
}

/// Mean and worst per-perturbation SEP of `w`, and the symbols behind them.
fn measure_sep(
    w: &WeightVector,
    method: Method,
    setup: &TrialSetup,
    config: &NetworkConfig,
    settings: &SweepSettings,
    grid_index: usize,
) -> (f64, f64, usize) {
    let evaluated: Vec<&ChannelRealization> = if method.is_robust() {
        setup.perturbed.iter().collect()
    } else {
        vec![&setup.channels; settings.perturbations_per_trial]
    };
    let rates: Vec<f64> = evaluated
        .iter()
        .enumerate()
        .map(|(j, ch)| {
            let seed = derive_seed(setup.seed, &[STREAM_SYMBOLS, grid_index as u64, j as u64]);
            let errs = simulate_bpsk(w, ch, config, settings.symbols_per_trial, seed);
            errs.iter().sum::<usize>() as f64 / (settings.symbols_per_trial * errs.len()) as f64
        })
        .collect();
    (
        mean(rates.iter().copied()),
        rates.iter().copied().fold(0.0, f64::max),
        settings.symbols_per_trial * rates.len(),
    )
}

fn run_sweep(
    config: &NetworkConfig,
    stats: &ChannelStatistics,
    settings: &SweepSettings,
    sep: bool,
    progress: Progress<'_>,
) -> Result<SweepReport, SimError> {
    settings.validate(sep)?;
    let setups: Vec<TrialSetup> = (0..settings.trials)
        .into_par_iter()
        .map(|t| setup_trial(config, stats, settings, t, sep))
        .collect::<Result<_, _>>()?;
    let mut records = Vec::new();
    let mut points = Vec::new();
    for (gi, &gamma_db) in settings.gamma_grid_db.iter().enumerate() {
        let cfg = config.with_common_sinr_target(db_to_linear(gamma_db))?;
        let cell: Vec<Vec<TrialRecord>> = setups
            .par_iter()
            .enumerate()
            .map(|(trial, setup)| {
                let m = build_matrices(&setup.channels, &cfg)?;
                settings
                    .methods
                    .iter()
                    .map(|&method| {
                        let (mut rec, w) =
                            run_design(trial, method, gamma_db, &m, &setup.bounds, &cfg, settings, setup.seed)?;
                        if let (true, Some(w)) = (sep, w) {
                            let (mean_sep, worst, symbols) = measure_sep(&w, method, setup, &cfg, settings, gi);
                            rec.sep = Some(mean_sep);
                            rec.sep_worst = Some(worst);
                            rec.symbols = symbols;
                        }
                        Ok(rec)
                    })
                    .collect()
            })
            .collect::<Result<_, SimError>>()?;
        let cell: Vec<TrialRecord> = cell.into_iter().flatten().collect();
        let cell_points: Vec<SweepPoint> = settings
            .methods
            .iter()
            .map(|&method| aggregate_cell(&cell, method, gamma_db))
            .collect();
        progress(&cell_points);
        points.push(cell_points);
        records.extend(cell);
    }
    // method-major order
    let points = (0..settings.methods.len())
        .flat_map(|mi| points.iter().map(move |row| row[mi].clone()))
        .collect();
    Ok(SweepReport {
        config: config.clone(),
        stats: *stats,
        settings: settings.clone(),
        points,
        records,
    })
}

/// Average minimum power against the SINR target. Infeasible trials are
/// recorded, not fatal.
pub fn power_sweep(
    config: &NetworkConfig,
    stats: &ChannelStatistics,
    settings: &SweepSettings,
) -> Result<SweepReport, SimError> {
    run_sweep(config, stats, settings, false, &mut |_| {})
}

pub fn power_sweep_with_progress(
    config: &NetworkConfig,
    stats: &ChannelStatistics,
    settings: &SweepSettings,
    progress: Progress<'_>,
) -> Result<SweepReport, SimError> {
    run_sweep(config, stats, settings, false, progress)
}

/// SEP against power. Designs use the nominal channels; robust designs are
/// then evaluated on channels perturbed inside the modeled balls, the
/// non-robust design on the nominal channels.
pub fn sep_sweep(
    config: &NetworkConfig,
    stats: &ChannelStatistics,
    settings: &SweepSettings,
) -> Result<SweepReport, SimError> {
    run_sweep(config, stats, settings, true, &mut |_| {})
}

pub fn sep_sweep_with_progress(
    config: &NetworkConfig,
    stats: &ChannelStatistics,
    settings: &SweepSettings,
    progress: Progress<'_>,
) -> Result<SweepReport, SimError> {
    run_sweep(config, stats, settings, true, progress)
}

/// Power at which a `(power, SEP)` curve reaches `sep`, interpolating linearly
/// in `(log SEP, power)` between neighbouring grid points that bracket it.
/// `None` outside the curve's range or where the SEP is zero.
pub fn power_at_sep(curve: &[(f64, f64)], sep: f64) -> Option<f64> {
    if !(sep > 0.0) {
        return None;
    }
    let target = sep.ln();
    curve.windows(2).find_map(|pair| {
        let ((p0, s0), (p1, s1)) = (pair[0], pair[1]);
        if !(s0 > 0.0 && s1 > 0.0) {
            return None;
        }
        let (l0, l1) = (s0.ln(), s1.ln());
        let (lo, hi) = (l0.min(l1), l0.max(l1));
        if target < lo || target > hi {
            return None;
        }
        if l0 == l1 {
            return Some(p0.min(p1));
        }
        Some(p0 + (target - l0) / (l1 - l0) * (p1 - p0))
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Column order of [`write_summary_csv`].
pub const SUMMARY_COLUMNS: [&str; 11] = [
    "method",
    "gamma_db",
    "trials",
    "feasible",
    "feasibility",
    "mean_power_w",
    "mean_relaxed_power_w",
    "rank_one_fraction",
    "sep",
    "sep_stderr",
    "sep_worst",
];

/// Column order of [`write_trials_csv`].
pub const TRIAL_COLUMNS: [&str; 12] = [
    "trial",
    "seed",
    "method",
    "gamma_db",
    "status",
    "relaxed_power_w",
    "rank1_power_w",
    "rank",
    "min_nominal_sinr",
    "min_sampled_sinr",
    "sep",
    "sep_worst",
];

fn header(out: &mut impl Write, columns: &[&str], manifest_hash: &str) -> std::io::Result<()> {
    writeln!(out, "# columns: {}", columns.join(","))?;
    writeln!(out, "# manifest_sha256: {manifest_hash}")?;
    writeln!(out, "{}", columns.join(","))
}

/// One row per `(method, γ)`.
pub fn write_summary_csv(report: &SweepReport, manifest_hash: &str, out: &mut impl Write) -> std::io::Result<()> {
    header(out, &SUMMARY_COLUMNS, manifest_hash)?;
    for p in &report.points {
        writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{},{},{},{}",
            p.method,
            p.gamma_db,
            p.trials,
            p.feasible,
            p.feasibility,
            p.mean_power,
            p.mean_relaxed_power,
            p.rank_one_fraction,
            fmt_opt(p.sep_mean),
            fmt_opt(p.sep_stderr),
            fmt_opt(p.sep_worst),
        )?;
    }
    Ok(())
}

/// One row per trial, grid point and method.
pub fn write_trials_csv(report: &SweepReport, manifest_hash: &str, out: &mut impl Write) -> std::io::Result<()> {
    header(out, &TRIAL_COLUMNS, manifest_hash)?;
    let min = |v: &[f64]| v.iter().copied().reduce(f64::min);
    for r in &report.records {
        let status = match r.status {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "failed",
        };
        writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.method,
            r.gamma_db,
            status,
            r.relaxed_power,
            r.rank1_power,
            r.rank,
            fmt_opt(min(&r.nominal_sinr)),
            fmt_opt(min(&r.worst_sampled_sinr)),
            fmt_opt(r.sep),
            fmt_opt(r.sep_worst),
        )?;
    }
    Ok(())
}
