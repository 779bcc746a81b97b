//! TOML run configuration. Quantities given in decibels carry a `_db` suffix;
//! the unsuffixed key is linear. Giving both forms of one quantity is an error.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use relaybf_core::conic::SolverSettings;
use relaybf_core::linalg::{CMatrix, C64};
use relaybf_core::model::{db_to_linear, ChannelRealization, ChannelStatistics, NetworkConfig};
use relaybf_core::sim::SweepSettings;
use relaybf_core::solvers::{Method, RandomizationSettings};
use serde::Deserialize;

/// Environment variable overriding every solver tolerance.
pub const SOLVER_TOL_ENV: &str = "SOLVER_TOL";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    num_relays: Option<usize>,
    num_users: Option<usize>,
    source_power: Option<f64>,
    source_power_db: Option<f64>,
    source_powers: Option<Vec<f64>>,
    relay_noise_var: Option<f64>,
    relay_noise_var_db: Option<f64>,
    dest_noise_var: Option<f64>,
    dest_noise_var_db: Option<f64>,
    sinr_target: Option<f64>,
    sinr_target_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannels {
    var_f: Option<f64>,
    var_f_db: Option<f64>,
    var_g: Option<f64>,
    var_g_db: Option<f64>,
    f_re: Option<Vec<Vec<f64>>>,
    f_im: Option<Vec<Vec<f64>>>,
    g_re: Option<Vec<Vec<f64>>>,
    g_im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUncertainty {
    rho: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    experiment: Option<String>,
    gamma_grid_db: Option<Vec<f64>>,
    trials: Option<usize>,
    methods: Option<Vec<String>>,
    seed: Option<u64>,
    symbols_per_trial: Option<usize>,
    perturbations_per_trial: Option<usize>,
    sinr_samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tolerance: Option<f64>,
    max_iter: Option<u32>,
    randomizations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    network: RawNetwork,
    #[serde(default)]
    channels: RawChannels,
    #[serde(default)]
    uncertainty: RawUncertainty,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Power,
    Sep,
}

impl std::str::FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Experiment::Power),
            "sep" => Ok(Experiment::Sep),
            _ => bail!("unknown experiment '{s}' (expected 'power' or 'sep')"),
        }
    }
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Power => "power",
            Experiment::Sep => "sep",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub channels: ChannelStatistics,
    /// Explicit `R × d` channels for single-instance designs.
    pub fixed_channels: Option<ChannelRealization>,
    pub experiment: Experiment,
    pub sweep: SweepSettings,
}

/// 1-based line of the first `key =` assignment inside `[section]`.
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            let lhs = t.split('=').next().unwrap_or("").trim();
            if lhs == key {
                return Some(i + 1);
            }
        }
    }
    None
}

fn line_from_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Resolver<'a> {
    text: &'a str,
    origin: &'a str,
}

impl Resolver<'_> {
    fn err(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> anyhow::Error {
        match line_of(self.text, section, key) {
            Some(l) => anyhow!("{}:{l}: [{section}] {key}: {msg}", self.origin),
            None => anyhow!("{}: [{section}] {key}: {msg}", self.origin),
        }
    }

    /// Linear value from `key` or `key_db`.
    fn pick(&self, section: &str, key: &str, linear: Option<f64>, db: Option<f64>, default: f64) -> Result<f64> {
        match (linear, db) {
            (Some(_), Some(_)) => Err(self.err(section, key, format!("give either {key} or {key}_db, not both"))),
            (Some(v), None) => Ok(v),
            (None, Some(v)) => Ok(db_to_linear(v)),
            (None, None) => Ok(default),
        }
    }

    /// Complex `rows × cols` matrix from `{name}_re` and optional `{name}_im`.
    fn matrix(
        &self,
        name: &str,
        re: &Option<Vec<Vec<f64>>>,
        im: &Option<Vec<Vec<f64>>>,
        rows: usize,
        cols: usize,
    ) -> Result<Option<CMatrix>> {
        let key_re = format!("{name}_re");
        let key_im = format!("{name}_im");
        let Some(re) = re else {
            if im.is_some() {
                return Err(self.err("channels", &key_im, format!("given without {key_re}")));
            }
            return Ok(None);
        };
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == rows && m.iter().all(|row| row.len() == cols);
        if !shape_ok(re) {
            return Err(self.err("channels", &key_re, format!("expected {rows} rows of {cols} entries")));
        }
        if let Some(im) = im {
            if !shape_ok(im) {
                return Err(self.err("channels", &key_im, format!("expected {rows} rows of {cols} entries")));
            }
        }
        Ok(Some(CMatrix::from_fn(rows, cols, |i, j| {
            C64::new(re[i][j], im.as_ref().map_or(0.0, |m| m[i][j]))
        })))
    }
}

pub fn parse(text: &str, origin: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_from_offset(text, s.start));
        match line {
            Some(l) => anyhow!("{origin}:{l}: {}", e.message()),
            None => anyhow!("{origin}: {}", e.message()),
        }
    })?;
    let r = Resolver { text, origin };
    let n = &raw.network;
    let num_relays = n.num_relays.unwrap_or(15);
    let num_users = n.num_users.unwrap_or(2);
    let powers = match (&n.source_powers, n.source_power, n.source_power_db) {
        (Some(v), None, None) => v.clone(),
        (Some(_), _, _) => {
            return Err(r.err("network", "source_powers", "conflicts with source_power / source_power_db"))
        }
        (None, lin, db) => vec![r.pick("network", "source_power", lin, db, 1.0)?; num_users],
    };
    let sigma_v = r.pick("network", "relay_noise_var", n.relay_noise_var, n.relay_noise_var_db, 1.0)?;
    let sigma_n = r.pick("network", "dest_noise_var", n.dest_noise_var, n.dest_noise_var_db, 1.0)?;
    let gamma = r.pick("network", "sinr_target", n.sinr_target, n.sinr_target_db, 1.0)?;
    let network = NetworkConfig::new(num_relays, num_users, powers, sigma_v, sigma_n, vec![gamma; num_users])
        .map_err(|e| r.err("network", "num_relays", e))?;

    let c = &raw.channels;
    let var_f = r.pick("channels", "var_f", c.var_f, c.var_f_db, 10.0)?;
    let var_g = r.pick("channels", "var_g", c.var_g, c.var_g_db, 10.0)?;
    let channels = ChannelStatistics::rayleigh(var_f, var_g).map_err(|e| r.err("channels", "var_f", e))?;

    let f = r.matrix("f", &c.f_re, &c.f_im, num_relays, num_users)?;
    let g = r.matrix("g", &c.g_re, &c.g_im, num_relays, num_users)?;
    let fixed_channels = match (f, g) {
        (Some(f), Some(g)) => Some(ChannelRealization::new(f, g).map_err(|e| r.err("channels", "f_re", e))?),
        (None, None) => None,
        _ => return Err(r.err("channels", "f_re", "explicit channels need both f_re and g_re")),
    };

    let rho = raw.uncertainty.rho.unwrap_or(0.01);
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(r.err("uncertainty", "rho", "must be a nonnegative number"));
    }

    let s = &raw.sweep;
    let experiment = match &s.experiment {
        Some(e) => e.parse().map_err(|e| r.err("sweep", "experiment", e))?,
        None => Experiment::Power,
    };
    let methods = match &s.methods {
        Some(list) => list
            .iter()
            .map(|m| m.parse::<Method>().map_err(|e| r.err("sweep", "methods", e)))
            .collect::<Result<Vec<_>>>()?,
        None => Method::ALL.to_vec(),
    };
    let defaults = SweepSettings::default();
    let mut solver = SolverSettings::default();
    if let Some(t) = raw.solver.tolerance {
        if !(t > 0.0 && t.is_finite()) {
            return Err(r.err("solver", "tolerance", "must be positive"));
        }
        solver = solver.with_tolerance(t);
    }
    if let Some(it) = raw.solver.max_iter {
        solver.max_iter = it;
    }
    let sweep = SweepSettings {
        rho,
        gamma_grid_db: s.gamma_grid_db.clone().unwrap_or(defaults.gamma_grid_db),
        trials: s.trials.unwrap_or(defaults.trials),
        methods,
        seed: s.seed.unwrap_or(defaults.seed),
        randomization: RandomizationSettings {
            num_candidates: raw.solver.randomizations.unwrap_or(defaults.randomization.num_candidates),
        },
        solver,
        symbols_per_trial: s.symbols_per_trial.unwrap_or(defaults.symbols_per_trial),
        perturbations_per_trial: s.perturbations_per_trial.unwrap_or(defaults.perturbations_per_trial),
        sinr_samples: s.sinr_samples.unwrap_or(defaults.sinr_samples),
    };
    Ok(RunConfig {
        network,
        channels,
        fixed_channels,
        experiment,
        sweep,
    })
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text, &path.display().to_string())
}

/// Applies `SOLVER_TOL` when set.
pub fn apply_env(settings: &mut SolverSettings) -> Result<()> {
    if let Ok(v) = std::env::var(SOLVER_TOL_ENV) {
        let tol: f64 = v
            .trim()
            .parse()
            .map_err(|_| anyhow!("{SOLVER_TOL_ENV}={v} is not a number"))?;
        if !(tol > 0.0 && tol.is_finite()) {
            bail!("{SOLVER_TOL_ENV} must be positive");
        }
        *settings = settings.with_tolerance(tol);
    }
    Ok(())
}
