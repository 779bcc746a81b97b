//! Run manifests: everything needed to reproduce a sweep, plus a content hash
//! that also appears in the header of every CSV it describes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use relaybf_core::model::{ChannelStatistics, NetworkConfig};
use relaybf_core::sim::SweepSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Experiment;

pub const MANIFEST_FILE: &str = "manifest.json";

/// The part of a run that determines its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproducible {
    pub tool_version: String,
    pub experiment: String,
    pub per_trial: bool,
    pub network: NetworkConfig,
    pub channels: ChannelStatistics,
    pub sweep: SweepSettings,
}

impl Reproducible {
    pub fn new(experiment: Experiment, per_trial: bool, network: &NetworkConfig, channels: &ChannelStatistics, sweep: &SweepSettings) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.name().to_string(),
            per_trial,
            network: network.clone(),
            channels: *channels,
            sweep: sweep.clone(),
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment.parse()
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest content serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub sha256: String,
    pub rho: f64,
    pub gamma_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub run: Reproducible,
    /// Seconds since the Unix epoch at completion.
    pub finished_unix: u64,
    pub wall_clock_secs: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(run: Reproducible, wall_clock_secs: f64, outputs: Vec<PathBuf>) -> Self {
        let finished_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            sha256: run.hash(),
            rho: run.sweep.rho,
            gamma_grid_db: run.sweep.gamma_grid_db.clone(),
            trials: run.sweep.trials,
            seed: run.sweep.seed,
            run,
            finished_unix,
            wall_clock_secs,
            outputs,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let m: Self = serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", path.display()))?;
        if m.run.hash() != m.sha256 {
            bail!("{}: content does not match its sha256", path.display());
        }
        Ok(m)
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Reproducible {
        let net = NetworkConfig::uniform(4, 2, 1.0, 1.0, 1.0, 1.0).unwrap();
        let stats = ChannelStatistics::rayleigh(10.0, 10.0).unwrap();
        Reproducible::new(Experiment::Power, false, &net, &stats, &SweepSettings::default())
    }

    #[test]
    fn hash_ignores_wall_clock_and_paths() {
        let a = RunManifest::new(sample(), 1.0, vec!["a.csv".into()]);
        let b = RunManifest::new(sample(), 99.0, vec!["elsewhere/b.csv".into()]);
        assert_eq!(a.sha256, b.sha256);
        assert_eq!(a.sha256.len(), 64);
        let mut other = sample();
        other.sweep.seed += 1;
        assert_ne!(other.hash(), a.sha256);
    }

    #[test]
    fn manifest_round_trips_and_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let m = RunManifest::new(sample(), 0.5, vec![]);
        write_atomic(&path, serde_json::to_string_pretty(&m).unwrap().as_bytes()).unwrap();
        assert_eq!(RunManifest::load(&path).unwrap(), m);

        let text = std::fs::read_to_string(&path).unwrap().replace("\"trials\": 100", "\"trials\": 7");
        std::fs::write(&path, text).unwrap();
        assert!(RunManifest::load(&path).is_err());
    }
}
