//! Network configuration, channel realizations and Rayleigh channel generation
//! for the two-hop amplify-and-forward relay network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid channel statistics: {0}")]
    InvalidStatistics(String),
    #[error("channel dimension mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("channel matrix contains non-finite entries")]
    NonFinite,
}

/// Converts a dB value to linear scale (`10^(x/10)`).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Dimensions, powers, noise variances and per-user SINR targets (linear scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    num_relays: usize,
    num_users: usize,
    source_powers: Vec<f64>,
    relay_noise_var: f64,
    dest_noise_var: f64,
    sinr_targets: Vec<f64>,
}

impl NetworkConfig {
    pub fn new(
        num_relays: usize,
        num_users: usize,
        source_powers: Vec<f64>,
        relay_noise_var: f64,
        dest_noise_var: f64,
        sinr_targets: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let cfg = Self {
            num_relays,
            num_users,
            source_powers,
            relay_noise_var,
            dest_noise_var,
            sinr_targets,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration where every user shares the same source power and SINR target.
    pub fn uniform(
        num_relays: usize,
        num_users: usize,
        source_power: f64,
        relay_noise_var: f64,
        dest_noise_var: f64,
        sinr_target: f64,
    ) -> Result<Self, ModelError> {
        Self::new(
            num_relays,
            num_users,
            vec![source_power; num_users],
            relay_noise_var,
            dest_noise_var,
            vec![sinr_target; num_users],
        )
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.num_relays == 0 {
            return bad("num_relays must be at least 1".into());
        }
        if self.num_users == 0 {
            return bad("num_users must be at least 1".into());
        }
        if self.source_powers.len() != self.num_users {
            return bad(format!(
                "source_powers has {} entries, expected {}",
                self.source_powers.len(),
                self.num_users
            ));
        }
        if self.sinr_targets.len() != self.num_users {
            return bad(format!(
                "sinr_targets has {} entries, expected {}",
                self.sinr_targets.len(),
                self.num_users
            ));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !self.source_powers.iter().all(|&p| positive(p)) {
            return bad("source powers must be finite and strictly positive".into());
        }
        if !self.sinr_targets.iter().all(|&g| positive(g)) {
            return bad("SINR targets must be finite and strictly positive".into());
        }
        if !positive(self.relay_noise_var) {
            return bad("relay_noise_var must be finite and strictly positive".into());
        }
        if !positive(self.dest_noise_var) {
            return bad("dest_noise_var must be finite and strictly positive".into());
        }
        Ok(())
    }

    pub fn num_relays(&self) -> usize {
        self.num_relays
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn source_powers(&self) -> &[f64] {
        &self.source_powers
    }

    pub fn relay_noise_var(&self) -> f64 {
        self.relay_noise_var
    }

    pub fn dest_noise_var(&self) -> f64 {
        self.dest_noise_var
    }

    pub fn sinr_targets(&self) -> &[f64] {
        &self.sinr_targets
    }

    /// Copy of this configuration with every user's SINR target set to `gamma` (linear).
    pub fn with_common_sinr_target(&self, gamma: f64) -> Result<Self, ModelError> {
        Self::new(
            self.num_relays,
            self.num_users,
            self.source_powers.clone(),
            self.relay_noise_var,
            self.dest_noise_var,
            vec![gamma; self.num_users],
        )
    }

    pub fn with_sinr_targets(&self, targets: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(
            self.num_relays,
            self.num_users,
            self.source_powers.clone(),
            self.relay_noise_var,
            self.dest_noise_var,
            targets,
        )
    }
}

/// First-hop matrix `F` (column `p`: source `p` to every relay) and second-hop
/// matrix `G` (column `k`: every relay to destination `k`), both `R × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    f: CMatrix,
    g: CMatrix,
}

impl ChannelRealization {
    pub fn new(f: CMatrix, g: CMatrix) -> Result<Self, ModelError> {
        if f.shape() != g.shape() {
            return Err(ModelError::DimensionMismatch {
                expected_rows: f.nrows(),
                expected_cols: f.ncols(),
                rows: g.nrows(),
                cols: g.ncols(),
            });
        }
        if !f.iter().chain(g.iter()).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self { f, g })
    }

    /// Checks the realization against the network dimensions.
    pub fn check_dimensions(&self, config: &NetworkConfig) -> Result<(), ModelError> {
        let (r, d) = (config.num_relays(), config.num_users());
        if self.f.shape() != (r, d) {
            return Err(ModelError::DimensionMismatch {
                expected_rows: r,
                expected_cols: d,
                rows: self.f.nrows(),
                cols: self.f.ncols(),
            });
        }
        Ok(())
    }

    pub fn f(&self) -> &CMatrix {
        &self.f
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn num_relays(&self) -> usize {
        self.f.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.f.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FadingDistribution {
    /// Zero-mean circularly-symmetric complex Gaussian entries, i.i.d. over relays and users.
    RayleighIid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStatistics {
    var_f: f64,
    var_g: f64,
    distribution: FadingDistribution,
}

impl ChannelStatistics {
    pub fn rayleigh(var_f: f64, var_g: f64) -> Result<Self, ModelError> {
        for (name, v) in [("var_f", var_f), ("var_g", var_g)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidStatistics(format!(
                    "{name} must be finite and strictly positive"
                )));
            }
        }
        Ok(Self {
            var_f,
            var_g,
            distribution: FadingDistribution::RayleighIid,
        })
    }

    pub fn var_f(&self) -> f64 {
        self.var_f
    }

    pub fn var_g(&self) -> f64 {
        self.var_g
    }

    pub fn distribution(&self) -> FadingDistribution {
        self.distribution
    }
}

/// Mixes a base seed with a sequence of stream indices (SplitMix64 finalizer),
/// so that per-trial and per-candidate generators are independent of the
/// order in which they are created.
pub fn derive_seed(base: u64, streams: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    streams
        .iter()
        .fold(mix(base), |acc, &s| mix(acc ^ mix(s.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws one `CN(0, var)` sample.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// Draws a Rayleigh-fading realization; the same `(stats, config, seed)` always
/// produces the same matrices.
pub fn generate_channels(
    stats: &ChannelStatistics,
    config: &NetworkConfig,
    seed: u64,
) -> ChannelRealization {
    let (r, d) = (config.num_relays(), config.num_users());
    let mut rng = seeded_rng(seed);
    let f = CMatrix::from_fn(r, d, |_, _| complex_gaussian(&mut rng, stats.var_f));
    let g = CMatrix::from_fn(r, d, |_, _| complex_gaussian(&mut rng, stats.var_g));
    ChannelRealization { f, g }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_config() -> NetworkConfig {
        NetworkConfig::uniform(15, 2, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(NetworkConfig::uniform(0, 1, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(NetworkConfig::uniform(1, 0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(NetworkConfig::uniform(2, 2, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(NetworkConfig::uniform(2, 2, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(NetworkConfig::uniform(2, 2, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(NetworkConfig::new(2, 2, vec![1.0], 1.0, 1.0, vec![1.0, 1.0]).is_err());
        assert!(NetworkConfig::new(2, 2, vec![1.0, 1.0], 1.0, 1.0, vec![1.0]).is_err());
        assert!(ChannelStatistics::rayleigh(0.0, 1.0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let stats = ChannelStatistics::rayleigh(10.0, 10.0).unwrap();
        let a = generate_channels(&stats, &reference_config(), 42);
        let b = generate_channels(&stats, &reference_config(), 42);
        assert_eq!(a, b);
        assert_eq!(a.f().shape(), (15, 2));
        let c = generate_channels(&stats, &reference_config(), 43);
        assert_ne!(a, c);
    }

    #[test]
    fn full_scale_sample_variance() {
        // 10 dB per-entry variance, 15x2 channels, many draws
        let stats = ChannelStatistics::rayleigh(db_to_linear(10.0), db_to_linear(10.0)).unwrap();
        let cfg = reference_config();
        let mut acc = 0.0;
        let mut n = 0usize;
        for s in 0..4000 {
            let ch = generate_channels(&stats, &cfg, s);
            acc += ch.f().iter().map(|z| z.norm_sqr()).sum::<f64>();
            n += ch.f().len();
        }
        let var = acc / n as f64;
        assert!((var - 10.0).abs() < 0.05 * 10.0, "sample variance {var}");
    }

    #[test]
    fn unit_variance_scalar_channel_law_of_large_numbers() {
        let stats = ChannelStatistics::rayleigh(1.0, 1.0).unwrap();
        let cfg = NetworkConfig::uniform(1, 1, 1.0, 1.0, 1.0, 1.0).unwrap();
        let n = 100_000;
        let (mut power, mut re2, mut im2) = (0.0, 0.0, 0.0);
        for s in 0..n {
            let f = generate_channels(&stats, &cfg, derive_seed(7, &[s])).f()[(0, 0)];
            power += f.norm_sqr();
            re2 += f.re * f.re;
            im2 += f.im * f.im;
        }
        let n = n as f64;
        assert!((power / n - 1.0).abs() < 0.02, "mean |f|^2 = {}", power / n);
        // circular symmetry: each component carries half the variance
        assert!((re2 / n - 0.5).abs() < 0.05 * 0.5);
        assert!((im2 / n - 0.5).abs() < 0.05 * 0.5);
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a = derive_seed(1, &[0]);
        let b = derive_seed(1, &[1]);
        let c = derive_seed(2, &[0]);
        assert!(a != b && a != c && b != c);
        assert_eq!(derive_seed(5, &[3, 4]), derive_seed(5, &[3, 4]));
        assert_ne!(derive_seed(5, &[3, 4]), derive_seed(5, &[4, 3]));
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((db_to_linear(0.0) - 1.0).abs() < 1e-12);
        assert!((linear_to_db(100.0) - 20.0).abs() < 1e-12);
    }
}
