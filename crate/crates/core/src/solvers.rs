//! Beamformer designs: solve the relaxed program of the chosen method, then
//! recover a weight vector from the PSD solution `X`.
//!
//! When `X` has numerical rank one the weights are its scaled principal
//! eigenvector. Otherwise Gaussian candidates `U Σ^{1/2} e` drawn from the
//! eigenspace of `X` are scaled up to feasibility and the cheapest one is kept.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{
    self, assemble_certificate_sdp, assemble_mom_sdp, assemble_nonrobust_sdp, assemble_robust_sdp,
    mom_coefficient, BeamformingProgram, ConicError, SolveStatus, SolverSettings,
};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::matrices::{transmit_power, BeamformingMatrices, MatrixError, WeightVector};
use crate::model::{derive_seed, seeded_rng, NetworkConfig};
use crate::uncertainty::{reconstruct_worst_case, UncertaintyBounds, UserDualBlocks, WorstCaseReport};

/// Eigenvalues above this fraction of `λ_max` count towards the numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-6;

/// Candidates needing a larger scaling than this are discarded.
pub const MAX_SCALING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    NonRobust,
    #[serde(rename = "MoM")]
    Mom,
    AccurateRobust,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::NonRobust, Method::Mom, Method::AccurateRobust];

    pub fn name(&self) -> &'static str {
        match self {
            Method::NonRobust => "NonRobust",
            Method::Mom => "MoM",
            Method::AccurateRobust => "AccurateRobust",
        }
    }

    pub fn is_robust(&self) -> bool {
        !matches!(self, Method::NonRobust)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "nonrobust" => Ok(Method::NonRobust),
            "mom" => Ok(Method::Mom),
            "accuraterobust" | "accurate" | "robust" => Ok(Method::AccurateRobust),
            _ => Err(format!("unknown method '{s}' (expected NonRobust, MoM or AccurateRobust)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomizationSettings {
    pub num_candidates: usize,
}

impl Default for RandomizationSettings {
    fn default() -> Self {
        Self { num_candidates: 100 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("solver failed with status {0:?}")]
    NumericalFailure(SolveStatus),
    #[error("none of the {candidates} randomization candidates could be made feasible")]
    ExtractionFailed { candidates: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    pub method: Method,
    pub status: SolveStatus,
    /// Hermitian relaxed solution; `None` when infeasible.
    pub x: Option<CMatrix>,
    pub w: Option<WeightVector>,
    /// Optimal value of the relaxed program.
    pub objective_relaxed: f64,
    /// The program's objective at `X = w w^H`: `w^H D w` for the non-robust
    /// design and the worst-case power `w^H (D + ε_D I) w` for the robust ones.
    pub objective_rank1: f64,
    /// Nominal transmit power `w^H D w`.
    pub nominal_power: f64,
    pub rank_numeric: usize,
    /// Per-user `Z_k^Q, Z_k^D, Z_k^{Rh}` of the accurate robust program.
    pub duals: Option<Vec<UserDualBlocks>>,
    pub iterations: u32,
}

impl SolverSolution {
    fn infeasible(method: Method, iterations: u32) -> Self {
        Self {
            method,
            status: SolveStatus::Infeasible,
            x: None,
            w: None,
            objective_relaxed: f64::INFINITY,
            objective_rank1: f64::INFINITY,
            nominal_power: f64::INFINITY,
            rank_numeric: 0,
            duals: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Eigenvalues above `RANK_THRESHOLD · λ_max`.
pub fn numerical_rank(x: &CMatrix) -> usize {
    let (vals, _) = linalg::hermitian_eigen(x);
    let top = vals.iter().copied().fold(0.0f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    vals.iter().filter(|&&l| l > RANK_THRESHOLD * top).count()
}

/// Matrices `C_k` such that `w^H C_k w ≥ σ_n² γ_k` is the feasibility check
/// used when scaling randomization candidates.
fn check_matrices(
    method: Method,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
) -> Vec<CMatrix> {
    (0..m.num_users())
        .map(|k| match method {
            Method::NonRobust => m.tk(k).clone(),
            Method::Mom | Method::AccurateRobust => {
                mom_coefficient(m, bounds, config.sinr_targets()[k], k)
            }
        })
        .collect()
}

/// Power weighting of the method's objective: `D`, or `D + ε_D I` when robust.
fn objective_weights(method: Method, m: &BeamformingMatrices, bounds: &UncertaintyBounds) -> DVector<f64> {
    let eps = if method.is_robust() { bounds.eps_d } else { 0.0 };
    m.d().map(|v| v + eps)
}

/// Smallest `α ≥ 1` with `α² w^H C_k w ≥ σ_n² γ_k` for every `k`, or `None`
/// when some `w^H C_k w ≤ 0` or the scaling exceeds [`MAX_SCALING`].
pub fn feasibility_scaling(w: &CVector, checks: &[CMatrix], config: &NetworkConfig) -> Option<f64> {
    let mut alpha: f64 = 1.0;
    for (k, c) in checks.iter().enumerate() {
        let need = config.dest_noise_var() * config.sinr_targets()[k];
        let have = linalg::quadratic_form(w, c);
        if !(have > 0.0) {
            return None;
        }
        alpha = alpha.max((need / have).sqrt());
    }
    (alpha <= MAX_SCALING).then_some(alpha)
}

/// `true` when `w` passes the method's feasibility check, with relative slack `tol`.
pub fn passes_check(
    w: &WeightVector,
    method: Method,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
    tol: f64,
) -> bool {
    check_matrices(method, m, bounds, config)
        .iter()
        .enumerate()
        .all(|(k, c)| {
            let need = config.dest_noise_var() * config.sinr_targets()[k];
            linalg::quadratic_form(w.as_vector(), c) >= need * (1.0 - tol)
        })
}

/// One scaled candidate per index, `None` where no finite scaling exists.
/// Candidate `l` depends only on `(seed, l)`.
pub fn randomization_candidates(
    x: &CMatrix,
    method: Method,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
    count: usize,
    seed: u64,
) -> Vec<Option<WeightVector>> {
    let n = x.nrows();
    let (vals, vecs) = linalg::hermitian_eigen(x);
    let top = vals.iter().copied().fold(0.0f64, f64::max);
    // U Σ^{1/2} restricted to the numerically nonzero eigenvalues
    let kept: Vec<usize> = (0..n).filter(|&i| vals[i] > RANK_THRESHOLD * top).collect();
    let mut factor = CMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        factor.set_column(c, &vecs.column(i).scale(vals[i].sqrt()));
    }
    let checks = check_matrices(method, m, bounds, config);
    (0..count)
        .into_par_iter()
        .map(|l| {
            let mut rng = seeded_rng(derive_seed(seed, &[l as u64]));
            let e = CVector::from_fn(kept.len(), |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            });
            let w = &factor * e;
            feasibility_scaling(&w, &checks, config).map(|a| WeightVector::new(w.scale(a)))
        })
        .collect()
}

/// Weight vector from a relaxed solution: principal eigenvector when `X` is
/// numerically rank one, randomization otherwise.
pub fn extract_rank_one(
    x: &CMatrix,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
    method: Method,
    settings: RandomizationSettings,
    seed: u64,
) -> Result<WeightVector, DesignError> {
    if x.shape() != (m.num_relays(), m.num_relays()) {
        return Err(ConicError::Dimension("X does not match the relay count".into()).into());
    }
    let (vals, vecs) = linalg::hermitian_eigen(x);
    if numerical_rank(x) <= 1 {
        let w = vecs.column(0).scale(vals[0].max(0.0).sqrt());
        return Ok(WeightVector::new(linalg::canonical_phase(&w)));
    }
    let weights = objective_weights(method, m, bounds);
    let best = randomization_candidates(x, method, m, bounds, config, settings.num_candidates, seed)
        .into_iter()
        .enumerate()
        .filter_map(|(l, w)| w.map(|w| (linalg::diagonal_quadratic_form(w.as_vector(), &weights), l, w)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    match best {
        Some((_, _, w)) => Ok(WeightVector::new(linalg::canonical_phase(w.as_vector()))),
        None => Err(DesignError::ExtractionFailed {
            candidates: settings.num_candidates,
        }),
    }
}

fn assemble(
    method: Method,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
) -> Result<Option<BeamformingProgram>, ConicError> {
    let bp = match method {
        Method::NonRobust => assemble_nonrobust_sdp(m, config),
        Method::Mom => assemble_mom_sdp(m, bounds, config),
        Method::AccurateRobust => assemble_robust_sdp(m, bounds, config),
    };
    match bp {
        Ok(bp) => Ok(Some(bp)),
        Err(ConicError::TriviallyInfeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Solves one design. Infeasible programs give a solution with status
/// `Infeasible` and no weights; bounds are ignored by the non-robust method.
pub fn design(
    method: Method,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
    randomization: RandomizationSettings,
    seed: u64,
    settings: &SolverSettings,
) -> Result<SolverSolution, DesignError> {
    let zero;
    let bounds = if method.is_robust() {
        bounds
    } else {
        zero = UncertaintyBounds::zero(m.num_users());
        &zero
    };
    let Some(bp) = assemble(method, m, bounds, config)? else {
        return Ok(SolverSolution::infeasible(method, 0));
    };
    let sol = conic::solve(&bp.program, settings)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Ok(SolverSolution::infeasible(method, sol.iterations)),
        other => return Err(DesignError::NumericalFailure(other)),
    }
    let x = linalg::hermitize(&sol.hermitian(bp.layout.x));
    let w = extract_rank_one(&x, m, bounds, config, method, randomization, seed)?;
    let weights = objective_weights(method, m, bounds);
    let duals = (method == Method::AccurateRobust).then(|| {
        bp.layout
            .users
            .iter()
            .map(|u| UserDualBlocks {
                z_q: linalg::hermitize(&sol.hermitian(u.z_q)),
                z_d: sol.vector(u.z_d).clone(),
                z_rh: linalg::hermitize(&sol.hermitian(u.z_rh)),
            })
            .collect()
    });
    Ok(SolverSolution {
        method,
        status: SolveStatus::Optimal,
        objective_relaxed: sol.objective,
        objective_rank1: linalg::diagonal_quadratic_form(w.as_vector(), &weights),
        nominal_power: transmit_power(&w, m)?,
        rank_numeric: numerical_rank(&x),
        x: Some(x),
        w: Some(w),
        duals,
        iterations: sol.iterations,
    })
}

/// Exact worst case of user `k` for a fixed `X`: solves the inner dual
/// program for the best `Z` blocks and rebuilds the minimizing perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub duals: UserDualBlocks,
    pub report: WorstCaseReport,
    /// Worst-case slack according to the inner program's optimal value.
    pub program_slack: f64,
}

pub fn certify_worst_case(
    x: &CMatrix,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
    k: usize,
    settings: &SolverSettings,
) -> Result<Certificate, DesignError> {
    let cp = assemble_certificate_sdp(x, m, bounds, config, k)?;
    let sol = conic::solve(&cp.program, settings)?;
    if sol.status != SolveStatus::Optimal {
        return Err(DesignError::NumericalFailure(sol.status));
    }
    let b = cp.layout.blocks;
    let duals = UserDualBlocks {
        z_q: linalg::hermitize(&sol.hermitian(b.z_q)),
        z_d: sol.vector(b.z_d).clone(),
        z_rh: linalg::hermitize(&sol.hermitian(b.z_rh)),
    };
    let report = reconstruct_worst_case(&duals, x, bounds, m, config, k);
    Ok(Certificate {
        duals,
        report,
        program_slack: cp.nominal_slack - sol.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{build_matrices, sinr};
    use crate::model::{generate_channels, ChannelRealization, ChannelStatistics};
    use crate::uncertainty::derive_bounds;

    fn scalar(gamma: f64) -> (BeamformingMatrices, NetworkConfig) {
        let cfg = NetworkConfig::uniform(1, 1, 1.0, 1.0, 1.0, gamma).unwrap();
        let one = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let ch = ChannelRealization::new(one.clone(), one).unwrap();
        (build_matrices(&ch, &cfg).unwrap(), cfg)
    }

    fn instance(r: usize, d: usize, gamma: f64, seed: u64) -> (BeamformingMatrices, NetworkConfig) {
        let cfg = NetworkConfig::uniform(r, d, 1.0, 10.0, 10.0, gamma).unwrap();
        let stats = ChannelStatistics::rayleigh(10.0, 10.0).unwrap();
        (build_matrices(&generate_channels(&stats, &cfg, seed), &cfg).unwrap(), cfg)
    }

    fn run(method: Method, m: &BeamformingMatrices, b: &UncertaintyBounds, cfg: &NetworkConfig) -> SolverSolution {
        design(method, m, b, cfg, RandomizationSettings::default(), 7, &SolverSettings::default()).unwrap()
    }

    #[test]
    fn scalar_nonrobust_closed_form() {
        let (m, cfg) = scalar(0.5);
        let s = run(Method::NonRobust, &m, &UncertaintyBounds::zero(1), &cfg);
        let w = s.w.unwrap();
        assert!((s.objective_relaxed - 2.0).abs() < 1e-6);
        assert!((w.as_vector()[0].norm() - 1.0).abs() < 1e-6);
        assert!(w.as_vector()[0].im == 0.0 && w.as_vector()[0].re > 0.0);
        assert_eq!(s.rank_numeric, 1);
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let (m, cfg) = scalar(1e9);
        let s = run(Method::NonRobust, &m, &UncertaintyBounds::zero(1), &cfg);
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.w.is_none());
    }

    #[test]
    fn mom_with_signal_swamped_is_infeasible() {
        let (m, cfg) = scalar(0.5);
        let b = derive_bounds(&m, 1.5).unwrap();
        let s = run(Method::Mom, &m, &b, &cfg);
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn ordering_and_rank_on_a_random_instance() {
        let (m, cfg) = instance(6, 2, 1.5, 3);
        let b = derive_bounds(&m, 0.01).unwrap();
        let nr = run(Method::NonRobust, &m, &b, &cfg);
        let acc = run(Method::AccurateRobust, &m, &b, &cfg);
        let mom = run(Method::Mom, &m, &b, &cfg);
        assert!(nr.objective_relaxed <= acc.objective_relaxed * (1.0 + 1e-6));
        assert!(acc.objective_relaxed <= mom.objective_relaxed * (1.0 + 1e-6));
        for s in [&nr, &acc, &mom] {
            assert_eq!(s.rank_numeric, 1);
            assert!(s.objective_relaxed <= s.objective_rank1 + 1e-5 * s.objective_rank1.max(1.0));
        }
        let w = nr.w.unwrap();
        for k in 0..2 {
            assert!(sinr(&w, &m, &cfg, k).unwrap() >= 1.5 * (1.0 - 1e-6));
        }
        assert_eq!(acc.duals.unwrap().len(), 2);
        assert!(nr.duals.is_none());
    }

    #[test]
    fn elementary_rank_one_gives_unit_vector() {
        let (m, cfg) = instance(4, 2, 1.0, 1);
        let mut x = CMatrix::zeros(4, 4);
        x[(0, 0)] = C64::new(1.0, 0.0);
        let b = UncertaintyBounds::zero(2);
        let w = extract_rank_one(&x, &m, &b, &cfg, Method::NonRobust, RandomizationSettings::default(), 0).unwrap();
        let mut e1 = CVector::zeros(4);
        e1[0] = C64::new(1.0, 0.0);
        assert!((w.as_vector() - e1).norm() < 1e-12);
    }

    #[test]
    fn rank_one_matrix_is_a_fixed_point() {
        let (m, cfg) = instance(5, 2, 1.0, 1);
        let v = CVector::from_fn(5, |i, _| C64::new(0.3 * i as f64 - 0.5, 0.2 + 0.1 * i as f64));
        let x = &v * v.adjoint();
        let b = UncertaintyBounds::zero(2);
        let w = extract_rank_one(&x, &m, &b, &cfg, Method::Mom, RandomizationSettings::default(), 0).unwrap();
        let inner = w.as_vector().dotc(&v).norm();
        assert!((inner - w.as_vector().norm() * v.norm()).abs() < 1e-10 * v.norm_squared());
        assert!((w.as_vector().norm() - v.norm()).abs() < 1e-10);
    }

    #[test]
    fn randomization_is_deterministic_and_checked() {
        let (m, cfg) = instance(5, 2, 0.5, 4);
        let b = derive_bounds(&m, 0.01).unwrap();
        let s = run(Method::NonRobust, &m, &b, &cfg);
        let w0 = s.w.unwrap();
        let mut v = CVector::zeros(5);
        v[1] = C64::new(1.0, 0.0);
        let x = w0.outer() + (&v * v.adjoint()).scale(0.3 * w0.as_vector().norm_squared());
        assert_eq!(numerical_rank(&x), 2);
        let r = RandomizationSettings { num_candidates: 50 };
        for method in Method::ALL {
            let a = extract_rank_one(&x, &m, &b, &cfg, method, r, 11);
            let c = extract_rank_one(&x, &m, &b, &cfg, method, r, 11);
            assert_eq!(a, c);
            if let Ok(w) = a {
                assert!(passes_check(&w, method, &m, &b, &cfg, 1e-9));
            }
        }
    }

    #[test]
    fn certificate_matches_inner_program() {
        let (m, cfg) = instance(4, 2, 1.0, 5);
        let b = derive_bounds(&m, 0.01).unwrap();
        let s = run(Method::AccurateRobust, &m, &b, &cfg);
        let x = s.x.unwrap();
        for k in 0..2 {
            let c = certify_worst_case(&x, &m, &b, &cfg, k, &SolverSettings::default()).unwrap();
            let scale = cfg.dest_noise_var() * cfg.sinr_targets()[k];
            assert!((c.report.slack - c.program_slack).abs() < 1e-5 * scale, "{} vs {}", c.report.slack, c.program_slack);
            assert!(c.program_slack > -1e-5 * scale);
        }
    }
}
