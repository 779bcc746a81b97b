//! Norm-bounded block perturbations of the power/SINR matrices.
//!
//! Each nominal matrix `M` is replaced by `M + Δ` with `‖Δ‖_F ≤ ε_M` and
//! `M + Δ ⪰ 0`; the perturbations of the diagonal matrices `D` and `D_k` are
//! themselves diagonal. This module derives the radii from a relative level,
//! samples admissible perturbations, and rebuilds the worst-case perturbation
//! of a solved robust program from its dual blocks.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix, CVector, C64};
use crate::matrices::{BeamformingMatrices, WeightVector};
use crate::model::{complex_gaussian, derive_seed, seeded_rng, NetworkConfig};

/// Absolute eigenvalue tolerance used by admissibility checks.
pub const PSD_TOL: f64 = 1e-9;

/// Alternating projections attempted per block before settling for a smaller norm.
pub const MAX_PROJECTIONS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("relative uncertainty level must be finite and nonnegative, got {0}")]
    InvalidLevel(f64),
    #[error("bound vectors must have one entry per user ({expected}), got {got}")]
    Length { expected: usize, got: usize },
    #[error("bounds must be finite and nonnegative")]
    NegativeBound,
}

/// Frobenius-ball radii of every perturbation block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBounds {
    pub eps_d: f64,
    pub eps_q: Vec<f64>,
    pub eps_dk: Vec<f64>,
    pub eps_rh: Vec<f64>,
    /// Level `ρ` the radii were derived from, when they were.
    pub relative_level: Option<f64>,
}

impl UncertaintyBounds {
    pub fn new(
        eps_d: f64,
        eps_q: Vec<f64>,
        eps_dk: Vec<f64>,
        eps_rh: Vec<f64>,
    ) -> Result<Self, UncertaintyError> {
        let d = eps_q.len();
        for v in [&eps_dk, &eps_rh] {
            if v.len() != d {
                return Err(UncertaintyError::Length {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(eps_d) || !eps_q.iter().chain(&eps_dk).chain(&eps_rh).all(|&x| ok(x)) {
            return Err(UncertaintyError::NegativeBound);
        }
        Ok(Self {
            eps_d,
            eps_q,
            eps_dk,
            eps_rh,
            relative_level: None,
        })
    }

    pub fn zero(num_users: usize) -> Self {
        Self {
            eps_d: 0.0,
            eps_q: vec![0.0; num_users],
            eps_dk: vec![0.0; num_users],
            eps_rh: vec![0.0; num_users],
            relative_level: Some(0.0),
        }
    }

    pub fn num_users(&self) -> usize {
        self.eps_q.len()
    }

    pub fn is_zero(&self) -> bool {
        self.eps_d == 0.0
            && self
                .eps_q
                .iter()
                .chain(&self.eps_dk)
                .chain(&self.eps_rh)
                .all(|&x| x == 0.0)
    }
}

/// Radii proportional to the nominal Frobenius norms: `ε_X = ρ ‖X‖_F`.
pub fn derive_bounds(
    m: &BeamformingMatrices,
    rho: f64,
) -> Result<UncertaintyBounds, UncertaintyError> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(UncertaintyError::InvalidLevel(rho));
    }
    let users = 0..m.num_users();
    Ok(UncertaintyBounds {
        eps_d: rho * m.d().norm(),
        eps_q: users.clone().map(|k| rho * linalg::frobenius_norm(m.qk(k))).collect(),
        eps_dk: users.clone().map(|k| rho * m.dk(k).norm()).collect(),
        eps_rh: users.map(|k| rho * linalg::frobenius_norm(m.rh(k))).collect(),
        relative_level: Some(rho),
    })
}

/// Perturbations seen by user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPerturbation {
    pub delta_q: CMatrix,
    /// Diagonal of `Δ_k^D`.
    pub delta_dk: DVector<f64>,
    pub delta_rh: CMatrix,
}

impl UserPerturbation {
    pub fn zeros(n: usize) -> Self {
        Self {
            delta_q: CMatrix::zeros(n, n),
            delta_dk: DVector::zeros(n),
            delta_rh: CMatrix::zeros(n, n),
        }
    }

    /// `Δ_k^T = Δ_k^{R^h} − γ_k (Δ_k^Q + Δ_k^D)`.
    pub fn delta_t(&self, gamma: f64) -> CMatrix {
        &self.delta_rh - (&self.delta_q + linalg::diag_matrix(&self.delta_dk)).scale(gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet {
    /// Diagonal of `Δ_D`.
    pub delta_d: DVector<f64>,
    pub users: Vec<UserPerturbation>,
}

impl PerturbationSet {
    pub fn zeros(num_relays: usize, num_users: usize) -> Self {
        Self {
            delta_d: DVector::zeros(num_relays),
            users: (0..num_users).map(|_| UserPerturbation::zeros(num_relays)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    /// Every block on its ball boundary whenever a PSD-feasible boundary point is found.
    BoundaryNorm,
    /// Radius drawn uniformly in volume inside the ball.
    UniformNorm,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Inadmissible {
    #[error("{block}: norm {norm:e} exceeds bound {bound:e}")]
    Norm { block: String, norm: f64, bound: f64 },
    #[error("{block}: perturbed matrix has eigenvalue {min_eig:e}")]
    NotPsd { block: String, min_eig: f64 },
    #[error("{block}: perturbation is not Hermitian")]
    NotHermitian { block: String },
}

fn norm_ok(norm: f64, bound: f64) -> bool {
    norm <= bound * (1.0 + 1e-9) + 1e-12
}

/// Verifies norm bounds, structure and PSD-ness of the perturbed matrices.
pub fn check_admissible(
    set: &PerturbationSet,
    bounds: &UncertaintyBounds,
    m: &BeamformingMatrices,
) -> Result<(), Inadmissible> {
    let n = set.delta_d.norm();
    if !norm_ok(n, bounds.eps_d) {
        return Err(Inadmissible::Norm {
            block: "D".into(),
            norm: n,
            bound: bounds.eps_d,
        });
    }
    if let Some(min) = (m.d() + &set.delta_d).iter().copied().reduce(f64::min) {
        if min < -PSD_TOL {
            return Err(Inadmissible::NotPsd {
                block: "D".into(),
                min_eig: min,
            });
        }
    }
    for (k, u) in set.users.iter().enumerate() {
        let herm: [(&str, &CMatrix, f64, &CMatrix); 2] = [
            ("Q", &u.delta_q, bounds.eps_q[k], m.qk(k)),
            ("Rh", &u.delta_rh, bounds.eps_rh[k], m.rh(k)),
        ];
        for (name, delta, bound, nominal) in herm {
            let block = format!("{name}[{k}]");
            if !linalg::is_hermitian(delta, 1e-10) {
                return Err(Inadmissible::NotHermitian { block });
            }
            let norm = linalg::frobenius_norm(delta);
            if !norm_ok(norm, bound) {
                return Err(Inadmissible::Norm { block, norm, bound });
            }
            let min_eig = linalg::min_eigenvalue(&(nominal + delta));
            if min_eig < -PSD_TOL {
                return Err(Inadmissible::NotPsd { block, min_eig });
            }
        }
        let block = format!("Dk[{k}]");
        let norm = u.delta_dk.norm();
        if !norm_ok(norm, bounds.eps_dk[k]) {
            return Err(Inadmissible::Norm {
                block,
                norm,
                bound: bounds.eps_dk[k],
            });
        }
        if let Some(min) = (m.dk(k) + &u.delta_dk).iter().copied().reduce(f64::min) {
            if min < -PSD_TOL {
                return Err(Inadmissible::NotPsd { block, min_eig: min });
            }
        }
    }
    Ok(())
}

/// Minimal vector-space interface shared by Hermitian and diagonal blocks.
trait BallElement: Clone {
    fn norm(&self) -> f64;
    fn scaled(&self, a: f64) -> Self;
}

impl BallElement for CMatrix {
    fn norm(&self) -> f64 {
        linalg::frobenius_norm(self)
    }
    fn scaled(&self, a: f64) -> Self {
        self.scale(a)
    }
}

impl BallElement for DVector<f64> {
    fn norm(&self) -> f64 {
        DVector::norm(self)
    }
    fn scaled(&self, a: f64) -> Self {
        self.scale(a)
    }
}

/// Alternates between the PSD-feasible set `{Δ : N + Δ ⪰ 0}` and the sphere of
/// radius `target`. `feasible_part(Δ)` must return `Π_PSD(N + Δ) − N`.
fn sample_in_ball<T: BallElement, R: Rng>(
    rng: &mut R,
    target: f64,
    zero: T,
    random_direction: impl Fn(&mut R) -> T,
    feasible_part: impl Fn(&T) -> T,
) -> T {
    if target <= 0.0 {
        return zero;
    }
    let unit = |v: T| {
        let n = v.norm();
        v.scaled(1.0 / n)
    };
    let mut delta = unit(random_direction(rng)).scaled(target);
    let mut best = zero;
    let mut best_norm = 0.0;
    for _ in 0..MAX_PROJECTIONS {
        let cand = feasible_part(&delta);
        let n = cand.norm();
        if n >= target * (1.0 - 1e-12) {
            // shrinking toward 0 stays feasible because the feasible set is convex and contains 0
            return cand.scaled(target / n);
        }
        if n > best_norm {
            best_norm = n;
            best = cand.clone();
        }
        delta = if n > 0.0 {
            cand.scaled(target / n)
        } else {
            unit(random_direction(rng)).scaled(target)
        };
    }
    best
}

fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        h[(i, i)] = C64::new(x, 0.0);
        for j in i + 1..n {
            let z = complex_gaussian(rng, 1.0);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

fn random_diagonal<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn target_radius<R: Rng>(rng: &mut R, eps: f64, mode: SamplingMode, dim: usize) -> f64 {
    match mode {
        SamplingMode::BoundaryNorm => eps,
        SamplingMode::UniformNorm => eps * rng.random::<f64>().powf(1.0 / dim as f64),
    }
}

fn sample_hermitian_block<R: Rng>(
    rng: &mut R,
    nominal: &CMatrix,
    eps: f64,
    mode: SamplingMode,
) -> CMatrix {
    let n = nominal.nrows();
    let target = target_radius(rng, eps, mode, n * n);
    sample_in_ball(
        rng,
        target,
        CMatrix::zeros(n, n),
        |r| random_hermitian(r, n),
        |delta| linalg::hermitize(&(linalg::project_psd(&(nominal + delta)) - nominal)),
    )
}

fn sample_diagonal_block<R: Rng>(
    rng: &mut R,
    nominal: &DVector<f64>,
    eps: f64,
    mode: SamplingMode,
) -> DVector<f64> {
    let n = nominal.len();
    let target = target_radius(rng, eps, mode, n);
    sample_in_ball(
        rng,
        target,
        DVector::zeros(n),
        |r| random_diagonal(r, n),
        |delta| (nominal + delta).map(|x| x.max(0.0)) - nominal,
    )
}

/// Draws one admissible perturbation set; blocks are independent across users
/// and matrix roles. Deterministic in `seed`.
pub fn sample_perturbation(
    bounds: &UncertaintyBounds,
    m: &BeamformingMatrices,
    mode: SamplingMode,
    seed: u64,
) -> PerturbationSet {
    let mut rng = seeded_rng(seed);
    let delta_d = sample_diagonal_block(&mut rng, m.d(), bounds.eps_d, mode);
    let users = (0..m.num_users())
        .map(|k| UserPerturbation {
            delta_q: sample_hermitian_block(&mut rng, m.qk(k), bounds.eps_q[k], mode),
            delta_dk: sample_diagonal_block(&mut rng, m.dk(k), bounds.eps_dk[k], mode),
            delta_rh: sample_hermitian_block(&mut rng, m.rh(k), bounds.eps_rh[k], mode),
        })
        .collect();
    PerturbationSet { delta_d, users }
}

/// `count` independent samples with seeds derived from `(seed, index)`.
pub fn sample_perturbations(
    bounds: &UncertaintyBounds,
    m: &BeamformingMatrices,
    mode: SamplingMode,
    seed: u64,
    count: usize,
) -> Vec<PerturbationSet> {
    use rayon::prelude::*;
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_perturbation(bounds, m, mode, derive_seed(seed, &[i])))
        .collect()
}

/// `w^H (T_k + Δ_k^T) w − σ_n² γ_k`: nonnegative iff user `k` meets its target
/// under the given perturbation.
pub fn constraint_slack(
    w: &WeightVector,
    m: &BeamformingMatrices,
    config: &NetworkConfig,
    delta: &UserPerturbation,
    k: usize,
) -> f64 {
    let gamma = config.sinr_targets()[k];
    let t = m.tk(k) + delta.delta_t(gamma);
    linalg::quadratic_form(w.as_vector(), &t) - config.dest_noise_var() * gamma
}

/// SINR of user `k` with perturbed matrices.
pub fn perturbed_sinr(
    w: &WeightVector,
    m: &BeamformingMatrices,
    config: &NetworkConfig,
    delta: &UserPerturbation,
    k: usize,
) -> f64 {
    let v = w.as_vector();
    let signal = linalg::quadratic_form(v, &(m.rh(k) + &delta.delta_rh));
    let denom = linalg::quadratic_form(v, &(m.qk(k) + &delta.delta_q))
        + linalg::diagonal_quadratic_form(v, &(m.dk(k) + &delta.delta_dk))
        + config.dest_noise_var();
    signal.max(0.0) / denom
}

/// Hermitian maximizer of `w^H (D + Δ) w` over `‖Δ‖_F ≤ ε_D`:
/// `ε_D w w^H / ‖w‖²`, giving the worst-case power `w^H (D + ε_D I) w`.
pub fn power_worst_case_direction(w: &WeightVector, eps_d: f64) -> CMatrix {
    let v: &CVector = w.as_vector();
    let n2 = v.norm_squared();
    if n2 == 0.0 {
        return CMatrix::zeros(v.len(), v.len());
    }
    (v * v.adjoint()).scale(eps_d / n2)
}

/// Dual blocks of user `k` in the robust program.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDualBlocks {
    pub z_q: CMatrix,
    /// Diagonal of `Z_k^D`.
    pub z_d: DVector<f64>,
    pub z_rh: CMatrix,
}

/// Worst-case perturbation rebuilt from the stationarity conditions, with the
/// resulting constraint slack.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseReport {
    pub perturbation: UserPerturbation,
    /// `Tr(X (T_k + Δ_k^T)) − σ_n² γ_k`; equals `w^H (T_k + Δ_k^T) w − σ_n² γ_k` for `X = w w^H`.
    pub slack: f64,
    /// Multipliers `λ^Q, λ^D, λ^{R^h}`; `None` where the block is forced to zero.
    pub lambda_q: Option<f64>,
    pub lambda_d: Option<f64>,
    pub lambda_rh: Option<f64>,
}

/// Scales `numerator` onto the sphere of radius `eps`: `Δ = numerator / (2λ)`
/// with `λ = ‖numerator‖ / (2 eps)`. Zero radius or zero numerator give `Δ = 0`.
fn onto_bound<T: BallElement>(numerator: T, eps: f64, zero: T) -> (T, Option<f64>) {
    let n = numerator.norm();
    if eps <= 0.0 || n == 0.0 {
        return (zero, None);
    }
    let lambda = n / (2.0 * eps);
    (numerator.scaled(1.0 / (2.0 * lambda)), Some(lambda))
}

/// Rebuilds user `k`'s worst-case perturbation from `X` and the dual blocks:
/// `Δ^Q ∝ Z^Q + γX`, `Δ^D ∝ (Z^D + γX) ∘ I`, `Δ^{R^h} ∝ Z^{R^h} − X`, each
/// placed on its norm bound.
pub fn reconstruct_worst_case(
    duals: &UserDualBlocks,
    x: &CMatrix,
    bounds: &UncertaintyBounds,
    m: &BeamformingMatrices,
    config: &NetworkConfig,
    k: usize,
) -> WorstCaseReport {
    let n = x.nrows();
    let gamma = config.sinr_targets()[k];
    let (delta_q, lambda_q) = onto_bound(
        linalg::hermitize(&(&duals.z_q + x.scale(gamma))),
        bounds.eps_q[k],
        CMatrix::zeros(n, n),
    );
    let x_diag = DVector::from_iterator(n, (0..n).map(|i| x[(i, i)].re));
    let (delta_dk, lambda_d) = onto_bound(
        &duals.z_d + x_diag.scale(gamma),
        bounds.eps_dk[k],
        DVector::zeros(n),
    );
    let (delta_rh, lambda_rh) = onto_bound(
        linalg::hermitize(&(&duals.z_rh - x)),
        bounds.eps_rh[k],
        CMatrix::zeros(n, n),
    );
    let perturbation = UserPerturbation {
        delta_q,
        delta_dk,
        delta_rh,
    };
    let t = m.tk(k) + perturbation.delta_t(gamma);
    let slack = linalg::trace_product(x, &t) - config.dest_noise_var() * gamma;
    WorstCaseReport {
        perturbation,
        slack,
        lambda_q,
        lambda_d,
        lambda_rh,
    }
}
