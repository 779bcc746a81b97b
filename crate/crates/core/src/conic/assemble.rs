//! Conic programs for the three relay beamforming designs, plus the per-user
//! certificate program that evaluates the exact worst case of a fixed `X`.
//!
//! All three share `X ⪰ 0` (Hermitian `R × R`, embedded as a `2R × 2R` block):
//!
//! * non-robust: `min Tr(X D)` s.t. `Tr(X T_k) ≥ σ_n² γ_k`;
//! * MoM: `min Tr(X (D + ε_D I))` s.t.
//!   `Tr(X R_h^k) − ε^{Rh} Tr X ≥ γ_k [Tr(X (Q_k + D_k)) + (ε^Q + ε^D) Tr X + σ_n²]`;
//! * accurate robust: `min Tr(X (D + ε_D I))` s.t. `M_k(Z_k^Q, Z_k^D, Z_k^{Rh}, X) ≥ 0`
//!   with `Z_k^Q, Z_k^{Rh} ⪰ 0`, `Z_k^D` diagonal and nonnegative, where
//!   `M_k = Tr(X T_k) − Tr(Z^{Rh} R_h^k) − Tr(Z^Q Q_k) − Tr(Z^D D_k)
//!          − ε^{Rh} ‖Z^{Rh} − X‖ − ε^Q ‖Z^Q + γ_k X‖ − ε^D ‖(Z^D + γ_k X) ∘ I‖ − σ_n² γ_k`.
//!   The norms are epigraph slacks `t_k^R, t_k^Q, t_k^D` in second-order cones.

use super::{BlockId, ConicError, ConicProgram, Constraint, ConstraintId, Coord, LinearExpr, Part};
use crate::linalg::{self, CMatrix};
use crate::matrices::BeamformingMatrices;
use crate::model::NetworkConfig;
use crate::uncertainty::UncertaintyBounds;

/// Weight of the norm terms in `M_k`. Minimizing the Lagrangian over each
/// perturbation block and then maximizing over its multiplier `λ` yields
/// `−ε ‖A‖_F` for the block with stationarity numerator `A`.
pub const DUAL_NORM_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramKind {
    NonRobust,
    Mom,
    AccurateRobust,
}

/// Blocks owned by one user in the accurate-robust program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RobustUserBlocks {
    /// Embedded `Z_k^Q`.
    pub z_q: BlockId,
    /// Embedded `Z_k^{Rh}`.
    pub z_rh: BlockId,
    /// Diagonal of `Z_k^D`.
    pub z_d: BlockId,
    /// `[t^Q, t^D, t^R]`.
    pub slacks: BlockId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramLayout {
    pub num_relays: usize,
    /// Embedded `X`.
    pub x: BlockId,
    /// One per user, accurate-robust programs only.
    pub users: Vec<RobustUserBlocks>,
    /// The per-user scalar inequality (`SINR` or `M_k ≥ 0`).
    pub sinr_constraints: Vec<ConstraintId>,
    pub second_order: Vec<ConstraintId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingProgram {
    pub kind: ProgramKind,
    pub program: ConicProgram,
    pub layout: ProgramLayout,
}

fn check_dims(m: &BeamformingMatrices, config: &NetworkConfig) -> Result<(), ConicError> {
    if m.num_relays() != config.num_relays() || m.num_users() != config.num_users() {
        return Err(ConicError::Dimension(format!(
            "matrices are for {} relays / {} users, config has {} / {}",
            m.num_relays(),
            m.num_users(),
            config.num_relays(),
            config.num_users()
        )));
    }
    Ok(())
}

fn check_bounds(bounds: &UncertaintyBounds, config: &NetworkConfig) -> Result<(), ConicError> {
    if bounds.num_users() != config.num_users() {
        return Err(ConicError::Dimension(format!(
            "bounds are for {} users, config has {}",
            bounds.num_users(),
            config.num_users()
        )));
    }
    Ok(())
}

fn power_objective(x: BlockId, m: &BeamformingMatrices, eps_d: f64) -> LinearExpr {
    let weights = m.d().map(|v| v + eps_d);
    let mut obj = LinearExpr::new();
    obj.add_hermitian_trace(x, &linalg::diag_matrix(&weights), 1.0);
    obj
}

/// Minimum-power design with nominal SINR constraints.
pub fn assemble_nonrobust_sdp(
    m: &BeamformingMatrices,
    config: &NetworkConfig,
) -> Result<BeamformingProgram, ConicError> {
    check_dims(m, config)?;
    let n = m.num_relays();
    let mut p = ConicProgram::new();
    let x = p.add_psd(2 * n, "X");
    p.set_objective(power_objective(x, m, 0.0));
    let sinr_constraints = (0..m.num_users())
        .map(|k| {
            let gamma = config.sinr_targets()[k];
            let mut e = LinearExpr::constant(-config.dest_noise_var() * gamma);
            e.add_hermitian_trace(x, m.tk(k), 1.0);
            p.add_constraint(Constraint::NonNegative(e))
        })
        .collect();
    Ok(BeamformingProgram {
        kind: ProgramKind::NonRobust,
        program: p,
        layout: ProgramLayout {
            num_relays: n,
            x,
            users: Vec::new(),
            sinr_constraints,
            second_order: Vec::new(),
        },
    })
}

/// `R_h^k − ε^{Rh} I − γ_k (Q_k + D_k + (ε^Q + ε^D) I)`: user `k` meets its
/// target under every modeled perturbation when `w^H C w ≥ σ_n² γ_k` (Rayleigh–Ritz
/// bound on each block, PSD side conditions ignored).
pub fn mom_coefficient(m: &BeamformingMatrices, bounds: &UncertaintyBounds, gamma: f64, k: usize) -> CMatrix {
    let n = m.num_relays();
    let identity = CMatrix::identity(n, n);
    let c = m.rh(k) - identity.scale(bounds.eps_rh[k])
        - (m.interference_plus_noise(k) + identity.scale(bounds.eps_q[k] + bounds.eps_dk[k])).scale(gamma);
    linalg::hermitize(&c)
}

/// Min-over-max design: worst-case numerator over worst-case denominator, each
/// bounded by Rayleigh–Ritz (`|w^H Δ w| ≤ ε ‖w‖²`), ignoring the PSD side conditions.
pub fn assemble_mom_sdp(
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
) -> Result<BeamformingProgram, ConicError> {
    check_dims(m, config)?;
    check_bounds(bounds, config)?;
    let n = m.num_relays();
    let identity = CMatrix::identity(n, n);
    let mut p = ConicProgram::new();
    let x = p.add_psd(2 * n, "X");
    p.set_objective(power_objective(x, m, bounds.eps_d));
    let mut sinr_constraints = Vec::with_capacity(m.num_users());
    for k in 0..m.num_users() {
        let gamma = config.sinr_targets()[k];
        let signal = m.rh(k) - identity.scale(bounds.eps_rh[k]);
        let (vals, _) = linalg::hermitian_eigen(&signal);
        if vals[0] <= 0.0 {
            return Err(ConicError::TriviallyInfeasible { user: k });
        }
        let coeff = mom_coefficient(m, bounds, gamma, k);
        let mut e = LinearExpr::constant(-config.dest_noise_var() * gamma);
        e.add_hermitian_trace(x, &coeff, 1.0);
        sinr_constraints.push(p.add_constraint(Constraint::NonNegative(e)));
    }
    Ok(BeamformingProgram {
        kind: ProgramKind::Mom,
        program: p,
        layout: ProgramLayout {
            num_relays: n,
            x,
            users: Vec::new(),
            sinr_constraints,
            second_order: Vec::new(),
        },
    })
}

/// Real coordinates of a Hermitian `n × n` matrix whose Euclidean norm equals
/// its Frobenius norm: `X_ii`, then `√2 Re X_ij`, `√2 Im X_ij` for `i < j`.
fn hermitian_coordinates(n: usize) -> Vec<(usize, usize, Part, f64)> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push((i, i, Part::Re, 1.0));
    }
    let s = std::f64::consts::SQRT_2;
    for j in 0..n {
        for i in 0..j {
            out.push((i, j, Part::Re, s));
            out.push((i, j, Part::Im, s));
        }
    }
    out
}

fn hermitian_value(h: &CMatrix, i: usize, j: usize, part: Part) -> f64 {
    match part {
        Part::Re => h[(i, j)].re,
        Part::Im => h[(i, j)].im,
    }
}

/// Where `X` comes from when writing `M_k`: a variable block or fixed data.
enum XSource<'a> {
    Variable(BlockId),
    Fixed(&'a CMatrix),
}

impl XSource<'_> {
    fn add_entry(&self, e: &mut LinearExpr, n: usize, i: usize, j: usize, part: Part, scale: f64) {
        match self {
            XSource::Variable(b) => e.add_hermitian_entry(*b, n, i, j, part, scale),
            XSource::Fixed(x) => e.add_constant(scale * hermitian_value(x, i, j, part)),
        }
    }

    fn add_trace(&self, e: &mut LinearExpr, c: &CMatrix, scale: f64) {
        match self {
            XSource::Variable(b) => e.add_hermitian_trace(*b, c, scale),
            XSource::Fixed(x) => e.add_constant(scale * linalg::trace_product(c, x)),
        }
    }
}

/// Adds user `k`'s dual blocks, the three second-order cones, and returns the
/// expression `M_k` (without the `−σ_n² γ_k` constant).
fn add_user_dual_terms(
    p: &mut ConicProgram,
    x: &XSource<'_>,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    gamma: f64,
    k: usize,
    second_order: &mut Vec<ConstraintId>,
) -> (RobustUserBlocks, LinearExpr) {
    let n = m.num_relays();
    let z_q = p.add_psd(2 * n, format!("ZQ[{k}]"));
    let z_rh = p.add_psd(2 * n, format!("ZRh[{k}]"));
    let z_d = p.add_nonneg(n, format!("zD[{k}]"));
    let slacks = p.add_free(3, format!("t[{k}]"));
    let t = |i| LinearExpr::new().term(Coord::element(slacks, i), 1.0);

    let coords = hermitian_coordinates(n);
    // ‖Z^{Rh} − X‖_F ≤ t^R
    let rh_vec = coords
        .iter()
        .map(|&(i, j, part, s)| {
            let mut e = LinearExpr::new();
            e.add_hermitian_entry(z_rh, n, i, j, part, s);
            x.add_entry(&mut e, n, i, j, part, -s);
            e
        })
        .collect();
    second_order.push(p.add_constraint(Constraint::SecondOrder {
        bound: t(2),
        vector: rh_vec,
    }));
    // ‖Z^Q + γ X‖_F ≤ t^Q
    let q_vec = coords
        .iter()
        .map(|&(i, j, part, s)| {
            let mut e = LinearExpr::new();
            e.add_hermitian_entry(z_q, n, i, j, part, s);
            x.add_entry(&mut e, n, i, j, part, gamma * s);
            e
        })
        .collect();
    second_order.push(p.add_constraint(Constraint::SecondOrder {
        bound: t(0),
        vector: q_vec,
    }));
    // ‖z^D + γ diag(X)‖₂ ≤ t^D
    let d_vec = (0..n)
        .map(|i| {
            let mut e = LinearExpr::new().term(Coord::element(z_d, i), 1.0);
            x.add_entry(&mut e, n, i, i, Part::Re, gamma);
            e
        })
        .collect();
    second_order.push(p.add_constraint(Constraint::SecondOrder {
        bound: t(1),
        vector: d_vec,
    }));

    let mut mk = LinearExpr::new();
    x.add_trace(&mut mk, m.tk(k), 1.0);
    mk.add_hermitian_trace(z_rh, m.rh(k), -1.0);
    mk.add_hermitian_trace(z_q, m.qk(k), -1.0);
    for (i, &v) in m.dk(k).iter().enumerate() {
        mk.push(Coord::element(z_d, i), -v);
    }
    mk.push(Coord::element(slacks, 0), -DUAL_NORM_WEIGHT * bounds.eps_q[k]);
    mk.push(Coord::element(slacks, 1), -DUAL_NORM_WEIGHT * bounds.eps_dk[k]);
    mk.push(Coord::element(slacks, 2), -DUAL_NORM_WEIGHT * bounds.eps_rh[k]);
    (
        RobustUserBlocks {
            z_q,
            z_rh,
            z_d,
            slacks,
        },
        mk,
    )
}

/// Accurate worst-case robust design with the rank-one constraint dropped.
pub fn assemble_robust_sdp(
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
) -> Result<BeamformingProgram, ConicError> {
    check_dims(m, config)?;
    check_bounds(bounds, config)?;
    let n = m.num_relays();
    let mut p = ConicProgram::new();
    let x = p.add_psd(2 * n, "X");
    p.set_objective(power_objective(x, m, bounds.eps_d));
    let mut users = Vec::with_capacity(m.num_users());
    let mut sinr_constraints = Vec::with_capacity(m.num_users());
    let mut second_order = Vec::new();
    for k in 0..m.num_users() {
        let gamma = config.sinr_targets()[k];
        let (blocks, mut mk) =
            add_user_dual_terms(&mut p, &XSource::Variable(x), m, bounds, gamma, k, &mut second_order);
        mk.add_constant(-config.dest_noise_var() * gamma);
        sinr_constraints.push(p.add_constraint(Constraint::NonNegative(mk)));
        users.push(blocks);
    }
    Ok(BeamformingProgram {
        kind: ProgramKind::AccurateRobust,
        program: p,
        layout: ProgramLayout {
            num_relays: n,
            x,
            users,
            sinr_constraints,
            second_order,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertificateLayout {
    pub user: usize,
    pub blocks: RobustUserBlocks,
}

/// For fixed `X`, `max_Z M_k(Z, X)` written as a minimization of
/// `Tr(X T_k) − σ_n² γ_k − M_k`; its optimal value `v*` gives the exact
/// worst-case slack `Tr(X T_k) − σ_n² γ_k − v*`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateProgram {
    pub program: ConicProgram,
    pub layout: CertificateLayout,
    /// `Tr(X T_k) − σ_n² γ_k`.
    pub nominal_slack: f64,
}

pub fn assemble_certificate_sdp(
    x: &CMatrix,
    m: &BeamformingMatrices,
    bounds: &UncertaintyBounds,
    config: &NetworkConfig,
    k: usize,
) -> Result<CertificateProgram, ConicError> {
    check_dims(m, config)?;
    check_bounds(bounds, config)?;
    if x.shape() != (m.num_relays(), m.num_relays()) {
        return Err(ConicError::Dimension("X does not match the relay count".into()));
    }
    if k >= m.num_users() {
        return Err(ConicError::Dimension(format!("user {k} out of range")));
    }
    let x = linalg::hermitize(x);
    let gamma = config.sinr_targets()[k];
    let mut p = ConicProgram::new();
    let mut soc = Vec::new();
    let (blocks, mk) = add_user_dual_terms(&mut p, &XSource::Fixed(&x), m, bounds, gamma, k, &mut soc);
    let nominal = linalg::trace_product(&x, m.tk(k)) - config.dest_noise_var() * gamma;
    // objective = Tr(X T_k) − M_k = Σ Tr(Z ·) + ε-weighted slacks
    let mut obj = LinearExpr::new();
    obj.add_expr(&mk, -1.0);
    obj.constant = 0.0;
    p.set_objective(obj);
    Ok(CertificateProgram {
        program: p,
        layout: CertificateLayout { user: k, blocks },
        nominal_slack: nominal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{solve, BlockKind, SolveStatus, SolverSettings};
    use crate::matrices::build_matrices;
    use crate::model::{generate_channels, ChannelRealization, ChannelStatistics};
    use crate::uncertainty::derive_bounds;
    use num_complex::Complex64;

    fn scalar(gamma: f64) -> (BeamformingMatrices, NetworkConfig) {
        let cfg = NetworkConfig::uniform(1, 1, 1.0, 1.0, 1.0, gamma).unwrap();
        let one = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let ch = ChannelRealization::new(one.clone(), one).unwrap();
        (build_matrices(&ch, &cfg).unwrap(), cfg)
    }

    fn full_size_instance(seed: u64, gamma: f64) -> (BeamformingMatrices, NetworkConfig) {
        let cfg = NetworkConfig::uniform(15, 2, 1.0, 1.0, 1.0, gamma).unwrap();
        let stats = ChannelStatistics::rayleigh(10.0, 10.0).unwrap();
        (build_matrices(&generate_channels(&stats, &cfg, seed), &cfg).unwrap(), cfg)
    }

    #[test]
    fn robust_program_counts_at_full_size() {
        let (m, cfg) = full_size_instance(1, 1.0);
        let b = derive_bounds(&m, 0.01).unwrap();
        let bp = assemble_robust_sdp(&m, &b, &cfg).unwrap();
        let kinds: Vec<BlockKind> = bp.program.blocks().iter().map(|b| b.kind).collect();
        let psd = kinds.iter().filter(|k| **k == BlockKind::Psd(30)).count();
        let nonneg = kinds.iter().filter(|k| **k == BlockKind::Nonneg(15)).count();
        let free: usize = kinds
            .iter()
            .map(|k| if let BlockKind::Free(n) = k { *n } else { 0 })
            .sum();
        // X plus Z^Q and Z^Rh for each of the two users; embedded size 2R = 30
        assert_eq!(psd, 5);
        assert_eq!(nonneg, 2);
        assert_eq!(free, 6);
        let socs = bp
            .program
            .constraints()
            .iter()
            .filter(|c| matches!(c, Constraint::SecondOrder { .. }))
            .count();
        let lin = bp
            .program
            .constraints()
            .iter()
            .filter(|c| matches!(c, Constraint::NonNegative(_)))
            .count();
        assert_eq!((socs, lin), (6, 2));
        assert_eq!(bp.layout.second_order.len(), 6);
    }

    #[test]
    fn scalar_nonrobust_closed_form() {
        let (m, cfg) = scalar(0.5);
        let bp = assemble_nonrobust_sdp(&m, &cfg).unwrap();
        let s = solve(&bp.program, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-5, "{}", s.objective);
        let x = s.hermitian(bp.layout.x);
        assert!((x[(0, 0)].re - 1.0).abs() < 1e-5);
    }

    #[test]
    fn scalar_robust_with_zero_uncertainty_matches_closed_form() {
        let (m, cfg) = scalar(0.5);
        let bp = assemble_robust_sdp(&m, &UncertaintyBounds::zero(1), &cfg).unwrap();
        let s = solve(&bp.program, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-5, "{}", s.objective);
    }

    #[test]
    fn zero_uncertainty_mom_equals_nonrobust_program_value() {
        let (m, cfg) = full_size_instance(3, 2.0);
        let s = SolverSettings::default();
        let a = solve(&assemble_nonrobust_sdp(&m, &cfg).unwrap().program, &s).unwrap();
        let b = solve(&assemble_mom_sdp(&m, &UncertaintyBounds::zero(2), &cfg).unwrap().program, &s).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-5 * a.objective);
    }

    #[test]
    fn scalar_mom_one_dimensional_algebra() {
        // (1 − ε_R) w² ≥ γ ((1 + ε_D) w² + 1) with ε_R = 0.01, ε_D(k) = 0.01, Q = 0
        let (m, cfg) = scalar(0.5);
        let b = derive_bounds(&m, 0.01).unwrap();
        let w2 = 0.5 / (0.99 - 0.5 * 1.01);
        let want = w2 * (2.0 + 0.02);
        let s = solve(&assemble_mom_sdp(&m, &b, &cfg).unwrap().program, &SolverSettings::default()).unwrap();
        assert!((s.objective - want).abs() < 1e-6 * want, "{} vs {want}", s.objective);
    }

    #[test]
    fn mom_detects_dead_signal() {
        let (m, cfg) = scalar(0.5);
        let b = derive_bounds(&m, 1.5).unwrap();
        assert_eq!(
            assemble_mom_sdp(&m, &b, &cfg).unwrap_err(),
            ConicError::TriviallyInfeasible { user: 0 }
        );
    }

    #[test]
    fn dimension_errors() {
        let (m, _) = scalar(0.5);
        let cfg2 = NetworkConfig::uniform(2, 1, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert!(assemble_nonrobust_sdp(&m, &cfg2).is_err());
        let (m, cfg) = scalar(0.5);
        assert!(assemble_robust_sdp(&m, &UncertaintyBounds::zero(2), &cfg).is_err());
    }

    #[test]
    fn certificate_value_matches_unconstrained_rayleigh_ritz_when_psd_is_slack() {
        // For a scalar network with Q = 0, the exact worst case of a fixed x is
        // x (T − ε_R − γ ε_D) since both ±ε perturbations keep the scalars positive.
        let (m, cfg) = scalar(0.5);
        let b = derive_bounds(&m, 0.01).unwrap();
        let x = CMatrix::from_element(1, 1, Complex64::new(1.2, 0.0));
        let cert = assemble_certificate_sdp(&x, &m, &b, &cfg, 0).unwrap();
        let s = solve(&cert.program, &SolverSettings::default()).unwrap();
        let worst = cert.nominal_slack - s.objective;
        let want = 1.2 * (0.5 - 0.01 - 0.5 * 0.01) - 0.5;
        assert!((worst - want).abs() < 1e-7, "{worst} vs {want}");
    }
}
