//! Deterministic power and SINR matrices derived from one channel realization.
//!
//! With `R_x = Σ_p P_p f_p f_p^H + σ_v² I`, `h_k = g_k ∘ f_k` and
//! `h_k^p = g_k ∘ f_p`:
//!
//! * `D = diag(R_x)` weights the total relay power `w^H D w`,
//! * `R_h^k = P_k h_k h_k^H` carries the desired signal of user `k`,
//! * `Q_k = Σ_{p≠k} P_p h_k^p (h_k^p)^H` carries the interference,
//! * `D_k = σ_v² diag(|g_k|²)` carries the forwarded relay noise,
//! * `T_k = R_h^k − γ_k (Q_k + D_k)`, so that `sinr_k ≥ γ_k ⟺ w^H T_k w ≥ σ_n² γ_k`.

use nalgebra::DVector;
use thiserror::Error;

use crate::linalg::{self, CMatrix, CVector};
use crate::model::{ChannelRealization, ModelError, NetworkConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("user index {index} out of range for {users} users")]
    UserIndex { index: usize, users: usize },
}

/// Relay weights; relay `r` multiplies its received signal by `conj(w_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(CVector);

impl WeightVector {
    pub fn new(w: CVector) -> Self {
        Self(w)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CVector::zeros(n))
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `w w^H`.
    pub fn outer(&self) -> CMatrix {
        &self.0 * self.0.adjoint()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.scale(alpha))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingMatrices {
    rx: CMatrix,
    d: DVector<f64>,
    dk: Vec<DVector<f64>>,
    rh: Vec<CMatrix>,
    qk: Vec<CMatrix>,
    tk: Vec<CMatrix>,
    h: Vec<CVector>,
}

impl BeamformingMatrices {
    pub fn num_relays(&self) -> usize {
        self.d.len()
    }

    pub fn num_users(&self) -> usize {
        self.rh.len()
    }

    /// Relay received-signal covariance `R_x`.
    pub fn rx(&self) -> &CMatrix {
        &self.rx
    }

    /// Diagonal of `D`.
    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    /// Diagonal of `D_k`.
    pub fn dk(&self, k: usize) -> &DVector<f64> {
        &self.dk[k]
    }

    pub fn rh(&self, k: usize) -> &CMatrix {
        &self.rh[k]
    }

    pub fn qk(&self, k: usize) -> &CMatrix {
        &self.qk[k]
    }

    pub fn tk(&self, k: usize) -> &CMatrix {
        &self.tk[k]
    }

    /// Effective two-hop channel `h_k = g_k ∘ f_k`.
    pub fn h(&self, k: usize) -> &CVector {
        &self.h[k]
    }

    pub fn d_matrix(&self) -> CMatrix {
        linalg::diag_matrix(&self.d)
    }

    pub fn dk_matrix(&self, k: usize) -> CMatrix {
        linalg::diag_matrix(&self.dk[k])
    }

    /// `Q_k + D_k`.
    pub fn interference_plus_noise(&self, k: usize) -> CMatrix {
        &self.qk[k] + self.dk_matrix(k)
    }
}

/// Builds every matrix of the power/SINR model for the given realization.
pub fn build_matrices(
    channels: &ChannelRealization,
    config: &NetworkConfig,
) -> Result<BeamformingMatrices, MatrixError> {
    channels.check_dimensions(config)?;
    let (r, d) = (config.num_relays(), config.num_users());
    let powers = config.source_powers();
    let sigma_v2 = config.relay_noise_var();
    let (f, g) = (channels.f(), channels.g());

    let mut rx = CMatrix::identity(r, r).scale(sigma_v2);
    for (p, &power) in powers.iter().enumerate() {
        let fp = f.column(p);
        rx += (fp * fp.adjoint()).scale(power);
    }
    let rx = linalg::hermitize(&rx);
    let dvec = DVector::from_iterator(r, (0..r).map(|i| rx[(i, i)].re));

    let mut dk = Vec::with_capacity(d);
    let mut rh = Vec::with_capacity(d);
    let mut qk = Vec::with_capacity(d);
    let mut tk = Vec::with_capacity(d);
    let mut hs = Vec::with_capacity(d);
    for k in 0..d {
        let gk = g.column(k);
        let hk: CVector = gk.component_mul(&f.column(k));
        let rhk = linalg::hermitize(&(&hk * hk.adjoint()).scale(powers[k]));
        let mut q = CMatrix::zeros(r, r);
        for p in (0..d).filter(|&p| p != k) {
            let hkp: CVector = gk.component_mul(&f.column(p));
            q += (&hkp * hkp.adjoint()).scale(powers[p]);
        }
        let q = linalg::hermitize(&q);
        let dkk = DVector::from_iterator(r, gk.iter().map(|z| sigma_v2 * z.norm_sqr()));
        let gamma = config.sinr_targets()[k];
        let t = linalg::hermitize(&(&rhk - (&q + linalg::diag_matrix(&dkk)).scale(gamma)));
        dk.push(dkk);
        rh.push(rhk);
        qk.push(q);
        tk.push(t);
        hs.push(hk);
    }
    Ok(BeamformingMatrices {
        rx,
        d: dvec,
        dk,
        rh,
        qk,
        tk,
        h: hs,
    })
}

fn check_weights(w: &WeightVector, m: &BeamformingMatrices) -> Result<(), MatrixError> {
    if w.len() != m.num_relays() {
        return Err(MatrixError::WeightLength {
            expected: m.num_relays(),
            got: w.len(),
        });
    }
    Ok(())
}

/// Total relay transmit power `w^H D w`.
pub fn transmit_power(w: &WeightVector, m: &BeamformingMatrices) -> Result<f64, MatrixError> {
    check_weights(w, m)?;
    Ok(linalg::diagonal_quadratic_form(w.as_vector(), m.d()))
}

/// SINR of user `k` (zero-based): `w^H R_h^k w / (w^H (Q_k + D_k) w + σ_n²)`.
pub fn sinr(
    w: &WeightVector,
    m: &BeamformingMatrices,
    config: &NetworkConfig,
    k: usize,
) -> Result<f64, MatrixError> {
    check_weights(w, m)?;
    if k >= m.num_users() {
        return Err(MatrixError::UserIndex {
            index: k,
            users: m.num_users(),
        });
    }
    let v = w.as_vector();
    let signal = linalg::quadratic_form(v, m.rh(k));
    let denom = linalg::quadratic_form(v, m.qk(k))
        + linalg::diagonal_quadratic_form(v, m.dk(k))
        + config.dest_noise_var();
    Ok(signal.max(0.0) / denom)
}

/// SINR of every user.
pub fn sinr_all(
    w: &WeightVector,
    m: &BeamformingMatrices,
    config: &NetworkConfig,
) -> Result<Vec<f64>, MatrixError> {
    (0..m.num_users()).map(|k| sinr(w, m, config, k)).collect()
}

/// Upper bound of user `k`'s SINR over all weight vectors: the largest
/// generalized eigenvalue of the pencil `(R_h^k, Q_k + D_k)`, approached as `‖w‖ → ∞`.
pub fn sinr_supremum(m: &BeamformingMatrices, k: usize) -> f64 {
    // Q_k + D_k is positive definite whenever every |g_rk| > 0
    let b = m.interference_plus_noise(k);
    let chol = match nalgebra::Cholesky::new(b) {
        Some(c) => c,
        None => return f64::INFINITY,
    };
    // R_h^k is rank one: sup = P_k h^H B^{-1} h, written via the Cholesky solve
    let l_inv_rh = chol.l().solve_lower_triangular(m.rh(k)).expect("triangular solve");
    let reduced = chol
        .l()
        .solve_lower_triangular(&l_inv_rh.adjoint())
        .expect("triangular solve");
    let (vals, _) = linalg::hermitian_eigen(&linalg::hermitize(&reduced));
    vals[0].max(0.0)
}
