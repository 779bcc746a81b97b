//! Small complex linear-algebra helpers shared by the model, the perturbation
//! sampler and the solvers. Everything works on dense `nalgebra` matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance used when checking that a matrix is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Returns `(H + H^H) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `true` when `‖H − H^H‖_F ≤ tol · max(1, ‖H‖_F)`.
pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let skew = frobenius_norm(&(m - m.adjoint()));
    skew <= tol * frobenius_norm(m).max(1.0)
}

/// Complex diagonal matrix from a real diagonal.
pub fn diag_matrix(d: &DVector<f64>) -> CMatrix {
    CMatrix::from_diagonal(&d.map(|x| C64::new(x, 0.0)))
}

/// `Re Tr(A B)`, which is the exact value of `Tr(A B)` for Hermitian `A`, `B`.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// `Re(w^H A w)`.
pub fn quadratic_form(w: &CVector, a: &CMatrix) -> f64 {
    w.dotc(&(a * w)).re
}

/// `Σ_r |w_r|² d_r` for a real diagonal `d`.
pub fn diagonal_quadratic_form(w: &CVector, d: &DVector<f64>) -> f64 {
    w.iter().zip(d.iter()).map(|(z, x)| z.norm_sqr() * x).sum()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order (columns of the returned matrix follow the same order).
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Projection onto the PSD cone in Frobenius norm (negative eigenvalues clipped to zero).
pub fn project_psd(m: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(hermitize(m));
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return hermitize(m);
    }
    let clipped = eig.eigenvalues.map(|l| C64::new(l.max(0.0), 0.0));
    let v = &eig.eigenvectors;
    hermitize(&(v * CMatrix::from_diagonal(&clipped) * v.adjoint()))
}

/// Multiplies `w` by a unit-modulus scalar so that its first entry with
/// modulus above `1e-12 · ‖w‖` is real and nonnegative.
pub fn canonical_phase(w: &CVector) -> CVector {
    let norm = w.norm();
    if norm == 0.0 {
        return w.clone();
    }
    match w.iter().find(|z| z.norm() > 1e-12 * norm) {
        Some(z) => {
            let rot = z.conj() / z.norm();
            let mut out = w * rot;
            // kill the rounding residue on the pivot
            if let Some(p) = out.iter_mut().find(|z| z.norm() > 1e-12 * norm) {
                *p = C64::new(p.norm(), 0.0);
            }
            out
        }
        None => w.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_hermitian() -> CMatrix {
        let a = CMatrix::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64, (i as f64) - (j as f64) * 0.5));
        hermitize(&a)
    }

    #[test]
    fn eigen_reconstructs_and_is_sorted() {
        let h = sample_hermitian();
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let rebuilt = &vecs * diag_matrix(&vals) * vecs.adjoint();
        assert!(frobenius_norm(&(rebuilt - &h)) < 1e-10);
    }

    #[test]
    fn projection_is_psd_and_idempotent() {
        let h = sample_hermitian();
        let p = project_psd(&h);
        assert!(min_eigenvalue(&p) > -1e-10);
        assert!(frobenius_norm(&(project_psd(&p) - &p)) < 1e-10);
    }

    #[test]
    fn canonical_phase_makes_first_entry_real() {
        let w = CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(0.0, 2.0), C64::new(1.0, 1.0)]);
        let c = canonical_phase(&w);
        assert_eq!(c[0], C64::new(0.0, 0.0));
        assert!((c[1] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((c.norm() - w.norm()).abs() < 1e-12);
    }

    #[test]
    fn trace_product_matches_dense_product() {
        let a = sample_hermitian();
        let b = hermitize(&CMatrix::from_fn(3, 3, |i, j| C64::new(1.0 / (1 + i + j) as f64, j as f64)));
        assert!((trace_product(&a, &b) - (&a * &b).trace().re).abs() < 1e-12);
    }
}
