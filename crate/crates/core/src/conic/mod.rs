//! A small conic modeling layer: real symmetric PSD blocks, nonnegative and free
//! vector blocks, a linear objective, and linear / second-order-cone constraints.
//!
//! Complex Hermitian variables are carried through [`embed_hermitian`]: an
//! `n × n` Hermitian matrix becomes a `2n × 2n` real symmetric PSD block, and
//! every functional of the complex matrix is written on the de-embedded value
//! (see [`deembed_hermitian`]), which keeps objectives in the original complex space.

mod assemble;
mod backend;
mod export;

use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix, C64};

pub use assemble::{
    assemble_certificate_sdp, assemble_mom_sdp, mom_coefficient, assemble_nonrobust_sdp, assemble_robust_sdp,
    BeamformingProgram, CertificateLayout, CertificateProgram, ProgramKind, ProgramLayout,
    RobustUserBlocks, DUAL_NORM_WEIGHT,
};
pub use backend::{solve, ClarabelBackend, ConicBackend};
pub use export::{read_program, write_program};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("matrix is not Hermitian within tolerance")]
    NotHermitian,
    #[error("matrix is not square")]
    NotSquare,
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("user {user}: the worst-case signal matrix has no positive direction, the constraint cannot hold")]
    TriviallyInfeasible { user: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Real symmetric positive semidefinite `n × n` matrix.
    Psd(usize),
    Nonneg(usize),
    Free(usize),
}

impl BlockKind {
    /// Number of scalar unknowns the block contributes.
    pub fn num_scalars(&self) -> usize {
        match *self {
            BlockKind::Psd(n) => n * (n + 1) / 2,
            BlockKind::Nonneg(n) | BlockKind::Free(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub name: String,
}

/// One scalar of a block. For PSD blocks `(row, col)` names the symmetric
/// entry `Y_row,col = Y_col,row` and is stored with `row ≤ col`; vector blocks use `col = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub block: BlockId,
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub fn entry(block: BlockId, row: usize, col: usize) -> Self {
        Self {
            block,
            row: row.min(col),
            col: row.max(col),
        }
    }

    pub fn element(block: BlockId, index: usize) -> Self {
        Self {
            block,
            row: index,
            col: 0,
        }
    }
}

/// `constant + Σ coeff · scalar`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub terms: Vec<(Coord, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(mut self, coord: Coord, coeff: f64) -> Self {
        self.push(coord, coeff);
        self
    }

    pub fn push(&mut self, coord: Coord, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((coord, coeff));
        }
    }

    /// Adds `Tr(C Y)` for a symmetric coefficient matrix `C` and PSD block `Y`.
    pub fn add_trace(&mut self, block: BlockId, c: &DMatrix<f64>) {
        let n = c.nrows();
        for j in 0..n {
            self.push(Coord::entry(block, j, j), c[(j, j)]);
            for i in 0..j {
                self.push(Coord::entry(block, i, j), c[(i, j)] + c[(j, i)]);
            }
        }
    }

    /// Adds `scale · Tr(C X)` where `X` is the Hermitian matrix de-embedded from `block`.
    pub fn add_hermitian_trace(&mut self, block: BlockId, c: &CMatrix, scale: f64) {
        let e = embed_unchecked(c).scale(0.5 * scale);
        self.add_trace(block, &e);
    }

    /// Adds `scale · Re X_ij` (`part = Re`) or `scale · Im X_ij` (`part = Im`) of
    /// the Hermitian matrix de-embedded from the `2n × 2n` block.
    pub fn add_hermitian_entry(&mut self, block: BlockId, n: usize, i: usize, j: usize, part: Part, scale: f64) {
        let h = 0.5 * scale;
        match part {
            Part::Re => {
                self.push(Coord::entry(block, i, j), h);
                self.push(Coord::entry(block, n + i, n + j), h);
            }
            Part::Im => {
                self.push(Coord::entry(block, n + i, j), h);
                self.push(Coord::entry(block, i, n + j), -h);
            }
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn add_expr(&mut self, other: &LinearExpr, scale: f64) {
        for &(c, v) in &other.terms {
            self.push(c, v * scale);
        }
        self.constant += other.constant * scale;
    }

    pub fn evaluate(&self, values: &[BlockValue]) -> f64 {
        self.terms
            .iter()
            .map(|(c, v)| v * values[c.block.0].entry(c.row, c.col))
            .sum::<f64>()
            + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `expr = 0`.
    Equal(LinearExpr),
    /// `expr ≥ 0`.
    NonNegative(LinearExpr),
    /// `‖vector‖₂ ≤ bound`.
    SecondOrder {
        bound: LinearExpr,
        vector: Vec<LinearExpr>,
    },
}

impl Constraint {
    /// Number of scalar rows the constraint occupies.
    pub fn num_rows(&self) -> usize {
        match self {
            Constraint::Equal(_) | Constraint::NonNegative(_) => 1,
            Constraint::SecondOrder { vector, .. } => vector.len() + 1,
        }
    }

    fn exprs(&self) -> Box<dyn Iterator<Item = &LinearExpr> + '_> {
        match self {
            Constraint::Equal(e) | Constraint::NonNegative(e) => Box::new(std::iter::once(e)),
            Constraint::SecondOrder { bound, vector } => {
                Box::new(std::iter::once(bound).chain(vector.iter()))
            }
        }
    }

    /// Amount by which the constraint is violated at `values` (0 when satisfied).
    pub fn violation(&self, values: &[BlockValue]) -> f64 {
        match self {
            Constraint::Equal(e) => e.evaluate(values).abs(),
            Constraint::NonNegative(e) => (-e.evaluate(values)).max(0.0),
            Constraint::SecondOrder { bound, vector } => {
                let norm = vector
                    .iter()
                    .map(|e| e.evaluate(values).powi(2))
                    .sum::<f64>()
                    .sqrt();
                (norm - bound.evaluate(values)).max(0.0)
            }
        }
    }
}

/// Minimize `objective` subject to `constraints` and block membership.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    blocks: Vec<Block>,
    objective: LinearExpr,
    constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, kind: BlockKind, name: impl Into<String>) -> BlockId {
        self.blocks.push(Block {
            kind,
            name: name.into(),
        });
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_psd(&mut self, n: usize, name: impl Into<String>) -> BlockId {
        self.add_block(BlockKind::Psd(n), name)
    }


    pub fn add_nonneg(&mut self, n: usize, name: impl Into<String>) -> BlockId {
        self.add_block(BlockKind::Nonneg(n), name)
    }

    pub fn add_free(&mut self, n: usize, name: impl Into<String>) -> BlockId {
        self.add_block(BlockKind::Free(n), name)
    }

    pub fn set_objective(&mut self, objective: LinearExpr) {
        self.objective = objective;
    }

    pub fn add_constraint(&mut self, c: Constraint) -> ConstraintId {
        self.constraints.push(c);
        ConstraintId(self.constraints.len() - 1)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn objective(&self) -> &LinearExpr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_scalars(&self) -> usize {
        self.blocks.iter().map(|b| b.kind.num_scalars()).sum()
    }

    /// Every coordinate must name an existing block and an in-range entry, and
    /// every coefficient must be finite.
    pub fn validate(&self) -> Result<(), ConicError> {
        let check = |e: &LinearExpr, what: &str| -> Result<(), ConicError> {
            if !e.constant.is_finite() {
                return Err(ConicError::Malformed(format!("{what}: non-finite constant")));
            }
            for (c, v) in &e.terms {
                if !v.is_finite() {
                    return Err(ConicError::Malformed(format!("{what}: non-finite coefficient")));
                }
                let block = self
                    .blocks
                    .get(c.block.0)
                    .ok_or_else(|| ConicError::Malformed(format!("{what}: unknown block {}", c.block.0)))?;
                let ok = match block.kind {
                    BlockKind::Psd(n) => c.row <= c.col && c.col < n,
                    BlockKind::Nonneg(n) | BlockKind::Free(n) => c.col == 0 && c.row < n,
                };
                if !ok {
                    return Err(ConicError::Malformed(format!(
                        "{what}: entry ({}, {}) out of range for block '{}'",
                        c.row, c.col, block.name
                    )));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            if let Constraint::SecondOrder { vector, .. } = c {
                if vector.is_empty() {
                    return Err(ConicError::Malformed(format!("constraint {i}: empty cone")));
                }
            }
            for e in c.exprs() {
                check(e, &format!("constraint {i}"))?;
            }
        }
        Ok(())
    }

    /// Largest absolute constant in the problem data, used to scale residuals.
    fn data_scale(&self) -> f64 {
        self.constraints
            .iter()
            .flat_map(|c| c.exprs())
            .map(|e| e.constant.abs())
            .fold(1.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Matrix(DMatrix<f64>),
    Vector(DVector<f64>),
}

impl BlockValue {
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        match self {
            BlockValue::Matrix(m) => m[(row, col)],
            BlockValue::Vector(v) => v[row],
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            BlockValue::Matrix(m) => Some(m),
            BlockValue::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            BlockValue::Vector(v) => Some(v),
            BlockValue::Matrix(_) => None,
        }
    }

    fn zeros(kind: BlockKind) -> Self {
        match kind {
            BlockKind::Psd(n) => BlockValue::Matrix(DMatrix::zeros(n, n)),
            BlockKind::Nonneg(n) | BlockKind::Free(n) => BlockValue::Vector(DVector::zeros(n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub blocks: Vec<BlockValue>,
    /// Dual multipliers per constraint (one entry per row of the constraint).
    pub constraint_duals: Vec<Vec<f64>>,
    pub iterations: u32,
    /// Largest constraint or cone violation relative to `1 + max |constant|`.
    pub primal_residual: f64,
    /// Backend-reported scaled dual residual.
    pub dual_residual: f64,
    /// Relative duality gap.
    pub duality_gap: f64,
    /// Backend dual ray when the program was declared infeasible.
    pub infeasibility_certificate: Option<Vec<f64>>,
    pub solve_time: Duration,
}

impl ConicSolution {
    pub fn matrix(&self, block: BlockId) -> &DMatrix<f64> {
        self.blocks[block.0].as_matrix().expect("PSD block")
    }

    pub fn vector(&self, block: BlockId) -> &DVector<f64> {
        self.blocks[block.0].as_vector().expect("vector block")
    }

    /// Hermitian matrix carried by an embedded PSD block.
    pub fn hermitian(&self, block: BlockId) -> CMatrix {
        deembed_hermitian(self.matrix(block))
    }

    pub fn dual(&self, c: ConstraintId) -> &[f64] {
        &self.constraint_duals[c.0]
    }

    fn failed(program: &ConicProgram, status: SolveStatus, elapsed: Duration) -> Self {
        Self {
            status,
            objective: f64::NAN,
            blocks: program.blocks.iter().map(|b| BlockValue::zeros(b.kind)).collect(),
            constraint_duals: program.constraints.iter().map(|c| vec![0.0; c.num_rows()]).collect(),
            iterations: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            duality_gap: f64::INFINITY,
            infeasibility_certificate: None,
            solve_time: elapsed,
        }
    }
}

/// Interior-point settings passed through to the backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iter: u32,
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_feas: 1e-8,
            tol_gap_abs: 1e-8,
            tol_gap_rel: 1e-8,
            verbose: false,
        }
    }
}

impl SolverSettings {
    /// Same settings with every tolerance set to `tol`.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol_feas = tol;
        self.tol_gap_abs = tol;
        self.tol_gap_rel = tol;
        self
    }
}

fn embed_unchecked(h: &CMatrix) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(n + i, n + j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(n + i, j)] = z.im;
        }
    }
    out
}

/// `[[Re H, −Im H], [Im H, Re H]]`. Eigenvalues are those of `H`, each twice.
pub fn embed_hermitian(h: &CMatrix) -> Result<DMatrix<f64>, ConicError> {
    if !h.is_square() {
        return Err(ConicError::NotSquare);
    }
    if !linalg::is_hermitian(h, 1e-10) {
        return Err(ConicError::NotHermitian);
    }
    Ok(embed_unchecked(&linalg::hermitize(h)))
}

/// Inverse of [`embed_hermitian`] for any real symmetric `2n × 2n` matrix `Y`:
/// averages the two diagonal blocks and antisymmetrizes the off-diagonal ones,
/// i.e. `X = (Y₁₁ + Y₂₂)/2 + i (Y₂₁ − Y₁₂)/2`.
pub fn deembed_hermitian(y: &DMatrix<f64>) -> CMatrix {
    let n = y.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        C64::new(
            0.5 * (y[(i, j)] + y[(n + i, n + j)]),
            0.5 * (y[(n + i, j)] - y[(i, n + j)]),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn embed_real_scalar() {
        let h = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let e = embed_hermitian(&h).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
        assert_eq!(e.trace(), 2.0);
    }

    #[test]
    fn embed_pauli_y() {
        let h = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
        let eigs = sorted_eigs(&embed_hermitian(&h).unwrap());
        for (got, want) in eigs.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn embed_rejects_non_hermitian() {
        let h = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(embed_hermitian(&h), Err(ConicError::NotHermitian));
        assert_eq!(embed_hermitian(&CMatrix::zeros(2, 3)), Err(ConicError::NotSquare));
    }

    #[test]
    fn deembed_inverts_embed() {
        let h = linalg::hermitize(&CMatrix::from_fn(3, 3, |i, j| C64::new((i * j) as f64, i as f64 - j as f64)));
        let back = deembed_hermitian(&embed_hermitian(&h).unwrap());
        assert!(linalg::frobenius_norm(&(back - h)) < 1e-14);
    }

    #[test]
    fn hermitian_trace_expression_matches_direct_trace() {
        let c = linalg::hermitize(&CMatrix::from_fn(3, 3, |i, j| C64::new(1.0 + (i + j) as f64, (i as f64) * 0.5 - j as f64)));
        let x = linalg::hermitize(&CMatrix::from_fn(3, 3, |i, j| C64::new(2.0 - (i * j) as f64, j as f64 - 0.3 * i as f64)));
        let mut p = ConicProgram::new();
        let b = p.add_psd(6, "X");
        let mut e = LinearExpr::new();
        e.add_hermitian_trace(b, &c, 1.0);
        let values = vec![BlockValue::Matrix(embed_unchecked(&x))];
        assert!((e.evaluate(&values) - linalg::trace_product(&c, &x)).abs() < 1e-12);
        let mut re = LinearExpr::new();
        re.add_hermitian_entry(b, 3, 0, 2, Part::Re, 1.0);
        let mut im = LinearExpr::new();
        im.add_hermitian_entry(b, 3, 0, 2, Part::Im, 1.0);
        assert!((re.evaluate(&values) - x[(0, 2)].re).abs() < 1e-14);
        assert!((im.evaluate(&values) - x[(0, 2)].im).abs() < 1e-14);
    }

    #[test]
    fn validation_catches_bad_coordinates() {
        let mut p = ConicProgram::new();
        let b = p.add_nonneg(2, "v");
        p.set_objective(LinearExpr::new().term(Coord::element(b, 5), 1.0));
        assert!(p.validate().is_err());
        p.set_objective(LinearExpr::new().term(Coord::element(BlockId(3), 0), 1.0));
        assert!(p.validate().is_err());
        p.set_objective(LinearExpr::new().term(Coord::element(b, 1), f64::NAN));
        assert!(p.validate().is_err());
        p.set_objective(LinearExpr::new().term(Coord::element(b, 1), 1.0));
        assert!(p.validate().is_ok());
    }
}
