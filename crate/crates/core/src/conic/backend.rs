//! Interior-point backend interface and its Clarabel implementation.

use std::collections::BTreeMap;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};
// links the system OpenBLAS/LAPACK used by the PSD cone
use openblas_src as _;

use super::{
    BlockKind, BlockValue, ConicError, ConicProgram, ConicSolution, Constraint, Coord, LinearExpr,
    SolveStatus, SolverSettings,
};

/// Any interior-point solver supporting PSD, second-order and linear cones.
pub trait ConicBackend: Sync {
    fn solve(&self, program: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

/// Solves `program` with the default backend.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    ClarabelBackend.solve(program, settings)
}

/// Maps block scalars to positions in the flat variable vector. PSD blocks are
/// stored as the scaled upper triangle, column by column
/// (`x = Y_ii` on the diagonal, `x = √2 Y_ij` off it).
struct VariableMap {
    offsets: Vec<usize>,
    kinds: Vec<BlockKind>,
    len: usize,
}

impl VariableMap {
    fn new(p: &ConicProgram) -> Self {
        let mut offsets = Vec::with_capacity(p.blocks.len());
        let mut len = 0;
        for b in &p.blocks {
            offsets.push(len);
            len += b.kind.num_scalars();
        }
        Self {
            offsets,
            kinds: p.blocks.iter().map(|b| b.kind).collect(),
            len,
        }
    }

    /// Position and multiplier converting a coefficient on the block scalar
    /// into a coefficient on the flat variable.
    fn locate(&self, c: &Coord) -> (usize, f64) {
        let off = self.offsets[c.block.0];
        match self.kinds[c.block.0] {
            BlockKind::Psd(_) => {
                let idx = off + c.col * (c.col + 1) / 2 + c.row;
                let scale = if c.row == c.col { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                (idx, scale)
            }
            BlockKind::Nonneg(_) | BlockKind::Free(_) => (off + c.row, 1.0),
        }
    }

    fn unpack(&self, x: &[f64]) -> Vec<BlockValue> {
        self.kinds
            .iter()
            .zip(&self.offsets)
            .map(|(kind, &off)| match *kind {
                BlockKind::Psd(n) => {
                    let mut m = DMatrix::zeros(n, n);
                    for j in 0..n {
                        for i in 0..=j {
                            let v = x[off + j * (j + 1) / 2 + i];
                            if i == j {
                                m[(i, i)] = v;
                            } else {
                                let v = v * std::f64::consts::FRAC_1_SQRT_2;
                                m[(i, j)] = v;
                                m[(j, i)] = v;
                            }
                        }
                    }
                    BlockValue::Matrix(m)
                }
                BlockKind::Nonneg(n) | BlockKind::Free(n) => {
                    BlockValue::Vector(DVector::from_column_slice(&x[off..off + n]))
                }
            })
            .collect()
    }
}

/// Sparse `A` in triplet form, summed on conversion.
#[derive(Default)]
struct Triplets {
    entries: BTreeMap<(usize, usize), f64>,
}

impl Triplets {
    fn add(&mut self, row: usize, col: usize, v: f64) {
        *self.entries.entry((col, row)).or_insert(0.0) += v;
    }

    fn add_expr(&mut self, row: usize, e: &LinearExpr, vars: &VariableMap, sign: f64) {
        for (c, v) in &e.terms {
            let (col, s) = vars.locate(c);
            self.add(row, col, sign * v * s);
        }
    }

    fn into_csc(self, m: usize, n: usize) -> CscMatrix<f64> {
        let mut colptr = vec![0usize; n + 1];
        let mut rowval = Vec::with_capacity(self.entries.len());
        let mut nzval = Vec::with_capacity(self.entries.len());
        for ((col, row), v) in self.entries {
            if v == 0.0 {
                continue;
            }
            colptr[col + 1] += 1;
            rowval.push(row);
            nzval.push(v);
        }
        for j in 0..n {
            colptr[j + 1] += colptr[j];
        }
        CscMatrix::new(m, n, colptr, rowval, nzval)
    }
}

/// Row ranges of each constraint in the stacked backend system.
struct Lowered {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    q: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
    constraint_rows: Vec<Vec<usize>>,
}

fn lower(p: &ConicProgram, vars: &VariableMap) -> Lowered {
    let mut q = vec![0.0; vars.len];
    for (c, v) in &p.objective.terms {
        let (col, s) = vars.locate(c);
        q[col] += v * s;
    }

    let mut a = Triplets::default();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut constraint_rows = vec![Vec::new(); p.constraints.len()];
    let mut row = 0;

    // Clarabel form: A x + s = b, s ∈ K. For `e(x) = a·x + c` in a cone we use
    // A = −a, b = c so that s = e(x); equalities use the same convention.
    let push_row = |a: &mut Triplets, b: &mut Vec<f64>, e: &LinearExpr, row: &mut usize| {
        a.add_expr(*row, e, vars, -1.0);
        b.push(e.constant);
        *row += 1;
        *row - 1
    };

    let eqs: Vec<usize> = (0..p.constraints.len())
        .filter(|&i| matches!(p.constraints[i], Constraint::Equal(_)))
        .collect();
    for &i in &eqs {
        if let Constraint::Equal(e) = &p.constraints[i] {
            constraint_rows[i].push(push_row(&mut a, &mut b, e, &mut row));
        }
    }
    if !eqs.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(eqs.len()));
    }

    let mut nonneg_rows = 0;
    for (i, c) in p.constraints.iter().enumerate() {
        if let Constraint::NonNegative(e) = c {
            constraint_rows[i].push(push_row(&mut a, &mut b, e, &mut row));
            nonneg_rows += 1;
        }
    }
    for (bi, kind) in vars.kinds.iter().enumerate() {
        if let BlockKind::Nonneg(n) = *kind {
            for k in 0..n {
                a.add(row, vars.offsets[bi] + k, -1.0);
                b.push(0.0);
                row += 1;
            }
            nonneg_rows += n;
        }
    }
    if nonneg_rows > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(nonneg_rows));
    }

    for (i, c) in p.constraints.iter().enumerate() {
        if let Constraint::SecondOrder { bound, vector } = c {
            constraint_rows[i].push(push_row(&mut a, &mut b, bound, &mut row));
            for e in vector {
                constraint_rows[i].push(push_row(&mut a, &mut b, e, &mut row));
            }
            cones.push(SupportedConeT::SecondOrderConeT(vector.len() + 1));
        }
    }

    for (bi, kind) in vars.kinds.iter().enumerate() {
        if let BlockKind::Psd(n) = *kind {
            for k in 0..kind.num_scalars() {
                a.add(row, vars.offsets[bi] + k, -1.0);
                b.push(0.0);
                row += 1;
            }
            cones.push(SupportedConeT::PSDTriangleConeT(n));
        }
    }

    Lowered {
        a: a.into_csc(row, vars.len),
        b,
        q,
        cones,
        constraint_rows,
    }
}

/// Relative primal residual of a candidate point, including block membership.
fn primal_residual(p: &ConicProgram, values: &[BlockValue]) -> f64 {
    let mut worst: f64 = 0.0;
    for c in &p.constraints {
        worst = worst.max(c.violation(values));
    }
    for (b, v) in p.blocks.iter().zip(values) {
        match (b.kind, v) {
            (BlockKind::Psd(_), BlockValue::Matrix(m)) => {
                if m.nrows() > 0 {
                    let min = nalgebra::SymmetricEigen::new(m.clone())
                        .eigenvalues
                        .iter()
                        .copied()
                        .fold(f64::INFINITY, f64::min);
                    let scale = m.iter().fold(1.0f64, |a, x| a.max(x.abs()));
                    worst = worst.max((-min / scale).max(0.0));
                }
            }
            (BlockKind::Nonneg(_), BlockValue::Vector(v)) => {
                worst = worst.max(v.iter().fold(0.0f64, |a, &x| a.max(-x)));
            }
            _ => {}
        }
    }
    worst / p.data_scale()
}

impl ConicBackend for ClarabelBackend {
    fn solve(&self, program: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
        program.validate()?;
        let start = Instant::now();
        let vars = VariableMap::new(program);
        let lowered = lower(program, &vars);
        let m = lowered.b.len();

        if m == 0 {
            // no cone rows: only free variables remain
            let bounded = lowered.q.iter().all(|&v| v == 0.0);
            let values = vars.unpack(&vec![0.0; vars.len]);
            let status = if bounded { SolveStatus::Optimal } else { SolveStatus::Unbounded };
            return Ok(ConicSolution {
                status,
                objective: if bounded { program.objective.constant } else { f64::NEG_INFINITY },
                blocks: values,
                constraint_duals: program.constraints.iter().map(|_| Vec::new()).collect(),
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                duality_gap: 0.0,
                infeasibility_certificate: None,
                solve_time: start.elapsed(),
            });
        }

        let built = DefaultSettingsBuilder::default()
            .verbose(settings.verbose)
            .max_iter(settings.max_iter)
            .tol_feas(settings.tol_feas)
            .tol_gap_abs(settings.tol_gap_abs)
            .tol_gap_rel(settings.tol_gap_rel)
            .direct_solve_method("faer".to_string())
            .build()
            .map_err(|e| ConicError::Malformed(format!("solver settings: {e:?}")))?;
        let p_mat = CscMatrix::zeros((vars.len, vars.len));
        let mut solver = match DefaultSolver::new(
            &p_mat,
            &lowered.q,
            &lowered.a,
            &lowered.b,
            &lowered.cones,
            built,
        ) {
            Ok(s) => s,
            Err(_) => return Ok(ConicSolution::failed(program, SolveStatus::NumericalFailure, start.elapsed())),
        };
        solver.solve();
        let sol = &solver.solution;

        let values = vars.unpack(&sol.x);
        let residual = primal_residual(program, &values);
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved if residual <= 1e-7 => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalFailure,
        };
        let constraint_duals = lowered
            .constraint_rows
            .iter()
            .map(|rows| rows.iter().map(|&r| sol.z[r]).collect())
            .collect();
        let objective = match status {
            SolveStatus::Optimal => program.objective.evaluate(&values),
            SolveStatus::Infeasible => f64::INFINITY,
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            SolveStatus::NumericalFailure => f64::NAN,
        };
        let infeasibility_certificate = (status == SolveStatus::Infeasible).then(|| sol.z.clone());
        Ok(ConicSolution {
            status,
            objective,
            blocks: values,
            constraint_duals,
            iterations: sol.iterations,
            primal_residual: residual,
            dual_residual: sol.r_dual,
            duality_gap: if sol.obj_val.abs() > 0.0 {
                (sol.obj_val - sol.obj_val_dual).abs() / sol.obj_val.abs().max(1.0)
            } else {
                (sol.obj_val - sol.obj_val_dual).abs()
            },
            infeasibility_certificate,
            solve_time: start.elapsed(),
        })
    }
}
