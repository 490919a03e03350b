//! Sparse assembly of the SBM operator from local kernel probes, and a
//! sparse LU solve refined against the matrix-free action.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::{norm, residual, SolveReport, SolverConfig};
use crate::error::{Result, SbmError};
use crate::mesh::{Discretization, FaceKind};
use crate::operator::SbmOperator;
use crate::tensor_basis::CellTensor;

/// Compressed-column sparse matrix.
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.inner.compute_nnz()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        let m = self.inner.as_ref();
        for j in 0..self.n() {
            let xj = x[j];
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// Entry `(i, j)`, zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let m = self.inner.as_ref();
        m.row_idx_of_col(j)
            .zip(m.val_of_col(j))
            .find(|(r, _)| *r == i)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn lu(&self) -> Result<SparseLu> {
        self.inner
            .sp_lu()
            .map(SparseLu)
            .map_err(|e| SbmError::Factorization(format!("{e:?}")))
    }
}

pub struct SparseLu(Lu<usize, f64>);

impl SparseLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.0.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

fn unit(degree: usize, dim: usize, j: usize) -> CellTensor {
    let mut e = CellTensor::zeros(degree, dim);
    e.as_mut_slice()[j] = 1.0;
    e
}

/// Builds `A` column by column from unit probes of the cell, surrogate-face
/// and (DG) interior-face kernels, so that `A x` equals
/// [`SbmOperator::apply`] up to summation order.
pub fn assemble_sparse(op: &SbmOperator) -> Result<SparseMatrix> {
    let layout = op.layout();
    let (p, dim) = (op.config().degree, op.dim());
    let npc = layout.dofs_per_cell();
    let zero = CellTensor::zeros(p, dim);
    let dg = layout.discretization() == Discretization::Dg;
    let mut triplets = Vec::new();
    let mut push = |rows: &[usize], cols: &[usize], j: usize, w: &CellTensor| {
        for (&r, &v) in rows.iter().zip(w.as_slice()) {
            if v != 0.0 {
                triplets.push(Triplet::new(r, cols[j], v));
            }
        }
    };
    for (slot, &cell) in op.classification().active_cells().iter().enumerate() {
        let dofs = layout.cell_dofs(cell);
        for j in 0..npc {
            let e = unit(p, dim, j);
            let (mut w, _) = op.cell_kernel(&e)?;
            for fi in op.owned_faces(slot) {
                match op.faces()[fi].kind {
                    FaceKind::Surrogate => {
                        let (ws, _) = op.surrogate_face_kernel(fi, &e)?;
                        for (a, b) in w.as_mut_slice().iter_mut().zip(ws.as_slice()) {
                            *a += b;
                        }
                    }
                    FaceKind::Interior { neighbor } if dg => {
                        let ndofs = layout.cell_dofs(neighbor);
                        let (w1, w2, _) = op.interior_face_kernel(fi, &e, &zero)?;
                        push(dofs, dofs, j, &w1);
                        push(ndofs, dofs, j, &w2);
                        let (w1, w2, _) = op.interior_face_kernel(fi, &zero, &e)?;
                        push(dofs, ndofs, j, &w1);
                        push(ndofs, ndofs, j, &w2);
                    }
                    FaceKind::Interior { .. } => {}
                }
            }
            push(dofs, dofs, j, &w);
        }
    }
    let n = op.n_dofs();
    let inner = SparseColMat::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| SbmError::Factorization(format!("{e:?}")))?;
    Ok(SparseMatrix { inner })
}

/// Sparse LU solve followed by at most five steps of iterative refinement
/// on the matrix-free residual. `iterations` counts the refinement steps.
pub fn sparse_lu_solve(
    op: &SbmOperator,
    b: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = op.n_dofs();
    if b.len() != n {
        return Err(SbmError::size(n, b.len()));
    }
    let lu = assemble_sparse(op)?.lu()?;
    let b_norm = norm(b);
    let mut x = lu.solve(b);
    let mut r = residual(op, b, &x)?;
    let mut r_norm = norm(&r);
    let target = config.tol * b_norm;
    let mut iterations = 0;
    while r_norm > target && iterations < MAX_REFINEMENT {
        let dx = lu.solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let rc = residual(op, b, &candidate)?;
        let rc_norm = norm(&rc);
        iterations += 1;
        if rc_norm >= r_norm {
            break;
        }
        (x, r, r_norm) = (candidate, rc, rc_norm);
    }
    let rel = if b_norm > 0.0 { r_norm / b_norm } else { 0.0 };
    Ok((
        x,
        SolveReport {
            iterations,
            residual: rel,
            converged: r_norm <= target,
            seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

const MAX_REFINEMENT: usize = 5;
