//! Solvers for the nonsymmetric SBM system (restarted GMRES, or sparse LU
//! on a matrix assembled from the kernels), and L² error evaluation.

mod sparse;

pub use sparse::{assemble_sparse, sparse_lu_solve, SparseLu, SparseMatrix};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbmError};
use crate::operator::SbmOperator;
use crate::tensor_basis::gauss_quadrature_1d;

/// Anything that can compute `A x`.
pub trait LinearOperator {
    fn n(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl LinearOperator for SbmOperator {
    fn n(&self) -> usize {
        self.n_dofs()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        SbmOperator::apply(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    #[default]
    None,
    /// Inverse of the operator diagonal.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Sparse LU of the kernel-assembled matrix, refined on the
    /// matrix-free residual.
    #[default]
    SparseLu,
    /// Restarted GMRES on the matrix-free operator.
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Relative residual target `‖b − Ax‖ ≤ tol ‖b‖`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::default(),
            tol: 1e-10,
            restart: 100,
            max_iter: 10_000,
            preconditioner: Preconditioner::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative true residual `‖b − Ax‖ / ‖b‖` of the returned iterate.
    pub residual: f64,
    pub converged: bool,
    pub seconds: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(op: &impl LinearOperator, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let ax = op.apply(x)?;
    Ok(b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect())
}

/// Right-preconditioned restarted GMRES with a zero initial guess. The
/// iterate and report are returned even without convergence; callers
/// decide via `report.converged` (see [`gmres_solve_checked`]).
pub fn gmres_solve(
    op: &impl LinearOperator,
    b: &[f64],
    config: &SolverConfig,
    inv_diagonal: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = op.n();
    if b.len() != n {
        return Err(SbmError::size(n, b.len()));
    }
    if !(config.tol > 0.0) || config.restart == 0 {
        return Err(SbmError::InvalidConfig(
            "GMRES needs tol > 0 and restart ≥ 1".into(),
        ));
    }
    let precondition = |v: &[f64]| -> Vec<f64> {
        match inv_diagonal {
            Some(d) => v.iter().zip(d).map(|(a, b)| a * b).collect(),
            None => v.to_vec(),
        }
    };
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
                seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }
    let target = config.tol * b_norm;
    let m = config.restart.min(n.max(1));
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut r_norm = b_norm;

    while iterations < config.max_iter {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / r_norm).collect());
        // Hessenberg columns, reduced by Givens rotations as we go
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut rhs = vec![0.0; m + 1];
        rhs[0] = r_norm;
        let mut k_used = 0;
        for j in 0..m {
            let z = precondition(&basis[j]);
            let mut w = op.apply(&z)?;
            let mut col = vec![0.0; j + 2];
            // modified Gram–Schmidt, twice for stability
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    col[i] += c;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= c * vk;
                    }
                }
            }
            let w_norm = norm(&w);
            col[j + 1] = w_norm;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[j] / denom, col[j + 1] / denom) };
            col[j] = denom;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            rhs[j + 1] = -s * rhs[j];
            rhs[j] *= c;
            hess.push(col);
            iterations += 1;
            k_used = j + 1;
            let breakdown = w_norm <= 1e-300;
            if !breakdown {
                basis.push(w.iter().map(|v| v / w_norm).collect());
            }
            if rhs[j + 1].abs() <= target || breakdown || iterations >= config.max_iter {
                break;
            }
        }
        // back substitution on the triangular system
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = rhs[i];
            for (l, yl) in y.iter().enumerate().take(k_used).skip(i + 1) {
                s -= hess[l][i] * yl;
            }
            y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yi * vk;
            }
        }
        for (xi, zi) in x.iter_mut().zip(precondition(&update)) {
            *xi += zi;
        }
        r = residual(op, b, &x)?;
        r_norm = norm(&r);
        if r_norm <= target || r_norm == 0.0 {
            break;
        }
    }
    let rel = r_norm / b_norm;
    log::debug!("gmres: {iterations} iterations, relative residual {rel:e}");
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

/// Like [`gmres_solve`] but maps non-convergence to [`SbmError::NotConverged`].
pub fn gmres_solve_checked(
    op: &impl LinearOperator,
    b: &[f64],
    config: &SolverConfig,
    inv_diagonal: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let (x, report) = gmres_solve(op, b, config, inv_diagonal)?;
    if !report.converged {
        return Err(SbmError::NotConverged {
            iterations: report.iterations,
            residual: report.residual,
        });
    }
    Ok((x, report))
}

/// Solves `A x = b` for the SBM operator with the configured method. For
/// GMRES the diagonal preconditioner is built on request.
pub fn solve(op: &SbmOperator, b: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    if config.method == SolverMethod::SparseLu {
        return sparse_lu_solve(op, b, config);
    }
    let inv = match config.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Diagonal => Some(
            op.diagonal()
                .into_iter()
                .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect::<Vec<_>>(),
        ),
    };
    gmres_solve(op, b, config, inv.as_deref())
}

/// `‖u_h − u‖_{L²}` over the active cells, with `p + 2` Gauss points per
/// direction.
pub fn l2_error(op: &SbmOperator, u: &[f64], exact: impl Fn(&[f64]) -> f64) -> Result<f64> {
    if u.len() != op.n_dofs() {
        return Err(SbmError::size(op.n_dofs(), u.len()));
    }
    let quad = gauss_quadrature_1d(op.config().degree + 2);
    let mut sum = 0.0;
    op.sample_cells(u, &quad, |x, uh, w| {
        let e = uh - exact(x);
        sum += w * e * e;
    });
    Ok(sum.sqrt())
}
