//! Evaluation of a cell polynomial at an arbitrary reference point.
//!
//! Points off the tensor grid admit no sum factorization: the value is a
//! plain sum over all `(p+1)^d` basis functions. The point may lie outside
//! `[0,1]^d`, in which case this is polynomial extrapolation.

use super::shape::LagrangeBasis1D;
use super::sum_factorization::{Workspace, MAX_DIM};

/// Flop breakdown of one point evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PointEvalOps {
    /// 1D Lagrange evaluations and the tensor-product weight tables.
    pub basis: u64,
    /// Multiply-adds against the `(p+1)^d` cell coefficients.
    pub coefficient: u64,
}

impl PointEvalOps {
    pub fn total(&self) -> u64 {
        self.basis + self.coefficient
    }
}

/// Builds the outer product of the per-axis factors into `table`
/// (axis 0 fastest). Returns the multiply count.
fn outer_product(factors: &[&[f64]], table: &mut Vec<f64>) -> u64 {
    let n = factors[0].len();
    table.clear();
    table.extend_from_slice(factors[0]);
    let mut ops = 0;
    for f in &factors[1..] {
        let len = table.len();
        table.resize(len * n, 0.0);
        for j in (0..n).rev() {
            for i in 0..len {
                table[j * len + i] = table[i] * f[j];
            }
        }
        ops += (len * n) as u64;
    }
    ops
}

/// Value (and optionally reference gradient) of the tensor polynomial with
/// lexicographic `coeffs` at `point`.
pub(crate) fn point_evaluate_raw(
    basis: &LagrangeBasis1D,
    dim: usize,
    coeffs: &[f64],
    point: &[f64],
    want_gradient: bool,
    ws: &mut Workspace,
) -> (f64, [f64; MAX_DIM], PointEvalOps) {
    let n = basis.len();
    let mut ops = PointEvalOps::default();
    let mut diffs = [0.0; 16];
    let mut vals = [[0.0; 16]; MAX_DIM];
    let mut ders = [[0.0; 16]; MAX_DIM];
    assert!(n <= 16, "point evaluation supports degree up to 15");
    for axis in 0..dim {
        ops.basis += basis.values_into(point[axis], &mut diffs[..n], &mut vals[axis][..n]);
        if want_gradient {
            ops.basis += basis.derivatives_into(&diffs[..n], &mut ders[axis][..n]);
        }
    }
    if ws.point_tables.is_empty() {
        ws.point_tables.push(Vec::new());
    }
    let table = &mut ws.point_tables[0];

    let mut factors: [&[f64]; MAX_DIM] = [&[]; MAX_DIM];
    for axis in 0..dim {
        factors[axis] = &vals[axis][..n];
    }
    ops.basis += outer_product(&factors[..dim], table);
    let value: f64 = coeffs.iter().zip(table.iter()).map(|(c, w)| c * w).sum();
    ops.coefficient += table.len() as u64;

    let mut gradient = [0.0; MAX_DIM];
    if want_gradient {
        for (k, g) in gradient.iter_mut().enumerate().take(dim) {
            let mut factors: [&[f64]; MAX_DIM] = [&[]; MAX_DIM];
            for axis in 0..dim {
                factors[axis] = if axis == k {
                    &ders[axis][..n]
                } else {
                    &vals[axis][..n]
                };
            }
            ops.basis += outer_product(&factors[..dim], table);
            *g = coeffs.iter().zip(table.iter()).map(|(c, w)| c * w).sum();
            ops.coefficient += table.len() as u64;
        }
    }
    (value, gradient, ops)
}
