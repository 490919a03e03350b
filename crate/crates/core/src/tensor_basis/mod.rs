//! Tensor-product Lagrange bases on the reference cell `[0,1]^d`.
//!
//! Degrees of freedom of a cell are numbered lexicographically with the
//! first coordinate index running fastest. All evaluation/integration
//! routines are sum-factorized: a `d`-dimensional sweep is `d` successive
//! 1D contractions with the tabulated [`ShapeMatrices1D`].

mod point;
mod quadrature;
mod shape;
pub(crate) mod sum_factorization;

pub use point::PointEvalOps;
pub use quadrature::{gauss_lobatto_1d, gauss_quadrature_1d, Quadrature1D};
pub use shape::{LagrangeBasis1D, ShapeMatrices1D};
pub use sum_factorization::{TraceRequest, Workspace, MAX_DIM};

pub(crate) use point::point_evaluate_raw;
pub(crate) use sum_factorization::{
    evaluate_cell_raw, evaluate_face_raw, integrate_cell_raw, integrate_face_raw,
};

use crate::error::{Result, SbmError};

/// Coefficients of one cell in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTensor {
    degree: usize,
    dim: usize,
    data: Vec<f64>,
}

impl CellTensor {
    pub fn new(degree: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let expected = (degree + 1).pow(dim as u32);
        if data.len() != expected {
            return Err(SbmError::size(expected, data.len()));
        }
        Ok(Self { degree, dim, data })
    }

    pub fn zeros(degree: usize, dim: usize) -> Self {
        Self {
            degree,
            dim,
            data: vec![0.0; (degree + 1).pow(dim as u32)],
        }
    }

    /// Interpolates `f` at the tensor support points of `basis` on `[0,1]^d`.
    pub fn interpolate(basis: &LagrangeBasis1D, dim: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = basis.len();
        let len = n.pow(dim as u32);
        let mut point = [0.0; MAX_DIM];
        let data = (0..len)
            .map(|lin| {
                let mut rest = lin;
                for x in point.iter_mut().take(dim) {
                    *x = basis.support()[rest % n];
                    rest /= n;
                }
                f(&point[..dim])
            })
            .collect();
        Self {
            degree: basis.degree(),
            dim,
            data,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Values and reference gradients at tensor quadrature points.
///
/// `gradients` is component-major: `gradients[k * n_points + q]`. Either
/// vector may be empty when that quantity is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadPointField {
    pub dim: usize,
    pub n_points: usize,
    pub values: Vec<f64>,
    pub gradients: Vec<f64>,
}

impl QuadPointField {
    pub fn gradient(&self, q: usize) -> [f64; MAX_DIM] {
        let mut g = [0.0; MAX_DIM];
        for (k, gk) in g.iter_mut().enumerate().take(self.dim) {
            *gk = self.gradients[k * self.n_points + q];
        }
        g
    }
}

fn check_degree(coeffs: &CellTensor, sm: &ShapeMatrices1D) -> Result<()> {
    if coeffs.degree != sm.degree() {
        return Err(SbmError::DimensionMismatch(format!(
            "cell tensor has degree {}, shape matrices degree {}",
            coeffs.degree,
            sm.degree()
        )));
    }
    if !(1..=MAX_DIM).contains(&coeffs.dim) {
        return Err(SbmError::DimensionMismatch(format!(
            "unsupported dimension {}",
            coeffs.dim
        )));
    }
    Ok(())
}

/// Values and (optionally) reference gradients at all tensor quadrature
/// points. Returns the field and its multiply-add count.
pub fn evaluate_cell(
    coeffs: &CellTensor,
    sm: &ShapeMatrices1D,
    want_gradients: bool,
) -> Result<(QuadPointField, u64)> {
    check_degree(coeffs, sm)?;
    let dim = coeffs.dim;
    let n_points = sm.n_points().pow(dim as u32);
    let mut values = vec![0.0; n_points];
    let mut gradients = if want_gradients {
        vec![0.0; dim * n_points]
    } else {
        Vec::new()
    };
    let ops = evaluate_cell_raw(
        sm,
        dim,
        &coeffs.data,
        true,
        want_gradients,
        &mut values,
        &mut gradients,
        &mut Workspace::new(),
    );
    Ok((
        QuadPointField {
            dim,
            n_points,
            values,
            gradients,
        },
        ops,
    ))
}

/// Tests the integrand against all basis functions (values against `ψ_i`,
/// gradients against `∇ψ_i`). The integrand must already carry quadrature
/// weights and Jacobian factors.
pub fn integrate_cell(
    integrand: &QuadPointField,
    sm: &ShapeMatrices1D,
) -> Result<(CellTensor, u64)> {
    let dim = integrand.dim;
    let n_points = sm.n_points().pow(dim as u32);
    if integrand.n_points != n_points {
        return Err(SbmError::size(n_points, integrand.n_points));
    }
    let values = check_optional(&integrand.values, n_points)?;
    let gradients = check_optional(&integrand.gradients, dim * n_points)?;
    let mut out = CellTensor::zeros(sm.degree(), dim);
    let ops = integrate_cell_raw(
        sm,
        dim,
        values,
        gradients,
        &mut out.data,
        false,
        &mut Workspace::new(),
    );
    Ok((out, ops))
}

fn check_optional(v: &[f64], len: usize) -> Result<Option<&[f64]>> {
    match v.len() {
        0 => Ok(None),
        n if n == len => Ok(Some(v)),
        n => Err(SbmError::size(len, n)),
    }
}

fn check_face(dim: usize, axis: usize, side: usize) -> Result<()> {
    if axis >= dim || side > 1 {
        return Err(SbmError::DimensionMismatch(format!(
            "invalid face (axis {axis}, side {side}) in dimension {dim}"
        )));
    }
    Ok(())
}

/// Values and full reference gradients on face (`axis`, `side`) at the
/// `n_q^{d-1}` face quadrature points.
pub fn evaluate_face_traces(
    coeffs: &CellTensor,
    sm: &ShapeMatrices1D,
    axis: usize,
    side: usize,
) -> Result<(QuadPointField, u64)> {
    check_degree(coeffs, sm)?;
    let dim = coeffs.dim;
    check_face(dim, axis, side)?;
    let n_points = sm.n_points().pow(dim as u32 - 1);
    let mut values = vec![0.0; n_points];
    let mut normal = vec![0.0; n_points];
    let mut gradients = vec![0.0; dim * n_points];
    let ops = evaluate_face_raw(
        sm,
        dim,
        &coeffs.data,
        axis,
        side,
        TraceRequest::ALL,
        &mut values,
        &mut normal,
        &mut gradients,
        &mut Workspace::new(),
    );
    gradients[axis * n_points..(axis + 1) * n_points].copy_from_slice(&normal);
    Ok((
        QuadPointField {
            dim,
            n_points,
            values,
            gradients,
        },
        ops,
    ))
}

/// Tests face terms against `ψ_i` (value terms) and against the reference
/// derivative `∂ψ_i/∂ξ_axis` (normal-derivative terms). Terms must already
/// carry face quadrature weights and surface Jacobian.
pub fn integrate_face(
    value_terms: &[f64],
    normal_deriv_terms: &[f64],
    sm: &ShapeMatrices1D,
    dim: usize,
    axis: usize,
    side: usize,
) -> Result<(CellTensor, u64)> {
    check_face(dim, axis, side)?;
    let n_points = sm.n_points().pow(dim as u32 - 1);
    let values = check_optional(value_terms, n_points)?;
    let normals = check_optional(normal_deriv_terms, n_points)?;
    let mut out = CellTensor::zeros(sm.degree(), dim);
    let ops = integrate_face_raw(
        sm,
        dim,
        axis,
        side,
        values,
        normals,
        &mut out.data,
        false,
        &mut Workspace::new(),
    );
    Ok((out, ops))
}

/// Evaluates the cell polynomial at an arbitrary (possibly exterior)
/// reference point.
pub fn point_evaluate(
    coeffs: &CellTensor,
    basis: &LagrangeBasis1D,
    ref_point: &[f64],
    want_gradient: bool,
) -> Result<(f64, [f64; MAX_DIM], PointEvalOps)> {
    if basis.degree() != coeffs.degree {
        return Err(SbmError::DimensionMismatch(format!(
            "basis degree {} does not match cell tensor degree {}",
            basis.degree(),
            coeffs.degree
        )));
    }
    if ref_point.len() != coeffs.dim {
        return Err(SbmError::size(coeffs.dim, ref_point.len()));
    }
    Ok(point_evaluate_raw(
        basis,
        coeffs.dim,
        &coeffs.data,
        ref_point,
        want_gradient,
        &mut Workspace::new(),
    ))
}
