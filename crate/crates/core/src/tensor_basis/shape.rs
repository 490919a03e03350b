//! Lagrange polynomials on Gauss–Lobatto support points and their
//! tabulation at quadrature points.

use super::quadrature::{gauss_lobatto_1d, Quadrature1D};

/// Lagrange basis of degree `p` on the `p + 1` Gauss–Lobatto points of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeBasis1D {
    support: Vec<f64>,
    inv_denominators: Vec<f64>,
}

impl LagrangeBasis1D {
    pub fn gauss_lobatto(degree: usize) -> Self {
        assert!(degree >= 1, "polynomial degree must be at least one");
        let support = gauss_lobatto_1d(degree + 1).nodes().to_vec();
        Self::with_support(support)
    }

    pub fn with_support(support: Vec<f64>) -> Self {
        let inv_denominators = (0..support.len())
            .map(|i| {
                let denom: f64 = (0..support.len())
                    .filter(|&j| j != i)
                    .map(|j| support[i] - support[j])
                    .product();
                1.0 / denom
            })
            .collect();
        Self {
            support,
            inv_denominators,
        }
    }

    pub fn degree(&self) -> usize {
        self.support.len() - 1
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn value(&self, i: usize, x: f64) -> f64 {
        let mut v = self.inv_denominators[i];
        for (j, &z) in self.support.iter().enumerate() {
            if j != i {
                v *= x - z;
            }
        }
        v
    }

    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.support.len() {
            if k == i {
                continue;
            }
            let mut term = 1.0;
            for (j, &z) in self.support.iter().enumerate() {
                if j != i && j != k {
                    term *= x - z;
                }
            }
            sum += term;
        }
        sum * self.inv_denominators[i]
    }

    /// Writes all basis values at `x` into `out`; returns the flop count.
    pub fn values_into(&self, x: f64, diffs: &mut [f64], out: &mut [f64]) -> u64 {
        let n = self.support.len();
        for (d, &z) in diffs.iter_mut().zip(&self.support) {
            *d = x - z;
        }
        for i in 0..n {
            let mut v = self.inv_denominators[i];
            for (j, &d) in diffs[..n].iter().enumerate() {
                if j != i {
                    v *= d;
                }
            }
            out[i] = v;
        }
        // n subtractions, then p products and one scaling per basis function
        (n + n * n) as u64
    }

    /// Writes all basis derivatives at `x` into `out`, reusing the
    /// differences `x - z_j` left in `diffs` by [`values_into`](Self::values_into).
    pub fn derivatives_into(&self, diffs: &[f64], out: &mut [f64]) -> u64 {
        let n = self.support.len();
        let mut ops = 0u64;
        for i in 0..n {
            let mut sum = 0.0;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let mut term = 1.0;
                for (j, &d) in diffs[..n].iter().enumerate() {
                    if j != i && j != k {
                        term *= d;
                    }
                }
                sum += term;
                ops += (n - 2) as u64 + 1;
            }
            out[i] = sum * self.inv_denominators[i];
            ops += 1;
        }
        ops
    }
}

/// 1D basis values and derivatives tabulated at the points of a quadrature
/// rule; the building block of every sum-factorized sweep.
///
/// `values[q * n_dofs + i] = φ_i(x_q)`, `derivatives[q * n_dofs + i] = φ_i'(x_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMatrices1D {
    basis: LagrangeBasis1D,
    quadrature: Quadrature1D,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    /// `φ_i'(0)` and `φ_i'(1)`.
    endpoint_derivatives: [Vec<f64>; 2],
}

impl ShapeMatrices1D {
    pub fn new(degree: usize, quadrature: &Quadrature1D) -> Self {
        assert!(!quadrature.is_empty(), "quadrature rule is empty");
        let basis = LagrangeBasis1D::gauss_lobatto(degree);
        let n = basis.len();
        let mut values = Vec::with_capacity(quadrature.len() * n);
        let mut derivatives = Vec::with_capacity(quadrature.len() * n);
        for &x in quadrature.nodes() {
            for i in 0..n {
                values.push(basis.value(i, x));
                derivatives.push(basis.derivative(i, x));
            }
        }
        let endpoint_derivatives = [
            (0..n).map(|i| basis.derivative(i, 0.0)).collect(),
            (0..n).map(|i| basis.derivative(i, 1.0)).collect(),
        ];
        Self {
            basis,
            quadrature: quadrature.clone(),
            values,
            derivatives,
            endpoint_derivatives,
        }
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn n_dofs(&self) -> usize {
        self.basis.len()
    }

    pub fn n_points(&self) -> usize {
        self.quadrature.len()
    }

    pub fn basis(&self) -> &LagrangeBasis1D {
        &self.basis
    }

    pub fn quadrature(&self) -> &Quadrature1D {
        &self.quadrature
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }

    pub fn value(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.n_dofs() + i]
    }

    pub fn derivative(&self, q: usize, i: usize) -> f64 {
        self.derivatives[q * self.n_dofs() + i]
    }

    pub fn endpoint_derivatives(&self, side: usize) -> &[f64] {
        &self.endpoint_derivatives[side]
    }

    /// Index of the support point sitting at coordinate `side` (0 or 1).
    /// Lobatto support includes both endpoints, so face value traces are
    /// plain slices of the cell tensor.
    pub fn endpoint_node(&self, side: usize) -> usize {
        if side == 0 {
            0
        } else {
            self.degree()
        }
    }
}
