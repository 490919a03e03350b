//! Independent oracles: dense assembly by probing and a naive operator
//! evaluation with plain loops over basis functions and quadrature points.

use std::io::Write;

use crate::error::{Result, SbmError};
use crate::mesh::{Discretization, FaceKind};
use crate::operator::{ExtensionMode, SbmOperator};
use crate::solver::LinearOperator;
use crate::tensor_basis::{LagrangeBasis1D, MAX_DIM};

pub const PROBE_LIMIT: usize = 20_000;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `max |A_ij − A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in self.data.chunks_exact(self.n) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column `j` is `op.apply(e_j)`.
pub fn assemble_by_probing(op: &impl LinearOperator) -> Result<DenseMatrix> {
    let n = op.n();
    if n > PROBE_LIMIT {
        return Err(SbmError::TooLarge {
            dofs: n,
            limit: PROBE_LIMIT,
        });
    }
    let mut m = DenseMatrix::zeros(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e)?;
        e[j] = 0.0;
        for (i, v) in col.into_iter().enumerate() {
            m.set(i, j, v);
        }
    }
    Ok(m)
}

/// Basis values and reference derivatives of all `(p+1)^d` tensor basis
/// functions at one reference point, by direct products of 1D factors.
fn tensor_basis_at(
    basis: &LagrangeBasis1D,
    dim: usize,
    r: &[f64],
) -> (Vec<f64>, Vec<[f64; MAX_DIM]>) {
    let n = basis.len();
    let count = n.pow(dim as u32);
    let mut values = vec![0.0; count];
    let mut grads = vec![[0.0; MAX_DIM]; count];
    for i in 0..count {
        let mut idx = [0; MAX_DIM];
        let mut rest = i;
        for v in idx.iter_mut().take(dim) {
            *v = rest % n;
            rest /= n;
        }
        let mut v = 1.0;
        for l in 0..dim {
            v *= basis.value(idx[l], r[l]);
        }
        values[i] = v;
        for k in 0..dim {
            let mut g = 1.0;
            for l in 0..dim {
                g *= if l == k {
                    basis.derivative(idx[l], r[l])
                } else {
                    basis.value(idx[l], r[l])
                };
            }
            grads[i][k] = g;
        }
    }
    (values, grads)
}

/// Same operator as [`SbmOperator::apply`], evaluated without sum
/// factorization: every integrand is a double loop over quadrature points
/// and basis functions.
pub fn naive_apply(op: &SbmOperator, u: &[f64]) -> Result<Vec<f64>> {
    let n = op.n_dofs();
    if u.len() != n {
        return Err(SbmError::size(n, u.len()));
    }
    let mesh = op.mesh();
    let layout = op.layout();
    let config = op.config();
    let dim = mesh.dim();
    let h = mesh.h();
    let p = config.degree;
    let basis = LagrangeBasis1D::gauss_lobatto(p);
    let quad = op.quadrature();
    let nq = quad.len();
    let npc = (p + 1).pow(dim as u32);
    let volume = mesh.cell_volume();
    let penalty = (p + 1) as f64 * (p + 1) as f64;

    // cell tables
    let n_cell_q = nq.pow(dim as u32);
    let mut cell_tables = Vec::with_capacity(n_cell_q);
    for q in 0..n_cell_q {
        let mut r = [0.0; MAX_DIM];
        let mut w = volume;
        let mut rest = q;
        for rl in r.iter_mut().take(dim) {
            *rl = quad.nodes()[rest % nq];
            w *= quad.weights()[rest % nq];
            rest /= nq;
        }
        let (_, grads) = tensor_basis_at(&basis, dim, &r[..dim]);
        cell_tables.push((w, grads));
    }

    let mut out = vec![0.0; n];
    let gather = |cell: usize| -> Vec<f64> { layout.cell_dofs(cell).iter().map(|&g| u[g]).collect() };
    let scatter = |cell: usize, w: &[f64], out: &mut [f64]| {
        for (&v, &g) in w.iter().zip(layout.cell_dofs(cell)) {
            out[g] += v;
        }
    };

    for &cell in op.classification().active_cells() {
        let uc = gather(cell);
        let mut w = vec![0.0; npc];
        for (wq, grads) in &cell_tables {
            let mut gu = [0.0; MAX_DIM];
            for j in 0..npc {
                for k in 0..dim {
                    gu[k] += uc[j] * grads[j][k] / h[k];
                }
            }
            for i in 0..npc {
                let mut s = 0.0;
                for k in 0..dim {
                    s += gu[k] * grads[i][k] / h[k];
                }
                w[i] += wq * s;
            }
        }
        scatter(cell, &w, &mut out);
    }

    let data = op.surrogate_data();
    for (fi, face) in op.faces().iter().enumerate() {
        let a = face.axis;
        match face.kind {
            FaceKind::Interior { neighbor } => {
                if layout.discretization() != Discretization::Dg {
                    continue;
                }
                let sigma = config.gamma_f * penalty / h[a];
                let (u1, u2) = (gather(face.owner), gather(neighbor));
                let (mut w1, mut w2) = (vec![0.0; npc], vec![0.0; npc]);
                let measure = mesh.face_measure(a);
                for (r1, wq) in crate::geometry::face_reference_points(quad, dim, a, 1) {
                    let mut r2 = r1;
                    r2[a] = 0.0;
                    let (v1, g1) = tensor_basis_at(&basis, dim, &r1[..dim]);
                    let (v2, g2) = tensor_basis_at(&basis, dim, &r2[..dim]);
                    let mut jump = 0.0;
                    let mut avg = 0.0;
                    for j in 0..npc {
                        jump += u1[j] * v1[j] - u2[j] * v2[j];
                        avg += 0.5 * (u1[j] * g1[j][a] + u2[j] * g2[j][a]) / h[a];
                    }
                    let jxw = wq * measure;
                    for i in 0..npc {
                        // test function on K1: [v] = v1, {∂n v} = ½∂n v1
                        w1[i] += jxw * ((sigma * jump - avg) * v1[i] - 0.5 * jump * g1[i][a] / h[a]);
                        // test function on K2: [v] = −v2, {∂n v} = ½∂n v2
                        w2[i] += jxw * (-(sigma * jump - avg) * v2[i] - 0.5 * jump * g2[i][a] / h[a]);
                    }
                }
                scatter(face.owner, &w1, &mut out);
                scatter(neighbor, &w2, &mut out);
            }
            FaceKind::Surrogate => {
                let k = op.surrogate_index(fi).expect("surrogate data present");
                let sigma = config.beta * penalty / h[a];
                let sign = if face.side == 1 { 1.0 } else { -1.0 };
                let uc = gather(face.owner);
                let mut w = vec![0.0; npc];
                for q in 0..data.points_per_face() {
                    let pt = data.point(k, q);
                    let rt = mesh.to_reference(face.owner, pt.x_tilde);
                    let (v, g) = tensor_basis_at(&basis, dim, &rt[..dim]);
                    let mut grad_u = [0.0; MAX_DIM];
                    let mut val_u = 0.0;
                    for j in 0..npc {
                        val_u += uc[j] * v[j];
                        for l in 0..dim {
                            grad_u[l] += uc[j] * g[j][l] / h[l];
                        }
                    }
                    let eu = match config.extension {
                        ExtensionMode::DirectPointEval => {
                            let (ve, _) = tensor_basis_at(&basis, dim, pt.reference);
                            (0..npc).map(|j| uc[j] * ve[j]).sum::<f64>()
                        }
                        ExtensionMode::TaylorFirstOrder => {
                            val_u + (0..dim).map(|l| pt.shift[l] * grad_u[l]).sum::<f64>()
                        }
                    };
                    let dn_u = sign * grad_u[a];
                    for i in 0..npc {
                        let dn_v = sign * g[i][a] / h[a];
                        w[i] += pt.weight * (-dn_u * v[i] - dn_v * eu + sigma * eu * v[i]);
                    }
                }
                scatter(face.owner, &w, &mut out);
            }
        }
    }
    Ok(out)
}
