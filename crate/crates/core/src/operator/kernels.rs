//! Local kernels for cells, interior faces and surrogate faces. All act on
//! raw lexicographic coefficient slices and report multiply-add counts.

use serde::{Deserialize, Serialize};

use super::counters::SurrogateOps;
use crate::geometry::SurrogatePoint;
use crate::tensor_basis::{
    evaluate_cell_raw, evaluate_face_raw, integrate_cell_raw, integrate_face_raw,
    point_evaluate_raw, CellTensor, LagrangeBasis1D, ShapeMatrices1D, TraceRequest, Workspace,
    MAX_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionMode {
    /// Polynomial extrapolation of the owner cell's solution to the true
    /// boundary point.
    #[default]
    DirectPointEval,
    /// `u_h(x̃) + d·∇u_h(x̃)`.
    TaylorFirstOrder,
}

/// Surrogate penalty `β (p+1)² / h`.
pub fn sigma_gamma(beta: f64, h: f64, degree: usize) -> f64 {
    beta * ((degree + 1) * (degree + 1)) as f64 / h
}

/// Interior penalty `γ_F (p+1)² / h`.
pub fn sigma_f(gamma_f: f64, h: f64, degree: usize) -> f64 {
    gamma_f * ((degree + 1) * (degree + 1)) as f64 / h
}

/// Face data needed by the Taylor-mode extension.
#[derive(Debug, Clone, Copy)]
pub struct TraceData<'a> {
    /// `u_h(x̃)`.
    pub value: f64,
    /// Physical gradient `∇u_h(x̃)`.
    pub gradient: &'a [f64],
}

/// `E u_h` at one surrogate point. Direct mode extrapolates `u_local` to
/// the stored reference coordinates; Taylor mode uses the trace data.
/// Returns the value and the operation count of the extension.
pub fn extension(
    mode: ExtensionMode,
    u_local: &CellTensor,
    basis: &LagrangeBasis1D,
    trace: TraceData<'_>,
    point: &SurrogatePoint<'_>,
) -> (f64, u64) {
    match mode {
        ExtensionMode::DirectPointEval => {
            let (v, _, ops) = point_evaluate_raw(
                basis,
                u_local.dim(),
                u_local.as_slice(),
                point.reference,
                false,
                &mut Workspace::new(),
            );
            (v, ops.total())
        }
        ExtensionMode::TaylorFirstOrder => {
            let dot: f64 = point.shift.iter().zip(trace.gradient).map(|(d, g)| d * g).sum();
            (trace.value + dot, point.shift.len() as u64)
        }
    }
}

/// Per-thread scratch for the kernels.
#[derive(Debug, Default, Clone)]
pub struct KernelScratch {
    pub(crate) ws: Workspace,
    grads: Vec<f64>,
    values: [Vec<f64>; 2],
    normal: [Vec<f64>; 2],
    tangential: Vec<f64>,
    value_terms: Vec<f64>,
    normal_terms: Vec<f64>,
}

impl KernelScratch {
    pub fn new(sm: &ShapeMatrices1D, dim: usize) -> Self {
        let nq = sm.n_points();
        let cell = nq.pow(dim as u32);
        let face = nq.pow(dim as u32 - 1);
        Self {
            ws: Workspace::new(),
            grads: vec![0.0; dim * cell],
            values: [vec![0.0; face], vec![0.0; face]],
            normal: [vec![0.0; face], vec![0.0; face]],
            tangential: vec![0.0; dim * face],
            value_terms: vec![0.0; face],
            normal_terms: vec![0.0; face],
        }
    }
}

/// Everything the kernels need beyond the input coefficients.
#[derive(Debug, Clone)]
pub struct KernelContext {
    pub sm: ShapeMatrices1D,
    pub dim: usize,
    pub h: [f64; MAX_DIM],
    pub mode: ExtensionMode,
    /// `σ_Γ` for faces normal to each axis.
    pub sigma_gamma: [f64; MAX_DIM],
    /// `σ_F` for faces normal to each axis.
    pub sigma_f: [f64; MAX_DIM],
    /// `w_q |K|`.
    cell_jxw: Vec<f64>,
    /// `w_q |K| / h_k²`, component-major like the gradients.
    cell_scale: Vec<f64>,
    /// `w_q |F|` for faces normal to each axis.
    face_jxw: [Vec<f64>; MAX_DIM],
}

impl KernelContext {
    pub fn new(
        sm: ShapeMatrices1D,
        h: &[f64],
        mode: ExtensionMode,
        beta: f64,
        gamma_f: f64,
    ) -> Self {
        let dim = h.len();
        let p = sm.degree();
        let nq = sm.n_points();
        let w = sm.quadrature().weights().to_vec();
        let volume: f64 = h.iter().product();
        let n_cell = nq.pow(dim as u32);
        let mut cell_scale = vec![0.0; dim * n_cell];
        let mut cell_jxw = vec![0.0; n_cell];
        for q in 0..n_cell {
            let mut rest = q;
            let mut wq = volume;
            for _ in 0..dim {
                wq *= w[rest % nq];
                rest /= nq;
            }
            cell_jxw[q] = wq;
            for k in 0..dim {
                cell_scale[k * n_cell + q] = wq / (h[k] * h[k]);
            }
        }
        let n_face = nq.pow(dim as u32 - 1);
        let mut face_jxw: [Vec<f64>; MAX_DIM] = Default::default();
        let mut hh = [1.0; MAX_DIM];
        let mut sg = [0.0; MAX_DIM];
        let mut sf = [0.0; MAX_DIM];
        for a in 0..dim {
            hh[a] = h[a];
            sg[a] = sigma_gamma(beta, h[a], p);
            sf[a] = sigma_f(gamma_f, h[a], p);
            let measure: f64 = (0..dim).filter(|&l| l != a).map(|l| h[l]).product();
            face_jxw[a] = (0..n_face)
                .map(|q| {
                    let mut rest = q;
                    let mut wq = measure;
                    for _ in 0..dim - 1 {
                        wq *= w[rest % nq];
                        rest /= nq;
                    }
                    wq
                })
                .collect();
        }
        Self {
            sm,
            dim,
            h: hh,
            mode,
            sigma_gamma: sg,
            sigma_f: sf,
            cell_jxw,
            cell_scale,
            face_jxw,
        }
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.sm.n_dofs().pow(self.dim as u32)
    }

    pub fn points_per_face(&self) -> usize {
        self.sm.n_points().pow(self.dim as u32 - 1)
    }

    /// `out = ∫_K ∇u·∇ψ_i`.
    pub fn cell(&self, u: &[f64], out: &mut [f64], s: &mut KernelScratch) -> u64 {
        let dim = self.dim;
        let mut ops = evaluate_cell_raw(&self.sm, dim, u, false, true, &mut [], &mut s.grads, &mut s.ws);
        for (g, c) in s.grads.iter_mut().zip(&self.cell_scale) {
            *g *= c;
        }
        ops += self.cell_scale.len() as u64;
        ops += integrate_cell_raw(&self.sm, dim, None, Some(&s.grads), out, false, &mut s.ws);
        ops
    }

    /// Symmetric interior penalty terms of the face normal to `axis`
    /// between the lower cell (`u1`, its side 1) and the upper cell (`u2`,
    /// its side 0). Accumulates into `w1`, `w2`.
    #[allow(clippy::too_many_arguments)]
    pub fn interior_face(
        &self,
        axis: usize,
        u1: &[f64],
        u2: &[f64],
        w1: &mut [f64],
        w2: &mut [f64],
        s: &mut KernelScratch,
    ) -> u64 {
        let (sm, dim) = (&self.sm, self.dim);
        let KernelScratch {
            ws,
            values,
            normal,
            value_terms,
            normal_terms,
            ..
        } = s;
        let [v1, v2] = values;
        let [n1, n2] = normal;
        let req = TraceRequest::VALUE_AND_NORMAL;
        let mut ops = evaluate_face_raw(sm, dim, u1, axis, 1, req, v1, n1, &mut [], ws);
        ops += evaluate_face_raw(sm, dim, u2, axis, 0, req, v2, n2, &mut [], ws);
        let inv_h = 1.0 / self.h[axis];
        let sigma = self.sigma_f[axis];
        let jxw = &self.face_jxw[axis];
        for q in 0..jxw.len() {
            let jump = v1[q] - v2[q];
            let average = 0.5 * (n1[q] + n2[q]) * inv_h;
            value_terms[q] = (sigma * jump - average) * jxw[q];
            normal_terms[q] = -0.5 * jump * inv_h * jxw[q];
        }
        ops += 6 * jxw.len() as u64;
        ops += integrate_face_raw(sm, dim, axis, 1, Some(value_terms), Some(normal_terms), w1, true, ws);
        for v in value_terms.iter_mut() {
            *v = -*v;
        }
        ops += integrate_face_raw(sm, dim, axis, 0, Some(value_terms), Some(normal_terms), w2, true, ws);
        ops
    }

    /// Surrogate-boundary terms of one face of the owner cell `u`,
    /// accumulated into `out`. `points(q)` yields the stored data of face
    /// point `q`.
    pub fn surrogate_face<'a>(
        &self,
        axis: usize,
        side: usize,
        u: &[f64],
        points: impl Fn(usize) -> SurrogatePoint<'a>,
        out: &mut [f64],
        s: &mut KernelScratch,
    ) -> SurrogateOps {
        let (sm, dim) = (&self.sm, self.dim);
        let KernelScratch {
            ws,
            values,
            normal,
            tangential,
            value_terms,
            normal_terms,
            ..
        } = s;
        let (vals, nrm) = (&mut values[0], &mut normal[0]);
        let n_face = self.points_per_face();
        let sign = if side == 1 { 1.0 } else { -1.0 };
        let inv_h = 1.0 / self.h[axis];
        let sigma = self.sigma_gamma[axis];
        let mut ops = SurrogateOps::default();
        match self.mode {
            ExtensionMode::DirectPointEval => {
                ops.trace = evaluate_face_raw(sm, dim, u, axis, side, TraceRequest::NORMAL, &mut [], nrm, &mut [], ws);
                for (q, v) in vals.iter_mut().enumerate().take(n_face) {
                    let p = points(q);
                    let (eu, _, po) = point_evaluate_raw(sm.basis(), dim, u, p.reference, false, ws);
                    *v = eu;
                    ops.point_evaluations += 1;
                    ops.point_eval.basis += po.basis;
                    ops.point_eval.coefficient += po.coefficient;
                }
                ops.extension = ops.point_eval.total();
            }
            ExtensionMode::TaylorFirstOrder => {
                ops.trace = evaluate_face_raw(sm, dim, u, axis, side, TraceRequest::ALL, vals, nrm, tangential, ws);
                for (q, v) in vals.iter_mut().enumerate().take(n_face) {
                    let p = points(q);
                    let mut eu = *v;
                    for l in 0..dim {
                        let g = if l == axis { nrm[q] } else { tangential[l * n_face + q] };
                        eu += p.shift[l] * g / self.h[l];
                    }
                    *v = eu;
                }
                ops.extension = (2 * dim * n_face) as u64;
            }
        }
        for q in 0..n_face {
            let wt = points(q).weight;
            let eu = vals[q];
            let dn = sign * nrm[q] * inv_h;
            value_terms[q] = (sigma * eu - dn) * wt;
            normal_terms[q] = -eu * sign * inv_h * wt;
        }
        ops.pointwise = 6 * n_face as u64;
        ops.integrate =
            integrate_face_raw(sm, dim, axis, side, Some(value_terms), Some(normal_terms), out, true, ws);
        ops
    }

    /// Surrogate-boundary right-hand-side terms `∫ σ_Γ g ψ − g ∇ψ·ñ` with
    /// `g` already sampled at the projected points.
    pub fn surrogate_rhs(
        &self,
        axis: usize,
        side: usize,
        g: &[f64],
        weights: &[f64],
        out: &mut [f64],
        s: &mut KernelScratch,
    ) {
        let sign = if side == 1 { 1.0 } else { -1.0 };
        let inv_h = 1.0 / self.h[axis];
        let sigma = self.sigma_gamma[axis];
        for q in 0..g.len() {
            s.value_terms[q] = sigma * g[q] * weights[q];
            s.normal_terms[q] = -g[q] * sign * inv_h * weights[q];
        }
        integrate_face_raw(
            &self.sm,
            self.dim,
            axis,
            side,
            Some(&s.value_terms),
            Some(&s.normal_terms),
            out,
            true,
            &mut s.ws,
        );
    }

    /// Volume right-hand side `∫ f ψ_i` given `f` at the quadrature points.
    pub fn cell_rhs(&self, f_at_points: &mut [f64], out: &mut [f64], s: &mut KernelScratch) {
        for (f, c) in f_at_points.iter_mut().zip(&self.cell_jxw) {
            *f *= c;
        }
        integrate_cell_raw(&self.sm, self.dim, Some(f_at_points), None, out, false, &mut s.ws);
    }
}
