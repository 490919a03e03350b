//! The matrix-free SBM operator for `−Δu = f` with Dirichlet data imposed
//! weakly on the surrogate boundary.

mod counters;
mod kernels;

pub use counters::{KernelCounter, OpCounters, SurrogateOps};
pub use kernels::{
    extension, sigma_f, sigma_gamma, ExtensionMode, KernelContext, KernelScratch, TraceData,
};

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbmError};
use crate::geometry::{precompute_surrogate_data, LevelSet, SurrogateFaceData};
use crate::mesh::{
    build_dof_layout, classify_cells, collect_faces, weighted_partition, ActivationCriterion,
    CartesianMesh, CellClassification, Discretization, DofLayout, FaceKind, FaceRecord, Partition,
};
use crate::tensor_basis::{
    evaluate_cell_raw, gauss_quadrature_1d, CellTensor, Quadrature1D, ShapeMatrices1D, MAX_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorConfig {
    pub degree: usize,
    pub discretization: Discretization,
    pub extension: ExtensionMode,
    pub criterion: ActivationCriterion,
    /// Surrogate penalty scale.
    pub beta: f64,
    /// Interior penalty scale (DG only).
    pub gamma_f: f64,
    /// Worker threads, and number of partitions, for `apply`.
    pub threads: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            degree: 1,
            discretization: Discretization::Cg,
            extension: ExtensionMode::DirectPointEval,
            criterion: ActivationCriterion::StrictInterior,
            beta: 4.0,
            gamma_f: 2.0,
            threads: 1,
        }
    }
}

impl OperatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=15).contains(&self.degree) {
            return Err(SbmError::InvalidConfig(format!(
                "degree must be in 1..=15, got {}",
                self.degree
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(SbmError::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.gamma_f > 0.0 && self.gamma_f.is_finite()) {
            return Err(SbmError::InvalidConfig(format!(
                "gamma_f must be positive, got {}",
                self.gamma_f
            )));
        }
        if self.threads == 0 {
            return Err(SbmError::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which operator terms `apply_terms` includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub cells: bool,
    pub interior_faces: bool,
    pub surrogate_faces: bool,
}

impl Terms {
    pub const ALL: Self = Self {
        cells: true,
        interior_faces: true,
        surrogate_faces: true,
    };
    pub const CELLS: Self = Self {
        cells: true,
        interior_faces: false,
        surrogate_faces: false,
    };
    pub const INTERIOR_FACES: Self = Self {
        cells: false,
        interior_faces: true,
        surrogate_faces: false,
    };
    pub const SURROGATE_FACES: Self = Self {
        cells: false,
        interior_faces: false,
        surrogate_faces: true,
    };
}

/// Scratch owned by one partition during `apply`.
struct PartBuffers {
    scratch: KernelScratch,
    u: [Vec<f64>; 2],
    w: [Vec<f64>; 2],
}

impl PartBuffers {
    fn new(ctx: &KernelContext) -> Self {
        let n = ctx.dofs_per_cell();
        Self {
            scratch: KernelScratch::new(&ctx.sm, ctx.dim),
            u: [vec![0.0; n], vec![0.0; n]],
            w: [vec![0.0; n], vec![0.0; n]],
        }
    }
}

pub struct SbmOperator {
    mesh: CartesianMesh,
    class: CellClassification,
    faces: Vec<FaceRecord>,
    layout: DofLayout,
    quad: Quadrature1D,
    data: SurrogateFaceData,
    config: OperatorConfig,
    ctx: KernelContext,
    /// Faces owned by active slot `k` are `faces[face_offsets[k]..face_offsets[k+1]]`.
    face_offsets: Vec<usize>,
    /// Position of each face in the surrogate data, if it is a surrogate face.
    surrogate_slot: Vec<Option<usize>>,
    partition: Partition,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for SbmOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SbmOperator")
            .field("dim", &self.mesh.dim())
            .field("active_cells", &self.class.n_active())
            .field("faces", &self.faces.len())
            .field("dofs", &self.layout.n_dofs())
            .field("config", &self.config)
            .finish()
    }
}

impl SbmOperator {
    /// Classifies the mesh against `levelset` and sets up the operator.
    /// Boundary values start at zero; see [`assemble_rhs`](Self::assemble_rhs).
    pub fn new(
        mesh: CartesianMesh,
        levelset: &(impl LevelSet + ?Sized),
        config: OperatorConfig,
    ) -> Result<Self> {
        config.validate()?;
        let class = classify_cells(&mesh, levelset, config.criterion)?;
        Self::with_classification(mesh, class, levelset, config)
    }

    pub fn with_classification(
        mesh: CartesianMesh,
        class: CellClassification,
        levelset: &(impl LevelSet + ?Sized),
        config: OperatorConfig,
    ) -> Result<Self> {
        config.validate()?;
        if class.n_cells() != mesh.n_cells() {
            return Err(SbmError::size(mesh.n_cells(), class.n_cells()));
        }
        let p = config.degree;
        let faces = collect_faces(&mesh, &class);
        let layout = build_dof_layout(&mesh, &class, p, config.discretization);
        let quad = gauss_quadrature_1d(p + 1);
        let sm = ShapeMatrices1D::new(p, &quad);
        let data = precompute_surrogate_data(&mesh, &faces, levelset, &quad, |_| 0.0)?;
        let ctx = KernelContext::new(sm, mesh.h(), config.extension, config.beta, config.gamma_f);

        let mut face_offsets = vec![0; class.n_active() + 1];
        for f in &faces {
            face_offsets[class.active_slot(f.owner).expect("face owner is active") + 1] += 1;
        }
        for k in 0..class.n_active() {
            face_offsets[k + 1] += face_offsets[k];
        }
        let mut surrogate_slot = vec![None; faces.len()];
        for (k, &fi) in data.faces.iter().enumerate() {
            surrogate_slot[fi] = Some(k);
        }
        let mut op = Self {
            partition: weighted_partition(&class, &faces, mesh.dim(), 1),
            mesh,
            class,
            faces,
            layout,
            quad,
            data,
            config,
            ctx,
            face_offsets,
            surrogate_slot,
            pool: None,
        };
        op.set_threads(config.threads)?;
        Ok(op)
    }

    /// Re-partitions the active cells into `threads` parts, each processed
    /// by its own worker.
    pub fn set_threads(&mut self, threads: usize) -> Result<()> {
        if threads == 0 {
            return Err(SbmError::InvalidConfig("threads must be at least 1".into()));
        }
        self.config.threads = threads;
        self.partition = weighted_partition(&self.class, &self.faces, self.mesh.dim(), threads);
        self.pool = if threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| SbmError::InvalidConfig(format!("thread pool: {e}")))?;
            Some(Arc::new(pool))
        } else {
            None
        };
        Ok(())
    }

    pub fn mesh(&self) -> &CartesianMesh {
        &self.mesh
    }

    pub fn classification(&self) -> &CellClassification {
        &self.class
    }

    pub fn faces(&self) -> &[FaceRecord] {
        &self.faces
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    pub fn quadrature(&self) -> &Quadrature1D {
        &self.quad
    }

    pub fn shape_matrices(&self) -> &ShapeMatrices1D {
        &self.ctx.sm
    }

    pub fn surrogate_data(&self) -> &SurrogateFaceData {
        &self.data
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.config
    }

    pub fn kernels(&self) -> &KernelContext {
        &self.ctx
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.n_dofs()
    }

    /// Index of face `face` in the surrogate data.
    pub fn surrogate_index(&self, face: usize) -> Option<usize> {
        self.surrogate_slot[face]
    }

    /// Faces owned by the active cell in slot `slot`.
    pub fn owned_faces(&self, slot: usize) -> Range<usize> {
        self.face_offsets[slot]..self.face_offsets[slot + 1]
    }

    /// Resamples the stored boundary data at the projected points.
    pub fn set_boundary_values(&mut self, g: impl Fn(&[f64]) -> f64) {
        self.data.set_boundary_values(&self.mesh, &self.faces, g);
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.layout.interpolate(&self.mesh, self.ctx.sm.basis(), f)
    }

    /// `w = A u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply_with_counts(u)?.0)
    }

    pub fn apply_with_counts(&self, u: &[f64]) -> Result<(Vec<f64>, OpCounters)> {
        self.apply_terms(u, Terms::ALL)
    }

    /// `w = A u` restricted to the selected terms.
    pub fn apply_terms(&self, u: &[f64], terms: Terms) -> Result<(Vec<f64>, OpCounters)> {
        let n = self.n_dofs();
        if u.len() != n {
            return Err(SbmError::size(n, u.len()));
        }
        let run = |range: &Range<usize>| {
            let mut out = vec![0.0; n];
            let counters = self.apply_part(range.clone(), u, &mut out, terms);
            (out, counters)
        };
        let ranges = &self.partition.ranges;
        let parts: Vec<(Vec<f64>, OpCounters)> = match &self.pool {
            Some(pool) if ranges.len() > 1 => pool.install(|| ranges.par_iter().map(run).collect()),
            _ => ranges.iter().map(run).collect(),
        };
        let mut iter = parts.into_iter();
        let (mut w, mut counters) = iter.next().expect("at least one part");
        for (part, c) in iter {
            for (a, b) in w.iter_mut().zip(&part) {
                *a += b;
            }
            counters += c;
        }
        Ok((w, counters))
    }

    fn apply_part(&self, slots: Range<usize>, u: &[f64], out: &mut [f64], terms: Terms) -> OpCounters {
        let mut b = PartBuffers::new(&self.ctx);
        let mut counters = OpCounters::default();
        let dg = self.layout.discretization() == Discretization::Dg;
        for slot in slots {
            let cell = self.class.active_cells()[slot];
            let [u0, u1] = &mut b.u;
            let [w0, w1] = &mut b.w;
            self.layout.gather_into(u, cell, u0);
            if terms.cells {
                counters.cells.record(self.ctx.cell(u0, w0, &mut b.scratch));
            } else {
                w0.fill(0.0);
            }
            for fi in self.owned_faces(slot) {
                let face = &self.faces[fi];
                match face.kind {
                    FaceKind::Interior { neighbor } if dg && terms.interior_faces => {
                        self.layout.gather_into(u, neighbor, u1);
                        w1.fill(0.0);
                        let ops = self.ctx.interior_face(face.axis, u0, u1, w0, w1, &mut b.scratch);
                        counters.interior_faces.record(ops);
                        self.layout.scatter_add_from(w1, neighbor, out);
                    }
                    FaceKind::Surrogate if terms.surrogate_faces => {
                        let k = self.surrogate_slot[fi].expect("surrogate face has data");
                        let ops = self.ctx.surrogate_face(
                            face.axis,
                            face.side,
                            u0,
                            |q| self.data.point(k, q),
                            w0,
                            &mut b.scratch,
                        );
                        counters.surrogate_faces.record(ops.total());
                        counters.surrogate_breakdown += ops;
                    }
                    _ => {}
                }
            }
            self.layout.scatter_add_from(w0, cell, out);
        }
        counters
    }

    /// Stiffness action of one cell.
    pub fn cell_kernel(&self, u_local: &CellTensor) -> Result<(CellTensor, u64)> {
        self.check_local(u_local)?;
        let mut out = CellTensor::zeros(self.config.degree, self.dim());
        let mut s = KernelScratch::new(&self.ctx.sm, self.dim());
        let ops = self.ctx.cell(u_local.as_slice(), out.as_mut_slice(), &mut s);
        Ok((out, ops))
    }

    /// Interior-penalty terms of interior face `face` (an index into
    /// [`faces`](Self::faces)) for owner data `u1` and neighbor data `u2`.
    pub fn interior_face_kernel(
        &self,
        face: usize,
        u1: &CellTensor,
        u2: &CellTensor,
    ) -> Result<(CellTensor, CellTensor, u64)> {
        if self.layout.discretization() != Discretization::Dg {
            return Err(SbmError::Misconfigured(
                "interior-face kernel requires a DG discretization".into(),
            ));
        }
        let f = self.faces.get(face).ok_or(SbmError::size(self.faces.len(), face))?;
        if f.is_surrogate() {
            return Err(SbmError::Misconfigured(format!("face {face} is not interior")));
        }
        self.check_local(u1)?;
        self.check_local(u2)?;
        let mut w1 = CellTensor::zeros(self.config.degree, self.dim());
        let mut w2 = w1.clone();
        let mut s = KernelScratch::new(&self.ctx.sm, self.dim());
        let ops = self.ctx.interior_face(
            f.axis,
            u1.as_slice(),
            u2.as_slice(),
            w1.as_mut_slice(),
            w2.as_mut_slice(),
            &mut s,
        );
        Ok((w1, w2, ops))
    }

    /// Surrogate-boundary terms of surrogate face `face` (an index into
    /// [`faces`](Self::faces)) for owner data `u_local`.
    pub fn surrogate_face_kernel(
        &self,
        face: usize,
        u_local: &CellTensor,
    ) -> Result<(CellTensor, SurrogateOps)> {
        self.check_local(u_local)?;
        let k = self
            .surrogate_slot
            .get(face)
            .copied()
            .flatten()
            .ok_or_else(|| SbmError::Misconfigured(format!("face {face} is not a surrogate face")))?;
        let f = &self.faces[face];
        let mut out = CellTensor::zeros(self.config.degree, self.dim());
        let mut s = KernelScratch::new(&self.ctx.sm, self.dim());
        let ops = self.ctx.surrogate_face(
            f.axis,
            f.side,
            u_local.as_slice(),
            |q| self.data.point(k, q),
            out.as_mut_slice(),
            &mut s,
        );
        Ok((out, ops))
    }

    fn check_local(&self, u: &CellTensor) -> Result<()> {
        if u.degree() != self.config.degree || u.dim() != self.dim() {
            return Err(SbmError::DimensionMismatch(format!(
                "cell tensor (p={}, d={}) does not match operator (p={}, d={})",
                u.degree(),
                u.dim(),
                self.config.degree,
                self.dim()
            )));
        }
        Ok(())
    }

    /// Physical quadrature points of an active cell, lexicographic.
    pub(crate) fn cell_points(&self, cell: usize, quad: &Quadrature1D) -> Vec<[f64; MAX_DIM]> {
        let dim = self.dim();
        let nq = quad.len();
        (0..nq.pow(dim as u32))
            .map(|q| {
                let mut r = [0.0; MAX_DIM];
                let mut rest = q;
                for rl in r.iter_mut().take(dim) {
                    *rl = quad.nodes()[rest % nq];
                    rest /= nq;
                }
                self.mesh.to_physical(cell, &r)
            })
            .collect()
    }

    /// `b = ∫ f ψ + Σ_surrogate ∫ (σ_Γ g ψ − g ∇ψ·ñ)`, with `g` sampled at
    /// the projected boundary points.
    pub fn assemble_rhs(
        &self,
        f: impl Fn(&[f64]) -> f64,
        g: impl Fn(&[f64]) -> f64,
    ) -> Vec<f64> {
        let dim = self.dim();
        let npc = self.ctx.dofs_per_cell();
        let mut b = vec![0.0; self.n_dofs()];
        let mut s = KernelScratch::new(&self.ctx.sm, dim);
        let mut local = vec![0.0; npc];
        let nf = self.data.points_per_face();
        let mut g_vals = vec![0.0; nf];
        let mut weights = vec![0.0; nf];
        for (slot, &cell) in self.class.active_cells().iter().enumerate() {
            let mut fx: Vec<f64> = self
                .cell_points(cell, &self.quad)
                .iter()
                .map(|x| f(&x[..dim]))
                .collect();
            self.ctx.cell_rhs(&mut fx, &mut local, &mut s);
            for fi in self.owned_faces(slot) {
                let Some(k) = self.surrogate_slot[fi] else {
                    continue;
                };
                for q in 0..nf {
                    let p = self.data.point(k, q);
                    let mut x = [0.0; MAX_DIM];
                    for l in 0..dim {
                        x[l] = p.x_tilde[l] + p.shift[l];
                    }
                    g_vals[q] = g(&x[..dim]);
                    weights[q] = p.weight;
                }
                let face = &self.faces[fi];
                self.ctx.surrogate_rhs(face.axis, face.side, &g_vals, &weights, &mut local, &mut s);
            }
            self.layout.scatter_add_from(&local, cell, &mut b);
        }
        b
    }

    /// Diagonal of `A`, from local unit probes of every kernel.
    pub fn diagonal(&self) -> Vec<f64> {
        let npc = self.ctx.dofs_per_cell();
        let mut diag = vec![0.0; self.n_dofs()];
        let mut s = KernelScratch::new(&self.ctx.sm, self.dim());
        let dg = self.layout.discretization() == Discretization::Dg;
        let mut e = vec![0.0; npc];
        let zero = vec![0.0; npc];
        let mut w = vec![0.0; npc];
        let mut w_other = vec![0.0; npc];
        for (slot, &cell) in self.class.active_cells().iter().enumerate() {
            let mut local = vec![0.0; npc];
            for i in 0..npc {
                e.fill(0.0);
                e[i] = 1.0;
                self.ctx.cell(&e, &mut w, &mut s);
                for fi in self.owned_faces(slot) {
                    let face = &self.faces[fi];
                    match face.kind {
                        FaceKind::Surrogate => {
                            let k = self.surrogate_slot[fi].expect("surrogate face has data");
                            self.ctx.surrogate_face(
                                face.axis,
                                face.side,
                                &e,
                                |q| self.data.point(k, q),
                                &mut w,
                                &mut s,
                            );
                        }
                        FaceKind::Interior { .. } if dg => {
                            w_other.fill(0.0);
                            self.ctx.interior_face(face.axis, &e, &zero, &mut w, &mut w_other, &mut s);
                        }
                        _ => {}
                    }
                }
                // faces owned by the lower neighbors, seen from this cell's side 0
                if dg {
                    for axis in 0..self.dim() {
                        let Some(nb) = self.mesh.neighbor(cell, axis, 0) else {
                            continue;
                        };
                        if !self.class.is_active(nb) {
                            continue;
                        }
                        w_other.fill(0.0);
                        self.ctx.interior_face(axis, &zero, &e, &mut w_other, &mut w, &mut s);
                    }
                }
                local[i] = w[i];
            }
            self.layout.scatter_add_from(&local, cell, &mut diag);
        }
        diag
    }

    /// Values of `u` at the `n`-point Gauss points of every active cell,
    /// with the matching `w_q |K|` weights; used for error norms.
    pub(crate) fn sample_cells(
        &self,
        u: &[f64],
        quad: &Quadrature1D,
        mut visit: impl FnMut(&[f64], f64, f64),
    ) {
        let dim = self.dim();
        let sm = ShapeMatrices1D::new(self.config.degree, quad);
        let nq = quad.len();
        let n_points = nq.pow(dim as u32);
        let mut local = vec![0.0; self.ctx.dofs_per_cell()];
        let mut values = vec![0.0; n_points];
        let mut ws = crate::tensor_basis::Workspace::new();
        let volume = self.mesh.cell_volume();
        for &cell in self.class.active_cells() {
            self.layout.gather_into(u, cell, &mut local);
            evaluate_cell_raw(&sm, dim, &local, true, false, &mut values, &mut [], &mut ws);
            for (q, x) in self.cell_points(cell, quad).iter().enumerate() {
                let mut rest = q;
                let mut wq = volume;
                for _ in 0..dim {
                    wq *= quad.weights()[rest % nq];
                    rest /= nq;
                }
                visit(&x[..dim], values[q], wq);
            }
        }
    }
}

#[cfg(test)]
mod tests;
