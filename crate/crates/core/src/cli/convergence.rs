//! Manufactured-solution solves on a sequence of uniformly refined meshes.

use std::io::Write;

use log::info;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{LevelSet, Manufactured};
use crate::mesh::CartesianMesh;
use crate::operator::{OperatorConfig, SbmOperator};
use crate::solver::{l2_error, solve, SolverConfig, SolveReport};

/// One manufactured solve: operator, discrete solution, solver report and
/// L² error.
pub struct ManufacturedSolve {
    pub operator: SbmOperator,
    pub solution: Vec<f64>,
    pub report: SolveReport,
    pub l2_error: f64,
}

pub fn solve_manufactured(
    mesh: CartesianMesh,
    geometry: &dyn LevelSet,
    operator: OperatorConfig,
    solver: &SolverConfig,
    exact: &Manufactured,
) -> Result<ManufacturedSolve> {
    let op = SbmOperator::new(mesh, geometry, operator)?;
    let b = op.assemble_rhs(exact.f, exact.u);
    let (solution, report) = solve(&op, &b, solver)?;
    let l2_error = l2_error(&op, &solution, exact.u)?;
    Ok(ManufacturedSolve {
        operator: op,
        solution,
        report,
        l2_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub cells_per_axis: usize,
    /// Cell edge length.
    pub h: f64,
    pub active_cells: usize,
    pub dofs: usize,
    pub l2_error: f64,
    /// `log(e_{l−1}/e_l) / log(h_{l−1}/h_l)`; empty on the first level.
    pub rate: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub seconds: f64,
}

/// Mesh sequence `coarse · 2^level` cells per axis on the box
/// `[lower, upper]`, for `level` in `0..levels`.
#[derive(Debug, Clone)]
pub struct RefinementSequence {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub coarse_cells: usize,
    pub levels: usize,
}

impl RefinementSequence {
    pub fn mesh(&self, level: usize) -> Result<CartesianMesh> {
        let n = self.coarse_cells << level;
        CartesianMesh::new(&self.lower, &self.upper, &vec![n; self.lower.len()])
    }
}

/// Runs every level, stopping at the first error. A level whose solver did
/// not converge is still recorded; callers inspect `converged`.
pub fn convergence_study(
    sequence: &RefinementSequence,
    geometry: &dyn LevelSet,
    operator: OperatorConfig,
    solver: &SolverConfig,
    exact: &Manufactured,
) -> Result<Vec<LevelResult>> {
    let mut out: Vec<LevelResult> = Vec::with_capacity(sequence.levels);
    for level in 0..sequence.levels {
        let mesh = sequence.mesh(level)?;
        let h = mesh.h_max();
        let cells_per_axis = mesh.cells_per_axis()[0];
        let run = solve_manufactured(mesh, geometry, operator, solver, exact)?;
        let rate = out
            .last()
            .map(|prev| (prev.l2_error / run.l2_error).ln() / (prev.h / h).ln());
        let result = LevelResult {
            level,
            cells_per_axis,
            h,
            active_cells: run.operator.classification().n_active(),
            dofs: run.operator.n_dofs(),
            l2_error: run.l2_error,
            rate,
            iterations: run.report.iterations,
            residual: run.report.residual,
            converged: run.report.converged,
            seconds: run.report.seconds,
        };
        info!(
            "level {level}: n={cells_per_axis} dofs={} err={:.3e} rate={:?} its={} ({:.1}s)",
            result.dofs, result.l2_error, result.rate, result.iterations, result.seconds
        );
        out.push(result);
    }
    Ok(out)
}

pub fn write_convergence_csv<W: Write>(writer: W, levels: &[LevelResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "level",
        "cells_per_axis",
        "h",
        "active_cells",
        "dofs",
        "l2_error",
        "rate",
        "iterations",
        "residual",
        "converged",
        "seconds",
    ])?;
    for r in levels {
        w.write_record([
            r.level.to_string(),
            r.cells_per_axis.to_string(),
            r.h.to_string(),
            r.active_cells.to_string(),
            r.dofs.to_string(),
            r.l2_error.to_string(),
            r.rate.map(|x| x.to_string()).unwrap_or_default(),
            r.iterations.to_string(),
            r.residual.to_string(),
            r.converged.to_string(),
            r.seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
