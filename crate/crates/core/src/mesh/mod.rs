//! Uniform Cartesian background mesh, cell activation, face lists, DoF
//! numbering and partitioning.

mod classify;
mod dofs;
mod faces;
mod partition;

pub use classify::{classify_cells, ActivationCriterion, CellClassification};
pub use dofs::{build_dof_layout, Discretization, DofLayout};
pub use faces::{collect_faces, FaceKind, FaceRecord};
pub use partition::{
    cell_weights, partition_weights, weighted_partition, write_partition_csv, Partition,
    BASE_CELL_WEIGHT,
};

use crate::error::{Result, SbmError};
use crate::geometry::Point;
use crate::tensor_basis::MAX_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct CartesianMesh {
    dim: usize,
    origin: Point,
    h: Point,
    cells: [usize; MAX_DIM],
}

impl CartesianMesh {
    /// Box `[lower, upper]` split into `cells[l]` equal cells along axis `l`.
    pub fn new(lower: &[f64], upper: &[f64], cells: &[usize]) -> Result<Self> {
        let dim = lower.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(SbmError::InvalidConfig(format!(
                "mesh dimension must be 2 or 3, got {dim}"
            )));
        }
        if upper.len() != dim || cells.len() != dim {
            return Err(SbmError::DimensionMismatch(
                "mesh bounds and cell counts disagree in dimension".into(),
            ));
        }
        let mut origin = [0.0; MAX_DIM];
        let mut h = [1.0; MAX_DIM];
        let mut n = [1; MAX_DIM];
        for l in 0..dim {
            if cells[l] == 0 || !(upper[l] > lower[l]) {
                return Err(SbmError::InvalidConfig(format!(
                    "empty mesh along axis {l}"
                )));
            }
            origin[l] = lower[l];
            h[l] = (upper[l] - lower[l]) / cells[l] as f64;
            n[l] = cells[l];
        }
        Ok(Self {
            dim,
            origin,
            h,
            cells: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn h_max(&self) -> f64 {
        self.h().iter().cloned().fold(0.0, f64::max)
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn n_cells(&self) -> usize {
        self.cells_per_axis().iter().product()
    }

    pub fn cell_index(&self, multi: &[usize]) -> usize {
        let mut lin = 0;
        for l in (0..self.dim).rev() {
            lin = lin * self.cells[l] + multi[l];
        }
        lin
    }

    pub fn cell_multi(&self, mut lin: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for l in 0..self.dim {
            m[l] = lin % self.cells[l];
            lin /= self.cells[l];
        }
        m
    }

    /// Neighbor across face (`axis`, `side`), or `None` at the mesh edge.
    pub fn neighbor(&self, cell: usize, axis: usize, side: usize) -> Option<usize> {
        let mut m = self.cell_multi(cell);
        if side == 0 {
            m[axis] = m[axis].checked_sub(1)?;
        } else {
            m[axis] += 1;
            if m[axis] >= self.cells[axis] {
                return None;
            }
        }
        Some(self.cell_index(&m))
    }

    pub fn cell_lower(&self, cell: usize) -> Point {
        let m = self.cell_multi(cell);
        let mut x = [0.0; MAX_DIM];
        for l in 0..self.dim {
            x[l] = self.origin[l] + m[l] as f64 * self.h[l];
        }
        x
    }

    /// Affine map from the reference cell `[0,1]^d` to `cell`.
    pub fn to_physical(&self, cell: usize, r: &[f64]) -> Point {
        let lo = self.cell_lower(cell);
        let mut x = [0.0; MAX_DIM];
        for l in 0..self.dim {
            x[l] = lo[l] + r[l] * self.h[l];
        }
        x
    }

    pub fn to_reference(&self, cell: usize, x: &[f64]) -> Point {
        let lo = self.cell_lower(cell);
        let mut r = [0.0; MAX_DIM];
        for l in 0..self.dim {
            r[l] = (x[l] - lo[l]) / self.h[l];
        }
        r
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().iter().product()
    }

    /// Measure of a face normal to `axis`.
    pub fn face_measure(&self, axis: usize) -> f64 {
        (0..self.dim).filter(|&l| l != axis).map(|l| self.h[l]).product()
    }
}
