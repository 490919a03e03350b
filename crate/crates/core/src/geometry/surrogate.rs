//! Per-quadrature-point data of the surrogate boundary, computed once.

use rayon::prelude::*;

use super::levelset::{norm, LevelSet, Point};
use crate::error::{Result, SbmError};
use crate::mesh::{CartesianMesh, FaceRecord};
use crate::tensor_basis::{Quadrature1D, MAX_DIM};

/// Structure-of-arrays storage for all surrogate faces. Every vector field
/// holds `dim` reals per point, so the memory footprint is exactly
/// `4·dim + 2` reals per quadrature point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFaceData {
    dim: usize,
    points_per_face: usize,
    /// Index into the face list for each stored face.
    pub faces: Vec<usize>,
    /// Surrogate-boundary quadrature points `x̃`.
    pub x_tilde: Vec<f64>,
    /// Outward surrogate normals `ñ`.
    pub normals: Vec<f64>,
    /// Shifts `d = x − x̃`.
    pub shifts: Vec<f64>,
    /// Coordinates of `x` in the owner cell's reference frame.
    pub reference: Vec<f64>,
    /// Boundary data `g(x)`.
    pub boundary_values: Vec<f64>,
    /// Quadrature weight times face measure.
    pub weights: Vec<f64>,
}

/// Borrowed view of one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct SurrogatePoint<'a> {
    pub x_tilde: &'a [f64],
    pub normal: &'a [f64],
    pub shift: &'a [f64],
    pub reference: &'a [f64],
    pub g: f64,
    pub weight: f64,
}

impl SurrogateFaceData {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn points_per_face(&self) -> usize {
        self.points_per_face
    }

    pub fn n_points(&self) -> usize {
        self.boundary_values.len()
    }

    /// Point `q` of stored face `k` (not the index into the face list).
    pub fn point(&self, k: usize, q: usize) -> SurrogatePoint<'_> {
        let i = k * self.points_per_face + q;
        let d = self.dim;
        SurrogatePoint {
            x_tilde: &self.x_tilde[i * d..(i + 1) * d],
            normal: &self.normals[i * d..(i + 1) * d],
            shift: &self.shifts[i * d..(i + 1) * d],
            reference: &self.reference[i * d..(i + 1) * d],
            g: self.boundary_values[i],
            weight: self.weights[i],
        }
    }

    /// Number of stored reals.
    pub fn stored_reals(&self) -> usize {
        self.x_tilde.len()
            + self.normals.len()
            + self.shifts.len()
            + self.reference.len()
            + self.boundary_values.len()
            + self.weights.len()
    }

    /// Largest distance of a projected point's reference coordinates from
    /// `[0,1]`, i.e. how far the boundary kernel extrapolates.
    pub fn extrapolation_extent(&self) -> f64 {
        self.reference
            .iter()
            .map(|&r| (-r).max(r - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Resamples the boundary data at the stored projected points.
    pub fn set_boundary_values(&mut self, mesh: &CartesianMesh, faces: &[FaceRecord], g: impl Fn(&[f64]) -> f64) {
        let d = self.dim;
        for (k, &fi) in self.faces.iter().enumerate() {
            for q in 0..self.points_per_face {
                let i = k * self.points_per_face + q;
                let x = mesh.to_physical(faces[fi].owner, &self.reference[i * d..(i + 1) * d]);
                self.boundary_values[i] = g(&x[..d]);
            }
        }
    }
}

/// Tensor face quadrature points of face (`axis`, `side`) in reference
/// coordinates, lexicographic over the remaining axes.
pub fn face_reference_points(quad: &Quadrature1D, dim: usize, axis: usize, side: usize) -> Vec<(Point, f64)> {
    let nq = quad.len();
    let count = nq.pow(dim as u32 - 1);
    (0..count)
        .map(|lin| {
            let mut r = [0.0; MAX_DIM];
            let mut w = 1.0;
            let mut rest = lin;
            for (l, rl) in r.iter_mut().enumerate().take(dim) {
                if l == axis {
                    *rl = side as f64;
                } else {
                    *rl = quad.nodes()[rest % nq];
                    w *= quad.weights()[rest % nq];
                    rest /= nq;
                }
            }
            (r, w)
        })
        .collect()
}

struct FacePoints {
    x_tilde: Vec<f64>,
    normals: Vec<f64>,
    shifts: Vec<f64>,
    reference: Vec<f64>,
    g: Vec<f64>,
    weights: Vec<f64>,
}

fn face_points(
    mesh: &CartesianMesh,
    face_index: usize,
    face: &FaceRecord,
    levelset: &(impl LevelSet + ?Sized),
    quad: &Quadrature1D,
    g: &(impl Fn(&[f64]) -> f64 + Sync),
) -> Result<FacePoints> {
    let dim = mesh.dim();
    let limit = 2.0 * mesh.h_max() * (dim as f64).sqrt();
    let pts = face_reference_points(quad, dim, face.axis, face.side);
    let mut out = FacePoints {
        x_tilde: Vec::with_capacity(pts.len() * dim),
        normals: Vec::with_capacity(pts.len() * dim),
        shifts: Vec::with_capacity(pts.len() * dim),
        reference: Vec::with_capacity(pts.len() * dim),
        g: Vec::with_capacity(pts.len()),
        weights: Vec::with_capacity(pts.len()),
    };
    let normal = face.normal();
    let measure = mesh.face_measure(face.axis);
    for (q, (r_tilde, w)) in pts.iter().enumerate() {
        let xt = mesh.to_physical(face.owner, r_tilde);
        let x = levelset.project(&xt[..dim]).map_err(|e| match e {
            SbmError::ProjectionFailed { point, residual, .. } => SbmError::ProjectionFailed {
                face: Some(face_index),
                point,
                residual,
            },
            other => other,
        })?;
        let mut shift = [0.0; MAX_DIM];
        for l in 0..dim {
            shift[l] = x[l] - xt[l];
        }
        let len = norm(&shift);
        if len > limit {
            return Err(SbmError::ShiftTooLarge {
                face: face_index,
                point: q,
                shift: len,
                limit,
            });
        }
        let r = mesh.to_reference(face.owner, &x[..dim]);
        out.x_tilde.extend_from_slice(&xt[..dim]);
        out.normals.extend_from_slice(&normal[..dim]);
        out.shifts.extend_from_slice(&shift[..dim]);
        out.reference.extend_from_slice(&r[..dim]);
        out.g.push(g(&x[..dim]));
        out.weights.push(w * measure);
    }
    Ok(out)
}

/// Projects every surrogate-face quadrature point onto the true boundary
/// and stores the data needed by the boundary kernel. Faces are processed
/// in parallel; output order follows the face list.
pub fn precompute_surrogate_data(
    mesh: &CartesianMesh,
    faces: &[FaceRecord],
    levelset: &(impl LevelSet + ?Sized),
    quad: &Quadrature1D,
    g: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<SurrogateFaceData> {
    let dim = mesh.dim();
    let surrogate: Vec<usize> = (0..faces.len()).filter(|&i| faces[i].is_surrogate()).collect();
    let per_face: Vec<FacePoints> = surrogate
        .par_iter()
        .map(|&i| face_points(mesh, i, &faces[i], levelset, quad, &g))
        .collect::<Result<_>>()?;
    let mut data = SurrogateFaceData {
        dim,
        points_per_face: quad.len().pow(dim as u32 - 1),
        faces: surrogate,
        x_tilde: Vec::new(),
        normals: Vec::new(),
        shifts: Vec::new(),
        reference: Vec::new(),
        boundary_values: Vec::new(),
        weights: Vec::new(),
    };
    for fp in per_face {
        data.x_tilde.extend(fp.x_tilde);
        data.normals.extend(fp.normals);
        data.shifts.extend(fp.shifts);
        data.reference.extend(fp.reference);
        data.boundary_values.extend(fp.g);
        data.weights.extend(fp.weights);
    }
    Ok(data)
}
