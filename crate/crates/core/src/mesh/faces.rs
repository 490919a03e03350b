use super::{CartesianMesh, CellClassification};
use crate::geometry::Point;
use crate::tensor_basis::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Shared with the active cell `neighbor`, which lies on side 0 of it.
    Interior { neighbor: usize },
    /// Part of the surrogate boundary.
    Surrogate,
}

/// A face seen from its owner cell.
///
/// Interior faces are owned by the lower cell (`side == 1`); surrogate faces
/// by their only active cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceRecord {
    pub kind: FaceKind,
    pub owner: usize,
    pub axis: usize,
    pub side: usize,
}

impl FaceRecord {
    pub fn is_surrogate(&self) -> bool {
        self.kind == FaceKind::Surrogate
    }

    /// Outward normal of the owner cell.
    pub fn normal(&self) -> Point {
        let mut n = [0.0; MAX_DIM];
        n[self.axis] = if self.side == 1 { 1.0 } else { -1.0 };
        n
    }
}

/// All interior and surrogate faces, grouped by owner in increasing cell
/// order; within a cell, by axis then side.
pub fn collect_faces(mesh: &CartesianMesh, class: &CellClassification) -> Vec<FaceRecord> {
    let mut faces = Vec::new();
    for &cell in class.active_cells() {
        for axis in 0..mesh.dim() {
            for side in 0..2 {
                let nb = mesh.neighbor(cell, axis, side).filter(|&n| class.is_active(n));
                let kind = match (nb, side) {
                    (None, _) => FaceKind::Surrogate,
                    (Some(n), 1) => FaceKind::Interior { neighbor: n },
                    (Some(_), _) => continue,
                };
                faces.push(FaceRecord {
                    kind,
                    owner: cell,
                    axis,
                    side,
                });
            }
        }
    }
    faces
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ball;
    use crate::mesh::{classify_cells, ActivationCriterion};
    use std::collections::HashSet;

    fn counts(faces: &[FaceRecord]) -> (usize, usize) {
        let s = faces.iter().filter(|f| f.is_surrogate()).count();
        (faces.len() - s, s)
    }

    #[test]
    fn single_cell_has_four_surrogate_faces() {
        let mesh = CartesianMesh::new(&[-1.5, -1.5], &[1.5, 1.5], &[3, 3]).unwrap();
        let ball = Ball::new(&[0.0, 0.0], 1.2).unwrap();
        let c = classify_cells(&mesh, &ball, ActivationCriterion::StrictInterior).unwrap();
        let faces = collect_faces(&mesh, &c);
        assert_eq!(counts(&faces), (0, 4));
        let normals: Vec<Point> = faces.iter().map(|f| f.normal()).collect();
        assert!(normals.contains(&[-1.0, 0.0, 0.0]));
        assert!(normals.contains(&[1.0, 0.0, 0.0]));
        assert!(normals.contains(&[0.0, -1.0, 0.0]));
        assert!(normals.contains(&[0.0, 1.0, 0.0]));
    }

    #[test]
    fn two_by_one_block() {
        let mesh = CartesianMesh::new(&[0.0, 0.0], &[4.0, 4.0], &[4, 4]).unwrap();
        let mut flags = vec![false; 16];
        flags[5] = true;
        flags[6] = true;
        let c = CellClassification::from_flags(flags).unwrap();
        let faces = collect_faces(&mesh, &c);
        assert_eq!(counts(&faces), (1, 6));
        let interior = faces.iter().find(|f| !f.is_surrogate()).unwrap();
        assert_eq!(interior.owner, 5);
        assert_eq!(interior.kind, FaceKind::Interior { neighbor: 6 });
        assert_eq!((interior.axis, interior.side), (0, 1));
    }

    /// Brute-force oracle: scan every geometric face of the grid once.
    fn brute_force(mesh: &CartesianMesh, c: &CellClassification) -> (usize, usize) {
        let (mut interior, mut surrogate) = (0, 0);
        let mut seen = HashSet::new();
        for cell in 0..mesh.n_cells() {
            let m = mesh.cell_multi(cell);
            for axis in 0..mesh.dim() {
                for side in 0..2 {
                    // key: the lower vertex multi-index of the face plus its axis
                    let mut key = m;
                    key[axis] += side;
                    if !seen.insert((key, axis)) {
                        continue;
                    }
                    let a = c.is_active(cell);
                    let b = mesh.neighbor(cell, axis, side).is_some_and(|n| c.is_active(n));
                    match (a, b) {
                        (true, true) => interior += 1,
                        (true, false) | (false, true) => surrogate += 1,
                        _ => {}
                    }
                }
            }
        }
        (interior, surrogate)
    }

    #[test]
    fn ball_faces_match_brute_force_scan() {
        for (dim, n, r) in [(3, 5, 2.0), (3, 5, 2.6), (2, 9, 3.7), (3, 7, 3.1)] {
            let lo = vec![-3.0; dim];
            let hi = vec![3.0; dim];
            let mesh = CartesianMesh::new(&lo, &hi, &vec![n; dim]).unwrap();
            let ball = Ball::new(&vec![0.1; dim], r).unwrap();
            let c = classify_cells(&mesh, &ball, ActivationCriterion::StrictInterior).unwrap();
            let faces = collect_faces(&mesh, &c);
            assert_eq!(counts(&faces), brute_force(&mesh, &c));
            let unique: HashSet<_> = faces.iter().map(|f| (f.owner, f.axis, f.side)).collect();
            assert_eq!(unique.len(), faces.len());
        }
    }
}
