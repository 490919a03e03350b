use serde::{Deserialize, Serialize};

use super::{CartesianMesh, CellClassification};
use crate::error::{Result, SbmError};
use crate::tensor_basis::{CellTensor, LagrangeBasis1D, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    /// Continuous Lagrange elements.
    #[default]
    Cg,
    /// Discontinuous elements coupled by interior penalty.
    Dg,
}

impl std::fmt::Display for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Discretization::Cg => "cg",
            Discretization::Dg => "dg",
        })
    }
}

/// Map from (active cell, local lexicographic index) to global DoF.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    discretization: Discretization,
    degree: usize,
    dim: usize,
    n_dofs: usize,
    dofs_per_cell: usize,
    /// Indexed by active slot, then local index.
    map: Vec<usize>,
    /// Active slot of each background cell.
    slots: Vec<Option<usize>>,
}

pub fn build_dof_layout(
    mesh: &CartesianMesh,
    class: &CellClassification,
    degree: usize,
    discretization: Discretization,
) -> DofLayout {
    let dim = mesh.dim();
    let n = degree + 1;
    let dofs_per_cell = n.pow(dim as u32);
    let active = class.active_cells();
    let (map, n_dofs) = match discretization {
        Discretization::Dg => (
            (0..active.len() * dofs_per_cell).collect(),
            active.len() * dofs_per_cell,
        ),
        Discretization::Cg => {
            // node grid of the whole mesh: cells[l]*p + 1 nodes per axis
            let mut grid = [1usize; MAX_DIM];
            for l in 0..dim {
                grid[l] = mesh.cells_per_axis()[l] * degree + 1;
            }
            let node_id = |cell: usize, local: usize| {
                let c = mesh.cell_multi(cell);
                let mut rest = local;
                let mut id = 0;
                let mut stride = 1;
                for l in 0..dim {
                    id += (c[l] * degree + rest % n) * stride;
                    rest /= n;
                    stride *= grid[l];
                }
                id
            };
            let total: usize = grid[..dim].iter().product();
            let mut number = vec![usize::MAX; total];
            for &cell in active {
                for local in 0..dofs_per_cell {
                    number[node_id(cell, local)] = 0;
                }
            }
            let mut count = 0;
            for v in number.iter_mut().filter(|v| **v == 0) {
                *v = count;
                count += 1;
            }
            let map = active
                .iter()
                .flat_map(|&cell| (0..dofs_per_cell).map(move |local| (cell, local)))
                .map(|(cell, local)| number[node_id(cell, local)])
                .collect();
            (map, count)
        }
    };
    DofLayout {
        discretization,
        degree,
        dim,
        n_dofs,
        dofs_per_cell,
        map,
        slots: (0..class.n_cells()).map(|c| class.active_slot(c)).collect(),
    }
}

impl DofLayout {
    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.dofs_per_cell
    }

    /// Global indices of an active cell's DoFs in local lexicographic order.
    ///
    /// Panics if `cell` is inactive.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let k = self.slots[cell].expect("cell is not active");
        &self.map[k * self.dofs_per_cell..(k + 1) * self.dofs_per_cell]
    }

    pub(crate) fn gather_into(&self, vector: &[f64], cell: usize, out: &mut [f64]) {
        for (o, &g) in out.iter_mut().zip(self.cell_dofs(cell)) {
            *o = vector[g];
        }
    }

    pub(crate) fn scatter_add_from(&self, local: &[f64], cell: usize, vector: &mut [f64]) {
        for (&v, &g) in local.iter().zip(self.cell_dofs(cell)) {
            vector[g] += v;
        }
    }

    pub fn gather(&self, vector: &[f64], cell: usize) -> Result<CellTensor> {
        if vector.len() != self.n_dofs {
            return Err(SbmError::size(self.n_dofs, vector.len()));
        }
        let mut out = CellTensor::zeros(self.degree, self.dim);
        self.gather_into(vector, cell, out.as_mut_slice());
        Ok(out)
    }

    pub fn scatter_add(&self, local: &CellTensor, cell: usize, vector: &mut [f64]) -> Result<()> {
        if vector.len() != self.n_dofs {
            return Err(SbmError::size(self.n_dofs, vector.len()));
        }
        self.scatter_add_from(local.as_slice(), cell, vector);
        Ok(())
    }

    /// Nodal interpolant of `f` (cells write shared nodes with equal values).
    pub fn interpolate(
        &self,
        mesh: &CartesianMesh,
        basis: &LagrangeBasis1D,
        f: impl Fn(&[f64]) -> f64,
    ) -> Vec<f64> {
        let dim = self.dim;
        let mut out = vec![0.0; self.n_dofs];
        for (cell, slot) in self.slots.iter().enumerate() {
            if slot.is_none() {
                continue;
            }
            let local = CellTensor::interpolate(basis, dim, |r| f(&mesh.to_physical(cell, r)[..dim]));
            for (&v, &g) in local.as_slice().iter().zip(self.cell_dofs(cell)) {
                out[g] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::HashSet;

    fn mesh4() -> CartesianMesh {
        CartesianMesh::new(&[0.0, 0.0], &[1.0, 1.0], &[4, 4]).unwrap()
    }

    #[test]
    fn dg_single_cell_and_cg_pair() {
        let mesh = mesh4();
        let mut flags = vec![false; 16];
        flags[5] = true;
        let c = CellClassification::from_flags(flags.clone()).unwrap();
        assert_eq!(build_dof_layout(&mesh, &c, 2, Discretization::Dg).n_dofs(), 9);
        flags[6] = true;
        let c = CellClassification::from_flags(flags).unwrap();
        let l = build_dof_layout(&mesh, &c, 1, Discretization::Cg);
        assert_eq!(l.n_dofs(), 6);
        // shared edge: right nodes of cell 5 are left nodes of cell 6
        let a = l.cell_dofs(5);
        let b = l.cell_dofs(6);
        assert_eq!((a[1], a[3]), (b[0], b[2]));
    }

    /// Oracle: count distinct physical node positions on an integer grid.
    fn node_set_size(mesh: &CartesianMesh, c: &CellClassification, p: usize) -> usize {
        let mut set = HashSet::new();
        for &cell in c.active_cells() {
            let m = mesh.cell_multi(cell);
            for i in 0..=p {
                for j in 0..=p {
                    set.insert((m[0] * p + i, m[1] * p + j));
                }
            }
        }
        set.len()
    }

    #[test]
    fn cg_count_matches_node_set_on_random_classifications() {
        let mesh = mesh4();
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..50 {
            let flags: Vec<bool> = (0..16).map(|_| rng.gen_bool(0.5)).collect();
            let Ok(c) = CellClassification::from_flags(flags) else {
                continue;
            };
            let l = build_dof_layout(&mesh, &c, 2, Discretization::Cg);
            assert_eq!(l.n_dofs(), node_set_size(&mesh, &c, 2));
            // every DoF referenced
            let used: HashSet<usize> = c
                .active_cells()
                .iter()
                .flat_map(|&cell| l.cell_dofs(cell).to_vec())
                .collect();
            assert_eq!(used.len(), l.n_dofs());
        }
    }

    #[test]
    fn cg_shared_faces_agree_in_3d() {
        let mesh = CartesianMesh::new(&[0.0; 3], &[1.0; 3], &[2, 2, 2]).unwrap();
        let c = CellClassification::from_flags(vec![true; 8]).unwrap();
        let p = 2;
        let l = build_dof_layout(&mesh, &c, p, Discretization::Cg);
        assert_eq!(l.n_dofs(), 125);
        let n = p + 1;
        for cell in 0..8 {
            for axis in 0..3 {
                let Some(nb) = mesh.neighbor(cell, axis, 1) else {
                    continue;
                };
                let (a, b) = (l.cell_dofs(cell), l.cell_dofs(nb));
                for local in 0..n * n * n {
                    let mut idx = [local % n, (local / n) % n, local / (n * n)];
                    if idx[axis] != p {
                        continue;
                    }
                    let la = local;
                    idx[axis] = 0;
                    let lb = idx[0] + n * idx[1] + n * n * idx[2];
                    assert_eq!(a[la], b[lb]);
                }
            }
        }
    }

    #[test]
    fn scatter_counts_sharing_cells() {
        let mesh = mesh4();
        let c = CellClassification::from_flags(vec![true; 16]).unwrap();
        let l = build_dof_layout(&mesh, &c, 1, Discretization::Cg);
        let mut v = vec![0.0; l.n_dofs()];
        let ones = CellTensor::new(1, 2, vec![1.0; 4]).unwrap();
        for &cell in c.active_cells() {
            l.scatter_add(&ones, cell, &mut v).unwrap();
        }
        // interior vertex shared by four cells, corner by one
        assert_eq!(v[0], 1.0);
        assert_eq!(v[6], 4.0);
        assert_eq!(v[1], 2.0);
        assert!(l.gather(&v[1..], 0).is_err());
    }

    proptest! {
        #[test]
        fn prop_gather_scatter_roundtrip(seed in any::<u64>(), dg in any::<bool>()) {
            let mesh = mesh4();
            let mut rng = StdRng::seed_from_u64(seed);
            let mut flags: Vec<bool> = (0..16).map(|_| rng.gen_bool(0.6)).collect();
            flags[0] = true;
            let c = CellClassification::from_flags(flags).unwrap();
            let disc = if dg { Discretization::Dg } else { Discretization::Cg };
            let l = build_dof_layout(&mesh, &c, 2, disc);
            let v: Vec<f64> = (0..l.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut multiplicity = vec![0.0; l.n_dofs()];
            let mut acc = vec![0.0; l.n_dofs()];
            for &cell in c.active_cells() {
                let t = l.gather(&v, cell).unwrap();
                for (&x, &g) in t.as_slice().iter().zip(l.cell_dofs(cell)) {
                    prop_assert_eq!(x, v[g]);
                    multiplicity[g] += 1.0;
                }
                l.scatter_add(&t, cell, &mut acc).unwrap();
            }
            for g in 0..l.n_dofs() {
                prop_assert!((acc[g] - multiplicity[g] * v[g]).abs() < 1e-14);
                if dg {
                    prop_assert_eq!(multiplicity[g], 1.0);
                }
            }
        }
    }
}
