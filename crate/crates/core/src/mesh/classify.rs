use serde::{Deserialize, Serialize};

use super::CartesianMesh;
use crate::error::{Result, SbmError};
use crate::geometry::LevelSet;
use crate::tensor_basis::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationCriterion {
    /// `φ ≤ 0` at every vertex and at the center.
    #[default]
    StrictInterior,
    /// `φ ≤ 0` at the center only.
    CenterInside,
}

/// Active/inactive flag per background cell plus the compact active list.
#[derive(Debug, Clone, PartialEq)]
pub struct CellClassification {
    active: Vec<bool>,
    active_cells: Vec<usize>,
    /// Position of each cell in `active_cells`.
    slot: Vec<Option<usize>>,
}

impl CellClassification {
    pub fn from_flags(active: Vec<bool>) -> Result<Self> {
        let active_cells: Vec<usize> = (0..active.len()).filter(|&c| active[c]).collect();
        if active_cells.is_empty() {
            return Err(SbmError::NoActiveCells);
        }
        let mut slot = vec![None; active.len()];
        for (k, &c) in active_cells.iter().enumerate() {
            slot[c] = Some(k);
        }
        Ok(Self {
            active,
            active_cells,
            slot,
        })
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.active[cell]
    }

    pub fn flags(&self) -> &[bool] {
        &self.active
    }

    /// Active cells in increasing lexicographic order.
    pub fn active_cells(&self) -> &[usize] {
        &self.active_cells
    }

    pub fn n_active(&self) -> usize {
        self.active_cells.len()
    }

    pub fn n_cells(&self) -> usize {
        self.active.len()
    }

    pub fn active_slot(&self, cell: usize) -> Option<usize> {
        self.slot[cell]
    }
}

pub fn classify_cells(
    mesh: &CartesianMesh,
    levelset: &(impl LevelSet + ?Sized),
    criterion: ActivationCriterion,
) -> Result<CellClassification> {
    let dim = mesh.dim();
    if levelset.dim() != dim {
        return Err(SbmError::DimensionMismatch(format!(
            "level set is {}-dimensional, mesh {dim}-dimensional",
            levelset.dim()
        )));
    }
    let inside = |cell: usize, r: &[f64]| levelset.phi(&mesh.to_physical(cell, r)[..dim]) <= 0.0;
    let flags: Vec<bool> = (0..mesh.n_cells())
        .map(|cell| {
            if !inside(cell, &[0.5; MAX_DIM]) {
                return false;
            }
            match criterion {
                ActivationCriterion::CenterInside => true,
                ActivationCriterion::StrictInterior => (0..1usize << dim).all(|v| {
                    let mut r = [0.0; MAX_DIM];
                    for (l, rl) in r.iter_mut().enumerate().take(dim) {
                        *rl = ((v >> l) & 1) as f64;
                    }
                    inside(cell, &r)
                }),
            }
        })
        .collect();
    let class = CellClassification::from_flags(flags)?;
    let touches_edge = class.active_cells().iter().any(|&c| {
        (0..dim).any(|a| mesh.neighbor(c, a, 0).is_none() || mesh.neighbor(c, a, 1).is_none())
    });
    if touches_edge {
        log::warn!("active cells reach the background mesh boundary; the domain may be clipped");
    }
    Ok(class)
}
