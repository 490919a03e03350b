use std::io::Write;
use std::ops::Range;

use super::{CellClassification, FaceRecord};
use crate::error::Result;

pub const BASE_CELL_WEIGHT: u64 = 10;

/// Extra weight per owned surrogate face.
fn surrogate_weight(dim: usize) -> u64 {
    if dim == 2 {
        20
    } else {
        40
    }
}

/// Work estimate per active cell (in active-cell order).
pub fn cell_weights(class: &CellClassification, faces: &[FaceRecord], dim: usize) -> Vec<u64> {
    let mut w = vec![BASE_CELL_WEIGHT; class.n_active()];
    for f in faces.iter().filter(|f| f.is_surrogate()) {
        if let Some(k) = class.active_slot(f.owner) {
            w[k] += surrogate_weight(dim);
        }
    }
    w
}

/// Splits a weight sequence into `n_parts` contiguous runs. Entry `i` goes
/// to the part whose equal-weight interval contains the midpoint of its own
/// weight interval, so no part exceeds the average by more than one entry.
pub fn partition_weights(weights: &[u64], n_parts: usize) -> Vec<usize> {
    let n = n_parts.max(1) as u128;
    let total: u128 = weights.iter().map(|&w| w as u128).sum();
    let mut before = 0u128;
    weights
        .iter()
        .map(|&w| {
            let part = if total == 0 {
                0
            } else {
                ((2 * before + w as u128) * n / (2 * total)).min(n - 1)
            };
            before += w as u128;
            part as usize
        })
        .collect()
}

/// Contiguous ranges of active slots, one per part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub ranges: Vec<Range<usize>>,
    pub weights: Vec<u64>,
    pub cell_weights: Vec<u64>,
}

impl Partition {
    pub fn n_parts(&self) -> usize {
        self.ranges.len()
    }

    pub fn max_weight(&self) -> u64 {
        self.weights.iter().copied().max().unwrap_or(0)
    }

    pub fn average_weight(&self) -> f64 {
        self.weights.iter().sum::<u64>() as f64 / self.n_parts() as f64
    }

    pub fn imbalance(&self) -> f64 {
        self.max_weight() as f64 / self.average_weight()
    }

    /// Part of every background cell; `None` for inactive cells.
    pub fn part_of_cells(&self, class: &CellClassification) -> Vec<Option<usize>> {
        let mut out = vec![None; class.n_cells()];
        for (part, r) in self.ranges.iter().enumerate() {
            for &cell in &class.active_cells()[r.clone()] {
                out[cell] = Some(part);
            }
        }
        out
    }
}

pub fn weighted_partition(
    class: &CellClassification,
    faces: &[FaceRecord],
    dim: usize,
    n_parts: usize,
) -> Partition {
    let n_parts = n_parts.max(1);
    let cw = cell_weights(class, faces, dim);
    let assignment = partition_weights(&cw, n_parts);
    let mut ranges = vec![0..0; n_parts];
    let mut weights = vec![0; n_parts];
    let mut start = 0;
    for (part, range) in ranges.iter_mut().enumerate() {
        let end = start + assignment[start..].iter().take_while(|&&p| p == part).count();
        *range = start..end;
        weights[part] = cw[start..end].iter().sum();
        start = end;
    }
    Partition {
        ranges,
        weights,
        cell_weights: cw,
    }
}

/// CSV with one row per part.
pub fn write_partition_csv<W: Write>(writer: W, partition: &Partition) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["part", "cells", "weight", "first_slot", "end_slot", "imbalance"])?;
    let imbalance = partition.imbalance();
    for (part, (r, weight)) in partition.ranges.iter().zip(&partition.weights).enumerate() {
        w.write_record([
            part.to_string(),
            r.len().to_string(),
            weight.to_string(),
            r.start.to_string(),
            r.end.to_string(),
            imbalance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
