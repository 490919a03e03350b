use std::io::Write;
use std::ops::AddAssign;

use crate::error::Result;
use crate::tensor_basis::PointEvalOps;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelCounter {
    pub count: u64,
    pub ops: u64,
}

impl KernelCounter {
    pub fn record(&mut self, ops: u64) {
        self.count += 1;
        self.ops += ops;
    }

    pub fn per_entity(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.ops as f64 / self.count as f64
        }
    }
}

impl AddAssign for KernelCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.count += rhs.count;
        self.ops += rhs.ops;
    }
}

/// Phase breakdown of one surrogate-face kernel call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SurrogateOps {
    /// Sum-factorized face traces.
    pub trace: u64,
    /// Extension `E u_h` at all face points (point evaluations or Taylor sums).
    pub extension: u64,
    /// Pointwise integrand assembly.
    pub pointwise: u64,
    /// Transposed face sweep.
    pub integrate: u64,
    /// Number of point evaluations performed.
    pub point_evaluations: u64,
    /// Breakdown of the point evaluations inside `extension`.
    pub point_eval: PointEvalOps,
}

impl SurrogateOps {
    pub fn total(&self) -> u64 {
        self.trace + self.extension + self.pointwise + self.integrate
    }
}

impl AddAssign for SurrogateOps {
    fn add_assign(&mut self, rhs: Self) {
        self.trace += rhs.trace;
        self.extension += rhs.extension;
        self.pointwise += rhs.pointwise;
        self.integrate += rhs.integrate;
        self.point_evaluations += rhs.point_evaluations;
        self.point_eval.basis += rhs.point_eval.basis;
        self.point_eval.coefficient += rhs.point_eval.coefficient;
    }
}

/// Deterministic multiply-add counts of one operator application.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub cells: KernelCounter,
    pub interior_faces: KernelCounter,
    pub surrogate_faces: KernelCounter,
    pub surrogate_breakdown: SurrogateOps,
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.cells += rhs.cells;
        self.interior_faces += rhs.interior_faces;
        self.surrogate_faces += rhs.surrogate_faces;
        self.surrogate_breakdown += rhs.surrogate_breakdown;
    }
}

impl OpCounters {
    pub fn total_ops(&self) -> u64 {
        self.cells.ops + self.interior_faces.ops + self.surrogate_faces.ops
    }

    /// CSV rows `entity_kind,count,ops_total,ops_per_entity`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["entity_kind", "count", "ops_total", "ops_per_entity"])?;
        let b = &self.surrogate_breakdown;
        let point = KernelCounter {
            count: b.point_evaluations,
            ops: b.point_eval.total(),
        };
        for (kind, c) in [
            ("cell", self.cells),
            ("interior_face", self.interior_faces),
            ("surrogate_face", self.surrogate_faces),
            ("point_evaluation", point),
        ] {
            w.write_record([
                kind.to_string(),
                c.count.to_string(),
                c.ops.to_string(),
                c.per_entity().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
