//! JSON run configuration. Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbmError};
use crate::geometry::{Ball, LevelSet, UnionOfBalls};
use crate::mesh::{ActivationCriterion, Discretization};
use crate::operator::{ExtensionMode, OperatorConfig};
use crate::solver::SolverConfig;

use super::convergence::RefinementSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Ball,
    UnionOfBalls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySpec {
    pub shape: Shape,
    /// Defaults to the origin.
    pub centers: Option<Vec<Vec<f64>>>,
    pub radii: Vec<f64>,
    /// Minimum surface gap for unions of balls.
    pub min_gap: f64,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self {
            shape: Shape::Ball,
            centers: None,
            radii: vec![1.0],
            min_gap: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSpec {
    /// Defaults to `[−1.3, …]`.
    pub lower: Option<Vec<f64>>,
    /// Defaults to `[1.3, …]`.
    pub upper: Option<Vec<f64>>,
    /// Cells per axis on the coarsest level.
    pub cells: usize,
    /// Number of meshes in the convergence study; `solve`, `bench` and
    /// `partition` use the finest one.
    pub levels: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            lower: None,
            upper: None,
            cells: 8,
            levels: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSpec {
    pub p_min: usize,
    pub p_max: usize,
    pub repetitions: usize,
    /// Applications per throughput measurement.
    pub n_apply: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            p_min: 1,
            p_max: 8,
            repetitions: 30,
            n_apply: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Convergence,
    Solve,
    Bench,
    Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Must agree with the subcommand when present.
    pub command: Option<Command>,
    pub d: usize,
    pub p: usize,
    pub discretization: Discretization,
    pub extension: ExtensionMode,
    pub criterion: ActivationCriterion,
    pub beta: f64,
    pub gamma_f: f64,
    pub threads: usize,
    pub geometry: GeometrySpec,
    pub mesh: MeshSpec,
    pub solver: SolverConfig,
    /// Accepted band for the final observed rate; defaults to
    /// `[p + 0.7, p + 1.3]`.
    pub rate_band: Option<[f64; 2]>,
    pub bench: BenchSpec,
    pub parts: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let op = OperatorConfig::default();
        Self {
            command: None,
            d: 2,
            p: op.degree,
            discretization: op.discretization,
            extension: op.extension,
            criterion: op.criterion,
            beta: op.beta,
            gamma_f: op.gamma_f,
            threads: op.threads,
            geometry: GeometrySpec::default(),
            mesh: MeshSpec::default(),
            solver: SolverConfig::default(),
            rate_band: None,
            bench: BenchSpec::default(),
            parts: 4,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> SbmError {
    SbmError::InvalidConfig(msg.into())
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn operator(&self) -> OperatorConfig {
        OperatorConfig {
            degree: self.p,
            discretization: self.discretization,
            extension: self.extension,
            criterion: self.criterion,
            beta: self.beta,
            gamma_f: self.gamma_f,
            threads: self.threads,
        }
    }

    pub fn rate_band(&self) -> [f64; 2] {
        self.rate_band
            .unwrap_or([self.p as f64 + 0.7, self.p as f64 + 1.3])
    }

    pub fn sequence(&self) -> RefinementSequence {
        let d = self.d;
        RefinementSequence {
            lower: self.mesh.lower.clone().unwrap_or_else(|| vec![-1.3; d]),
            upper: self.mesh.upper.clone().unwrap_or_else(|| vec![1.3; d]),
            coarse_cells: self.mesh.cells,
            levels: self.mesh.levels,
        }
    }

    fn centers(&self) -> Vec<Vec<f64>> {
        self.geometry
            .centers
            .clone()
            .unwrap_or_else(|| vec![vec![0.0; self.d]; self.geometry.radii.len()])
    }

    pub fn levelset(&self) -> Result<Box<dyn LevelSet>> {
        let centers = self.centers();
        let radii = &self.geometry.radii;
        match self.geometry.shape {
            Shape::Ball => {
                if centers.len() != 1 || radii.len() != 1 {
                    return Err(invalid("shape `ball` takes exactly one center and one radius"));
                }
                Ok(Box::new(Ball::new(&centers[0], radii[0])?))
            }
            Shape::UnionOfBalls => {
                let balls = centers
                    .iter()
                    .zip(radii)
                    .map(|(c, &r)| Ball::new(c, r))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Box::new(UnionOfBalls::new(balls, self.geometry.min_gap)?))
            }
        }
    }

    /// Checks everything that can be checked without building a mesh.
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.d) {
            return Err(invalid(format!("d must be 2 or 3, got {}", self.d)));
        }
        self.operator().validate()?;
        if self.mesh.cells == 0 || self.mesh.levels == 0 {
            return Err(invalid("mesh.cells and mesh.levels must be positive"));
        }
        if self.mesh.levels > 12 {
            return Err(invalid("mesh.levels above 12 is not supported"));
        }
        let seq = self.sequence();
        if seq.lower.len() != self.d || seq.upper.len() != self.d {
            return Err(invalid("mesh.lower and mesh.upper need d entries"));
        }
        if seq.lower.iter().zip(&seq.upper).any(|(a, b)| !(a < b)) {
            return Err(invalid("mesh.lower must be below mesh.upper on every axis"));
        }
        let centers = self.centers();
        if centers.len() != self.geometry.radii.len() {
            return Err(invalid("geometry.centers and geometry.radii differ in length"));
        }
        if centers.iter().any(|c| c.len() != self.d) {
            return Err(invalid("every geometry center needs d coordinates"));
        }
        self.levelset()?;
        if !(self.solver.tol > 0.0) || self.solver.restart == 0 {
            return Err(invalid("solver.tol and solver.restart must be positive"));
        }
        let [lo, hi] = self.rate_band();
        if !(lo <= hi) {
            return Err(invalid("rate_band must be an interval [lo, hi]"));
        }
        let b = &self.bench;
        if b.p_min == 0 || b.p_min > b.p_max || b.p_max > 15 || b.n_apply == 0 {
            return Err(invalid("bench needs 1 ≤ p_min ≤ p_max ≤ 15 and n_apply ≥ 1"));
        }
        if self.parts == 0 {
            return Err(invalid("parts must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.rate_band(), [1.7, 2.3]);
        let seq = c.sequence();
        assert_eq!(seq.lower, vec![-1.3, -1.3]);
        assert_eq!((seq.coarse_cells, seq.levels), (8, 5));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let text = r#"{
            "command": "solve", "d": 3, "p": 2, "discretization": "dg",
            "geometry": {"shape": "union_of_balls", "centers": [[-0.5,0,0],[0.5,0,0]], "radii": [0.4,0.4]},
            "mesh": {"cells": 4, "levels": 2},
            "solver": {"method": "gmres", "tol": 1e-8}
        }"#;
        let c = RunConfig::from_json_str(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.command, Some(Command::Solve));
        assert_eq!(c.geometry.shape, Shape::UnionOfBalls);
        let again: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
        assert!(RunConfig::from_json_str(r#"{"degree": 2}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"mesh": {"cell": 2}}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"geometry": {"shape": "torus"}}"#).is_err());
    }

    #[test]
    fn validation_rejects_inconsistent_input() {
        let bad = [
            RunConfig { d: 4, ..Default::default() },
            RunConfig { p: 0, ..Default::default() },
            RunConfig { parts: 0, ..Default::default() },
            RunConfig {
                mesh: MeshSpec { lower: Some(vec![1.0, 1.0]), upper: Some(vec![0.0, 2.0]), ..Default::default() },
                ..Default::default()
            },
            RunConfig {
                geometry: GeometrySpec { centers: Some(vec![vec![0.0, 0.0, 0.0]]), ..Default::default() },
                ..Default::default()
            },
            RunConfig {
                geometry: GeometrySpec { radii: vec![-1.0], ..Default::default() },
                ..Default::default()
            },
            RunConfig { rate_band: Some([3.0, 2.0]), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
