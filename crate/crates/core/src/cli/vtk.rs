//! Legacy-ASCII `STRUCTURED_POINTS` export of a discrete field.
//!
//! The lattice has `p` uniform sub-intervals per background cell per axis.
//! Points covered by an active cell carry `u_h` evaluated from the
//! lowest-numbered such cell; all other points carry [`SENTINEL`].

use std::io::{BufRead, Write};

use crate::error::{Result, SbmError};
use crate::operator::SbmOperator;
use crate::tensor_basis::{point_evaluate, CellTensor, LagrangeBasis1D, MAX_DIM};

pub const SENTINEL: f64 = -1.0e30;

/// Sampled field on the uniform lattice, axis 0 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub dims: [usize; MAX_DIM],
    pub origin: [f64; MAX_DIM],
    pub spacing: [f64; MAX_DIM],
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn n_points(&self) -> usize {
        self.dims.iter().product()
    }
}

pub fn sample_on_lattice(op: &SbmOperator, u: &[f64]) -> Result<LatticeField> {
    if u.len() != op.n_dofs() {
        return Err(SbmError::size(op.n_dofs(), u.len()));
    }
    let mesh = op.mesh();
    let dim = mesh.dim();
    let p = op.config().degree;
    let basis = LagrangeBasis1D::gauss_lobatto(p);
    let mut dims = [1; MAX_DIM];
    let mut origin = [0.0; MAX_DIM];
    let mut spacing = [1.0; MAX_DIM];
    for l in 0..dim {
        dims[l] = mesh.cells_per_axis()[l] * p + 1;
        origin[l] = mesh.origin()[l];
        spacing[l] = mesh.h()[l] / p as f64;
    }
    let n_points: usize = dims.iter().product();
    let mut values = vec![SENTINEL; n_points];
    let mut filled = vec![false; n_points];
    let local_points = (p + 1).pow(dim as u32);
    // active cells in increasing index order, so the first writer wins
    for &cell in op.classification().active_cells() {
        let coeffs = op.layout().gather(u, cell)?;
        let base = mesh.cell_multi(cell);
        for k in 0..local_points {
            let mut rest = k;
            let mut r = [0.0; MAX_DIM];
            let mut lin = 0;
            let mut stride = 1;
            for l in 0..dim {
                let i = rest % (p + 1);
                rest /= p + 1;
                r[l] = i as f64 / p as f64;
                lin += (base[l] * p + i) * stride;
                stride *= dims[l];
            }
            if filled[lin] {
                continue;
            }
            values[lin] = eval(&coeffs, &basis, &r[..dim])?;
            filled[lin] = true;
        }
    }
    Ok(LatticeField {
        dims,
        origin,
        spacing,
        values,
    })
}

fn eval(coeffs: &CellTensor, basis: &LagrangeBasis1D, r: &[f64]) -> Result<f64> {
    Ok(point_evaluate(coeffs, basis, r, false)?.0)
}

pub fn write_vtk<W: Write>(mut w: W, field: &LatticeField, name: &str) -> Result<()> {
    let [nx, ny, nz] = field.dims;
    let [ox, oy, oz] = field.origin;
    let [sx, sy, sz] = field.spacing;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "sbm solution; inactive points = {SENTINEL:e}; h = cell edge length")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {nx} {ny} {nz}")?;
    writeln!(w, "ORIGIN {ox:?} {oy:?} {oz:?}")?;
    writeln!(w, "SPACING {sx:?} {sy:?} {sz:?}")?;
    writeln!(w, "POINT_DATA {}", field.n_points())?;
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in &field.values {
        // shortest round-trip representation
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> SbmError {
    SbmError::InvalidConfig(format!("malformed VTK file: {}", msg.into()))
}

fn triple<T: std::str::FromStr>(line: &str, key: &str) -> Result<[T; 3]> {
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| parse_err(format!("expected {key}")))?;
    let parts: Vec<T> = rest
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| parse_err(format!("bad number in {key}"))))
        .collect::<Result<_>>()?;
    parts
        .try_into()
        .map_err(|_| parse_err(format!("{key} needs three values")))
}

/// Reads back a file written by [`write_vtk`].
pub fn read_vtk<R: BufRead>(r: R) -> Result<LatticeField> {
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    if lines.len() < 10 || lines[3].trim() != "DATASET STRUCTURED_POINTS" {
        return Err(parse_err("missing STRUCTURED_POINTS header"));
    }
    let dims: [usize; 3] = triple(&lines[4], "DIMENSIONS")?;
    let origin: [f64; 3] = triple(&lines[5], "ORIGIN")?;
    let spacing: [f64; 3] = triple(&lines[6], "SPACING")?;
    let values: Vec<f64> = lines[10..]
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().map_err(|_| parse_err("bad scalar value")))
        .collect::<Result<_>>()?;
    let field = LatticeField {
        dims,
        origin,
        spacing,
        values,
    };
    if field.values.len() != field.n_points() {
        return Err(parse_err("point count does not match DIMENSIONS"));
    }
    Ok(field)
}
