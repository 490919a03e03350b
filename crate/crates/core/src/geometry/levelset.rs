//! Implicit geometry: the domain is `{φ < 0}`, its boundary `{φ = 0}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SbmError};
use crate::tensor_basis::MAX_DIM;

/// A point or vector padded to three components; entries past `dim` are zero.
pub type Point = [f64; MAX_DIM];

pub fn point_from(x: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..x.len()].copy_from_slice(x);
    p
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub trait LevelSet: Send + Sync {
    fn dim(&self) -> usize;

    fn phi(&self, x: &[f64]) -> f64;

    fn grad(&self, x: &[f64]) -> Point;

    /// Second derivatives, if available in closed form. The Newton
    /// projection falls back to differencing `grad` otherwise.
    fn hessian(&self, _x: &[f64]) -> Option<[[f64; MAX_DIM]; MAX_DIM]> {
        None
    }

    /// Closest point on `{φ = 0}`.
    fn project(&self, x: &[f64]) -> Result<Point> {
        newton_projection(self, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Point,
    radius: f64,
    dim: usize,
}

impl Ball {
    pub fn new(center: &[f64], radius: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&center.len()) {
            return Err(SbmError::InvalidGeometry(format!(
                "ball center must have 2 or 3 components, got {}",
                center.len()
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(SbmError::InvalidGeometry(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            center: point_from(center),
            radius,
            dim: center.len(),
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn offset(&self, x: &[f64]) -> (Point, f64) {
        let mut v = [0.0; MAX_DIM];
        for l in 0..self.dim {
            v[l] = x[l] - self.center[l];
        }
        let r = norm(&v);
        (v, r)
    }
}

impl LevelSet for Ball {
    fn dim(&self) -> usize {
        self.dim
    }

    fn phi(&self, x: &[f64]) -> f64 {
        self.offset(x).1 - self.radius
    }

    fn grad(&self, x: &[f64]) -> Point {
        let (v, r) = self.offset(x);
        if r == 0.0 {
            return [0.0; MAX_DIM];
        }
        v.map(|c| c / r)
    }

    fn hessian(&self, x: &[f64]) -> Option<[[f64; MAX_DIM]; MAX_DIM]> {
        let (v, r) = self.offset(x);
        if r == 0.0 {
            return None;
        }
        let mut h = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let delta = if i == j { 1.0 } else { 0.0 };
                h[i][j] = (delta - v[i] * v[j] / (r * r)) / r;
            }
        }
        Some(h)
    }

    fn project(&self, x: &[f64]) -> Result<Point> {
        let (v, r) = self.offset(x);
        if r == 0.0 {
            return Err(SbmError::ProjectionFailed {
                face: None,
                point: x.to_vec(),
                residual: self.radius,
            });
        }
        let mut y = [0.0; MAX_DIM];
        for l in 0..self.dim {
            y[l] = self.center[l] + self.radius * v[l] / r;
        }
        Ok(y)
    }
}

/// Union of disjoint balls: `φ = min_i (|x − c_i| − R_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionOfBalls {
    balls: Vec<Ball>,
}

impl UnionOfBalls {
    /// Rejects balls whose surfaces are not separated by more than `min_gap`
    /// (use twice the cell size so no cell sees two boundaries).
    pub fn new(balls: Vec<Ball>, min_gap: f64) -> Result<Self> {
        let Some(first) = balls.first() else {
            return Err(SbmError::InvalidGeometry("union of zero balls".into()));
        };
        let dim = first.dim;
        if balls.iter().any(|b| b.dim != dim) {
            return Err(SbmError::InvalidGeometry(
                "balls of mixed dimension".into(),
            ));
        }
        for (i, a) in balls.iter().enumerate() {
            for (j, b) in balls.iter().enumerate().skip(i + 1) {
                let mut diff = [0.0; MAX_DIM];
                for l in 0..dim {
                    diff[l] = a.center[l] - b.center[l];
                }
                let gap = norm(&diff) - a.radius - b.radius;
                if gap <= min_gap {
                    return Err(SbmError::InvalidGeometry(format!(
                        "balls {i} and {j} are {gap:.3e} apart, need more than {min_gap:.3e}"
                    )));
                }
            }
        }
        Ok(Self { balls })
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    /// Index of the ball with smallest `φ_i`; ties go to the lowest index.
    fn argmin(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_phi = f64::INFINITY;
        for (i, b) in self.balls.iter().enumerate() {
            let p = b.phi(x);
            if p < best_phi {
                best = i;
                best_phi = p;
            }
        }
        best
    }

    /// Index of the ball whose surface is nearest; ties go to the lowest index.
    fn nearest_surface(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, b) in self.balls.iter().enumerate() {
            let d = b.phi(x).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }
}

impl LevelSet for UnionOfBalls {
    fn dim(&self) -> usize {
        self.balls[0].dim
    }

    fn phi(&self, x: &[f64]) -> f64 {
        self.balls[self.argmin(x)].phi(x)
    }

    fn grad(&self, x: &[f64]) -> Point {
        self.balls[self.argmin(x)].grad(x)
    }

    fn hessian(&self, x: &[f64]) -> Option<[[f64; MAX_DIM]; MAX_DIM]> {
        self.balls[self.argmin(x)].hessian(x)
    }

    fn project(&self, x: &[f64]) -> Result<Point> {
        self.balls[self.nearest_surface(x)].project(x)
    }
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MAX_HALVINGS: usize = 8;
const NEWTON_TOL: f64 = 1e-14;

fn hessian_or_fd<L: LevelSet + ?Sized>(ls: &L, y: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
    if let Some(h) = ls.hessian(y) {
        return h;
    }
    let dim = ls.dim();
    let step = 1e-6;
    let mut h = [[0.0; MAX_DIM]; MAX_DIM];
    for j in 0..dim {
        let mut yp = point_from(y);
        let mut ym = point_from(y);
        yp[j] += step;
        ym[j] -= step;
        let gp = ls.grad(&yp[..dim]);
        let gm = ls.grad(&ym[..dim]);
        for i in 0..dim {
            h[i][j] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    h
}

/// Residual of the optimality system `[y − x + λ∇φ(y); φ(y)]`.
fn kkt_residual<L: LevelSet + ?Sized>(ls: &L, x: &[f64], y: &[f64], lambda: f64) -> DVector<f64> {
    let dim = ls.dim();
    let g = ls.grad(y);
    let mut r = DVector::zeros(dim + 1);
    for l in 0..dim {
        r[l] = y[l] - x[l] + lambda * g[l];
    }
    r[dim] = ls.phi(y);
    r
}

/// Closest-point projection by damped Newton on the optimality system of
/// `min |y − x|² s.t. φ(y) = 0`.
pub fn newton_projection<L: LevelSet + ?Sized>(ls: &L, x: &[f64]) -> Result<Point> {
    let dim = ls.dim();
    let g0 = ls.grad(x);
    let g0_sq: f64 = g0[..dim].iter().map(|v| v * v).sum();
    let phi0 = ls.phi(x);
    if phi0 == 0.0 {
        return Ok(point_from(&x[..dim]));
    }
    if g0_sq == 0.0 {
        return Err(SbmError::ProjectionFailed {
            face: None,
            point: x.to_vec(),
            residual: phi0.abs(),
        });
    }
    let mut lambda = phi0 / g0_sq;
    let mut y = [0.0; MAX_DIM];
    for l in 0..dim {
        y[l] = x[l] - lambda * g0[l];
    }
    let mut res = kkt_residual(ls, x, &y[..dim], lambda);
    for _ in 0..NEWTON_MAX_ITER {
        if res.norm() <= NEWTON_TOL * (1.0 + norm(&x[..dim])) {
            return Ok(y);
        }
        let g = ls.grad(&y[..dim]);
        let h = hessian_or_fd(ls, &y[..dim]);
        let mut jac = DMatrix::zeros(dim + 1, dim + 1);
        for i in 0..dim {
            for j in 0..dim {
                jac[(i, j)] = lambda * h[i][j] + if i == j { 1.0 } else { 0.0 };
            }
            jac[(i, dim)] = g[i];
            jac[(dim, i)] = g[i];
        }
        let Some(step) = jac.lu().solve(&(-&res)) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let mut y_try = y;
            for l in 0..dim {
                y_try[l] += t * step[l];
            }
            let lambda_try = lambda + t * step[dim];
            let res_try = kkt_residual(ls, x, &y_try[..dim], lambda_try);
            if res_try.norm() < res.norm() {
                y = y_try;
                lambda = lambda_try;
                res = res_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res.norm() <= 1e-12 * (1.0 + norm(&x[..dim])) {
        return Ok(y);
    }
    Err(SbmError::ProjectionFailed {
        face: None,
        point: x.to_vec(),
        residual: res.norm(),
    })
}

/// Closest point of `x` on the zero level set.
pub fn closest_point_projection<L: LevelSet + ?Sized>(ls: &L, x: &[f64]) -> Result<Point> {
    if x.len() != ls.dim() {
        return Err(SbmError::size(ls.dim(), x.len()));
    }
    ls.project(x)
}
