//! Manufactured solutions for the Poisson problem `−Δu = f`.

use super::Point;

/// An exact solution with its gradient and right-hand side.
#[derive(Clone, Copy)]
pub struct Manufactured {
    pub u: fn(&[f64]) -> f64,
    pub grad: fn(&[f64]) -> Point,
    pub f: fn(&[f64]) -> f64,
}

fn u(x: &[f64]) -> f64 {
    2.0 * x[0].cos() * x[1].sin()
}

fn grad(x: &[f64]) -> Point {
    [
        -2.0 * x[0].sin() * x[1].sin(),
        2.0 * x[0].cos() * x[1].cos(),
        0.0,
    ]
}

fn f(x: &[f64]) -> f64 {
    4.0 * x[0].cos() * x[1].sin()
}

/// `u = 2 cos(x₁) sin(x₂)`, `f = −Δu = 2u`.
pub fn manufactured_poisson_2d() -> Manufactured {
    Manufactured { u, grad, f }
}
