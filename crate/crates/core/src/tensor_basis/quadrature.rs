//! One-dimensional Gauss rules on the unit interval.

use std::f64::consts::PI;

/// A quadrature rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature1D {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature1D {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[0, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and `P_{n-1}(x)` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Gauss–Legendre rule with `n` points, mapped to `[0, 1]`.
///
/// Nodes are the roots of `P_n`, found by Newton iteration from the
/// Chebyshev-like initial guesses; weights sum to one.
pub fn gauss_quadrature_1d(n: usize) -> Quadrature1D {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            dp = nf * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        dp = if p.is_finite() {
            nf * (x * p - p_prev) / (x * x - 1.0)
        } else {
            dp
        };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root on [-1, 1]
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    Quadrature1D { nodes, weights }
}

/// Gauss–Lobatto rule with `n >= 2` points on `[0, 1]`, endpoints included.
pub fn gauss_lobatto_1d(n: usize) -> Quadrature1D {
    assert!(n >= 2, "a Gauss-Lobatto rule needs at least two points");
    let order = n - 1;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // interior nodes are the roots of P'_order; iterate on (1 - x^2) P'_order
        let mut x = -(PI * i as f64 / order as f64).cos();
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(order, x);
            let dx = (x * p - p_prev) / (nf * p);
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, _) = legendre_pair(order, x);
        nodes[i] = 0.5 * (1.0 + x);
        weights[i] = 1.0 / (order as f64 * nf * p * p);
    }
    nodes[0] = 0.0;
    nodes[n - 1] = 1.0;
    for i in 0..n / 2 {
        let mirrored = 0.5 * (nodes[i] + 1.0 - nodes[n - 1 - i]);
        nodes[i] = mirrored;
        nodes[n - 1 - i] = 1.0 - mirrored;
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    Quadrature1D { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Root of `P_n` on `[a, b]` by bisection; independent of the Newton path.
    fn bisect_legendre_root(n: usize, mut a: f64, mut b: f64) -> f64 {
        let f = |x: f64| legendre_pair(n, x).0;
        let fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn single_point_is_midpoint() {
        let q = gauss_quadrature_1d(1);
        assert_eq!(q.nodes(), &[0.5]);
        assert_eq!(q.weights(), &[1.0]);
    }

    #[test]
    fn two_point_rule_matches_bisection_roots() {
        let q = gauss_quadrature_1d(2);
        let r0 = 0.5 * (1.0 + bisect_legendre_root(2, -1.0, 0.0));
        let r1 = 0.5 * (1.0 + bisect_legendre_root(2, 0.0, 1.0));
        assert!((q.nodes()[0] - r0).abs() < 1e-14);
        assert!((q.nodes()[1] - r1).abs() < 1e-14);
        assert!((q.nodes()[0] - (0.5 - 0.5 / 3f64.sqrt())).abs() < 1e-15);
        assert!((q.weights()[0] - 0.5).abs() < 1e-15);
        assert!((q.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_point_rule_integrates_x5() {
        let q = gauss_quadrature_1d(3);
        assert!((q.integrate(|x| x.powi(5)) - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn exactness_and_weights() {
        for n in 1..=12 {
            let q = gauss_quadrature_1d(n);
            let total: f64 = q.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-14, "n={n}");
            assert!(q.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(q.nodes().iter().all(|&x| x > 0.0 && x < 1.0));
            assert!(q.weights().iter().all(|&w| w > 0.0));
            for k in 0..=(2 * n - 1) {
                let exact = 1.0 / (k as f64 + 1.0);
                let got = q.integrate(|x| x.powi(k as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn lobatto_nodes() {
        let q = gauss_lobatto_1d(2);
        assert_eq!(q.nodes(), &[0.0, 1.0]);
        let q = gauss_lobatto_1d(4);
        let s = 0.5 / 5f64.sqrt();
        assert!((q.nodes()[1] - (0.5 - s)).abs() < 1e-15);
        assert!((q.nodes()[2] - (0.5 + s)).abs() < 1e-15);
        for n in 2..=10 {
            let q = gauss_lobatto_1d(n);
            assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..=(2 * n - 3) {
                let got = q.integrate(|x| x.powi(k as i32));
                assert!((got - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }
}
