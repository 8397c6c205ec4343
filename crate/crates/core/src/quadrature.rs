//! Gauss–Legendre rules on [0, 1] and their tensor products on the unit square,
//! plus an adaptive one-dimensional integrator used for primitives without a
//! closed form.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the q-point Gauss–Legendre rule mapped to [0, 1].
pub fn gauss_legendre_unit(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let n = q as f64;
    for i in 0..q.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on P_q.
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1]; nodes stored in increasing order.
        nodes[i] = 0.5 * (1.0 - x);
        nodes[q - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[q - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if q == 0 { 1.0 } else { p1 };
    let d = q as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Tensor Gauss–Legendre grid on the unit square. Point (i, j) has
/// coordinates (nodes[i], nodes[j]) and flat index `i * q + j`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre_unit(order);
        Self {
            order,
            nodes,
            weights,
        }
    }

    /// Default order for a basis whose highest sine frequency is `max_mode`.
    pub fn default_order(max_mode: usize) -> usize {
        12.max(3 * max_mode + 2)
    }

    pub fn len(&self) -> usize {
        self.order * self.order
    }

    pub fn is_empty(&self) -> bool {
        self.order == 0
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.nodes[k / self.order], self.nodes[k % self.order])
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k / self.order] * self.weights[k % self.order]
    }

    /// Tensor weights as a flat vector in grid order.
    pub fn tensor_weights(&self) -> Vec<f64> {
        let q = self.order;
        let mut w = Vec::with_capacity(q * q);
        for i in 0..q {
            for j in 0..q {
                w.push(self.weights[i] * self.weights[j]);
            }
        }
        w
    }

    /// Integral over the square of the flat field `values`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let q = self.order;
        debug_assert_eq!(values.len(), q * q);
        let mut total = 0.0;
        for i in 0..q {
            let mut row = 0.0;
            for j in 0..q {
                row += self.weights[j] * values[i * q + j];
            }
            total += self.weights[i] * row;
        }
        total
    }
}

/// Adaptive Gauss–Legendre integration of `f` over [a, b] (b < a allowed).
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -adaptive_integrate(f, b, a, tol);
    }
    let rule = gl10();
    let whole = panel(f, a, b, rule);
    refine(f, a, b, whole, tol, 0, rule)
}

/// Like [`adaptive_integrate`], but splits [a, b] at the given break points
/// so that kinks of the integrand fall on panel boundaries.
pub fn adaptive_integrate_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    if b < a {
        return -adaptive_integrate_pieces(f, b, a, breaks, tol);
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut left = a;
    for c in cuts.into_iter().chain(std::iter::once(b)) {
        total += adaptive_integrate(f, left, c, tol);
        left = c;
    }
    total
}

fn gl10() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_unit(10))
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = b - a;
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(a + h * x))
        .sum::<f64>()
        * h
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    rule: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let m = 0.5 * (a + b);
    let left = panel(f, a, m, rule);
    let right = panel(f, m, b, rule);
    let sum = left + right;
    if depth >= 40 || (sum - whole).abs() <= tol * (1.0 + sum.abs()) {
        return sum;
    }
    refine(f, a, m, left, tol, depth + 1, rule) + refine(f, m, b, right, tol, depth + 1, rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_positive_and_sum_to_one() {
        for q in [1, 2, 5, 12, 26, 50] {
            let (x, w) = gauss_legendre_unit(q);
            assert!(w.iter().all(|&w| w > 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14, "q={q}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            let grid = QuadratureGrid::new(q);
            assert!((grid.tensor_weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_for_polynomials_of_degree_2q_minus_1() {
        let (x, w) = gauss_legendre_unit(6);
        for deg in 0..12 {
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((approx - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg={deg}");
        }
    }

    #[test]
    fn adaptive_handles_integrable_singularity() {
        let val = adaptive_integrate(&|x: f64| x.powf(-0.5), 1e-12, 1.0, 1e-13);
        assert!((val - 2.0 * (1.0 - 1e-6)).abs() < 1e-9);
        let rev = adaptive_integrate(&|x: f64| x * x, 1.0, 0.0, 1e-14);
        assert!((rev + 1.0 / 3.0).abs() < 1e-14);
    }
}
