//! Gauss-Lobatto and Gauss-Legendre rules on the reference interval [-1, 1],
//! and the nodal Lagrange basis collocated at the Lobatto points.
//!
//! The Lobatto nodes double as interpolation nodes and quadrature points, which
//! is what makes the mass matrix diagonal.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 16;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Legendre polynomial `P_n(x)` and its derivative, by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        // P'_k = P'_{k-2} + (2k - 1) P_{k-1}
        let dp_next = dp_prev + (2.0 * kf - 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// A one-dimensional quadrature rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `n`-point Gauss-Legendre rule, exact for degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(
                "Gauss-Legendre rule needs at least one point".into(),
            ));
        }
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // ascending initial guess
            let mut x = -((PI * (i as f64 + 0.75) / (nf + 0.5)).cos());
            for _ in 0..NEWTON_MAX_ITER {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < NEWTON_TOL {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = x;
            points[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            points[n / 2] = 0.0;
        }
        Ok(Self { points, weights })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Lobatto rule of degree `p` together with the Lagrange cardinal basis
/// through its `p + 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GlBasis {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Barycentric weights `1 / prod_{m != j} (x_j - x_m)`.
    bary: Vec<f64>,
    /// Row-major `D[i][j] = L_j'(x_i)`.
    deriv: Vec<f64>,
}

impl GlBasis {
    /// Builds the Lobatto rule of degree `p` (`p + 1` nodes).
    ///
    /// Interior nodes are the zeros of `P_p'`, found by Newton iteration from
    /// Chebyshev-Lobatto starting points. Only the left half is computed; the
    /// right half is its mirror image, so the rule is exactly symmetric.
    pub fn new(p: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&p) {
            return Err(Error::Config(format!(
                "polynomial degree must lie in 1..={MAX_DEGREE}, got {p}"
            )));
        }
        let n = p + 1;
        let pf = p as f64;
        let mut nodes = vec![0.0; n];
        nodes[0] = -1.0;
        nodes[p] = 1.0;
        for j in 1..n.div_ceil(2) {
            if 2 * j == p {
                continue;
            }
            let mut x = -(PI * j as f64 / pf).cos();
            for _ in 0..NEWTON_MAX_ITER {
                // Newton on (1 - x^2) P_p'(x), whose derivative is -p(p+1) P_p(x)
                let (lp, dlp) = legendre(p, x);
                let dx = (1.0 - x * x) * dlp / (pf * (pf + 1.0) * lp);
                x += dx;
                if dx.abs() < NEWTON_TOL {
                    break;
                }
            }
            nodes[j] = x;
            nodes[p - j] = -x;
        }
        if p.is_multiple_of(2) {
            nodes[p / 2] = 0.0;
        }

        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let (lp, _) = legendre(p, x);
                2.0 / (pf * (pf + 1.0) * lp * lp)
            })
            .collect();
        for j in 0..n / 2 {
            let avg = 0.5 * (weights[j] + weights[p - j]);
            weights[j] = avg;
            weights[p - j] = avg;
        }

        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let prod: f64 = (0..n)
                    .filter(|&m| m != j)
                    .map(|m| nodes[j] - nodes[m])
                    .product();
                1.0 / prod
            })
            .collect();

        let mut deriv = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let d = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                    deriv[i * n + j] = d;
                    diag -= d;
                }
            }
            // negative-sum diagonal keeps row sums at zero
            deriv[i * n + i] = diag;
        }

        Ok(Self {
            degree: p,
            nodes,
            weights,
            bary,
            deriv,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes, `p + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The Lobatto rule itself as a [`QuadratureRule`].
    pub fn rule(&self) -> QuadratureRule {
        QuadratureRule {
            points: self.nodes.clone(),
            weights: self.weights.clone(),
        }
    }

    /// `D[i][j] = L_j'(x_i)`.
    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        self.deriv[i * self.len() + j]
    }

    /// Row-major derivative matrix.
    pub fn derivative_matrix(&self) -> &[f64] {
        &self.deriv
    }

    /// Value of the `j`-th cardinal polynomial at `x`.
    pub fn lagrange_eval(&self, j: usize, x: f64) -> f64 {
        let n = self.len();
        let mut v = self.bary[j];
        for m in 0..n {
            if m != j {
                v *= x - self.nodes[m];
            }
        }
        v
    }

    /// Derivative of the `j`-th cardinal polynomial at `x`.
    pub fn lagrange_deriv(&self, j: usize, x: f64) -> f64 {
        let n = self.len();
        let mut sum = 0.0;
        for m in 0..n {
            if m == j {
                continue;
            }
            let mut term = self.bary[j];
            for k in 0..n {
                if k != j && k != m {
                    term *= x - self.nodes[k];
                }
            }
            sum += term;
        }
        sum
    }

    /// All cardinal values at `x`, written into `out` (length `p + 1`).
    pub fn lagrange_values(&self, x: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.lagrange_eval(j, x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn degree_one_is_trapezoid() {
        let b = GlBasis::new(1).unwrap();
        assert_eq!(b.nodes(), &[-1.0, 1.0]);
        assert_eq!(b.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn degree_two_is_simpson() {
        let b = GlBasis::new(2).unwrap();
        assert_eq!(b.nodes(), &[-1.0, 0.0, 1.0]);
        for (w, e) in b.weights().iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert!(close(*w, e, 1e-15));
        }
    }

    #[test]
    fn degree_four_nodes_and_weights() {
        let b = GlBasis::new(4).unwrap();
        let s = (3.0f64 / 7.0).sqrt();
        let nodes = [-1.0, -s, 0.0, s, 1.0];
        let weights = [0.1, 49.0 / 90.0, 32.0 / 45.0, 49.0 / 90.0, 0.1];
        for i in 0..5 {
            assert!(close(b.nodes()[i], nodes[i], 1e-15), "node {i}");
            assert!(close(b.weights()[i], weights[i], 1e-15), "weight {i}");
        }
    }

    #[test]
    fn rejects_out_of_range_degree() {
        assert!(matches!(GlBasis::new(0), Err(Error::Config(_))));
        assert!(matches!(GlBasis::new(17), Err(Error::Config(_))));
    }

    #[test]
    fn structural_invariants_hold_for_all_degrees() {
        for p in 1..=MAX_DEGREE {
            let b = GlBasis::new(p).unwrap();
            let x = b.nodes();
            assert_eq!(x[0], -1.0);
            assert_eq!(x[p], 1.0);
            for i in 0..p {
                assert!(x[i] < x[i + 1]);
                assert_eq!(x[i], -x[p - i]);
            }
            assert!(b.weights().iter().all(|&w| w > 0.0));
            let total: f64 = b.weights().iter().sum();
            assert!(close(total, 2.0, 1e-13), "p={p} sum={total}");
            for i in 0..=p {
                let row: f64 = (0..=p).map(|j| b.deriv(i, j)).sum();
                assert!(row.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn nodes_are_zeros_of_legendre_derivative() {
        for p in 2..=MAX_DEGREE {
            let b = GlBasis::new(p).unwrap();
            for &x in &b.nodes()[1..p] {
                let (_, dp) = legendre(p, x);
                // |P_p'| grows like p^2; scale the residual accordingly
                assert!(dp.abs() < 1e-13 * (p * p) as f64, "p={p} x={x} dp={dp}");
            }
        }
    }

    #[test]
    fn linear_cardinal_at_half() {
        let b = GlBasis::new(1).unwrap();
        assert!(close(b.lagrange_eval(1, 0.5), 0.75, 1e-15));
        assert!(close(b.lagrange_eval(0, 0.5), 0.25, 1e-15));
    }

    #[test]
    fn linear_derivative_matrix() {
        let b = GlBasis::new(1).unwrap();
        assert_eq!(b.derivative_matrix(), &[-0.5, 0.5, -0.5, 0.5]);
    }

    #[test]
    fn cardinal_property_and_partition_of_unity() {
        for p in 1..=MAX_DEGREE {
            let b = GlBasis::new(p).unwrap();
            for i in 0..=p {
                for j in 0..=p {
                    let v = b.lagrange_eval(j, b.nodes()[i]);
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!(close(v, e, 1e-13), "p={p} i={i} j={j} v={v}");
                }
            }
            for k in 0..=20 {
                let x = -1.0 + 0.1 * k as f64;
                let s: f64 = (0..=p).map(|j| b.lagrange_eval(j, x)).sum();
                assert!(close(s, 1.0, 1e-13), "p={p} x={x} s={s}");
            }
        }
    }

    #[test]
    fn derivative_of_square_is_exact() {
        for p in 2..=MAX_DEGREE {
            let b = GlBasis::new(p).unwrap();
            for i in 0..=p {
                let d: f64 = (0..=p).map(|j| b.deriv(i, j) * b.nodes()[j].powi(2)).sum();
                assert!(close(d, 2.0 * b.nodes()[i], 1e-12), "p={p} i={i}");
            }
        }
    }

    #[test]
    fn derivative_matrix_matches_pointwise_derivative() {
        let b = GlBasis::new(5).unwrap();
        for i in 0..=5 {
            for j in 0..=5 {
                assert!(close(
                    b.deriv(i, j),
                    b.lagrange_deriv(j, b.nodes()[i]),
                    1e-12
                ));
            }
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=12 {
            let rule = QuadratureRule::gauss_legendre(n).unwrap();
            for k in 0..2 * n {
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                let got = rule.integrate(|x| x.powi(k as i32));
                assert!(close(got, exact, 1e-14), "n={n} k={k}");
            }
        }
    }
}
