//! Brute-force reference computations shared by the integration tests. None
//! of these reuse the library's assembly or Krylov code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splitpde::{Mesh, Operators};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn m_norm(mass: &[f64], c: &[Complex64]) -> f64 {
    mass.iter()
        .zip(c)
        .map(|(m, v)| m * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn m_dist(mass: &[f64], a: &[Complex64], b: &[Complex64]) -> f64 {
    mass.iter()
        .zip(a.iter().zip(b))
        .map(|(m, (x, y))| m * (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

// --- polynomials in monomial form, lowest degree first ---

pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn poly_deriv(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

/// Exact integral over [-1, 1].
pub fn poly_integral(a: &[f64]) -> f64 {
    a.iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, c)| 2.0 * c / (k as f64 + 1.0))
        .sum()
}

pub fn poly_eval(a: &[f64], x: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Monomial coefficients of the Lagrange polynomials through `nodes`, from
/// the inverse Vandermonde matrix.
pub fn lagrange_monomials(nodes: &[f64]) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let v = DMatrix::from_fn(n, n, |i, k| nodes[i].powi(k as i32));
    let inv = v.try_inverse().expect("distinct nodes");
    (0..n)
        .map(|j| (0..n).map(|k| inv[(k, j)]).collect())
        .collect()
}

/// Exact 1D consistent mass and stiffness on the reference interval.
pub fn exact_1d(nodes: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let l = lagrange_monomials(nodes);
    let d: Vec<Vec<f64>> = l.iter().map(|p| poly_deriv(p)).collect();
    let n = nodes.len();
    let m = DMatrix::from_fn(n, n, |a, b| poly_integral(&poly_mul(&l[a], &l[b])));
    let s = DMatrix::from_fn(n, n, |a, b| poly_integral(&poly_mul(&d[a], &d[b])));
    (m, s)
}

/// Exact element stiffness on an `hx x hy` rectangle, local index `i + j n`.
pub fn exact_element_stiffness(nodes: &[f64], hx: f64, hy: f64) -> DMatrix<f64> {
    let (m, s) = exact_1d(nodes);
    let n = nodes.len();
    DMatrix::from_fn(n * n, n * n, |r, c| {
        let (i, j, k, l) = (r % n, r / n, c % n, c / n);
        (hy / hx) * s[(i, k)] * m[(j, l)] + (hx / hy) * m[(i, k)] * s[(j, l)]
    })
}

/// Exact stiffness over the interior unknowns of `mesh`.
pub fn exact_stiffness(mesh: &Mesh) -> DMatrix<f64> {
    let ke = exact_element_stiffness(mesh.basis().nodes(), mesh.hx(), mesh.hy());
    let mut k = DMatrix::zeros(mesh.num_interior(), mesh.num_interior());
    for ey in 0..mesh.ny() {
        for ex in 0..mesh.nx() {
            let nodes = mesh.element_nodes(ex, ey);
            for (r, &gr) in nodes.iter().enumerate() {
                let Some(a) = mesh.interior_index(gr) else {
                    continue;
                };
                for (c, &gc) in nodes.iter().enumerate() {
                    if let Some(b) = mesh.interior_index(gc) {
                        k[(a, b)] += ke[(r, c)];
                    }
                }
            }
        }
    }
    k
}

pub fn dense_csr(ops: &Operators) -> DMatrix<f64> {
    let n = ops.dim();
    let dense = ops.stiffness().to_dense();
    DMatrix::from_fn(n, n, |i, j| dense[i][j])
}

/// `exp(-(i/2) tau M^-1 K) c` through the eigendecomposition of the
/// symmetric matrix `M^-1/2 K M^-1/2`.
pub fn dense_expv(ops: &Operators, tau: f64, c: &[Complex64]) -> Vec<Complex64> {
    let n = ops.dim();
    let k = dense_csr(ops);
    let s: Vec<f64> = ops.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| s[i] * k[(i, j)] * s[j]);
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let z = DVector::from_fn(n, |i, _| c[i] / s[i]);
    let proj = v.adjoint() * z;
    let phased = DVector::from_fn(n, |i, _| {
        proj[i] * Complex64::from_polar(1.0, -0.5 * tau * eig.eigenvalues[i])
    });
    let y = v * phased;
    (0..n).map(|i| y[i] * s[i]).collect()
}

/// Visits every Lobatto quadrature point of every element with the element's
/// global node list, all local basis values at the point and the weight.
/// Basis values are evaluated, not taken from the cardinal property.
fn for_each_quadrature_point(mesh: &Mesh, mut f: impl FnMut(&[usize], &[f64], f64)) {
    let b = mesh.basis();
    let n = b.len();
    let (x, w) = (b.nodes(), b.weights());
    let jac = mesh.hx() * mesh.hy() / 4.0;
    let mut phi = vec![0.0; n * n];
    for ey in 0..mesh.ny() {
        for ex in 0..mesh.nx() {
            let nodes = mesh.element_nodes(ex, ey);
            for qy in 0..n {
                for qx in 0..n {
                    for j in 0..n {
                        for i in 0..n {
                            phi[i + j * n] = b.lagrange_eval(i, x[qx]) * b.lagrange_eval(j, x[qy]);
                        }
                    }
                    f(&nodes, &phi, w[qx] * w[qy] * jac);
                }
            }
        }
    }
}

/// Dense `Phi_ij(d) = sum_k d_k (v_k v_i, v_j)` over interior unknowns.
pub fn dense_phi(mesh: &Mesh, d: &[f64]) -> DMatrix<f64> {
    let n = mesh.num_interior();
    let mut phi_mat = DMatrix::zeros(n, n);
    for_each_quadrature_point(mesh, |nodes, phi, w| {
        let idx: Vec<Option<usize>> = nodes.iter().map(|&g| mesh.interior_index(g)).collect();
        let dq: f64 = idx
            .iter()
            .zip(phi)
            .filter_map(|(k, v)| k.map(|k| d[k] * v))
            .sum();
        for (a, ia) in idx.iter().enumerate() {
            let Some(ia) = *ia else { continue };
            for (b, ib) in idx.iter().enumerate() {
                if let Some(ib) = *ib {
                    phi_mat[(ia, ib)] += w * dq * phi[a] * phi[b];
                }
            }
        }
    });
    phi_mat
}

/// Dense `F_i = sum_jk c_j conj(c_k) (v_j v_k, v_i)`.
pub fn dense_f(mesh: &Mesh, c: &[Complex64]) -> Vec<f64> {
    let mut f = vec![0.0; mesh.num_interior()];
    for_each_quadrature_point(mesh, |nodes, phi, w| {
        let idx: Vec<Option<usize>> = nodes.iter().map(|&g| mesh.interior_index(g)).collect();
        let u: Complex64 = idx
            .iter()
            .zip(phi)
            .filter_map(|(k, v)| k.map(|k| c[k] * v))
            .sum();
        for (a, ia) in idx.iter().enumerate() {
            if let Some(ia) = *ia {
                f[ia] += w * u.norm_sqr() * phi[a];
            }
        }
    });
    f
}

/// Random polynomial of degree `deg` with coefficients in [-1, 1].
pub fn random_poly(rng: &mut ChaCha8Rng, deg: usize) -> Vec<f64> {
    (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Evaluates `lagrange_monomials` at `x`, for cross-checks.
pub fn eval_all(polys: &[Vec<f64>], x: f64) -> Vec<f64> {
    polys.iter().map(|p| poly_eval(p, x)).collect()
}
