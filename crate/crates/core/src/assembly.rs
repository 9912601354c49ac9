//! Galerkin matrices on the Lobatto nodal basis.
//!
//! Quadrature at the collocation nodes makes the mass matrix diagonal, and
//! with it the density vector `F(c)` and the potential operator `M^-1 Phi(d)`.
//! The stiffness matrix must be integrated exactly; the element matrix is
//! computed with the Lobatto rule and with a (p+2)-point Gauss-Legendre rule,
//! and the Lobatto result is kept only if the two agree.

use num_complex::Complex64;

use crate::error::Result;
use crate::mesh::Mesh;
use crate::quadrature::{GlBasis, QuadratureRule};
use crate::sparse::CsrMatrix;

/// Relative deviation below which the Lobatto stiffness counts as exact.
pub const STIFFNESS_EXACTNESS_TOL: f64 = 1e-12;

/// Quadrature actually used for the stiffness matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StiffnessRule {
    GaussLobatto,
    /// `points` Gauss-Legendre points per axis.
    GaussLegendre {
        points: usize,
    },
}

/// Element stiffness matrix of the reference element mapped to an
/// `hx x hy` rectangle, using `rule` in each direction. Local index is
/// `i + j (p+1)`.
pub fn element_stiffness(basis: &GlBasis, hx: f64, hy: f64, rule: &QuadratureRule) -> Vec<f64> {
    let n = basis.len();
    let nq = rule.len();
    // 1D tables at the quadrature points
    let mut val = vec![0.0; n * nq];
    let mut der = vec![0.0; n * nq];
    for (q, &x) in rule.points.iter().enumerate() {
        for a in 0..n {
            val[a * nq + q] = basis.lagrange_eval(a, x);
            der[a * nq + q] = basis.lagrange_deriv(a, x);
        }
    }
    let (sx, sy) = (2.0 / hx, 2.0 / hy);
    let jac = 0.25 * hx * hy;
    let nloc = n * n;
    let mut ke = vec![0.0; nloc * nloc];
    for r in 0..nloc {
        let (i, j) = (r % n, r / n);
        for c in r..nloc {
            let (k, l) = (c % n, c / n);
            let mut s = 0.0;
            for qy in 0..nq {
                for qx in 0..nq {
                    let w = rule.weights[qx] * rule.weights[qy];
                    let gx_r = sx * der[i * nq + qx] * val[j * nq + qy];
                    let gy_r = sy * val[i * nq + qx] * der[j * nq + qy];
                    let gx_c = sx * der[k * nq + qx] * val[l * nq + qy];
                    let gy_c = sy * val[k * nq + qx] * der[l * nq + qy];
                    s += w * (gx_r * gx_c + gy_r * gy_c);
                }
            }
            ke[r * nloc + c] = s * jac;
            ke[c * nloc + r] = s * jac;
        }
    }
    ke
}

/// Selects the stiffness quadrature for `basis`: Lobatto if it reproduces the
/// exact element matrix, otherwise Gauss-Legendre with `p + 2` points.
pub fn select_stiffness_rule(basis: &GlBasis, hx: f64, hy: f64) -> (StiffnessRule, Vec<f64>) {
    let lobatto = element_stiffness(basis, hx, hy, &basis.rule());
    let points = basis.degree() + 2;
    let legendre_rule = QuadratureRule::gauss_legendre(points).expect("positive point count");
    let exact = element_stiffness(basis, hx, hy, &legendre_rule);
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = lobatto
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if dev <= STIFFNESS_EXACTNESS_TOL * scale {
        (StiffnessRule::GaussLobatto, lobatto)
    } else {
        (StiffnessRule::GaussLegendre { points }, exact)
    }
}

/// Diagonal mass over all mesh nodes (boundary included).
pub fn assemble_mass_full(mesh: &Mesh) -> Vec<f64> {
    let w = mesh.basis().weights();
    let n = w.len();
    let jac = mesh.jac_det();
    let mut m = vec![0.0; mesh.num_nodes()];
    for ey in 0..mesh.ny() {
        for ex in 0..mesh.nx() {
            for j in 0..n {
                for i in 0..n {
                    m[mesh.global_of(ex, ey, i, j)] += w[i] * w[j] * jac;
                }
            }
        }
    }
    m
}

/// Diagonal mass restricted to the unknowns.
pub fn assemble_mass(mesh: &Mesh) -> Vec<f64> {
    let full = assemble_mass_full(mesh);
    mesh.interior().iter().map(|&g| full[g]).collect()
}

fn scatter_stiffness(
    mesh: &Mesh,
    ke: &[f64],
    index: impl Fn(usize) -> Option<usize>,
) -> Vec<(usize, usize, f64)> {
    let nloc = mesh.basis().len().pow(2);
    let mut triplets = Vec::with_capacity(mesh.num_elements() * nloc * nloc);
    for ey in 0..mesh.ny() {
        for ex in 0..mesh.nx() {
            let nodes: Vec<Option<usize>> =
                mesh.element_nodes(ex, ey).into_iter().map(&index).collect();
            for (r, gr) in nodes.iter().enumerate() {
                let Some(gr) = *gr else { continue };
                for (c, gc) in nodes.iter().enumerate() {
                    if let Some(gc) = *gc {
                        triplets.push((gr, gc, ke[r * nloc + c]));
                    }
                }
            }
        }
    }
    triplets
}

/// Stiffness over all mesh nodes (no boundary elimination).
pub fn assemble_stiffness_full(mesh: &Mesh) -> Result<(CsrMatrix, StiffnessRule)> {
    let (rule, ke) = select_stiffness_rule(mesh.basis(), mesh.hx(), mesh.hy());
    let t = scatter_stiffness(mesh, &ke, Some);
    Ok((CsrMatrix::from_triplets(mesh.num_nodes(), t)?, rule))
}

/// Stiffness restricted to the unknowns. Entries `(i, j)` and `(j, i)` are
/// sums of the same element values in the same order, so the result is
/// exactly symmetric.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<(CsrMatrix, StiffnessRule)> {
    let (rule, ke) = select_stiffness_rule(mesh.basis(), mesh.hx(), mesh.hy());
    let t = scatter_stiffness(mesh, &ke, |g| mesh.interior_index(g));
    Ok((CsrMatrix::from_triplets(mesh.num_interior(), t)?, rule))
}

/// Density right-hand side `F(c) = M (c .* conj(c))`.
pub fn compute_f(mass: &[f64], c: &[Complex64]) -> Vec<f64> {
    mass.iter().zip(c).map(|(m, c)| m * c.norm_sqr()).collect()
}

/// Diagonal of `M^-1 Phi(d)`. With collocated quadrature
/// `Phi_ij(d) = d_i M_ii delta_ij`, so this is `d` itself.
pub fn potential_diagonal(d: &[f64]) -> Vec<f64> {
    d.to_vec()
}

/// Assembled operators of one discretization.
#[derive(Debug, Clone)]
pub struct Operators {
    mesh: Mesh,
    mass: Vec<f64>,
    stiffness: CsrMatrix,
    stiffness_rule: StiffnessRule,
}

impl Operators {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let mass = assemble_mass(&mesh);
        let (stiffness, stiffness_rule) = assemble_stiffness(&mesh)?;
        Ok(Self {
            mesh,
            mass,
            stiffness,
            stiffness_rule,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn stiffness_rule(&self) -> StiffnessRule {
        self.stiffness_rule
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// `sqrt(c^* M c)`, the discrete L2 norm.
    pub fn m_norm(&self, c: &[Complex64]) -> f64 {
        self.mass
            .iter()
            .zip(c)
            .map(|(m, c)| m * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}
