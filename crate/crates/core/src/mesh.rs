//! Uniform rectangular tensor-product meshes with Lobatto nodes.
//!
//! Global nodes are numbered lexicographically with x fastest over the full
//! `(nx*p + 1) x (ny*p + 1)` node grid. Homogeneous Dirichlet conditions are
//! imposed by elimination: only nodes off the boundary carry unknowns, and
//! they are numbered in ascending global order.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::GlBasis;

/// Axis-aligned rectangle `[ax, bx] x [ay, by]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub ax: f64,
    pub bx: f64,
    pub ay: f64,
    pub by: f64,
}

impl Rect {
    pub fn new(ax: f64, bx: f64, ay: f64, by: f64) -> Self {
        Self { ax, bx, ay, by }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi)
    }

    pub fn width(&self) -> f64 {
        self.bx - self.ax
    }

    pub fn height(&self) -> f64 {
        self.by - self.ay
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Location of a physical point inside the mesh: element indices and
/// reference coordinates in [-1, 1]^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPoint {
    pub ex: usize,
    pub ey: usize,
    pub xi: f64,
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Rect,
    nx: usize,
    ny: usize,
    basis: GlBasis,
    hx: f64,
    hy: f64,
    interior: Vec<usize>,
    interior_of: Vec<Option<usize>>,
}

impl Mesh {
    pub fn new(domain: Rect, nx: usize, ny: usize, p: usize) -> Result<Self> {
        let finite = [domain.ax, domain.bx, domain.ay, domain.by]
            .iter()
            .all(|v| v.is_finite());
        if !finite || domain.bx <= domain.ax || domain.by <= domain.ay {
            return Err(Error::Config(format!("degenerate domain {domain:?}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!(
                "element counts must be positive, got {nx} x {ny}"
            )));
        }
        let basis = GlBasis::new(p)?;
        let nnx = nx * p + 1;
        let nny = ny * p + 1;
        let mut interior = Vec::with_capacity(nnx.saturating_sub(2) * nny.saturating_sub(2));
        let mut interior_of = vec![None; nnx * nny];
        for iy in 1..nny - 1 {
            for ix in 1..nnx - 1 {
                let g = iy * nnx + ix;
                interior_of[g] = Some(interior.len());
                interior.push(g);
            }
        }
        Ok(Self {
            domain,
            nx,
            ny,
            hx: domain.width() / nx as f64,
            hy: domain.height() / ny as f64,
            basis,
            interior,
            interior_of,
        })
    }

    /// Mesh with (approximately) square elements of edge `h` on `domain`.
    pub fn with_spacing(domain: Rect, h: f64, p: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!(
                "mesh spacing must be positive, got {h}"
            )));
        }
        let count = |len: f64| -> Result<usize> {
            let n = (len / h).round();
            if n < 1.0 || ((n * h - len).abs() > 1e-9 * len) {
                return Err(Error::Config(format!(
                    "spacing {h} does not divide domain length {len}"
                )));
            }
            Ok(n as usize)
        };
        Self::new(domain, count(domain.width())?, count(domain.height())?, p)
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &GlBasis {
        &self.basis
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Mesh parameter: the longer element edge.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    /// Determinant of the affine map from [-1, 1]^2 to an element.
    pub fn jac_det(&self) -> f64 {
        0.25 * self.hx * self.hy
    }

    pub fn n_nodes_x(&self) -> usize {
        self.nx * self.degree() + 1
    }

    pub fn n_nodes_y(&self) -> usize {
        self.ny * self.degree() + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes_x() * self.n_nodes_y()
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    /// Global indices of the unknowns, ascending.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Position of a global node among the unknowns, `None` on the boundary.
    pub fn interior_index(&self, global: usize) -> Option<usize> {
        self.interior_of.get(global).copied().flatten()
    }

    /// Global index of local node `(i, j)` of element `(ex, ey)`.
    pub fn global_of(&self, ex: usize, ey: usize, i: usize, j: usize) -> usize {
        let p = self.degree();
        (ey * p + j) * self.n_nodes_x() + ex * p + i
    }

    /// Global indices of the `(p+1)^2` nodes of element `(ex, ey)`, local x fastest.
    pub fn element_nodes(&self, ex: usize, ey: usize) -> Vec<usize> {
        let n = self.degree() + 1;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                out.push(self.global_of(ex, ey, i, j));
            }
        }
        out
    }

    fn axis_coord(&self, index: usize, count: usize, lo: f64, hi: f64, h: f64) -> f64 {
        let p = self.degree();
        if index == 0 {
            return lo;
        }
        if index == count * p {
            return hi;
        }
        let e = index / p;
        let local = index - e * p;
        lo + (e as f64 + 0.5 * (self.basis.nodes()[local] + 1.0)) * h
    }

    pub fn node_coords(&self, global: usize) -> Result<(f64, f64)> {
        if global >= self.num_nodes() {
            return Err(Error::Input(format!(
                "node index {global} out of range (mesh has {} nodes)",
                self.num_nodes()
            )));
        }
        let nnx = self.n_nodes_x();
        let (ix, iy) = (global % nnx, global / nnx);
        let d = self.domain;
        Ok((
            self.axis_coord(ix, self.nx, d.ax, d.bx, self.hx),
            self.axis_coord(iy, self.ny, d.ay, d.by, self.hy),
        ))
    }

    /// Coordinates of every unknown, in unknown order.
    pub fn interior_coords(&self) -> Vec<(f64, f64)> {
        self.interior
            .iter()
            .map(|&g| self.node_coords(g).expect("interior index in range"))
            .collect()
    }

    /// Nodal interpolation: coefficients are point values at the unknowns.
    pub fn interpolate<F>(&self, f: F) -> Result<Vec<Complex64>>
    where
        F: Fn(f64, f64) -> Complex64,
    {
        self.interior
            .iter()
            .map(|&g| {
                let (x, y) = self.node_coords(g)?;
                let v = f(x, y);
                if v.re.is_finite() && v.im.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Input(format!("non-finite sample {v} at ({x}, {y})")))
                }
            })
            .collect()
    }

    /// Element containing `(x, y)` and the reference coordinates of the point.
    /// Interface points go to the element above/right of the interface, except
    /// on the outer boundary.
    pub fn locate(&self, x: f64, y: f64) -> Result<ElementPoint> {
        let d = self.domain;
        let tol = 1e-12 * d.width().max(d.height());
        if x < d.ax - tol || x > d.bx + tol || y < d.ay - tol || y > d.by + tol {
            return Err(Error::Input(format!(
                "point ({x}, {y}) lies outside the domain"
            )));
        }
        let split = |v: f64, lo: f64, h: f64, n: usize| -> (usize, f64) {
            let s = (v - lo) / h;
            let e = (s.floor().max(0.0) as usize).min(n - 1);
            let xi = (2.0 * (s - e as f64) - 1.0).clamp(-1.0, 1.0);
            (e, xi)
        };
        let (ex, xi) = split(x, d.ax, self.hx, self.nx);
        let (ey, eta) = split(y, d.ay, self.hy, self.ny);
        Ok(ElementPoint { ex, ey, xi, eta })
    }

    /// Evaluates the finite element function with unknown coefficients `coeffs`
    /// (boundary values zero) at `(x, y)`.
    pub fn evaluate(&self, coeffs: &[Complex64], x: f64, y: f64) -> Result<Complex64> {
        if coeffs.len() != self.num_interior() {
            return Err(Error::Dimension {
                expected: self.num_interior(),
                got: coeffs.len(),
            });
        }
        let at = self.locate(x, y)?;
        let n = self.degree() + 1;
        let mut lx = vec![0.0; n];
        let mut ly = vec![0.0; n];
        self.basis.lagrange_values(at.xi, &mut lx);
        self.basis.lagrange_values(at.eta, &mut ly);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                let g = self.global_of(at.ex, at.ey, i, j);
                if let Some(k) = self.interior_index(g) {
                    acc += coeffs[k] * (lx[i] * ly[j]);
                }
            }
        }
        Ok(acc)
    }
}
