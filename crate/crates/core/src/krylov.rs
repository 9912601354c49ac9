//! Action of the free Schrödinger propagator `exp(-(i/2) tau M^-1 K)` on a
//! coefficient vector.
//!
//! `M^-1 K` is self-adjoint in the M-inner product `<u, v>_M = u^* M v`, so the
//! Krylov space is built by Lanczos in that inner product and the projected
//! matrix is real symmetric tridiagonal. The small exponential is evaluated
//! through its eigendecomposition, which makes the projected propagator
//! unitary up to rounding.
//!
//! When the basis reaches its maximal size without meeting the tolerance the
//! time interval is split: the substep is halved (reusing the same basis)
//! until the error estimate is met, and the remainder is propagated from the
//! new vector.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::assembly::Operators;
use crate::error::{Error, Result};

pub const DEFAULT_EXPV_TOL: f64 = 1e-12;
pub const DEFAULT_KRYLOV_DIM: usize = 60;

/// Relative size of `beta_j` treated as an exact invariant subspace.
const BREAKDOWN_TOL: f64 = 1e-13;
/// Give up when the substep falls below this fraction of the request.
const MIN_SUBSTEP_FRACTION: f64 = 1e-10;

pub(crate) fn m_dot(mass: &[f64], u: &[Complex64], v: &[Complex64]) -> Complex64 {
    mass.iter()
        .zip(u.iter().zip(v))
        .map(|(m, (a, b))| a.conj() * b * m)
        .sum()
}

pub(crate) fn m_norm(mass: &[f64], u: &[Complex64]) -> f64 {
    mass.iter()
        .zip(u)
        .map(|(m, a)| m * a.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Counters accumulated over the lifetime of a workspace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpvStats {
    pub calls: usize,
    pub substeps: usize,
    pub matvecs: usize,
    pub max_dim: usize,
}

/// `exp(-(i/2) s T) e_1` for the symmetric tridiagonal `T` given by `alpha`
/// (diagonal) and `beta` (off-diagonal).
fn small_exp(alpha: &[f64], beta: &[f64], s: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let q = &eig.eigenvectors;
    let phases: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(q[(0, k)], -0.5 * s * eig.eigenvalues[k]))
        .collect();
    (0..m)
        .map(|i| (0..m).map(|k| phases[k] * q[(i, k)]).sum())
        .collect()
}

/// Scratch space and settings for [`ExpvWorkspace::expv`]. Not shareable
/// between concurrent calls; use one workspace per thread.
#[derive(Debug, Clone)]
pub struct ExpvWorkspace {
    max_dim: usize,
    tol: f64,
    basis: Vec<Vec<Complex64>>,
    work: Vec<Complex64>,
    stats: ExpvStats,
}

impl ExpvWorkspace {
    pub fn new(max_dim: usize, tol: f64) -> Result<Self> {
        if max_dim < 2 {
            return Err(Error::Config(format!(
                "Krylov dimension must be at least 2, got {max_dim}"
            )));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!(
                "expv tolerance must be positive, got {tol}"
            )));
        }
        Ok(Self {
            max_dim,
            tol,
            basis: Vec::new(),
            work: Vec::new(),
            stats: ExpvStats::default(),
        })
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn stats(&self) -> ExpvStats {
        self.stats
    }

    /// `work = M^-1 K v`
    fn apply(&mut self, ops: &Operators, j: usize) {
        let n = ops.dim();
        self.work.resize(n, Complex64::default());
        ops.stiffness()
            .mul_vec_complex(&self.basis[j], &mut self.work);
        for (w, m) in self.work.iter_mut().zip(ops.mass()) {
            *w /= m;
        }
        self.stats.matvecs += 1;
    }

    /// Returns `exp(-(i/2) tau M^-1 K) c` with M-norm error at most
    /// `tol * ||c||_M`. Negative `tau` runs the flow backwards.
    pub fn expv(&mut self, ops: &Operators, tau: f64, c: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = ops.dim();
        if c.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: c.len(),
            });
        }
        if !tau.is_finite() {
            return Err(Error::Input(format!("non-finite time increment {tau}")));
        }
        self.stats.calls += 1;
        let mass = ops.mass();
        let norm0 = m_norm(mass, c);
        if tau == 0.0 || norm0 == 0.0 {
            return Ok(c.to_vec());
        }
        if !norm0.is_finite() {
            return Err(Error::Input("non-finite input vector".into()));
        }

        let span = tau.abs();
        let sign = tau.signum();
        let mut v = c.to_vec();
        let mut done = 0.0;
        let mut trial = span;
        while done < span {
            let remaining = span - done;
            let mut s = trial.min(remaining);
            let beta0 = m_norm(mass, &v);

            self.basis.resize_with(self.max_dim + 1, Vec::new);
            self.basis[0].clear();
            self.basis[0].extend(v.iter().map(|x| x / beta0));
            let mut alpha: Vec<f64> = Vec::with_capacity(self.max_dim);
            let mut beta: Vec<f64> = Vec::with_capacity(self.max_dim);
            let mut coeffs: Option<Vec<Complex64>> = None;
            let mut scale: f64 = 0.0;

            for j in 0..self.max_dim {
                self.apply(ops, j);
                let a = m_dot(mass, &self.basis[j], &self.work).re;
                alpha.push(a);
                scale = scale.max(a.abs());
                for (w, b) in self.work.iter_mut().zip(&self.basis[j]) {
                    *w -= b * a;
                }
                if j > 0 {
                    let bprev = beta[j - 1];
                    for (w, b) in self.work.iter_mut().zip(&self.basis[j - 1]) {
                        *w -= b * bprev;
                    }
                }
                // full reorthogonalization keeps the basis M-orthonormal
                for k in 0..=j {
                    let proj = m_dot(mass, &self.basis[k], &self.work);
                    for (w, b) in self.work.iter_mut().zip(&self.basis[k]) {
                        *w -= b * proj;
                    }
                }
                let b = m_norm(mass, &self.work);
                let dim = j + 1;

                if b <= BREAKDOWN_TOL * scale.max(f64::MIN_POSITIVE) {
                    // invariant subspace: the projection is exact for any s
                    s = remaining;
                    coeffs = Some(small_exp(&alpha, &beta, sign * s));
                    self.stats.max_dim = self.stats.max_dim.max(dim);
                    break;
                }

                let budget = self.tol * norm0 * (s / span);
                let check = dim >= 4 && (dim % 2 == 0 || dim == self.max_dim);
                if check {
                    let f = small_exp(&alpha, &beta, sign * s);
                    let err = beta0 * b * f[dim - 1].norm();
                    if err <= budget {
                        coeffs = Some(f);
                        self.stats.max_dim = self.stats.max_dim.max(dim);
                        break;
                    }
                }
                if dim == self.max_dim {
                    // shrink the substep on the full basis until it converges
                    loop {
                        s *= 0.5;
                        if s < MIN_SUBSTEP_FRACTION * span {
                            return Err(Error::SolverFailure {
                                solver: "Krylov expv",
                                residual: beta0 * b,
                                iterations: self.stats.matvecs,
                            });
                        }
                        let f = small_exp(&alpha, &beta, sign * s);
                        let err = beta0 * b * f[dim - 1].norm();
                        if err <= self.tol * norm0 * (s / span) {
                            coeffs = Some(f);
                            break;
                        }
                    }
                    self.stats.max_dim = self.max_dim;
                    break;
                }
                beta.push(b);
                let next: Vec<Complex64> = self.work.iter().map(|w| w / b).collect();
                self.basis[j + 1] = next;
            }

            let f = coeffs
                .ok_or_else(|| Error::Internal("Lanczos loop ended without a result".into()))?;
            v.iter_mut().for_each(|x| *x = Complex64::default());
            for (k, fk) in f.iter().enumerate() {
                let w = fk * beta0;
                for (x, b) in v.iter_mut().zip(&self.basis[k]) {
                    *x += b * w;
                }
            }
            self.stats.substeps += 1;
            done += s;
            trial = s;
            if remaining - s <= 1e-15 * span {
                break;
            }
        }
        Ok(v)
    }

    /// M-orthonormality defect `max |<v_i, v_j>_M - delta_ij|` of the basis
    /// built from `c` with `dim` vectors (diagnostic).
    pub fn orthogonality_defect(&mut self, ops: &Operators, c: &[Complex64], dim: usize) -> f64 {
        let mass = ops.mass();
        let beta0 = m_norm(mass, c);
        self.basis.resize_with(dim.max(1), Vec::new);
        self.basis[0] = c.iter().map(|x| x / beta0).collect();
        let mut beta_prev = 0.0;
        let mut built = 1;
        for j in 0..dim - 1 {
            self.apply(ops, j);
            let a = m_dot(mass, &self.basis[j], &self.work).re;
            for (w, b) in self.work.iter_mut().zip(&self.basis[j]) {
                *w -= b * a;
            }
            if j > 0 {
                for (w, b) in self.work.iter_mut().zip(&self.basis[j - 1]) {
                    *w -= b * beta_prev;
                }
            }
            for k in 0..=j {
                let proj = m_dot(mass, &self.basis[k], &self.work);
                for (w, b) in self.work.iter_mut().zip(&self.basis[k]) {
                    *w -= b * proj;
                }
            }
            let b = m_norm(mass, &self.work);
            if b == 0.0 {
                break;
            }
            beta_prev = b;
            self.basis[j + 1] = self.work.iter().map(|w| w / b).collect();
            built += 1;
        }
        let mut worst: f64 = 0.0;
        for i in 0..built {
            for j in 0..built {
                let d = m_dot(mass, &self.basis[i], &self.basis[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - e).norm());
            }
        }
        worst
    }
}
