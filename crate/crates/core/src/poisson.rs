//! Discrete Poisson solves `K d = rhs` on the unknowns.

use crate::assembly::Operators;
use crate::error::{Error, Result};
use crate::sparse::{conjugate_gradient, norm2, BandCholesky, SolveStats};

/// Problems at or above this many unknowns are not factored directly.
pub const CHOLESKY_MAX_DOFS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonMethod {
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
    /// Banded Cholesky factorization, computed once.
    Cholesky,
    /// Cholesky below [`CHOLESKY_MAX_DOFS`] unknowns, CG otherwise.
    Auto,
}

impl std::str::FromStr for PoissonMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cg" => Ok(Self::Cg),
            "cholesky" => Ok(Self::Cholesky),
            "auto" => Ok(Self::Auto),
            _ => Err(Error::Config(format!(
                "unknown Poisson solver `{s}` (expected cg, cholesky or auto)"
            ))),
        }
    }
}

impl std::fmt::Display for PoissonMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cg => "cg",
            Self::Cholesky => "cholesky",
            Self::Auto => "auto",
        })
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSolver {
    tol: f64,
    max_iter: usize,
    factor: Option<BandCholesky>,
    scratch: Vec<f64>,
    last: Option<SolveStats>,
}

impl PoissonSolver {
    pub fn new(ops: &Operators, method: PoissonMethod, tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!(
                "Poisson tolerance must be positive, got {tol}"
            )));
        }
        let n = ops.dim();
        let use_cholesky = match method {
            PoissonMethod::Cg => false,
            PoissonMethod::Cholesky if n >= CHOLESKY_MAX_DOFS => {
                return Err(Error::Config(format!(
                    "direct Cholesky is limited to fewer than {CHOLESKY_MAX_DOFS} unknowns, got {n}"
                )))
            }
            PoissonMethod::Cholesky => true,
            PoissonMethod::Auto => n < CHOLESKY_MAX_DOFS,
        };
        let factor = if use_cholesky && n > 0 {
            Some(BandCholesky::factor(ops.stiffness())?)
        } else {
            None
        };
        Ok(Self {
            tol,
            max_iter,
            factor,
            scratch: vec![0.0; n],
            last: None,
        })
    }

    pub fn is_direct(&self) -> bool {
        self.factor.is_some()
    }

    /// Statistics of the most recent solve.
    pub fn last_stats(&self) -> Option<SolveStats> {
        self.last
    }

    /// Solves `K d = rhs`. The relative residual is checked against the
    /// tolerance for both methods.
    pub fn solve(&mut self, ops: &Operators, rhs: &[f64]) -> Result<Vec<f64>> {
        let k = ops.stiffness();
        if rhs.len() != k.dim() {
            return Err(Error::Dimension {
                expected: k.dim(),
                got: rhs.len(),
            });
        }
        let stats;
        let d = if let Some(factor) = &self.factor {
            let d = factor.solve(rhs)?;
            let b_norm = norm2(rhs);
            let res = if b_norm == 0.0 {
                0.0
            } else {
                let mut kd = vec![0.0; d.len()];
                k.mul_vec(&d, &mut kd);
                let r: Vec<f64> = rhs.iter().zip(&kd).map(|(b, a)| b - a).collect();
                norm2(&r) / b_norm
            };
            if res > self.tol {
                return Err(Error::SolverFailure {
                    solver: "banded Cholesky",
                    residual: res,
                    iterations: 1,
                });
            }
            stats = SolveStats {
                iterations: 1,
                relative_residual: res,
            };
            d
        } else {
            // zero initial guess: results must not depend on solve history
            self.scratch.fill(0.0);
            stats = conjugate_gradient(k, rhs, &mut self.scratch, self.tol, self.max_iter)?;
            self.scratch.clone()
        };
        self.last = Some(stats);
        Ok(d)
    }
}
