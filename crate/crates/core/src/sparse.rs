//! Compressed sparse row storage and the real linear solvers built on it.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row count above which matrix-vector products are split across threads.
/// Each row is still summed sequentially, so results do not depend on the
/// thread count.
const PAR_ROWS: usize = 4096;

/// Square CSR matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets. Duplicates
    /// are summed in input order, so identical input gives identical bits.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::Internal(format!(
                "triplet ({r}, {c}) outside a {n} x {n} matrix"
            )));
        }
        // stable: duplicates keep their input order
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).0.iter().map(move |&j| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        out
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    fn row_dot<T>(&self, i: usize, x: &[T]) -> T
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let (cols, vals) = self.row(i);
        cols.iter()
            .zip(vals)
            .fold(T::default(), |acc, (&j, &v)| acc + x[j] * v)
    }

    fn apply<T>(&self, x: &[T], y: &mut [T])
    where
        T: Copy
            + Default
            + Send
            + Sync
            + std::ops::Add<Output = T>
            + std::ops::Mul<f64, Output = T>,
    {
        assert_eq!(x.len(), self.n, "operand length");
        assert_eq!(y.len(), self.n, "output length");
        if self.n >= PAR_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        self.apply(x, y);
    }

    /// `y = A x` for complex `x`.
    pub fn mul_vec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.apply(x, y);
    }

    /// Writes the matrix in MatrixMarket coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Writes a diagonal matrix in MatrixMarket coordinate format.
pub fn write_diagonal_matrix_market<W: Write>(diag: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", diag.len(), diag.len(), diag.len())?;
    for (i, v) in diag.iter().enumerate() {
        writeln!(w, "{} {} {:.17e}", i + 1, i + 1, v)?;
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` (0 for a zero right-hand side).
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
///
/// `x` holds the initial guess on entry and the solution on exit.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.len(),
        });
    }
    if x.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| 1.0 / d).collect();
    if inv_diag.iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err(Error::Internal(
            "CG: matrix has a non-positive diagonal".into(),
        ));
    }

    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    loop {
        // (re)start from the true residual
        a.mul_vec(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let true_res = norm2(&r) / b_norm;
        if true_res <= tol {
            return Ok(SolveStats {
                iterations,
                relative_residual: true_res,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut res = true_res;
        while res > tol {
            if iterations >= max_iter {
                return Err(Error::SolverFailure {
                    solver: "conjugate gradient",
                    residual: res,
                    iterations,
                });
            }
            a.mul_vec(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                return Err(Error::Internal(format!(
                    "CG breakdown: p^T A p = {pq:.3e}, matrix not positive definite"
                )));
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
            res = norm2(&r) / b_norm;
        }
    }
}

/// Cholesky factor of a symmetric positive definite band matrix, stored as
/// the lower band row by row.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // l[i * (bw + 1) + (j + bw - i)] = L_ij for i - bw <= j <= i
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let stride = bw + 1;
        let mut l = vec![0.0; n * stride];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    l[i * stride + j + bw - i] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = l[i * stride + j + bw - i];
                for k in jlo..j {
                    s -= l[i * stride + k + bw - i] * l[j * stride + k + bw - j];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Internal(format!(
                            "Cholesky: non-positive pivot {s:.3e} at row {i}"
                        )));
                    }
                    l[i * stride + bw] = s.sqrt();
                } else {
                    l[i * stride + j + bw - i] = s / l[j * stride + bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: b.len(),
            });
        }
        let (n, bw, stride) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * stride + k + bw - i] * y[k];
            }
            y[i] = s / self.l[i * stride + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * stride + i + bw - k] * y[k];
            }
            y[i] = s / self.l[i * stride + bw];
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t).unwrap()
    }

    #[test]
    fn triplets_are_summed_and_sorted() {
        let a =
            CsrMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 1, 2.0), (0, 0, 1.0), (0, 1, 3.0)])
                .unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 5.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.row(0).0, &[0, 1]);
        assert!(CsrMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn cg_and_cholesky_agree() {
        let a = laplace_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; 50];
        let stats = conjugate_gradient(&a, &b, &mut x, 1e-13, 500).unwrap();
        assert!(stats.relative_residual <= 1e-12);
        let y = BandCholesky::factor(&a).unwrap().solve(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_reports_exhausted_budget() {
        let a = laplace_1d(200);
        let b = vec![1.0; 200];
        let mut x = vec![0.0; 200];
        let err = conjugate_gradient(&a, &b, &mut x, 1e-14, 3).unwrap_err();
        match err {
            Error::SolverFailure {
                iterations,
                residual,
                ..
            } => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-14);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn cg_detects_indefinite_matrix() {
        let a =
            CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 1.0), (0, 1, 2.0), (1, 0, 2.0)])
                .unwrap();
        let mut x = vec![0.0; 2];
        let err = conjugate_gradient(&a, &[1.0, -1.0], &mut x, 1e-12, 10).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
        assert!(BandCholesky::factor(&a).is_err());
    }

    #[test]
    fn matrix_market_layout() {
        let a = laplace_1d(2);
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[1], "2 2 4");
        assert!(lines[2].starts_with("1 1 2.0"));
    }
}
