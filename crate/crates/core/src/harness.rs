//! Convergence studies: temporal order per splitting scheme, spatial order
//! per polynomial degree, and a manufactured-solution check of the Poisson
//! solve.
//!
//! Observed orders are reported pairwise, `log(e_prev / e_cur) / log(h_prev /
//! h_cur)`, and as a least-squares slope of `log e` against `log h` over the
//! asymptotic window: the longest contiguous run of rows with decreasing
//! errors that stay at least [`FLOOR_FACTOR`] times above the solver floor.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::{assemble_mass_full, Operators};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flows::{Propagator, Scheme, Signal, SolverSettings, State};
use crate::mesh::{Mesh, Rect};
use crate::poisson::PoissonSolver;
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;

/// Errors below `FLOOR_FACTOR * floor` are excluded from order fits.
pub const FLOOR_FACTOR: f64 = 100.0;

/// Environment variable capping the number of concurrent sweep jobs.
pub const THREADS_ENV: &str = "SPLITPDE_THREADS";

/// `sqrt(sum M_ii |a_i - b_i|^2)`.
pub fn l2_error(a: &[Complex64], b: &[Complex64], mass: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != mass.len() {
        return Err(Error::Dimension {
            expected: mass.len(),
            got: if a.len() != mass.len() {
                a.len()
            } else {
                b.len()
            },
        });
    }
    Ok(a.iter()
        .zip(b)
        .zip(mass)
        .map(|((x, y), m)| m * (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Discrete H1 seminorm of the difference, `sqrt((a - b)^* K (a - b))`.
pub fn h1_seminorm_error(a: &[Complex64], b: &[Complex64], k: &CsrMatrix) -> Result<f64> {
    if a.len() != b.len() || a.len() != k.dim() {
        return Err(Error::Dimension {
            expected: k.dim(),
            got: if a.len() != k.dim() { a.len() } else { b.len() },
        });
    }
    let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut kd = vec![Complex64::default(); diff.len()];
    k.mul_vec_complex(&diff, &mut kd);
    let q: f64 = diff.iter().zip(&kd).map(|(d, e)| (d.conj() * e).re).sum();
    Ok(q.max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub param: f64,
    pub error_l2: f64,
    pub error_h1: Option<f64>,
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub label: String,
    pub nominal_order: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Errors below `FLOOR_FACTOR * floor` are considered solver-limited.
    pub floor: f64,
    pub window: Range<usize>,
    /// Least-squares slope over `window`, if it holds at least two rows.
    pub fitted_order: Option<f64>,
}

/// Pairwise observed orders; the first entry is always `None`.
pub fn observed_orders(params: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; params.len()];
    for i in 1..params.len() {
        let (e0, e1) = (errors[i - 1], errors[i]);
        if e0 > 0.0 && e1 > 0.0 {
            out[i] = Some((e0 / e1).ln() / (params[i - 1] / params[i]).ln());
        }
    }
    out
}

/// Longest contiguous run of rows whose errors decrease and stay at least
/// `FLOOR_FACTOR * floor`; the finer run wins ties.
pub fn asymptotic_window(errors: &[f64], floor: f64) -> Range<usize> {
    let usable = |i: usize| errors[i].is_finite() && errors[i] >= FLOOR_FACTOR * floor;
    let mut best = 0..0;
    let mut i = 0;
    while i < errors.len() {
        if !usable(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < errors.len() && usable(i + 1) && errors[i + 1] < errors[i] {
            i += 1;
        }
        if i + 1 - start >= best.len() {
            best = start..i + 1;
        }
        i += 1;
    }
    best
}

/// Least-squares slope of `log e` against `log param`.
pub fn fit_slope(params: &[f64], errors: &[f64]) -> Option<f64> {
    if params.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = params.iter().map(|p| p.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

impl ConvergenceTable {
    pub fn new(
        label: impl Into<String>,
        nominal_order: f64,
        params: &[f64],
        errors_l2: &[f64],
        errors_h1: Option<&[f64]>,
        floor: f64,
    ) -> Self {
        let orders = observed_orders(params, errors_l2);
        let rows = params
            .iter()
            .enumerate()
            .map(|(i, &param)| ConvergenceRow {
                param,
                error_l2: errors_l2[i],
                error_h1: errors_h1.map(|h| h[i]),
                observed_order: orders[i],
            })
            .collect();
        let window = asymptotic_window(errors_l2, floor);
        let fitted_order = fit_slope(&params[window.clone()], &errors_l2[window.clone()]);
        Self {
            label: label.into(),
            nominal_order,
            rows,
            floor,
            window,
            fitted_order,
        }
    }

    /// Pairwise orders whose both rows lie in the window.
    pub fn window_orders(&self) -> Vec<f64> {
        (self.window.start + 1..self.window.end)
            .filter_map(|i| self.rows[i].observed_order)
            .collect()
    }

    /// Rows with errors below the floor threshold, whose orders are not
    /// meaningful.
    pub fn unreliable_rows(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].error_l2 < FLOOR_FACTOR * self.floor)
            .collect()
    }

    /// Whether the fitted order lies within `tol` of the nominal order.
    pub fn passes(&self, tol: f64) -> bool {
        self.fitted_order
            .is_some_and(|q| (q - self.nominal_order).abs() <= tol)
    }

    /// CSV with `param,error_l2,error_h1,observed_order`, preceded by the
    /// `#`-prefixed `header`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::new();
        s.push_str(header);
        let _ = writeln!(s, "# table = {}", self.label);
        let _ = writeln!(s, "# nominal_order = {}", self.nominal_order);
        let _ = writeln!(s, "# floor = {:e}", self.floor);
        let _ = writeln!(s, "# window = {}..{}", self.window.start, self.window.end);
        match self.fitted_order {
            Some(q) => {
                let _ = writeln!(s, "# fitted_order = {q:.6}");
            }
            None => {
                let _ = writeln!(s, "# fitted_order = none");
            }
        }
        s.push_str("param,error_l2,error_h1,observed_order\n");
        for r in &self.rows {
            let h1 = r.error_h1.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let q = r
                .observed_order
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default();
            let _ = writeln!(s, "{:e},{:.16e},{h1},{q}", r.param, r.error_l2);
        }
        s
    }
}

/// Runs independent jobs in parallel, returning results in input order.
/// Concurrency is capped by `SPLITPDE_THREADS` when set.
pub fn run_jobs<T, R, F>(jobs: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            pool.install(|| jobs.into_par_iter().map(&f).collect())
        }
        None => jobs.into_par_iter().map(&f).collect(),
    }
}

fn run_to_final(
    ops: &Operators,
    settings: &SolverSettings,
    scheme: &Scheme,
    tau: f64,
    t_final: f64,
    initial: &[Complex64],
) -> Result<State> {
    let mut prop = Propagator::new(ops, settings)?;
    let ev = prop.evolve(
        scheme,
        tau,
        t_final,
        &State::new(initial.to_vec(), 0.0),
        &mut |_, _| Signal::Continue,
    )?;
    Ok(ev.state)
}

/// Global time-splitting error at `t_final` on the configured mesh for each
/// scheme and step size, against one reference run.
pub fn temporal_study(
    cfg: &RunConfig,
    schemes: &[Scheme],
    taus: &[f64],
    reference: (&Scheme, f64),
) -> Result<Vec<ConvergenceTable>> {
    let ops = Operators::new(cfg.domain_mesh()?)?;
    let psi0 = cfg.initial.interpolate(ops.mesh())?;
    let norm0 = ops.m_norm(&psi0);
    let settings = cfg.solver;

    let mut jobs: Vec<(Scheme, f64)> = vec![(reference.0.clone(), reference.1)];
    for s in schemes {
        for &tau in taus {
            jobs.push((s.clone(), tau));
        }
    }
    let finals = run_jobs(jobs, |(scheme, tau)| {
        run_to_final(&ops, &settings, &scheme, tau, cfg.t_final, &psi0)
    })?;
    let reference_state = &finals[0];

    let floor = settings.expv_tol.max(settings.poisson_tol) * norm0;
    let mut tables = Vec::with_capacity(schemes.len());
    for (k, s) in schemes.iter().enumerate() {
        let states = &finals[1 + k * taus.len()..1 + (k + 1) * taus.len()];
        let mut l2 = Vec::with_capacity(taus.len());
        let mut h1 = Vec::with_capacity(taus.len());
        for st in states {
            l2.push(l2_error(&st.coeffs, &reference_state.coeffs, ops.mass())?);
            h1.push(h1_seminorm_error(
                &st.coeffs,
                &reference_state.coeffs,
                ops.stiffness(),
            )?);
        }
        tables.push(ConvergenceTable::new(
            s.name(),
            s.order() as f64,
            taus,
            &l2,
            Some(&h1),
            floor,
        ));
    }
    Ok(tables)
}

/// L2 distance between a finite element function on `coarse` and one on
/// `fine`, using the fine mesh's nodes and lumped quadrature. Boundary values
/// are zero on both.
pub fn cross_mesh_l2_error(
    coarse: &Mesh,
    coarse_coeffs: &[Complex64],
    fine: &Mesh,
    fine_coeffs: &[Complex64],
) -> Result<f64> {
    let mass = assemble_mass_full(fine);
    let mut sum = 0.0;
    for (k, &g) in fine.interior().iter().enumerate() {
        let (x, y) = fine.node_coords(g)?;
        let u = coarse.evaluate(coarse_coeffs, x, y)?;
        sum += mass[g] * (u - fine_coeffs[k]).norm_sqr();
    }
    // boundary nodes of the fine mesh also lie on the coarse boundary
    Ok(sum.sqrt())
}

/// Spatial discretization error at `t_final` with a fixed time step, for each
/// degree and mesh spacing, against a run on `reference_mesh`.
pub fn spatial_study(
    cfg: &RunConfig,
    degrees: &[usize],
    spacings: &[f64],
    tau: f64,
    scheme: &Scheme,
    reference: (usize, f64),
) -> Result<Vec<ConvergenceTable>> {
    let settings = cfg.solver;
    let mut jobs: Vec<(usize, f64)> = vec![reference];
    for &p in degrees {
        for &h in spacings {
            jobs.push((p, h));
        }
    }
    let solved = run_jobs(jobs, |(p, h)| -> Result<(Mesh, Vec<Complex64>, f64)> {
        let ops = Operators::new(Mesh::with_spacing(cfg.domain, h, p)?)?;
        let psi0 = cfg.initial.interpolate(ops.mesh())?;
        let norm0 = ops.m_norm(&psi0);
        let st = run_to_final(&ops, &settings, scheme, tau, cfg.t_final, &psi0)?;
        Ok((ops.mesh().clone(), st.coeffs, norm0))
    })?;
    let (ref_mesh, ref_coeffs, ref_norm) = &solved[0];
    let floor = settings.expv_tol.max(settings.poisson_tol) * ref_norm;

    let errors = run_jobs((1..solved.len()).collect(), |i| {
        let (mesh, coeffs, _) = &solved[i];
        cross_mesh_l2_error(mesh, coeffs, ref_mesh, ref_coeffs)
    })?;
    let mut tables = Vec::with_capacity(degrees.len());
    for (k, &p) in degrees.iter().enumerate() {
        let e = &errors[k * spacings.len()..(k + 1) * spacings.len()];
        if !finest_is_smallest(spacings, e) {
            // the reference is not accurate enough to rank the finest mesh
            return Err(Error::Validation {
                field: "space_ref_h".into(),
                msg: format!("p={p}: error on the finest mesh is not the smallest, {e:?}"),
            });
        }
        tables.push(ConvergenceTable::new(
            format!("p={p}"),
            (p + 1) as f64,
            spacings,
            e,
            None,
            floor,
        ));
    }
    Ok(tables)
}

/// Whether the error at the smallest parameter is strictly below all others.
pub fn finest_is_smallest(params: &[f64], errors: &[f64]) -> bool {
    let Some(finest) = (0..params.len()).min_by(|&a, &b| params[a].total_cmp(&params[b])) else {
        return false;
    };
    (0..errors.len()).all(|i| i == finest || errors[finest] < errors[i])
}

/// Manufactured solution `u = sin(pi x / 5) sin(pi y / 5)` on [0, 5]^2.
pub fn manufactured_u(x: f64, y: f64) -> f64 {
    (PI * x / 5.0).sin() * (PI * y / 5.0).sin()
}

/// `Δu` for [`manufactured_u`].
pub fn manufactured_f(x: f64, y: f64) -> f64 {
    -2.0 * (PI / 5.0).powi(2) * manufactured_u(x, y)
}

fn manufactured_grad(x: f64, y: f64) -> (f64, f64) {
    let k = PI / 5.0;
    (
        k * (k * x).cos() * (k * y).sin(),
        k * (k * x).sin() * (k * y).cos(),
    )
}

/// Outcome of one manufactured Poisson solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonCheck {
    pub error_l2: f64,
    pub error_h1: f64,
    pub residual: f64,
}

/// Solves `K d = -M f` for the manufactured forcing, so that `d`
/// approximates `u`, and measures the L2 and H1-seminorm errors against the
/// analytic solution with a `p + 3` point Gauss-Legendre rule per element.
pub fn poisson_check(mesh: Mesh, settings: &SolverSettings) -> Result<PoissonCheck> {
    let ops = Operators::new(mesh)?;
    let mesh = ops.mesh();
    let rhs: Vec<f64> = mesh
        .interior_coords()
        .iter()
        .zip(ops.mass())
        .map(|(&(x, y), m)| -m * manufactured_f(x, y))
        .collect();
    let mut solver = PoissonSolver::new(
        &ops,
        settings.poisson,
        settings.poisson_tol,
        settings.poisson_max_iter,
    )?;
    let d = solver.solve(&ops, &rhs)?;
    let residual = solver.last_stats().map_or(0.0, |s| s.relative_residual);

    let basis = mesh.basis();
    let n = basis.len();
    let rule = QuadratureRule::gauss_legendre(basis.degree() + 3)?;
    let nq = rule.len();
    let mut val = vec![0.0; n * nq];
    let mut der = vec![0.0; n * nq];
    for (q, &x) in rule.points.iter().enumerate() {
        for a in 0..n {
            val[a * nq + q] = basis.lagrange_eval(a, x);
            der[a * nq + q] = basis.lagrange_deriv(a, x);
        }
    }
    let (sx, sy) = (2.0 / mesh.hx(), 2.0 / mesh.hy());
    let jac = mesh.jac_det();
    let d0 = mesh.domain();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    let mut local = vec![0.0; n * n];
    for ey in 0..mesh.ny() {
        for ex in 0..mesh.nx() {
            for (l, g) in mesh.element_nodes(ex, ey).into_iter().enumerate() {
                local[l] = mesh.interior_index(g).map_or(0.0, |k| d[k]);
            }
            for qy in 0..nq {
                for qx in 0..nq {
                    let (mut u, mut ux, mut uy) = (0.0, 0.0, 0.0);
                    for j in 0..n {
                        for i in 0..n {
                            let c = local[i + j * n];
                            u += c * val[i * nq + qx] * val[j * nq + qy];
                            ux += c * der[i * nq + qx] * val[j * nq + qy];
                            uy += c * val[i * nq + qx] * der[j * nq + qy];
                        }
                    }
                    let x = d0.ax + (ex as f64 + 0.5 * (rule.points[qx] + 1.0)) * mesh.hx();
                    let y = d0.ay + (ey as f64 + 0.5 * (rule.points[qy] + 1.0)) * mesh.hy();
                    let w = rule.weights[qx] * rule.weights[qy] * jac;
                    let (gx, gy) = manufactured_grad(x, y);
                    l2 += w * (u - manufactured_u(x, y)).powi(2);
                    h1 += w * ((sx * ux - gx).powi(2) + (sy * uy - gy).powi(2));
                }
            }
        }
    }
    Ok(PoissonCheck {
        error_l2: l2.sqrt(),
        error_h1: h1.sqrt(),
        residual,
    })
}

/// Manufactured-solution convergence of the Poisson solve on [0, 5]^2.
/// Returns one table per degree and the largest relative residual seen.
pub fn poisson_study(
    degrees: &[usize],
    spacings: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<ConvergenceTable>, f64)> {
    let mut jobs = Vec::new();
    for &p in degrees {
        for &h in spacings {
            jobs.push((p, h));
        }
    }
    let checks = run_jobs(jobs, |(p, h)| {
        poisson_check(Mesh::with_spacing(Rect::square(0.0, 5.0), h, p)?, settings)
    })?;
    let max_res = checks.iter().fold(0.0f64, |m, c| m.max(c.residual));
    let tables = degrees
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let c = &checks[k * spacings.len()..(k + 1) * spacings.len()];
            let l2: Vec<f64> = c.iter().map(|c| c.error_l2).collect();
            let h1: Vec<f64> = c.iter().map(|c| c.error_h1).collect();
            ConvergenceTable::new(
                format!("p={p}"),
                (p + 1) as f64,
                spacings,
                &l2,
                Some(&h1),
                settings.poisson_tol,
            )
        })
        .collect();
    Ok((tables, max_res))
}
