//! Library operators against brute-force dense references.

mod common;

use common::*;
use num_complex::Complex64;
use rand::Rng;
use splitpde::assembly::{
    compute_f, element_stiffness, potential_diagonal, select_stiffness_rule,
    STIFFNESS_EXACTNESS_TOL,
};
use splitpde::harness::h1_seminorm_error;
use splitpde::{ExpvWorkspace, Mesh, Operators, Propagator, Rect, SolverSettings, StiffnessRule};

const SMALL_MESHES: [(usize, usize, usize); 6] = [
    (2, 2, 1),
    (5, 5, 1),
    (3, 3, 2),
    (4, 4, 2),
    (2, 3, 3),
    (2, 2, 4),
];

fn ops(nx: usize, ny: usize, p: usize) -> Operators {
    Operators::new(Mesh::new(Rect::new(0.0, 5.0, -1.0, 3.0), nx, ny, p).unwrap()).unwrap()
}

#[test]
fn expv_matches_dense_exponential() {
    let mut r = rng(11);
    for (nx, ny, p) in SMALL_MESHES {
        let ops = ops(nx, ny, p);
        assert!(ops.dim() <= 50);
        let mut ws = ExpvWorkspace::new(60, 1e-12).unwrap();
        for tau in [1e-3, 0.05, 0.5, 2.0, -0.3] {
            let mut c = random_state(&mut r, ops.dim());
            let nrm = m_norm(ops.mass(), &c);
            c.iter_mut().for_each(|v| *v /= nrm);
            let y = ws.expv(&ops, tau, &c).unwrap();
            let exact = dense_expv(&ops, tau, &c);
            let err = m_dist(ops.mass(), &y, &exact);
            assert!(err <= 1e-10, "mesh {nx}x{ny} p={p} tau={tau}: {err:e}");
        }
    }
}

#[test]
fn single_unknown_exponential_is_a_phase() {
    // 2x2 unit squares with p = 1: M_00 = 1, K_00 = 8/3
    let ops = Operators::new(Mesh::new(Rect::square(0.0, 2.0), 2, 2, 1).unwrap()).unwrap();
    assert_eq!(ops.dim(), 1);
    assert!((ops.mass()[0] - 1.0).abs() < 1e-15);
    assert!((ops.stiffness().get(0, 0) - 8.0 / 3.0).abs() < 1e-14);
    let c = [Complex64::new(0.6, -0.8)];
    let tau = 0.37;
    let y = ExpvWorkspace::new(60, 1e-12)
        .unwrap()
        .expv(&ops, tau, &c)
        .unwrap();
    let expected = c[0] * Complex64::from_polar(1.0, -0.5 * tau * 8.0 / 3.0);
    assert!((y[0] - expected).norm() < 1e-14);

    // potential flow: d = -(3/8) M_00 |c_0|^2, c <- exp(-i tau d) c
    let mut prop = Propagator::new(&ops, &SolverSettings::default()).unwrap();
    let d = prop.potential(&c).unwrap();
    assert!((d[0] + 3.0 / 8.0 * c[0].norm_sqr()).abs() < 1e-15);
    let z = prop.phi_b(tau, &c).unwrap();
    assert!((z[0] - c[0] * Complex64::from_polar(1.0, -tau * d[0])).norm() < 1e-15);
}

#[test]
fn lagrange_oracle_agrees_with_basis() {
    for p in 1..=6 {
        let b = splitpde::GlBasis::new(p).unwrap();
        let l = lagrange_monomials(b.nodes());
        for x in [-0.93, -0.2, 0.0, 0.41, 0.999] {
            for (j, v) in eval_all(&l, x).into_iter().enumerate() {
                assert!(
                    (v - b.lagrange_eval(j, x)).abs() < 1e-11,
                    "p={p} j={j} x={x}"
                );
            }
        }
    }
}

#[test]
fn stiffness_matches_exact_integrals() {
    for p in 1..=6 {
        let (hx, hy) = (0.7, 1.9);
        let basis = splitpde::GlBasis::new(p).unwrap();
        let exact_e = exact_element_stiffness(basis.nodes(), hx, hy);
        let lobatto = element_stiffness(&basis, hx, hy, &basis.rule());
        let lobatto_dev = lobatto
            .iter()
            .enumerate()
            .map(|(k, v)| (v - exact_e[(k / exact_e.ncols(), k % exact_e.ncols())]).abs())
            .fold(0.0f64, f64::max);
        let (rule, _) = select_stiffness_rule(&basis, hx, hy);
        if lobatto_dev > STIFFNESS_EXACTNESS_TOL {
            assert_eq!(
                rule,
                StiffnessRule::GaussLegendre { points: p + 2 },
                "p={p}"
            );
        }

        let mesh = Mesh::new(Rect::new(0.0, 2.1, 0.0, 3.8), 3, 2, p).unwrap();
        let ops = Operators::new(mesh).unwrap();
        let k = dense_csr(&ops);
        let oracle = exact_stiffness(ops.mesh());
        let dev = (&k - &oracle).abs().max();
        assert!(dev <= 1e-12, "p={p}: {dev:e}");
    }
}

#[test]
fn potential_diagonal_matches_dense_quadrature() {
    let mut r = rng(5);
    for (nx, ny, p) in SMALL_MESHES {
        let ops = ops(nx, ny, p);
        let d: Vec<f64> = (0..ops.dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let phi = dense_phi(ops.mesh(), &d);
        let diag = potential_diagonal(&d);
        for i in 0..ops.dim() {
            for j in 0..ops.dim() {
                let expected = if i == j { diag[i] } else { 0.0 };
                let got = phi[(i, j)] / ops.mass()[i];
                assert!(
                    (got - expected).abs() <= 1e-13,
                    "({i},{j}): {got} vs {expected}"
                );
            }
        }
    }
}

#[test]
fn density_matches_dense_quadrature() {
    let mut r = rng(6);
    for (nx, ny, p) in SMALL_MESHES {
        let ops = ops(nx, ny, p);
        let c = random_state(&mut r, ops.dim());
        let f = compute_f(ops.mass(), &c);
        let oracle = dense_f(ops.mesh(), &c);
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in f.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-13 * scale.max(1.0));
        }
    }
}

#[test]
fn h1_error_matches_dense_quadratic_form() {
    let mut r = rng(7);
    for (nx, ny, p) in SMALL_MESHES {
        let ops = ops(nx, ny, p);
        let a = random_state(&mut r, ops.dim());
        let b = random_state(&mut r, ops.dim());
        let k = exact_stiffness(ops.mesh());
        let diff =
            nalgebra::DVector::from_iterator(ops.dim(), a.iter().zip(&b).map(|(x, y)| x - y));
        let kc = k.map(|v| Complex64::new(v, 0.0));
        let q = (diff.adjoint() * kc * &diff)[(0, 0)].re;
        let got = h1_seminorm_error(&a, &b, ops.stiffness()).unwrap();
        assert!(
            (got - q.sqrt()).abs() <= 1e-13 * q.sqrt(),
            "{got} vs {}",
            q.sqrt()
        );
        assert_eq!(h1_seminorm_error(&a, &a, ops.stiffness()).unwrap(), 0.0);
    }
}
