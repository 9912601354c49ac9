//! Discrete subflows, splitting schemes and the time loop.
//!
//! The kinetic subflow `phi_A` propagates `M c' = -(i/2) K c` with the Krylov
//! exponential. The potential subflow `phi_B` solves `K d = -F(c)` once and
//! then multiplies each coefficient by `exp(-i tau d_j)`, since the modulus
//! (and hence the potential) is invariant along that flow.
//!
//! A scheme is a list of stages `(a_k, b_k)`; one step of size `tau` applies
//! `c <- phi_B(b_k tau, phi_A(a_k tau, c))` for each stage in order.

use num_complex::Complex64;

use crate::assembly::{compute_f, potential_diagonal, Operators};
use crate::error::{Error, Result};
use crate::krylov::{m_norm, ExpvStats, ExpvWorkspace, DEFAULT_EXPV_TOL, DEFAULT_KRYLOV_DIM};
use crate::poisson::{PoissonMethod, PoissonSolver};

/// Upper bound on stages per scheme.
pub const MAX_STAGES: usize = 16;

/// Discrete wave function: coefficients over the unknowns and the time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub coeffs: Vec<Complex64>,
    pub t: f64,
}

impl State {
    pub fn new(coeffs: Vec<Complex64>, t: f64) -> Self {
        Self { coeffs, t }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Splitting composition with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    name: String,
    stages: Vec<(f64, f64)>,
    order: u32,
}

impl Scheme {
    pub const NAMES: [&'static str; 4] = ["lie", "strang", "ruth3", "blanes_moan4"];

    pub fn new(name: impl Into<String>, stages: Vec<(f64, f64)>, order: u32) -> Result<Self> {
        let name = name.into();
        if stages.is_empty() || stages.len() > MAX_STAGES {
            return Err(Error::Config(format!(
                "scheme `{name}` must have 1..={MAX_STAGES} stages, got {}",
                stages.len()
            )));
        }
        if order == 0 {
            return Err(Error::Config(format!(
                "scheme `{name}` needs a positive order"
            )));
        }
        let (sa, sb) = stages
            .iter()
            .fold((0.0, 0.0), |(sa, sb), (a, b)| (sa + a, sb + b));
        if (sa - 1.0).abs() > 1e-14 || (sb - 1.0).abs() > 1e-14 {
            return Err(Error::Config(format!(
                "scheme `{name}` is inconsistent: coefficient sums {sa}, {sb}"
            )));
        }
        Ok(Self {
            name,
            stages,
            order,
        })
    }

    /// Lie-Trotter, first order.
    pub fn lie() -> Self {
        Self::new("lie", vec![(1.0, 1.0)], 1).expect("valid table")
    }

    /// Strang, second order: `A(tau/2) B(tau) A(tau/2)`.
    pub fn strang() -> Self {
        Self::new("strang", vec![(0.5, 1.0), (0.5, 0.0)], 2).expect("valid table")
    }

    /// Ruth's third-order composition with rational coefficients.
    pub fn ruth3() -> Self {
        Self::new(
            "ruth3",
            vec![
                (7.0 / 24.0, 2.0 / 3.0),
                (3.0 / 4.0, -2.0 / 3.0),
                (-1.0 / 24.0, 1.0),
            ],
            3,
        )
        .expect("valid table")
    }

    /// Blanes-Moan optimized symmetric fourth-order composition (six
    /// potential stages, seven kinetic stages).
    pub fn blanes_moan4() -> Self {
        let a1 = 0.079_203_696_431_195_7;
        let a2 = 0.353_172_906_049_774;
        let a3 = -0.042_065_080_357_719_5;
        let a4 = 1.0 - 2.0 * (a1 + a2 + a3);
        let b1 = 0.209_515_106_613_362;
        let b2 = -0.143_851_773_179_818;
        let b3 = 0.5 - (b1 + b2);
        Self::new(
            "blanes_moan4",
            vec![
                (a1, b1),
                (a2, b2),
                (a3, b3),
                (a4, b3),
                (a3, b2),
                (a2, b1),
                (a1, 0.0),
            ],
            4,
        )
        .expect("valid table")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "lie" => Ok(Self::lie()),
            "strang" => Ok(Self::strang()),
            "ruth3" => Ok(Self::ruth3()),
            "blanes_moan4" => Ok(Self::blanes_moan4()),
            _ => Err(Error::Config(format!(
                "unknown scheme `{name}` (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> &[(f64, f64)] {
        &self.stages
    }

    pub fn order(&self) -> u32 {
        self.order
    }
}

/// Solver settings shared by every propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub expv_tol: f64,
    pub krylov_dim: usize,
    pub poisson: PoissonMethod,
    pub poisson_tol: f64,
    pub poisson_max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            expv_tol: DEFAULT_EXPV_TOL,
            krylov_dim: DEFAULT_KRYLOV_DIM,
            poisson: PoissonMethod::Cg,
            poisson_tol: 1e-12,
            poisson_max_iter: 20_000,
        }
    }
}

/// Per-step diagnostics handed to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub t: f64,
    pub norm: f64,
}

/// Observer verdict after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Continue,
    /// Continue and store a copy of the current state in the trajectory.
    Snapshot,
    Abort,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: State,
    pub steps: usize,
    /// Time step actually used (after snapping to the final time).
    pub tau: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub trajectory: Vec<State>,
}

impl Evolution {
    pub fn relative_norm_drift(&self) -> f64 {
        (self.final_norm - self.initial_norm).abs() / self.initial_norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveStep {
    pub t: f64,
    pub tau: f64,
    pub estimate: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct AdaptiveEvolution {
    pub state: State,
    pub log: Vec<AdaptiveStep>,
}

impl AdaptiveEvolution {
    pub fn accepted(&self) -> impl Iterator<Item = &AdaptiveStep> {
        self.log.iter().filter(|s| s.accepted)
    }

    pub fn rejected_count(&self) -> usize {
        self.log.iter().filter(|s| !s.accepted).count()
    }

    pub fn max_accepted_estimate(&self) -> f64 {
        self.accepted().fold(0.0, |m, s| m.max(s.estimate))
    }
}

/// Owns the solver handles for one discretization. One propagator per thread.
pub struct Propagator<'a> {
    ops: &'a Operators,
    poisson: PoissonSolver,
    krylov: ExpvWorkspace,
    poisson_solves: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(ops: &'a Operators, settings: &SolverSettings) -> Result<Self> {
        Ok(Self {
            ops,
            poisson: PoissonSolver::new(
                ops,
                settings.poisson,
                settings.poisson_tol,
                settings.poisson_max_iter,
            )?,
            krylov: ExpvWorkspace::new(settings.krylov_dim, settings.expv_tol)?,
            poisson_solves: 0,
        })
    }

    pub fn ops(&self) -> &'a Operators {
        self.ops
    }

    pub fn expv_stats(&self) -> ExpvStats {
        self.krylov.stats()
    }

    pub fn expv_tol(&self) -> f64 {
        self.krylov.tol()
    }

    pub fn poisson_solves(&self) -> usize {
        self.poisson_solves
    }

    pub fn poisson_solver(&self) -> &PoissonSolver {
        &self.poisson
    }

    pub fn norm(&self, c: &[Complex64]) -> f64 {
        m_norm(self.ops.mass(), c)
    }

    /// Kinetic subflow over `tau`.
    pub fn phi_a(&mut self, tau: f64, c: &[Complex64]) -> Result<Vec<Complex64>> {
        self.krylov.expv(self.ops, tau, c)
    }

    /// Self-consistent potential `d` solving `K d = -F(c)`.
    pub fn potential(&mut self, c: &[Complex64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = compute_f(self.ops.mass(), c).iter().map(|f| -f).collect();
        self.poisson_solves += 1;
        self.poisson.solve(self.ops, &rhs)
    }

    /// Potential subflow over `tau`.
    pub fn phi_b(&mut self, tau: f64, c: &[Complex64]) -> Result<Vec<Complex64>> {
        if c.len() != self.ops.dim() {
            return Err(Error::Dimension {
                expected: self.ops.dim(),
                got: c.len(),
            });
        }
        let d = potential_diagonal(&self.potential(c)?);
        Ok(c.iter()
            .zip(&d)
            .map(|(ci, di)| ci * Complex64::from_polar(1.0, -tau * di))
            .collect())
    }

    /// One step of `scheme`; advances `state.t` by `tau`. Zero-coefficient
    /// substeps are skipped.
    pub fn step(&mut self, scheme: &Scheme, tau: f64, state: &State) -> Result<State> {
        let mut c = state.coeffs.clone();
        for &(a, b) in scheme.stages() {
            if a != 0.0 {
                c = self.phi_a(a * tau, &c)?;
            }
            if b != 0.0 {
                c = self.phi_b(b * tau, &c)?;
            }
        }
        Ok(State::new(c, state.t + tau))
    }

    /// Fixed-step integration to `t_final`. The step is snapped to
    /// `t_final / round(t_final / tau)` so the final time is hit exactly.
    pub fn evolve(
        &mut self,
        scheme: &Scheme,
        tau: f64,
        t_final: f64,
        initial: &State,
        observer: &mut dyn FnMut(&StepInfo, &State) -> Signal,
    ) -> Result<Evolution> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!(
                "time step must be positive, got {tau}"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Config(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        let steps = ((t_final / tau).round() as usize).max(1);
        let tau = t_final / steps as f64;
        let t0 = initial.t;
        let initial_norm = self.norm(&initial.coeffs);
        let mut state = initial.clone();
        let mut trajectory = Vec::new();
        for n in 1..=steps {
            state = self.step(scheme, tau, &state)?;
            state.t = t0 + n as f64 * tau;
            if !state.is_finite() {
                return Err(Error::NonFinite {
                    step: n,
                    t: state.t,
                });
            }
            let info = StepInfo {
                step: n,
                t: state.t,
                norm: self.norm(&state.coeffs),
            };
            match observer(&info, &state) {
                Signal::Continue => {}
                Signal::Snapshot => trajectory.push(state.clone()),
                Signal::Abort => return Err(Error::Aborted { step: n }),
            }
        }
        let final_norm = self.norm(&state.coeffs);
        Ok(Evolution {
            state,
            steps,
            tau,
            initial_norm,
            final_norm,
            trajectory,
        })
    }

    /// Step-doubling adaptive integration. Each trial compares one step of
    /// size `tau` with two steps of size `tau/2`; the estimate is
    /// `||big - small||_M / (2^q - 1)`. Accepted steps keep the single-step
    /// result. The step never exceeds `tau0`.
    pub fn evolve_adaptive(
        &mut self,
        scheme: &Scheme,
        tau0: f64,
        t_final: f64,
        tol: f64,
        initial: &State,
    ) -> Result<AdaptiveEvolution> {
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::Config(format!(
                "initial step must be positive, got {tau0}"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Config(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let q = scheme.order() as i32;
        let denom = 2f64.powi(q) - 1.0;
        let t_end = initial.t + t_final;
        let mut state = initial.clone();
        let mut tau = tau0;
        let mut log = Vec::new();
        let mut accepted = 0usize;
        loop {
            let remaining = t_end - state.t;
            if remaining <= 1e-14 * t_final {
                break;
            }
            let last = remaining <= tau * (1.0 + 1e-10);
            let h = if last { remaining } else { tau };
            if h < 1e-12 * t_final {
                return Err(Error::Stagnation { t: state.t, tau: h });
            }
            let big = self.step(scheme, h, &state)?;
            let half = self.step(scheme, 0.5 * h, &state)?;
            let small = self.step(scheme, 0.5 * h, &half)?;
            let diff: Vec<Complex64> = big
                .coeffs
                .iter()
                .zip(&small.coeffs)
                .map(|(a, b)| a - b)
                .collect();
            let est = self.norm(&diff) / denom;
            let ok = est <= tol;
            log.push(AdaptiveStep {
                t: state.t,
                tau: h,
                estimate: est,
                accepted: ok,
            });
            let factor = if est == 0.0 {
                4.0
            } else {
                (0.9 * (tol / est).powf(1.0 / (q as f64 + 1.0))).clamp(0.25, 4.0)
            };
            if ok {
                accepted += 1;
                state = big;
                if last {
                    state.t = t_end;
                }
                if !state.is_finite() {
                    return Err(Error::NonFinite {
                        step: accepted,
                        t: state.t,
                    });
                }
                if !last {
                    tau = (h * factor).min(tau0);
                }
            } else {
                tau = h * factor.min(1.0);
                if tau < 1e-12 * t_final {
                    return Err(Error::Stagnation { t: state.t, tau });
                }
            }
        }
        Ok(AdaptiveEvolution { state, log })
    }
}
