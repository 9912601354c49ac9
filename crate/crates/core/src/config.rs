//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Lists are comma separated. Unknown keys are rejected; missing
//! keys keep their defaults, which describe the Gaussian test problem on
//! [0, 5]^2 with a 25 x 25 mesh of degree 2 up to t = 0.1.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flows::{Scheme, SolverSettings};
use crate::mesh::{Mesh, Rect};
use crate::quadrature::MAX_DEGREE;

pub type FieldFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum InitialCondition {
    /// `amplitude * exp(-width * ((x - cx)^2 + (y - cy)^2))`
    Gaussian {
        amplitude: f64,
        width: f64,
        center: (f64, f64),
    },
    /// Programmatic hook; not expressible in config text.
    Custom { label: String, f: FieldFn },
}

impl InitialCondition {
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        match self {
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => Complex64::from(
                amplitude * (-width * ((x - center.0).powi(2) + (y - center.1).powi(2))).exp(),
            ),
            Self::Custom { f, .. } => f(x, y),
        }
    }

    pub fn interpolate(&self, mesh: &Mesh) -> Result<Vec<Complex64>> {
        mesh.interpolate(|x, y| self.eval(x, y))
    }
}

impl std::fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => f
                .debug_struct("Gaussian")
                .field("amplitude", amplitude)
                .field("width", width)
                .field("center", center)
                .finish(),
            Self::Custom { label, .. } => f.debug_struct("Custom").field("label", label).finish(),
        }
    }
}

impl PartialEq for InitialCondition {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Self::Gaussian {
                    amplitude: a1,
                    width: w1,
                    center: c1,
                },
                Self::Gaussian {
                    amplitude: a2,
                    width: w2,
                    center: c2,
                },
            ) => a1 == a2 && w1 == w2 && c1 == c2,
            (Self::Custom { f: f1, .. }, Self::Custom { f: f2, .. }) => Arc::ptr_eq(f1, f2),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub degree: usize,
    pub scheme: String,
    pub tau: f64,
    pub t_final: f64,
    pub adaptive: bool,
    pub adaptive_tol: f64,
    pub solver: SolverSettings,
    pub initial: InitialCondition,
    /// Defaults to `[t_final]` when not given.
    pub snapshot_times: Vec<f64>,
    pub output_dir: PathBuf,

    pub time_schemes: Vec<String>,
    pub time_taus: Vec<f64>,
    pub time_ref_scheme: String,
    pub time_ref_tau: f64,

    pub space_degrees: Vec<usize>,
    pub space_h: Vec<f64>,
    pub space_tau: f64,
    pub space_scheme: String,
    pub space_ref_degree: usize,
    pub space_ref_h: f64,

    pub poisson_degrees: Vec<usize>,
    pub poisson_h: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: Rect::square(0.0, 5.0),
            nx: 25,
            ny: 25,
            degree: 2,
            scheme: "strang".into(),
            tau: 5e-4,
            t_final: 0.1,
            adaptive: false,
            adaptive_tol: 1e-6,
            solver: SolverSettings::default(),
            initial: InitialCondition::Gaussian {
                amplitude: 10.0,
                width: 10.0,
                center: (2.5, 2.5),
            },
            snapshot_times: vec![0.1],
            output_dir: PathBuf::from("out"),
            time_schemes: Scheme::NAMES.iter().map(|s| s.to_string()).collect(),
            time_taus: vec![4e-3, 2e-3, 1e-3, 5e-4],
            time_ref_scheme: "blanes_moan4".into(),
            time_ref_tau: 3.125e-5,
            space_degrees: vec![1, 2],
            space_h: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            space_tau: 0.002,
            space_scheme: "strang".into(),
            space_ref_degree: 4,
            space_ref_h: 0.0625,
            poisson_degrees: vec![1, 2],
            poisson_h: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
        }
    }
}

fn parse_num<T: FromStr>(field: &str, v: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| Error::Validation {
        field: field.into(),
        msg: format!("cannot parse `{}`", v.trim()),
    })
}

fn parse_list<T: FromStr>(field: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(field, s))
        .collect()
}

fn parse_bool(field: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Validation {
            field: field.into(),
            msg: format!("expected a boolean, got `{other}`"),
        }),
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn invalid(field: &str, msg: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        msg: msg.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut snapshots_given = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            snapshots_given |= key == "snapshot_times";
            cfg.set(key, value.trim()).map_err(|e| match e {
                Error::Parse { msg, .. } => Error::Parse { line: idx + 1, msg },
                other => other,
            })?;
        }
        if !snapshots_given {
            cfg.snapshot_times = vec![cfg.t_final];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "domain" => {
                let d: Vec<f64> = parse_list(key, v)?;
                if d.len() != 4 {
                    return Err(invalid(key, "expected ax,bx,ay,by"));
                }
                self.domain = Rect::new(d[0], d[1], d[2], d[3]);
            }
            "nx" => self.nx = parse_num(key, v)?,
            "ny" => self.ny = parse_num(key, v)?,
            "p" => self.degree = parse_num(key, v)?,
            "scheme" => self.scheme = v.to_string(),
            "tau" => self.tau = parse_num(key, v)?,
            "t_final" => self.t_final = parse_num(key, v)?,
            "adaptive" => self.adaptive = parse_bool(key, v)?,
            "adaptive_tol" => self.adaptive_tol = parse_num(key, v)?,
            "expv_tol" => self.solver.expv_tol = parse_num(key, v)?,
            "krylov_dim" => self.solver.krylov_dim = parse_num(key, v)?,
            "poisson_solver" => self.solver.poisson = v.parse()?,
            "poisson_tol" => self.solver.poisson_tol = parse_num(key, v)?,
            "poisson_max_iter" => self.solver.poisson_max_iter = parse_num(key, v)?,
            "initial" => {
                if v != "gaussian" {
                    return Err(invalid(
                        key,
                        format!("only `gaussian` is available, got `{v}`"),
                    ));
                }
                if !matches!(self.initial, InitialCondition::Gaussian { .. }) {
                    self.initial = Self::default().initial;
                }
            }
            "gaussian_amplitude" | "gaussian_width" | "gaussian_center" => {
                let InitialCondition::Gaussian {
                    amplitude,
                    width,
                    center,
                } = &mut self.initial
                else {
                    return Err(invalid(key, "initial condition is not a Gaussian"));
                };
                match key {
                    "gaussian_amplitude" => *amplitude = parse_num(key, v)?,
                    "gaussian_width" => *width = parse_num(key, v)?,
                    _ => {
                        let c: Vec<f64> = parse_list(key, v)?;
                        if c.len() != 2 {
                            return Err(invalid(key, "expected x,y"));
                        }
                        *center = (c[0], c[1]);
                    }
                }
            }
            "snapshot_times" => self.snapshot_times = parse_list(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "time_schemes" => {
                self.time_schemes = v
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "time_taus" => self.time_taus = parse_list(key, v)?,
            "time_ref_scheme" => self.time_ref_scheme = v.to_string(),
            "time_ref_tau" => self.time_ref_tau = parse_num(key, v)?,
            "space_degrees" => self.space_degrees = parse_list(key, v)?,
            "space_h" => self.space_h = parse_list(key, v)?,
            "space_tau" => self.space_tau = parse_num(key, v)?,
            "space_scheme" => self.space_scheme = v.to_string(),
            "space_ref_degree" => self.space_ref_degree = parse_num(key, v)?,
            "space_ref_h" => self.space_ref_h = parse_num(key, v)?,
            "poisson_degrees" => self.poisson_degrees = parse_list(key, v)?,
            "poisson_h" => self.poisson_h = parse_list(key, v)?,
            _ => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.domain;
        if ![d.ax, d.bx, d.ay, d.by].iter().all(|v| v.is_finite()) || d.bx <= d.ax || d.by <= d.ay {
            return Err(invalid("domain", "need finite ax < bx and ay < by"));
        }
        let positive = |field: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        let degree = |field: &str, p: usize| -> Result<()> {
            if (1..=MAX_DEGREE).contains(&p) {
                Ok(())
            } else {
                Err(invalid(
                    field,
                    format!("degree must lie in 1..={MAX_DEGREE}, got {p}"),
                ))
            }
        };
        if self.nx == 0 {
            return Err(invalid("nx", "must be at least 1"));
        }
        if self.ny == 0 {
            return Err(invalid("ny", "must be at least 1"));
        }
        degree("p", self.degree)?;
        Scheme::by_name(&self.scheme).map_err(|e| invalid("scheme", e.to_string()))?;
        positive("tau", self.tau)?;
        positive("t_final", self.t_final)?;
        positive("adaptive_tol", self.adaptive_tol)?;
        positive("expv_tol", self.solver.expv_tol)?;
        positive("poisson_tol", self.solver.poisson_tol)?;
        if self.solver.krylov_dim < 2 {
            return Err(invalid("krylov_dim", "must be at least 2"));
        }
        if self.solver.poisson_max_iter == 0 {
            return Err(invalid("poisson_max_iter", "must be at least 1"));
        }
        if let InitialCondition::Gaussian {
            amplitude,
            width,
            center,
        } = &self.initial
        {
            if !amplitude.is_finite() {
                return Err(invalid("gaussian_amplitude", "must be finite"));
            }
            positive("gaussian_width", *width)?;
            if !(center.0.is_finite() && center.1.is_finite()) {
                return Err(invalid("gaussian_center", "must be finite"));
            }
        }
        for &t in &self.snapshot_times {
            if !(t.is_finite() && t >= 0.0 && t <= self.t_final * (1.0 + 1e-12)) {
                return Err(invalid(
                    "snapshot_times",
                    format!("{t} lies outside [0, t_final]"),
                ));
            }
        }
        for s in self
            .time_schemes
            .iter()
            .chain([&self.time_ref_scheme, &self.space_scheme])
        {
            Scheme::by_name(s).map_err(|e| invalid("time_schemes", e.to_string()))?;
        }
        for &t in &self.time_taus {
            positive("time_taus", t)?;
        }
        if self.time_taus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("time_taus", "must be strictly decreasing"));
        }
        positive("time_ref_tau", self.time_ref_tau)?;
        positive("space_tau", self.space_tau)?;
        positive("space_ref_h", self.space_ref_h)?;
        degree("space_ref_degree", self.space_ref_degree)?;
        for &p in self.space_degrees.iter().chain(&self.poisson_degrees) {
            degree("space_degrees", p)?;
        }
        for (field, hs) in [("space_h", &self.space_h), ("poisson_h", &self.poisson_h)] {
            for &h in hs.iter() {
                positive(field, h)?;
            }
            if hs.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid(field, "must be strictly decreasing"));
            }
        }
        Ok(())
    }

    pub fn domain_mesh(&self) -> Result<Mesh> {
        Mesh::new(self.domain, self.nx, self.ny, self.degree)
    }

    /// Full effective configuration in `key = value` form. Floats are
    /// printed in shortest round-trip form, so `parse(to_text())` reproduces
    /// the configuration exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let d = self.domain;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("domain", join(&[d.ax, d.bx, d.ay, d.by]));
        kv("nx", self.nx.to_string());
        kv("ny", self.ny.to_string());
        kv("p", self.degree.to_string());
        kv("scheme", self.scheme.clone());
        kv("tau", self.tau.to_string());
        kv("t_final", self.t_final.to_string());
        kv("adaptive", self.adaptive.to_string());
        kv("adaptive_tol", self.adaptive_tol.to_string());
        kv("expv_tol", self.solver.expv_tol.to_string());
        kv("krylov_dim", self.solver.krylov_dim.to_string());
        kv("poisson_solver", self.solver.poisson.to_string());
        kv("poisson_tol", self.solver.poisson_tol.to_string());
        kv("poisson_max_iter", self.solver.poisson_max_iter.to_string());
        match &self.initial {
            InitialCondition::Gaussian {
                amplitude,
                width,
                center,
            } => {
                kv("initial", "gaussian".into());
                kv("gaussian_amplitude", amplitude.to_string());
                kv("gaussian_width", width.to_string());
                kv("gaussian_center", join(&[center.0, center.1]));
            }
            InitialCondition::Custom { label, .. } => kv("# initial", format!("custom ({label})")),
        }
        kv("snapshot_times", join(&self.snapshot_times));
        kv("output_dir", self.output_dir.display().to_string());
        kv("time_schemes", self.time_schemes.join(","));
        kv("time_taus", join(&self.time_taus));
        kv("time_ref_scheme", self.time_ref_scheme.clone());
        kv("time_ref_tau", self.time_ref_tau.to_string());
        kv("space_degrees", join(&self.space_degrees));
        kv("space_h", join(&self.space_h));
        kv("space_tau", self.space_tau.to_string());
        kv("space_scheme", self.space_scheme.clone());
        kv("space_ref_degree", self.space_ref_degree.to_string());
        kv("space_ref_h", self.space_ref_h.to_string());
        kv("poisson_degrees", join(&self.poisson_degrees));
        kv("poisson_h", join(&self.poisson_h));
        s
    }

    /// `#`-prefixed copy of [`RunConfig::to_text`] for output headers.
    pub fn header(&self) -> String {
        self.to_text()
            .lines()
            .map(|l| {
                if l.starts_with('#') {
                    format!("{l}\n")
                } else {
                    format!("# {l}\n")
                }
            })
            .collect()
    }
}
