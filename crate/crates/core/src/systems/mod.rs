//! Optimal-control problem definitions and the built-in benchmark systems.

mod benchmarks;
mod models;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use benchmarks::load_benchmark;
pub use models::{BipedParams, CartPoleParams, LinkModel, ManipulatorParams};

use crate::serde_util::row_major;

/// Gravitational acceleration used by every built-in model (m/s²).
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

/// The four systems shipped with the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkId {
    Cartpole,
    Biped3,
    Manip2,
    Manip3,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 4] = [
        BenchmarkId::Cartpole,
        BenchmarkId::Biped3,
        BenchmarkId::Manip2,
        BenchmarkId::Manip3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkId::Cartpole => "cartpole",
            BenchmarkId::Biped3 => "biped3",
            BenchmarkId::Manip2 => "manip2",
            BenchmarkId::Manip3 => "manip3",
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkId {
    type Err = SystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchmarkId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| SystemError::Config(format!("unknown benchmark `{s}`")))
    }
}

/// Built-in dynamics models. Custom systems pick one of these by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Dynamics {
    CartPole(CartPoleParams),
    Biped(BipedParams),
    Manipulator(ManipulatorParams),
    /// `ẋ = A x + B u`, mostly useful for tests and sanity checks.
    Linear {
        #[serde(with = "row_major")]
        a: DMatrix<f64>,
        #[serde(with = "row_major")]
        b: DMatrix<f64>,
    },
}

impl Dynamics {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Dynamics::CartPole(_) => (4, 2),
            Dynamics::Biped(_) => (6, 4),
            Dynamics::Manipulator(p) => (2 * p.masses.len(), p.masses.len()),
            Dynamics::Linear { a, b } => (a.nrows(), b.ncols()),
        }
    }

    fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<(), SystemError> {
        match self {
            Dynamics::CartPole(p) => {
                p.eval(x, u, out);
                Ok(())
            }
            Dynamics::Biped(p) => p.eval(x, u, out),
            Dynamics::Manipulator(p) => p.eval(x, u, out),
            Dynamics::Linear { a, b } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, xj) in x.iter().enumerate() {
                        acc += a[(i, j)] * xj;
                    }
                    for (j, uj) in u.iter().enumerate() {
                        acc += b[(i, j)] * uj;
                    }
                    *o = acc;
                }
                Ok(())
            }
        }
    }
}

/// Axis-aligned box, one `[lo, hi]` pair per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoxDomain(pub Vec<[f64; 2]>);

impl BoxDomain {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.0[i][0]
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.0[i][1]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.0[i][1] - self.0[i][0]
    }

    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        const SLACK: f64 = 1e-12;
        x.iter()
            .zip(&self.0)
            .all(|(v, [lo, hi])| *v >= lo - SLACK && *v <= hi + SLACK)
    }

    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        other.0.iter().zip(&self.0).all(|(inner, outer)| {
            inner[0] >= outer[0] - 1e-12 && inner[1] <= outer[1] + 1e-12
        })
    }

    /// Corners in canonical order: corner `s` takes the upper bound on axis `i`
    /// iff bit `n-1-i` of `s` is set, so axis 0 varies slowest.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|s| {
                (0..n)
                    .map(|i| {
                        if s >> (n - 1 - i) & 1 == 1 {
                            self.hi(i)
                        } else {
                            self.lo(i)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        self.0.iter().map(|[lo, hi]| (hi - lo).powi(2)).sum::<f64>().sqrt()
    }
}

/// Named group of state or input indices (a pseudo-state or pseudo-input).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub indices: Vec<usize>,
}

impl Group {
    pub fn new(name: impl Into<String>, indices: Vec<usize>) -> Self {
        Group {
            name: name.into(),
            indices,
        }
    }
}

/// A discounted, quadratic-cost optimal control problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSystem {
    pub name: String,
    pub dynamics: Dynamics,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    pub goal_state: Vec<f64>,
    pub goal_input: Vec<f64>,
    #[serde(with = "row_major")]
    pub q: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub r: DMatrix<f64>,
    pub lambda: f64,
    pub s_full: BoxDomain,
    pub s_eval: BoxDomain,
    pub grid_shape: Vec<usize>,
    #[serde(default)]
    pub periodic_axes: Vec<usize>,
    pub state_groups: Vec<Group>,
    pub input_groups: Vec<Group>,
    /// Horizon (s) of DDP solves and estimate rollouts.
    pub horizon: f64,
    /// Time step (s) of DDP solves and estimate rollouts.
    pub dt: f64,
}

impl ControlSystem {
    pub fn n(&self) -> usize {
        self.goal_state.len()
    }

    pub fn m(&self) -> usize {
        self.goal_input.len()
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic_axes.contains(&axis)
    }

    pub fn periodic_mask(&self) -> Vec<bool> {
        (0..self.n()).map(|i| self.is_periodic(i)).collect()
    }

    /// Parses a system definition document and checks its invariants.
    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        let sys: ControlSystem = serde_json::from_str(text)
            .map_err(|e| SystemError::Config(format!("invalid system definition: {e}")))?;
        sys.check()?;
        Ok(sys)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }

    /// Checks the structural invariants of the problem definition.
    pub fn check(&self) -> Result<(), SystemError> {
        let (n, m) = (self.n(), self.m());
        let cfg = |msg: String| Err(SystemError::Config(msg));
        if self.dynamics.dims() != (n, m) {
            return cfg(format!(
                "dynamics dimension {:?} does not match goal dimension ({n}, {m})",
                self.dynamics.dims()
            ));
        }
        if self.input_lower.len() != m || self.input_upper.len() != m {
            return cfg("input bounds have wrong length".into());
        }
        for i in 0..m {
            let (lo, hi, g) = (self.input_lower[i], self.input_upper[i], self.goal_input[i]);
            if !(lo <= g && g <= hi) {
                return cfg(format!("goal input {i} = {g} outside [{lo}, {hi}]"));
            }
        }
        if self.q.shape() != (n, n) || self.r.shape() != (m, m) {
            return cfg("cost matrices have wrong shape".into());
        }
        if !is_symmetric(&self.q) || !is_symmetric(&self.r) {
            return cfg("cost matrices must be symmetric".into());
        }
        let q_min = self.q.clone().symmetric_eigenvalues().min();
        let r_min = self.r.clone().symmetric_eigenvalues().min();
        if q_min < -1e-12 {
            return cfg("Q must be positive semidefinite".into());
        }
        if r_min <= 0.0 {
            return cfg("R must be positive definite".into());
        }
        if !(self.lambda > 0.0) {
            return cfg("discount rate must be positive".into());
        }
        if self.s_full.dim() != n || self.s_eval.dim() != n || self.grid_shape.len() != n {
            return cfg("boxes and grid shape must have one entry per state".into());
        }
        if self.s_full.0.iter().any(|[lo, hi]| !(lo < hi)) {
            return cfg("S_full must have positive width on every axis".into());
        }
        if self.grid_shape.iter().any(|&k| k < 2) {
            return cfg("every grid axis needs at least two points".into());
        }
        if !self.s_full.contains(&self.goal_state) {
            return cfg("goal state outside S_full".into());
        }
        if !self.s_full.contains_box(&self.s_eval) {
            return cfg("S_eval must lie inside S_full".into());
        }
        if self.periodic_axes.iter().any(|&a| a >= n) {
            return cfg("periodic axis out of range".into());
        }
        check_partition(&self.state_groups, n, "state")?;
        check_partition(&self.input_groups, m, "input")?;
        if !(self.horizon > 0.0 && self.dt > 0.0) {
            return cfg("horizon and dt must be positive".into());
        }
        Ok(())
    }

    /// Time derivative `ẋ = f(x, u)`. Input bounds are not applied here.
    pub fn eval_dynamics(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, SystemError> {
        let mut out = vec![0.0; self.n()];
        self.eval_dynamics_into(x, u, &mut out)?;
        Ok(out)
    }

    pub fn eval_dynamics_into(
        &self,
        x: &[f64],
        u: &[f64],
        out: &mut [f64],
    ) -> Result<(), SystemError> {
        debug_assert_eq!(x.len(), self.n());
        debug_assert_eq!(u.len(), self.m());
        self.dynamics.eval(x, u, out)
    }

    /// State deviation from the goal, wrapped into (−π, π] on periodic axes.
    pub fn state_error(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.axis_difference(i, x[i], self.goal_state[i]))
            .collect()
    }

    /// `a − b` along axis `i`, wrapped on periodic axes.
    #[inline]
    pub fn axis_difference(&self, i: usize, a: f64, b: f64) -> f64 {
        if self.is_periodic(i) {
            wrap_angle(a - b)
        } else {
            a - b
        }
    }

    /// Quadratic cost rate `(x−x^d)ᵀQ(x−x^d) + (u−u^d)ᵀR(u−u^d)`.
    pub fn eval_cost(&self, x: &[f64], u: &[f64]) -> f64 {
        let dx = self.state_error(x);
        let du: Vec<f64> = u.iter().zip(&self.goal_input).map(|(a, b)| a - b).collect();
        quad_form(&self.q, &dx) + quad_form(&self.r, &du)
    }

    /// Central finite-difference Jacobians `(∂f/∂x, ∂f/∂u)` at `(x0, u0)`.
    pub fn linearize(
        &self,
        x0: &[f64],
        u0: &[f64],
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), SystemError> {
        let (n, m) = (self.n(), self.m());
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, m);
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        let mut xp = x0.to_vec();
        for j in 0..n {
            let h = fd_step(x0[j]);
            xp[j] = x0[j] + h;
            self.eval_dynamics_into(&xp, u0, &mut fp)?;
            xp[j] = x0[j] - h;
            self.eval_dynamics_into(&xp, u0, &mut fm)?;
            xp[j] = x0[j];
            for i in 0..n {
                a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let mut up = u0.to_vec();
        for j in 0..m {
            let h = fd_step(u0[j]);
            up[j] = u0[j] + h;
            self.eval_dynamics_into(x0, &up, &mut fp)?;
            up[j] = u0[j] - h;
            self.eval_dynamics_into(x0, &up, &mut fm)?;
            up[j] = u0[j];
            for i in 0..n {
                b[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(SystemError::Numerical(
                "non-finite dynamics while linearizing".into(),
            ));
        }
        Ok((a, b))
    }

    pub fn clamp_input(&self, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        self.clamp_input_in_place(&mut out);
        out
    }

    #[inline]
    pub fn clamp_input_in_place(&self, u: &mut [f64]) {
        for (i, v) in u.iter_mut().enumerate() {
            *v = v.clamp(self.input_lower[i], self.input_upper[i]);
        }
    }

    /// State axes covered by the given state groups, sorted.
    pub fn state_axes(&self, groups: &[usize]) -> Vec<usize> {
        let mut axes: Vec<usize> = groups
            .iter()
            .flat_map(|&g| self.state_groups[g].indices.iter().copied())
            .collect();
        axes.sort_unstable();
        axes
    }

    /// Input axes covered by the given input groups, sorted.
    pub fn input_axes(&self, groups: &[usize]) -> Vec<usize> {
        let mut axes: Vec<usize> = groups
            .iter()
            .flat_map(|&g| self.input_groups[g].indices.iter().copied())
            .collect();
        axes.sort_unstable();
        axes
    }

    /// Same system with every state and every input in its own group.
    pub fn with_singleton_groups(mut self) -> Self {
        let state_names = self.axis_names();
        self.state_groups = (0..self.n())
            .map(|i| Group::new(state_names[i].clone(), vec![i]))
            .collect();
        let input_names = self.input_names();
        self.input_groups = (0..self.m())
            .map(|i| Group::new(input_names[i].clone(), vec![i]))
            .collect();
        self
    }

    /// Uniformly rescales the number of intervals per grid axis.
    pub fn with_grid_scale(mut self, scale: f64) -> Self {
        for k in self.grid_shape.iter_mut() {
            let intervals = ((*k - 1) as f64 * scale).round().max(1.0) as usize;
            *k = intervals + 1;
        }
        self
    }

    pub fn axis_names(&self) -> Vec<String> {
        match &self.dynamics {
            Dynamics::CartPole(_) => ["x", "xdot", "theta", "thetadot"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Dynamics::Biped(_) => ["l_r", "alpha_r", "xdot", "zdot", "theta", "thetadot"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Dynamics::Manipulator(p) => {
                let k = p.masses.len();
                (0..k)
                    .map(|i| format!("theta{}", i + 1))
                    .chain((0..k).map(|i| format!("theta{}dot", i + 1)))
                    .collect()
            }
            Dynamics::Linear { .. } => (0..self.n()).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn input_names(&self) -> Vec<String> {
        match &self.dynamics {
            Dynamics::CartPole(_) => vec!["F".into(), "tau".into()],
            Dynamics::Biped(_) => ["F_l", "F_r", "tau_l", "tau_r"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Dynamics::Manipulator(p) => (0..p.masses.len())
                .map(|i| format!("tau{}", i + 1))
                .collect(),
            Dynamics::Linear { .. } => (0..self.m()).map(|i| format!("u{i}")).collect(),
        }
    }
}

#[inline]
pub(crate) fn fd_step(v: f64) -> f64 {
    (1e-6 * v.abs()).max(1e-6)
}

/// Wraps an angle difference into (−π, π].
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = a - two_pi * (a / two_pi).round();
    if w <= -PI {
        w += two_pi;
    } else if w > PI {
        w -= two_pi;
    }
    w
}

pub(crate) fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        if v[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * v[j];
        }
        acc += v[i] * row;
    }
    acc
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = 1.0 + m.amax();
    (m - m.transpose()).amax() <= 1e-12 * scale
}

fn check_partition(groups: &[Group], dim: usize, what: &str) -> Result<(), SystemError> {
    let mut seen = vec![false; dim];
    for g in groups {
        if g.indices.is_empty() {
            return Err(SystemError::Config(format!("{what} group `{}` is empty", g.name)));
        }
        for &i in &g.indices {
            if i >= dim || seen[i] {
                return Err(SystemError::Config(format!(
                    "{what} groups must partition 0..{dim} (index {i} in `{}`)",
                    g.name
                )));
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(SystemError::Config(format!("{what} groups do not cover every {what}")));
    }
    Ok(())
}
