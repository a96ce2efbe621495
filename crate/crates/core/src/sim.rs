//! Fixed-step closed-loop simulation with discounted cost accounting.

use std::io::Write;

use thiserror::Error;

use crate::systems::{ControlSystem, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid rollout configuration: {0}")]
    Config(String),
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("dynamics failed at t = {t}: {source}")]
    Dynamics { t: f64, source: SystemError },
}

/// A state-feedback law writing its (unclamped) command into `u`.
pub trait Policy {
    fn control(&self, x: &[f64], u: &mut [f64]);
}

impl<F: Fn(&[f64], &mut [f64])> Policy for F {
    fn control(&self, x: &[f64], u: &mut [f64]) {
        self(x, u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Stop when the wrapped distance to the goal exceeds this.
    pub envelope: f64,
    /// Stop once the accumulated discounted cost exceeds this.
    pub cost_ceiling: f64,
}

impl RolloutConfig {
    /// System horizon and step, envelope of ten S_full diameters, no cost ceiling.
    pub fn for_system(sys: &ControlSystem) -> Self {
        RolloutConfig {
            horizon: sys.horizon,
            dt: sys.dt,
            envelope: 10.0 * sys.s_full.diameter(),
            cost_ceiling: f64::INFINITY,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Envelope,
    CostCeiling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub dt: f64,
    pub times: Vec<f64>,
    /// `steps + 1` states (fewer when terminated early).
    pub states: Vec<Vec<f64>>,
    /// One clamped input per step.
    pub inputs: Vec<Vec<f64>>,
    /// Undiscounted cost rate at each step.
    pub running_costs: Vec<f64>,
    pub discounted_cost: f64,
    pub terminated_early: Option<Termination>,
}

impl Rollout {
    /// CSV with header `t,x_0..,u_0..,running_cost`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let m = self.inputs.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x_{i}")));
        header.extend((0..m).map(|i| format!("u_{i}")));
        header.push("running_cost".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.inputs.len() {
            let mut row = vec![fmt17(self.times[k])];
            row.extend(self.states[k].iter().map(|v| fmt17(*v)));
            row.extend(self.inputs[k].iter().map(|v| fmt17(*v)));
            row.push(fmt17(self.running_costs[k]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// One classical RK4 step with the input held constant.
pub fn rk4_step(
    sys: &ControlSystem,
    x: &[f64],
    u: &[f64],
    dt: f64,
    out: &mut [f64],
) -> Result<(), SystemError> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    sys.eval_dynamics_into(x, u, &mut k1)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    sys.eval_dynamics_into(&tmp, u, &mut k2)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    sys.eval_dynamics_into(&tmp, u, &mut k3)?;
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    sys.eval_dynamics_into(&tmp, u, &mut k4)?;
    for i in 0..n {
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// Simulates `ẋ = f(x, clamp(π(x)))` from `x0`, accumulating
/// `Σ e^{−λt} c(x, u) dt` with the left-endpoint rule.
pub fn rollout<P: Policy + ?Sized>(
    sys: &ControlSystem,
    policy: &P,
    x0: &[f64],
    cfg: &RolloutConfig,
) -> Result<Rollout, SimError> {
    if !(cfg.horizon > 0.0 && cfg.dt > 0.0) {
        return Err(SimError::Config("horizon and dt must be positive".into()));
    }
    let steps = cfg.steps();
    let (n, m) = (sys.n(), sys.m());
    let mut out = Rollout {
        dt: cfg.dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps),
        running_costs: Vec::with_capacity(steps),
        discounted_cost: 0.0,
        terminated_early: None,
    };
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut u = vec![0.0; m];
    out.times.push(0.0);
    out.states.push(x.clone());
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        policy.control(&x, &mut u);
        sys.clamp_input_in_place(&mut u);
        let c = sys.eval_cost(&x, &u);
        out.discounted_cost += (-sys.lambda * t).exp() * c * cfg.dt;
        out.inputs.push(u.clone());
        out.running_costs.push(c);
        rk4_step(sys, &x, &u, cfg.dt, &mut next)
            .map_err(|source| SimError::Dynamics { t, source })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t: t + cfg.dt });
        }
        std::mem::swap(&mut x, &mut next);
        out.times.push(t + cfg.dt);
        out.states.push(x.clone());
        if out.discounted_cost > cfg.cost_ceiling {
            out.terminated_early = Some(Termination::CostCeiling);
            break;
        }
        let dist = sys.state_error(&x).iter().map(|v| v * v).sum::<f64>().sqrt();
        if dist > cfg.envelope {
            out.terminated_early = Some(Termination::Envelope);
            break;
        }
    }
    Ok(out)
}
