//! Box-constrained differential dynamic programming, trajectory bundles and
//! the trajectory-based suboptimality estimate.

mod bundle;
mod kdtree;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lqr::LqrError;
use crate::sim::rk4_step;
use crate::systems::{ControlSystem, SystemError};

pub use bundle::{
    build_baseline, build_bundles, err_ddp, evaluate_bundles, load_bundle, nn_policy, save_bundle, CornerOutcome,
    DdpEstimate, NnPolicy, TrajectoryBundle,
};
pub use kdtree::KdTree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdpError {
    #[error("no accepted step at maximum regularization after {iterations} iterations (cost {cost:e})")]
    Stall {
        iterations: usize,
        cost: f64,
        trajectory: Box<Trajectory>,
    },
    #[error("trajectory left the finite range at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Lqr(#[from] LqrError),
    #[error("invalid DDP problem: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_factor: f64,
    /// Step sizes `1, 1/2, …` tried per iteration.
    pub line_search_steps: usize,
    /// Overrides of the system horizon and step.
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    /// Rollout ceiling as a multiple of the full-system cost from the same corner.
    pub ceiling_factor: f64,
}

impl Default for DdpConfig {
    fn default() -> Self {
        DdpConfig {
            max_iterations: 500,
            rel_tol: 1e-8,
            mu_min: 1e-6,
            mu_max: 1e10,
            mu_factor: 10.0,
            line_search_steps: 12,
            horizon: None,
            dt: None,
            ceiling_factor: 100.0,
        }
    }
}

impl DdpConfig {
    pub fn horizon(&self, sys: &ControlSystem) -> f64 {
        self.horizon.unwrap_or(sys.horizon)
    }

    pub fn dt(&self, sys: &ControlSystem) -> f64 {
        self.dt.unwrap_or(sys.dt)
    }

    pub fn steps(&self, sys: &ControlSystem) -> usize {
        (self.horizon(sys) / self.dt(sys)).round() as usize
    }
}

/// Locally optimal trajectory of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// `N + 1` knot times.
    pub times: Vec<f64>,
    /// `N + 1` node states.
    pub x: Vec<Vec<f64>>,
    /// `N` reference states of the feedback term.
    pub x_ref: Vec<Vec<f64>>,
    /// `N` node inputs.
    pub u: Vec<Vec<f64>>,
    /// `N` gains with `u = U − K (x − X̃)`.
    pub k: Vec<DMatrix<f64>>,
    /// `Σ e^{−λt} c dt`.
    pub cost: f64,
    /// Cost after initialization and after every accepted iteration.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// A solved inner node feeding a cascaded DDP problem.
pub struct InnerBundle<'a> {
    pub bundle: &'a TrajectoryBundle,
    /// Positions of the inner bundle's states within the outer node's states.
    pub positions: Vec<usize>,
}

/// One node's trajectory optimization problem. Complement states are frozen
/// at the goal, inner inputs come from the inner nearest-neighbour policies
/// and every other input is zero.
pub struct DdpProblem<'a> {
    pub sys: &'a ControlSystem,
    pub path: String,
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
    pub inner: Vec<InnerBundle<'a>>,
}

/// Forward simulation of a node with the inputs applied at each knot.
#[derive(Debug, Clone)]
struct Nominal {
    z: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    u_full: Vec<Vec<f64>>,
    /// `∂u_inner/∂z` per knot, rows ordered as `inner_inputs`.
    pi: Vec<DMatrix<f64>>,
    cost: f64,
}

/// Expansion of dynamics and cost at one knot.
struct Expansion {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    lx: DVector<f64>,
    lu: DVector<f64>,
    lxx: DMatrix<f64>,
    luu: DMatrix<f64>,
    lux: DMatrix<f64>,
}

struct Backward {
    kff: Vec<DVector<f64>>,
    kfb: Vec<DMatrix<f64>>,
    /// Predicted change `d1 + d2` at `α = 1`.
    expected: f64,
}

impl<'a> DdpProblem<'a> {
    pub fn full(sys: &'a ControlSystem) -> Self {
        DdpProblem {
            sys,
            path: "full".into(),
            states: (0..sys.n()).collect(),
            inputs: (0..sys.m()).collect(),
            inner: Vec::new(),
        }
    }

    fn inner_inputs(&self) -> Vec<usize> {
        self.inner.iter().flat_map(|ib| ib.bundle.inputs.iter().copied()).collect()
    }

    /// Input axes charged in the node cost.
    fn cost_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.sys.m()];
        for &a in self.inputs.iter().chain(&self.inner_inputs()) {
            mask[a] = true;
        }
        mask
    }

    /// Node goal state.
    pub fn goal(&self) -> Vec<f64> {
        self.states.iter().map(|&a| self.sys.goal_state[a]).collect()
    }

    pub fn embed(&self, z: &[f64], x: &mut [f64]) {
        x.copy_from_slice(&self.sys.goal_state);
        for (k, &a) in self.states.iter().enumerate() {
            x[a] = z[k];
        }
    }

    /// Simulates `steps` RK4 steps; `control(t, z, out)` writes the own
    /// inputs, which are then clamped.
    fn simulate<F>(&self, z0: &[f64], steps: usize, dt: f64, mut control: F) -> Result<Nominal, DdpError>
    where
        F: FnMut(usize, &[f64], &mut [f64]),
    {
        let sys = self.sys;
        let (n, m) = (sys.n(), sys.m());
        let nz = self.states.len();
        let inner_inputs = self.inner_inputs();
        let mask = self.cost_mask();
        let mut out = Nominal {
            z: Vec::with_capacity(steps + 1),
            u: Vec::with_capacity(steps),
            u_full: Vec::with_capacity(steps),
            pi: Vec::with_capacity(steps),
            cost: 0.0,
        };
        let mut z = z0.to_vec();
        let mut x = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut own = vec![0.0; self.inputs.len()];
        out.z.push(z.clone());
        for k in 0..steps {
            let t = k as f64 * dt;
            self.embed(&z, &mut x);
            let mut u_full = vec![0.0; m];
            let mut pi = DMatrix::zeros(inner_inputs.len(), nz);
            let mut row = 0;
            for ib in &self.inner {
                let q: Vec<f64> = ib.positions.iter().map(|&p| z[p]).collect();
                let hit = ib.bundle.query(sys, &q);
                for (r, &ax) in ib.bundle.inputs.iter().enumerate() {
                    u_full[ax] = hit.u[r];
                    if !hit.clamped[r] {
                        for (c, &p) in ib.positions.iter().enumerate() {
                            pi[(row + r, p)] = -hit.k[(r, c)];
                        }
                    }
                }
                row += ib.bundle.inputs.len();
            }
            control(k, &z, &mut own);
            for (r, &ax) in self.inputs.iter().enumerate() {
                own[r] = own[r].clamp(sys.input_lower[ax], sys.input_upper[ax]);
                u_full[ax] = own[r];
            }
            let c = node_cost(sys, &mask, &x, &u_full);
            out.cost += (-sys.lambda * t).exp() * c * dt;
            rk4_step(sys, &x, &u_full, dt, &mut next)?;
            for (k2, &a) in self.states.iter().enumerate() {
                z[k2] = next[a];
            }
            if z.iter().any(|v| !v.is_finite()) || !out.cost.is_finite() {
                return Err(DdpError::NonFinite { t: t + dt });
            }
            out.u.push(own.clone());
            out.u_full.push(u_full);
            out.pi.push(pi);
            out.z.push(z.clone());
        }
        Ok(out)
    }

    /// Rollout replaying `u` open loop.
    fn replay(&self, z0: &[f64], u: &[Vec<f64>], dt: f64) -> Result<Nominal, DdpError> {
        self.simulate(z0, u.len(), dt, |k, _, out| out.copy_from_slice(&u[k]))
    }

    fn expand(&self, nom: &Nominal, dt: f64) -> Result<Vec<Expansion>, DdpError> {
        let sys = self.sys;
        let inner_inputs = self.inner_inputs();
        let mask = self.cost_mask();
        let xs = &self.states;
        (0..nom.u.len())
            .into_par_iter()
            .map(|k| {
                let mut x = vec![0.0; sys.n()];
                self.embed(&nom.z[k], &mut x);
                let (fa, fb) = sys.linearize(&x, &nom.u_full[k])?;
                let mut ac = select(&fa, xs, xs);
                if !inner_inputs.is_empty() {
                    ac += select(&fb, xs, &inner_inputs) * &nom.pi[k];
                }
                let bc = select(&fb, xs, &self.inputs);
                let (a, b) = discretize(&ac, &bc, dt);

                let w = 2.0 * (-sys.lambda * k as f64 * dt).exp() * dt;
                let dx = DVector::from_iterator(
                    xs.len(),
                    xs.iter().map(|&ax| sys.axis_difference(ax, x[ax], sys.goal_state[ax])),
                );
                let du = DVector::from_iterator(
                    sys.m(),
                    (0..sys.m()).map(|i| if mask[i] { nom.u_full[k][i] - sys.goal_input[i] } else { 0.0 }),
                );
                let rdu = &sys.r * &du;
                let q = select(&sys.q, xs, xs);
                let mut lx = &q * &dx * w;
                let mut lxx = q * w;
                let lu = DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|&i| rdu[i] * w));
                let luu = select(&sys.r, &self.inputs, &self.inputs) * w;
                let mut lux = DMatrix::zeros(self.inputs.len(), xs.len());
                if !inner_inputs.is_empty() {
                    let pi = &nom.pi[k];
                    let rdu_inner = DVector::from_iterator(inner_inputs.len(), inner_inputs.iter().map(|&i| rdu[i]));
                    lx += pi.transpose() * rdu_inner * w;
                    lxx += pi.transpose() * select(&sys.r, &inner_inputs, &inner_inputs) * pi * w;
                    lux = select(&sys.r, &self.inputs, &inner_inputs) * pi * w;
                }
                Ok(Expansion { a, b, lx, lu, lxx, luu, lux })
            })
            .collect()
    }

    fn backward(&self, nom: &Nominal, exp: &[Expansion], mu: f64, warm: Option<&Backward>) -> Option<Backward> {
        let sys = self.sys;
        let (nz, nu) = (self.states.len(), self.inputs.len());
        let steps = exp.len();
        let mut vx = DVector::zeros(nz);
        let mut vxx = DMatrix::zeros(nz, nz);
        let mut kff = vec![DVector::zeros(nu); steps];
        let mut kfb = vec![DMatrix::zeros(nu, nz); steps];
        let mut expected = 0.0;
        for k in (0..steps).rev() {
            let e = &exp[k];
            let at = e.a.transpose();
            let bt = e.b.transpose();
            let qx = &e.lx + &at * &vx;
            let qu = &e.lu + &bt * &vx;
            let qxx = &e.lxx + &at * &vxx * &e.a;
            let quu = &e.luu + &bt * &vxx * &e.b;
            let qux = &e.lux + &bt * &vxx * &e.a;
            let quu_reg = &quu + DMatrix::identity(nu, nu) * mu;
            let ubar = &nom.u[k];
            let lo = DVector::from_iterator(nu, self.inputs.iter().enumerate().map(|(i, &a)| sys.input_lower[a] - ubar[i]));
            let hi = DVector::from_iterator(nu, self.inputs.iter().enumerate().map(|(i, &a)| sys.input_upper[a] - ubar[i]));
            let warm = warm.map_or_else(|| DVector::zeros(nu), |w| w.kff[k].clone());
            let (ff, free) = box_qp(&quu_reg, &qu, &lo, &hi, warm)?;
            let mut fb = DMatrix::zeros(nu, nz);
            let rows: Vec<usize> = (0..nu).filter(|&i| free[i]).collect();
            if !rows.is_empty() {
                let cf = select(&quu_reg, &rows, &rows).cholesky()?;
                let fb_free = -cf.solve(&select(&qux, &rows, &(0..nz).collect::<Vec<_>>()));
                for (r, &i) in rows.iter().enumerate() {
                    fb.row_mut(i).copy_from(&fb_free.row(r));
                }
            }
            expected += ff.dot(&qu) + 0.5 * ff.dot(&(&quu * &ff));
            let fbt = fb.transpose();
            vx = qx + &fbt * &quu * &ff + &fbt * &qu + qux.transpose() * &ff;
            vxx = qxx + &fbt * &quu * &fb + &fbt * &qux + qux.transpose() * &fb;
            vxx = (&vxx + vxx.transpose()) * 0.5;
            kff[k] = ff;
            kfb[k] = fb;
        }
        Some(Backward { kff, kfb, expected })
    }

    fn forward(&self, nom: &Nominal, bw: &Backward, alpha: f64, dt: f64) -> Result<Nominal, DdpError> {
        let sys = self.sys;
        let xs = &self.states;
        self.simulate(&nom.z[0], nom.u.len(), dt, |k, z, out| {
            for (i, o) in out.iter_mut().enumerate() {
                let mut v = nom.u[k][i] + alpha * bw.kff[k][i];
                for (c, &ax) in xs.iter().enumerate() {
                    v += bw.kfb[k][(i, c)] * sys.axis_difference(ax, z[c], nom.z[k][c]);
                }
                *o = v;
            }
        })
    }

    fn trajectory(&self, nom: &Nominal, gains: Option<&Backward>, dt: f64) -> Trajectory {
        let steps = nom.u.len();
        let (nz, nu) = (self.states.len(), self.inputs.len());
        Trajectory {
            dt,
            times: (0..=steps).map(|k| k as f64 * dt).collect(),
            x: nom.z.clone(),
            x_ref: nom.z[..steps].to_vec(),
            u: nom.u.clone(),
            k: match gains {
                Some(bw) => bw.kfb.iter().map(|g| -g).collect(),
                None => vec![DMatrix::zeros(nu, nz); steps],
            },
            cost: nom.cost,
            cost_history: Vec::new(),
            iterations: 0,
            converged: false,
        }
    }
}

/// Minimizes `½ xᵀHx + gᵀx` over `lo ≤ x ≤ hi` by projected Newton steps.
/// Returns the minimizer and the rows left free (not held at a bound by the
/// gradient). `None` when the free block of `H` is not positive definite.
fn box_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    x0: DVector<f64>,
) -> Option<(DVector<f64>, Vec<bool>)> {
    let n = g.len();
    let project = |x: &DVector<f64>| DVector::from_iterator(n, (0..n).map(|i| x[i].max(lo[i]).min(hi[i])));
    let objective = |x: &DVector<f64>| 0.5 * x.dot(&(h * x)) + g.dot(x);
    let mut x = project(&x0);
    let mut value = objective(&x);
    let free_set = |x: &DVector<f64>, grad: &DVector<f64>| -> Vec<bool> {
        (0..n)
            .map(|i| !((x[i] <= lo[i] && grad[i] > 0.0) || (x[i] >= hi[i] && grad[i] < 0.0)))
            .collect()
    };
    for _ in 0..100 {
        let grad = g + h * &x;
        let free = free_set(&x, &grad);
        let rows: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        if rows.is_empty() {
            break;
        }
        let gnorm: f64 = rows.iter().map(|&i| grad[i] * grad[i]).sum::<f64>().sqrt();
        if gnorm < 1e-10 {
            break;
        }
        let chol = select(h, &rows, &rows).cholesky()?;
        let gf = DVector::from_iterator(rows.len(), rows.iter().map(|&i| grad[i]));
        let step_free = -chol.solve(&gf);
        let mut dir = DVector::zeros(n);
        for (r, &i) in rows.iter().enumerate() {
            dir[i] = step_free[r];
        }
        let slope = dir.dot(&grad);
        if slope >= 0.0 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let cand = project(&(&x + &dir * step));
            let v = objective(&cand);
            if (v - value) / (step * slope) >= 0.1 {
                accepted = Some((cand, v));
                break;
            }
            step *= 0.6;
        }
        let Some((cand, v)) = accepted else { break };
        let improvement = value - v;
        x = cand;
        value = v;
        if improvement < 1e-12 * (1.0 + value.abs()) {
            break;
        }
    }
    let free = free_set(&x, &(g + h * &x));
    Some((x, free))
}

/// Cost rate with the uncharged inputs at their goal values.
fn node_cost(sys: &ControlSystem, mask: &[bool], x: &[f64], u_full: &[f64]) -> f64 {
    if mask.iter().all(|&b| b) {
        return sys.eval_cost(x, u_full);
    }
    let u: Vec<f64> = (0..u_full.len())
        .map(|i| if mask[i] { u_full[i] } else { sys.goal_input[i] })
        .collect();
    sys.eval_cost(x, &u)
}

pub(crate) fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Fourth-order Taylor discretization of `ż = Az + Bu` under zero-order hold,
/// which is exactly what one RK4 step does to a linear system.
pub fn discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let ah = a * h;
    let ah2 = &ah * &ah;
    let ah3 = &ah2 * &ah;
    let ah4 = &ah3 * &ah;
    let eye = DMatrix::<f64>::identity(n, n);
    let ad = &eye + &ah + &ah2 / 2.0 + &ah3 / 6.0 + &ah4 / 24.0;
    let phi = (&eye + &ah / 2.0 + &ah2 / 6.0 + &ah3 / 24.0) * h;
    (ad, phi * b)
}

/// Box-constrained DDP from `z0` with initial own-input sequence `u0`.
pub fn ddp_solve(
    prob: &DdpProblem,
    z0: &[f64],
    u0: &[Vec<f64>],
    dt: f64,
    cfg: &DdpConfig,
) -> Result<Trajectory, DdpError> {
    if z0.len() != prob.states.len() || u0.iter().any(|u| u.len() != prob.inputs.len()) {
        return Err(DdpError::Invalid(format!("{}: dimension mismatch", prob.path)));
    }
    if !(dt > 0.0) || u0.is_empty() {
        return Err(DdpError::Invalid("empty horizon".into()));
    }
    let mut nom = prob.replay(z0, u0, dt)?;
    let mut history = vec![nom.cost];
    let mut mu = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut last: Option<Backward> = None;
    'outer: while iterations < cfg.max_iterations {
        iterations += 1;
        let exp = prob.expand(&nom, dt)?;
        let bw = loop {
            match prob.backward(&nom, &exp, mu, last.as_ref()) {
                Some(bw) => break bw,
                None => {
                    mu = (mu * cfg.mu_factor).max(cfg.mu_min);
                    if mu > cfg.mu_max {
                        let mut t = prob.trajectory(&nom, last.as_ref(), dt);
                        t.cost_history = history;
                        t.iterations = iterations;
                        return Err(DdpError::Stall { iterations, cost: nom.cost, trajectory: Box::new(t) });
                    }
                }
            }
        };
        log::trace!("{} it {iterations} cost {:.6e} expected {:.3e} mu {mu:.1e}", prob.path, nom.cost, bw.expected);
        if -bw.expected <= cfg.rel_tol * nom.cost {
            converged = true;
            last = Some(bw);
            break;
        }
        let mut alpha = 1.0;
        for _ in 0..cfg.line_search_steps {
            if let Ok(cand) = prob.forward(&nom, &bw, alpha, dt) {
                if cand.cost < nom.cost {
                    let decrease = (nom.cost - cand.cost) / nom.cost;
                    nom = cand;
                    history.push(nom.cost);
                    mu /= cfg.mu_factor;
                    if mu < cfg.mu_min {
                        mu = 0.0;
                    }
                    last = Some(bw);
                    if decrease < cfg.rel_tol {
                        converged = true;
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            alpha *= 0.5;
        }
        mu = (mu * cfg.mu_factor).max(cfg.mu_min);
        if mu > cfg.mu_max {
            let mut t = prob.trajectory(&nom, last.as_ref(), dt);
            t.cost_history = history;
            t.iterations = iterations;
            return Err(DdpError::Stall { iterations, cost: nom.cost, trajectory: Box::new(t) });
        }
    }
    // Final pass with a zero step: gains about the final trajectory, which
    // becomes its own reference.
    let exp = prob.expand(&nom, dt)?;
    let mut mu_final = mu;
    let bw = loop {
        if let Some(bw) = prob.backward(&nom, &exp, mu_final, last.as_ref()) {
            break Some(bw);
        }
        mu_final = (mu_final * cfg.mu_factor).max(cfg.mu_min);
        if mu_final > cfg.mu_max {
            break None;
        }
    };
    let mut t = prob.trajectory(&nom, bw.as_ref().or(last.as_ref()), dt);
    t.cost_history = history;
    t.iterations = iterations;
    t.converged = converged;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{BoxDomain, Dynamics, Group};

    fn double_integrator(bound: f64) -> ControlSystem {
        ControlSystem {
            name: "di".into(),
            dynamics: Dynamics::Linear {
                a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            },
            input_lower: vec![-bound],
            input_upper: vec![bound],
            goal_state: vec![0.0, 0.0],
            goal_input: vec![0.0],
            q: DMatrix::identity(2, 2),
            r: DMatrix::from_element(1, 1, 0.1),
            lambda: 0.0,
            s_full: BoxDomain(vec![[-2.0, 2.0], [-2.0, 2.0]]),
            s_eval: BoxDomain(vec![[-1.0, 1.0], [-1.0, 1.0]]),
            grid_shape: vec![11, 11],
            periodic_axes: vec![],
            state_groups: vec![Group::new("p", vec![0]), Group::new("v", vec![1])],
            input_groups: vec![Group::new("u", vec![0])],
            horizon: 2.0,
            dt: 0.01,
        }
    }

    #[test]
    fn taylor_discretization_matches_rk4() {
        let sys = double_integrator(f64::INFINITY);
        let (a, b) = discretize(
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            0.1,
        );
        let mut out = vec![0.0; 2];
        rk4_step(&sys, &[0.3, -0.2], &[0.7], 0.1, &mut out).unwrap();
        let pred = a * DVector::from_vec(vec![0.3, -0.2]) + b * 0.7;
        assert!((pred[0] - out[0]).abs() < 1e-15 && (pred[1] - out[1]).abs() < 1e-15);
    }

    #[test]
    fn goal_start_converges_immediately() {
        let sys = double_integrator(1.0);
        let prob = DdpProblem::full(&sys);
        let u0 = vec![vec![0.0]; 200];
        let t = ddp_solve(&prob, &[0.0, 0.0], &u0, 0.01, &DdpConfig::default()).unwrap();
        assert!(t.converged && t.iterations <= 2);
        assert_eq!(t.cost, 0.0);
    }

    #[test]
    fn bounded_inputs_and_monotone_cost() {
        let sys = double_integrator(0.5);
        let prob = DdpProblem::full(&sys);
        let u0 = vec![vec![0.0]; 200];
        let t = ddp_solve(&prob, &[1.0, 0.0], &u0, 0.01, &DdpConfig::default()).unwrap();
        assert!(t.u.iter().all(|u| u[0].abs() <= 0.5));
        assert!(t.u.iter().any(|u| u[0] == -0.5));
        for w in t.cost_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert_eq!(t.x_ref, t.x[..200].to_vec());
    }
}
