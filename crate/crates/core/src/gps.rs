//! Grid-based policy iteration for full systems and decomposition sub-policies.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomp::{Decomposition, NodePlan};
use crate::grid::{Axis, Grid, PolicyGrid, ValueGrid};
use crate::systems::{quad_form, ControlSystem, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpsError {
    #[error("node {node}: policy iteration did not converge (last residual {residual:e})")]
    Convergence { node: String, residual: f64 },
    #[error("node {node}: {source}")]
    System { node: String, source: SystemError },
    #[error("invalid decomposition: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpsConfig {
    /// Uniform action samples per input axis, bounds included.
    pub actions_per_input: usize,
    /// Evaluation stops when the max change is below `tol·(1 + max|V|)`.
    pub eval_tol: f64,
    pub max_sweeps: usize,
    pub max_improvements: usize,
    /// Backup time step; chosen from the grid and dynamics when absent.
    pub dt: Option<f64>,
    pub min_dt: f64,
    pub max_dt: f64,
    /// Values above this are clamped and counted as diverged.
    pub value_ceiling: f64,
}

impl Default for GpsConfig {
    fn default() -> Self {
        GpsConfig {
            actions_per_input: 9,
            eval_tol: 1e-6,
            max_sweeps: 2000,
            max_improvements: 100,
            dt: None,
            min_dt: 1e-3,
            max_dt: 0.02,
            value_ceiling: 1e9,
        }
    }
}

/// Grid over the given state axes of `S_full`.
pub fn node_grid(sys: &ControlSystem, states: &[usize]) -> Grid {
    Grid::new(
        states
            .iter()
            .map(|&a| Axis {
                lo: sys.s_full.lo(a),
                hi: sys.s_full.hi(a),
                count: sys.grid_shape[a],
                periodic: sys.is_periodic(a),
            })
            .collect(),
    )
}

/// Optimal control problem of one node: its effective state axes and own
/// inputs, with complement states frozen at the goal, inner inputs supplied
/// by already solved sub-policies and all remaining inputs at zero.
pub struct NodeProblem<'a> {
    pub sys: &'a ControlSystem,
    pub path: String,
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
    pub inner: Vec<InnerPolicy<'a>>,
}

/// A solved sub-policy feeding a cascaded node.
pub struct InnerPolicy<'a> {
    pub policy: &'a PolicyGrid,
    /// Positions of the inner grid's axes within the outer node's states.
    pub positions: Vec<usize>,
}

impl<'a> NodeProblem<'a> {
    /// Problem of the whole system with every input.
    pub fn full(sys: &'a ControlSystem) -> Self {
        NodeProblem {
            sys,
            path: "full".into(),
            states: (0..sys.n()).collect(),
            inputs: (0..sys.m()).collect(),
            inner: Vec::new(),
        }
    }

    fn cost_inputs(&self) -> Vec<bool> {
        let mut mask = vec![false; self.sys.m()];
        for &a in &self.inputs {
            mask[a] = true;
        }
        for ip in &self.inner {
            for &a in &ip.policy.inputs {
                mask[a] = true;
            }
        }
        mask
    }

    fn actions(&self, per_input: usize) -> Vec<Vec<f64>> {
        let levels: Vec<Vec<f64>> = self
            .inputs
            .iter()
            .map(|&a| {
                let (lo, hi) = (self.sys.input_lower[a], self.sys.input_upper[a]);
                if per_input < 2 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..per_input)
                        .map(|k| lo + (hi - lo) * k as f64 / (per_input - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let mut out = vec![Vec::new()];
        for lv in &levels {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    lv.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// Per-cell data that does not depend on the node's own action.
struct CellContext {
    /// Full state.
    x: Vec<f64>,
    /// Full input with inner sub-policy outputs filled in, own inputs zero.
    u: Vec<f64>,
    state_cost: f64,
}

struct Evaluator<'p, 'a> {
    prob: &'p NodeProblem<'a>,
    grid: Grid,
    cost_mask: Vec<bool>,
    corners: usize,
}

impl<'p, 'a> Evaluator<'p, 'a> {
    fn new(prob: &'p NodeProblem<'a>) -> Self {
        let grid = node_grid(prob.sys, &prob.states);
        let corners = 1 << grid.dim();
        Evaluator { prob, grid, cost_mask: prob.cost_inputs(), corners }
    }

    fn context(&self, cell: usize) -> CellContext {
        let sys = self.prob.sys;
        let z = self.grid.point(cell);
        let mut x = sys.goal_state.clone();
        for (k, &a) in self.prob.states.iter().enumerate() {
            x[a] = z[k];
        }
        let mut u = vec![0.0; sys.m()];
        for ip in &self.prob.inner {
            let q: Vec<f64> = ip.positions.iter().map(|&p| z[p]).collect();
            let mut out = vec![0.0; ip.policy.inputs.len()];
            ip.policy.interpolate(&q, &mut out);
            for (&a, v) in ip.policy.inputs.iter().zip(out) {
                u[a] = v.clamp(sys.input_lower[a], sys.input_upper[a]);
            }
        }
        let state_cost = quad_form(&sys.q, &sys.state_error(&x));
        CellContext { x, u, state_cost }
    }

    fn input_cost(&self, u: &[f64], du: &mut [f64]) -> f64 {
        let sys = self.prob.sys;
        for k in 0..u.len() {
            du[k] = if self.cost_mask[k] { u[k] - sys.goal_input[k] } else { 0.0 };
        }
        quad_form(&sys.r, du)
    }

    /// Node-state derivative at `(ctx.x, u)`.
    fn node_rates(&self, ctx: &CellContext, u: &[f64], f: &mut [f64]) -> Result<(), SystemError> {
        self.prob.sys.eval_dynamics_into(&ctx.x, u, f)
    }
}

/// Outcome statistics of a policy iteration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiStats {
    pub dt: f64,
    pub improvements: usize,
    pub sweeps: usize,
    pub residual: f64,
    /// Largest cellwise value increase between consecutive improvements.
    pub max_value_increase: f64,
    /// Bound on the evaluation error implied by the stopping rule,
    /// `tol·(1 + max|V|)·γ/(1 − γ)`.
    pub value_tolerance: f64,
    pub seconds: f64,
}

/// Backup time step: the smallest over node axes of cell width divided by the
/// largest speed along that axis over all cells and actions, clamped.
pub fn backup_dt(prob: &NodeProblem, cfg: &GpsConfig) -> Result<f64, GpsError> {
    if let Some(dt) = cfg.dt {
        return Ok(dt);
    }
    let ev = Evaluator::new(prob);
    let actions = prob.actions(cfg.actions_per_input);
    let n = prob.sys.n();
    let speeds = (0..ev.grid.len())
        .into_par_iter()
        .map(|cell| {
            let ctx = ev.context(cell);
            let mut u = ctx.u.clone();
            let mut f = vec![0.0; n];
            let mut best = vec![0.0f64; prob.states.len()];
            for act in &actions {
                for (k, &a) in prob.inputs.iter().enumerate() {
                    u[a] = act[k];
                }
                ev.node_rates(&ctx, &u, &mut f).map_err(|source| GpsError::System {
                    node: prob.path.clone(),
                    source,
                })?;
                for (k, &a) in prob.states.iter().enumerate() {
                    best[k] = best[k].max(f[a].abs());
                }
            }
            Ok(best)
        })
        .try_reduce(
            || vec![0.0; prob.states.len()],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect()),
        )?;
    let mut dt = cfg.max_dt;
    for (k, ax) in ev.grid.axes.iter().enumerate() {
        if ax.count > 1 && speeds[k] > 0.0 {
            dt = dt.min(ax.step() / speeds[k]);
        }
    }
    Ok(dt.clamp(cfg.min_dt, cfg.max_dt))
}

fn value_tolerance(values: &[f64], gamma: f64, tol: f64) -> f64 {
    let vmax = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    tol * (1.0 + vmax) * gamma / (1.0 - gamma)
}

/// Fixed-policy transition data: per cell a stencil of the successor and
/// the discounted stage cost.
struct Transitions {
    index: Vec<u32>,
    weight: Vec<f64>,
    cost: Vec<f64>,
}

/// Jacobi sweeps `V ← c + γ Σ w V` until the max change drops below tolerance.
fn evaluate(
    t: &Transitions,
    corners: usize,
    gamma: f64,
    values: &mut Vec<f64>,
    cfg: &GpsConfig,
) -> (usize, f64) {
    let mut next = vec![0.0; values.len()];
    let mut residual = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        let v = &*values;
        next.par_iter_mut().enumerate().for_each(|(c, out)| {
            let idx = &t.index[c * corners..(c + 1) * corners];
            let w = &t.weight[c * corners..(c + 1) * corners];
            let mut acc = 0.0;
            for k in 0..corners {
                acc += w[k] * v[idx[k] as usize];
            }
            *out = (t.cost[c] + gamma * acc).min(cfg.value_ceiling);
        });
        let (change, vmax) = next
            .par_iter()
            .zip(values.par_iter())
            .map(|(a, b)| ((a - b).abs(), a.abs()))
            .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
        std::mem::swap(values, &mut next);
        residual = change;
        if change < cfg.eval_tol * (1.0 + vmax) {
            return (sweep, residual);
        }
    }
    (cfg.max_sweeps, residual)
}

/// Policy iteration for one node problem on its grid.
pub fn policy_iteration(
    prob: &NodeProblem,
    cfg: &GpsConfig,
) -> Result<(ValueGrid, PolicyGrid, PiStats), GpsError> {
    let start = Instant::now();
    let dt = backup_dt(prob, cfg)?;
    let gamma = (-prob.sys.lambda * dt).exp();
    let ev = Evaluator::new(prob);
    let cells = ev.grid.len();
    let corners = ev.corners;
    let actions = prob.actions(cfg.actions_per_input);
    let contexts: Vec<CellContext> = (0..cells).into_par_iter().map(|c| ev.context(c)).collect();
    let sys = prob.sys;
    let n = sys.n();
    let sys_err = |source| GpsError::System { node: prob.path.clone(), source };

    // Successor stencil and stage cost of action `a` in cell `c`.
    let transition = |c: usize, a: usize, idx: &mut [u32], w: &mut [f64], scratch: &mut Scratch| {
        let ctx = &contexts[c];
        scratch.u.copy_from_slice(&ctx.u);
        for (k, &ax) in prob.inputs.iter().enumerate() {
            scratch.u[ax] = actions[a][k];
        }
        ev.node_rates(ctx, &scratch.u, &mut scratch.f)?;
        for (k, &ax) in prob.states.iter().enumerate() {
            scratch.z[k] = ctx.x[ax] + scratch.f[ax] * dt;
        }
        ev.grid.stencil_into(&scratch.z, idx, w);
        let c_rate = ctx.state_cost + ev.input_cost(&scratch.u, &mut scratch.du);
        Ok::<f64, SystemError>(c_rate * dt)
    };

    // Initial policy: the action closest to the goal input.
    let goal_action = (0..actions.len())
        .min_by(|&i, &j| {
            let d = |k: usize| -> f64 {
                prob.inputs
                    .iter()
                    .enumerate()
                    .map(|(q, &ax)| (actions[k][q] - sys.goal_input[ax]).powi(2))
                    .sum()
            };
            d(i).total_cmp(&d(j))
        })
        .unwrap_or(0);
    let mut policy = vec![goal_action; cells];
    let mut t = Transitions {
        index: vec![0; cells * corners],
        weight: vec![0.0; cells * corners],
        cost: vec![0.0; cells],
    };
    t.index
        .par_chunks_mut(corners)
        .zip(t.weight.par_chunks_mut(corners))
        .zip(t.cost.par_iter_mut())
        .enumerate()
        .try_for_each(|(c, ((idx, w), cost))| {
            let mut s = Scratch::new(n, prob.states.len(), sys.m());
            *cost = transition(c, goal_action, idx, w, &mut s)?;
            Ok(())
        })
        .map_err(sys_err)?;

    let mut values = vec![0.0; cells];
    let mut stats = PiStats {
        dt,
        improvements: 0,
        sweeps: 0,
        residual: 0.0,
        max_value_increase: 0.0,
        value_tolerance: 0.0,
        seconds: 0.0,
    };
    let mut converged = false;
    for it in 0..cfg.max_improvements {
        let before = values.clone();
        let (sweeps, residual) = evaluate(&t, corners, gamma, &mut values, cfg);
        stats.sweeps += sweeps;
        stats.residual = residual;
        stats.value_tolerance = stats
            .value_tolerance
            .max(value_tolerance(&values, gamma, cfg.eval_tol));
        if it > 0 {
            let inc = values
                .par_iter()
                .zip(before.par_iter())
                .map(|(a, b)| a - b)
                .reduce(|| f64::NEG_INFINITY, f64::max);
            stats.max_value_increase = stats.max_value_increase.max(inc);
        }
        // Greedy improvement; the current action is kept unless beaten.
        let v = &values;
        let changes: usize = policy
            .par_iter_mut()
            .zip(t.index.par_chunks_mut(corners))
            .zip(t.weight.par_chunks_mut(corners))
            .zip(t.cost.par_iter_mut())
            .enumerate()
            .map(|(c, (((pol, idx), w), cost))| {
                let mut s = Scratch::new(n, prob.states.len(), sys.m());
                let mut cand_idx = vec![0u32; corners];
                let mut cand_w = vec![0.0; corners];
                let q_of = |idx: &[u32], w: &[f64], cost: f64| -> f64 {
                    cost + gamma * idx.iter().zip(w).map(|(&i, &w)| w * v[i as usize]).sum::<f64>()
                };
                let current = q_of(idx, w, *cost);
                let mut best = (current, *pol);
                for a in 0..actions.len() {
                    if a == *pol {
                        continue;
                    }
                    let cst = transition(c, a, &mut cand_idx, &mut cand_w, &mut s)?;
                    let q = q_of(&cand_idx, &cand_w, cst);
                    if q < best.0 - 1e-12 * (1.0 + best.0.abs()) {
                        best = (q, a);
                        idx.copy_from_slice(&cand_idx);
                        w.copy_from_slice(&cand_w);
                        *cost = cst;
                    }
                }
                if best.1 != *pol {
                    *pol = best.1;
                    Ok(1)
                } else {
                    Ok(0)
                }
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))
            .map_err(sys_err)?;
        stats.improvements = it + 1;
        if changes == 0 {
            converged = true;
            break;
        }
    }
    stats.seconds = start.elapsed().as_secs_f64();
    if !converged {
        return Err(GpsError::Convergence { node: prob.path.clone(), residual: stats.residual });
    }
    let mut controls = Vec::with_capacity(cells * prob.inputs.len());
    for &a in &policy {
        controls.extend_from_slice(&actions[a]);
    }
    Ok((
        ValueGrid { grid: ev.grid.clone(), values },
        PolicyGrid { grid: ev.grid.clone(), inputs: prob.inputs.clone(), controls },
        stats,
    ))
}

struct Scratch {
    u: Vec<f64>,
    f: Vec<f64>,
    z: Vec<f64>,
    du: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, k: usize, m: usize) -> Self {
        Scratch { u: vec![0.0; m], f: vec![0.0; n], z: vec![0.0; k], du: vec![0.0; m] }
    }
}

/// One solved node of a composed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePolicy {
    pub plan: NodePlan,
    pub policy: PolicyGrid,
    pub value: ValueGrid,
    pub stats: PiStats,
}

/// Sub-policies of a decomposition in evaluation (innermost-first) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedPolicy {
    pub decomposition: Decomposition,
    pub nodes: Vec<NodePolicy>,
}

impl ComposedPolicy {
    /// Total solve time of all nodes in seconds.
    pub fn solve_seconds(&self) -> f64 {
        self.nodes.iter().map(|n| n.stats.seconds).sum()
    }
}

/// Solves every node, innermost first; cascaded nodes query their inner
/// sub-policies' grids during their own backups.
pub fn solve_decomposition(
    sys: &ControlSystem,
    d: &Decomposition,
    cfg: &GpsConfig,
) -> Result<ComposedPolicy, GpsError> {
    d.validate(sys).map_err(|v| {
        GpsError::Invalid(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    })?;
    let plan = d.plan(sys);
    let mut nodes: Vec<NodePolicy> = Vec::with_capacity(plan.len());
    for p in &plan {
        let inner = p
            .descendants
            .iter()
            .map(|&j| InnerPolicy {
                policy: &nodes[j].policy,
                positions: plan[j]
                    .states
                    .iter()
                    .map(|a| p.states.iter().position(|b| b == a).expect("nested states"))
                    .collect(),
            })
            .collect();
        let prob = NodeProblem {
            sys,
            path: p.path.clone(),
            states: p.states.clone(),
            inputs: p.inputs.clone(),
            inner,
        };
        let (value, policy, stats) = policy_iteration(&prob, cfg)?;
        nodes.push(NodePolicy { plan: p.clone(), policy, value, stats });
    }
    Ok(ComposedPolicy { decomposition: d.clone(), nodes })
}

/// Full input at `x`: every node's grid interpolated on its state axes, clamped.
pub fn eval_composed(sys: &ControlSystem, p: &ComposedPolicy, x: &[f64]) -> Vec<f64> {
    let mut u = sys.goal_input.clone();
    eval_composed_into(sys, p, x, &mut u);
    u
}

pub fn eval_composed_into(sys: &ControlSystem, p: &ComposedPolicy, x: &[f64], u: &mut [f64]) {
    let mut z = Vec::new();
    let mut out = Vec::new();
    for node in &p.nodes {
        z.clear();
        z.extend(node.plan.states.iter().map(|&a| x[a]));
        out.resize(node.policy.inputs.len(), 0.0);
        node.policy.interpolate(&z, &mut out);
        for (&a, &v) in node.policy.inputs.iter().zip(&out) {
            u[a] = v.clamp(sys.input_lower[a], sys.input_upper[a]);
        }
    }
}

/// Value of a composed policy on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub value: ValueGrid,
    pub sweeps: usize,
    pub residual: f64,
    /// Cells whose value reached the ceiling.
    pub diverged_cells: usize,
    pub value_tolerance: f64,
    pub dt: f64,
}

/// Fixed-policy evaluation of `p` on the full grid with time step `dt`.
pub fn evaluate_policy_value(
    sys: &ControlSystem,
    p: &ComposedPolicy,
    dt: f64,
    cfg: &GpsConfig,
) -> Result<PolicyValue, GpsError> {
    let all: Vec<usize> = (0..sys.n()).collect();
    let grid = node_grid(sys, &all);
    let corners = 1 << grid.dim();
    let cells = grid.len();
    let mut t = Transitions {
        index: vec![0; cells * corners],
        weight: vec![0.0; cells * corners],
        cost: vec![0.0; cells],
    };
    t.index
        .par_chunks_mut(corners)
        .zip(t.weight.par_chunks_mut(corners))
        .zip(t.cost.par_iter_mut())
        .enumerate()
        .try_for_each(|(c, ((idx, w), cost))| {
            let x = grid.point(c);
            let mut u = sys.goal_input.clone();
            eval_composed_into(sys, p, &x, &mut u);
            let f = sys.eval_dynamics(&x, &u)?;
            let next: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a + b * dt).collect();
            grid.stencil_into(&next, idx, w);
            *cost = sys.eval_cost(&x, &u) * dt;
            Ok(())
        })
        .map_err(|source| GpsError::System { node: "full".into(), source })?;
    let mut values = vec![0.0; cells];
    let gamma = (-sys.lambda * dt).exp();
    let (sweeps, residual) = evaluate(&t, corners, gamma, &mut values, cfg);
    let diverged_cells = values.iter().filter(|&&v| v >= cfg.value_ceiling).count();
    let value_tolerance = value_tolerance(&values, gamma, cfg.eval_tol);
    Ok(PolicyValue {
        value: ValueGrid { grid, values },
        sweeps,
        residual,
        diverged_cells,
        value_tolerance,
        dt,
    })
}

/// Mean of `V^δ − V*` over the grid points inside `S_eval`.
pub fn value_error(sys: &ControlSystem, v_delta: &ValueGrid, v_star: &ValueGrid) -> f64 {
    assert_eq!(v_delta.grid, v_star.grid, "value grids must share axes");
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut x = vec![0.0; sys.n()];
    for c in 0..v_star.values.len() {
        v_star.grid.point_into(c, &mut x);
        let inside = (0..sys.n())
            .all(|i| x[i] >= sys.s_eval.lo(i) - 1e-9 && x[i] <= sys.s_eval.hi(i) + 1e-9);
        if inside {
            sum += v_delta.values[c] - v_star.values[c];
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Number of full-grid points inside `S_eval`.
pub fn eval_point_count(sys: &ControlSystem) -> usize {
    let all: Vec<usize> = (0..sys.n()).collect();
    let grid = node_grid(sys, &all);
    let mut x = vec![0.0; sys.n()];
    (0..grid.len())
        .filter(|&c| {
            grid.point_into(c, &mut x);
            (0..sys.n()).all(|i| x[i] >= sys.s_eval.lo(i) - 1e-9 && x[i] <= sys.s_eval.hi(i) + 1e-9)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{BoxDomain, Dynamics, Group};
    use nalgebra::DMatrix;

    fn scalar(a: f64, q: f64, r: f64, bound: f64, k: usize) -> ControlSystem {
        ControlSystem {
            name: "scalar".into(),
            dynamics: Dynamics::Linear {
                a: DMatrix::from_element(1, 1, a),
                b: DMatrix::from_element(1, 1, 1.0),
            },
            input_lower: vec![-bound],
            input_upper: vec![bound],
            goal_state: vec![0.0],
            goal_input: vec![0.0],
            q: DMatrix::from_element(1, 1, q),
            r: DMatrix::from_element(1, 1, r),
            lambda: 1.0,
            s_full: BoxDomain(vec![[-2.0, 2.0]]),
            s_eval: BoxDomain(vec![[-0.5, 0.5]]),
            grid_shape: vec![k],
            periodic_axes: vec![],
            state_groups: vec![Group::new("x", vec![0])],
            input_groups: vec![Group::new("u", vec![0])],
            horizon: 10.0,
            dt: 1e-3,
        }
    }

    #[test]
    fn zero_cost_gives_zero_value() {
        let sys = scalar(-1.0, 0.0, 0.0, 1.0, 21);
        let (v, _, _) = policy_iteration(&NodeProblem::full(&sys), &GpsConfig::default()).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn knot_and_midpoint_policy_queries() {
        let sys = scalar(-1.0, 1.0, 1.0, 4.0, 5);
        let grid = node_grid(&sys, &[0]);
        let controls = vec![-1.0, 0.5, 2.0, 3.0, 4.0];
        let d = Decomposition::undecomposed(&sys);
        let plan = d.plan(&sys).remove(0);
        let p = ComposedPolicy {
            decomposition: d,
            nodes: vec![NodePolicy {
                plan,
                policy: PolicyGrid { grid: grid.clone(), inputs: vec![0], controls },
                value: ValueGrid { grid, values: vec![0.0; 5] },
                stats: PiStats {
                    dt: 0.01,
                    improvements: 0,
                    sweeps: 0,
                    residual: 0.0,
                    max_value_increase: 0.0,
                    value_tolerance: 0.0,
                    seconds: 0.0,
                },
            }],
        };
        assert_eq!(eval_composed(&sys, &p, &[-1.0]), vec![0.5]);
        assert_eq!(eval_composed(&sys, &p, &[-0.5]), vec![1.25]);
    }

    #[test]
    fn value_error_of_identical_grids_is_zero() {
        let sys = scalar(-1.0, 1.0, 1.0, 1.0, 11);
        let grid = node_grid(&sys, &[0]);
        let v = ValueGrid { grid, values: (0..11).map(|i| i as f64).collect() };
        assert_eq!(value_error(&sys, &v, &v), 0.0);
        assert_eq!(eval_point_count(&sys), 3);
    }
}
