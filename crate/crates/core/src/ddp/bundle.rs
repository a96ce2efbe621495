use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::json;

use super::kdtree::KdTree;
use super::{ddp_solve, DdpConfig, DdpError, DdpProblem, InnerBundle, Trajectory};
use crate::decomp::Decomposition;
use crate::grid::{load_with_sidecar, save_with_sidecar, Axis, Grid};
use crate::lqr::decomposition_gains;
use crate::sim::{rollout, Policy, RolloutConfig};
use crate::systems::ControlSystem;

/// Trajectories of one node from every start state, with a nearest-knot index.
pub struct TrajectoryBundle {
    pub path: String,
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
    /// Start state of each trajectory in node coordinates.
    pub starts: Vec<Vec<f64>>,
    pub trajectories: Vec<Trajectory>,
    /// The solver stalled; the best trajectory found is kept.
    pub stalled: Vec<bool>,
    /// The LQR initialization left the rollout envelope.
    pub init_diverged: Vec<bool>,
    knots: usize,
    index: KdTree,
}

impl fmt::Debug for TrajectoryBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrajectoryBundle")
            .field("path", &self.path)
            .field("states", &self.states)
            .field("inputs", &self.inputs)
            .field("trajectories", &self.trajectories.len())
            .field("knots", &self.knots)
            .finish()
    }
}

/// Result of a nearest-knot query.
pub struct KnotHit<'b> {
    pub trajectory: usize,
    pub knot: usize,
    /// Clamped input.
    pub u: Vec<f64>,
    pub k: &'b DMatrix<f64>,
    /// Rows where clamping was active.
    pub clamped: Vec<bool>,
}

impl TrajectoryBundle {
    pub fn new(
        sys: &ControlSystem,
        path: String,
        states: Vec<usize>,
        inputs: Vec<usize>,
        starts: Vec<Vec<f64>>,
        trajectories: Vec<Trajectory>,
        stalled: Vec<bool>,
        init_diverged: Vec<bool>,
    ) -> Result<Self, DdpError> {
        let knots = trajectories.first().map_or(0, |t| t.u.len());
        if trajectories.iter().any(|t| t.u.len() != knots) || knots == 0 {
            return Err(DdpError::Invalid(format!("{path}: trajectories must share a nonzero length")));
        }
        let dim = states.len();
        let mut points = Vec::with_capacity(trajectories.len() * knots * dim);
        for t in &trajectories {
            for x in &t.x[..knots] {
                points.extend_from_slice(x);
            }
        }
        let periods = states
            .iter()
            .map(|&a| sys.is_periodic(a).then(|| sys.s_full.width(a)))
            .collect();
        let index = KdTree::new(points, dim, periods);
        Ok(TrajectoryBundle {
            path,
            states,
            inputs,
            starts,
            trajectories,
            stalled,
            init_diverged,
            knots,
            index,
        })
    }

    /// Closest knot over all trajectories, ties to the smaller trajectory
    /// then the smaller knot.
    pub fn nearest(&self, z: &[f64]) -> (usize, usize) {
        let (key, _) = self.index.nearest(z).expect("bundle is non-empty");
        let key = key as usize;
        (key / self.knots, key % self.knots)
    }

    /// `U(t†) − K(t†)(z − X̃(t†))`, clamped to the input bounds.
    pub fn query(&self, sys: &ControlSystem, z: &[f64]) -> KnotHit<'_> {
        let (s, t) = self.nearest(z);
        let tr = &self.trajectories[s];
        let (uref, xref, k) = (&tr.u[t], &tr.x_ref[t], &tr.k[t]);
        let mut u = Vec::with_capacity(self.inputs.len());
        let mut clamped = Vec::with_capacity(self.inputs.len());
        for (r, &ax) in self.inputs.iter().enumerate() {
            let mut v = uref[r];
            for (c, &sa) in self.states.iter().enumerate() {
                v -= k[(r, c)] * sys.axis_difference(sa, z[c], xref[c]);
            }
            let cv = v.clamp(sys.input_lower[ax], sys.input_upper[ax]);
            clamped.push(cv != v);
            u.push(cv);
        }
        KnotHit { trajectory: s, knot: t, u, k, clamped }
    }

    pub fn stalled_count(&self) -> usize {
        self.stalled.iter().filter(|&&s| s).count()
    }

    pub fn unconverged_count(&self) -> usize {
        self.trajectories.iter().filter(|t| !t.converged).count()
    }
}

/// Nearest-neighbour sub-policy output for node state `z`.
pub fn nn_policy(sys: &ControlSystem, bundle: &TrajectoryBundle, z: &[f64]) -> Vec<f64> {
    bundle.query(sys, z).u
}

/// Composition of nearest-neighbour sub-policies over the full state.
pub struct NnPolicy<'a> {
    pub sys: &'a ControlSystem,
    pub bundles: &'a [TrajectoryBundle],
}

impl Policy for NnPolicy<'_> {
    fn control(&self, x: &[f64], u: &mut [f64]) {
        let mut z = Vec::new();
        for b in self.bundles {
            z.clear();
            z.extend(b.states.iter().map(|&a| x[a]));
            let hit = b.query(self.sys, &z);
            for (r, &ax) in b.inputs.iter().enumerate() {
                u[ax] = hit.u[r];
            }
        }
    }
}

fn envelope_exceeded(sys: &ControlSystem, prob: &DdpProblem, z: &[f64], envelope: f64) -> bool {
    let d2: f64 = prob
        .states
        .iter()
        .zip(z)
        .map(|(&a, &v)| sys.axis_difference(a, v, sys.goal_state[a]).powi(2))
        .sum();
    d2.sqrt() > envelope
}

/// One bundle per node of `d`, innermost first. Start states are the
/// corners of `S_eval` projected on each node's states; identical projections
/// are solved once.
pub fn build_bundles(
    sys: &ControlSystem,
    d: &Decomposition,
    cfg: &DdpConfig,
) -> Result<Vec<TrajectoryBundle>, DdpError> {
    d.validate(sys).map_err(|v| {
        DdpError::Invalid(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    })?;
    let plan = d.plan(sys);
    let gains = decomposition_gains(sys, &plan)?;
    let corners = sys.s_eval.corners();
    let (steps, dt) = (cfg.steps(sys), cfg.dt(sys));
    let envelope = RolloutConfig::for_system(sys).envelope;
    let mut bundles: Vec<TrajectoryBundle> = Vec::with_capacity(plan.len());
    for (idx, p) in plan.iter().enumerate() {
        let starts: Vec<Vec<f64>> = corners
            .iter()
            .map(|c| p.states.iter().map(|&a| c[a]).collect())
            .collect();
        let mut unique: Vec<Vec<f64>> = Vec::new();
        let slot: Vec<usize> = starts
            .iter()
            .map(|s| match unique.iter().position(|u| u == s) {
                Some(i) => i,
                None => {
                    unique.push(s.clone());
                    unique.len() - 1
                }
            })
            .collect();
        let bundle = {
            let inner = p
                .descendants
                .iter()
                .map(|&j| InnerBundle {
                    bundle: &bundles[j],
                    positions: plan[j]
                        .states
                        .iter()
                        .map(|a| p.states.iter().position(|b| b == a).expect("nested states"))
                        .collect(),
                })
                .collect();
            let prob = DdpProblem {
                sys,
                path: p.path.clone(),
                states: p.states.clone(),
                inputs: p.inputs.clone(),
                inner,
            };
            let goal_z = prob.goal();
            let goal_u: Vec<f64> = p.inputs.iter().map(|&a| sys.goal_input[a]).collect();
            let gain = gains.as_ref().map(|g| &g[idx]);
            let solved: Vec<Result<(Trajectory, bool, bool), DdpError>> = unique
                .par_iter()
                .map(|z0| {
                    let lqr_law = |_: usize, z: &[f64], out: &mut [f64]| {
                        out.copy_from_slice(&goal_u);
                        if let Some(k) = gain {
                            for (r, o) in out.iter_mut().enumerate() {
                                for (c, &a) in p.states.iter().enumerate() {
                                    *o -= k[(r, c)] * sys.axis_difference(a, z[c], goal_z[c]);
                                }
                            }
                        }
                    };
                    let init = prob.simulate(z0, steps, dt, lqr_law);
                    let (u0, diverged) = match init {
                        Ok(nom) if !nom.z.iter().any(|z| envelope_exceeded(sys, &prob, z, envelope)) => {
                            (nom.u, false)
                        }
                        _ => (vec![goal_u.clone(); steps], true),
                    };
                    match ddp_solve(&prob, z0, &u0, dt, cfg) {
                        Ok(t) => Ok((t, false, diverged)),
                        Err(DdpError::Stall { trajectory, .. }) => Ok((*trajectory, true, diverged)),
                        Err(e) => Err(e),
                    }
                })
                .collect();
            let solved = solved.into_iter().collect::<Result<Vec<_>, _>>()?;
            TrajectoryBundle::new(
                sys,
                p.path.clone(),
                p.states.clone(),
                p.inputs.clone(),
                starts,
                slot.iter().map(|&i| solved[i].0.clone()).collect(),
                slot.iter().map(|&i| solved[i].1).collect(),
                slot.iter().map(|&i| solved[i].2).collect(),
            )?
        };
        bundles.push(bundle);
    }
    Ok(bundles)
}

/// Full-system bundle: the DDP reference `V*_ddp` at every corner.
pub fn build_baseline(sys: &ControlSystem, cfg: &DdpConfig) -> Result<TrajectoryBundle, DdpError> {
    Ok(build_bundles(sys, &Decomposition::undecomposed(sys), cfg)?.remove(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerOutcome {
    pub v_star: f64,
    pub v_delta: f64,
    /// The rollout diverged and was assigned the ceiling.
    pub capped: bool,
}

#[derive(Debug)]
pub struct DdpEstimate {
    pub err: f64,
    pub corners: Vec<CornerOutcome>,
    pub bundles: Vec<TrajectoryBundle>,
}

impl DdpEstimate {
    pub fn capped_count(&self) -> usize {
        self.corners.iter().filter(|c| c.capped).count()
    }

    pub fn stalled_count(&self) -> usize {
        self.bundles.iter().map(TrajectoryBundle::stalled_count).sum()
    }
}

/// Mean over the corners of `S_eval` of the composed nearest-neighbour
/// policy's rollout cost minus the full-system DDP cost.
pub fn err_ddp(
    sys: &ControlSystem,
    d: &Decomposition,
    baseline: &TrajectoryBundle,
    cfg: &DdpConfig,
) -> Result<DdpEstimate, DdpError> {
    let bundles = build_bundles(sys, d, cfg)?;
    let (err, corners) = evaluate_bundles(sys, &bundles, baseline, cfg)?;
    Ok(DdpEstimate { err, corners, bundles })
}

/// Rolls the composed policy of `bundles` out from every corner. Rollouts
/// that leave the envelope or exceed `ceiling_factor · V*_ddp` are assigned
/// that ceiling.
pub fn evaluate_bundles(
    sys: &ControlSystem,
    bundles: &[TrajectoryBundle],
    baseline: &TrajectoryBundle,
    cfg: &DdpConfig,
) -> Result<(f64, Vec<CornerOutcome>), DdpError> {
    let policy = NnPolicy { sys, bundles };
    let corners = sys.s_eval.corners();
    if baseline.trajectories.len() != corners.len() {
        return Err(DdpError::Invalid("baseline does not cover every corner".into()));
    }
    let outcomes: Vec<CornerOutcome> = corners
        .par_iter()
        .zip(baseline.trajectories.par_iter())
        .map(|(x0, base)| {
            let v_star = base.cost;
            let ceiling = cfg.ceiling_factor * v_star;
            let rc = RolloutConfig {
                horizon: cfg.horizon(sys),
                dt: cfg.dt(sys),
                cost_ceiling: ceiling,
                ..RolloutConfig::for_system(sys)
            };
            match rollout(sys, &policy, x0, &rc) {
                Ok(r) if r.terminated_early.is_none() => {
                    CornerOutcome { v_star, v_delta: r.discounted_cost, capped: false }
                }
                _ => CornerOutcome { v_star, v_delta: ceiling, capped: true },
            }
        })
        .collect();
    let err = outcomes.iter().map(|c| c.v_delta - c.v_star).sum::<f64>() / outcomes.len() as f64;
    Ok((err, outcomes))
}

/// Writes a bundle as a PDGRID01 table over (trajectory, knot) with channels
/// `X, X̃, U, K` (row-major) and a JSON sidecar. The final knot carries only
/// its state; its other channels are zero.
pub fn save_bundle(path: &Path, sys: &ControlSystem, b: &TrajectoryBundle) -> std::io::Result<()> {
    let (nz, nu) = (b.states.len(), b.inputs.len());
    let channels = 2 * nz + nu + nu * nz;
    let dt = b.trajectories[0].dt;
    let grid = Grid::new(vec![
        Axis { lo: 0.0, hi: (b.trajectories.len() - 1) as f64, count: b.trajectories.len(), periodic: false },
        Axis { lo: 0.0, hi: b.knots as f64 * dt, count: b.knots + 1, periodic: false },
    ]);
    let mut data = Vec::with_capacity(grid.len() * channels);
    for t in &b.trajectories {
        for k in 0..=b.knots {
            data.extend_from_slice(&t.x[k]);
            if k < b.knots {
                data.extend_from_slice(&t.x_ref[k]);
                data.extend_from_slice(&t.u[k]);
                for r in 0..nu {
                    for c in 0..nz {
                        data.push(t.k[k][(r, c)]);
                    }
                }
            } else {
                data.extend(std::iter::repeat(0.0).take(nz + nu + nu * nz));
            }
        }
    }
    let meta = json!({
        "system": sys.name,
        "node": b.path,
        "states": b.states,
        "inputs": b.inputs,
        "dt": dt,
        "trajectories": b.trajectories.iter().enumerate().map(|(s, t)| json!({
            "corner": s,
            "start": b.starts[s],
            "cost": t.cost,
            "iterations": t.iterations,
            "converged": t.converged,
            "stalled": b.stalled[s],
            "init_diverged": b.init_diverged[s],
            "cost_history": t.cost_history,
        })).collect::<Vec<_>>(),
    });
    save_with_sidecar(path, &grid, channels, &data, &meta)
}

pub fn load_bundle(path: &Path, sys: &ControlSystem) -> Result<TrajectoryBundle, DdpError> {
    let io = |e: std::io::Error| DdpError::Invalid(format!("{}: {e}", path.display()));
    let (grid, channels, data, meta) = load_with_sidecar(path).map_err(io)?;
    let bad = |m: &str| DdpError::Invalid(format!("{}: {m}", path.display()));
    let indices = |key: &str| -> Result<Vec<usize>, DdpError> {
        meta[key]
            .as_array()
            .ok_or_else(|| bad(key))?
            .iter()
            .map(|v| v.as_u64().map(|v| v as usize).ok_or_else(|| bad(key)))
            .collect()
    };
    let states = indices("states")?;
    let inputs = indices("inputs")?;
    let (nz, nu) = (states.len(), inputs.len());
    if grid.dim() != 2 || channels != 2 * nz + nu + nu * nz {
        return Err(bad("channel layout does not match the sidecar"));
    }
    let dt = meta["dt"].as_f64().ok_or_else(|| bad("dt"))?;
    let entries = meta["trajectories"].as_array().ok_or_else(|| bad("trajectories"))?;
    let (count, knots) = (grid.axes[0].count, grid.axes[1].count - 1);
    if entries.len() != count {
        return Err(bad("trajectory count"));
    }
    let mut trajectories = Vec::with_capacity(count);
    let (mut starts, mut stalled, mut diverged) = (Vec::new(), Vec::new(), Vec::new());
    for (s, e) in entries.iter().enumerate() {
        let mut t = Trajectory {
            dt,
            times: (0..=knots).map(|k| k as f64 * dt).collect(),
            x: Vec::with_capacity(knots + 1),
            x_ref: Vec::with_capacity(knots),
            u: Vec::with_capacity(knots),
            k: Vec::with_capacity(knots),
            cost: e["cost"].as_f64().ok_or_else(|| bad("cost"))?,
            cost_history: e["cost_history"]
                .as_array()
                .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
                .unwrap_or_default(),
            iterations: e["iterations"].as_u64().unwrap_or(0) as usize,
            converged: e["converged"].as_bool().unwrap_or(false),
        };
        for k in 0..=knots {
            let row = &data[(s * (knots + 1) + k) * channels..(s * (knots + 1) + k + 1) * channels];
            t.x.push(row[..nz].to_vec());
            if k < knots {
                t.x_ref.push(row[nz..2 * nz].to_vec());
                t.u.push(row[2 * nz..2 * nz + nu].to_vec());
                t.k.push(DMatrix::from_row_slice(nu, nz, &row[2 * nz + nu..]));
            }
        }
        trajectories.push(t);
        starts.push(
            e["start"]
                .as_array()
                .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
                .unwrap_or_default(),
        );
        stalled.push(e["stalled"].as_bool().unwrap_or(false));
        diverged.push(e["init_diverged"].as_bool().unwrap_or(false));
    }
    let path_s = meta["node"].as_str().unwrap_or("").to_string();
    TrajectoryBundle::new(sys, path_s, states, inputs, starts, trajectories, stalled, diverged)
}
