//! Linear-quadratic suboptimality estimate of a decomposition.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::decomp::{Decomposition, NodePlan};
use crate::linalg::{self, LinalgError};
use crate::sim::{rollout, RolloutConfig, Termination};
use crate::systems::{ControlSystem, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqrError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("node {0}: inner gain missing")]
    MissingInnerGain(String),
    #[error("gain blocks overlap at ({row}, {col})")]
    Overlap { row: usize, col: usize },
    #[error("invalid decomposition: {0}")]
    Invalid(String),
}

/// Linearization `(A, B)` of the dynamics about a point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub x_goal: Vec<f64>,
    pub u_goal: Vec<f64>,
}

impl LinearModel {
    pub fn at_goal(sys: &ControlSystem) -> Result<Self, SystemError> {
        let (a, b) = sys.linearize(&sys.goal_state, &sys.goal_input)?;
        Ok(LinearModel {
            a,
            b,
            x_goal: sys.goal_state.clone(),
            u_goal: sys.goal_input.clone(),
        })
    }
}

/// Full `m×n` feedback gain together with its structural pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub k: DMatrix<f64>,
    /// `true` where an entry belongs to some sub-policy block.
    pub block_mask: DMatrix<bool>,
}

impl GainMatrix {
    pub fn dense(k: DMatrix<f64>) -> Self {
        let block_mask = DMatrix::from_element(k.nrows(), k.ncols(), true);
        GainMatrix { k, block_mask }
    }

    /// `u^d − K(x − x^d)` with wrapped angle differences, not clamped.
    pub fn control(&self, sys: &ControlSystem, x: &[f64], u: &mut [f64]) {
        let dx = sys.state_error(x);
        for (r, ur) in u.iter_mut().enumerate() {
            let mut acc = sys.goal_input[r];
            for (c, d) in dx.iter().enumerate() {
                acc -= self.k[(r, c)] * d;
            }
            *ur = acc;
        }
    }
}

/// `V(x) = (x − x^d)ᵀ P (x − x^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticValue {
    pub p: DMatrix<f64>,
    pub center: Vec<f64>,
    pub stable: bool,
}

impl QuadraticValue {
    fn unstable(n: usize, center: Vec<f64>) -> Self {
        QuadraticValue {
            p: DMatrix::from_element(n, n, f64::INFINITY),
            center,
            stable: false,
        }
    }

    pub fn eval(&self, sys: &ControlSystem, x: &[f64]) -> f64 {
        if !self.stable {
            return f64::INFINITY;
        }
        let dx: Vec<f64> = (0..x.len())
            .map(|i| sys.axis_difference(i, x[i], self.center[i]))
            .collect();
        crate::systems::quad_form(&self.p, &dx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

/// Discounted LQR through the CARE of `A − (λ/2)I`.
pub fn solve_lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    lambda: f64,
) -> Result<LqrSolution, LinalgError> {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * (0.5 * lambda);
    let p = linalg::care(&shifted, b, q, r)?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(LinalgError::Singular("R inverse"))?;
    let k = r_inv * b.transpose() * &p;
    Ok(LqrSolution { k, p })
}

/// Reduced problem for one node, in the coordinates of its effective states.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemModel {
    pub a: DMatrix<f64>,
    /// The inner-policy term `Π`, already included in `a`.
    pub pi: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn position(axes: &[usize], axis: usize) -> Option<usize> {
    axes.iter().position(|&a| a == axis)
}

/// Linear subsystem of node `idx` of `plan`.
///
/// The linearization point has the node's own and its inner sub-policies'
/// inputs at the goal and every other input at zero. Each inner gain `K_j`
/// contributes `−B_j K_j` at the inner node's state columns, and its input
/// cost `K_jᵀ R_j K_j` to the node's state weight.
pub fn subsystem_model(
    sys: &ControlSystem,
    plan: &[NodePlan],
    idx: usize,
    inner_gains: &[Option<DMatrix<f64>>],
) -> Result<SubsystemModel, LqrError> {
    let node = &plan[idx];
    let mut u0 = vec![0.0; sys.m()];
    for &j in std::iter::once(&idx).chain(&node.descendants) {
        for &ax in &plan[j].inputs {
            u0[ax] = sys.goal_input[ax];
        }
    }
    let (a_full, b_full) = sys.linearize(&sys.goal_state, &u0)?;
    let xs = &node.states;
    let a = select(&a_full, xs, xs);
    let b = select(&b_full, xs, &node.inputs);
    let mut q = select(&sys.q, xs, xs);
    let r = select(&sys.r, &node.inputs, &node.inputs);

    let mut pi = DMatrix::zeros(xs.len(), xs.len());
    if !node.descendants.is_empty() {
        let inner_inputs: Vec<usize> = node
            .descendants
            .iter()
            .flat_map(|&j| plan[j].inputs.iter().copied())
            .collect();
        // Stacked inner gain expressed in this node's state coordinates.
        let mut k_inner = DMatrix::zeros(inner_inputs.len(), xs.len());
        let mut row = 0;
        for &j in &node.descendants {
            let kj = inner_gains
                .get(j)
                .and_then(Option::as_ref)
                .ok_or_else(|| LqrError::MissingInnerGain(node.path.clone()))?;
            for r_local in 0..plan[j].inputs.len() {
                for (c_local, &ax) in plan[j].states.iter().enumerate() {
                    let c = position(xs, ax).ok_or_else(|| {
                        LqrError::Invalid(format!("{}: inner state outside node", node.path))
                    })?;
                    k_inner[(row + r_local, c)] = kj[(r_local, c_local)];
                }
            }
            row += plan[j].inputs.len();
        }
        let b_inner = select(&b_full, xs, &inner_inputs);
        pi = -(&b_inner * &k_inner);
        let r_inner = select(&sys.r, &inner_inputs, &inner_inputs);
        q += k_inner.transpose() * r_inner * &k_inner;
    }
    Ok(SubsystemModel { a: a + &pi, pi, b, q, r })
}

/// Places each node gain at its input rows and effective-state columns.
pub fn assemble_gain(
    sys: &ControlSystem,
    plan: &[NodePlan],
    gains: &[DMatrix<f64>],
) -> Result<GainMatrix, LqrError> {
    if gains.len() != plan.len() {
        return Err(LqrError::Invalid(format!(
            "{} gains for {} nodes",
            gains.len(),
            plan.len()
        )));
    }
    let mut k = DMatrix::zeros(sys.m(), sys.n());
    let mut mask = DMatrix::from_element(sys.m(), sys.n(), false);
    for (node, g) in plan.iter().zip(gains) {
        if g.shape() != (node.inputs.len(), node.states.len()) {
            return Err(LqrError::Invalid(format!("{}: gain shape", node.path)));
        }
        for (i, &row) in node.inputs.iter().enumerate() {
            for (j, &col) in node.states.iter().enumerate() {
                if mask[(row, col)] {
                    return Err(LqrError::Overlap { row, col });
                }
                mask[(row, col)] = true;
                k[(row, col)] = g[(i, j)];
            }
        }
    }
    Ok(GainMatrix { k, block_mask: mask })
}

/// Value of `u = u^d − K(x − x^d)` on the linear model, from the Lyapunov
/// equation of `A − BK − (λ/2)I`.
pub fn closed_loop_value(
    model: &LinearModel,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    lambda: f64,
) -> QuadraticValue {
    let n = model.a.nrows();
    let acl = &model.a - &model.b * k - DMatrix::identity(n, n) * (0.5 * lambda);
    if !linalg::is_hurwitz(&acl) {
        return QuadraticValue::unstable(n, model.x_goal.clone());
    }
    let c = q + k.transpose() * r * k;
    match linalg::lyapunov(&acl, &c) {
        Ok(p) if p.iter().all(|v| v.is_finite()) => QuadraticValue {
            p,
            center: model.x_goal.clone(),
            stable: true,
        },
        _ => QuadraticValue::unstable(n, model.x_goal.clone()),
    }
}

/// Per-node gains, innermost first. `None` when some node is unstabilizable.
pub fn decomposition_gains(
    sys: &ControlSystem,
    plan: &[NodePlan],
) -> Result<Option<Vec<DMatrix<f64>>>, LqrError> {
    let mut gains: Vec<Option<DMatrix<f64>>> = vec![None; plan.len()];
    for idx in 0..plan.len() {
        let sub = subsystem_model(sys, plan, idx, &gains)?;
        match solve_lqr(&sub.a, &sub.b, &sub.q, &sub.r, sys.lambda) {
            Ok(sol) => gains[idx] = Some(sol.k),
            Err(LinalgError::Unstabilizable) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(gains.into_iter().map(|g| g.expect("solved")).collect()))
}

/// Mean of `(x−c)ᵀM(x−c)` over the uniform box, `c` the goal.
pub fn box_mean_quadratic(sys: &ControlSystem, m: &DMatrix<f64>) -> f64 {
    let dom = &sys.s_eval;
    let center = dom.center();
    let mu: Vec<f64> = (0..sys.n())
        .map(|i| sys.axis_difference(i, center[i], sys.goal_state[i]))
        .collect();
    let trace: f64 = (0..sys.n())
        .map(|i| m[(i, i)] * dom.width(i).powi(2) / 12.0)
        .sum();
    trace + crate::systems::quad_form(m, &mu)
}

/// Everything needed to score decompositions of one system.
#[derive(Debug, Clone)]
pub struct LqrAnalysis {
    pub model: LinearModel,
    pub optimal: LqrSolution,
}

/// Result of scoring one decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrEstimate {
    /// `None` when some subsystem is unstabilizable.
    pub gain: Option<GainMatrix>,
    pub value: Option<QuadraticValue>,
    pub err: f64,
}

impl LqrAnalysis {
    pub fn new(sys: &ControlSystem) -> Result<Self, LqrError> {
        let model = LinearModel::at_goal(sys)?;
        let optimal = solve_lqr(&model.a, &model.b, &sys.q, &sys.r, sys.lambda)?;
        Ok(LqrAnalysis { model, optimal })
    }

    pub fn optimal_gain(&self) -> GainMatrix {
        GainMatrix::dense(self.optimal.k.clone())
    }

    pub fn estimate(&self, sys: &ControlSystem, d: &Decomposition) -> Result<LqrEstimate, LqrError> {
        d.validate(sys).map_err(|v| {
            LqrError::Invalid(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
        })?;
        if d.is_undecomposed() {
            return Ok(LqrEstimate {
                gain: Some(self.optimal_gain()),
                value: Some(QuadraticValue { p: self.optimal.p.clone(), center: self.model.x_goal.clone(), stable: true }),
                err: 0.0,
            });
        }
        let plan = d.plan(sys);
        let Some(gains) = decomposition_gains(sys, &plan)? else {
            return Ok(LqrEstimate { gain: None, value: None, err: f64::INFINITY });
        };
        let gain = assemble_gain(sys, &plan, &gains)?;
        let value = closed_loop_value(&self.model, &gain.k, &sys.q, &sys.r, sys.lambda);
        let err = if value.stable {
            box_mean_quadratic(sys, &(&value.p - &self.optimal.p))
        } else {
            f64::INFINITY
        };
        Ok(LqrEstimate { gain: Some(gain), value: Some(value), err })
    }
}

/// Mean of `V^δ_lqr − V*_lqr` over `S_eval`; `+∞` when unstable.
pub fn err_lqr(sys: &ControlSystem, d: &Decomposition) -> Result<f64, LqrError> {
    Ok(LqrAnalysis::new(sys)?.estimate(sys, d)?.err)
}

/// Start states and rollout settings for the bounded-input error bar.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub rollout: RolloutConfig,
    /// Cost assigned to a rollout that leaves the envelope or exceeds the ceiling.
    pub cost_ceiling: f64,
}

impl SampleConfig {
    pub fn for_system(sys: &ControlSystem) -> Self {
        SampleConfig {
            rollout: RolloutConfig::for_system(sys),
            cost_ceiling: 1e6,
        }
    }
}

/// Start states: the corners of `S_eval` and its center, with weights that
/// make the weighted mean of any quadratic equal its uniform box mean.
pub fn corner_samples(sys: &ControlSystem) -> Vec<(Vec<f64>, f64)> {
    let corners = sys.s_eval.corners();
    let w = 1.0 / (3.0 * corners.len() as f64);
    let mut out: Vec<(Vec<f64>, f64)> = corners.into_iter().map(|c| (c, w)).collect();
    out.push((sys.s_eval.center(), 2.0 / 3.0));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedError {
    pub value: f64,
    /// Start states whose rollout hit the ceiling.
    pub diverged: Vec<usize>,
}

/// Weighted mean over the samples of the clamped rollout cost of `K^δ`
/// minus that of the clamped optimal gain, both on the nonlinear dynamics.
pub fn lqr_saturated_error(
    sys: &ControlSystem,
    gain: &GainMatrix,
    optimal: &GainMatrix,
    cfg: &SampleConfig,
) -> Result<SaturatedError, LqrError> {
    let mut rcfg = cfg.rollout.clone();
    rcfg.cost_ceiling = rcfg.cost_ceiling.min(cfg.cost_ceiling);
    let run = |k: &GainMatrix, x0: &[f64]| -> (f64, bool) {
        let pol = |x: &[f64], u: &mut [f64]| k.control(sys, x, u);
        match rollout(sys, &pol, x0, &rcfg) {
            Ok(r) if r.terminated_early.is_none() => (r.discounted_cost, false),
            Ok(r) if r.terminated_early == Some(Termination::CostCeiling) => {
                (cfg.cost_ceiling, true)
            }
            _ => (cfg.cost_ceiling, true),
        }
    };
    let mut total = 0.0;
    let mut diverged = Vec::new();
    for (s, (x0, w)) in corner_samples(sys).iter().enumerate() {
        let (cd, fd) = run(gain, x0);
        let (co, fo) = run(optimal, x0);
        if fd || fo {
            diverged.push(s);
        }
        total += w * (cd - co);
    }
    Ok(SaturatedError { value: total, diverged })
}
