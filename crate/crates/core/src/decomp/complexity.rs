use serde::{Deserialize, Serialize};

use super::Decomposition;
use crate::systems::ControlSystem;

/// Work budget of the grid solver, used to predict relative compute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverBudget {
    /// Discrete action samples per input axis.
    pub actions_per_input: usize,
    /// Policy improvement steps times evaluation sweeps.
    pub iterations: usize,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget {
            actions_per_input: 9,
            iterations: 100 * 2000,
        }
    }
}

/// Predicted compute time relative to solving the undecomposed system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub relative_cost: f64,
    pub per_node_cost: Vec<f64>,
}

fn node_work(grid: &[usize], state_axes: &[usize], inputs: usize, budget: &SolverBudget) -> f64 {
    let cells: f64 = state_axes.iter().map(|&a| grid[a] as f64).product();
    cells * (budget.actions_per_input as f64).powi(inputs as i32) * budget.iterations as f64
}

/// Grid cells times sampled actions times iterations, per node, normalized by
/// the same quantity for the undecomposed system.
pub fn estimate_compute_time(
    sys: &ControlSystem,
    d: &Decomposition,
    budget: &SolverBudget,
) -> ComplexityEstimate {
    let all_axes: Vec<usize> = (0..sys.n()).collect();
    let full = node_work(&sys.grid_shape, &all_axes, sys.m(), budget);
    let per_node_cost: Vec<f64> = d
        .plan(sys)
        .iter()
        .map(|p| node_work(&sys.grid_shape, &p.states, p.inputs.len(), budget) / full)
        .collect();
    ComplexityEstimate {
        relative_cost: per_node_cost.iter().sum(),
        per_node_cost,
    }
}
