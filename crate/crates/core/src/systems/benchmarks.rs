use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{
    BenchmarkId, BipedParams, BoxDomain, CartPoleParams, ControlSystem, Dynamics, Group,
    LinkModel, ManipulatorParams, GRAVITY,
};

/// Right-leg length of the biped's goal stance (m).
pub(crate) const BIPED_STANCE_LEG_LENGTH: f64 = 0.96;

/// Link mass model used for the manipulator benchmarks.
pub(crate) const MANIPULATOR_LINKS: LinkModel = LinkModel::UniformRod;

pub fn load_benchmark(id: BenchmarkId) -> ControlSystem {
    match id {
        BenchmarkId::Cartpole => cartpole(),
        BenchmarkId::Biped3 => biped(),
        BenchmarkId::Manip2 => manipulator2(),
        BenchmarkId::Manip3 => manipulator3(),
    }
}

fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

fn groups(defs: &[(&str, &[usize])]) -> Vec<Group> {
    defs.iter().map(|(name, idx)| Group::new(*name, idx.to_vec())).collect()
}

fn cartpole() -> ControlSystem {
    let params = CartPoleParams {
        cart_mass: 5.0,
        pole_mass: 1.0,
        pole_length: 0.9,
        gravity: GRAVITY,
    };
    ControlSystem {
        name: "cartpole".into(),
        dynamics: Dynamics::CartPole(params),
        input_lower: vec![-6.0, -6.0],
        input_upper: vec![6.0, 6.0],
        goal_state: vec![0.0, 0.0, PI, 0.0],
        goal_input: vec![0.0, 0.0],
        q: diag(&[25.0, 0.02, 25.0, 0.02]),
        r: diag(&[1e-3, 1e-3]),
        lambda: 3.0,
        s_full: BoxDomain(vec![[-1.5, 1.5], [-3.0, 3.0], [0.0, 2.0 * PI], [-3.0, 3.0]]),
        s_eval: BoxDomain(vec![
            [-0.5, 0.5],
            [-1.0, 1.0],
            [2.0 * PI / 3.0, 4.0 * PI / 3.0],
            [-1.0, 1.0],
        ]),
        grid_shape: vec![31; 4],
        periodic_axes: vec![2],
        state_groups: groups(&[("x", &[0]), ("xdot", &[1]), ("theta", &[2]), ("thetadot", &[3])]),
        input_groups: groups(&[("F", &[0]), ("tau", &[1])]),
        horizon: 5.0,
        dt: 1e-3,
    }
}

/// Goal stance: hip midway between the footholds, torso upright, legs carrying
/// the body weight with zero hip torque.
pub(crate) fn biped_goal(p: &BipedParams, leg_length: f64) -> (Vec<f64>, Vec<f64>) {
    let half = 0.5 * p.foot_spacing;
    let alpha_r = PI / 2.0 + (half / leg_length).asin();
    let force = p.mass * p.gravity / (2.0 * alpha_r.sin());
    (
        vec![leg_length, alpha_r, 0.0, 0.0, 0.0, 0.0],
        vec![force, force, 0.0, 0.0],
    )
}

fn biped() -> ControlSystem {
    let params = BipedParams {
        mass: 72.0,
        inertia: 3.0,
        hip_offset: 0.2,
        foot_spacing: 0.5,
        rest_length: 1.15,
        gravity: GRAVITY,
    };
    let mg = params.mass * params.gravity;
    let tau_max = 0.25 * mg / params.rest_length;
    let (goal_state, goal_input) = biped_goal(&params, BIPED_STANCE_LEG_LENGTH);
    let a0 = PI / 2.0;
    ControlSystem {
        name: "biped3".into(),
        dynamics: Dynamics::Biped(params),
        input_lower: vec![0.0, 0.0, -tau_max, -tau_max],
        input_upper: vec![3.0 * mg, 3.0 * mg, tau_max, tau_max],
        goal_state,
        goal_input,
        q: diag(&[350.0, 700.0, 1.5, 1.5, 500.0, 5.0]),
        r: diag(&[1e-6, 1e-6, 1e-5, 1e-5]),
        lambda: 1.0,
        s_full: BoxDomain(vec![
            [0.85, 1.25],
            [a0, a0 + 0.6],
            [-0.3, 0.5],
            [-0.5, 1.0],
            [-PI / 8.0, PI / 8.0],
            [-2.0, 2.0],
        ]),
        s_eval: BoxDomain(vec![
            [0.95, 1.0],
            [a0 + 0.3, a0 + 0.4],
            [-0.1, 0.1],
            [-0.3, 0.3],
            [-0.2, 0.2],
            [-0.2, 0.2],
        ]),
        grid_shape: vec![13, 13, 14, 19, 14, 21],
        periodic_axes: vec![],
        state_groups: groups(&[("com", &[0, 1, 2, 3]), ("torso", &[4, 5])]),
        input_groups: groups(&[("F", &[0, 1]), ("tau", &[2, 3])]),
        horizon: 4.0,
        dt: 1e-3,
    }
}

fn manipulator2() -> ControlSystem {
    let params = ManipulatorParams {
        masses: vec![1.25, 0.25],
        lengths: vec![0.25, 0.125],
        link_model: MANIPULATOR_LINKS,
        gravity: GRAVITY,
    };
    ControlSystem {
        name: "manip2".into(),
        dynamics: Dynamics::Manipulator(params),
        input_lower: vec![-5.0, -0.5],
        input_upper: vec![5.0, 0.5],
        goal_state: vec![PI, 0.0, 0.0, 0.0],
        goal_input: vec![0.0, 0.0],
        q: diag(&[1.6, 1.6, 0.12, 0.12]),
        r: diag(&[0.003, 0.3]),
        lambda: 3.0,
        s_full: BoxDomain(vec![[0.0, 2.0 * PI], [-PI, PI], [-3.0, 3.0], [-3.0, 3.0]]),
        s_eval: BoxDomain(vec![
            [2.0 * PI / 3.0, 4.0 * PI / 3.0],
            [-PI / 3.0, PI / 3.0],
            [-0.5, 0.5],
            [-0.5, 0.5],
        ]),
        grid_shape: vec![31; 4],
        periodic_axes: vec![0, 1],
        state_groups: groups(&[("Theta1", &[0, 2]), ("Theta2", &[1, 3])]),
        input_groups: groups(&[("tau1", &[0]), ("tau2", &[1])]),
        horizon: 4.0,
        dt: 1e-3,
    }
}

fn manipulator3() -> ControlSystem {
    let params = ManipulatorParams {
        masses: vec![2.75, 0.55, 0.11],
        lengths: vec![0.5, 0.25, 0.125],
        link_model: MANIPULATOR_LINKS,
        gravity: GRAVITY,
    };
    ControlSystem {
        name: "manip3".into(),
        dynamics: Dynamics::Manipulator(params),
        input_lower: vec![-16.0, -7.5, -1.0],
        input_upper: vec![16.0, 7.5, 1.0],
        goal_state: vec![PI, 0.0, 0.0, 0.0, 0.0, 0.0],
        goal_input: vec![0.0, 0.0, 0.0],
        q: diag(&[1.6, 1.6, 1.6, 0.12, 0.12, 0.12]),
        r: diag(&[0.004, 0.04, 0.4]),
        lambda: 3.0,
        s_full: BoxDomain(vec![
            [0.0, 2.0 * PI],
            [-PI, PI],
            [-PI, PI],
            [-3.0, 3.0],
            [-3.0, 3.0],
            [-3.0, 3.0],
        ]),
        s_eval: BoxDomain(vec![
            [2.0 * PI / 3.0, 4.0 * PI / 3.0],
            [-PI / 3.0, PI / 3.0],
            [-PI / 3.0, PI / 3.0],
            [-0.5, 0.5],
            [-0.5, 0.5],
            [-0.5, 0.5],
        ]),
        grid_shape: vec![17, 17, 17, 13, 13, 13],
        periodic_axes: vec![0, 1, 2],
        state_groups: groups(&[("Theta1", &[0, 3]), ("Theta2", &[1, 4]), ("Theta3", &[2, 5])]),
        input_groups: groups(&[("tau1", &[0]), ("tau2", &[1]), ("tau3", &[2])]),
        horizon: 4.0,
        dt: 1e-3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appendix_constants() {
        let cp = load_benchmark(BenchmarkId::Cartpole);
        assert_eq!(cp.lambda, 3.0);
        assert_eq!(cp.r, diag(&[1e-3, 1e-3]));
        let biped = load_benchmark(BenchmarkId::Biped3);
        let tau_max = 0.25 * 72.0 * 9.81 / 1.15;
        assert!((biped.input_upper[2] - tau_max).abs() < 1e-12);
        assert_eq!(biped.input_upper[0], 3.0 * 72.0 * 9.81);
        let m3 = load_benchmark(BenchmarkId::Manip3);
        assert_eq!(m3.grid_shape, vec![17, 17, 17, 13, 13, 13]);
    }

    #[test]
    fn biped_goal_is_static_equilibrium() {
        let sys = load_benchmark(BenchmarkId::Biped3);
        let f = sys.eval_dynamics(&sys.goal_state, &sys.goal_input).unwrap();
        assert!(f.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8, "{f:?}");
        // Hip midway between the footholds.
        let hip_x = sys.goal_state[0] * sys.goal_state[1].cos();
        assert!((hip_x + 0.25).abs() < 1e-12);
    }

    #[test]
    fn goals_are_equilibria() {
        for id in BenchmarkId::ALL {
            let sys = load_benchmark(id);
            let f = sys.eval_dynamics(&sys.goal_state, &sys.goal_input).unwrap();
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm < 1e-8, "{id}: {norm}");
        }
    }
}
