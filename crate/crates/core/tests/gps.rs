use nalgebra::DMatrix;
use polydec_core::ddp::{ddp_solve, DdpConfig, DdpProblem};
use polydec_core::gps::{
    backup_dt, eval_composed, evaluate_policy_value, policy_iteration, solve_decomposition, GpsConfig, NodeProblem,
};
use polydec_core::sim::rk4_step;
use polydec_core::systems::{BoxDomain, Dynamics, Group};
use polydec_core::{load_benchmark, BenchmarkId, ControlSystem, Decomposition};

fn linear(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: f64, bound: f64, half: f64, k: usize) -> ControlSystem {
    let n = a.nrows();
    ControlSystem {
        name: "linear".into(),
        dynamics: Dynamics::Linear { a, b },
        input_lower: vec![-bound],
        input_upper: vec![bound],
        goal_state: vec![0.0; n],
        goal_input: vec![0.0],
        q,
        r: DMatrix::from_element(1, 1, r),
        lambda: 1.0,
        s_full: BoxDomain(vec![[-half, half]; n]),
        s_eval: BoxDomain(vec![[-0.5, 0.5]; n]),
        grid_shape: vec![k; n],
        periodic_axes: vec![],
        state_groups: (0..n).map(|i| Group::new(format!("x{i}"), vec![i])).collect(),
        input_groups: vec![Group::new("u", vec![0])],
        horizon: 12.0,
        dt: 1e-3,
    }
}

#[test]
fn scalar_lq_matches_riccati() {
    let (q, r) = (1.0, 1.0);
    let sys = linear(
        DMatrix::zeros(1, 1),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, q),
        r,
        1.5,
        2.0,
        401,
    );
    let cfg = GpsConfig { actions_per_input: 121, eval_tol: 1e-9, max_sweeps: 100_000, ..GpsConfig::default() };
    let (v, pol, _) = policy_iteration(&NodeProblem::full(&sys), &cfg).unwrap();
    // ẋ = u, shifted by λ/2: P solves −λP − P²/r + q = 0.
    let p = r * (-0.5 * sys.lambda + (0.25 * sys.lambda * sys.lambda + q / r).sqrt());
    for x in [-1.0, -0.7, -0.4, 0.4, 0.7, 1.0] {
        let got = v.interpolate(&[x]);
        let want = p * x * x;
        assert!((got / want - 1.0).abs() < 0.02, "x={x}: {got} vs {want}");
        let mut u = [0.0];
        pol.interpolate(&[x], &mut u);
        assert!((u[0] + p / r * x).abs() < 0.05, "x={x}: u {}", u[0]);
    }
}

fn coarse_cartpole(scale: f64) -> ControlSystem {
    load_benchmark(BenchmarkId::Cartpole).with_grid_scale(scale)
}

#[test]
fn improvement_is_monotone_bounded_and_deterministic() {
    let sys = coarse_cartpole(0.5);
    let d = Decomposition::from_json(
        r#"{"kind":"cascaded","chain":[{"inputs":[1],"states":[2,3]},{"inputs":[0],"states":[0,1]}]}"#,
    )
    .unwrap();
    let cfg = GpsConfig::default();
    let a = solve_decomposition(&sys, &d, &cfg).unwrap();
    let b = solve_decomposition(&sys, &d, &cfg).unwrap();
    for (na, nb) in a.nodes.iter().zip(&b.nodes) {
        assert!(
            na.stats.max_value_increase <= na.stats.value_tolerance,
            "{}: value rose by {} (tolerance {})",
            na.plan.path,
            na.stats.max_value_increase,
            na.stats.value_tolerance
        );
        assert_eq!(na.value.values, nb.value.values);
        assert_eq!(na.policy.controls, nb.policy.controls);
        for u in na.policy.controls.chunks(na.policy.inputs.len()) {
            for (v, &ax) in u.iter().zip(&na.policy.inputs) {
                assert!(*v >= sys.input_lower[ax] && *v <= sys.input_upper[ax]);
            }
        }
    }
    for x in [[0.3, -0.5, 2.5, 0.7], [-1.4, 2.9, 0.1, -3.0]] {
        let u = eval_composed(&sys, &a, &x);
        assert!(u.iter().zip(&sys.input_upper).all(|(v, hi)| v.abs() <= *hi));
    }
}

fn mean_over_eval(sys: &ControlSystem, v: &polydec_core::grid::ValueGrid) -> f64 {
    let mut x = vec![0.0; sys.n()];
    let (mut sum, mut count) = (0.0, 0);
    for c in 0..v.values.len() {
        v.grid.point_into(c, &mut x);
        if (0..sys.n()).all(|i| x[i] >= sys.s_eval.lo(i) - 1e-9 && x[i] <= sys.s_eval.hi(i) + 1e-9) {
            sum += v.values[c];
            count += 1;
        }
    }
    sum / count as f64
}

#[test]
fn halving_the_backup_step_barely_moves_the_value() {
    let sys = coarse_cartpole(0.5);
    let d = Decomposition::undecomposed(&sys);
    let cfg = GpsConfig::default();
    let dt = backup_dt(&NodeProblem::full(&sys), &cfg).unwrap();
    let coarse = solve_decomposition(&sys, &d, &GpsConfig { dt: Some(dt), ..cfg.clone() }).unwrap();
    let fine = solve_decomposition(&sys, &d, &GpsConfig { dt: Some(dt / 2.0), ..cfg.clone() }).unwrap();
    let vc = evaluate_policy_value(&sys, &coarse, dt, &cfg).unwrap();
    let vf = evaluate_policy_value(&sys, &fine, dt / 2.0, &cfg).unwrap();
    let (mc, mf) = (mean_over_eval(&sys, &vc.value), mean_over_eval(&sys, &vf.value));
    assert!((mc / mf - 1.0).abs() < 0.05, "{mc} vs {mf}");
}

#[test]
fn bounded_double_integrator_matches_trajectory_optimization() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.1]));
    let sys = linear(a, b, q, 0.1, 1.0, 2.0, 321);
    let cfg = GpsConfig { actions_per_input: 41, eval_tol: 1e-8, max_sweeps: 100_000, ..GpsConfig::default() };
    let (v, _, _) = policy_iteration(&NodeProblem::full(&sys), &cfg).unwrap();
    let prob = DdpProblem::full(&sys);
    let dcfg = DdpConfig::default();
    let steps = dcfg.steps(&sys);
    for x0 in [[1.0, 0.0], [-1.0, 0.5], [0.0, 1.0], [0.5, -1.0], [-0.8, -0.6]] {
        let t = ddp_solve(&prob, &x0, &vec![vec![0.0]; steps], sys.dt, &dcfg).unwrap();
        let got = v.interpolate(&x0);
        assert!((got / t.cost - 1.0).abs() < 0.05, "{x0:?}: grid {got} vs trajectory {}", t.cost);
    }
}

#[test]
fn decoupled_pole_node_swings_up() {
    let sys = load_benchmark(BenchmarkId::Cartpole);
    let d = Decomposition::from_json(
        r#"{"kind":"decoupled","nodes":[{"inputs":[0],"states":[0,1]},{"inputs":[1],"states":[2,3]}]}"#,
    )
    .unwrap();
    let p = solve_decomposition(&sys, &d, &GpsConfig::default()).unwrap();
    let pole = p.nodes.iter().find(|n| n.plan.inputs == [1]).unwrap();
    // The pole dynamics do not depend on the cart state, so with F = 0 the
    // pole evolves exactly as in its node problem.
    let mut x = vec![0.0; 4];
    let mut next = vec![0.0; 4];
    let mut u = [0.0; 2];
    let mut tau = [0.0];
    let h = 1e-3;
    for _ in 0..(sys.horizon / h) as usize {
        pole.policy.interpolate(&[x[2], x[3]], &mut tau);
        u[1] = tau[0].clamp(sys.input_lower[1], sys.input_upper[1]);
        rk4_step(&sys, &x, &u, h, &mut next).unwrap();
        std::mem::swap(&mut x, &mut next);
    }
    let err = sys.axis_difference(2, x[2], std::f64::consts::PI).abs();
    assert!(err < 0.1, "final angle error {err}");
}
