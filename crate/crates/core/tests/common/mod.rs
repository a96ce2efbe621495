#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use polydec_core::ddp::{ddp_solve, DdpConfig, DdpProblem};
use polydec_core::decomp::enumerate_pure;
use polydec_core::linalg::{lyapunov_residual, min_symmetric_eigenvalue, riccati_residual, riccati_scale};
use polydec_core::lqr::{closed_loop_value, solve_lqr, subsystem_model, LqrAnalysis};
use polydec_core::sim::rk4_step;
use polydec_core::systems::{BoxDomain, Dynamics, Group};
use polydec_core::{ControlSystem, Decomposition};

/// Rows 1-8 of the biped reference ranking: (chain or nodes, err_lqr).
/// Groups: states com=0, torso=1; inputs F=0, tau=1.
pub const BIPED_ROWS: [(&str, f64); 8] = [
    (r#"{"kind":"cascaded","chain":[{"inputs":[0],"states":[0]},{"inputs":[1],"states":[1]}]}"#, 7.8e-3),
    (r#"{"kind":"cascaded","chain":[{"inputs":[1],"states":[1]},{"inputs":[0],"states":[0]}]}"#, 7.9e-3),
    (r#"{"kind":"decoupled","nodes":[{"inputs":[0],"states":[0]},{"inputs":[1],"states":[1]}]}"#, 0.016),
    (r#"{"kind":"cascaded","chain":[{"inputs":[1],"states":[0,1]},{"inputs":[0],"states":[]}]}"#, 0.027),
    (r#"{"kind":"cascaded","chain":[{"inputs":[0],"states":[0,1]},{"inputs":[1],"states":[]}]}"#, 0.34),
    (r#"{"kind":"cascaded","chain":[{"inputs":[0],"states":[1]},{"inputs":[1],"states":[0]}]}"#, 0.33),
    (r#"{"kind":"cascaded","chain":[{"inputs":[1],"states":[0]},{"inputs":[0],"states":[1]}]}"#, 4.9),
    (r#"{"kind":"decoupled","nodes":[{"inputs":[1],"states":[0]},{"inputs":[0],"states":[1]}]}"#, f64::INFINITY),
];

/// Rows 1-8 of the 2-link reference ranking: (decomposition, err_lqr, err_ddp).
/// Groups: states Theta1=0, Theta2=1; inputs tau1=0, tau2=1.
pub const MANIP2_ROWS: [(&str, f64, f64); 8] = [
    (r#"{"kind":"cascaded","chain":[{"inputs":[0],"states":[0]},{"inputs":[1],"states":[1]}]}"#, 2e-4, 2e-4),
    (r#"{"kind":"cascaded","chain":[{"inputs":[1],"states":[1]},{"inputs":[0],"states":[0]}]}"#, 1e-3, 1.5e-3),
    (r#"{"kind":"decoupled","nodes":[{"inputs":[0],"states":[0]},{"inputs":[1],"states":[1]}]}"#, 1.3e-3, 1.7e-3),
    (r#"{"kind":"cascaded","chain":[{"inputs":[0],"states":[1]},{"inputs":[1],"states":[0]}]}"#, 3e-3, 0.029),
    (r#"{"kind":"cascaded","chain":[{"inputs":[0],"states":[0,1]},{"inputs":[1],"states":[]}]}"#, 0.145, 4.0),
    (r#"{"kind":"cascaded","chain":[{"inputs":[1],"states":[0,1]},{"inputs":[0],"states":[]}]}"#, 1.2, 0.33),
    (r#"{"kind":"cascaded","chain":[{"inputs":[1],"states":[0]},{"inputs":[0],"states":[1]}]}"#, 0.17, 2.04),
    (r#"{"kind":"decoupled","nodes":[{"inputs":[1],"states":[0]},{"inputs":[0],"states":[1]}]}"#, f64::INFINITY, 66.0),
];

pub fn parse(rows: &[&str]) -> Vec<Decomposition> {
    rows.iter().map(|r| Decomposition::from_json(r).unwrap()).collect()
}

/// Dense 1-based ranks, ties share a rank, infinity ranks last.
pub fn ranks(values: &[f64]) -> Vec<usize> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    values.iter().map(|v| sorted.iter().position(|s| s == v).unwrap() + 1).collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn avg_ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (avg_ranks(a), avg_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Hand-differentiated cart-pole Jacobians.
pub fn cartpole_jacobian(sys: &ControlSystem, x: &[f64], u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let Dynamics::CartPole(p) = &sys.dynamics else { unreachable!() };
    let (mc, mp, l, g) = (p.cart_mass, p.pole_mass, p.pole_length, p.gravity);
    let (th, thd, f, tau) = (x[2], x[3], u[0], u[1]);
    let (s, c) = th.sin_cos();
    let (s2, c2) = ((2.0 * th).sin(), (2.0 * th).cos());
    let den = mc + mp * s;
    let dden = mp * c;
    let n1 = f - tau / l * c + mp * l * thd * thd * s + 0.5 * mp * g * s2;
    let dn1 = tau / l * s + mp * l * thd * thd * c + mp * g * c2;
    let n2 = tau / (l * l) * (mc / mp + 1.0) - f / l * c - 0.5 * mp * thd * thd * s2 - g / l * (mc + mp) * s;
    let dn2 = f / l * s - mp * thd * thd * c2 - g / l * (mc + mp) * c;
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 1)] = 1.0;
    a[(2, 3)] = 1.0;
    a[(1, 2)] = (dn1 * den - n1 * dden) / (den * den);
    a[(1, 3)] = 2.0 * mp * l * thd * s / den;
    a[(3, 2)] = (dn2 * den - n2 * dden) / (den * den);
    a[(3, 3)] = -mp * thd * s2 / den;
    let mut b = DMatrix::zeros(4, 2);
    b[(1, 0)] = 1.0 / den;
    b[(1, 1)] = -c / (l * den);
    b[(3, 0)] = -c / (l * den);
    b[(3, 1)] = (mc / mp + 1.0) / (l * l * den);
    (a, b)
}

pub fn oscillator() -> ControlSystem {
    ControlSystem {
        name: "oscillator".into(),
        dynamics: Dynamics::Linear {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        },
        input_lower: vec![-1e6],
        input_upper: vec![1e6],
        goal_state: vec![0.0, 0.0],
        goal_input: vec![0.0],
        q: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5])),
        r: DMatrix::from_element(1, 1, 0.1),
        lambda: 1.0,
        s_full: BoxDomain(vec![[-5.0, 5.0]; 2]),
        s_eval: BoxDomain(vec![[-1.0, 1.0]; 2]),
        grid_shape: vec![11, 11],
        periodic_axes: vec![],
        state_groups: vec![Group::new("x", vec![0]), Group::new("v", vec![1])],
        input_groups: vec![Group::new("u", vec![0])],
        horizon: 2.0,
        dt: 0.01,
    }
}

/// One RK4 step of a linear system, column by column.
pub fn step_matrices(sys: &ControlSystem, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (sys.n(), sys.m());
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut out = vec![0.0; n];
    for j in 0..n {
        let mut x = vec![0.0; n];
        x[j] = 1.0;
        rk4_step(sys, &x, &vec![0.0; m], h, &mut out).unwrap();
        a.column_mut(j).copy_from_slice(&out);
    }
    for j in 0..m {
        let mut u = vec![0.0; m];
        u[j] = 1.0;
        rk4_step(sys, &vec![0.0; n], &u, h, &mut out).unwrap();
        b.column_mut(j).copy_from_slice(&out);
    }
    (a, b)
}

/// Largest state and gain differences between DDP and the finite-horizon
/// discrete Riccati recursion on an unconstrained linear-quadratic problem.
pub fn riccati_oracle_gap() -> (f64, f64) {
    let sys = oscillator();
    let h = sys.dt;
    let steps = (sys.horizon / h).round() as usize;
    let (a, b) = step_matrices(&sys, h);
    let mut p = DMatrix::<f64>::zeros(2, 2);
    let mut gains = vec![DMatrix::zeros(1, 2); steps];
    for k in (0..steps).rev() {
        let w = (-sys.lambda * k as f64 * h).exp() * h;
        let s = &sys.r * w + b.transpose() * &p * &b;
        let kk = s.try_inverse().unwrap() * b.transpose() * &p * &a;
        let acl = &a - &b * &kk;
        p = &sys.q * w + kk.transpose() * &sys.r * &kk * w + acl.transpose() * &p * &acl;
        gains[k] = kk;
    }
    let x0 = [0.8, -0.6];
    let t = ddp_solve(&DdpProblem::full(&sys), &x0, &vec![vec![0.0]; steps], h, &DdpConfig::default()).unwrap();
    assert!(t.converged);
    let mut x = DVector::from_column_slice(&x0);
    let (mut dx, mut dk) = (0.0f64, 0.0f64);
    for k in 0..steps {
        for i in 0..2 {
            dx = dx.max((t.x[k][i] - x[i]).abs());
            dk = dk.max((t.k[k][(0, i)] - gains[k][(0, i)]).abs());
        }
        let u = -&gains[k] * &x;
        dx = dx.max((t.u[k][0] - u[0]).abs());
        x = &a * &x + &b * u;
    }
    (dx, dk)
}

fn shifted(a: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    a - DMatrix::identity(a.nrows(), a.nrows()) * (0.5 * lambda)
}

/// Every node of every decomposition of `sys`: Riccati residual of the node
/// solve, Lyapunov residual of the closed loop, and `P^δ − P* ⪰ 0` when stable.
pub fn check_residuals(sys: &ControlSystem, strict: bool) {
    let analysis = LqrAnalysis::new(sys).unwrap();
    let opt = &analysis.optimal;
    let a0 = shifted(&analysis.model.a, sys.lambda);
    let res = riccati_residual(&a0, &analysis.model.b, &sys.q, &sys.r, &opt.p);
    assert!(res <= 1e-8 * (1.0 + opt.p.norm()), "{}: full CARE residual {res}", sys.name);

    for d in enumerate_pure(sys, None).unwrap() {
        let plan = d.plan(sys);
        let mut gains: Vec<Option<DMatrix<f64>>> = vec![None; plan.len()];
        let mut stabilizable = true;
        for idx in 0..plan.len() {
            let sub = subsystem_model(sys, &plan, idx, &gains).unwrap();
            let Ok(sol) = solve_lqr(&sub.a, &sub.b, &sub.q, &sub.r, sys.lambda) else {
                stabilizable = false;
                break;
            };
            let sa = shifted(&sub.a, sys.lambda);
            let res = riccati_residual(&sa, &sub.b, &sub.q, &sub.r, &sol.p);
            let bound = 1e-8 * (1.0 + sol.p.norm());
            if strict {
                assert!(res <= bound, "{} {}: residual {res} > {bound}", sys.name, d.describe(sys));
            } else {
                let g = &sub.b * sub.r.clone().try_inverse().unwrap() * sub.b.transpose();
                let rel = res / riccati_scale(&sa, &g, &sub.q, &sol.p);
                assert!(res <= bound || rel <= 1e-6, "{} {}: relative residual {rel}", sys.name, d.describe(sys));
            }
            gains[idx] = Some(sol.k);
        }
        let est = analysis.estimate(sys, &d).unwrap();
        assert!(est.err >= -1e-9, "{}: err_lqr {}", d.describe(sys), est.err);
        if !stabilizable {
            assert!(est.err.is_infinite());
            continue;
        }
        let gain = est.gain.unwrap();
        let value = closed_loop_value(&analysis.model, &gain.k, &sys.q, &sys.r, sys.lambda);
        if !value.stable {
            assert!(est.err.is_infinite());
            continue;
        }
        let acl = shifted(&(&analysis.model.a - &analysis.model.b * &gain.k), sys.lambda);
        let c = &sys.q + gain.k.transpose() * &sys.r * &gain.k;
        let lres = lyapunov_residual(&acl, &c, &value.p);
        if strict {
            assert!(lres <= 1e-8 * (1.0 + value.p.norm()), "{}: Lyapunov residual {lres}", d.describe(sys));
        }
        let gap = min_symmetric_eigenvalue(&(&value.p - &opt.p));
        assert!(gap >= -1e-9 * (1.0 + opt.p.norm()), "{}: min eig {gap}", d.describe(sys));
    }
}

pub fn check_table(sys: &ControlSystem, rows: &[(&str, f64)]) {
    let ds = parse(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let got: Vec<f64> = ds.iter().map(|d| polydec_core::lqr::err_lqr(sys, d).unwrap()).collect();
    let want: Vec<f64> = rows.iter().map(|r| r.1).collect();
    check_values(&got, &want);
}

pub fn check_values(got: &[f64], want: &[f64]) {
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if w.is_infinite() {
            assert!(g.is_infinite(), "row {}: {g}", i + 1);
        } else {
            assert!((g / w - 1.0).abs() <= 0.5, "row {}: {g} vs {w}", i + 1);
        }
    }
    assert_eq!(ranks(got), ranks(want), "{got:?}");
}

/// Linear system with one state per group and one input per group.
pub fn synthetic(n: usize, m: usize) -> ControlSystem {
    ControlSystem {
        name: format!("linear{n}x{m}"),
        dynamics: Dynamics::Linear { a: DMatrix::zeros(n, n), b: DMatrix::from_element(n, m, 1.0) },
        input_lower: vec![-1.0; m],
        input_upper: vec![1.0; m],
        goal_state: vec![0.0; n],
        goal_input: vec![0.0; m],
        q: DMatrix::identity(n, n),
        r: DMatrix::identity(m, m),
        lambda: 1.0,
        s_full: BoxDomain(vec![[-1.0, 1.0]; n]),
        s_eval: BoxDomain(vec![[-0.5, 0.5]; n]),
        grid_shape: vec![5; n],
        periodic_axes: vec![],
        state_groups: (0..n).map(|i| Group::new(format!("x{i}"), vec![i])).collect(),
        input_groups: (0..m).map(|i| Group::new(format!("u{i}"), vec![i])).collect(),
        horizon: 1.0,
        dt: 0.01,
    }
}
