//! Dense solvers for the continuous-time algebraic Riccati and Lyapunov equations.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("pair (A, B) is not stabilizable")]
    Unstabilizable,
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
}

/// Accepted ratio of the Riccati residual to [`riccati_scale`] when the
/// absolute bound is out of floating-point reach.
pub const RELATIVE_BACKWARD_TOL: f64 = 1e-6;

/// Real-part margin below which an eigenvalue counts as stable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return f64::NEG_INFINITY;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    spectral_abscissa(a) < -STABILITY_MARGIN
}

pub fn min_symmetric_eigenvalue(p: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (p + p.transpose());
    sym.symmetric_eigenvalues().min()
}

/// Solves `Aᵀ P + P A + C = 0` through its Kronecker form.
///
/// Has a unique solution iff no two eigenvalues of `A` sum to zero; returns
/// `Singular` otherwise.
pub fn lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    let at = a.transpose();
    // Column-major vec: vec(AᵀP) = (I ⊗ Aᵀ) vec P, vec(PA) = (Aᵀ ⊗ I) vec P.
    let mut big = DMatrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                big[(row, j * n + k)] += at[(i, k)];
                big[(row, k * n + i)] += a[(k, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(n * n, c.iter().map(|v| -v));
    let lu = big.lu();
    let sol = lu.solve(&rhs).ok_or(LinalgError::Singular("Lyapunov solve"))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::Singular("Lyapunov solve"));
    }
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(0.5 * (&p + p.transpose()))
}

pub fn lyapunov_residual(a: &DMatrix<f64>, c: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (a.transpose() * p + p * a + c).norm()
}

pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let r_inv = r.clone().try_inverse().expect("R invertible");
    let g = b * r_inv * b.transpose();
    (a.transpose() * p + p * a - p * g * p + q).norm()
}

/// Stabilizing solution of `AᵀP + PA − P B R⁻¹ Bᵀ P + Q = 0`.
///
/// The matrix sign function of the Hamiltonian gives a first solution, which
/// Newton–Kleinman steps then polish down to the residual tolerance
/// `1e-8·(1 + ‖P‖)`, or to a relative backward error of
/// [`RELATIVE_BACKWARD_TOL`] when the
/// terms of the equation are too large for the absolute bound.
pub fn care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(LinalgError::Singular("R inverse"))?;
    let g = b * &r_inv * b.transpose();

    let mut ham = DMatrix::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    ham.view_mut((0, n), (n, n)).copy_from(&(-&g));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let w = matrix_sign(ham)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));

    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax.max(1.0)) {
        return Err(LinalgError::Unstabilizable);
    }
    let p = svd
        .solve(&rhs, 1e-14 * smax)
        .map_err(|_| LinalgError::Singular("Riccati subspace solve"))?;
    let mut p = 0.5 * (&p + p.transpose());

    if !is_hurwitz(&(a - &g * &p)) {
        return Err(LinalgError::Unstabilizable);
    }

    // Newton–Kleinman refinement.
    let tol = |p: &DMatrix<f64>| 1e-8 * (1.0 + p.norm());
    for _ in 0..50 {
        let res = (a.transpose() * &p + &p * a - &p * &g * &p + q).norm();
        if res <= 0.01 * tol(&p) {
            break;
        }
        let acl = a - &g * &p;
        let c = q + &p * &g * &p;
        let next = lyapunov(&acl, &c)?;
        let step = (&next - &p).norm();
        p = next;
        if step <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    let res = (a.transpose() * &p + &p * a - &p * &g * &p + q).norm();
    if !res.is_finite() {
        return Err(LinalgError::NoConvergence("Riccati refinement"));
    }
    if !is_hurwitz(&(a - &g * &p)) {
        return Err(LinalgError::Unstabilizable);
    }
    if res > tol(&p) && res > RELATIVE_BACKWARD_TOL * riccati_scale(a, &g, q, &p) {
        return Err(LinalgError::NoConvergence("Riccati refinement"));
    }
    Ok(p)
}

/// Sum of the norms of the terms of the Riccati equation; rounding alone
/// leaves a residual of order `ε` times this.
pub fn riccati_scale(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    2.0 * (a.transpose() * p).norm() + (p * g * p).norm() + q.norm()
}

/// Matrix sign function by the determinant-scaled Newton iteration.
fn matrix_sign(mut z: DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let dim = z.nrows() as f64;
    for _ in 0..200 {
        let inv = z
            .clone()
            .try_inverse()
            .ok_or(LinalgError::Unstabilizable)?;
        let det = z.determinant().abs();
        let scale = if det.is_finite() && det > 0.0 {
            det.powf(-1.0 / dim)
        } else {
            1.0
        };
        let next = 0.5 * (scale * &z + inv / scale);
        let change = (&next - &z).norm();
        let done = change <= 1e-13 * next.norm();
        z = next;
        if done {
            return Ok(z);
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Unstabilizable);
        }
    }
    Err(LinalgError::Unstabilizable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn scalar_care() {
        let p = care(&m(1, 1, &[0.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0]))
            .unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
        // a = 1: P = 1 + √2
        let p = care(&m(1, 1, &[1.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0]))
            .unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0 + 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn double_integrator_care_matches_closed_form() {
        // A = [[0,1],[0,0]], B = [0;1], Q = I, R = 1:
        // P = [[√3, 1], [1, √3]].
        let a = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let p = care(&a, &b, &DMatrix::identity(2, 2), &m(1, 1, &[1.0])).unwrap();
        let s3 = 3f64.sqrt();
        assert_relative_eq!(p, m(2, 2, &[s3, 1.0, 1.0, s3]), epsilon = 1e-10);
    }

    #[test]
    fn unstabilizable_pair_is_reported() {
        // Second state unstable and untouched by the input.
        let a = m(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let b = m(2, 1, &[1.0, 0.0]);
        let err = care(&a, &b, &DMatrix::identity(2, 2), &m(1, 1, &[1.0])).unwrap_err();
        assert_eq!(err, LinalgError::Unstabilizable);
    }

    #[test]
    fn scalar_lyapunov() {
        // 2·(−1)·P + 5 = 0
        let p = lyapunov(&m(1, 1, &[-1.0]), &m(1, 1, &[5.0])).unwrap();
        assert_relative_eq!(p[(0, 0)], 2.5, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_residual_is_small() {
        let a = m(3, 3, &[-1.0, 2.0, 0.0, -0.5, -3.0, 1.0, 0.2, 0.0, -0.7]);
        let c = m(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.3, 0.0, 0.3, 4.0]);
        let p = lyapunov(&a, &c).unwrap();
        assert!(lyapunov_residual(&a, &c, &p) < 1e-10);
    }

    #[test]
    fn hurwitz_check() {
        assert!(is_hurwitz(&m(2, 2, &[-1.0, 5.0, 0.0, -0.1])));
        assert!(!is_hurwitz(&m(2, 2, &[0.0, 1.0, -1.0, 0.0])));
    }
}
