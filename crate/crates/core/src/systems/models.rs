use serde::{Deserialize, Serialize};

use super::SystemError;

/// Cart with a torque-actuated pole. State `(x, ẋ, θ, θ̇)`, input `(F, τ)`,
/// θ = 0 hanging down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub gravity: f64,
}

impl CartPoleParams {
    pub(crate) fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let (mc, mp, l, g) = (self.cart_mass, self.pole_mass, self.pole_length, self.gravity);
        let (th, thd) = (x[2], x[3]);
        let (f, tau) = (u[0], u[1]);
        let (s, c) = th.sin_cos();
        let s2 = (2.0 * th).sin();
        // The denominator is `m_c + m_p sin θ` as in the reference model.
        let den = mc + mp * s;
        let xdd = (f - tau / l * c + mp * l * thd * thd * s + 0.5 * mp * g * s2) / den;
        let thdd = (tau / (l * l) * (mc / mp + 1.0)
            - f / l * c
            - 0.5 * mp * thd * thd * s2
            - g / l * (mc + mp) * s)
            / den;
        out[0] = x[1];
        out[1] = xdd;
        out[2] = thd;
        out[3] = thdd;
    }
}

/// Planar torso on two massless telescopic legs with fixed footholds.
///
/// State `(l_r, α_r, ẋ, ż, θ, θ̇)`: right-leg length and angle (foot at the
/// origin), COM velocity, torso angle and rate. Input `(F_l, F_r, τ_l, τ_r)`.
/// The left foot sits at `(−d_f, 0)`; the hip is `d` below the COM along the torso.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipedParams {
    pub mass: f64,
    pub inertia: f64,
    pub hip_offset: f64,
    pub foot_spacing: f64,
    pub rest_length: f64,
    pub gravity: f64,
}

impl BipedParams {
    /// Left-leg length and angle from the right-leg coordinates.
    pub fn left_leg(&self, l_r: f64, alpha_r: f64) -> (f64, f64) {
        let df = self.foot_spacing;
        let l_l = (l_r * l_r + df * df + 2.0 * l_r * df * alpha_r.cos()).max(0.0).sqrt();
        let alpha_l = (l_r * alpha_r.sin() / l_l).clamp(-1.0, 1.0).asin();
        (l_l, alpha_l)
    }

    pub(crate) fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<(), SystemError> {
        let (m, inertia, d, g) = (self.mass, self.inertia, self.hip_offset, self.gravity);
        let (l_r, a_r, vx, vz, th, thd) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        if l_r.abs() < 1e-12 {
            return Err(SystemError::Domain("biped right leg has zero length".into()));
        }
        let (l_l, a_l) = self.left_leg(l_r, a_r);
        if l_l < 1e-12 {
            return Err(SystemError::Domain("biped left leg has zero length".into()));
        }
        let (mut f_l, mut f_r, mut tau_l, mut tau_r) = (u[0], u[1], u[2], u[3]);
        // A leg longer than its rest length has lost ground contact.
        if l_r > self.rest_length {
            f_r = 0.0;
            tau_r = 0.0;
        }
        if l_l > self.rest_length {
            f_l = 0.0;
            tau_l = 0.0;
        }
        let (s_r, c_r) = a_r.sin_cos();
        let (s_l, c_l) = a_l.sin_cos();
        let xdd = (f_r * c_r + tau_r / l_r * s_r + f_l * c_l + tau_l / l_l * s_l) / m;
        let zdd = (f_r * s_r - tau_r / l_r * c_r + f_l * s_l - tau_l / l_l * c_l) / m - g;
        let thdd = (tau_r * (1.0 + d / l_r * (a_r - th).sin())
            + f_r * d * (a_r - th).cos()
            + tau_l * (1.0 + d / l_l * (a_l - th).sin())
            + f_l * d * (a_l - th).cos())
            / inertia;
        // Hip velocity drives the right-leg coordinates.
        let (s_th, c_th) = th.sin_cos();
        let hx = vx + d * c_th * thd;
        let hz = vz + d * s_th * thd;
        out[0] = hx * c_r + hz * s_r;
        out[1] = (-hx * s_r + hz * c_r) / l_r;
        out[2] = xdd;
        out[3] = zdd;
        out[4] = thd;
        out[5] = thdd;
        Ok(())
    }
}

/// Mass distribution of a manipulator link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkModel {
    /// Mass concentrated at the distal joint.
    PointMass,
    /// Uniform slender rod.
    UniformRod,
}

/// Planar serial chain hanging from a fixed pivot.
///
/// State `(θ_1..θ_N, θ̇_1..θ̇_N)`, `θ_1` absolute from the downward vertical and
/// `θ_k` (k > 1) relative joint angles. Input: joint torques.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulatorParams {
    pub masses: Vec<f64>,
    pub lengths: Vec<f64>,
    pub link_model: LinkModel,
    pub gravity: f64,
}

pub(crate) const MAX_LINKS: usize = 4;

impl ManipulatorParams {
    pub(crate) fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<(), SystemError> {
        let k = self.masses.len();
        if k == 0 || k > MAX_LINKS || self.lengths.len() != k {
            return Err(SystemError::Config(format!(
                "manipulator needs 1..={MAX_LINKS} links with matching lengths"
            )));
        }
        let g = self.gravity;
        // Absolute link angles and rates.
        let mut phi = [0.0; MAX_LINKS];
        let mut phid = [0.0; MAX_LINKS];
        let (mut acc, mut accd) = (0.0, 0.0);
        for i in 0..k {
            acc += x[i];
            accd += x[k + i];
            phi[i] = acc;
            phid[i] = accd;
        }
        let (com, rot): (f64, f64) = match self.link_model {
            LinkModel::PointMass => (1.0, 0.0),
            LinkModel::UniformRod => (0.5, 1.0 / 12.0),
        };
        // lever[i][a]: moment arm of link a's rotation on the COM of link i.
        let mut lever = [[0.0; MAX_LINKS]; MAX_LINKS];
        for i in 0..k {
            for a in 0..i {
                lever[i][a] = self.lengths[a];
            }
            lever[i][i] = com * self.lengths[i];
        }
        let mut coupling = [[0.0; MAX_LINKS]; MAX_LINKS];
        let mut grav = [0.0; MAX_LINKS];
        for a in 0..k {
            for b in 0..k {
                coupling[a][b] = (0..k).map(|i| self.masses[i] * lever[i][a] * lever[i][b]).sum();
            }
            grav[a] = (0..k).map(|i| self.masses[i] * lever[i][a]).sum::<f64>() * g;
        }
        let mut mass = [[0.0; MAX_LINKS]; MAX_LINKS];
        let mut rhs = [0.0; MAX_LINKS];
        for a in 0..k {
            for b in 0..k {
                mass[a][b] = coupling[a][b] * (phi[a] - phi[b]).cos();
            }
            mass[a][a] += rot * self.masses[a] * self.lengths[a] * self.lengths[a];
            let gen_force = u[a] - if a + 1 < k { u[a + 1] } else { 0.0 };
            let centrifugal: f64 = (0..k)
                .map(|b| coupling[a][b] * (phi[a] - phi[b]).sin() * phid[b] * phid[b])
                .sum();
            rhs[a] = gen_force - centrifugal - grav[a] * phi[a].sin();
        }
        let phidd = solve_small(&mut mass, &mut rhs, k)
            .ok_or_else(|| SystemError::Numerical("singular manipulator mass matrix".into()))?;
        for i in 0..k {
            out[i] = x[k + i];
            out[k + i] = if i == 0 { phidd[0] } else { phidd[i] - phidd[i - 1] };
        }
        Ok(())
    }
}

/// Gaussian elimination with partial pivoting on a `k×k` leading block.
fn solve_small(
    a: &mut [[f64; MAX_LINKS]; MAX_LINKS],
    b: &mut [f64; MAX_LINKS],
    k: usize,
) -> Option<[f64; MAX_LINKS]> {
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            for c in col..k {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; MAX_LINKS];
    for row in (0..k).rev() {
        let mut s = b[row];
        for c in row + 1..k {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}
