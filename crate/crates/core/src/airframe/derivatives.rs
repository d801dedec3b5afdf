//! Hand-derived partials of the closed-loop dynamics and running cost.
//!
//! Each intermediate quantity carries its gradient with respect to the
//! closed-loop state as a `[f64; STATE_DIM]`. Parameters enter only through
//! the three gains, so `∂f/∂p` and `∂L/∂p` are the gain sensitivities times
//! the network's parameter Jacobian.

use super::*;
use crate::sensitivity::{DerivativeProvider, Partials};

type Grad = [f64; STATE_DIM];

/// Derivative of `|x|` with the value 0 taken at the kink.
fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn axpy(y: &mut Grad, a: f64, x: &Grad) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalyticDerivatives;

impl DerivativeProvider<AirframeProblem> for AnalyticDerivatives {
    fn dynamics_partials(&self, prob: &AirframeProblem, _t: f64, x: &[f64], p: &[f64]) -> Partials {
        let a = &prob.aero;
        let m_dim = p.len();
        let mut out = Partials::zeros(STATE_DIM, m_dim);

        let (h, v, alpha, q, theta) = (x[H], x[V], x[ALPHA], x[Q], x[THETA]);
        let (delta, delta_dot, x_c, a_z_ref) = (x[DELTA], x[DELTA_DOT], x[X_C], x[AZ_REF]);
        let cmd = prob.cmd.a_z_cmd;
        let g = a.g;

        if !(v > 0.0) || !(a.t0 - a.lapse * h > 0.0) {
            out.dfdx.fill(f64::NAN);
            return out;
        }

        // atmosphere
        let rho = a.rho0 * (-h / a.h_scale).exp();
        let drho_dh = -rho / a.h_scale;
        let vs = (a.gamma_a * a.r_a * (a.t0 - a.lapse * h)).sqrt();
        let dvs_dh = -a.gamma_a * a.r_a * a.lapse / (2.0 * vs);
        let mach = v / vs;
        let dmach_dv = 1.0 / vs;
        let dmach_dh = -v / (vs * vs) * dvs_dh;
        let qbar = 0.5 * rho * v * v;
        let dqbar_dh = 0.5 * v * v * drho_dh;
        let dqbar_dv = rho * v;

        // aerodynamic coefficients
        let c_a = a.a_a;
        let c_n = a.a_n * alpha.powi(3)
            + a.b_n * alpha * alpha.abs()
            + a.c_n * (2.0 - mach / 3.0) * alpha
            + a.d_n * delta;
        let dcn_dalpha =
            3.0 * a.a_n * alpha * alpha + 2.0 * a.b_n * alpha.abs() + a.c_n * (2.0 - mach / 3.0);
        let dcn_dmach = -a.c_n * alpha / 3.0;
        let c_m = a.a_m * alpha.powi(3)
            + a.b_m * alpha * alpha.abs()
            + a.c_m * (-7.0 + 8.0 * mach / 3.0) * alpha
            + a.d_m * delta;
        let dcm_dalpha = 3.0 * a.a_m * alpha * alpha
            + 2.0 * a.b_m * alpha.abs()
            + a.c_m * (-7.0 + 8.0 * mach / 3.0);
        let dcm_dmach = 8.0 * a.c_m * alpha / 3.0;

        let (sa, ca) = alpha.sin_cos();
        let gamma = theta - alpha;
        let (sg, cg) = gamma.sin_cos();

        // body-to-wind force combinations
        let f_n = c_n * ca - c_a * sa;
        let df_n_dalpha = dcn_dalpha * ca - c_n * sa - c_a * ca;
        let df_n_dmach = dcn_dmach * ca;
        let df_n_ddelta = a.d_n * ca;
        let f_t = c_n * sa + c_a * ca;
        let df_t_dalpha = dcn_dalpha * sa + c_n * ca - c_a * sa;
        let df_t_dmach = dcn_dmach * sa;
        let df_t_ddelta = a.d_n * sa;

        let k = qbar * a.s_ref / a.m;
        let dk_dh = dqbar_dh * a.s_ref / a.m;
        let dk_dv = dqbar_dv * a.s_ref / a.m;

        let a_z = k * f_n;
        let mut d_az: Grad = [0.0; STATE_DIM];
        d_az[H] = dk_dh * f_n + k * df_n_dmach * dmach_dh;
        d_az[V] = dk_dv * f_n + k * df_n_dmach * dmach_dv;
        d_az[ALPHA] = k * df_n_dalpha;
        d_az[DELTA] = k * df_n_ddelta;

        // gains and their state sensitivity through the network input
        let nz = &prob.spec.normalisers;
        let input = nz.normalise(alpha, mach, h);
        let eval = match prob.spec.evaluate_with_jacobians(p, &input, true) {
            Ok(e) => e,
            Err(_) => {
                out.dfdx.fill(f64::NAN);
                return out;
            }
        };
        let (k_a, k_i, k_r) = (eval.output[0], eval.output[1], eval.output[2]);
        let jin = &eval.input_jacobian;
        let jp = eval.param_jacobian.as_ref().unwrap();
        let du0_dalpha = sign0(alpha) / nz.alpha_max;
        let du1_dv = dmach_dv / nz.mach_max;
        let du1_dh = dmach_dh / nz.mach_max;
        let du2_dh = 1.0 / nz.h_max;
        let mut d_gain = [[0.0; STATE_DIM]; 3];
        for (i, dg) in d_gain.iter_mut().enumerate() {
            dg[H] = jin[(i, 1)] * du1_dh + jin[(i, 2)] * du2_dh;
            dg[V] = jin[(i, 1)] * du1_dv;
            dg[ALPHA] = jin[(i, 0)] * du0_dalpha;
        }

        let delta_c = k_i * x_c + k_r * q;
        let mut d_dc: Grad = [0.0; STATE_DIM];
        axpy(&mut d_dc, x_c, &d_gain[1]);
        axpy(&mut d_dc, q, &d_gain[2]);
        d_dc[X_C] += k_i;
        d_dc[Q] += k_r;

        let mut rows = [[0.0; STATE_DIM]; STATE_DIM];

        // ḣ = V sin γ
        rows[H][V] = sg;
        rows[H][THETA] = v * cg;
        rows[H][ALPHA] = -v * cg;

        // V̇ = k f_t − g sin γ
        rows[V][H] = dk_dh * f_t + k * df_t_dmach * dmach_dh;
        rows[V][V] = dk_dv * f_t + k * df_t_dmach * dmach_dv;
        rows[V][ALPHA] = k * df_t_dalpha + g * cg;
        rows[V][THETA] = -g * cg;
        rows[V][DELTA] = k * df_t_ddelta;

        // α̇ = a_z / V + g cos γ / V + q
        let r = &mut rows[ALPHA];
        axpy(r, 1.0 / v, &d_az);
        r[V] += -a_z / (v * v) - g * cg / (v * v);
        r[ALPHA] += g * sg / v;
        r[THETA] += -g * sg / v;
        r[Q] += 1.0;

        // q̇ = Q S d / I_yy · C_M
        let kq = a.s_ref * a.d_ref / a.i_yy;
        rows[Q][H] = kq * (dqbar_dh * c_m + qbar * dcm_dmach * dmach_dh);
        rows[Q][V] = kq * (dqbar_dv * c_m + qbar * dcm_dmach * dmach_dv);
        rows[Q][ALPHA] = kq * qbar * dcm_dalpha;
        rows[Q][DELTA] = kq * qbar * a.d_m;

        rows[THETA][Q] = 1.0;
        rows[DELTA][DELTA_DOT] = 1.0;

        // δ̈ = −ω²(δ − δ_c) − 2ζω δ̇
        let w2 = a.omega_a * a.omega_a;
        let r = &mut rows[DELTA_DOT];
        axpy(r, w2, &d_dc);
        r[DELTA] -= w2;
        r[DELTA_DOT] -= 2.0 * a.zeta_a * a.omega_a;

        // ẋ_c = K_A (cmd − a_z) + q + (cmd + g cos γ) / V
        let r = &mut rows[X_C];
        axpy(r, cmd - a_z, &d_gain[0]);
        axpy(r, -k_a, &d_az);
        r[Q] += 1.0;
        r[ALPHA] += g * sg / v;
        r[THETA] += -g * sg / v;
        r[V] += -(cmd + g * cg) / (v * v);

        rows[AZ_REF][AZ_REF] = -1.0 / REFERENCE_TIME_CONSTANT;

        for (i, row) in rows.iter().enumerate() {
            for (j, val) in row.iter().enumerate() {
                out.dfdx[(i, j)] = *val;
            }
        }

        // running cost
        let norm = 1.0 + cmd.abs();
        let e = (a_z - a_z_ref) / norm;
        let dl_de = 2.0 * TRACKING_WEIGHT * e / norm;
        let dl_ddc = 2.0 * DEFLECTION_WEIGHT * delta_c / (DEFLECTION_SCALE * DEFLECTION_SCALE);
        let mut dl: Grad = [0.0; STATE_DIM];
        axpy(&mut dl, dl_de, &d_az);
        dl[AZ_REF] -= dl_de;
        axpy(&mut dl, dl_ddc, &d_dc);
        dl[DELTA_DOT] += 2.0 * RATE_WEIGHT * delta_dot / (RATE_SCALE * RATE_SCALE);
        for (j, val) in dl.iter().enumerate() {
            out.dldx[j] = *val;
        }

        // parameters, through K_A (ẋ_c) and K_I, K_R (δ_c)
        for c in 0..m_dim {
            let (dka, dki, dkr) = (jp[(0, c)], jp[(1, c)], jp[(2, c)]);
            let ddc = x_c * dki + q * dkr;
            out.dfdp[(X_C, c)] = (cmd - a_z) * dka;
            out.dfdp[(DELTA_DOT, c)] = w2 * ddc;
            out.dldp[c] = dl_ddc * ddc;
        }
        out
    }

    fn terminal_gradient(&self, _prob: &AirframeProblem, _x: &[f64]) -> Vec<f64> {
        vec![0.0; STATE_DIM]
    }

    fn regulariser_gradient(&self, prob: &AirframeProblem, p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| 2.0 * prob.reg_weight * v).collect()
    }
}

/// Wraps a provider and scales its `∂f/∂p` by `factor`. Used as a negative
/// control: gradient checks must fail against it.
#[derive(Debug, Clone, Copy)]
pub struct CorruptedDerivatives<D> {
    pub inner: D,
    pub factor: f64,
}

impl<D: DerivativeProvider<AirframeProblem>> DerivativeProvider<AirframeProblem>
    for CorruptedDerivatives<D>
{
    fn dynamics_partials(&self, prob: &AirframeProblem, t: f64, x: &[f64], p: &[f64]) -> Partials {
        let mut d = self.inner.dynamics_partials(prob, t, x, p);
        d.dfdp *= self.factor;
        d
    }

    fn terminal_gradient(&self, prob: &AirframeProblem, x: &[f64]) -> Vec<f64> {
        self.inner.terminal_gradient(prob, x)
    }

    fn regulariser_gradient(&self, prob: &AirframeProblem, p: &[f64]) -> Vec<f64> {
        self.inner.regulariser_gradient(prob, p)
    }
}
