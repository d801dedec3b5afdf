//! Pitch-plane dynamics of a tail-controlled skid-to-turn airframe flown by a
//! three-loop acceleration autopilot whose gains come from the neural policy.
//!
//! The closed-loop state vector is ordered
//! `[h, V, α, q, θ, δ, δ̇, x_c, a_z_ref]` (see the index constants). The
//! running-cost quadrature is appended by [`crate::sensitivity::forward_pass`].

mod derivatives;
mod export;

pub use derivatives::{AnalyticDerivatives, CorruptedDerivatives};
pub use export::{trajectory_rows, write_trajectory_csv, TrajectoryRow, TRAJECTORY_HEADER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{GainVector, MlpSpec, PolicyError};
use crate::sensitivity::CtpgProblem;

pub const H: usize = 0;
pub const V: usize = 1;
pub const ALPHA: usize = 2;
pub const Q: usize = 3;
pub const THETA: usize = 4;
pub const DELTA: usize = 5;
pub const DELTA_DOT: usize = 6;
pub const X_C: usize = 7;
pub const AZ_REF: usize = 8;
pub const STATE_DIM: usize = 9;

/// Time constant of the first-order acceleration reference model [s].
pub const REFERENCE_TIME_CONSTANT: f64 = 0.2;

const TRACKING_WEIGHT: f64 = 100.0;
const DEFLECTION_WEIGHT: f64 = 0.01;
const RATE_WEIGHT: f64 = 0.1;
/// 25° in radians.
const DEFLECTION_SCALE: f64 = 5.0 * std::f64::consts::PI / 36.0;
const RATE_SCALE: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AirframeError {
    #[error("non-positive air temperature at altitude {h} m")]
    NonpositiveTemperature { h: f64 },
    #[error("non-positive airspeed {v} m/s")]
    NonpositiveSpeed { v: f64 },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Airframe, actuator and atmosphere constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeroParams {
    pub a_a: f64,
    pub a_n: f64,
    pub b_n: f64,
    pub c_n: f64,
    pub d_n: f64,
    pub a_m: f64,
    pub b_m: f64,
    pub c_m: f64,
    pub d_m: f64,
    /// Mass [kg].
    pub m: f64,
    /// Pitch inertia [kg·m²].
    pub i_yy: f64,
    /// Reference area [m²].
    pub s_ref: f64,
    /// Reference length [m].
    pub d_ref: f64,
    /// Actuator natural frequency [rad/s].
    pub omega_a: f64,
    pub zeta_a: f64,
    /// Sea-level density [kg/m³].
    pub rho0: f64,
    /// Density scale height [m].
    pub h_scale: f64,
    pub gamma_a: f64,
    /// Gas constant [m²/s²/K].
    pub r_a: f64,
    /// Sea-level temperature [K].
    pub t0: f64,
    /// Temperature lapse rate [K/m].
    pub lapse: f64,
    pub g: f64,
}

impl Default for AeroParams {
    fn default() -> Self {
        Self {
            a_a: -0.3,
            a_n: 19.373,
            b_n: -31.023,
            c_n: -9.717,
            d_n: -1.948,
            a_m: 40.44,
            b_m: -64.015,
            c_m: 2.922,
            d_m: -11.803,
            m: 204.02,
            i_yy: 247.439,
            s_ref: 0.0409,
            d_ref: 0.2286,
            omega_a: 150.0,
            zeta_a: 0.7,
            rho0: 1.225,
            h_scale: 8435.0,
            gamma_a: 1.4,
            r_a: 286.0,
            t0: 288.15,
            lapse: 0.0065,
            g: 9.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atmosphere {
    pub rho: f64,
    pub sound_speed: f64,
    pub mach: f64,
    pub dynamic_pressure: f64,
}

pub fn atmosphere(params: &AeroParams, h: f64, v: f64) -> Result<Atmosphere, AirframeError> {
    let temperature = params.t0 - params.lapse * h;
    if !(temperature > 0.0) {
        return Err(AirframeError::NonpositiveTemperature { h });
    }
    let rho = params.rho0 * (-h / params.h_scale).exp();
    let sound_speed = (params.gamma_a * params.r_a * temperature).sqrt();
    Ok(Atmosphere {
        rho,
        sound_speed,
        mach: v / sound_speed,
        dynamic_pressure: 0.5 * rho * v * v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroCoefficients {
    pub c_a: f64,
    pub c_n: f64,
    pub c_m: f64,
}

pub fn aero_coefficients(
    params: &AeroParams,
    alpha: f64,
    mach: f64,
    delta: f64,
) -> AeroCoefficients {
    let a3 = alpha.powi(3);
    let a_abs = alpha * alpha.abs();
    AeroCoefficients {
        c_a: params.a_a,
        c_n: params.a_n * a3
            + params.b_n * a_abs
            + params.c_n * (2.0 - mach / 3.0) * alpha
            + params.d_n * delta,
        c_m: params.a_m * a3
            + params.b_m * a_abs
            + params.c_m * (-7.0 + 8.0 * mach / 3.0) * alpha
            + params.d_m * delta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub h: f64,
    pub v: f64,
    pub alpha: f64,
    pub q: f64,
    pub theta: f64,
    pub delta: f64,
    pub delta_dot: f64,
}

impl PlantState {
    pub fn gamma(&self) -> f64 {
        self.theta - self.alpha
    }

    pub fn to_array(self) -> [f64; 7] {
        [
            self.h,
            self.v,
            self.alpha,
            self.q,
            self.theta,
            self.delta,
            self.delta_dot,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            h: x[H],
            v: x[V],
            alpha: x[ALPHA],
            q: x[Q],
            theta: x[THETA],
            delta: x[DELTA],
            delta_dot: x[DELTA_DOT],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClosedLoopState {
    pub plant: PlantState,
    pub x_c: f64,
    pub a_z_ref: f64,
}

impl ClosedLoopState {
    /// Rest state at the given altitude and speed, controller and reference zeroed.
    pub fn initial(h0: f64, v0: f64) -> Self {
        Self {
            plant: PlantState {
                h: h0,
                v: v0,
                ..PlantState::default()
            },
            x_c: 0.0,
            a_z_ref: 0.0,
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        let mut x = self.plant.to_array().to_vec();
        x.push(self.x_c);
        x.push(self.a_z_ref);
        x
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            plant: PlantState::from_slice(x),
            x_c: x[X_C],
            a_z_ref: x[AZ_REF],
        }
    }
}

/// Constant normal-acceleration command [m/s²].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandSpec {
    pub a_z_cmd: f64,
}

/// Plant state derivative and the normal acceleration `a_z = −V γ̇ − g cos γ`.
pub fn plant_derivatives(
    params: &AeroParams,
    state: &PlantState,
    delta_c: f64,
) -> Result<(PlantState, f64), AirframeError> {
    let PlantState {
        h,
        v,
        alpha,
        q,
        delta,
        delta_dot,
        ..
    } = *state;
    if !(v > 0.0) {
        return Err(AirframeError::NonpositiveSpeed { v });
    }
    let atm = atmosphere(params, h, v)?;
    let c = aero_coefficients(params, alpha, atm.mach, delta);
    let gamma = state.gamma();
    let (sa, ca) = alpha.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let k = atm.dynamic_pressure * params.s_ref / params.m;
    let g = params.g;
    let omega = params.omega_a;

    let alpha_dot = k / v * (c.c_n * ca - c.c_a * sa) + g / v * cg + q;
    let theta_dot = q;
    let d = PlantState {
        h: v * sg,
        v: k * (c.c_n * sa + c.c_a * ca) - g * sg,
        alpha: alpha_dot,
        q: atm.dynamic_pressure * params.s_ref * params.d_ref / params.i_yy * c.c_m,
        theta: theta_dot,
        delta: delta_dot,
        delta_dot: -omega * omega * (delta - delta_c) - 2.0 * params.zeta_a * omega * delta_dot,
    };
    let a_z = -v * (theta_dot - alpha_dot) - g * cg;
    Ok((d, a_z))
}

/// `δ_c = K_I x_c + K_R q`.
pub fn autopilot_command(gains: &GainVector, q: f64, x_c: f64) -> f64 {
    gains.k_i * x_c + gains.k_r * q
}

/// Returns `(ẋ_c, δ_c)`.
#[allow(clippy::too_many_arguments)]
pub fn three_loop_autopilot(
    gains: &GainVector,
    a_z: f64,
    cmd: CommandSpec,
    q: f64,
    v: f64,
    gamma: f64,
    x_c: f64,
    g: f64,
) -> (f64, f64) {
    let x_c_dot = gains.k_a * (cmd.a_z_cmd - a_z) + q + (cmd.a_z_cmd + g * gamma.cos()) / v;
    (x_c_dot, autopilot_command(gains, q, x_c))
}

pub fn reference_model_rhs(a_z_ref: f64, cmd: CommandSpec) -> f64 {
    (cmd.a_z_cmd - a_z_ref) / REFERENCE_TIME_CONSTANT
}

/// Tracking error normalised by `1 + |a_z_cmd|`, plus deflection and rate penalties.
pub fn running_cost(a_z: f64, a_z_ref: f64, cmd: CommandSpec, delta_c: f64, delta_dot: f64) -> f64 {
    let tracking = (a_z - a_z_ref) / (1.0 + cmd.a_z_cmd.abs());
    TRACKING_WEIGHT * tracking * tracking
        + DEFLECTION_WEIGHT * (delta_c / DEFLECTION_SCALE).powi(2)
        + RATE_WEIGHT * (delta_dot / RATE_SCALE).powi(2)
}

/// Everything the closed loop produces at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopSignals {
    pub derivative: ClosedLoopState,
    pub gains: GainVector,
    pub a_z: f64,
    pub delta_c: f64,
    pub mach: f64,
    pub running_cost: f64,
}

pub fn closed_loop_signals(
    params: &AeroParams,
    spec: &MlpSpec,
    p: &[f64],
    cmd: CommandSpec,
    _t: f64,
    state: &ClosedLoopState,
) -> Result<ClosedLoopSignals, AirframeError> {
    let pl = &state.plant;
    if !(pl.v > 0.0) {
        return Err(AirframeError::NonpositiveSpeed { v: pl.v });
    }
    let atm = atmosphere(params, pl.h, pl.v)?;
    let input = spec.normalisers.normalise(pl.alpha, atm.mach, pl.h);
    let gains = crate::policy::mlp_forward(spec, p, &input)?;
    let delta_c = autopilot_command(&gains, pl.q, state.x_c);
    let (plant_dot, a_z) = plant_derivatives(params, pl, delta_c)?;
    let (x_c_dot, _) = three_loop_autopilot(
        &gains,
        a_z,
        cmd,
        pl.q,
        pl.v,
        pl.gamma(),
        state.x_c,
        params.g,
    );
    let derivative = ClosedLoopState {
        plant: plant_dot,
        x_c: x_c_dot,
        a_z_ref: reference_model_rhs(state.a_z_ref, cmd),
    };
    Ok(ClosedLoopSignals {
        derivative,
        gains,
        a_z,
        delta_c,
        mach: atm.mach,
        running_cost: running_cost(a_z, state.a_z_ref, cmd, delta_c, pl.delta_dot),
    })
}

/// Gains → autopilot → plant → reference model, stacked.
pub fn closed_loop_rhs(
    params: &AeroParams,
    spec: &MlpSpec,
    p: &[f64],
    cmd: CommandSpec,
    t: f64,
    state: &ClosedLoopState,
) -> Result<ClosedLoopState, AirframeError> {
    closed_loop_signals(params, spec, p, cmd, t, state).map(|s| s.derivative)
}

/// One training scenario: the closed loop from rest at `(h0, V0)` under a
/// constant command, with the running cost integrated over `[t0, tf]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AirframeProblem {
    pub aero: AeroParams,
    pub spec: MlpSpec,
    pub cmd: CommandSpec,
    pub h0: f64,
    pub v0: f64,
    pub t0: f64,
    pub tf: f64,
    /// Weight of `‖p‖²`; zero for ensemble members (the ensemble adds it once).
    pub reg_weight: f64,
}

impl AirframeProblem {
    pub fn new(aero: AeroParams, spec: MlpSpec, h0: f64, v0: f64, a_z_cmd: f64) -> Self {
        Self {
            aero,
            spec,
            cmd: CommandSpec { a_z_cmd },
            h0,
            v0,
            t0: 0.0,
            tf: 3.0,
            reg_weight: 0.0,
        }
    }

    pub fn signals(
        &self,
        t: f64,
        x: &[f64],
        p: &[f64],
    ) -> Result<ClosedLoopSignals, AirframeError> {
        closed_loop_signals(
            &self.aero,
            &self.spec,
            p,
            self.cmd,
            t,
            &ClosedLoopState::from_slice(x),
        )
    }
}

impl CtpgProblem for AirframeProblem {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn param_dim(&self) -> usize {
        self.spec.param_count()
    }

    fn t0(&self) -> f64 {
        self.t0
    }

    fn tf(&self) -> f64 {
        self.tf
    }

    fn initial_state(&self) -> Vec<f64> {
        ClosedLoopState::initial(self.h0, self.v0).to_vec()
    }

    fn dynamics(&self, t: f64, x: &[f64], p: &[f64], dx: &mut [f64]) {
        self.dynamics_with_cost(t, x, p, dx);
    }

    fn dynamics_with_cost(&self, t: f64, x: &[f64], p: &[f64], dx: &mut [f64]) -> f64 {
        match self.signals(t, x, p) {
            Ok(s) => {
                dx.copy_from_slice(&s.derivative.to_vec());
                s.running_cost
            }
            Err(_) => {
                dx.fill(f64::NAN);
                f64::NAN
            }
        }
    }

    fn running_cost(&self, t: f64, x: &[f64], p: &[f64]) -> f64 {
        self.signals(t, x, p).map_or(f64::NAN, |s| s.running_cost)
    }

    fn terminal_cost(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn regulariser(&self, p: &[f64]) -> f64 {
        self.reg_weight * p.iter().map(|v| v * v).sum::<f64>()
    }
}
