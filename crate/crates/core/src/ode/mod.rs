//! Explicit ODE integration with dense output.
//!
//! Two integrators share one solution type: an adaptive Tsitouras 5(4)
//! pair with its 4th-order continuous extension, and fixed-step forward
//! Euler with piecewise-linear interpolation. Backward-in-time problems are
//! expressed by the caller as forward problems through time reflection.

#[allow(clippy::excessive_precision)]
mod tableau;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tableau::*;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("time {t} outside solution span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
}

/// Right-hand side `ẋ = rhs(t, x)` with the parameters captured by the closure.
pub struct OdeProblem<F> {
    pub rhs: F,
    pub t0: f64,
    pub tf: f64,
    pub x0: Vec<f64>,
}

impl<F> OdeProblem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(rhs: F, t0: f64, tf: f64, x0: Vec<f64>) -> Self {
        Self { rhs, t0, tf, x0 }
    }

    fn validate(&self) -> Result<(), OdeError> {
        if !(self.t0.is_finite() && self.tf.is_finite() && self.t0 < self.tf) {
            return Err(OdeError::InvalidProblem(format!(
                "span [{}, {}] must be finite with t0 < tf",
                self.t0, self.tf
            )));
        }
        if self.x0.is_empty() {
            return Err(OdeError::InvalidProblem("empty initial state".into()));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::InvalidProblem("non-finite initial state".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    /// Adaptive Tsitouras 5(4).
    #[default]
    Tsit5,
    /// Fixed-step forward Euler.
    Euler { dt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Absolute tolerance, applied to every component.
    pub abstol: f64,
    pub reltol: f64,
    /// Spacing of the guaranteed output grid.
    pub save_step: f64,
    /// Cap on attempted steps (accepted plus rejected).
    pub max_steps: usize,
    pub dt_init: Option<f64>,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            abstol: 1e-6,
            reltol: 1e-3,
            save_step: 1e-2,
            max_steps: 100_000,
            dt_init: None,
            method: Method::Tsit5,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerances(abstol: f64, reltol: f64) -> Self {
        Self {
            abstol,
            reltol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        let bad = |what: &str| Err(OdeError::InvalidConfig(what.to_string()));
        if !(self.abstol > 0.0 && self.abstol.is_finite()) {
            return bad("abstol must be positive");
        }
        if !(self.reltol > 0.0 && self.reltol.is_finite()) {
            return bad("reltol must be positive");
        }
        if !(self.save_step > 0.0 && self.save_step.is_finite()) {
            return bad("save_step must be positive");
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1");
        }
        if let Some(dt) = self.dt_init {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("dt_init must be positive");
            }
        }
        if let Method::Euler { dt } = self.method {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("Euler dt must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Success,
    MaxStepsExceeded,
    NonfiniteState,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Success => "success",
            SolveStatus::MaxStepsExceeded => "max-steps-exceeded",
            SolveStatus::NonfiniteState => "nonfinite-state",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Dense {
    /// Seven stage derivatives per interval, flattened `[interval][stage][component]`.
    Tsit5 {
        stages: Vec<f64>,
    },
    Linear,
}

/// Integrated trajectory with continuous evaluation over the covered span.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    dim: usize,
    step_times: Vec<f64>,
    step_states: Vec<f64>,
    dense: Dense,
    pub save_times: Vec<f64>,
    pub save_states: Vec<Vec<f64>>,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

impl OdeSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_success(&self) -> bool {
        self.status == SolveStatus::Success
    }

    pub fn step_times(&self) -> &[f64] {
        &self.step_times
    }

    pub fn step_state(&self, i: usize) -> &[f64] {
        &self.step_states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn num_steps(&self) -> usize {
        self.step_times.len()
    }

    pub fn start_time(&self) -> f64 {
        self.step_times[0]
    }

    /// Last time reached; equals `tf` on success.
    pub fn end_time(&self) -> f64 {
        *self
            .step_times
            .last()
            .expect("solution has at least one node")
    }

    pub fn final_state(&self) -> &[f64] {
        self.step_state(self.step_times.len() - 1)
    }

    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>, OdeError> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out)?;
        Ok(out)
    }

    /// Dense-output evaluation. Mesh nodes return the stored state exactly.
    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) -> Result<(), OdeError> {
        let (start, end) = (self.start_time(), self.end_time());
        if !(t >= start && t <= end) {
            return Err(OdeError::OutOfSpan { t, start, end });
        }
        let n = self.dim;
        let idx = self.step_times.partition_point(|&s| s <= t);
        if self.step_times[idx - 1] == t {
            out.copy_from_slice(self.step_state(idx - 1));
            return Ok(());
        }
        let i = idx - 1;
        let (ta, tb) = (self.step_times[i], self.step_times[i + 1]);
        let h = tb - ta;
        let theta = (t - ta) / h;
        let ya = self.step_state(i);
        match &self.dense {
            Dense::Tsit5 { stages } => {
                let w = dense_weights(theta);
                let k = &stages[i * 7 * n..(i + 1) * 7 * n];
                for c in 0..n {
                    let mut acc = 0.0;
                    for (s, ws) in w.iter().enumerate() {
                        acc += ws * k[s * n + c];
                    }
                    out[c] = ya[c] + h * acc;
                }
            }
            Dense::Linear => {
                let yb = self.step_state(i + 1);
                for c in 0..n {
                    out[c] = ya[c] + theta * (yb[c] - ya[c]);
                }
            }
        }
        Ok(())
    }

    fn fill_save_grid(&mut self, t0: f64, tf: f64, save_step: f64) {
        let end = self.end_time();
        let count = ((tf - t0) / save_step + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=count)
            .map(|k| t0 + k as f64 * save_step)
            .filter(|&t| t <= tf)
            .collect();
        let last = times.len() - 1;
        if tf - times[last] <= 1e-9 * save_step {
            times[last] = tf;
        } else {
            times.push(tf);
        }
        times.retain(|&t| t <= end);
        self.save_states = times
            .iter()
            .map(|&t| self.interpolate(t).expect("save time inside covered span"))
            .collect();
        self.save_times = times;
    }
}

fn rms_scaled(v: &[f64], y_a: &[f64], y_b: &[f64], abstol: f64, reltol: f64) -> f64 {
    let sum: f64 = v
        .iter()
        .zip(y_a.iter().zip(y_b))
        .map(|(e, (a, b))| {
            let sc = abstol + reltol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / v.len() as f64).sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates with whichever method `config.method` selects.
pub fn solve<F>(problem: OdeProblem<F>, config: &SolverConfig) -> Result<OdeSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    match config.method {
        Method::Tsit5 => solve_adaptive(problem, config),
        Method::Euler { dt } => solve_fixed_euler(problem, dt, config),
    }
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA1: f64 = 0.7 / 5.0;
const BETA2: f64 = 0.4 / 5.0;

/// Adaptive Tsitouras 5(4) with PI step-size control.
///
/// Integration failures do not produce an `Err`: the partial solution is
/// returned with `status` set. `Err` is reserved for invalid inputs.
pub fn solve_adaptive<F>(
    problem: OdeProblem<F>,
    config: &SolverConfig,
) -> Result<OdeSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    config.validate()?;
    problem.validate()?;
    let OdeProblem {
        mut rhs,
        t0,
        tf,
        x0,
    } = problem;
    let n = x0.len();
    let (abstol, reltol) = (config.abstol, config.reltol);
    let mut stats = SolveStats::default();

    let mut eval = |t: f64, x: &[f64], out: &mut [f64], stats: &mut SolveStats| {
        stats.rhs_evals += 1;
        rhs(t, x, out);
    };

    let mut sol = OdeSolution {
        dim: n,
        step_times: vec![t0],
        step_states: x0.clone(),
        dense: Dense::Tsit5 { stages: Vec::new() },
        save_times: Vec::new(),
        save_states: Vec::new(),
        status: SolveStatus::Success,
        stats,
    };
    let mut stages_store: Vec<f64> = Vec::new();

    let mut y = x0;
    let mut k = vec![vec![0.0; n]; 7];
    eval(t0, &y, &mut k[0], &mut stats);
    if !all_finite(&k[0]) {
        sol.status = SolveStatus::NonfiniteState;
        sol.stats = stats;
        sol.dense = Dense::Tsit5 {
            stages: stages_store,
        };
        sol.fill_save_grid(t0, tf, config.save_step);
        return Ok(sol);
    }

    let span = tf - t0;
    let mut h = match config.dt_init {
        Some(dt) => dt.min(span),
        None => initial_step(&mut eval, t0, &y, &k[0], abstol, reltol, span, &mut stats),
    };

    let mut t = t0;
    let mut err_prev: f64 = 1e-4;
    let mut rejected_last = false;
    let mut attempts = 0usize;
    let mut ytmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut errv = vec![0.0; n];

    while t < tf {
        if attempts >= config.max_steps {
            sol.status = SolveStatus::MaxStepsExceeded;
            break;
        }
        attempts += 1;

        let hmin = 16.0 * f64::EPSILON * t.abs().max(1.0);
        let last = t + h * (1.0 + 1e-10) >= tf;
        if last {
            h = tf - t;
        }

        let (k1, rest) = k.split_first_mut().unwrap();
        let [k2, k3, k4, k5, k6, k7] = rest else {
            unreachable!()
        };
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        eval(t + C[1] * h, &ytmp, k2, &mut stats);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        eval(t + C[2] * h, &ytmp, k3, &mut stats);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        eval(t + C[3] * h, &ytmp, k4, &mut stats);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        eval(t + C[4] * h, &ytmp, k5, &mut stats);
        for i in 0..n {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { tf } else { t + h };
        eval(t + h, &ytmp, k6, &mut stats);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (B[0] * k1[i]
                    + B[1] * k2[i]
                    + B[2] * k3[i]
                    + B[3] * k4[i]
                    + B[4] * k5[i]
                    + B[5] * k6[i]);
        }
        eval(t_new, &y_new, k7, &mut stats);
        for i in 0..n {
            errv[i] = h
                * (BTILDE[0] * k1[i]
                    + BTILDE[1] * k2[i]
                    + BTILDE[2] * k3[i]
                    + BTILDE[3] * k4[i]
                    + BTILDE[4] * k5[i]
                    + BTILDE[5] * k6[i]
                    + BTILDE[6] * k7[i]);
        }
        let err = rms_scaled(&errv, &y, &y_new, abstol, reltol);

        if !err.is_finite() || !all_finite(&y_new) {
            stats.rejected += 1;
            rejected_last = true;
            h *= FAC_MIN;
            if h < hmin {
                sol.status = SolveStatus::NonfiniteState;
                break;
            }
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            for stage in k.iter() {
                stages_store.extend_from_slice(stage);
            }
            sol.step_times.push(t_new);
            sol.step_states.extend_from_slice(&y_new);

            let err_c = err.max(1e-10);
            let mut fac =
                (SAFETY * err_c.powf(-BETA1) * err_prev.powf(BETA2)).clamp(FAC_MIN, FAC_MAX);
            if rejected_last {
                fac = fac.min(1.0);
            }
            err_prev = err.max(1e-4);
            rejected_last = false;

            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            t = t_new;
            h *= fac;
        } else {
            stats.rejected += 1;
            rejected_last = true;
            h *= (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            if h < hmin {
                sol.status = SolveStatus::MaxStepsExceeded;
                break;
            }
        }
    }

    sol.stats = stats;
    sol.dense = Dense::Tsit5 {
        stages: stages_store,
    };
    sol.fill_save_grid(t0, tf, config.save_step);
    Ok(sol)
}

#[allow(clippy::too_many_arguments)]
fn initial_step<E>(
    eval: &mut E,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    abstol: f64,
    reltol: f64,
    span: f64,
    stats: &mut SolveStats,
) -> f64
where
    E: FnMut(f64, &[f64], &mut [f64], &mut SolveStats),
{
    let n = y0.len();
    let d0 = rms_scaled(y0, y0, y0, abstol, reltol);
    let d1 = rms_scaled(f0, y0, y0, abstol, reltol);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    eval(t0 + h0, &y1, &mut f1, stats);
    if !all_finite(&f1) {
        return h0;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_scaled(&diff, y0, y0, abstol, reltol) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Forward Euler on a uniform grid of spacing `dt`; the last step is
/// shortened to land on `tf`.
pub fn solve_fixed_euler<F>(
    problem: OdeProblem<F>,
    dt: f64,
    config: &SolverConfig,
) -> Result<OdeSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    config.validate()?;
    problem.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OdeError::InvalidConfig("Euler dt must be positive".into()));
    }
    let OdeProblem {
        mut rhs,
        t0,
        tf,
        x0,
    } = problem;
    let n = x0.len();
    let steps = ((tf - t0) / dt - 1e-9).ceil().max(1.0);
    if steps > config.max_steps as f64 {
        return Err(OdeError::InvalidConfig(format!(
            "{steps} Euler steps exceed max_steps = {}",
            config.max_steps
        )));
    }
    let steps = steps as usize;
    let mut stats = SolveStats::default();
    let mut sol = OdeSolution {
        dim: n,
        step_times: Vec::with_capacity(steps + 1),
        step_states: Vec::with_capacity((steps + 1) * n),
        dense: Dense::Linear,
        save_times: Vec::new(),
        save_states: Vec::new(),
        status: SolveStatus::Success,
        stats,
    };
    sol.step_times.push(t0);
    sol.step_states.extend_from_slice(&x0);

    let mut y = x0;
    let mut f = vec![0.0; n];
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let t_next = if k + 1 == steps {
            tf
        } else {
            t0 + (k + 1) as f64 * dt
        };
        rhs(t, &y, &mut f);
        stats.rhs_evals += 1;
        let h = t_next - t;
        for i in 0..n {
            y[i] += h * f[i];
        }
        if !all_finite(&y) {
            sol.status = SolveStatus::NonfiniteState;
            break;
        }
        stats.accepted += 1;
        sol.step_times.push(t_next);
        sol.step_states.extend_from_slice(&y);
    }
    sol.stats = stats;
    sol.fill_save_grid(t0, tf, config.save_step);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> OdeProblem<impl FnMut(f64, &[f64], &mut [f64])> {
        OdeProblem::new(
            |_t, x: &[f64], dx: &mut [f64]| dx[0] = -x[0],
            0.0,
            1.0,
            vec![1.0],
        )
    }

    #[test]
    fn zero_rhs_is_exactly_constant() {
        let p = OdeProblem::new(
            |_t, _x: &[f64], dx: &mut [f64]| dx.fill(0.0),
            0.0,
            5.0,
            vec![3.5, -1.25],
        );
        let sol = solve_adaptive(p, &SolverConfig::default()).unwrap();
        assert!(sol.is_success());
        for s in &sol.save_states {
            assert_eq!(s, &vec![3.5, -1.25]);
        }
        let p = OdeProblem::new(
            |_t, _x: &[f64], dx: &mut [f64]| dx.fill(0.0),
            0.0,
            1.0,
            vec![2.0],
        );
        let sol = solve_fixed_euler(p, 1e-3, &SolverConfig::default()).unwrap();
        assert!(sol.save_states.iter().all(|s| s[0] == 2.0));
    }

    #[test]
    fn exponential_decay_final_value() {
        let sol = solve_adaptive(decay(), &SolverConfig::default()).unwrap();
        assert!(sol.is_success());
        assert_eq!(sol.end_time(), 1.0);
        assert!((sol.final_state()[0] - (-1.0f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn harmonic_oscillator_returns_after_one_period() {
        let tf = 2.0 * std::f64::consts::PI;
        let p = OdeProblem::new(
            |_t, x: &[f64], dx: &mut [f64]| {
                dx[0] = x[1];
                dx[1] = -x[0];
            },
            0.0,
            tf,
            vec![1.0, 0.0],
        );
        let sol = solve_adaptive(p, &SolverConfig::default()).unwrap();
        let x = sol.final_state();
        assert!((x[0] - 1.0).abs() < 1e-4 && x[1].abs() < 1e-4, "{x:?}");
    }

    #[test]
    fn euler_decay_within_step_error() {
        let sol = solve_fixed_euler(decay(), 1e-3, &SolverConfig::default()).unwrap();
        assert!((sol.final_state()[0] - (-1.0f64).exp()).abs() < 1e-3);
        assert_eq!(sol.num_steps(), 1001);
    }

    #[test]
    fn euler_error_halves_with_step() {
        let e = |dt: f64| {
            let s = solve_fixed_euler(decay(), dt, &SolverConfig::default()).unwrap();
            (s.final_state()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = e(1e-3) / e(5e-4);
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn interpolation_hits_nodes_bitwise_and_rejects_outside() {
        let sol = solve_adaptive(decay(), &SolverConfig::default()).unwrap();
        for i in 0..sol.num_steps() {
            let t = sol.step_times()[i];
            assert_eq!(sol.interpolate(t).unwrap(), sol.step_state(i));
        }
        assert!((sol.interpolate(0.5).unwrap()[0] - (-0.5f64).exp()).abs() < 1e-5);
        assert!(matches!(
            sol.interpolate(1.1),
            Err(OdeError::OutOfSpan { .. })
        ));
        assert!(sol.interpolate(-1e-9).is_err());
    }

    #[test]
    fn nan_rhs_reports_nonfinite() {
        let p = OdeProblem::new(
            |t, _x: &[f64], dx: &mut [f64]| dx[0] = if t > 0.5 { f64::NAN } else { 1.0 },
            0.0,
            1.0,
            vec![0.0],
        );
        let sol = solve_adaptive(p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::NonfiniteState);
        assert!(sol.end_time() <= 0.5 + 1e-9);
        assert!(sol.save_states.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn step_cap_reports_max_steps() {
        let cfg = SolverConfig {
            max_steps: 3,
            ..SolverConfig::default()
        };
        let p = OdeProblem::new(
            |t, _x: &[f64], dx: &mut [f64]| dx[0] = (50.0 * t).sin(),
            0.0,
            10.0,
            vec![0.0],
        );
        let sol = solve_adaptive(p, &cfg).unwrap();
        assert_eq!(sol.status, SolveStatus::MaxStepsExceeded);
        assert!(sol.end_time() < 10.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let cfg = SolverConfig {
            reltol: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_adaptive(decay(), &cfg),
            Err(OdeError::InvalidConfig(_))
        ));
        let p = OdeProblem::new(|_t, _x: &[f64], _dx: &mut [f64]| {}, 1.0, 1.0, vec![0.0]);
        assert!(matches!(
            solve_adaptive(p, &SolverConfig::default()),
            Err(OdeError::InvalidProblem(_))
        ));
        let cfg = SolverConfig {
            max_steps: 10,
            ..SolverConfig::default()
        };
        assert!(solve_fixed_euler(decay(), 1e-3, &cfg).is_err());
    }

    #[test]
    fn save_grid_covers_span() {
        let sol = solve_adaptive(decay(), &SolverConfig::default()).unwrap();
        assert_eq!(sol.save_times.len(), 101);
        assert_eq!(sol.save_times[0], 0.0);
        assert_eq!(*sol.save_times.last().unwrap(), 1.0);
    }
}
