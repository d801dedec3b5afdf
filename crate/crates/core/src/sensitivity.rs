//! Cost gradients of ODE-constrained Bolza problems by the interpolating
//! adjoint method.
//!
//! The cost is `J(p) = φ(x(tf)) + ∫ L(t, x, p) dt + R(p)` subject to
//! `ẋ = f(t, x, p)`, `x(t0) = x0`. The forward pass integrates the state
//! together with the running-cost quadrature and keeps the dense solution.
//! The backward pass integrates the costate `λ` and the parameter
//! quadrature `g` from `tf` to `t0`, reading `x(t)` off the stored forward
//! solution:
//!
//! ```text
//! λ̇ = −(∂f/∂x)ᵀλ − (∂L/∂x)ᵀ,   λ(tf) = (∂φ/∂x)ᵀ
//! ġ = −(∂f/∂p)ᵀλ − (∂L/∂p)ᵀ,   g(tf) = 0
//! dJ/dp = dR/dp + g(t0)
//! ```
//!
//! The reverse system is handed to the ODE solver as a forward problem in
//! the reflected time `s = t0 + tf − t`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::exec::Execution;
use crate::ode::{self, OdeError, OdeProblem, OdeSolution, SolveStatus, SolverConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtpgError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("forward pass stopped at t = {t}: {status}")]
    ForwardFailed { status: SolveStatus, t: f64 },
    #[error("backward pass stopped at t = {t}: {status}")]
    BackwardFailed { status: SolveStatus, t: f64 },
    #[error("cost evaluated to a non-finite value")]
    NonfiniteCost,
    #[error("parameter vector has length {got}, problem expects {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("finite-difference evaluation failed at coordinate {coordinate}: {source}")]
    FiniteDifference {
        coordinate: usize,
        source: Box<CtpgError>,
    },
}

/// The optimal-control problem: dynamics and the three cost terms.
///
/// `dynamics` writes `f(t, x, p)` into `dx`; a model that cannot be
/// evaluated at `x` should write non-finite values, which the solver
/// reports as a `nonfinite-state` failure.
pub trait CtpgProblem: Sync {
    fn state_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn t0(&self) -> f64;
    fn tf(&self) -> f64;
    fn initial_state(&self) -> Vec<f64>;
    fn dynamics(&self, t: f64, x: &[f64], p: &[f64], dx: &mut [f64]);
    fn running_cost(&self, t: f64, x: &[f64], p: &[f64]) -> f64;
    fn terminal_cost(&self, x: &[f64]) -> f64;
    /// `f` into `dx` and `L` as the return value, at one point. Override
    /// when both share expensive intermediates.
    fn dynamics_with_cost(&self, t: f64, x: &[f64], p: &[f64], dx: &mut [f64]) -> f64 {
        self.dynamics(t, x, p, dx);
        self.running_cost(t, x, p)
    }
    fn regulariser(&self, _p: &[f64]) -> f64 {
        0.0
    }
}

/// Partial derivatives of `f` and `L` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    /// `n × n`
    pub dfdx: DMatrix<f64>,
    /// `n × m`
    pub dfdp: DMatrix<f64>,
    pub dldx: DVector<f64>,
    pub dldp: DVector<f64>,
}

impl Partials {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            dfdx: DMatrix::zeros(n, n),
            dfdp: DMatrix::zeros(n, m),
            dldx: DVector::zeros(n),
            dldp: DVector::zeros(m),
        }
    }
}

pub trait DerivativeProvider<P: CtpgProblem + ?Sized>: Sync {
    fn dynamics_partials(&self, problem: &P, t: f64, x: &[f64], p: &[f64]) -> Partials;
    fn terminal_gradient(&self, problem: &P, x: &[f64]) -> Vec<f64>;
    fn regulariser_gradient(&self, problem: &P, p: &[f64]) -> Vec<f64>;
}

/// Partials by central differences of the problem's own functions, with
/// per-coordinate step `rel_step · max(1, |v_i|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralDifference {
    pub rel_step: f64,
}

impl Default for CentralDifference {
    fn default() -> Self {
        Self { rel_step: 1e-6 }
    }
}

impl CentralDifference {
    fn step(&self, v: f64) -> f64 {
        self.rel_step * v.abs().max(1.0)
    }

    fn scalar_gradient(&self, v: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let mut w = v.to_vec();
        (0..v.len())
            .map(|i| {
                let h = self.step(v[i]);
                w[i] = v[i] + h;
                let up = f(&w);
                w[i] = v[i] - h;
                let down = f(&w);
                w[i] = v[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}

impl<P: CtpgProblem + ?Sized> DerivativeProvider<P> for CentralDifference {
    fn dynamics_partials(&self, problem: &P, t: f64, x: &[f64], p: &[f64]) -> Partials {
        let n = problem.state_dim();
        let m = problem.param_dim();
        let mut out = Partials::zeros(n, m);
        let (mut up, mut down) = (vec![0.0; n], vec![0.0; n]);

        let mut xw = x.to_vec();
        for i in 0..n {
            let h = self.step(x[i]);
            xw[i] = x[i] + h;
            problem.dynamics(t, &xw, p, &mut up);
            let l_up = problem.running_cost(t, &xw, p);
            xw[i] = x[i] - h;
            problem.dynamics(t, &xw, p, &mut down);
            let l_down = problem.running_cost(t, &xw, p);
            xw[i] = x[i];
            for r in 0..n {
                out.dfdx[(r, i)] = (up[r] - down[r]) / (2.0 * h);
            }
            out.dldx[i] = (l_up - l_down) / (2.0 * h);
        }

        let mut pw = p.to_vec();
        for i in 0..m {
            let h = self.step(p[i]);
            pw[i] = p[i] + h;
            problem.dynamics(t, x, &pw, &mut up);
            let l_up = problem.running_cost(t, x, &pw);
            pw[i] = p[i] - h;
            problem.dynamics(t, x, &pw, &mut down);
            let l_down = problem.running_cost(t, x, &pw);
            pw[i] = p[i];
            for r in 0..n {
                out.dfdp[(r, i)] = (up[r] - down[r]) / (2.0 * h);
            }
            out.dldp[i] = (l_up - l_down) / (2.0 * h);
        }
        out
    }

    fn terminal_gradient(&self, problem: &P, x: &[f64]) -> Vec<f64> {
        self.scalar_gradient(x, |v| problem.terminal_cost(v))
    }

    fn regulariser_gradient(&self, problem: &P, p: &[f64]) -> Vec<f64> {
        self.scalar_gradient(p, |v| problem.regulariser(v))
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Dense solution of the augmented state `[x; ∫L]`.
    pub solution: OdeSolution,
    /// `φ(x(tf)) + ∫L`, without the regulariser.
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct BackwardPass {
    /// `∫ (∂L/∂p + λᵀ ∂f/∂p) dt`, i.e. dJ/dp without dR/dp.
    pub gradient: Vec<f64>,
    pub costate_initial: Vec<f64>,
    pub costate_terminal: Vec<f64>,
    pub steps: usize,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diagnostics {
    pub forward_steps: usize,
    pub backward_steps: usize,
    pub forward_status: SolveStatus,
    pub backward_status: SolveStatus,
}

#[derive(Debug, Clone)]
pub struct GradientResult {
    pub cost: f64,
    pub gradient: Vec<f64>,
    pub forward_solution: OdeSolution,
    pub diagnostics: Diagnostics,
}

fn check_params<P: CtpgProblem + ?Sized>(problem: &P, p: &[f64]) -> Result<(), CtpgError> {
    if p.len() != problem.param_dim() {
        return Err(CtpgError::ParamLength {
            expected: problem.param_dim(),
            got: p.len(),
        });
    }
    Ok(())
}

pub fn forward_pass<P: CtpgProblem + ?Sized>(
    problem: &P,
    p: &[f64],
    solver: &SolverConfig,
) -> Result<ForwardPass, CtpgError> {
    check_params(problem, p)?;
    let n = problem.state_dim();
    let mut z0 = problem.initial_state();
    debug_assert_eq!(z0.len(), n);
    z0.push(0.0);
    let rhs = |t: f64, z: &[f64], dz: &mut [f64]| {
        dz[n] = problem.dynamics_with_cost(t, &z[..n], p, &mut dz[..n]);
    };
    let solution = ode::solve(OdeProblem::new(rhs, problem.t0(), problem.tf(), z0), solver)?;
    if !solution.is_success() {
        return Err(CtpgError::ForwardFailed {
            status: solution.status,
            t: solution.end_time(),
        });
    }
    let zf = solution.final_state();
    let cost = problem.terminal_cost(&zf[..n]) + zf[n];
    if !cost.is_finite() {
        return Err(CtpgError::NonfiniteCost);
    }
    Ok(ForwardPass { solution, cost })
}

pub fn backward_pass<P, D>(
    problem: &P,
    derivatives: &D,
    p: &[f64],
    forward: &OdeSolution,
    solver: &SolverConfig,
) -> Result<BackwardPass, CtpgError>
where
    P: CtpgProblem + ?Sized,
    D: DerivativeProvider<P> + ?Sized,
{
    check_params(problem, p)?;
    if !forward.is_success() {
        return Err(CtpgError::ForwardFailed {
            status: forward.status,
            t: forward.end_time(),
        });
    }
    let n = problem.state_dim();
    let m = problem.param_dim();
    let (t0, tf) = (forward.start_time(), forward.end_time());

    let costate_terminal = derivatives.terminal_gradient(problem, &forward.final_state()[..n]);
    let mut w0 = costate_terminal.clone();
    w0.resize(n + m, 0.0);

    let mut zbuf = vec![0.0; forward.dim()];
    let mut lookup_error: Option<OdeError> = None;
    let rhs = |s: f64, w: &[f64], dw: &mut [f64]| {
        // reflected time; rounding can push it an ulp past the ends
        let t = (t0 + tf - s).clamp(t0, tf);
        if let Err(e) = forward.interpolate_into(t, &mut zbuf) {
            lookup_error.get_or_insert(e);
            dw.fill(f64::NAN);
            return;
        }
        let part = derivatives.dynamics_partials(problem, t, &zbuf[..n], p);
        let lambda = &w[..n];
        // columns are contiguous, so Aᵀλ is a run of column dot products
        let (dl, dg) = dw.split_at_mut(n);
        for (j, out) in dl.iter_mut().enumerate() {
            let col = part.dfdx.column(j);
            *out = part.dldx[j] + col.iter().zip(lambda).map(|(a, l)| a * l).sum::<f64>();
        }
        for (j, out) in dg.iter_mut().enumerate() {
            let col = part.dfdp.column(j);
            *out = part.dldp[j] + col.iter().zip(lambda).map(|(a, l)| a * l).sum::<f64>();
        }
    };
    let solution = ode::solve(OdeProblem::new(rhs, t0, tf, w0), solver)?;
    if let Some(e) = lookup_error {
        return Err(e.into());
    }
    if !solution.is_success() {
        return Err(CtpgError::BackwardFailed {
            status: solution.status,
            t: t0 + tf - solution.end_time(),
        });
    }
    debug_assert_eq!(&solution.step_state(0)[..n], costate_terminal.as_slice());
    let wf = solution.final_state();
    Ok(BackwardPass {
        gradient: wf[n..].to_vec(),
        costate_initial: wf[..n].to_vec(),
        costate_terminal,
        steps: solution.num_steps() - 1,
        status: solution.status,
    })
}

/// Forward pass, backward pass, then the regulariser terms.
pub fn ctpg_cost_and_gradient<P, D>(
    problem: &P,
    derivatives: &D,
    p: &[f64],
    solver: &SolverConfig,
) -> Result<GradientResult, CtpgError>
where
    P: CtpgProblem + ?Sized,
    D: DerivativeProvider<P> + ?Sized,
{
    ctpg_cost_and_gradient_with(problem, derivatives, p, solver, solver)
}

/// As [`ctpg_cost_and_gradient`], with separate settings for the reverse pass.
pub fn ctpg_cost_and_gradient_with<P, D>(
    problem: &P,
    derivatives: &D,
    p: &[f64],
    forward_solver: &SolverConfig,
    backward_solver: &SolverConfig,
) -> Result<GradientResult, CtpgError>
where
    P: CtpgProblem + ?Sized,
    D: DerivativeProvider<P> + ?Sized,
{
    let fwd = forward_pass(problem, p, forward_solver)?;
    let bwd = backward_pass(problem, derivatives, p, &fwd.solution, backward_solver)?;
    let cost = fwd.cost + problem.regulariser(p);
    let d_reg = derivatives.regulariser_gradient(problem, p);
    let gradient: Vec<f64> = bwd
        .gradient
        .iter()
        .zip(&d_reg)
        .map(|(g, r)| g + r)
        .collect();
    if !cost.is_finite() {
        return Err(CtpgError::NonfiniteCost);
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(CtpgError::BackwardFailed {
            status: SolveStatus::NonfiniteState,
            t: fwd.solution.start_time(),
        });
    }
    Ok(GradientResult {
        cost,
        gradient,
        diagnostics: Diagnostics {
            forward_steps: fwd.solution.num_steps() - 1,
            backward_steps: bwd.steps,
            forward_status: fwd.solution.status,
            backward_status: bwd.status,
        },
        forward_solution: fwd.solution,
    })
}

/// Total cost `J(p)` from one forward pass plus the regulariser.
pub fn total_cost<P: CtpgProblem + ?Sized>(
    problem: &P,
    p: &[f64],
    solver: &SolverConfig,
) -> Result<f64, CtpgError> {
    Ok(forward_pass(problem, p, solver)?.cost + problem.regulariser(p))
}

/// Central-difference gradient of the total cost, one independent forward
/// pass per perturbed point, step `eps · max(1, |p_i|)`.
pub fn finite_difference_gradient<P: CtpgProblem + ?Sized>(
    problem: &P,
    p: &[f64],
    solver: &SolverConfig,
    eps: f64,
    exec: Execution,
) -> Result<Vec<f64>, CtpgError> {
    check_params(problem, p)?;
    assert!(eps > 0.0, "finite-difference step must be positive");
    let m = p.len();
    let evals = exec.map(2 * m, |k| {
        let i = k / 2;
        let h = eps * p[i].abs().max(1.0);
        let mut q = p.to_vec();
        q[i] += if k % 2 == 0 { h } else { -h };
        total_cost(problem, &q, solver).map_err(|e| CtpgError::FiniteDifference {
            coordinate: i,
            source: Box::new(e),
        })
    });
    let mut grad = Vec::with_capacity(m);
    for i in 0..m {
        let h = eps * p[i].abs().max(1.0);
        let up = evals[2 * i].clone()?;
        let down = evals[2 * i + 1].clone()?;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `‖a − b‖∞ / ‖b‖∞`, the discrepancy measure used for gradient checks.
pub fn max_relative_error(a: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn relative_l2_error(a: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(reference)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = reference.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
