//! Ensemble policy optimisation: mean cost and gradient over a grid of
//! scenarios, minimised by ADAM and then BFGS.

mod optim;

pub use optim::{adam_step, bfgs_step, AdamConfig, AdamState, BfgsConfig, BfgsState, BfgsStep};

use std::io::{self, Write};
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airframe::{AeroParams, AirframeProblem, AnalyticDerivatives};
use crate::exec::Execution;
use crate::ode::SolverConfig;
use crate::policy::{init_params, MlpSpec, PolicyError};
use crate::sensitivity::{ctpg_cost_and_gradient, CtpgProblem, DerivativeProvider};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("all {members} ensemble members failed; first: {first_error}")]
    AllMembersFailed { members: usize, first_error: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("unrecoverable failure at iteration {iteration}: {source}")]
    Unrecoverable {
        iteration: usize,
        /// Iterate at which the failure happened, for post-mortem.
        params: Vec<f64>,
        source: EvalError,
    },
}

/// Scenario grid: every `(h0, V0, a_z_cmd)` combination is one member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleGrid {
    pub h0_values: Vec<f64>,
    pub v0_values: Vec<f64>,
    pub cmd_values: Vec<f64>,
}

fn range(start: f64, step: f64, stop: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl Default for EnsembleGrid {
    fn default() -> Self {
        Self {
            h0_values: range(5000.0, 1000.0, 8000.0),
            v0_values: range(700.0, 100.0, 900.0),
            cmd_values: range(-100.0, 25.0, 100.0),
        }
    }
}

impl EnsembleGrid {
    pub fn single(h0: f64, v0: f64, cmd: f64) -> Self {
        Self {
            h0_values: vec![h0],
            v0_values: vec![v0],
            cmd_values: vec![cmd],
        }
    }

    pub fn len(&self) -> usize {
        self.h0_values.len() * self.v0_values.len() * self.cmd_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Members in `h0`-major, then `V0`, then command order.
    pub fn members(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &h0 in &self.h0_values {
            for &v0 in &self.v0_values {
                for &cmd in &self.cmd_values {
                    out.push((h0, v0, cmd));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub grad_inf_tol: f64,
    pub rel_cost_tol: f64,
    /// Consecutive small relative cost changes required to stop.
    pub patience: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            grad_inf_tol: 1e-6,
            rel_cost_tol: 1e-9,
            patience: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub phase1: AdamConfig,
    pub phase2: BfgsConfig,
    /// Coefficient of `‖p‖²`.
    pub reg_weight: f64,
    pub solver: SolverConfig,
    /// `[t0, tf]` in seconds.
    pub horizon: [f64; 2],
    pub convergence: ConvergenceConfig,
    /// Cost assigned to a member whose integration fails; its gradient is zero.
    pub failure_penalty: f64,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            phase1: AdamConfig::default(),
            phase2: BfgsConfig::default(),
            reg_weight: 1e-4,
            solver: SolverConfig::default(),
            horizon: [0.0, 3.0],
            convergence: ConvergenceConfig::default(),
            failure_penalty: 1e6,
            execution: Execution::Parallel,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        self.solver
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        let a = &self.phase1;
        if !(a.learning_rate > 0.0 && a.epsilon > 0.0)
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
        {
            return bad("ADAM needs learning_rate > 0, epsilon > 0 and betas in [0, 1)");
        }
        let b = &self.phase2;
        if !(b.initial_step_norm > 0.0
            && b.armijo_c > 0.0
            && b.armijo_c < 1.0
            && b.shrink > 0.0
            && b.shrink < 1.0)
        {
            return bad("BFGS needs initial_step_norm > 0 and armijo_c, shrink in (0, 1)");
        }
        if !(self.reg_weight >= 0.0) {
            return bad("reg_weight must be non-negative");
        }
        if !(self.horizon[0] < self.horizon[1]) {
            return bad("horizon must satisfy t0 < tf");
        }
        let c = &self.convergence;
        if !(c.grad_inf_tol >= 0.0 && c.rel_cost_tol >= 0.0) || c.patience == 0 {
            return bad("convergence tolerances must be non-negative and patience positive");
        }
        if !(self.failure_penalty.is_finite()) {
            return bad("failure_penalty must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberOutcome {
    pub cost: f64,
    /// Failure message when the member was replaced by the penalty.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub gradient: Vec<f64>,
    pub members: Vec<MemberOutcome>,
}

impl Evaluation {
    pub fn failed_members(&self) -> usize {
        self.members.iter().filter(|m| m.failure.is_some()).count()
    }
}

/// Something the optimisation loop can minimise.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, p: &[f64]) -> Result<Evaluation, EvalError>;
}

/// Mean of per-member adjoint costs and gradients, plus `w‖p‖²` added once.
///
/// Members should carry no regulariser of their own.
pub struct Ensemble<P, D> {
    pub members: Vec<P>,
    pub derivatives: D,
    pub reg_weight: f64,
    pub solver: SolverConfig,
    pub failure_penalty: f64,
    pub execution: Execution,
}

impl<P, D> Objective for Ensemble<P, D>
where
    P: CtpgProblem + Send,
    D: DerivativeProvider<P>,
{
    fn dim(&self) -> usize {
        self.members.first().map_or(0, |m| m.param_dim())
    }

    fn evaluate(&self, p: &[f64]) -> Result<Evaluation, EvalError> {
        let k = self.members.len();
        let results = self.execution.map(k, |i| {
            ctpg_cost_and_gradient(&self.members[i], &self.derivatives, p, &self.solver)
        });

        let mut cost = 0.0;
        let mut gradient = vec![0.0; p.len()];
        let mut members = Vec::with_capacity(k);
        let mut first_error = None;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(res) => {
                    cost += res.cost;
                    for (g, v) in gradient.iter_mut().zip(&res.gradient) {
                        *g += v;
                    }
                    members.push(MemberOutcome {
                        cost: res.cost,
                        failure: None,
                    });
                }
                Err(e) => {
                    warn!("ensemble member {i} failed: {e}");
                    let msg = e.to_string();
                    first_error.get_or_insert_with(|| msg.clone());
                    cost += self.failure_penalty;
                    members.push(MemberOutcome {
                        cost: self.failure_penalty,
                        failure: Some(msg),
                    });
                }
            }
        }
        if let (Some(first_error), true) = (
            first_error.as_ref(),
            members.iter().all(|m| m.failure.is_some()),
        ) {
            return Err(EvalError::AllMembersFailed {
                members: k,
                first_error: first_error.clone(),
            });
        }
        let kf = k as f64;
        cost = cost / kf + self.reg_weight * p.iter().map(|v| v * v).sum::<f64>();
        for (g, v) in gradient.iter_mut().zip(p) {
            *g = *g / kf + 2.0 * self.reg_weight * v;
        }
        Ok(Evaluation {
            cost,
            gradient,
            members,
        })
    }
}

/// Builds the airframe ensemble over `grid` (members without regulariser).
pub fn airframe_ensemble(
    grid: &EnsembleGrid,
    spec: &MlpSpec,
    aero: &AeroParams,
    config: &TrainConfig,
) -> Ensemble<AirframeProblem, AnalyticDerivatives> {
    let members = grid
        .members()
        .into_iter()
        .map(|(h0, v0, cmd)| {
            let mut prob = AirframeProblem::new(aero.clone(), spec.clone(), h0, v0, cmd);
            prob.t0 = config.horizon[0];
            prob.tf = config.horizon[1];
            prob
        })
        .collect();
    Ensemble {
        members,
        derivatives: AnalyticDerivatives,
        reg_weight: config.reg_weight,
        solver: config.solver.clone(),
        failure_penalty: config.failure_penalty,
        execution: config.execution,
    }
}

pub fn ensemble_cost_gradient(
    grid: &EnsembleGrid,
    spec: &MlpSpec,
    aero: &AeroParams,
    p: &[f64],
    config: &TrainConfig,
) -> Result<Evaluation, EvalError> {
    airframe_ensemble(grid, spec, aero, config).evaluate(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Adam,
    Bfgs,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Adam => "adam",
            Phase::Bfgs => "bfgs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningEntry {
    pub iteration: usize,
    pub phase: Phase,
    pub cost: f64,
    pub grad_inf_norm: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningRecord {
    pub entries: Vec<LearningEntry>,
}

pub const LEARNING_CURVE_HEADER: &str = "iter,phase,cost,grad_inf_norm,wall_s";

impl LearningRecord {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{LEARNING_CURVE_HEADER}")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.iteration,
                e.phase.as_str(),
                e.cost,
                e.grad_inf_norm,
                e.wall_s
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    CostStagnation,
    MaxIterations,
    LineSearchStall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Best logged iterate.
    pub params: Vec<f64>,
    pub cost: f64,
    pub initial_params: Vec<f64>,
    pub record: LearningRecord,
    pub phase1_stop: StopReason,
    pub phase2_stop: StopReason,
    pub wall_s: f64,
}

struct Convergence<'a> {
    cfg: &'a ConvergenceConfig,
    last_cost: Option<f64>,
    streak: usize,
}

impl<'a> Convergence<'a> {
    fn new(cfg: &'a ConvergenceConfig) -> Self {
        Self {
            cfg,
            last_cost: None,
            streak: 0,
        }
    }

    fn check(&mut self, cost: f64, grad_inf: f64) -> Option<StopReason> {
        if grad_inf < self.cfg.grad_inf_tol {
            return Some(StopReason::GradientTolerance);
        }
        if let Some(prev) = self.last_cost {
            let rel = (cost - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            self.streak = if rel < self.cfg.rel_cost_tol {
                self.streak + 1
            } else {
                0
            };
        }
        self.last_cost = Some(cost);
        (self.streak >= self.cfg.patience).then_some(StopReason::CostStagnation)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// ADAM from `p0`, then BFGS from the best ADAM iterate.
pub fn optimise<O: Objective + ?Sized>(
    objective: &O,
    p0: Vec<f64>,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let start = Instant::now();
    let mut record = LearningRecord::default();
    let mut iteration = 0usize;
    let mut best: Option<(Vec<f64>, f64)> = None;

    let evaluate = |p: &[f64], iteration: usize| {
        objective
            .evaluate(p)
            .map_err(|source| TrainError::Unrecoverable {
                iteration,
                params: p.to_vec(),
                source,
            })
    };
    let mut log_entry = |record: &mut LearningRecord,
                         best: &mut Option<(Vec<f64>, f64)>,
                         phase,
                         p: &[f64],
                         ev: &Evaluation| {
        let entry = LearningEntry {
            iteration,
            phase,
            cost: ev.cost,
            grad_inf_norm: inf_norm(&ev.gradient),
            wall_s: start.elapsed().as_secs_f64(),
        };
        debug!(
            "iter {} [{}] J = {:.6e} |g| = {:.3e}",
            entry.iteration,
            phase.as_str(),
            entry.cost,
            entry.grad_inf_norm
        );
        record.entries.push(entry);
        iteration += 1;
        if best.as_ref().is_none_or(|(_, c)| ev.cost < *c) {
            *best = Some((p.to_vec(), ev.cost));
        }
        entry
    };

    let mut p = p0.clone();
    let mut adam = AdamState::new(p.len());
    let mut conv = Convergence::new(&config.convergence);
    let mut phase1_stop = StopReason::MaxIterations;
    for _ in 0..config.phase1.max_iters {
        let ev = evaluate(&p, record.len())?;
        let e = log_entry(&mut record, &mut best, Phase::Adam, &p, &ev);
        if let Some(r) = conv.check(e.cost, e.grad_inf_norm) {
            phase1_stop = r;
            break;
        }
        let (next, state) = adam_step(&adam, &p, &ev.gradient, &config.phase1);
        p = next;
        adam = state;
    }

    if let Some((bp, _)) = &best {
        p = bp.clone();
    }
    let mut phase2_stop = StopReason::MaxIterations;
    if config.phase2.max_iters > 0 {
        let ev = evaluate(&p, record.len())?;
        let (mut cost, mut grad) = (ev.cost, ev.gradient.clone());
        let mut ev = Some(ev);
        let mut bfgs = BfgsState::new(p.len());
        let mut conv = Convergence::new(&config.convergence);
        for _ in 0..config.phase2.max_iters {
            let current = ev.take().unwrap_or_else(|| Evaluation {
                cost,
                gradient: grad.clone(),
                members: Vec::new(),
            });
            let e = log_entry(&mut record, &mut best, Phase::Bfgs, &p, &current);
            if let Some(r) = conv.check(e.cost, e.grad_inf_norm) {
                phase2_stop = r;
                break;
            }
            let it = record.len();
            let step = bfgs_step(&mut bfgs, &p, cost, &grad, &config.phase2, |q| {
                evaluate(q, it).map(|e| (e.cost, e.gradient))
            })?;
            if step.stalled {
                phase2_stop = StopReason::LineSearchStall;
                break;
            }
            (p, cost, grad) = (step.p, step.cost, step.grad);
        }
    }

    let (params, cost) =
        best.ok_or_else(|| TrainError::InvalidConfig("no iterations were run".into()))?;
    Ok(TrainOutcome {
        params,
        cost,
        initial_params: p0,
        record,
        phase1_stop,
        phase2_stop,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// Seeded initialisation followed by [`optimise`] on the airframe ensemble.
pub fn train(
    grid: &EnsembleGrid,
    spec: &MlpSpec,
    aero: &AeroParams,
    seed: u64,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    spec.validate()?;
    if grid.is_empty() {
        return Err(TrainError::InvalidConfig("ensemble grid is empty".into()));
    }
    let objective = airframe_ensemble(grid, spec, aero, config);
    optimise(&objective, init_params(spec, seed), config)
}
