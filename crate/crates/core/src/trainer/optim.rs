//! First-order (ADAM) and quasi-Newton (BFGS) update rules.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 1000,
        }
    }
}

/// Moment estimates and step count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }
}

/// Bias-corrected ADAM update.
pub fn adam_step(
    state: &AdamState,
    p: &[f64],
    grad: &[f64],
    hyper: &AdamConfig,
) -> (Vec<f64>, AdamState) {
    assert_eq!(p.len(), grad.len(), "parameter and gradient lengths differ");
    let mut next = if state.m.len() == p.len() {
        state.clone()
    } else {
        AdamState::new(p.len())
    };
    next.t += 1;
    let bc1 = 1.0 - hyper.beta1.powi(next.t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(next.t as i32);
    let mut out = p.to_vec();
    for i in 0..p.len() {
        next.m[i] = hyper.beta1 * next.m[i] + (1.0 - hyper.beta1) * grad[i];
        next.v[i] = hyper.beta2 * next.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        let m_hat = next.m[i] / bc1;
        let v_hat = next.v[i] / bc2;
        out[i] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
    (out, next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BfgsConfig {
    /// Length of the very first step.
    pub initial_step_norm: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant.
    pub armijo_c: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            initial_step_norm: 1e-4,
            max_iters: 1000,
            armijo_c: 1e-4,
            shrink: 0.5,
            max_backtracks: 30,
        }
    }
}

/// Dense inverse-Hessian approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct BfgsState {
    pub inv_hessian: DMatrix<f64>,
    pub iterations: usize,
    rescaled: bool,
}

impl BfgsState {
    pub fn new(dim: usize) -> Self {
        Self {
            inv_hessian: DMatrix::identity(dim, dim),
            iterations: 0,
            rescaled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsStep {
    pub p: Vec<f64>,
    pub cost: f64,
    pub grad: Vec<f64>,
    /// No acceptable step was found; `p` is the input point.
    pub stalled: bool,
    pub evaluations: usize,
}

/// One BFGS iteration with Armijo backtracking.
///
/// `eval` returns cost and gradient at a trial point; the accepted point's
/// values are handed back so the caller never works with a stale gradient.
pub fn bfgs_step<E, F>(
    state: &mut BfgsState,
    p: &[f64],
    cost: f64,
    grad: &[f64],
    config: &BfgsConfig,
    mut eval: F,
) -> Result<BfgsStep, E>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    let n = p.len();
    let stalled = |evaluations| BfgsStep {
        p: p.to_vec(),
        cost,
        grad: grad.to_vec(),
        stalled: true,
        evaluations,
    };
    let g = DVector::from_column_slice(grad);
    if g.amax() == 0.0 || g.iter().any(|v| !v.is_finite()) {
        return Ok(stalled(0));
    }

    let mut d = -(&state.inv_hessian * &g);
    if d.dot(&g) >= 0.0 {
        // lost positive definiteness; restart from steepest descent
        state.inv_hessian = DMatrix::identity(n, n);
        state.rescaled = false;
        d = -g.clone();
    }
    if state.iterations == 0 {
        d *= config.initial_step_norm / d.norm();
    }
    let slope = d.dot(&g);

    let mut step = 1.0;
    let mut evaluations = 0;
    let mut accepted = None;
    for _ in 0..=config.max_backtracks {
        let trial: Vec<f64> = p.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
        let (c, gr) = eval(&trial)?;
        evaluations += 1;
        if c.is_finite() && c <= cost + config.armijo_c * step * slope {
            accepted = Some((trial, c, gr));
            break;
        }
        step *= config.shrink;
    }
    let Some((p_next, cost_next, grad_next)) = accepted else {
        return Ok(stalled(evaluations));
    };

    let s = DVector::from_iterator(n, p_next.iter().zip(p).map(|(a, b)| a - b));
    let y = DVector::from_iterator(n, grad_next.iter().zip(grad).map(|(a, b)| a - b));
    let sy = s.dot(&y);
    if sy > 1e-10 * s.norm() * y.norm() && grad_next.iter().all(|v| v.is_finite()) {
        if !state.rescaled {
            state.inv_hessian = DMatrix::identity(n, n) * (sy / y.dot(&y));
            state.rescaled = true;
        }
        let rho = 1.0 / sy;
        let hy = &state.inv_hessian * &y;
        let yhy = y.dot(&hy);
        // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, expanded
        state.inv_hessian -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
        state.inv_hessian += (&s * s.transpose()) * (rho * rho * yhy + rho);
    }
    state.iterations += 1;
    Ok(BfgsStep {
        p: p_next,
        cost: cost_next,
        grad: grad_next,
        stalled: false,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn first_adam_step_moves_each_coordinate_by_learning_rate() {
        let cfg = AdamConfig::default();
        let g = [3.0, -0.02, 1e3, -7.5];
        let p = [0.5, 0.5, -1.0, 2.0];
        let (next, st) = adam_step(&AdamState::new(4), &p, &g, &cfg);
        assert_eq!(st.t, 1);
        for i in 0..4 {
            let moved = p[i] - next[i];
            assert!(
                (moved - cfg.learning_rate * g[i].signum()).abs() < 1e-8,
                "{moved}"
            );
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params_and_is_deterministic() {
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(2);
        let mut p = vec![1.5, -2.0];
        for _ in 0..50 {
            let (n, s) = adam_step(&st, &p, &[0.0, 0.0], &cfg);
            p = n;
            st = s;
        }
        assert_eq!(p, vec![1.5, -2.0]);
        let a = adam_step(&st, &p, &[0.3, 0.1], &cfg);
        let b = adam_step(&st, &p, &[0.3, 0.1], &cfg);
        assert_eq!(a, b);
    }

    fn quadratic(target: &[f64]) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>), Infallible> + '_ {
        move |q: &[f64]| {
            let r: Vec<f64> = q.iter().zip(target).map(|(a, b)| a - b).collect();
            Ok((0.5 * r.iter().map(|v| v * v).sum::<f64>(), r))
        }
    }

    #[test]
    fn bfgs_solves_quadratic_quickly() {
        let target: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        let mut eval = quadratic(&target);
        let mut p = vec![0.0; 8];
        let (mut c, mut g) = eval(&p).unwrap();
        let mut st = BfgsState::new(8);
        let cfg = BfgsConfig::default();
        let mut iters = 0;
        while g.iter().fold(0.0f64, |m, v| m.max(v.abs())) > 1e-12 && iters < 13 {
            let step = bfgs_step(&mut st, &p, c, &g, &cfg, &mut eval).unwrap();
            assert!(!step.stalled);
            if iters == 0 {
                let norm: f64 = step
                    .p
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((norm - 1e-4).abs() < 1e-16, "{norm}");
            }
            (p, c, g) = (step.p, step.cost, step.grad);
            iters += 1;
        }
        assert!(iters <= 8 + 5);
        for (a, b) in p.iter().zip(&target) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn bfgs_zero_gradient_stalls() {
        let mut st = BfgsState::new(3);
        let p = [1.0, 2.0, 3.0];
        let step = bfgs_step(
            &mut st,
            &p,
            0.0,
            &[0.0; 3],
            &BfgsConfig::default(),
            quadratic(&p),
        )
        .unwrap();
        assert!(step.stalled);
        assert_eq!(step.p, p.to_vec());
        assert_eq!(step.evaluations, 0);
    }

    #[test]
    fn bfgs_line_search_failure_stalls() {
        let mut st = BfgsState::new(1);
        let step = bfgs_step(
            &mut st,
            &[0.0],
            1.0,
            &[1.0],
            &BfgsConfig::default(),
            |_q: &[f64]| Ok::<_, Infallible>((f64::INFINITY, vec![1.0])),
        )
        .unwrap();
        assert!(step.stalled);
        assert_eq!(step.evaluations, 31);
    }
}
