#![allow(dead_code)]

use ctpg::sensitivity::Partials;
use ctpg::{CtpgProblem, DerivativeProvider};
use nalgebra::{DMatrix, DVector};

/// `ẋ = p x`, `x(0) = 1`, `J = x(tf)`; `dJ/dp = tf·e^{p tf}`.
pub struct Growth {
    pub tf: f64,
}

impl CtpgProblem for Growth {
    fn state_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn t0(&self) -> f64 {
        0.0
    }
    fn tf(&self) -> f64 {
        self.tf
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn dynamics(&self, _t: f64, x: &[f64], p: &[f64], dx: &mut [f64]) {
        dx[0] = p[0] * x[0];
    }
    fn running_cost(&self, _t: f64, _x: &[f64], _p: &[f64]) -> f64 {
        0.0
    }
    fn terminal_cost(&self, x: &[f64]) -> f64 {
        x[0]
    }
}

pub struct GrowthPartials;

impl DerivativeProvider<Growth> for GrowthPartials {
    fn dynamics_partials(&self, _: &Growth, _t: f64, x: &[f64], p: &[f64]) -> Partials {
        let mut d = Partials::zeros(1, 1);
        d.dfdx[(0, 0)] = p[0];
        d.dfdp[(0, 0)] = x[0];
        d
    }
    fn terminal_gradient(&self, _: &Growth, _x: &[f64]) -> Vec<f64> {
        vec![1.0]
    }
    fn regulariser_gradient(&self, _: &Growth, _p: &[f64]) -> Vec<f64> {
        vec![0.0]
    }
}

/// `ẋ = A x + p`, `J = cᵀ x(tf)`, no running cost.
pub struct Linear {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub x0: Vec<f64>,
    pub tf: f64,
}

impl CtpgProblem for Linear {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn param_dim(&self) -> usize {
        self.a.nrows()
    }
    fn t0(&self) -> f64 {
        0.0
    }
    fn tf(&self) -> f64 {
        self.tf
    }
    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }
    fn dynamics(&self, _t: f64, x: &[f64], p: &[f64], dx: &mut [f64]) {
        let ax = &self.a * DVector::from_column_slice(x);
        for i in 0..dx.len() {
            dx[i] = ax[i] + p[i];
        }
    }
    fn running_cost(&self, _t: f64, _x: &[f64], _p: &[f64]) -> f64 {
        0.0
    }
    fn terminal_cost(&self, x: &[f64]) -> f64 {
        self.c.dot(&DVector::from_column_slice(x))
    }
}

pub struct LinearPartials;

impl DerivativeProvider<Linear> for LinearPartials {
    fn dynamics_partials(&self, prob: &Linear, _t: f64, _x: &[f64], _p: &[f64]) -> Partials {
        let n = prob.a.nrows();
        let mut d = Partials::zeros(n, n);
        d.dfdx.copy_from(&prob.a);
        d.dfdp.fill_with_identity();
        d
    }
    fn terminal_gradient(&self, prob: &Linear, _x: &[f64]) -> Vec<f64> {
        prob.c.as_slice().to_vec()
    }
    fn regulariser_gradient(&self, prob: &Linear, _p: &[f64]) -> Vec<f64> {
        vec![0.0; prob.a.nrows()]
    }
}

/// Closed-loop-free problem with zero costs everywhere.
pub struct Silent;

impl CtpgProblem for Silent {
    fn state_dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn t0(&self) -> f64 {
        0.0
    }
    fn tf(&self) -> f64 {
        2.0
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![1.0, -0.5]
    }
    fn dynamics(&self, _t: f64, x: &[f64], p: &[f64], dx: &mut [f64]) {
        dx[0] = p[0] * x[1];
        dx[1] = -p[1] * x[0];
    }
    fn running_cost(&self, _t: f64, _x: &[f64], _p: &[f64]) -> f64 {
        0.0
    }
    fn terminal_cost(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
