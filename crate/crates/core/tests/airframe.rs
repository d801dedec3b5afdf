use ctpg::airframe::{
    trajectory_rows, AeroParams, AirframeProblem, AnalyticDerivatives, ClosedLoopState,
    CorruptedDerivatives, STATE_DIM,
};
use ctpg::policy::init_params;
use ctpg::sensitivity::{ctpg_cost_and_gradient, forward_pass, CentralDifference};
use ctpg::{DerivativeProvider, MlpSpec, SolverConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row_error(a: &DMatrix<f64>, n: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| {
            let scale = n.row(i).amax();
            let diff = (a.row(i) - n.row(i)).amax();
            if scale == 0.0 {
                diff
            } else {
                diff / scale
            }
        })
        .fold(0.0, f64::max)
}

#[test]
fn analytic_partials_match_numeric_over_many_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for hidden in [4, 10] {
        let spec = MlpSpec::with_hidden(hidden);
        for _ in 0..50 {
            let cmd = rng.random_range(-100.0..100.0);
            let prob =
                AirframeProblem::new(AeroParams::default(), spec.clone(), 6000.0, 800.0, cmd);
            let p = init_params(&spec, rng.random());
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let x = [
                rng.random_range(3000.0..9000.0),
                rng.random_range(500.0..1000.0),
                sign * rng.random_range(0.005..0.35),
                rng.random_range(-1.5..1.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.3..0.3),
                rng.random_range(-3.0..3.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-100.0..100.0),
            ];
            let a = AnalyticDerivatives.dynamics_partials(&prob, 0.0, &x, &p);
            let n = CentralDifference::default().dynamics_partials(&prob, 0.0, &x, &p);
            assert!(row_error(&a.dfdx, &n.dfdx) < 1e-5);
            assert!(row_error(&a.dfdp, &n.dfdp) < 1e-5);
            // L is one output: its gradient over (x, p) is a single row
            let scale = n.dldx.amax().max(n.dldp.amax());
            let diff = (&a.dldx - &n.dldx).amax().max((&a.dldp - &n.dldp).amax());
            assert!(diff / scale < 1e-5, "{}", diff / scale);
        }
    }
}

#[test]
fn initial_policy_flies_the_whole_horizon() {
    let spec = MlpSpec::default();
    let p = init_params(&spec, 0);
    for cmd in [-100.0, 0.0, 100.0] {
        let prob = AirframeProblem::new(AeroParams::default(), spec.clone(), 8000.0, 700.0, cmd);
        let fwd = forward_pass(&prob, &p, &SolverConfig::default()).unwrap();
        assert!(fwd.cost.is_finite() && fwd.cost > 0.0);
        let rows = trajectory_rows(&prob, &p, &fwd.solution).unwrap();
        assert_eq!(rows.len(), 301);
        assert_eq!(
            rows[0].state.to_vec(),
            ClosedLoopState::initial(8000.0, 700.0).to_vec()
        );
        assert!(rows.iter().all(|r| r.state.iter().all(|v| v.is_finite())));
        assert_eq!(fwd.solution.dim(), STATE_DIM + 1);
    }
}

#[test]
fn corrupted_partials_move_the_gradient() {
    let spec = MlpSpec::with_hidden(4);
    let prob = AirframeProblem::new(AeroParams::default(), spec.clone(), 5000.0, 800.0, -50.0);
    let p = init_params(&spec, 1);
    let cfg = SolverConfig::default();
    let good = ctpg_cost_and_gradient(&prob, &AnalyticDerivatives, &p, &cfg).unwrap();
    let bad = ctpg_cost_and_gradient(
        &prob,
        &CorruptedDerivatives {
            inner: AnalyticDerivatives,
            factor: 1.1,
        },
        &p,
        &cfg,
    )
    .unwrap();
    assert_eq!(good.cost, bad.cost);
    let rel = ctpg::sensitivity::max_relative_error(&bad.gradient, &good.gradient);
    assert!(rel > 0.05, "{rel}");
}
