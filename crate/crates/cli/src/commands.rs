use std::fs;
use std::io::Write;
use std::path::Path;

use ctpg::airframe::{
    trajectory_rows, write_trajectory_csv, AirframeProblem, AnalyticDerivatives,
    CorruptedDerivatives,
};
use ctpg::policy::init_params;
use ctpg::sensitivity::{
    ctpg_cost_and_gradient, finite_difference_gradient, forward_pass, max_relative_error,
};
use ctpg::trainer::{self, StopReason, TrainError, TrainOutcome};
use ctpg::{MlpSpec, SolverConfig};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Case, RunConfig};
use crate::snapshot::Snapshot;
use crate::{CliError, ExportGainsArgs, GradcheckArgs, SimulateArgs, TrainArgs};

pub const LEARNING_CURVE_FILE: &str = "learning_curve.csv";
pub const SNAPSHOT_FILE: &str = "params.snapshot";
pub const SUMMARY_FILE: &str = "summary.json";
/// Written instead of the normal artifacts when training aborts.
pub const FAILED_SNAPSHOT_FILE: &str = "failed_iterate.snapshot";

/// Pass criterion for `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;
const GRADCHECK_HIDDEN: usize = 4;

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize)]
struct Summary {
    case: Case,
    seed: u64,
    members: usize,
    param_count: usize,
    initial_cost: f64,
    final_cost: f64,
    iterations: usize,
    adam_iterations: usize,
    bfgs_iterations: usize,
    phase1_stop: StopReason,
    phase2_stop: StopReason,
    wall_s: f64,
}

impl Summary {
    fn new(cfg: &RunConfig, spec: &MlpSpec, out: &TrainOutcome) -> Self {
        let adam = out
            .record
            .entries
            .iter()
            .filter(|e| e.phase == trainer::Phase::Adam)
            .count();
        Self {
            case: cfg.case,
            seed: cfg.seed,
            members: cfg.grid.len(),
            param_count: spec.param_count(),
            initial_cost: out.record.entries.first().map_or(f64::NAN, |e| e.cost),
            final_cost: out.cost,
            iterations: out.record.len(),
            adam_iterations: adam,
            bfgs_iterations: out.record.len() - adam,
            phase1_stop: out.phase1_stop,
            phase2_stop: out.phase2_stop,
            wall_s: out.wall_s,
        }
    }
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(dir) = &args.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(case) = args.case {
        cfg.case = case;
    }
    cfg.validate()?;
    let (spec, train_cfg) = cfg.resolved();
    info!(
        "training case {} with seed {} on {} members, {} parameters",
        cfg.case,
        cfg.seed,
        cfg.grid.len(),
        spec.param_count()
    );

    let outcome = trainer::train(&cfg.grid, &spec, &cfg.aero, cfg.seed, &train_cfg);
    create_dir(&cfg.output_dir)?;
    let out = match outcome {
        Ok(out) => out,
        Err(TrainError::Unrecoverable {
            iteration,
            params,
            source,
        }) => {
            let path = cfg.output_dir.join(FAILED_SNAPSHOT_FILE);
            write_file(
                &path,
                Snapshot::new(&spec, cfg.seed, params).to_json().as_bytes(),
            )?;
            return Err(CliError::Training(format!(
                "iteration {iteration}: {source} (iterate saved to {})",
                path.display()
            )));
        }
        Err(e) => return Err(CliError::Training(e.to_string())),
    };

    let mut curve = Vec::new();
    out.record.write_csv(&mut curve).expect("in-memory write");
    write_file(&cfg.output_dir.join(LEARNING_CURVE_FILE), &curve)?;
    let snap = Snapshot::new(&spec, cfg.seed, out.params.clone());
    write_file(
        &cfg.output_dir.join(SNAPSHOT_FILE),
        snap.to_json().as_bytes(),
    )?;
    let summary = Summary::new(&cfg, &spec, &out);
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    text.push('\n');
    write_file(&cfg.output_dir.join(SUMMARY_FILE), text.as_bytes())?;
    info!(
        "final cost {:.6} after {} iterations ({:.1} s); artifacts in {}",
        summary.final_cost,
        summary.iterations,
        summary.wall_s,
        cfg.output_dir.display()
    );
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    cfg.validate()?;
    let snap = Snapshot::read(&args.params)?;
    let (_, train_cfg) = cfg.resolved();
    let mut prob = AirframeProblem::new(cfg.aero.clone(), snap.spec(), args.h0, args.v0, args.cmd);
    prob.t0 = train_cfg.horizon[0];
    prob.tf = train_cfg.horizon[1];
    let fwd = forward_pass(&prob, &snap.params, &train_cfg.solver)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let rows = trajectory_rows(&prob, &snap.params, &fwd.solution)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &rows).expect("in-memory write");
    write_file(&args.out, &buf)?;
    if let Some(last) = rows.last() {
        info!(
            "t = {} s: a_z = {:.4} m/s² (command {})",
            last.t, last.a_z, args.cmd
        );
    }
    Ok(())
}

/// Outcome of one adjoint-versus-FD comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub member: (f64, f64, f64),
    pub max_relative_error: f64,
    pub worst_coordinate: usize,
    pub adjoint: f64,
    pub finite_difference: f64,
}

pub fn gradcheck_report(
    cfg: &RunConfig,
    seed: u64,
    corrupt: Option<f64>,
) -> Result<GradcheckReport, CliError> {
    let (mut spec, train_cfg) = cfg.resolved();
    spec.layer_sizes = vec![3, GRADCHECK_HIDDEN, 3];
    let members = cfg.grid.members();
    let member = members[ChaCha8Rng::seed_from_u64(seed).random_range(0..members.len())];
    let mut prob =
        AirframeProblem::new(cfg.aero.clone(), spec.clone(), member.0, member.1, member.2);
    prob.t0 = train_cfg.horizon[0];
    prob.tf = train_cfg.horizon[1];
    let p = init_params(&spec, seed);
    // adaptive-step noise would swamp the difference quotients at loose tolerances
    let solver = SolverConfig::with_tolerances(1e-10, 1e-10);

    let adjoint = match corrupt {
        None => ctpg_cost_and_gradient(&prob, &AnalyticDerivatives, &p, &solver),
        Some(factor) => ctpg_cost_and_gradient(
            &prob,
            &CorruptedDerivatives {
                inner: AnalyticDerivatives,
                factor,
            },
            &p,
            &solver,
        ),
    }
    .map_err(|e| CliError::Solver(e.to_string()))?
    .gradient;
    let fd = finite_difference_gradient(&prob, &p, &solver, 1e-6, train_cfg.execution)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    let (worst, _) = adjoint
        .iter()
        .zip(&fd)
        .map(|(a, f)| (a - f).abs())
        .enumerate()
        .fold(
            (0, -1.0),
            |best, (i, d)| if d > best.1 { (i, d) } else { best },
        );
    Ok(GradcheckReport {
        member,
        max_relative_error: max_relative_error(&adjoint, &fd),
        worst_coordinate: worst,
        adjoint: adjoint[worst],
        finite_difference: fd[worst],
    })
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    cfg.validate()?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let r = gradcheck_report(&cfg, seed, args.corrupt_derivatives)?;
    println!(
        "member h0={} V0={} cmd={}: max relative error {:e}",
        r.member.0, r.member.1, r.member.2, r.max_relative_error
    );
    if r.max_relative_error < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::GradientMismatch(format!(
            "max relative error {:e} >= {GRADCHECK_TOLERANCE:e}; worst coordinate {} (adjoint {:e}, finite difference {:e})",
            r.max_relative_error, r.worst_coordinate, r.adjoint, r.finite_difference
        )))
    }
}

/// Parses `lo:hi:n` into `n` evenly spaced points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::GridSpec(format!("{spec:?}: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad("expected lo:hi:n"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("hi is not a number"))?;
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| bad("n is not a positive integer"))?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(bad("bounds must be finite"));
    }
    match n {
        0 => Err(bad("n must be at least 1")),
        1 if lo == hi => Ok(vec![lo]),
        1 => Err(bad("a single point needs lo == hi")),
        _ if lo >= hi => Err(bad("lo must be below hi")),
        _ => Ok((0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect()),
    }
}

pub fn export_gains(args: &ExportGainsArgs) -> Result<(), CliError> {
    let alphas = parse_grid(&args.alpha)?;
    let machs = parse_grid(&args.mach)?;
    if !args.h.is_finite() {
        return Err(CliError::GridSpec("altitude must be finite".into()));
    }
    let snap = Snapshot::read(&args.params)?;
    let spec = snap.spec();
    let mut buf = Vec::new();
    writeln!(buf, "alpha,M,K_A,K_I,K_R").expect("in-memory write");
    for &alpha in &alphas {
        for &mach in &machs {
            let input = spec.normalisers.normalise(alpha, mach, args.h);
            let k = spec
                .evaluate(&snap.params, &input)
                .map_err(|e| CliError::Snapshot(e.to_string()))?;
            writeln!(buf, "{alpha},{mach},{},{},{}", k[0], k[1], k[2]).expect("in-memory write");
        }
    }
    write_file(&args.out, &buf)
}
