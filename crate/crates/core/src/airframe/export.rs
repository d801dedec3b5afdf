use std::io::{self, Write};

use super::{AirframeError, AirframeProblem};
use crate::ode::OdeSolution;

pub const TRAJECTORY_HEADER: &str =
    "t,h,V,alpha,q,theta,delta,delta_dot,x_c,a_z,a_z_ref,a_z_cmd,delta_c,K_A,K_I,K_R";

/// One saved instant of a closed-loop run, with the derived signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    /// `[h, V, α, q, θ, δ, δ̇, x_c, a_z_ref]`
    pub state: [f64; 9],
    pub a_z: f64,
    pub a_z_cmd: f64,
    pub delta_c: f64,
    pub gains: [f64; 3],
}

/// Rows on the solution's save grid. Extra trailing components (the cost
/// quadrature of a forward pass) are ignored.
pub fn trajectory_rows(
    problem: &AirframeProblem,
    p: &[f64],
    solution: &OdeSolution,
) -> Result<Vec<TrajectoryRow>, AirframeError> {
    solution
        .save_times
        .iter()
        .zip(&solution.save_states)
        .map(|(&t, z)| {
            let s = problem.signals(t, &z[..9], p)?;
            let mut state = [0.0; 9];
            state.copy_from_slice(&z[..9]);
            Ok(TrajectoryRow {
                t,
                state,
                a_z: s.a_z,
                a_z_cmd: problem.cmd.a_z_cmd,
                delta_c: s.delta_c,
                gains: s.gains.to_array(),
            })
        })
        .collect()
}

pub fn write_trajectory_csv<W: Write>(mut w: W, rows: &[TrajectoryRow]) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        write!(w, "{}", r.t)?;
        for v in r.state.iter().take(8) {
            write!(w, ",{v}")?;
        }
        writeln!(
            w,
            ",{},{},{},{},{},{},{}",
            r.a_z, r.state[8], r.a_z_cmd, r.delta_c, r.gains[0], r.gains[1], r.gains[2]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airframe::AeroParams;
    use crate::policy::MlpSpec;
    use crate::sensitivity::forward_pass;
    use crate::SolverConfig;

    #[test]
    fn zero_policy_trajectory_has_midpoint_gains() {
        let spec = MlpSpec::default();
        let prob = AirframeProblem::new(AeroParams::default(), spec.clone(), 5000.0, 800.0, -20.0);
        let p = vec![0.0; spec.param_count()];
        let fwd = forward_pass(&prob, &p, &SolverConfig::default()).unwrap();
        let rows = trajectory_rows(&prob, &p, &fwd.solution).unwrap();
        assert_eq!(rows.len(), 301);
        let first = rows[0].gains;
        assert!(rows.iter().all(|r| r.gains == first));

        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &rows[..2]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines[1].split(',').count(), 16);
        assert!(text.ends_with('\n'));
    }
}
