//! Continuous-time policy gradients for structured feedback controllers.
//!
//! The crate trains the tunable gains of a fixed-structure controller,
//! parametrised by a small neural network, by integrating the closed loop
//! forward and a costate system backward (interpolating adjoint). The
//! bundled example is a pitch-plane airframe flown by a three-loop
//! acceleration autopilot.
//!
//! Modules, bottom-up:
//! - [`ode`]: adaptive Tsitouras 5(4) and fixed-step Euler with dense output
//! - [`sensitivity`]: cost and exact gradient via the adjoint method, plus a
//!   finite-difference oracle
//! - [`policy`]: MLP gain map with exact Jacobians
//! - [`airframe`]: plant, autopilot, reference model and running cost
//! - [`trainer`]: ensemble objective and the ADAM → BFGS optimisation loop
//!
//! Ensemble members and finite-difference coordinates are evaluated on the
//! rayon pool when the `parallel` feature is enabled (default); results are
//! always reduced in index order, so outputs do not depend on thread count.

// Range checks are written `!(x > 0.0)` so that NaN is rejected as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airframe;
pub mod exec;
pub mod ode;
pub mod policy;
pub mod sensitivity;
pub mod trainer;

pub use exec::Execution;
pub use ode::{OdeProblem, OdeSolution, SolveStatus, SolverConfig};
pub use policy::{GainVector, MlpSpec};
pub use sensitivity::{CtpgProblem, DerivativeProvider, GradientResult};
