//! Joint design of a unimodular MIMO-ISAC transmit waveform and a full-power
//! radar receive filter with per-range-bin sidelobe level control.
//!
//! The solver minimizes a weighted sum of radar beampattern mismatch and
//! multi-user communication interference over the constraint set
//! {|x_ij| = P_x, ||F||_F^2 = P_F, ||X J_k F^H||_F <= xi} using an inexact
//! augmented Lagrangian method whose subproblems are handled by a cyclic
//! block scheme with closed-form updates for every block.

pub mod alm;
pub mod bsum;
pub mod config;
pub mod error;
pub mod eval;
pub mod feasibility;
pub mod linalg;
pub mod model;

pub use alm::{run, run_with_options, DualState, OuterReport, RunOptions};
pub use bsum::{solve_subproblem, DesignState, InnerReport};
pub use config::ProblemConfig;
pub use error::{Error, Result};
pub use feasibility::{find_feasible, FeasiblePoint};
pub use model::ProblemData;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
