//! Constructive solver for a mean-field game of finite-fuel capacity
//! expansion.
//!
//! The equilibrium action boundary `b(t, y)` solves a nonlinear Volterra
//! integral equation coupled to the mean field `m(t)` of the population's
//! installed capacity. The solver nests two loops:
//!
//! * an inner Picard iteration ([`solver::PicardSolver`]) that solves the
//!   boundary equation for a frozen mean field, using Gaussian closed forms
//!   of the time kernels;
//! * an outer game iteration ([`game::run_game`]) that re-estimates the mean
//!   field by Monte Carlo over Skorokhod-reflected controlled paths
//!   ([`meanfield`]) and feeds it back.
//!
//! [`diagnostics`] implements the validation suites (integral-equation
//! residual, reflection statistics, monotonicity audits, smooth fit), and
//! [`oracle`] provides an independent backward-induction solver of the
//! stopping problem used to cross-check the boundary.

// Validators use `!(x > 0.0)` so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod game;
pub mod meanfield;
pub mod model;
pub mod normal;
pub mod oracle;
pub mod solver;
pub mod surface;

pub use error::MfgError;
pub use game::{run_game, GameConfig, GameIteration, GameRun};
pub use meanfield::{
    estimate_mean_field, euler_step, invert_boundary, simulate_bundles, simulate_path,
    simulate_representative, InitialLaw, InverseSurface, InversionStats, PathBundle,
};
pub use model::{terminal_boundary, Grid, ModelParams, Payoff};
pub use normal::{erfc, normal_cdf, normal_pdf, normal_sf};
pub use solver::{PicardRun, PicardSolver, QuadRule, UpdateStats};
pub use surface::{cumulative_trapezoid, BoundarySurface, MeanField};
